//! Codebook-free trials.
//!
//! Given the transmitted chain and the received sequence, each competing
//! codeword at a stage is an independent draw from the layer law given the
//! already-fixed coarser layer, so whether it passes the threshold is a
//! Bernoulli event with a probability `q` that can be computed exactly by
//! grouping letters by context and enumerating symbol counts. The number of
//! passing competitors is then `Binomial(M - 1, q)`, of which only the
//! categories 0, 1 and at least 2 matter.
//!
//! Competitors are drawn independently for each receiver, so per-receiver
//! error laws are exact while the joint law across receivers is not.

use rand::Rng;

use super::codebook::transmit_with;
use super::{SimConfig, Stage, Tables, TrialOutcome};
use crate::error::{Error, Result};
use crate::rng::sample_cdf;

/// Largest intermediate list built while enumerating symbol counts.
pub const ENUMERATION_CAP: usize = 4_000_000;

/// Letters sharing one context: `count` positions where the competing
/// symbol is drawn from `law` and contributes `values[s]` to the score.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterGroup {
    pub count: usize,
    pub law: Vec<f64>,
    pub values: Vec<f64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// `(score, probability)` over all symbol-count vectors of one group,
/// leaving out scores of `-inf`.
fn group_law(g: &LetterGroup, lnf: &[f64]) -> Vec<(f64, f64)> {
    let support: Vec<usize> = (0..g.law.len()).filter(|&s| g.law[s] > 0.0).collect();
    let mut out = Vec::new();
    let mut counts = vec![0usize; support.len()];
    fn rec(
        g: &LetterGroup,
        lnf: &[f64],
        support: &[usize],
        at: usize,
        left: usize,
        counts: &mut [usize],
        out: &mut Vec<(f64, f64)>,
    ) {
        if at + 1 == support.len() {
            counts[at] = left;
            let mut value = 0.0;
            let mut lnp = lnf[g.count];
            for (i, &s) in support.iter().enumerate() {
                let k = counts[i];
                if k > 0 {
                    value += k as f64 * g.values[s];
                    lnp += k as f64 * g.law[s].ln() - lnf[k];
                }
            }
            if value > f64::NEG_INFINITY {
                out.push((value, lnp.exp()));
            }
            return;
        }
        for k in 0..=left {
            counts[at] = k;
            rec(g, lnf, support, at + 1, left - k, counts, out);
        }
    }
    if g.count == 0 {
        return vec![(0.0, 1.0)];
    }
    rec(g, lnf, &support, 0, g.count, &mut counts, &mut out);
    out
}

fn convolve(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if a.len().saturating_mul(b.len()) > ENUMERATION_CAP {
        return Err(Error::NotApplicable(format!(
            "exact pass probability needs {} x {} terms, above {ENUMERATION_CAP}",
            a.len(),
            b.len()
        )));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(va, pa) in a {
        for &(vb, pb) in b {
            out.push((va + vb, pa * pb));
        }
    }
    Ok(out)
}

/// `P[sum of letter scores > threshold]` when every letter of group `g`
/// independently takes symbol `s` with probability `g.law[s]`.
///
/// The groups are split into two halves whose score laws are enumerated
/// separately and then matched through a sorted tail-sum table.
pub fn pass_probability(groups: &[LetterGroup], threshold: f64) -> Result<f64> {
    let max_count = groups.iter().map(|g| g.count).max().unwrap_or(0);
    let lnf = ln_factorials(max_count);
    let mut laws: Vec<Vec<(f64, f64)>> = groups.iter().map(|g| group_law(g, &lnf)).collect();
    if laws.iter().any(Vec::is_empty) {
        return Ok(0.0);
    }
    laws.sort_by_key(|l| std::cmp::Reverse(l.len()));
    let mut halves: [Vec<(f64, f64)>; 2] = [vec![(0.0, 1.0)], vec![(0.0, 1.0)]];
    for law in &laws {
        let h = if halves[0].len() <= halves[1].len() { 0 } else { 1 };
        halves[h] = convolve(&halves[h], law)?;
    }
    let [a, mut b] = halves;
    b.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut tail = vec![0.0; b.len() + 1];
    for i in (0..b.len()).rev() {
        tail[i] = tail[i + 1] + b[i].1;
    }
    let mut total = 0.0;
    for &(va, pa) in &a {
        let need = threshold - va;
        let from = b.partition_point(|x| x.0 <= need);
        total += pa * tail[from];
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Number of passing competitors out of `competitors`, capped at 2.
fn passing_competitors<R: Rng + ?Sized>(competitors: f64, q: f64, rng: &mut R) -> u8 {
    let r: f64 = rng.random();
    let log_miss = (-q).ln_1p();
    let p0 = (competitors * log_miss).exp();
    if r < p0 {
        return 0;
    }
    let rest = if competitors > 1.0 {
        ((competitors - 1.0) * log_miss).exp()
    } else {
        1.0
    };
    if r < p0 + competitors * q * rest {
        1
    } else {
        2
    }
}

fn sample_word<R: Rng + ?Sized>(context: &[u16], cdfs: &[Vec<f64>], rng: &mut R) -> Vec<u16> {
    context
        .iter()
        .map(|&c| sample_cdf(rng, &cdfs[c as usize]) as u16)
        .collect()
}

/// Groups letters by `(context symbol, received symbol)`.
fn grouped(
    context: &[u16],
    y: &[u16],
    ny: usize,
    law_of: impl Fn(usize) -> Vec<f64>,
    values_of: impl Fn(usize, usize) -> Vec<f64>,
    contexts: usize,
) -> Vec<LetterGroup> {
    let mut counts = vec![0usize; contexts * ny];
    for (&c, &yy) in context.iter().zip(y) {
        counts[c as usize * ny + yy as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| LetterGroup {
            count: k,
            law: law_of(i / ny),
            values: values_of(i / ny, i % ny),
        })
        .collect()
}

pub(crate) fn ensemble_trial<R: Rng + ?Sized>(
    config: &SimConfig,
    t: &Tables,
    counts: [f64; 3],
    rng: &mut R,
) -> Result<TrialOutcome> {
    let n = config.n;
    let zeros = vec![0u16; n];
    let u = sample_word(&zeros, std::slice::from_ref(&t.u_cdf), rng);
    let v = sample_word(&u, &t.v_cdf, rng);
    let x = sample_word(&v, &t.x_cdf, rng);
    let ys = transmit_with(t, &x, rng);
    let (nu, nv, nx) = (t.nu, t.nv, t.nx);

    let mut outcome = [None; 3];
    for (r, slot) in outcome.iter_mut().enumerate() {
        let rt = &t.receivers[r];
        let (y, ny) = (&ys[r], rt.ny);
        for stage in Stage::ALL.into_iter().take(super::stages_of(r + 1)) {
            let competitors = counts[2 - stage.index()] - 1.0;
            if competitors == 0.0 {
                continue;
            }
            let threshold = n as f64 * rt.thr[stage.index()];
            let (true_score, groups) = match stage {
                Stage::U => (
                    u.iter().zip(y).map(|(&a, &b)| rt.dens_u[a as usize * ny + b as usize]).sum::<f64>(),
                    grouped(
                        &zeros,
                        y,
                        ny,
                        |_| t.pu.clone(),
                        |_, yy| (0..nu).map(|s| rt.dens_u[s * ny + yy]).collect(),
                        1,
                    ),
                ),
                Stage::V => (
                    u.iter()
                        .zip(&v)
                        .zip(y)
                        .map(|((&a, &b), &c)| rt.dens_v[(a as usize * nv + b as usize) * ny + c as usize])
                        .sum::<f64>(),
                    grouped(
                        &u,
                        y,
                        ny,
                        |c| t.pv[c * nv..(c + 1) * nv].to_vec(),
                        |c, yy| (0..nv).map(|s| rt.dens_v[(c * nv + s) * ny + yy]).collect(),
                        nu,
                    ),
                ),
                Stage::X => (
                    v.iter()
                        .zip(&x)
                        .zip(y)
                        .map(|((&a, &b), &c)| rt.dens_x[(a as usize * nx + b as usize) * ny + c as usize])
                        .sum::<f64>(),
                    grouped(
                        &v,
                        y,
                        ny,
                        |c| t.px[c * nx..(c + 1) * nx].to_vec(),
                        |c, yy| (0..nx).map(|s| rt.dens_x[(c * nx + s) * ny + yy]).collect(),
                        nv,
                    ),
                ),
            };
            let q = pass_probability(&groups, threshold)?;
            let passing = passing_competitors(competitors, q, rng);
            if !(true_score > threshold && passing == 0) {
                *slot = Some(stage);
                break;
            }
        }
    }
    Ok(outcome)
}
