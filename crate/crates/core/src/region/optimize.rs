//! Multi-start local ascent for `max sum_l w_l R_l(aux)`.
//!
//! Chain positions run top-down: position 0 is `U_k`, position `k - 1` is
//! `X`. Factor `p` maps position `p` to `p + 1`. With `C_p` the rows
//! `p(x | u)` at position `p`, the objective is
//!
//! ```text
//! sum_{p < k-1} sum_u m_p(u) [ w_{k-p-1} H(C_p(u) W_{k-p-1}) - w_{k-p} H(C_p(u) W_{k-p}) ]
//!     + w_k H(p(x) W_k) - w_1 sum_x p(x) H(W_1(x))
//! ```
//!
//! (receivers 1-based). Gradients are propagated back through the chain by
//! hand; each row of a factor lives on its own simplex.

use rayon::prelude::*;

use super::{check_weights, default_caps, rates_from_aux, AuxiliaryJoint, RateTuple};
use crate::channel::{entropy, BroadcastChannel, ChannelMatrix, ProbVector};
use crate::error::{Error, Result};
use crate::rng::{simplex_point, task_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub restarts: usize,
    /// Maximum number of full ascent cycles per restart.
    pub iterations: usize,
    pub seed: u64,
    /// `[|U_k|, ..., |U_2|]`; `None` uses [`default_caps`].
    pub caps: Option<Vec<usize>>,
    /// A restart stops once a full cycle improves the objective by less.
    pub convergence: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            iterations: 500,
            seed: 0,
            caps: None,
            convergence: 1e-9,
        }
    }
}

pub(crate) struct Objective<'a> {
    weights: &'a [f64],
    bc: &'a BroadcastChannel,
    /// `[|U_k|, ..., |U_2|, |X|]`.
    cards: Vec<usize>,
    /// `H(W_1(x))` per input.
    row_entropy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Params {
    pub top: Vec<f64>,
    /// Factor `p` is `cards[p] x cards[p + 1]`, row-major.
    pub factors: Vec<Vec<f64>>,
}

struct Forward {
    /// `m[p]` marginal at position `p`.
    m: Vec<Vec<f64>>,
    /// `c[p]` is `cards[p] x |X|`; the entry for `X` itself is left empty.
    c: Vec<Vec<f64>>,
}

const LOG_FLOOR: f64 = 1e-300;

impl<'a> Objective<'a> {
    pub(crate) fn new(weights: &'a [f64], bc: &'a BroadcastChannel, aux_caps: &[usize]) -> Self {
        let mut cards = aux_caps.to_vec();
        cards.push(bc.input_size());
        let row_entropy = bc.receiver(0).rows().map(entropy).collect();
        Self {
            weights,
            bc,
            cards,
            row_entropy,
        }
    }

    fn k(&self) -> usize {
        self.cards.len()
    }

    fn x(&self) -> usize {
        self.cards[self.k() - 1]
    }

    /// Receivers (0-based) with `+w` and `-w` coefficients at position `p`.
    fn receivers_at(&self, p: usize) -> (usize, usize) {
        let k = self.k();
        (k - p - 2, k - p - 1)
    }

    fn forward(&self, params: &Params) -> Forward {
        let k = self.k();
        let x = self.x();
        let mut m = Vec::with_capacity(k);
        m.push(params.top.clone());
        for p in 0..k - 1 {
            let (rows, cols) = (self.cards[p], self.cards[p + 1]);
            let f = &params.factors[p];
            let mut next = vec![0.0; cols];
            for (u, &mu) in m[p].iter().enumerate().take(rows) {
                for v in 0..cols {
                    next[v] += mu * f[u * cols + v];
                }
            }
            m.push(next);
        }
        let mut c = vec![Vec::new(); k];
        for p in (0..k - 1).rev() {
            let (rows, cols) = (self.cards[p], self.cards[p + 1]);
            let f = &params.factors[p];
            if p == k - 2 {
                c[p] = f.clone();
                continue;
            }
            let below = &c[p + 1];
            let mut cp = vec![0.0; rows * x];
            for u in 0..rows {
                for v in 0..cols {
                    let w = f[u * cols + v];
                    if w != 0.0 {
                        for xi in 0..x {
                            cp[u * x + xi] += w * below[v * x + xi];
                        }
                    }
                }
            }
            c[p] = cp;
        }
        Forward { m, c }
    }

    pub(crate) fn value(&self, params: &Params) -> f64 {
        self.evaluate(params, false).0
    }

    /// Objective value and, if asked, the gradient with respect to the top
    /// distribution and every factor (same layout as [`Params`]).
    pub(crate) fn evaluate(&self, params: &Params, want_grad: bool) -> (f64, Option<Params>) {
        let k = self.k();
        let x = self.x();
        let w = self.weights;
        let fw = self.forward(params);

        let mut value = 0.0;
        let mut gm: Vec<Vec<f64>> = self.cards.iter().map(|&n| vec![0.0; n]).collect();
        let mut gc: Vec<Vec<f64>> = (0..k).map(|p| vec![0.0; fw.c[p].len()]).collect();

        let mut grow = vec![0.0; x];
        for p in 0..k - 1 {
            let (plus, minus) = self.receivers_at(p);
            let terms = [(plus, w[plus]), (minus, -w[minus])];
            for u in 0..self.cards[p] {
                let mu = fw.m[p][u];
                let row = &fw.c[p][u * x..(u + 1) * x];
                grow.iter_mut().for_each(|g| *g = 0.0);
                let mut phi = 0.0;
                for &(l, coef) in &terms {
                    if coef == 0.0 {
                        continue;
                    }
                    let ch = self.bc.receiver(l);
                    let r = ch.push_forward(row);
                    phi += coef * entropy(&r);
                    if want_grad {
                        let logs: Vec<f64> = r.iter().map(|&v| -v.max(LOG_FLOOR).log2()).collect();
                        for (xi, g) in grow.iter_mut().enumerate() {
                            let s: f64 = ch.row(xi).iter().zip(&logs).map(|(a, b)| a * b).sum();
                            *g += coef * s;
                        }
                    }
                }
                value += mu * phi;
                if want_grad {
                    let mut dot = 0.0;
                    for xi in 0..x {
                        gc[p][u * x + xi] = mu * grow[xi];
                        dot += grow[xi] * row[xi];
                    }
                    gm[p][u] = dot;
                }
            }
        }

        let px = &fw.m[k - 1];
        let last = self.bc.receiver(k - 1);
        let r = last.push_forward(px);
        value += w[k - 1] * entropy(&r);
        value -= w[0]
            * px
                .iter()
                .zip(&self.row_entropy)
                .map(|(p, h)| p * h)
                .sum::<f64>();

        if !want_grad {
            return (value, None);
        }

        let logs: Vec<f64> = r.iter().map(|&v| -v.max(LOG_FLOOR).log2()).collect();
        for (xi, g) in gm[k - 1].iter_mut().enumerate().take(x) {
            let s: f64 = last.row(xi).iter().zip(&logs).map(|(a, b)| a * b).sum();
            *g = w[k - 1] * s - w[0] * self.row_entropy[xi];
        }

        let mut gf: Vec<Vec<f64>> = params.factors.iter().map(|f| vec![0.0; f.len()]).collect();

        // Through C_p = F_p C_{p+1}, top-down.
        for p in 0..k - 1 {
            let (rows, cols) = (self.cards[p], self.cards[p + 1]);
            let f = &params.factors[p];
            if p == k - 2 {
                for (g, &v) in gf[p].iter_mut().zip(&gc[p]) {
                    *g += v;
                }
                continue;
            }
            let (upper, lower) = gc.split_at_mut(p + 1);
            let gcp = &upper[p];
            let gcn = &mut lower[0];
            let below = &fw.c[p + 1];
            for u in 0..rows {
                for v in 0..cols {
                    let mut s = 0.0;
                    for xi in 0..x {
                        s += gcp[u * x + xi] * below[v * x + xi];
                        gcn[v * x + xi] += f[u * cols + v] * gcp[u * x + xi];
                    }
                    gf[p][u * cols + v] += s;
                }
            }
        }

        // Through m_{p+1} = m_p F_p, bottom-up.
        for p in (0..k - 1).rev() {
            let (rows, cols) = (self.cards[p], self.cards[p + 1]);
            let f = &params.factors[p];
            let (upper, lower) = gm.split_at_mut(p + 1);
            let gmp = &mut upper[p];
            let gmn = &lower[0];
            for u in 0..rows {
                let mu = fw.m[p][u];
                let mut s = 0.0;
                for v in 0..cols {
                    s += f[u * cols + v] * gmn[v];
                    gf[p][u * cols + v] += mu * gmn[v];
                }
                gmp[u] += s;
            }
        }

        let grad = Params {
            top: gm.swap_remove(0),
            factors: gf,
        };
        (value, Some(grad))
    }

    pub(crate) fn random_params<R: rand::Rng>(&self, rng: &mut R) -> Params {
        let top = simplex_point(rng, self.cards[0]);
        let factors = (0..self.k() - 1)
            .map(|p| {
                (0..self.cards[p])
                    .flat_map(|_| simplex_point(rng, self.cards[p + 1]))
                    .collect()
            })
            .collect();
        Params { top, factors }
    }

    pub(crate) fn to_aux(&self, params: &Params) -> AuxiliaryJoint {
        let top = ProbVector::normalized(params.top.clone());
        let chain = params
            .factors
            .iter()
            .enumerate()
            .map(|(p, f)| {
                ChannelMatrix::from_flat_unchecked(self.cards[p], self.cards[p + 1], f.clone())
            })
            .collect();
        AuxiliaryJoint::new(top, chain).expect("optimizer keeps chain shapes consistent")
    }

    /// Cyclic block ascent from `params`. Returns the final objective value.
    pub(crate) fn ascend(&self, params: &mut Params, iterations: usize, convergence: f64) -> f64 {
        let blocks = self.k();
        let mut steps = vec![1.0f64; blocks];
        let mut value = self.value(params);
        for _ in 0..iterations {
            let start = value;
            for (b, step) in steps.iter_mut().enumerate() {
                value = self.block_step(params, b, value, step);
            }
            if value - start < convergence {
                break;
            }
        }
        value
    }

    fn block_step(&self, params: &mut Params, block: usize, value: f64, step: &mut f64) -> f64 {
        let (_, grad) = self.evaluate(params, true);
        let grad = grad.unwrap();
        let (cols, current, g, weights): (usize, &[f64], &[f64], Vec<f64>) = if block == 0 {
            (self.cards[0], &params.top, &grad.top, vec![1.0])
        } else {
            let p = block - 1;
            let m = self.forward(params).m.swap_remove(p);
            (
                self.cards[p + 1],
                &params.factors[p],
                &grad.factors[p],
                m.iter().map(|&v| 1.0 / v.max(1e-3)).collect(),
            )
        };
        let current = current.to_vec();
        let g = g.to_vec();

        let mut alpha = *step;
        let mut first = true;
        loop {
            let mut candidate = current.clone();
            for (r, row) in candidate.chunks_mut(cols).enumerate() {
                let scale = alpha * weights[r.min(weights.len() - 1)];
                for (v, gv) in row.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                    *v += scale * gv;
                }
                project_to_simplex(row);
            }
            let ascent: f64 = candidate
                .iter()
                .zip(&current)
                .zip(&g)
                .map(|((n, o), gv)| (n - o) * gv)
                .sum();
            if ascent <= 0.0 {
                *step = alpha;
                return value;
            }
            let trial = self.with_block(params, block, &candidate);
            let new_value = self.value(&trial);
            if new_value >= value + 1e-4 * ascent {
                *params = trial;
                *step = if first { (alpha * 2.0).min(1e6) } else { alpha };
                return new_value;
            }
            first = false;
            alpha *= 0.5;
            if alpha < 1e-14 {
                *step = 1e-6;
                return value;
            }
        }
    }

    fn with_block(&self, params: &Params, block: usize, data: &[f64]) -> Params {
        let mut out = params.clone();
        if block == 0 {
            out.top.copy_from_slice(data);
        } else {
            out.factors[block - 1].copy_from_slice(data);
        }
        out
    }
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_to_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
}

pub(crate) fn resolve_caps(bc: &BroadcastChannel, caps: Option<&[usize]>) -> Result<Vec<usize>> {
    let k = bc.num_receivers();
    let caps = caps.map_or_else(|| default_caps(k, bc.input_size()), <[usize]>::to_vec);
    if caps.len() != k - 1 {
        return Err(Error::DimensionMismatch {
            what: "number of auxiliary caps vs receivers - 1",
            expected: k - 1,
            found: caps.len(),
        });
    }
    if caps.contains(&0) {
        return Err(Error::InvalidArgument("auxiliary caps must be positive".into()));
    }
    Ok(caps)
}

/// Best chain found for `sum_l weights[l] * R_l` by multi-start ascent.
///
/// Each restart draws every factor row uniformly from its simplex and runs
/// cyclic projected-gradient ascent over the factors. The best restart wins;
/// ties go to the lowest restart index.
pub fn maximize_weighted_sum(
    bc: &BroadcastChannel,
    weights: &[f64],
    opts: &OptimizeOptions,
) -> Result<(RateTuple, AuxiliaryJoint)> {
    check_weights(weights, bc.num_receivers())?;
    let caps = resolve_caps(bc, opts.caps.as_deref())?;
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let objective = Objective::new(weights, bc, &caps);

    let results: Vec<(f64, Params)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(opts.seed, r as u64);
            let mut params = objective.random_params(&mut rng);
            let value = objective.ascend(&mut params, opts.iterations, opts.convergence);
            (value, params)
        })
        .collect();

    let mut best = 0;
    for (i, (v, _)) in results.iter().enumerate() {
        if *v > results[best].0 {
            best = i;
        }
    }
    let aux = objective.to_aux(&results[best].1);
    let rates = rates_from_aux(&aux, bc)?;
    Ok((rates, aux))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::binary_entropy;
    use crate::region::rates_by_enumeration;

    fn random_bc(seed: u64, k: usize, x: usize, y: usize) -> BroadcastChannel {
        let mut rng = task_rng(seed, 0);
        BroadcastChannel::new(
            (0..k)
                .map(|_| {
                    ChannelMatrix::from_flat(
                        x,
                        y,
                        (0..x).flat_map(|_| simplex_point(&mut rng, y)).collect(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn objective_matches_weighted_rates() {
        for (seed, k) in [(1, 2), (2, 3), (3, 4)] {
            let bc = random_bc(seed, k, 3, 2);
            let weights: Vec<f64> = (0..k).map(|i| 0.3 + i as f64 * 0.2).collect();
            let caps: Vec<usize> = (0..k - 1).map(|i| 2 + i).collect();
            let obj = Objective::new(&weights, &bc, &caps);
            let mut rng = task_rng(seed, 9);
            for _ in 0..5 {
                let params = obj.random_params(&mut rng);
                let aux = obj.to_aux(&params);
                let direct = rates_by_enumeration(&aux, &bc).unwrap().weighted_sum(&weights);
                assert!((obj.value(&params) - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_along_the_simplex() {
        for (seed, k) in [(4, 2), (5, 3), (6, 4)] {
            let bc = random_bc(seed, k, 3, 3);
            let weights: Vec<f64> = (0..k).map(|i| 1.0 + (i as f64) * 0.7).collect();
            let caps: Vec<usize> = (0..k - 1).map(|i| 3 - i.min(1)).collect();
            let obj = Objective::new(&weights, &bc, &caps);
            let mut rng = task_rng(seed, 1);
            let params = obj.random_params(&mut rng);
            let (_, grad) = obj.evaluate(&params, true);
            let grad = grad.unwrap();

            // Move mass between two entries of one row: stays on the simplex.
            let h = 1e-6;
            let check = |block: usize, row: usize, cols: usize| {
                let (a, b) = (row * cols, row * cols + 1);
                let mut plus = params.clone();
                let mut minus = params.clone();
                let (gp, gm_) = if block == 0 {
                    plus.top[a] += h;
                    plus.top[b] -= h;
                    minus.top[a] -= h;
                    minus.top[b] += h;
                    (grad.top[a], grad.top[b])
                } else {
                    let f = block - 1;
                    plus.factors[f][a] += h;
                    plus.factors[f][b] -= h;
                    minus.factors[f][a] -= h;
                    minus.factors[f][b] += h;
                    (grad.factors[f][a], grad.factors[f][b])
                };
                let numeric = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
                let analytic = gp - gm_;
                assert!(
                    (numeric - analytic).abs() < 1e-5 * (1.0 + analytic.abs()),
                    "block {block} row {row}: {numeric} vs {analytic}"
                );
            };
            check(0, 0, caps[0]);
            for f in 0..k - 1 {
                let cols = if f + 1 < caps.len() { caps[f + 1] } else { 3 };
                for row in 0..caps[f] {
                    check(f + 1, row, cols);
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let mut v = vec![0.5, 0.5];
        project_to_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 0.0, -1.0];
        project_to_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.4, 0.4, 0.4];
        project_to_simplex(&mut v);
        assert!(v.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_receiver_weights_reach_capacities() {
        let bc = BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3]);
        let opts = OptimizeOptions {
            restarts: 8,
            ..OptimizeOptions::default()
        };
        for (l, p) in [0.1, 0.2, 0.3].into_iter().enumerate() {
            let mut w = vec![0.0; 3];
            w[l] = 1.0;
            let (rates, aux) = maximize_weighted_sum(&bc, &w, &opts).unwrap();
            let c = 1.0 - binary_entropy(p);
            assert!((rates[l] - c).abs() < 1e-4, "receiver {l}: {rates:?}");
            assert_eq!(aux.cardinalities(), vec![3, 9, 2]);
        }
    }

    #[test]
    fn argument_errors() {
        let bc = BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3]);
        let opts = OptimizeOptions::default();
        assert_eq!(
            maximize_weighted_sum(&bc, &[0.0, 0.0, 0.0], &opts).unwrap_err(),
            Error::AllZeroWeights
        );
        assert!(matches!(
            maximize_weighted_sum(&bc, &[1.0, 0.0], &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_caps = OptimizeOptions {
            caps: Some(vec![2]),
            ..opts
        };
        assert!(maximize_weighted_sum(&bc, &[1.0, 0.0, 0.0], &bad_caps).is_err());
    }
}
