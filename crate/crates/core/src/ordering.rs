//! Degraded and less-noisy orderings between receivers.
//!
//! `Y_s` is less noisy than `Y_t` when `I(U;Y_s) >= I(U;Y_t)` for every
//! `U -> X -> (Y_s, Y_t)`. Writing `g(p) = H(p W_s) - H(p W_t)`, the
//! difference `I(U;Y_s) - I(U;Y_t)` equals `g(p) - sum_u P(u) g(p_u)`, so the
//! order holds exactly when `g` is concave on the simplex. A single binary
//! `U` violating concavity refutes the order; a degrading channel `M` with
//! `W_t = W_s M` proves it.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;

use crate::channel::{entropy, mutual_information, BroadcastChannel, ChannelMatrix, ProbVector};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, simplex_point, task_rng};
use rand::Rng;

/// Residual below which a degrading channel counts as a certificate.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderStatus {
    /// A degrading channel was found.
    CertifiedLessNoisy,
    /// No violation was found by sampling. Not a proof.
    ConsistentWithLessNoisy,
    /// A binary auxiliary refutes the order.
    NotLessNoisy,
}

impl OrderStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderStatus::CertifiedLessNoisy => "CertifiedLessNoisy",
            OrderStatus::ConsistentWithLessNoisy => "ConsistentWithLessNoisy",
            OrderStatus::NotLessNoisy => "NotLessNoisy",
        }
    }
}

/// A binary `U` with `P(U=0) = lambda`, `X|U=0 ~ p0`, `X|U=1 ~ p1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryWitness {
    pub lambda: f64,
    pub p0: ProbVector,
    pub p1: ProbVector,
    /// `I(U;Y_t) - I(U;Y_s)` in bits.
    pub gap: f64,
}

impl BinaryWitness {
    /// Recomputes `I(U;Y_t) - I(U;Y_s)` directly from the two mutual
    /// informations, without going through the concavity form.
    pub fn recompute_gap(&self, ws: &ChannelMatrix, wt: &ChannelMatrix) -> Result<f64> {
        let pu = ProbVector::new(vec![self.lambda, 1.0 - self.lambda])?;
        let through = |w: &ChannelMatrix| -> Result<f64> {
            let rows = vec![
                crate::channel::output_distribution(&self.p0, w)?.into_inner(),
                crate::channel::output_distribution(&self.p1, w)?.into_inner(),
            ];
            mutual_information(&pu, &ChannelMatrix::new(rows)?)
        };
        Ok(through(wt)? - through(ws)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub status: OrderStatus,
    /// Degrading channel `M` with `W_s M = W_t`, when certified.
    pub certificate: Option<ChannelMatrix>,
    /// Refuting auxiliary, when not less noisy.
    pub witness: Option<BinaryWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderOptions {
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OrderOptions {
    fn default() -> Self {
        Self {
            trials: 10_000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

fn check_pair(ws: &ChannelMatrix, wt: &ChannelMatrix) -> Result<()> {
    if ws.input_size() != wt.input_size() {
        return Err(Error::DimensionMismatch {
            what: "input alphabets of the compared receivers",
            expected: ws.input_size(),
            found: wt.input_size(),
        });
    }
    Ok(())
}

/// Smallest achievable `max |W_s M - W_t|` over row-stochastic `M`, together
/// with a minimizing `M`.
pub fn degradation_residual(
    ws: &ChannelMatrix,
    wt: &ChannelMatrix,
) -> Result<(f64, ChannelMatrix)> {
    check_pair(ws, wt)?;
    let (xs, a_size, b_size) = (ws.input_size(), ws.output_size(), wt.output_size());

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let m: Vec<_> = (0..a_size * b_size)
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    for a in 0..a_size {
        let row: Vec<_> = (0..b_size).map(|b| (m[a * b_size + b], 1.0)).collect();
        lp.add_constraint(&row, ComparisonOp::Eq, 1.0);
    }
    for x in 0..xs {
        for b in 0..b_size {
            let mut expr: Vec<_> = (0..a_size)
                .filter(|&a| ws.entry(x, a) != 0.0)
                .map(|a| (m[a * b_size + b], ws.entry(x, a)))
                .collect();
            expr.push((t, -1.0));
            lp.add_constraint(&expr, ComparisonOp::Le, wt.entry(x, b));
            expr.last_mut().unwrap().1 = 1.0;
            lp.add_constraint(&expr, ComparisonOp::Ge, wt.entry(x, b));
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::InvalidArgument(format!("degradation LP failed: {e}")))?;

    let data: Vec<f64> = m.iter().map(|&v| solution[v].max(0.0)).collect();
    let degrading = ChannelMatrix::from_flat_unchecked(a_size, b_size, data);
    let residual = crate::channel::compose(ws, &degrading)?.max_abs_diff(wt);
    Ok((residual, degrading))
}

/// Looks for a channel `M` with `W_s M = W_t` (so `Y_t` is a degraded
/// version of `Y_s`). Returns it when the residual is at most `tol`.
pub fn is_degraded(
    ws: &ChannelMatrix,
    wt: &ChannelMatrix,
    tol: f64,
) -> Result<Option<ChannelMatrix>> {
    let (residual, m) = degradation_residual(ws, wt)?;
    Ok((residual <= tol).then_some(m))
}

/// `g(p) = H(p W_s) - H(p W_t)`.
fn concavity_gap_fn(ws: &ChannelMatrix, wt: &ChannelMatrix, p: &[f64]) -> f64 {
    entropy(&ws.push_forward(p)) - entropy(&wt.push_forward(p))
}

fn binary_gap(ws: &ChannelMatrix, wt: &ChannelMatrix, lambda: f64, p0: &[f64], p1: &[f64]) -> f64 {
    let mix: Vec<f64> = p0
        .iter()
        .zip(p1)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    lambda * concavity_gap_fn(ws, wt, p0) + (1.0 - lambda) * concavity_gap_fn(ws, wt, p1)
        - concavity_gap_fn(ws, wt, &mix)
}

struct Candidate {
    index: usize,
    lambda: f64,
    p0: Vec<f64>,
    p1: Vec<f64>,
    gap: f64,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    if b.gap > a.gap || (b.gap == a.gap && b.index < a.index) {
        b
    } else {
        a
    }
}

/// Tests `Y_s ⪰ Y_t`.
///
/// A degradedness certificate short-circuits to `CertifiedLessNoisy`.
/// Otherwise every pair of distinct input symbols is tried as a uniform
/// binary `U`, then `opts.trials` random binary auxiliaries; the largest
/// violation beyond `opts.tol` is reported as the witness.
pub fn less_noisy_test(
    ws: &ChannelMatrix,
    wt: &ChannelMatrix,
    opts: &OrderOptions,
) -> Result<OrderVerdict> {
    check_pair(ws, wt)?;
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if let Some(m) = is_degraded(ws, wt, CERTIFICATE_TOL)? {
        return Ok(OrderVerdict {
            status: OrderStatus::CertifiedLessNoisy,
            certificate: Some(m),
            witness: None,
        });
    }

    let n = ws.input_size();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let vertex_best = pairs
        .iter()
        .enumerate()
        .map(|(index, &(i, j))| {
            let p0 = ProbVector::point_mass(n, i).into_inner();
            let p1 = ProbVector::point_mass(n, j).into_inner();
            let gap = binary_gap(ws, wt, 0.5, &p0, &p1);
            Candidate {
                index,
                lambda: 0.5,
                p0,
                p1,
                gap,
            }
        })
        .reduce(better);

    let offset = pairs.len();
    let random_best = (0..opts.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = task_rng(opts.seed, trial as u64);
            let p0 = simplex_point(&mut rng, n);
            let p1 = simplex_point(&mut rng, n);
            let lambda = loop {
                let l: f64 = rng.random();
                if l > 0.0 {
                    break l;
                }
            };
            let gap = binary_gap(ws, wt, lambda, &p0, &p1);
            Candidate {
                index: offset + trial,
                lambda,
                p0,
                p1,
                gap,
            }
        })
        .reduce_with(better);

    let best = match (vertex_best, random_best) {
        (Some(a), Some(b)) => Some(better(a, b)),
        (a, b) => a.or(b),
    };
    Ok(match best {
        Some(c) if c.gap > opts.tol => OrderVerdict {
            status: OrderStatus::NotLessNoisy,
            certificate: None,
            witness: Some(BinaryWitness {
                lambda: c.lambda,
                p0: ProbVector::normalized(c.p0),
                p1: ProbVector::normalized(c.p1),
                gap: c.gap,
            }),
        },
        _ => OrderVerdict {
            status: OrderStatus::ConsistentWithLessNoisy,
            certificate: None,
            witness: None,
        },
    })
}

/// One verdict per adjacent pair `(Y_l, Y_{l+1})` of the claimed order.
pub fn order_chain(bc: &BroadcastChannel, opts: &OrderOptions) -> Result<Vec<OrderVerdict>> {
    (0..bc.num_receivers() - 1)
        .into_par_iter()
        .map(|l| {
            let link = OrderOptions {
                seed: derive_seed(opts.seed, l as u64),
                ..*opts
            };
            less_noisy_test(bc.receiver(l), bc.receiver(l + 1), &link)
        })
        .collect()
}

/// True when no verdict refutes the chain.
pub fn chain_confirmed(verdicts: &[OrderVerdict]) -> bool {
    verdicts
        .iter()
        .all(|v| v.status != OrderStatus::NotLessNoisy)
}
