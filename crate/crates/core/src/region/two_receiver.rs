//! Two-receiver region `R_1 <= I(X;Y_1|U)`, `R_2 <= I(U;Y_2)`.
//!
//! For binary input the weighted sum is solved without the generic
//! optimizer: for a fixed input law `p`, maximizing over `U` is the upper
//! concave envelope of `f(q) = w_1 H(q W_1) - w_2 H(q W_2)` evaluated at `p`,
//! so the problem reduces to a one-dimensional concave maximization over `p`.
//! Larger inputs fall back to [`maximize_weighted_sum`].

use super::{check_weights, maximize_weighted_sum, rates_from_aux, AuxiliaryJoint, OptimizeOptions, RateTuple};
use crate::channel::{entropy, BroadcastChannel, ChannelMatrix, ProbVector};
use crate::error::{Error, Result};

const GRID: usize = 20_000;

fn binary_row(q: f64) -> [f64; 2] {
    [1.0 - q, q]
}

struct Envelope {
    /// Hull vertices `(q, f(q))`, increasing in `q`.
    hull: Vec<(f64, f64)>,
}

impl Envelope {
    fn new(f: impl Fn(f64) -> f64) -> Self {
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for i in 0..=GRID {
            let q = i as f64 / GRID as f64;
            let pt = (q, f(q));
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // Drop b if it lies on or below the chord a -> pt.
                let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(pt);
        }
        Self { hull }
    }

    /// Index `i` with `hull[i].0 <= p <= hull[i + 1].0`.
    fn segment(&self, p: f64) -> usize {
        let i = self.hull.partition_point(|v| v.0 <= p);
        i.saturating_sub(1).min(self.hull.len() - 2)
    }

    fn at(&self, p: f64) -> f64 {
        let i = self.segment(p);
        let (a, b) = (self.hull[i], self.hull[i + 1]);
        let t = (p - a.0) / (b.0 - a.0);
        a.1 + t * (b.1 - a.1)
    }
}

fn binary_input_region(bc: &BroadcastChannel, weights: &[f64]) -> Result<(RateTuple, AuxiliaryJoint)> {
    let (w1, w2) = (bc.receiver(0), bc.receiver(1));
    let (a, b) = (weights[0], weights[1]);
    let h = |w: &ChannelMatrix, q: f64| entropy(&w.push_forward(&binary_row(q)));
    let env = Envelope::new(|q| a * h(w1, q) - b * h(w2, q));
    let (h0, h1) = (entropy(w1.row(0)), entropy(w1.row(1)));
    let value = |p: f64| env.at(p) + b * h(w2, p) - a * ((1.0 - p) * h0 + p * h1);

    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..=GRID {
        let v = value(i as f64 / GRID as f64);
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    // Golden-section refinement; the objective is concave in p.
    let step = 1.0 / GRID as f64;
    let (mut lo, mut hi) = (
        (best as f64 - 1.0).max(0.0) * step,
        (best as f64 + 1.0).min(GRID as f64) * step,
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = hi - ratio * (hi - lo);
        let m2 = lo + ratio * (hi - lo);
        if value(m1) < value(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mut p = 0.5 * (lo + hi);
    if value(p) < best_value {
        p = best as f64 * step;
    }

    let i = env.segment(p);
    let (qa, qb) = (env.hull[i].0, env.hull[i + 1].0);
    let aux = if p <= qa + 1e-15 || p >= qb - 1e-15 {
        AuxiliaryJoint::new(
            ProbVector::point_mass(1, 0),
            vec![ChannelMatrix::from_flat_unchecked(1, 2, binary_row(p).to_vec())],
        )?
    } else {
        let lambda = (qb - p) / (qb - qa);
        AuxiliaryJoint::new(
            ProbVector::normalized(vec![lambda, 1.0 - lambda]),
            vec![ChannelMatrix::from_flat_unchecked(
                2,
                2,
                [binary_row(qa), binary_row(qb)].concat(),
            )],
        )?
    };
    Ok((rates_from_aux(&aux, bc)?, aux))
}

/// Weighted-sum maximization over the two-receiver region with
/// `|U| <= |X| + 1`.
pub fn two_receiver_region(
    bc: &BroadcastChannel,
    weights: &[f64],
    opts: &OptimizeOptions,
) -> Result<(RateTuple, AuxiliaryJoint)> {
    if bc.num_receivers() != 2 {
        return Err(Error::DimensionMismatch {
            what: "receivers in a two-receiver region",
            expected: 2,
            found: bc.num_receivers(),
        });
    }
    check_weights(weights, 2)?;
    if bc.input_size() == 2 {
        binary_input_region(bc, weights)
    } else {
        maximize_weighted_sum(bc, weights, opts)
    }
}
