use rayon::prelude::*;

use super::{maximize_weighted_sum, AuxiliaryJoint, OptimizeOptions, RateTuple};
use crate::channel::BroadcastChannel;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// One supporting-hyperplane sample of the region boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub weights: Vec<f64>,
    pub rates: RateTuple,
    pub aux: AuxiliaryJoint,
}

impl BoundaryPoint {
    pub fn value(&self) -> f64 {
        self.rates.weighted_sum(&self.weights)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionApproximation {
    pub points: Vec<BoundaryPoint>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Compositions of `total` into `parts` nonnegative integers, in
/// lexicographically decreasing order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// The first `directions` weight vectors of a fixed sweep of the
/// nonnegative simplex: the unit vectors `e_1, ..., e_k`, then lattice points
/// with denominators 2, 3, ... that were not already listed.
pub fn weight_sweep(k: usize, directions: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..k.min(directions))
        .map(|l| {
            let mut w = vec![0.0; k];
            w[l] = 1.0;
            w
        })
        .collect();
    let mut denominator = 2;
    while out.len() < directions {
        for c in compositions(denominator, k) {
            if out.len() == directions {
                break;
            }
            if c.iter().copied().fold(0, gcd) != 1 || c.iter().filter(|&&v| v > 0).count() < 2 {
                continue;
            }
            out.push(c.iter().map(|&v| v as f64 / denominator as f64).collect());
        }
        denominator += 1;
    }
    out
}

/// Runs [`maximize_weighted_sum`] over the first `directions` entries of
/// [`weight_sweep`]. Direction `i` uses seed `derive_seed(opts.seed, i)`.
pub fn region_boundary(
    bc: &BroadcastChannel,
    directions: usize,
    opts: &OptimizeOptions,
) -> Result<RegionApproximation> {
    if directions == 0 {
        return Err(Error::InvalidArgument("directions must be at least 1".into()));
    }
    let sweep = weight_sweep(bc.num_receivers(), directions);
    let points = sweep
        .into_par_iter()
        .enumerate()
        .map(|(i, weights)| {
            let o = OptimizeOptions {
                seed: derive_seed(opts.seed, i as u64),
                ..opts.clone()
            };
            let (rates, aux) = maximize_weighted_sum(bc, &weights, &o)?;
            Ok(BoundaryPoint {
                weights,
                rates,
                aux,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionApproximation { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_order() {
        assert_eq!(weight_sweep(3, 1), vec![vec![1.0, 0.0, 0.0]]);
        let five = weight_sweep(2, 5);
        assert_eq!(
            five,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.5, 0.5],
                vec![2.0 / 3.0, 1.0 / 3.0],
                vec![1.0 / 3.0, 2.0 / 3.0],
            ]
        );
        let many = weight_sweep(3, 20);
        assert_eq!(many.len(), 20);
        for (i, a) in many.iter().enumerate() {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for b in &many[..i] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn zero_directions_rejected() {
        let bc = BroadcastChannel::bsc_cascade(&[0.1, 0.2]);
        assert!(region_boundary(&bc, 0, &OptimizeOptions::default()).is_err());
    }
}
