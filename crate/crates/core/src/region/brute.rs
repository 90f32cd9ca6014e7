//! Exhaustive grid search over small auxiliary chains.
//!
//! Every row of every chain factor ranges over the simplex lattice with the
//! given step, and each candidate is scored by full joint enumeration. This
//! is deliberately independent of the optimizer and of [`super::rates_from_aux`].

use rayon::prelude::*;

use super::{check_weights, enumerate_rates, EnumerationScratch, RateTuple};
use crate::channel::BroadcastChannel;
use crate::error::{Error, Result};

/// Largest number of grid candidates we will enumerate.
pub const BRUTE_FORCE_CAP: u128 = 200_000_000;

fn simplex_grid(steps: usize, dim: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, dim: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=left {
            prefix.push(first);
            rec(left - first, dim - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(steps, dim, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / steps as f64).collect())
        .collect()
}

/// Best rate tuple for `weights` over all chains whose factor rows lie on
/// the simplex lattice of spacing `grid_step`, with auxiliary cardinalities
/// exactly `caps = [|U_k|, ..., |U_2|]`.
///
/// Only binary or ternary inputs are accepted and `grid_step` must be at
/// least 0.02 and divide 1. Ties keep the first candidate in enumeration
/// order.
pub fn brute_force_region(
    bc: &BroadcastChannel,
    weights: &[f64],
    grid_step: f64,
    caps: &[usize],
) -> Result<RateTuple> {
    let k = bc.num_receivers();
    check_weights(weights, k)?;
    if bc.input_size() > 3 {
        return Err(Error::InvalidArgument(
            "brute force supports binary or ternary inputs only".into(),
        ));
    }
    if !(0.02 - 1e-12..=1.0).contains(&grid_step) {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} outside [0.02, 1]"
        )));
    }
    let steps = (1.0 / grid_step).round() as usize;
    if ((steps as f64) * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    if caps.len() != k - 1 || caps.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "expected {} positive auxiliary caps",
            k - 1
        )));
    }

    let mut cards = caps.to_vec();
    cards.push(bc.input_size());
    // Slots: the top distribution, then every row of every factor.
    let mut slot_dims = vec![cards[0]];
    for p in 0..k - 1 {
        slot_dims.extend(std::iter::repeat_n(cards[p + 1], cards[p]));
    }
    let grid_len = |d: usize| -> u128 {
        // C(steps + d - 1, d - 1)
        (1..d as u128).fold(1u128, |acc, i| acc.saturating_mul(steps as u128 + i) / i)
    };
    let total = slot_dims
        .iter()
        .fold(1u128, |acc, &d| acc.saturating_mul(grid_len(d)));
    if total > BRUTE_FORCE_CAP {
        return Err(Error::AlphabetOverflow {
            size: total,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut by_dim: Vec<Option<Vec<Vec<f64>>>> = vec![None; cards.iter().max().unwrap() + 1];
    let grids: Vec<Vec<Vec<f64>>> = slot_dims
        .iter()
        .map(|&d| {
            by_dim[d]
                .get_or_insert_with(|| simplex_grid(steps, d))
                .clone()
        })
        .collect();

    let decode = |mut index: u64, top: &mut Vec<f64>, factors: &mut [Vec<f64>]| {
        let mut slot = grids.len();
        // Last slot varies fastest.
        for p in (0..k - 1).rev() {
            let cols = cards[p + 1];
            for row in (0..cards[p]).rev() {
                slot -= 1;
                let g = &grids[slot];
                let choice = &g[(index % g.len() as u64) as usize];
                index /= g.len() as u64;
                factors[p][row * cols..(row + 1) * cols].copy_from_slice(choice);
            }
        }
        let g = &grids[0];
        top.copy_from_slice(&g[(index % g.len() as u64) as usize]);
    };

    let best = (0..total as u64)
        .into_par_iter()
        .map_init(
            || {
                (
                    vec![0.0; cards[0]],
                    (0..k - 1)
                        .map(|p| vec![0.0; cards[p] * cards[p + 1]])
                        .collect::<Vec<_>>(),
                    EnumerationScratch::default(),
                )
            },
            |(top, factors, scratch), index| {
                decode(index, top, factors);
                let shaped: Vec<(usize, usize, &[f64])> = factors
                    .iter()
                    .enumerate()
                    .map(|(p, f)| (cards[p], cards[p + 1], f.as_slice()))
                    .collect();
                let rates = enumerate_rates(top, &shaped, bc, scratch);
                let value: f64 = rates.iter().zip(weights).map(|(r, w)| r * w).sum();
                (value, index, rates)
            },
        )
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one grid candidate");
    Ok(RateTuple(best.2))
}
