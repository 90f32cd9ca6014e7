//! Superposition-coding rate regions.
//!
//! For a `k`-receiver channel and a chain `U_k -> ... -> U_2 -> X`, the
//! achievable rates are `R_l <= I(U_l; Y_l | U_{l+1})` with `U_1 = X` and
//! `U_{k+1}` constant. For `k = 3` that is `(I(X;Y1|V), I(V;Y2|U), I(U;Y3)`).
//! The union over chains is explored by maximizing weighted sums of rates.

mod brute;
mod optimize;
mod sweep;
mod two_receiver;

pub use brute::brute_force_region;
pub use optimize::{maximize_weighted_sum, OptimizeOptions};
pub use sweep::{region_boundary, weight_sweep, BoundaryPoint, RegionApproximation};
pub use two_receiver::two_receiver_region;

use crate::channel::{entropy, BroadcastChannel, ChannelMatrix, ProbVector};
use crate::error::{Error, Result};

/// Cap on `|U_k| * ... * |U_2| * |X|` for exact joint enumeration.
pub const DEFAULT_JOINT_CAP: usize = 1 << 24;

/// The auxiliary chain `p(u_k) p(u_{k-1}|u_k) ... p(x|u_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryJoint {
    top: ProbVector,
    chain: Vec<ChannelMatrix>,
}

impl AuxiliaryJoint {
    /// `top` is `p(u_k)`; `chain` lists `p(u_{k-1}|u_k), ..., p(x|u_2)`.
    pub fn new(top: ProbVector, chain: Vec<ChannelMatrix>) -> Result<Self> {
        let first = chain.first().ok_or_else(|| {
            Error::InvalidArgument("an auxiliary chain needs at least one factor".into())
        })?;
        if first.input_size() != top.len() {
            return Err(Error::DimensionMismatch {
                what: "top distribution vs first chain factor",
                expected: first.input_size(),
                found: top.len(),
            });
        }
        for pair in chain.windows(2) {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(Error::DimensionMismatch {
                    what: "adjacent chain factors",
                    expected: pair[0].output_size(),
                    found: pair[1].input_size(),
                });
            }
        }
        Ok(Self { top, chain })
    }

    /// Every auxiliary constant and `X ~ px`.
    pub fn trivial(receivers: usize, px: &ProbVector) -> Self {
        assert!(receivers >= 2);
        let mut chain: Vec<ChannelMatrix> = (0..receivers - 2)
            .map(|_| ChannelMatrix::identity(1))
            .collect();
        chain.push(ChannelMatrix::constant(1, px));
        Self {
            top: ProbVector::point_mass(1, 0),
            chain,
        }
    }

    pub fn top(&self) -> &ProbVector {
        &self.top
    }

    pub fn chain(&self) -> &[ChannelMatrix] {
        &self.chain
    }

    /// Number of receivers this chain serves.
    pub fn num_receivers(&self) -> usize {
        self.chain.len() + 1
    }

    /// `[|U_k|, ..., |U_2|, |X|]`.
    pub fn cardinalities(&self) -> Vec<usize> {
        std::iter::once(self.top.len())
            .chain(self.chain.iter().map(ChannelMatrix::output_size))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.chain.last().unwrap().output_size()
    }

    /// Marginals `[p(u_k), ..., p(u_2), p(x)]`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.top.as_slice().to_vec()];
        for f in &self.chain {
            let next = f.push_forward(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Relabels the symbols of the auxiliary at chain position `level`
    /// (0 is `U_k`, `k - 2` is `U_2`) by `perm`.
    pub fn relabel(&self, level: usize, perm: &[usize]) -> Self {
        assert!(level < self.chain.len(), "X cannot be relabeled");
        let mut top = self.top.clone();
        let mut chain = self.chain.clone();
        if level == 0 {
            let mut p = vec![0.0; top.len()];
            for (i, &v) in top.as_slice().iter().enumerate() {
                p[perm[i]] = v;
            }
            top = ProbVector::normalized(p);
        } else {
            chain[level - 1] = chain[level - 1].relabel_outputs(perm);
        }
        chain[level] = chain[level].relabel_inputs(perm);
        Self { top, chain }
    }

    pub(crate) fn check_against(&self, bc: &BroadcastChannel) -> Result<()> {
        if self.num_receivers() != bc.num_receivers() {
            return Err(Error::DimensionMismatch {
                what: "auxiliary chain length + 1 vs number of receivers",
                expected: bc.num_receivers(),
                found: self.num_receivers(),
            });
        }
        if self.input_size() != bc.input_size() {
            return Err(Error::DimensionMismatch {
                what: "auxiliary chain output vs channel input alphabet",
                expected: bc.input_size(),
                found: self.input_size(),
            });
        }
        let states = self
            .cardinalities()
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
        if states > DEFAULT_JOINT_CAP as u128 {
            return Err(Error::AlphabetOverflow {
                size: states,
                cap: DEFAULT_JOINT_CAP as u128,
            });
        }
        Ok(())
    }
}

/// Default auxiliary caps `[|U_k|, ..., |U_2|]` with
/// `|U_{k-r}| <= (|X| + 1)^(r + 1)`; for three receivers this is
/// `|U| <= |X| + 1`, `|V| <= (|X| + 1)^2`.
pub fn default_caps(receivers: usize, input_size: usize) -> Vec<usize> {
    (0..receivers - 1)
        .map(|r| (input_size + 1).pow(r as u32 + 1))
        .collect()
}

/// Rates `(R_1, ..., R_k)` in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTuple(pub Vec<f64>);

impl RateTuple {
    pub fn rates(&self) -> &[f64] {
        &self.0
    }

    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(r, w)| r * w).sum()
    }
}

impl std::ops::Index<usize> for RateTuple {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Conditional distributions of `X` given each auxiliary:
/// `result[j]` is the `|U_{k-j}| x |X|` matrix `p(x | u_{k-j})` (row-major),
/// with the final entry the identity for `X` itself.
pub(crate) fn conditionals_to_x(aux: &AuxiliaryJoint) -> Vec<Vec<f64>> {
    let x = aux.input_size();
    let n = aux.chain.len();
    let mut out = vec![Vec::new(); n + 1];
    out[n] = ChannelMatrix::identity(x).as_flat().to_vec();
    for j in (0..n).rev() {
        let f = &aux.chain[j];
        let below = &out[j + 1];
        let below_rows = f.output_size();
        let mut c = vec![0.0; f.input_size() * x];
        for u in 0..f.input_size() {
            for v in 0..below_rows {
                let w = f.entry(u, v);
                if w == 0.0 {
                    continue;
                }
                for xi in 0..x {
                    c[u * x + xi] += w * below[v * x + xi];
                }
            }
        }
        out[j] = c;
    }
    out
}

/// `H(Y | A)` where `A ~ weights` and `X | A = a ~ rows[a]`, `Y | X ~ w`.
fn conditional_output_entropy(weights: &[f64], rows: &[f64], w: &ChannelMatrix) -> f64 {
    let x = w.input_size();
    weights
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(a, &m)| m * entropy(&w.push_forward(&rows[a * x..(a + 1) * x])))
        .sum()
}

/// `I(U_j; Y | U_{j+1})` for every level `j = 1..=k` of the chain and a single
/// receiver channel `w`; entry 0 is `I(X;Y|U_2)` and the last entry is
/// `I(U_k;Y)`.
pub fn layer_informations(aux: &AuxiliaryJoint, w: &ChannelMatrix) -> Result<Vec<f64>> {
    if aux.input_size() != w.input_size() {
        return Err(Error::DimensionMismatch {
            what: "auxiliary chain output vs channel input",
            expected: w.input_size(),
            found: aux.input_size(),
        });
    }
    let marginals = aux.marginals();
    let conds = conditionals_to_x(aux);
    let levels = marginals.len();
    // h[j] = H(Y | level j) in chain order (0 = U_k, last = X); h_top = H(Y).
    let h: Vec<f64> = (0..levels)
        .map(|j| conditional_output_entropy(&marginals[j], &conds[j], w))
        .collect();
    let h_top = entropy(&w.push_forward(marginals.last().unwrap()));
    let mut out = Vec::with_capacity(levels);
    for j in (0..levels).rev() {
        let above = if j == 0 { h_top } else { h[j - 1] };
        out.push((above - h[j]).max(0.0));
    }
    Ok(out)
}

/// Exact rates `(I(U_l; Y_l | U_{l+1}))_{l = 1..k}` of an auxiliary chain.
pub fn rates_from_aux(aux: &AuxiliaryJoint, bc: &BroadcastChannel) -> Result<RateTuple> {
    aux.check_against(bc)?;
    let mut rates = Vec::with_capacity(bc.num_receivers());
    for (l, w) in bc.receivers().iter().enumerate() {
        rates.push(layer_informations(aux, w)?[l]);
    }
    Ok(RateTuple(rates))
}

/// The same rates as [`rates_from_aux`], computed from joint entropies of the
/// fully enumerated `p(u_k, ..., u_2, x, y_l)` without using the Markov
/// structure. Used as an independent check.
pub fn rates_by_enumeration(aux: &AuxiliaryJoint, bc: &BroadcastChannel) -> Result<RateTuple> {
    aux.check_against(bc)?;
    let factors: Vec<(usize, usize, &[f64])> = aux
        .chain
        .iter()
        .map(|f| (f.input_size(), f.output_size(), f.as_flat()))
        .collect();
    let mut scratch = EnumerationScratch::default();
    Ok(RateTuple(enumerate_rates(
        aux.top.as_slice(),
        &factors,
        bc,
        &mut scratch,
    )))
}

#[derive(Default)]
pub(crate) struct EnumerationScratch {
    joint: Vec<f64>,
    table: Vec<f64>,
    symbols: Vec<usize>,
}

/// Rates from raw factors by full joint enumeration. `factors` holds
/// `(rows, cols, row-major data)` for each chain factor, top first.
pub(crate) fn enumerate_rates(
    top: &[f64],
    factors: &[(usize, usize, &[f64])],
    bc: &BroadcastChannel,
    s: &mut EnumerationScratch,
) -> Vec<f64> {
    let mut cards = vec![top.len()];
    cards.extend(factors.iter().map(|f| f.1));
    let levels = cards.len();
    let states: usize = cards.iter().product();

    // Joint over (u_k, ..., u_2, x), first coordinate most significant.
    s.joint.clear();
    s.joint.extend_from_slice(top);
    for &(rows, cols, data) in factors {
        let prev = std::mem::take(&mut s.joint);
        s.joint.reserve(prev.len() * cols);
        for (i, &p) in prev.iter().enumerate() {
            let a = i % rows;
            s.joint
                .extend(data[a * cols..(a + 1) * cols].iter().map(|&f| p * f));
        }
    }
    debug_assert_eq!(s.joint.len(), states);

    let k = bc.num_receivers();
    let mut rates = Vec::with_capacity(k);
    for (l, w) in bc.receivers().iter().enumerate() {
        // Receiver l (0-based) uses U_{l+1} at chain position levels-1-l and
        // the conditioning variable one position above it (or nothing).
        let pos = levels - 1 - l;
        let above = pos.checked_sub(1);
        let na = above.map_or(1, |p| cards[p]);
        let nu = cards[pos];
        let ny = w.output_size();
        s.table.clear();
        s.table.resize(na * nu * ny, 0.0);
        s.symbols.clear();
        s.symbols.resize(levels, 0);
        for &p in s.joint.iter() {
            if p != 0.0 {
                let a = above.map_or(0, |q| s.symbols[q]);
                let u = s.symbols[pos];
                let x = s.symbols[levels - 1];
                let base = (a * nu + u) * ny;
                for (y, &wy) in w.row(x).iter().enumerate() {
                    s.table[base + y] += p * wy;
                }
            }
            for d in (0..levels).rev() {
                s.symbols[d] += 1;
                if s.symbols[d] < cards[d] {
                    break;
                }
                s.symbols[d] = 0;
            }
        }
        // I(U;Y|A) = H(A,U) + H(A,Y) - H(A,U,Y) - H(A).
        let t = &s.table;
        let h_auy = entropy(t);
        let h_au = entropy(
            &(0..na * nu)
                .map(|i| t[i * ny..(i + 1) * ny].iter().sum())
                .collect::<Vec<f64>>(),
        );
        let h_ay = entropy(
            &(0..na * ny)
                .map(|i| {
                    let (a, y) = (i / ny, i % ny);
                    (0..nu).map(|u| t[(a * nu + u) * ny + y]).sum()
                })
                .collect::<Vec<f64>>(),
        );
        let h_a = entropy(
            &(0..na)
                .map(|a| t[a * nu * ny..(a + 1) * nu * ny].iter().sum())
                .collect::<Vec<f64>>(),
        );
        rates.push((h_au + h_ay - h_auy - h_a).max(0.0));
    }
    rates
}

pub(crate) fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            what: "number of weights vs receivers",
            expected: k,
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok(())
}
