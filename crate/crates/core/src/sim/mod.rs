//! Monte Carlo simulation of three-layer superposition coding with
//! successive information-density decoding.
//!
//! Codebooks: `u^n(m_3) ~ p_U`, `v^n(m_2, m_3) ~ p_{V|U}` given the cloud
//! center, `x^n(m_1, m_2, m_3) ~ p_{X|V}` given the satellite. Receiver 3
//! decodes `m_3`; receiver 2 decodes `m_3` then `m_2`; receiver 1 decodes all
//! three layers in turn.

mod codebook;
mod ensemble;

use rand::Rng;
use rayon::prelude::*;

pub use codebook::{decode_receiver3, decode_successive, generate_codebooks, transmit, Codebook};
pub use ensemble::pass_probability;

use crate::channel::BroadcastChannel;
use crate::error::{Error, Result};
use crate::region::AuxiliaryJoint;
use crate::rng::{cdf_of, derive_seed, task_rng};

/// Default cap on the total number of codeword symbols held in memory.
pub const DEFAULT_SYMBOL_CAP: u128 = 1 << 24;

/// How far below the target information the decoding threshold sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `delta = fraction * target`.
    Relative(f64),
    /// `delta` in bits.
    Absolute(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(0.1)
    }
}

impl Threshold {
    pub fn delta(self, target: f64) -> f64 {
        match self {
            Threshold::Relative(_) if target == 0.0 => 0.0,
            Threshold::Relative(f) => f * target,
            Threshold::Absolute(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodebookMode {
    /// A new random codebook for every trial.
    #[default]
    Fresh,
    /// One codebook shared by all trials.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Materializes every codeword.
    #[default]
    Explicit,
    /// Draws only the transmitted codeword chain; the number of competing
    /// codewords that pass each threshold is sampled from its exact law.
    Ensemble,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Explicit => "explicit",
            Engine::Ensemble => "ensemble",
        }
    }
}

/// Decoding layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    U,
    V,
    X,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::U, Stage::V, Stage::X];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::U => "u",
            Stage::V => "v",
            Stage::X => "x",
        }
    }
}

/// Number of stages decoded by receiver `l` (1-based).
pub fn stages_of(receiver: usize) -> usize {
    4 - receiver
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    /// `(R_1, R_2, R_3)` in bits per channel use.
    pub rates: [f64; 3],
    pub aux: AuxiliaryJoint,
    pub bc: BroadcastChannel,
    pub trials: usize,
    pub seed: u64,
    pub threshold: Threshold,
    pub codebook_mode: CodebookMode,
    pub engine: Engine,
    pub symbol_cap: u128,
}

impl SimConfig {
    pub fn new(n: usize, rates: [f64; 3], aux: AuxiliaryJoint, bc: BroadcastChannel) -> Result<Self> {
        let config = Self {
            n,
            rates,
            aux,
            bc,
            trials: 500,
            seed: 0,
            threshold: Threshold::default(),
            codebook_mode: CodebookMode::default(),
            engine: Engine::default(),
            symbol_cap: DEFAULT_SYMBOL_CAP,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bc.num_receivers() != 3 {
            return Err(Error::DimensionMismatch {
                what: "receivers in a simulated channel",
                expected: 3,
                found: self.bc.num_receivers(),
            });
        }
        self.aux.check_against(&self.bc)?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("blocklength must be positive".into()));
        }
        if self.rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rates must be finite and nonnegative, got {:?}",
                self.rates
            )));
        }
        let largest = self
            .aux
            .cardinalities()
            .into_iter()
            .chain(self.bc.receivers().iter().map(|w| w.output_size()))
            .max()
            .unwrap();
        if largest > u16::MAX as usize + 1 {
            return Err(Error::AlphabetOverflow {
                size: largest as u128,
                cap: u16::MAX as u128 + 1,
            });
        }
        match self.threshold {
            Threshold::Relative(f) | Threshold::Absolute(f) if f.is_nan() => {
                Err(Error::InvalidArgument("threshold must not be NaN".into()))
            }
            _ => Ok(()),
        }
    }

    /// `[M_1, M_2, M_3]` with `M_l = floor(2^(n R_l))`.
    pub fn message_counts(&self) -> [f64; 3] {
        self.rates.map(|r| (self.n as f64 * r).exp2().floor().max(1.0))
    }

    /// Codeword symbols in a full codebook, `n (M_3 + M_3 M_2 + M_3 M_2 M_1)`.
    pub fn codebook_symbols(&self) -> f64 {
        let [m1, m2, m3] = self.message_counts();
        self.n as f64 * (m3 + m3 * m2 + m3 * m2 * m1)
    }

    pub(crate) fn explicit_counts(&self) -> Result<[usize; 3]> {
        let symbols = self.codebook_symbols();
        if symbols > self.symbol_cap as f64 {
            return Err(Error::MemoryCapExceeded {
                needed: if symbols >= u128::MAX as f64 {
                    u128::MAX
                } else {
                    symbols as u128
                },
                cap: self.symbol_cap,
            });
        }
        Ok(self.message_counts().map(|m| m as usize))
    }
}

/// Per-letter tables shared by both engines.
#[derive(Debug, Clone)]
pub(crate) struct Tables {
    pub nu: usize,
    pub nv: usize,
    pub nx: usize,
    pub pu: Vec<f64>,
    /// `p(v|u)` at `u * nv + v`.
    pub pv: Vec<f64>,
    /// `p(x|v)` at `v * nx + x`.
    pub px: Vec<f64>,
    pub u_cdf: Vec<f64>,
    pub v_cdf: Vec<Vec<f64>>,
    pub x_cdf: Vec<Vec<f64>>,
    pub receivers: Vec<ReceiverTables>,
}

#[derive(Debug, Clone)]
pub(crate) struct ReceiverTables {
    pub ny: usize,
    pub w_cdf: Vec<Vec<f64>>,
    /// `log2 p(y|u) / p(y)` at `u * ny + y`.
    pub dens_u: Vec<f64>,
    /// `log2 p(y|v) / p(y|u)` at `(u * nv + v) * ny + y`.
    pub dens_v: Vec<f64>,
    /// `log2 p(y|x) / p(y|v)` at `(v * nx + x) * ny + y`.
    pub dens_x: Vec<f64>,
    /// `I(U;Y)`, `I(V;Y|U)`, `I(X;Y|V)`.
    pub info: [f64; 3],
    /// Per-letter thresholds `info - delta`.
    pub thr: [f64; 3],
}

fn log_ratio(num: f64, den: f64) -> f64 {
    if num > 0.0 && den > 0.0 {
        num.log2() - den.log2()
    } else {
        f64::NEG_INFINITY
    }
}

impl Tables {
    pub fn new(config: &SimConfig) -> Self {
        let aux = &config.aux;
        let (f_v, f_x) = (&aux.chain()[0], &aux.chain()[1]);
        let (nu, nv, nx) = (aux.top().len(), f_v.output_size(), f_x.output_size());
        let pu = aux.top().as_slice().to_vec();
        let pv = f_v.as_flat().to_vec();
        let px = f_x.as_flat().to_vec();
        let p_v: Vec<f64> = f_v.push_forward(&pu);
        let receivers = config
            .bc
            .receivers()
            .iter()
            .map(|w| {
                let ny = w.output_size();
                let y_v: Vec<Vec<f64>> = (0..nv).map(|v| w.push_forward(f_x.row(v))).collect();
                let y_u: Vec<Vec<f64>> = (0..nu)
                    .map(|u| {
                        let mut acc = vec![0.0; ny];
                        for v in 0..nv {
                            for y in 0..ny {
                                acc[y] += pv[u * nv + v] * y_v[v][y];
                            }
                        }
                        acc
                    })
                    .collect();
                let mut y_marg = vec![0.0; ny];
                for u in 0..nu {
                    for y in 0..ny {
                        y_marg[y] += pu[u] * y_u[u][y];
                    }
                }
                let mut dens_u = vec![0.0; nu * ny];
                let mut dens_v = vec![0.0; nu * nv * ny];
                let mut dens_x = vec![0.0; nv * nx * ny];
                let mut info = [0.0; 3];
                for u in 0..nu {
                    for y in 0..ny {
                        let d = log_ratio(y_u[u][y], y_marg[y]);
                        dens_u[u * ny + y] = d;
                        if pu[u] * y_u[u][y] > 0.0 {
                            info[0] += pu[u] * y_u[u][y] * d;
                        }
                        for v in 0..nv {
                            let d = log_ratio(y_v[v][y], y_u[u][y]);
                            dens_v[(u * nv + v) * ny + y] = d;
                            let mass = pu[u] * pv[u * nv + v] * y_v[v][y];
                            if mass > 0.0 {
                                info[1] += mass * d;
                            }
                        }
                    }
                }
                for v in 0..nv {
                    for x in 0..nx {
                        for y in 0..ny {
                            let d = log_ratio(w.entry(x, y), y_v[v][y]);
                            dens_x[(v * nx + x) * ny + y] = d;
                            let mass = p_v[v] * px[v * nx + x] * w.entry(x, y);
                            if mass > 0.0 {
                                info[2] += mass * d;
                            }
                        }
                    }
                }
                let thr = info.map(|i| i - config.threshold.delta(i));
                ReceiverTables {
                    ny,
                    w_cdf: w.rows().map(cdf_of).collect(),
                    dens_u,
                    dens_v,
                    dens_x,
                    info,
                    thr,
                }
            })
            .collect();
        Self {
            nu,
            nv,
            nx,
            u_cdf: cdf_of(&pu),
            v_cdf: (0..nu).map(|u| cdf_of(&pv[u * nv..(u + 1) * nv])).collect(),
            x_cdf: (0..nv).map(|v| cdf_of(&px[v * nx..(v + 1) * nx])).collect(),
            pu,
            pv,
            px,
            receivers,
        }
    }
}

/// Stage informations `[I(U;Y_l), I(V;Y_l|U), I(X;Y_l|V)]` for receivers 1..=3.
pub fn stage_informations(config: &SimConfig) -> Result<[[f64; 3]; 3]> {
    config.validate()?;
    let t = Tables::new(config);
    Ok([t.receivers[0].info, t.receivers[1].info, t.receivers[2].info])
}

/// Aggregated error statistics. Receiver `l` is stored at index `l - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trials: usize,
    pub engine: Engine,
    /// Trials in which receiver `l` decoded any of its layers wrongly.
    pub receiver_errors: [usize; 3],
    /// Each receiver error attributed to the first stage that went wrong,
    /// indexed by [`Stage::index`].
    pub stage_errors: [[usize; 3]; 3],
    /// Trials with an error at any receiver.
    pub total_errors: usize,
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl SimResult {
    /// Estimated probability that some receiver errs.
    pub fn p_e(&self) -> f64 {
        self.fraction(self.total_errors)
    }

    pub fn p_e_interval(&self) -> (f64, f64) {
        wilson_interval(self.total_errors, self.trials)
    }

    /// Error fraction of receiver `l` (1-based).
    pub fn receiver_fraction(&self, l: usize) -> f64 {
        self.fraction(self.receiver_errors[l - 1])
    }

    pub fn receiver_interval(&self, l: usize) -> (f64, f64) {
        wilson_interval(self.receiver_errors[l - 1], self.trials)
    }

    /// Fraction of trials whose receiver-`l` error started at `stage`.
    pub fn stage_fraction(&self, l: usize, stage: Stage) -> f64 {
        self.fraction(self.stage_errors[l - 1][stage.index()])
    }

    fn fraction(&self, count: usize) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            count as f64 / self.trials as f64
        }
    }
}

/// First failing stage per receiver in one trial, `None` when correct.
pub(crate) type TrialOutcome = [Option<Stage>; 3];

fn aggregate(outcomes: &[TrialOutcome], engine: Engine) -> SimResult {
    let mut r = SimResult {
        trials: outcomes.len(),
        engine,
        receiver_errors: [0; 3],
        stage_errors: [[0; 3]; 3],
        total_errors: 0,
    };
    for o in outcomes {
        for (l, s) in o.iter().enumerate() {
            if let Some(s) = s {
                r.receiver_errors[l] += 1;
                r.stage_errors[l][s.index()] += 1;
            }
        }
        if o.iter().any(Option::is_some) {
            r.total_errors += 1;
        }
    }
    r
}

/// Runs `config.trials` independent trials. Trial `t` uses the stream
/// `derive_seed(config.seed, t)`; the result does not depend on the
/// number of worker threads.
pub fn run_trials(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let tables = Tables::new(config);
    let outcomes: Vec<TrialOutcome> = match config.engine {
        Engine::Explicit => {
            let counts = config.explicit_counts()?;
            let fixed = match config.codebook_mode {
                CodebookMode::Fixed => Some(Codebook::generate_with(
                    config,
                    &tables,
                    counts,
                    derive_seed(config.seed, u64::MAX),
                )),
                CodebookMode::Fresh => None,
            };
            (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = task_rng(config.seed, t as u64);
                    let fresh;
                    let book = match &fixed {
                        Some(b) => b,
                        None => {
                            fresh = Codebook::generate_with(config, &tables, counts, rng.random());
                            &fresh
                        }
                    };
                    codebook::explicit_trial(config, &tables, book, &mut rng)
                })
                .collect()
        }
        Engine::Ensemble => {
            if config.codebook_mode == CodebookMode::Fixed {
                return Err(Error::InvalidArgument(
                    "the ensemble engine averages over codebooks; use the explicit engine for a fixed codebook".into(),
                ));
            }
            let counts = config.message_counts();
            (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = task_rng(config.seed, t as u64);
                    ensemble::ensemble_trial(config, &tables, counts, &mut rng)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(aggregate(&outcomes, config.engine))
}
