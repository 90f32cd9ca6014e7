//! Exhaustive checks of the multi-letter less-noisy inequality
//! `I(Y_s^{i-1}; Y_i | M) >= I(Y_t^{i-1}; Y_i | M)` for `Y_i` either `Y_{t,i}`
//! (part 1) or `Y_{s,i}` (part 2), over small instances `M -> X^n -> (Y_s^n, Y_t^n)`.

use rayon::prelude::*;

use crate::channel::{entropy, ChannelMatrix, ProbVector, ROW_SUM_TOL};
use crate::error::{Error, Result};
use crate::rng::{simplex_point, task_rng};
use rand::Rng;

pub const MAX_BLOCKLENGTH: usize = 4;
pub const MAX_MESSAGE_SIZE: usize = 4;
/// Default cap on the number of `(m, x^n, y_s^n, y_t^n)` states.
pub const DEFAULT_STATE_CAP: u128 = 1_000_000;
/// Slacks below `-VIOLATION_TOL` are reported as violations.
pub const VIOLATION_TOL: f64 = 1e-9;

/// How the two outputs are coupled given each input letter.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    ConditionallyIndependent,
    /// `p(y_s, y_t | x)` with columns indexed by `y_s * |Y_t| + y_t`.
    Joint(ChannelMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLetterInstance {
    n: usize,
    m_size: usize,
    joint_mx: ProbVector,
    ws: ChannelMatrix,
    wt: ChannelMatrix,
    coupling: Coupling,
}

impl MultiLetterInstance {
    /// `joint_mx` is indexed by `(m, x_1, ..., x_n)` with `x_n` varying fastest.
    pub fn new(
        n: usize,
        m_size: usize,
        joint_mx: ProbVector,
        ws: ChannelMatrix,
        wt: ChannelMatrix,
        coupling: Coupling,
    ) -> Result<Self> {
        Self::with_cap(n, m_size, joint_mx, ws, wt, coupling, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(
        n: usize,
        m_size: usize,
        joint_mx: ProbVector,
        ws: ChannelMatrix,
        wt: ChannelMatrix,
        coupling: Coupling,
        state_cap: u128,
    ) -> Result<Self> {
        if !(1..=MAX_BLOCKLENGTH).contains(&n) {
            return Err(Error::InvalidArgument(format!(
                "blocklength {n} outside 1..={MAX_BLOCKLENGTH}"
            )));
        }
        if !(1..=MAX_MESSAGE_SIZE).contains(&m_size) {
            return Err(Error::InvalidArgument(format!(
                "message alphabet {m_size} outside 1..={MAX_MESSAGE_SIZE}"
            )));
        }
        let x = ws.input_size();
        if wt.input_size() != x {
            return Err(Error::DimensionMismatch {
                what: "input alphabet of the second channel",
                expected: x,
                found: wt.input_size(),
            });
        }
        let states = m_size as u128
            * (x as u128 * ws.output_size() as u128 * wt.output_size() as u128).pow(n as u32);
        if states > state_cap {
            return Err(Error::AlphabetOverflow {
                size: states,
                cap: state_cap,
            });
        }
        let expected = m_size * x.pow(n as u32);
        if joint_mx.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "length of the (M, X^n) distribution",
                expected,
                found: joint_mx.len(),
            });
        }
        if let Coupling::Joint(pair) = &coupling {
            check_coupling(pair, &ws, &wt)?;
        }
        Ok(Self {
            n,
            m_size,
            joint_mx,
            ws,
            wt,
            coupling,
        })
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn message_size(&self) -> usize {
        self.m_size
    }

    pub fn joint_mx(&self) -> &ProbVector {
        &self.joint_mx
    }

    pub fn ws(&self) -> &ChannelMatrix {
        &self.ws
    }

    pub fn wt(&self) -> &ChannelMatrix {
        &self.wt
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Per-letter `p(y_s, y_t | x)`, columns `y_s * |Y_t| + y_t`.
    pub fn pair_channel(&self) -> ChannelMatrix {
        match &self.coupling {
            Coupling::Joint(pair) => pair.clone(),
            Coupling::ConditionallyIndependent => {
                let (ys, yt) = (self.ws.output_size(), self.wt.output_size());
                let mut data = Vec::with_capacity(self.ws.input_size() * ys * yt);
                for x in 0..self.ws.input_size() {
                    for &a in self.ws.row(x) {
                        data.extend(self.wt.row(x).iter().map(|&b| a * b));
                    }
                }
                ChannelMatrix::from_flat_unchecked(self.ws.input_size(), ys * yt, data)
            }
        }
    }
}

fn check_coupling(pair: &ChannelMatrix, ws: &ChannelMatrix, wt: &ChannelMatrix) -> Result<()> {
    let (ys, yt) = (ws.output_size(), wt.output_size());
    if pair.input_size() != ws.input_size() || pair.output_size() != ys * yt {
        return Err(Error::DimensionMismatch {
            what: "columns of the coupled output channel",
            expected: ys * yt,
            found: pair.output_size(),
        });
    }
    for x in 0..ws.input_size() {
        let row = pair.row(x);
        for a in 0..ys {
            let s: f64 = row[a * yt..(a + 1) * yt].iter().sum();
            if (s - ws.entry(x, a)).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "coupling row {x} does not marginalize to the first channel"
                )));
            }
        }
        for b in 0..yt {
            let s: f64 = (0..ys).map(|a| row[a * yt + b]).sum();
            if (s - wt.entry(x, b)).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "coupling row {x} does not marginalize to the second channel"
                )));
            }
        }
    }
    Ok(())
}

/// Dense distribution over named discrete variables, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal over `vars` (in the given order, last fastest).
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let mut stride = vec![0usize; self.dims.len()];
        let mut size = 1;
        for &v in vars.iter().rev() {
            stride[v] = size;
            size *= self.dims[v];
        }
        let mut out = vec![0.0; size];
        let mut digits = vec![0usize; self.dims.len()];
        let mut at = 0usize;
        for &p in &self.probs {
            out[at] += p;
            // Odometer increment, keeping `at` in sync.
            for v in (0..self.dims.len()).rev() {
                digits[v] += 1;
                at += stride[v];
                if digits[v] < self.dims[v] {
                    break;
                }
                at -= stride[v] * self.dims[v];
                digits[v] = 0;
            }
        }
        out
    }

    pub fn entropy_of(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        entropy(&self.marginal(vars))
    }

    /// `I(A; B | C)` from four marginal entropies.
    pub fn conditional_mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let join = |xs: &[&[usize]]| xs.concat();
        self.entropy_of(&join(&[a, c])) + self.entropy_of(&join(&[b, c]))
            - self.entropy_of(&join(&[a, b, c]))
            - self.entropy_of(c)
    }
}

/// Variable layout of [`build_joint`]: `M, X_1..X_n, Y_{s,1}..Y_{s,n}, Y_{t,1}..Y_{t,n}`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub const M: usize = 0;
    pub fn x(self, i: usize) -> usize {
        1 + i
    }
    pub fn ys(self, i: usize) -> usize {
        1 + self.n + i
    }
    pub fn yt(self, i: usize) -> usize {
        1 + 2 * self.n + i
    }
}

/// Full joint of `(M, X^n, Y_s^n, Y_t^n)`.
pub fn build_joint(instance: &MultiLetterInstance) -> Result<JointTable> {
    let n = instance.n;
    let x = instance.ws.input_size();
    let (ys, yt) = (instance.ws.output_size(), instance.wt.output_size());
    let pair = instance.pair_channel();
    let mut dims = vec![instance.m_size];
    dims.extend(std::iter::repeat_n(x, n));
    dims.extend(std::iter::repeat_n(ys, n));
    dims.extend(std::iter::repeat_n(yt, n));
    let (ys_n, yt_n) = (ys.pow(n as u32), yt.pow(n as u32));
    let block = ys_n * yt_n;
    let mut probs = vec![0.0; instance.joint_mx.len() * block];

    let mut xs = vec![0usize; n];
    let mut a = vec![0usize; n];
    let mut b = vec![0usize; n];
    for (mx, &p) in instance.joint_mx.as_slice().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        digits_of(mx % x.pow(n as u32), x, &mut xs);
        let out = &mut probs[mx * block..(mx + 1) * block];
        for sa in 0..ys_n {
            digits_of(sa, ys, &mut a);
            for tb in 0..yt_n {
                digits_of(tb, yt, &mut b);
                let mut q = p;
                for i in 0..n {
                    q *= pair.entry(xs[i], a[i] * yt + b[i]);
                }
                out[sa * yt_n + tb] = q;
            }
        }
    }
    Ok(JointTable { dims, probs })
}

fn digits_of(mut index: usize, base: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = index % base;
        index /= base;
    }
}

/// Slack pair for one letter: `(part 1, part 2)`.
pub type SlackPair = (f64, f64);

/// `slack_1(i) = I(Y_s^{i-1}; Y_{t,i} | M) - I(Y_t^{i-1}; Y_{t,i} | M)` and
/// `slack_2(i)` with `Y_{s,i}` in place of `Y_{t,i}`, for `i = 1..=n`.
pub fn lemma_slacks(instance: &MultiLetterInstance) -> Result<Vec<SlackPair>> {
    let joint = build_joint(instance)?;
    Ok(slacks_from_joint(&joint, instance.n))
}

fn slacks_from_joint(joint: &JointTable, n: usize) -> Vec<SlackPair> {
    let l = Layout { n };
    let m = [Layout::M];
    (0..n)
        .map(|i| {
            let s_past: Vec<usize> = (0..i).map(|j| l.ys(j)).collect();
            let t_past: Vec<usize> = (0..i).map(|j| l.yt(j)).collect();
            let part = |target: usize| {
                joint.conditional_mi(&s_past, &[target], &m)
                    - joint.conditional_mi(&t_past, &[target], &m)
            };
            (part(l.yt(i)), part(l.ys(i)))
        })
        .collect()
}

/// Per-flip increments: entry `[i][r]` is
/// `I(Y_{s,r}; Y_i | M, Y_t^{r-1}, Y_{s,r+1}^{i-1}) - I(Y_{t,r}; Y_i | M, Y_t^{r-1}, Y_{s,r+1}^{i-1})`
/// for both parts. Summed over `r` they telescope to [`lemma_slacks`].
pub fn flip_increments(instance: &MultiLetterInstance) -> Result<Vec<Vec<SlackPair>>> {
    let joint = build_joint(instance)?;
    let l = Layout { n: instance.n };
    Ok((0..instance.n)
        .map(|i| {
            (0..i)
                .map(|r| {
                    let mut given = vec![Layout::M];
                    given.extend((0..r).map(|j| l.yt(j)));
                    given.extend((r + 1..i).map(|j| l.ys(j)));
                    let step = |target: usize| {
                        joint.conditional_mi(&[l.ys(r)], &[target], &given)
                            - joint.conditional_mi(&[l.yt(r)], &[target], &given)
                    };
                    (step(l.yt(i)), step(l.ys(i)))
                })
                .collect()
        })
        .collect())
}

/// Same values as [`lemma_slacks`] obtained by summing [`flip_increments`].
pub fn lemma_slacks_by_flips(instance: &MultiLetterInstance) -> Result<Vec<SlackPair>> {
    Ok(flip_increments(instance)?
        .into_iter()
        .map(|steps| {
            steps
                .iter()
                .fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressOptions {
    pub count: usize,
    pub seed: u64,
    pub blocklengths: Vec<usize>,
    pub message_sizes: Vec<usize>,
    pub coupling: Coupling,
}

impl Default for StressOptions {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
            blocklengths: vec![2, 3],
            message_sizes: vec![1, 2],
            coupling: Coupling::ConditionallyIndependent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressReport {
    pub instances: usize,
    pub min_slack: f64,
    /// Index of the instance attaining `min_slack`.
    pub min_index: usize,
    /// The minimizing instance, kept only when its slack is below `-VIOLATION_TOL`.
    pub violating_instance: Option<MultiLetterInstance>,
}

/// Random instance number `index` of a stress run.
pub fn stress_instance(
    ws: &ChannelMatrix,
    wt: &ChannelMatrix,
    opts: &StressOptions,
    index: usize,
) -> Result<MultiLetterInstance> {
    let mut rng = task_rng(opts.seed, index as u64);
    let n = opts.blocklengths[rng.random_range(0..opts.blocklengths.len())];
    let m = opts.message_sizes[rng.random_range(0..opts.message_sizes.len())];
    let len = m * ws.input_size().pow(n as u32);
    let joint_mx = ProbVector::normalized(simplex_point(&mut rng, len));
    MultiLetterInstance::new(n, m, joint_mx, ws.clone(), wt.clone(), opts.coupling.clone())
}

/// Smallest slack over `opts.count` random instances with joint `(M, X^n)`
/// drawn uniformly from the simplex. Ties keep the lowest instance index.
pub fn stress_test(
    ws: &ChannelMatrix,
    wt: &ChannelMatrix,
    opts: &StressOptions,
) -> Result<StressReport> {
    if opts.count == 0 || opts.blocklengths.is_empty() || opts.message_sizes.is_empty() {
        return Err(Error::InvalidArgument(
            "stress test needs a positive count and nonempty size lists".into(),
        ));
    }
    // Validate every size combination up front.
    for &n in &opts.blocklengths {
        for &m in &opts.message_sizes {
            let len = m * ws.input_size().pow(n.min(MAX_BLOCKLENGTH) as u32);
            MultiLetterInstance::new(
                n,
                m,
                ProbVector::uniform(len),
                ws.clone(),
                wt.clone(),
                opts.coupling.clone(),
            )?;
        }
    }
    let (min_slack, min_index) = (0..opts.count)
        .into_par_iter()
        .map(|index| {
            let inst = stress_instance(ws, wt, opts, index)?;
            let worst = lemma_slacks(&inst)?
                .into_iter()
                .flat_map(|(a, b)| [a, b])
                .fold(f64::INFINITY, f64::min);
            Ok((worst, index))
        })
        .try_reduce_with(|a, b| {
            Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            })
        })
        .expect("count is positive")?;
    let violating_instance = if min_slack < -VIOLATION_TOL {
        Some(stress_instance(ws, wt, opts, min_index)?)
    } else {
        None
    };
    Ok(StressReport {
        instances: opts.count,
        min_slack,
        min_index,
        violating_instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::binary_entropy;

    fn bsc_pair(n: usize, m: usize, jmx: Vec<f64>) -> MultiLetterInstance {
        MultiLetterInstance::new(
            n,
            m,
            ProbVector::new(jmx).unwrap(),
            ChannelMatrix::bsc(0.1),
            ChannelMatrix::bsc(0.2),
            Coupling::ConditionallyIndependent,
        )
        .unwrap()
    }

    #[test]
    fn single_letter_deterministic_input_is_product_of_rows() {
        let ws = ChannelMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let wt = ChannelMatrix::new(vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8]]).unwrap();
        let inst = MultiLetterInstance::new(
            1,
            1,
            ProbVector::point_mass(2, 1),
            ws.clone(),
            wt.clone(),
            Coupling::ConditionallyIndependent,
        )
        .unwrap();
        let j = build_joint(&inst).unwrap();
        assert_eq!(j.dims(), &[1, 2, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                let p = j.probs()[(2 + a) * 3 + b];
                assert!((p - ws.entry(1, a) * wt.entry(1, b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_channels_copy_inputs() {
        let inst = MultiLetterInstance::new(
            2,
            1,
            ProbVector::uniform(4),
            ChannelMatrix::identity(2),
            ChannelMatrix::identity(2),
            Coupling::ConditionallyIndependent,
        )
        .unwrap();
        let j = build_joint(&inst).unwrap();
        let l = Layout { n: 2 };
        let m = j.marginal(&[l.x(0), l.x(1), l.ys(0), l.ys(1), l.yt(0), l.yt(1)]);
        for (idx, &p) in m.iter().enumerate() {
            let d: Vec<usize> = (0..6).rev().map(|k| (idx >> k) & 1).collect();
            let agree = d[0] == d[2] && d[1] == d[3] && d[0] == d[4] && d[1] == d[5];
            assert_eq!(p, if agree { 0.25 } else { 0.0 });
        }
    }

    #[test]
    fn marginal_recovers_message_input_law() {
        let jmx: Vec<f64> = (1..=8).map(|v| v as f64 / 36.0).collect();
        let inst = bsc_pair(2, 2, jmx.clone());
        let j = build_joint(&inst).unwrap();
        let m = j.marginal(&[0, 1, 2]);
        for (a, b) in m.iter().zip(&jmx) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_letter_slacks_are_exactly_zero() {
        let inst = bsc_pair(3, 2, (1..=16).map(|v| v as f64 / 136.0).collect());
        let s = lemma_slacks(&inst).unwrap();
        assert_eq!(s[0], (0.0, 0.0));
    }

    #[test]
    fn same_channel_gives_zero_slacks() {
        let w = ChannelMatrix::new(vec![vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        let inst = MultiLetterInstance::new(
            3,
            2,
            ProbVector::new((1..=16).map(|v| (v * v) as f64 / 1496.0).collect()).unwrap(),
            w.clone(),
            w,
            Coupling::ConditionallyIndependent,
        )
        .unwrap();
        for (a, b) in lemma_slacks(&inst).unwrap() {
            assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        }
    }

    #[test]
    fn pinned_instance_message_equals_repeated_input() {
        // M = X_1 = X_2 uniform: everything is deterministic given M.
        let mut jmx = vec![0.0; 8];
        jmx[0] = 0.5;
        jmx[7] = 0.5;
        let s = lemma_slacks(&bsc_pair(2, 2, jmx)).unwrap();
        assert_eq!(s[0], (0.0, 0.0));
        assert!(s[1].0.abs() < 1e-12 && s[1].1.abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn pinned_instance_repeated_input_constant_message() {
        // X_1 = X_2 uniform, M constant; closed forms h(0.32)-h(0.26) and
        // h(0.26)-h(0.18).
        let s = lemma_slacks(&bsc_pair(2, 1, vec![0.5, 0.0, 0.0, 0.5])).unwrap();
        assert!((s[1].0 - 0.077_635_085_231_876_14).abs() < 1e-12);
        assert!((s[1].1 - 0.146_669_326_764_337_97).abs() < 1e-12);
        assert!((s[1].0 - (binary_entropy(0.32) - binary_entropy(0.26))).abs() < 1e-12);
        assert!((s[1].1 - (binary_entropy(0.26) - binary_entropy(0.18))).abs() < 1e-12);
    }

    fn mixed_instance() -> MultiLetterInstance {
        let w: Vec<f64> = (0..16).map(|i| ((i * 7 + 3) % 11 + 1) as f64).collect();
        let total: f64 = w.iter().sum();
        MultiLetterInstance::new(
            3,
            2,
            ProbVector::new(w.iter().map(|v| v / total).collect()).unwrap(),
            ChannelMatrix::new(vec![vec![0.9, 0.1], vec![0.25, 0.75]]).unwrap(),
            ChannelMatrix::new(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]]).unwrap(),
            Coupling::ConditionallyIndependent,
        )
        .unwrap()
    }

    #[test]
    fn pinned_three_letter_regression() {
        let s = lemma_slacks(&mixed_instance()).unwrap();
        let want = [
            (0.0, 0.0),
            (0.000_778_279_285_548_855_2, 0.001_168_996_619_213_214),
            (0.004_236_427_358_042_86, 0.006_379_775_669_123_511),
        ];
        for (got, want) in s.iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn flip_route_agrees() {
        let inst = mixed_instance();
        let a = lemma_slacks(&inst).unwrap();
        let b = lemma_slacks_by_flips(&inst).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9);
        }
    }

    #[test]
    fn explicit_independent_coupling_matches_default() {
        let inst = mixed_instance();
        let coupled = MultiLetterInstance::new(
            3,
            2,
            inst.joint_mx().clone(),
            inst.ws().clone(),
            inst.wt().clone(),
            Coupling::Joint(inst.pair_channel()),
        )
        .unwrap();
        assert_eq!(lemma_slacks(&inst).unwrap(), lemma_slacks(&coupled).unwrap());
    }

    #[test]
    fn rejects_bad_instances() {
        let ws = ChannelMatrix::bsc(0.1);
        let wt = ChannelMatrix::bsc(0.2);
        let ci = Coupling::ConditionallyIndependent;
        let mk = |n, m, len| {
            MultiLetterInstance::new(n, m, ProbVector::uniform(len), ws.clone(), wt.clone(), ci.clone())
        };
        assert!(mk(5, 1, 32).is_err());
        assert!(mk(0, 1, 1).is_err());
        assert!(mk(2, 5, 20).is_err());
        assert!(mk(2, 2, 4).is_err());
        let big = ChannelMatrix::identity(16);
        assert!(matches!(
            MultiLetterInstance::new(4, 1, ProbVector::uniform(1 << 16), big.clone(), big, ci.clone()),
            Err(Error::AlphabetOverflow { .. })
        ));
        let wrong = ChannelMatrix::from_flat(2, 4, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(MultiLetterInstance::new(1, 1, ProbVector::uniform(2), ws, wt, Coupling::Joint(wrong)).is_err());
    }

    #[test]
    fn stress_degraded_pair_has_no_violation() {
        let opts = StressOptions {
            count: 200,
            seed: 5,
            ..StressOptions::default()
        };
        let r = stress_test(&ChannelMatrix::bsc(0.1), &ChannelMatrix::bsc(0.2), &opts).unwrap();
        assert!(r.min_slack >= -1e-9, "{r:?}");
        assert!(r.violating_instance.is_none());
    }

    #[test]
    fn stress_reversed_pair_finds_rechecked_violation() {
        let opts = StressOptions {
            count: 200,
            seed: 5,
            ..StressOptions::default()
        };
        let r = stress_test(&ChannelMatrix::bsc(0.2), &ChannelMatrix::bsc(0.1), &opts).unwrap();
        let inst = r.violating_instance.expect("violation");
        let worst = lemma_slacks(&inst)
            .unwrap()
            .into_iter()
            .flat_map(|(a, b)| [a, b])
            .fold(f64::INFINITY, f64::min);
        assert_eq!(worst, r.min_slack);
        assert!(worst < -1e-9);
    }

    #[test]
    fn stress_is_thread_count_independent() {
        let opts = StressOptions {
            count: 64,
            seed: 9,
            ..StressOptions::default()
        };
        let (ws, wt) = (ChannelMatrix::bsc(0.25), ChannelMatrix::bsc(0.05));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| stress_test(&ws, &wt, &opts).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
