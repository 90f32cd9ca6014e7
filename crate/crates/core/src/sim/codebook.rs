use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SimConfig, Stage, Tables, TrialOutcome};
use crate::channel::BroadcastChannel;
use crate::error::{Error, Result};
use crate::rng::{cdf_of, sample_cdf};

/// Superposition codebook stored as flat symbol arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    /// `[M_1, M_2, M_3]`.
    counts: [usize; 3],
    u_words: Vec<u16>,
    v_words: Vec<u16>,
    x_words: Vec<u16>,
}

impl Codebook {
    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn u_word(&self, m3: usize) -> &[u16] {
        &self.u_words[m3 * self.n..(m3 + 1) * self.n]
    }

    pub fn v_word(&self, m2: usize, m3: usize) -> &[u16] {
        let i = m3 * self.counts[1] + m2;
        &self.v_words[i * self.n..(i + 1) * self.n]
    }

    pub fn x_word(&self, m1: usize, m2: usize, m3: usize) -> &[u16] {
        let i = (m3 * self.counts[1] + m2) * self.counts[0] + m1;
        &self.x_words[i * self.n..(i + 1) * self.n]
    }

    /// Total number of stored symbols.
    pub fn symbols(&self) -> usize {
        self.u_words.len() + self.v_words.len() + self.x_words.len()
    }

    pub(crate) fn generate_with(
        config: &SimConfig,
        t: &Tables,
        counts: [usize; 3],
        seed: u64,
    ) -> Self {
        let n = config.n;
        let [m1, m2, m3] = counts;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u_words: Vec<u16> = (0..m3 * n)
            .map(|_| sample_cdf(&mut rng, &t.u_cdf) as u16)
            .collect();
        let mut v_words = Vec::with_capacity(m3 * m2 * n);
        for c in 0..m3 {
            let cloud = &u_words[c * n..(c + 1) * n];
            for _ in 0..m2 {
                v_words.extend(
                    cloud
                        .iter()
                        .map(|&u| sample_cdf(&mut rng, &t.v_cdf[u as usize]) as u16),
                );
            }
        }
        let mut x_words = Vec::with_capacity(m3 * m2 * m1 * n);
        for s in 0..m3 * m2 {
            let sat = &v_words[s * n..(s + 1) * n];
            for _ in 0..m1 {
                x_words.extend(
                    sat.iter()
                        .map(|&v| sample_cdf(&mut rng, &t.x_cdf[v as usize]) as u16),
                );
            }
        }
        Self {
            n,
            counts,
            u_words,
            v_words,
            x_words,
        }
    }
}

/// Random codebook for `config`, seeded by `config.seed`.
pub fn generate_codebooks(config: &SimConfig) -> Result<Codebook> {
    config.validate()?;
    let counts = config.explicit_counts()?;
    Ok(Codebook::generate_with(
        config,
        &Tables::new(config),
        counts,
        config.seed,
    ))
}

pub(crate) fn transmit_with<R: Rng + ?Sized>(t: &Tables, x: &[u16], rng: &mut R) -> Vec<Vec<u16>> {
    t.receivers
        .iter()
        .map(|r| {
            x.iter()
                .map(|&s| sample_cdf(rng, &r.w_cdf[s as usize]) as u16)
                .collect()
        })
        .collect()
}

/// Passes `x_word` through every receiver independently, letter by letter.
pub fn transmit(x_word: &[u16], bc: &BroadcastChannel, seed: u64) -> Result<Vec<Vec<u16>>> {
    if let Some(&bad) = x_word.iter().find(|&&s| s as usize >= bc.input_size()) {
        return Err(Error::InvalidArgument(format!(
            "input symbol {bad} outside alphabet of size {}",
            bc.input_size()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(bc
        .receivers()
        .iter()
        .map(|w| {
            let cdfs: Vec<Vec<f64>> = w.rows().map(cdf_of).collect();
            x_word
                .iter()
                .map(|&s| sample_cdf(&mut rng, &cdfs[s as usize]) as u16)
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Failure {
    NoneTypical,
    Ambiguous,
}

/// Unique index whose score exceeds `threshold`; a lone candidate is
/// accepted without a test.
fn decide(count: usize, threshold: f64, mut score: impl FnMut(usize) -> f64) -> std::result::Result<usize, Failure> {
    if count == 1 {
        return Ok(0);
    }
    let mut found = None;
    for m in 0..count {
        if score(m) > threshold {
            if found.is_some() {
                return Err(Failure::Ambiguous);
            }
            found = Some(m);
        }
    }
    found.ok_or(Failure::NoneTypical)
}

fn score(word: &[u16], y: &[u16], table: impl Fn(usize, usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for (i, (&a, &b)) in word.iter().zip(y).enumerate() {
        s += table(i, a as usize, b as usize);
        if s == f64::NEG_INFINITY {
            break;
        }
    }
    s
}

/// Decodes the first `stages` layers at receiver index `r` (0-based).
/// Returns the decoded indices `[m_3, m_2, m_1]` prefix and the failing
/// stage, if any.
pub(crate) fn successive(
    t: &Tables,
    book: &Codebook,
    y: &[u16],
    r: usize,
    stages: usize,
) -> (Vec<usize>, Option<(Stage, Failure)>) {
    let rt = &t.receivers[r];
    let n = book.n as f64;
    let ny = rt.ny;
    let [m1, m2, m3] = book.counts;
    let mut out = Vec::with_capacity(stages);

    let u_hat = match decide(m3, n * rt.thr[0], |m| {
        score(book.u_word(m), y, |_, u, yy| rt.dens_u[u * ny + yy])
    }) {
        Ok(m) => m,
        Err(f) => return (out, Some((Stage::U, f))),
    };
    out.push(u_hat);
    if stages == 1 {
        return (out, None);
    }
    let cloud = book.u_word(u_hat);
    let v_hat = match decide(m2, n * rt.thr[1], |m| {
        score(book.v_word(m, u_hat), y, |i, v, yy| {
            rt.dens_v[(cloud[i] as usize * t.nv + v) * ny + yy]
        })
    }) {
        Ok(m) => m,
        Err(f) => return (out, Some((Stage::V, f))),
    };
    out.push(v_hat);
    if stages == 2 {
        return (out, None);
    }
    let sat = book.v_word(v_hat, u_hat);
    match decide(m1, n * rt.thr[2], |m| {
        score(book.x_word(m, v_hat, u_hat), y, |i, x, yy| {
            rt.dens_x[(sat[i] as usize * t.nx + x) * ny + yy]
        })
    }) {
        Ok(m) => {
            out.push(m);
            (out, None)
        }
        Err(f) => (out, Some((Stage::X, f))),
    }
}

fn check_inputs(book: &Codebook, config: &SimConfig, y: &[u16], r: usize) -> Result<Tables> {
    config.validate()?;
    let counts = config.explicit_counts()?;
    if book.n != config.n || book.counts != counts {
        return Err(Error::InvalidArgument(
            "codebook dimensions do not match the configuration".into(),
        ));
    }
    if y.len() != config.n {
        return Err(Error::DimensionMismatch {
            what: "received sequence length",
            expected: config.n,
            found: y.len(),
        });
    }
    let ny = config.bc.receiver(r).output_size();
    if y.iter().any(|&s| s as usize >= ny) {
        return Err(Error::InvalidArgument("received symbol outside the output alphabet".into()));
    }
    Ok(Tables::new(config))
}

fn into_error(stage: Stage, f: Failure) -> Error {
    match f {
        Failure::NoneTypical => Error::NoneTypical {
            stage: stage.as_str(),
        },
        Failure::Ambiguous => Error::Ambiguous {
            stage: stage.as_str(),
        },
    }
}

/// Receiver 3 decodes its cloud index `m_3` from `y3`.
pub fn decode_receiver3(y3: &[u16], book: &Codebook, config: &SimConfig) -> Result<usize> {
    let t = check_inputs(book, config, y3, 2)?;
    match successive(&t, book, y3, 2, 1) {
        (out, None) => Ok(out[0]),
        (_, Some((s, f))) => Err(into_error(s, f)),
    }
}

/// Receiver `receiver` (1 or 2) decodes `[m_3, m_2]`, and `m_1` for
/// receiver 1, one layer at a time.
pub fn decode_successive(
    y: &[u16],
    book: &Codebook,
    config: &SimConfig,
    receiver: usize,
) -> Result<Vec<usize>> {
    if !(1..=2).contains(&receiver) {
        return Err(Error::InvalidArgument(format!(
            "successive decoding runs at receiver 1 or 2, not {receiver}"
        )));
    }
    let t = check_inputs(book, config, y, receiver - 1)?;
    match successive(&t, book, y, receiver - 1, super::stages_of(receiver)) {
        (out, None) => Ok(out),
        (_, Some((s, f))) => Err(into_error(s, f)),
    }
}

pub(crate) fn explicit_trial<R: Rng + ?Sized>(
    config: &SimConfig,
    t: &Tables,
    book: &Codebook,
    rng: &mut R,
) -> TrialOutcome {
    let [c1, c2, c3] = book.counts;
    let truth = [
        rng.random_range(0..c3),
        rng.random_range(0..c2),
        rng.random_range(0..c1),
    ];
    let ys = transmit_with(t, book.x_word(truth[2], truth[1], truth[0]), rng);
    debug_assert_eq!(ys[0].len(), config.n);
    let mut outcome = [None; 3];
    for (r, slot) in outcome.iter_mut().enumerate() {
        let stages = super::stages_of(r + 1);
        let (decoded, failure) = successive(t, book, &ys[r], r, stages);
        *slot = decoded
            .iter()
            .zip(&truth)
            .position(|(a, b)| a != b)
            .map(|i| Stage::ALL[i])
            .or(failure.map(|(s, _)| s));
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelMatrix, ProbVector};
    use crate::region::AuxiliaryJoint;
    use crate::sim::tests::cascade_config;
    use crate::sim::Threshold;

    /// Noiseless four-symbol channels with `V = (U, b)` and `X = V`, so every
    /// mismatching letter has zero likelihood.
    fn noiseless_config(n: usize, rates: [f64; 3]) -> SimConfig {
        let id = ChannelMatrix::identity(4);
        let bc = BroadcastChannel::new(vec![id.clone(), id.clone(), id.clone()]).unwrap();
        let split = ChannelMatrix::new(vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]]).unwrap();
        let aux = AuxiliaryJoint::new(ProbVector::uniform(2), vec![split, id]).unwrap();
        SimConfig::new(n, rates, aux, bc).unwrap()
    }

    #[test]
    fn zero_rates_single_codeword_per_layer() {
        let c = cascade_config(12, [0.0; 3]);
        let b = generate_codebooks(&c).unwrap();
        assert_eq!(b.counts(), [1, 1, 1]);
        assert_eq!(b.symbols(), 36);
    }

    #[test]
    fn degenerate_cloud_law_gives_constant_centers() {
        let mut c = cascade_config(10, [0.0, 0.0, 0.3]);
        c.aux = AuxiliaryJoint::new(
            ProbVector::point_mass(2, 1),
            c.aux.chain().to_vec(),
        )
        .unwrap();
        let b = generate_codebooks(&c).unwrap();
        for m in 0..8 {
            assert!(b.u_word(m).iter().all(|&u| u == 1));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let c = cascade_config(16, [0.25, 0.25, 0.25]);
        let a = generate_codebooks(&c).unwrap();
        assert_eq!(a, generate_codebooks(&c).unwrap());
        let other = SimConfig { seed: 1, ..c.clone() };
        assert_ne!(a, generate_codebooks(&other).unwrap());
        assert_eq!(a.counts(), [16, 16, 16]);
    }

    #[test]
    fn memory_cap_enforced() {
        let mut c = cascade_config(16, [0.25, 0.25, 0.25]);
        c.symbol_cap = 1000;
        assert!(matches!(generate_codebooks(&c), Err(Error::MemoryCapExceeded { .. })));
    }

    #[test]
    fn transmit_identity_and_flip_rate() {
        let id = ChannelMatrix::identity(3);
        let bc = BroadcastChannel::new(vec![id.clone(), id]).unwrap();
        let x: Vec<u16> = (0..30).map(|i| (i % 3) as u16).collect();
        let y = transmit(&x, &bc, 4).unwrap();
        assert_eq!(y, vec![x.clone(), x]);

        let bc = BroadcastChannel::bsc_cascade(&[0.1, 0.5]);
        let x = vec![0u16; 10_000];
        let y = transmit(&x, &bc, 9).unwrap();
        let flips = y[0].iter().filter(|&&s| s == 1).count() as f64 / 1e4;
        assert!((flips - 0.1).abs() < 0.01, "{flips}");
        // BSC(0.5): chi-square with one degree of freedom, 0.1% level.
        let ones = y[1].iter().filter(|&&s| s == 1).count() as f64;
        let chi2 = 2.0 * (ones - 5000.0).powi(2) / 5000.0;
        assert!(chi2 < 10.83, "{chi2}");
    }

    #[test]
    fn loose_threshold_single_message_decodes_zero() {
        let mut c = cascade_config(20, [0.0; 3]);
        c.threshold = Threshold::Absolute(1.0);
        let b = generate_codebooks(&c).unwrap();
        for s in 0..10 {
            let y = transmit(b.x_word(0, 0, 0), &c.bc, s).unwrap();
            assert_eq!(decode_receiver3(&y[2], &b, &c).unwrap(), 0);
            assert_eq!(decode_successive(&y[0], &b, &c, 1).unwrap(), vec![0, 0, 0]);
            assert_eq!(decode_successive(&y[1], &b, &c, 2).unwrap(), vec![0, 0]);
        }
    }

    fn distinct(words: &[&[u16]]) -> bool {
        words.iter().enumerate().all(|(i, a)| words[..i].iter().all(|b| a != b))
    }

    #[test]
    fn noiseless_recovery_with_distinct_codewords() {
        let mut c = noiseless_config(12, [0.0, 0.25, 0.25]);
        c.threshold = Threshold::Absolute(10.0);
        let mut checked = 0;
        for seed in 0..5 {
            c.seed = seed;
            let b = generate_codebooks(&c).unwrap();
            let [_, m2, m3] = b.counts();
            let us: Vec<&[u16]> = (0..m3).map(|m| b.u_word(m)).collect();
            if !distinct(&us) {
                continue;
            }
            for m in 0..m3 {
                let vs: Vec<&[u16]> = (0..m2).map(|k| b.v_word(k, m)).collect();
                let y = transmit(b.x_word(0, 5, m), &c.bc, 0).unwrap();
                assert_eq!(decode_receiver3(&y[2], &b, &c).unwrap(), m);
                if distinct(&vs) {
                    assert_eq!(decode_successive(&y[1], &b, &c, 2).unwrap(), vec![m, 5]);
                    assert_eq!(decode_successive(&y[0], &b, &c, 1).unwrap(), vec![m, 5, 0]);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn decoder_argument_checks() {
        let c = cascade_config(8, [0.25, 0.0, 0.25]);
        let b = generate_codebooks(&c).unwrap();
        assert!(decode_successive(&[0; 8], &b, &c, 3).is_err());
        assert!(decode_receiver3(&[0; 7], &b, &c).is_err());
        assert!(decode_receiver3(&[2; 8], &b, &c).is_err());
        let other = cascade_config(8, [0.5, 0.0, 0.25]);
        assert!(decode_receiver3(&[0; 8], &b, &other).is_err());
        assert!(transmit(&[2], &c.bc, 0).is_err());
    }
}
