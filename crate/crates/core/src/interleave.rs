//! Interleaving certificates: virtual receivers `X -> V_1 -> ... -> V_{k-1}`
//! with `Y_1 >= V_1 >= Y_2 >= ... >= V_{k-1} >= Y_k` in the less-noisy order.

use rayon::prelude::*;

use crate::channel::{compose, product_channel, BroadcastChannel, ChannelMatrix, DEFAULT_ALPHABET_CAP};
use crate::error::{Error, Result};
use crate::ordering::{is_degraded, less_noisy_test, OrderOptions, OrderStatus, OrderVerdict};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct InterleavingCertificate {
    /// `[W_{V_1|X}, W_{V_2|V_1}, ..., W_{V_{k-1}|V_{k-2}}]`.
    virtuals: Vec<ChannelMatrix>,
}

impl InterleavingCertificate {
    pub fn new(virtuals: Vec<ChannelMatrix>) -> Result<Self> {
        if virtuals.is_empty() {
            return Err(Error::InvalidArgument(
                "a certificate needs at least one virtual receiver".into(),
            ));
        }
        for (j, pair) in virtuals.windows(2).enumerate() {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(Error::DimensionMismatch {
                    what: if j == 0 {
                        "input of W_{V2|V1}"
                    } else {
                        "input of a later virtual factor"
                    },
                    expected: pair[0].output_size(),
                    found: pair[1].input_size(),
                });
            }
        }
        Ok(Self { virtuals })
    }

    pub fn virtuals(&self) -> &[ChannelMatrix] {
        &self.virtuals
    }

    pub fn len(&self) -> usize {
        self.virtuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.virtuals.is_empty()
    }
}

/// `W_{V_j|X}` for every `j`, composing the chain from the left.
pub fn effective_virtual_channels(cert: &InterleavingCertificate) -> Result<Vec<ChannelMatrix>> {
    let mut out: Vec<ChannelMatrix> = Vec::with_capacity(cert.len());
    for f in &cert.virtuals {
        let next = match out.last() {
            None => f.clone(),
            Some(prev) => compose(prev, f)?,
        };
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterleaveStatus {
    /// Every link is certified by a degrading channel.
    Certified,
    /// No link was refuted.
    Pass,
    /// Some link is not less noisy.
    Fail,
}

impl InterleaveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InterleaveStatus::Certified => "Certified",
            InterleaveStatus::Pass => "Pass",
            InterleaveStatus::Fail => "Fail",
        }
    }
}

/// One link `upper >= lower` of the interleaved chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkVerdict {
    pub upper: String,
    pub lower: String,
    pub verdict: OrderVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterleaveReport {
    pub links: Vec<LinkVerdict>,
    pub status: InterleaveStatus,
}

/// Names and channels of the chain `Y_1, V_1, Y_2, ..., V_{k-1}, Y_k`.
fn interleaved_nodes(bc: &BroadcastChannel, virtuals: Vec<ChannelMatrix>) -> Vec<(String, ChannelMatrix)> {
    let mut nodes = Vec::with_capacity(2 * bc.num_receivers() - 1);
    let mut vs = virtuals.into_iter();
    for (l, w) in bc.receivers().iter().enumerate() {
        if l > 0 {
            nodes.push((format!("V{l}"), vs.next().unwrap()));
        }
        nodes.push((format!("Y{}", l + 1), w.clone()));
    }
    nodes
}

/// Runs the less-noisy test on each of the `2k - 2` links. Link `i` uses
/// seed `derive_seed(opts.seed, i)`.
pub fn verify_certificate(
    bc: &BroadcastChannel,
    cert: &InterleavingCertificate,
    opts: &OrderOptions,
) -> Result<InterleaveReport> {
    let k = bc.num_receivers();
    if cert.len() != k - 1 {
        return Err(Error::DimensionMismatch {
            what: "virtual receivers in the certificate",
            expected: k - 1,
            found: cert.len(),
        });
    }
    if cert.virtuals[0].input_size() != bc.input_size() {
        return Err(Error::DimensionMismatch {
            what: "input alphabet of W_{V1|X}",
            expected: bc.input_size(),
            found: cert.virtuals[0].input_size(),
        });
    }
    let nodes = interleaved_nodes(bc, effective_virtual_channels(cert)?);
    let links = (0..nodes.len() - 1)
        .into_par_iter()
        .map(|i| {
            let o = OrderOptions {
                seed: derive_seed(opts.seed, i as u64),
                ..*opts
            };
            Ok(LinkVerdict {
                upper: nodes[i].0.clone(),
                lower: nodes[i + 1].0.clone(),
                verdict: less_noisy_test(&nodes[i].1, &nodes[i + 1].1, &o)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let status = if links
        .iter()
        .any(|l| l.verdict.status == OrderStatus::NotLessNoisy)
    {
        InterleaveStatus::Fail
    } else if links
        .iter()
        .all(|l| l.verdict.status == OrderStatus::CertifiedLessNoisy)
    {
        InterleaveStatus::Certified
    } else {
        InterleaveStatus::Pass
    };
    Ok(InterleaveReport { links, status })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// `V_i = Y_{i+1}` along a chain of degrading channels.
    Degraded,
    /// `V_i = (Y_{i+1}, ..., Y_k)`.
    Nested,
    /// `V_1 = V_2 = Y_2` for three receivers.
    ThreeReceiver,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::Degraded => "degraded",
            CertificateKind::Nested => "nested",
            CertificateKind::ThreeReceiver => "three_receiver",
        }
    }
}

impl std::str::FromStr for CertificateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degraded" => Ok(CertificateKind::Degraded),
            "nested" => Ok(CertificateKind::Nested),
            "three_receiver" | "three-receiver" => Ok(CertificateKind::ThreeReceiver),
            other => Err(Error::InvalidArgument(format!(
                "unknown certificate kind {other:?}"
            ))),
        }
    }
}

/// Builds the certificate of the given kind for `bc`.
///
/// `Degraded` needs `Y_{l+1}` to be a degraded version of `Y_l` for every
/// `l` (within `tol`); the first factor is `W_{Y_2|X}` itself and the later
/// factors are the recovered degrading channels.
pub fn builtin_certificate(
    bc: &BroadcastChannel,
    kind: CertificateKind,
    tol: f64,
) -> Result<InterleavingCertificate> {
    let k = bc.num_receivers();
    let virtuals = match kind {
        CertificateKind::Degraded => {
            let mut out = vec![bc.receiver(1).clone()];
            for l in 0..k - 1 {
                let m = is_degraded(bc.receiver(l), bc.receiver(l + 1), tol)?.ok_or_else(|| {
                    Error::NotApplicable(format!("Y{} is not a degraded version of Y{}", l + 2, l + 1))
                })?;
                if l > 0 {
                    out.push(m);
                }
            }
            out
        }
        CertificateKind::Nested => {
            let mut out = vec![product_channel(&bc.receivers()[1..], DEFAULT_ALPHABET_CAP)?];
            for l in 2..k {
                // Drop the leading component Y_l of (Y_l, ..., Y_k).
                let lead = bc.receiver(l - 1).output_size();
                let rest: usize = bc.receivers()[l..].iter().map(|w| w.output_size()).product();
                let mut data = vec![0.0; lead * rest * rest];
                for i in 0..lead * rest {
                    data[i * rest + i % rest] = 1.0;
                }
                out.push(ChannelMatrix::from_flat(lead * rest, rest, data)?);
            }
            out
        }
        CertificateKind::ThreeReceiver => {
            if k != 3 {
                return Err(Error::NotApplicable(format!(
                    "the three-receiver certificate needs 3 receivers, found {k}"
                )));
            }
            let y2 = bc.receiver(1).clone();
            let size = y2.output_size();
            vec![y2, ChannelMatrix::identity(size)]
        }
    };
    InterleavingCertificate::new(virtuals)
}
