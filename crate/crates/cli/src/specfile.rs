//! JSON channel specification files.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use lessnoisy_core::channel::validate_channel;
use lessnoisy_core::interleave::InterleavingCertificate;
use lessnoisy_core::{AuxiliaryJoint, BroadcastChannel, ChannelMatrix, ProbVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A validated channel specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub input_labels: Option<Vec<String>>,
    pub receiver_names: Vec<String>,
    pub bc: BroadcastChannel,
    pub auxiliaries: Vec<(String, AuxiliaryJoint)>,
    pub certificates: Vec<(String, InterleavingCertificate)>,
}

impl ChannelSpec {
    pub fn new(bc: BroadcastChannel) -> Self {
        let receiver_names = (1..=bc.num_receivers()).map(|l| format!("Y{l}")).collect();
        Self {
            input_labels: None,
            receiver_names,
            bc,
            auxiliaries: Vec::new(),
            certificates: Vec::new(),
        }
    }

    pub fn auxiliary(&self, name: &str) -> Option<&AuxiliaryJoint> {
        self.auxiliaries.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn certificate(&self, name: &str) -> Option<&InterleavingCertificate> {
        self.certificates.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let raw = RawSpec {
            input_size: self.bc.input_size(),
            input_labels: self.input_labels.clone(),
            receivers: self
                .receiver_names
                .iter()
                .zip(self.bc.receivers())
                .map(|(name, w)| RawReceiver {
                    name: name.clone(),
                    matrix: Matrix(w.clone()),
                })
                .collect(),
            auxiliaries: self
                .auxiliaries
                .iter()
                .map(|(name, a)| RawAux {
                    name: name.clone(),
                    top: a.top().as_slice().to_vec(),
                    chain: a.chain().iter().cloned().map(Matrix).collect(),
                })
                .collect(),
            certificates: self
                .certificates
                .iter()
                .map(|(name, c)| RawCert {
                    name: name.clone(),
                    virtuals: c.virtuals().iter().cloned().map(Matrix).collect(),
                })
                .collect(),
        };
        let value = serde_json::to_value(&raw).expect("spec serializes");
        let mut s = String::new();
        write_json(&value, 0, &mut s);
        s.push('\n');
        s
    }
}

/// Pretty JSON that keeps arrays of numbers (matrix rows) on one line.
fn write_json(value: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value;
    let pad = "  ".repeat(indent + 1);
    match value {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            out.push_str(&serde_json::to_string(value).expect("numbers serialize").replace(',', ", "));
        }
        Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&serde_json::to_string(key).expect("keys serialize"));
                out.push_str(": ");
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
        other => out.push_str(&serde_json::to_string(other).expect("scalars serialize")),
    }
}

#[derive(Debug)]
pub enum SpecError {
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed JSON or a wrongly shaped document.
    Parse { line: usize, column: usize, message: String },
    /// Well-formed but invalid content.
    Validation {
        field: String,
        line: Option<usize>,
        message: String,
    },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            SpecError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            SpecError::Validation { field, line: Some(line), message } => {
                write!(f, "validation error at line {line} in {field}: {message}")
            }
            SpecError::Validation { field, line: None, message } => {
                write!(f, "validation error in {field}: {message}")
            }
        }
    }
}

impl std::error::Error for SpecError {}

/// A channel matrix that validates while deserializing, so that row errors
/// carry the line of the offending matrix.
#[derive(Debug, Clone)]
struct Matrix(ChannelMatrix);

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        validate_channel(&rows).map(Matrix).map_err(|e| D::Error::custom(format!("invalid matrix: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReceiver {
    name: String,
    matrix: Matrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAux {
    name: String,
    top: Vec<f64>,
    chain: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCert {
    name: String,
    virtuals: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    input_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_labels: Option<Vec<String>>,
    receivers: Vec<RawReceiver>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    auxiliaries: Vec<RawAux>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    certificates: Vec<RawCert>,
}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> SpecError {
    SpecError::Validation {
        field: field.into(),
        line: None,
        message: message.to_string(),
    }
}

fn check_unique<'a>(what: &str, names: impl Iterator<Item = &'a String>) -> Result<(), SpecError> {
    let mut seen = HashSet::new();
    for (i, name) in names.enumerate() {
        if !seen.insert(name) {
            return Err(invalid(format!("{what}[{i}].name"), format!("duplicate name {name:?}")));
        }
    }
    Ok(())
}

pub fn parse_channel_str(text: &str) -> Result<ChannelSpec, SpecError> {
    let raw: RawSpec = serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        match e.classify() {
            serde_json::error::Category::Data if e.to_string().contains("invalid matrix") => {
                SpecError::Validation {
                    field: "matrix".into(),
                    line: Some(line),
                    message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
                }
            }
            _ => SpecError::Parse {
                line,
                column,
                message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
            },
        }
    })?;

    if raw.input_size == 0 {
        return Err(invalid("input_size", "must be at least 1"));
    }
    if let Some(labels) = &raw.input_labels {
        if labels.len() != raw.input_size {
            return Err(invalid(
                "input_labels",
                format!("{} labels for an input alphabet of size {}", labels.len(), raw.input_size),
            ));
        }
        check_unique("input_labels", labels.iter())?;
    }
    check_unique("receivers", raw.receivers.iter().map(|r| &r.name))?;
    check_unique("auxiliaries", raw.auxiliaries.iter().map(|r| &r.name))?;
    check_unique("certificates", raw.certificates.iter().map(|r| &r.name))?;

    for (i, r) in raw.receivers.iter().enumerate() {
        if r.matrix.0.input_size() != raw.input_size {
            return Err(invalid(
                format!("receivers[{i}].matrix"),
                format!("{} rows, expected input_size = {}", r.matrix.0.input_size(), raw.input_size),
            ));
        }
    }
    let receiver_names: Vec<String> = raw.receivers.iter().map(|r| r.name.clone()).collect();
    let bc = BroadcastChannel::new(raw.receivers.into_iter().map(|r| r.matrix.0).collect())
        .map_err(|e| invalid("receivers", e))?;

    let mut auxiliaries = Vec::new();
    for (i, a) in raw.auxiliaries.into_iter().enumerate() {
        let field = format!("auxiliaries[{i}] ({:?})", a.name);
        let top = ProbVector::new(a.top).map_err(|e| invalid(format!("{field}.top"), e))?;
        let aux = AuxiliaryJoint::new(top, a.chain.into_iter().map(|m| m.0).collect())
            .map_err(|e| invalid(format!("{field}.chain"), e))?;
        if aux.num_receivers() != bc.num_receivers() || aux.input_size() != bc.input_size() {
            return Err(invalid(
                field,
                format!(
                    "chain describes {} receivers over {} inputs, channel has {} over {}",
                    aux.num_receivers(),
                    aux.input_size(),
                    bc.num_receivers(),
                    bc.input_size()
                ),
            ));
        }
        auxiliaries.push((a.name, aux));
    }

    let mut certificates = Vec::new();
    for (i, c) in raw.certificates.into_iter().enumerate() {
        let field = format!("certificates[{i}] ({:?})", c.name);
        let cert = InterleavingCertificate::new(c.virtuals.into_iter().map(|m| m.0).collect())
            .map_err(|e| invalid(format!("{field}.virtuals"), e))?;
        if cert.len() + 1 != bc.num_receivers() {
            return Err(invalid(
                field,
                format!("{} virtual receivers, expected {}", cert.len(), bc.num_receivers() - 1),
            ));
        }
        if cert.virtuals()[0].input_size() != bc.input_size() {
            return Err(invalid(
                format!("{field}.virtuals[0]"),
                format!("{} rows, expected input_size = {}", cert.virtuals()[0].input_size(), bc.input_size()),
            ));
        }
        certificates.push((c.name, cert));
    }

    Ok(ChannelSpec {
        input_labels: raw.input_labels,
        receiver_names,
        bc,
        auxiliaries,
        certificates,
    })
}

pub fn parse_channel_file(path: &Path) -> Result<ChannelSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_channel_str(&text)
}

fn bec(e: f64) -> ChannelMatrix {
    ChannelMatrix::new(vec![vec![1.0 - e, e, 0.0], vec![0.0, e, 1.0 - e]]).expect("valid erasure channel")
}

fn cascade_aux() -> AuxiliaryJoint {
    AuxiliaryJoint::new(
        ProbVector::uniform(2),
        vec![ChannelMatrix::bsc(0.25), ChannelMatrix::bsc(0.125)],
    )
    .expect("valid chain")
}

/// The fixture files written by `gen-examples`, keyed by file name.
pub fn example_specs() -> Vec<(&'static str, ChannelSpec)> {
    let mut cascade = ChannelSpec::new(BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3]));
    cascade.input_labels = Some(vec!["0".into(), "1".into()]);
    cascade.auxiliaries.push(("layered".into(), cascade_aux()));
    cascade.certificates.push((
        "degraded".into(),
        InterleavingCertificate::new(vec![ChannelMatrix::bsc(0.2), ChannelMatrix::bsc(1.0 / 6.0)])
            .expect("valid certificate"),
    ));

    let identity = ChannelSpec::new(
        BroadcastChannel::new(vec![ChannelMatrix::identity(2), ChannelMatrix::identity(2)])
            .expect("valid channel"),
    );

    // The middle receiver is less noisy than the last without degrading to it.
    let mut three = ChannelSpec::new(
        BroadcastChannel::new(vec![bec(0.1), bec(0.3), ChannelMatrix::bsc(0.1)]).expect("valid channel"),
    );
    three.certificates.push((
        "three_receiver".into(),
        InterleavingCertificate::new(vec![bec(0.3), ChannelMatrix::identity(3)]).expect("valid certificate"),
    ));

    let mut negative = ChannelSpec::new(BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3]));
    negative.certificates.push((
        "constant_v1".into(),
        InterleavingCertificate::new(vec![
            ChannelMatrix::constant(2, &ProbVector::uniform(2)),
            ChannelMatrix::identity(2),
        ])
        .expect("valid certificate"),
    ));

    vec![
        ("bsc_cascade.json", cascade),
        ("identity.json", identity),
        ("three_receiver.json", three),
        ("constant_v1.json", negative),
    ]
}
