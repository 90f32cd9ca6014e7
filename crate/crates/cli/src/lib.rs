//! The `lessnoisy` command-line tool.

pub mod output;
pub mod specfile;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lessnoisy_core::channel::ProbVector;
use lessnoisy_core::interleave::{builtin_certificate, verify_certificate, CertificateKind, InterleaveStatus};
use lessnoisy_core::lemma::{lemma_slacks, stress_test, StressOptions};
use lessnoisy_core::ordering::{degradation_residual, less_noisy_test, OrderOptions, OrderStatus, OrderVerdict};
use lessnoisy_core::region::{
    maximize_weighted_sum, region_boundary, two_receiver_region, weight_sweep, OptimizeOptions,
};
use lessnoisy_core::sim::{run_trials, CodebookMode, Engine, SimConfig, Stage, Threshold};
use lessnoisy_core::{AuxiliaryJoint, BroadcastChannel};

use output::{Cell, Format, Table};
use specfile::{example_specs, parse_channel_file, ChannelSpec};

#[derive(Debug, Parser)]
#[command(name = "lessnoisy", version, about = "Toolkit for less-noisy broadcast channels")]
pub struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the leading comment line with the run metadata and timestamp.
    #[arg(long, global = true)]
    no_header: bool,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test Y1 ⪰ Y2 ⪰ ... ⪰ Yk pair by pair.
    CheckOrder {
        spec: PathBuf,
        /// Test a single pair `s,t` (1-based) instead of the chain.
        #[arg(long, value_parser = parse_pair)]
        pair: Option<(usize, usize)>,
        /// Random binary auxiliaries per pair.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Sample the superposition rate region by weighted-sum maximization.
    Region {
        spec: PathBuf,
        /// A single weight vector instead of a sweep.
        #[arg(long, value_parser = parse_list)]
        weights: Option<Floats>,
        /// Number of sweep directions.
        #[arg(long, default_value_t = 10)]
        directions: usize,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        /// Auxiliary cardinalities `|U_k|,...,|U_2|`.
        #[arg(long, value_parser = parse_usizes)]
        caps: Option<Counts>,
    },
    /// Two-receiver region for a pair of receivers.
    TwoRegion {
        spec: PathBuf,
        #[arg(long, value_parser = parse_pair, default_value = "1,2")]
        pair: (usize, usize),
        #[arg(long, value_parser = parse_list)]
        weights: Option<Floats>,
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
    },
    /// Monte Carlo error probability of superposition coding.
    Simulate {
        spec: PathBuf,
        /// Blocklength.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Rates `R1,R2,R3` in bits per channel use.
        #[arg(long, value_parser = parse_list)]
        rates: Option<Floats>,
        /// Named auxiliary chain from the spec file.
        #[arg(long)]
        aux: Option<String>,
        /// Optimize the auxiliary for these weights; without `--rates` the
        /// rates are the optimized ones scaled by `--backoff`.
        #[arg(long, value_parser = parse_list)]
        weights: Option<Floats>,
        #[arg(long, default_value_t = 0.85)]
        backoff: f64,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        /// Auxiliary cardinalities `|U|,|V|` for `--weights`.
        #[arg(long, value_parser = parse_usizes)]
        caps: Option<Counts>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = EngineArg::Explicit)]
        engine: EngineArg,
        /// Threshold backoff as a fraction of each stage's information.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = CodebookArg::Fresh)]
        codebook: CodebookArg,
    },
    /// Stress the multi-letter inequality on random instances.
    VerifyLemma {
        spec: PathBuf,
        #[arg(long, value_parser = parse_pair, default_value = "1,2")]
        pair: (usize, usize),
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, value_parser = parse_usizes, default_value = "2,3")]
        blocklengths: Counts,
        #[arg(long, value_parser = parse_usizes, default_value = "1,2")]
        messages: Counts,
    },
    /// Verify an interleaving certificate link by link.
    Interleave {
        spec: PathBuf,
        /// Named certificate from the spec file.
        #[arg(long, conflicts_with = "kind")]
        certificate: Option<String>,
        /// Built-in certificate: degraded, nested or three_receiver.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Write the shipped fixture files into `--out` (default `fixtures`).
    GenExamples,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Explicit,
    Ensemble,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodebookArg {
    Fresh,
    Fixed,
}

/// Comma-separated numbers.
#[derive(Debug, Clone)]
struct Floats(Vec<f64>);

#[derive(Debug, Clone)]
struct Counts(Vec<usize>);

fn parse_list(s: &str) -> Result<Floats, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Floats)
}

fn parse_usizes(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    match parse_usizes(s)?.0.as_slice() {
        &[a, b] if a >= 1 && b >= 1 => Ok((a, b)),
        _ => Err(format!("expected two 1-based receiver indices, got {s:?}")),
    }
}

/// How a command finished.
enum Outcome {
    Success,
    /// The computation ran but the verdict was negative.
    VerdictFailure,
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::VerdictFailure) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.global.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    pool.install(|| dispatch(cli))
}

fn load(path: &Path) -> anyhow::Result<ChannelSpec> {
    parse_channel_file(path).with_context(|| format!("{}", path.display()))
}

fn receiver_index(spec: &ChannelSpec, l: usize) -> anyhow::Result<usize> {
    if l == 0 || l > spec.bc.num_receivers() {
        bail!("receiver {l} out of range 1..={}", spec.bc.num_receivers());
    }
    Ok(l - 1)
}

fn emit(cli: &Cli, name: &str, default: Format, table: &Table) -> anyhow::Result<()> {
    let format = cli.global.format.unwrap_or(default);
    let mut text = String::new();
    if !cli.global.no_header {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        text.push_str(&format!("# lessnoisy {name} seed={} generated={stamp}\n", cli.global.seed));
    }
    text.push_str(&table.render(format));
    match &cli.global.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn witness_cell(v: &OrderVerdict) -> (Cell, Cell) {
    match &v.witness {
        Some(w) => (
            w.gap.into(),
            format!("lambda={};p0={:?};p1={:?}", w.lambda, w.p0.as_slice(), w.p1.as_slice()).into(),
        ),
        None => (0.0.into(), "".into()),
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::CheckOrder { spec, pair, trials, tol } => {
            let spec = load(spec)?;
            let pairs: Vec<(usize, usize)> = match pair {
                Some((s, t)) => vec![(receiver_index(&spec, *s)?, receiver_index(&spec, *t)?)],
                None => (0..spec.bc.num_receivers() - 1).map(|l| (l, l + 1)).collect(),
            };
            let mut table = Table::new(["upper", "lower", "status", "residual", "witness_gap", "witness"]);
            let mut failed = false;
            for (i, &(s, t)) in pairs.iter().enumerate() {
                let opts = OrderOptions {
                    trials: *trials,
                    tol: *tol,
                    seed: lessnoisy_core::rng::derive_seed(seed, i as u64),
                };
                let (ws, wt) = (spec.bc.receiver(s), spec.bc.receiver(t));
                let verdict = less_noisy_test(ws, wt, &opts)?;
                let (residual, _) = degradation_residual(ws, wt)?;
                failed |= verdict.status == OrderStatus::NotLessNoisy;
                let (gap, witness) = witness_cell(&verdict);
                table.push(vec![
                    spec.receiver_names[s].clone().into(),
                    spec.receiver_names[t].clone().into(),
                    verdict.status.as_str().into(),
                    residual.into(),
                    gap,
                    witness,
                ]);
            }
            emit(cli, "check-order", Format::Table, &table)?;
            Ok(if failed { Outcome::VerdictFailure } else { Outcome::Success })
        }

        Command::Region { spec, weights, directions, restarts, caps } => {
            let spec = load(spec)?;
            let k = spec.bc.num_receivers();
            let opts = OptimizeOptions {
                restarts: *restarts,
                seed,
                caps: caps.as_ref().map(|c| c.0.clone()),
                ..OptimizeOptions::default()
            };
            let points: Vec<(Vec<f64>, Vec<f64>)> = match weights {
                Some(Floats(w)) => {
                    let (r, _) = maximize_weighted_sum(&spec.bc, w, &opts)?;
                    vec![(w.clone(), r.rates().to_vec())]
                }
                None => region_boundary(&spec.bc, *directions, &opts)?
                    .points
                    .into_iter()
                    .map(|p| (p.weights, p.rates.0))
                    .collect(),
            };
            let columns = (1..=k)
                .map(|l| format!("w{l}"))
                .chain((1..=k).map(|l| format!("R{l}")))
                .chain(["weighted_sum".to_string()]);
            let mut table = Table::new(columns);
            for (w, r) in points {
                let sum: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
                table.push(w.iter().chain(&r).map(|&v| v.into()).chain([sum.into()]).collect());
            }
            emit(cli, "region", Format::Csv, &table)?;
            Ok(Outcome::Success)
        }

        Command::TwoRegion { spec, pair, weights, directions, restarts } => {
            let spec = load(spec)?;
            let (s, t) = (receiver_index(&spec, pair.0)?, receiver_index(&spec, pair.1)?);
            let bc = BroadcastChannel::new(vec![spec.bc.receiver(s).clone(), spec.bc.receiver(t).clone()])?;
            let opts = OptimizeOptions {
                restarts: *restarts,
                seed,
                ..OptimizeOptions::default()
            };
            let sweep = match weights {
                Some(Floats(w)) => vec![w.clone()],
                None => weight_sweep(2, *directions),
            };
            let mut table = Table::new(["w1", "w2", "R1", "R2", "weighted_sum"]);
            for w in sweep {
                let (r, _) = two_receiver_region(&bc, &w, &opts)?;
                let sum = r.weighted_sum(&w);
                table.push(vec![w[0].into(), w[1].into(), r.0[0].into(), r.0[1].into(), sum.into()]);
            }
            emit(cli, "two-region", Format::Csv, &table)?;
            Ok(Outcome::Success)
        }

        Command::Simulate {
            spec,
            n,
            rates,
            aux,
            weights,
            backoff,
            restarts,
            caps,
            trials,
            engine,
            delta,
            codebook,
        } => {
            let spec = load(spec)?;
            if spec.bc.num_receivers() != 3 {
                bail!("simulation needs exactly 3 receivers, the spec has {}", spec.bc.num_receivers());
            }
            let (aux, optimized): (AuxiliaryJoint, Option<Vec<f64>>) = match (aux, weights) {
                (Some(name), _) => (
                    spec.auxiliary(name).ok_or_else(|| anyhow!("no auxiliary named {name:?}"))?.clone(),
                    None,
                ),
                (None, Some(Floats(w))) => {
                    let opts = OptimizeOptions {
                        restarts: *restarts,
                        seed,
                        caps: caps.as_ref().map(|c| c.0.clone()),
                        ..OptimizeOptions::default()
                    };
                    let (r, a) = maximize_weighted_sum(&spec.bc, w, &opts)?;
                    (a, Some(r.0))
                }
                (None, None) => match spec.auxiliaries.first() {
                    Some((_, a)) => (a.clone(), None),
                    None => (AuxiliaryJoint::trivial(3, &ProbVector::uniform(spec.bc.input_size())), None),
                },
            };
            let rates: [f64; 3] = match (rates, optimized) {
                (Some(Floats(r)), _) => r
                    .as_slice()
                    .try_into()
                    .map_err(|_| anyhow!("--rates needs 3 values, got {}", r.len()))?,
                (None, Some(r)) => [0, 1, 2].map(|l| (backoff * r[l]).max(0.0)),
                (None, None) => bail!("give --rates, or --weights to derive them"),
            };
            let mut config = SimConfig::new(*n, rates, aux, spec.bc.clone())?;
            config.trials = *trials;
            config.seed = seed;
            config.threshold = Threshold::Relative(*delta);
            config.engine = match engine {
                EngineArg::Explicit => Engine::Explicit,
                EngineArg::Ensemble => Engine::Ensemble,
            };
            config.codebook_mode = match codebook {
                CodebookArg::Fresh => CodebookMode::Fresh,
                CodebookArg::Fixed => CodebookMode::Fixed,
            };
            let result = run_trials(&config)?;
            let mut table = Table::new([
                "receiver", "rate", "errors", "trials", "fraction", "ci_low", "ci_high", "stage_u", "stage_v",
                "stage_x",
            ]);
            for l in 1..=3 {
                let (lo, hi) = result.receiver_interval(l);
                table.push(vec![
                    spec.receiver_names[l - 1].clone().into(),
                    rates[l - 1].into(),
                    result.receiver_errors[l - 1].into(),
                    result.trials.into(),
                    result.receiver_fraction(l).into(),
                    lo.into(),
                    hi.into(),
                    result.stage_fraction(l, Stage::U).into(),
                    result.stage_fraction(l, Stage::V).into(),
                    result.stage_fraction(l, Stage::X).into(),
                ]);
            }
            let (lo, hi) = result.p_e_interval();
            table.push(vec![
                "total".into(),
                rates.iter().sum::<f64>().into(),
                result.total_errors.into(),
                result.trials.into(),
                result.p_e().into(),
                lo.into(),
                hi.into(),
                "".into(),
                "".into(),
                "".into(),
            ]);
            emit(cli, "simulate", Format::Table, &table)?;
            Ok(Outcome::Success)
        }

        Command::VerifyLemma { spec, pair, count, blocklengths, messages } => {
            let spec = load(spec)?;
            let (s, t) = (receiver_index(&spec, pair.0)?, receiver_index(&spec, pair.1)?);
            let opts = StressOptions {
                count: *count,
                seed,
                blocklengths: blocklengths.0.clone(),
                message_sizes: messages.0.clone(),
                ..StressOptions::default()
            };
            let report = stress_test(spec.bc.receiver(s), spec.bc.receiver(t), &opts)?;
            let violated = report.violating_instance.is_some();
            let mut table = Table::new(["upper", "lower", "instances", "min_slack", "min_index", "status"]);
            table.push(vec![
                spec.receiver_names[s].clone().into(),
                spec.receiver_names[t].clone().into(),
                report.instances.into(),
                report.min_slack.into(),
                report.min_index.into(),
                if violated { "violation" } else { "ok" }.into(),
            ]);
            emit(cli, "verify-lemma", Format::Table, &table)?;
            if let Some(inst) = &report.violating_instance {
                eprintln!(
                    "violating instance {}: n={} |M|={} joint(M,X^n)={:?}",
                    report.min_index,
                    inst.blocklength(),
                    inst.message_size(),
                    inst.joint_mx().as_slice()
                );
                for (i, (a, b)) in lemma_slacks(inst)?.iter().enumerate() {
                    eprintln!("  i={} slack_a={a:?} slack_b={b:?}", i + 1);
                }
            }
            Ok(if violated { Outcome::VerdictFailure } else { Outcome::Success })
        }

        Command::Interleave { spec, certificate, kind, trials, tol } => {
            let spec = load(spec)?;
            let cert = match (certificate, kind) {
                (Some(name), _) => spec
                    .certificate(name)
                    .ok_or_else(|| anyhow!("no certificate named {name:?}"))?
                    .clone(),
                (None, Some(kind)) => builtin_certificate(&spec.bc, kind.parse::<CertificateKind>()?, *tol)?,
                (None, None) => match spec.certificates.first() {
                    Some((_, c)) => c.clone(),
                    None => bail!("the spec has no certificates; give --kind"),
                },
            };
            let opts = OrderOptions {
                trials: *trials,
                tol: *tol,
                seed,
            };
            let report = verify_certificate(&spec.bc, &cert, &opts)?;
            let mut table = Table::new(["link", "upper", "lower", "status", "witness_gap", "witness"]);
            for (i, link) in report.links.iter().enumerate() {
                let (gap, witness) = witness_cell(&link.verdict);
                table.push(vec![
                    (i + 1).into(),
                    link.upper.clone().into(),
                    link.lower.clone().into(),
                    link.verdict.status.as_str().into(),
                    gap,
                    witness,
                ]);
            }
            table.push(vec![
                "all".into(),
                "".into(),
                "".into(),
                report.status.as_str().into(),
                "".into(),
                "".into(),
            ]);
            emit(cli, "interleave", Format::Table, &table)?;
            Ok(if report.status == InterleaveStatus::Fail {
                Outcome::VerdictFailure
            } else {
                Outcome::Success
            })
        }

        Command::GenExamples => {
            let dir = cli.global.out.clone().unwrap_or_else(|| PathBuf::from("fixtures"));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, spec) in example_specs() {
                let path = dir.join(name);
                std::fs::write(&path, spec.to_json()).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
            Ok(Outcome::Success)
        }
    }
}
