//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use lessnoisy_cli::specfile::parse_channel_file;
use lessnoisy_core::channel::{binary_entropy, compose};
use lessnoisy_core::interleave::{builtin_certificate, verify_certificate, CertificateKind, InterleaveStatus};
use lessnoisy_core::lemma::{lemma_slacks, stress_instance, stress_test, StressOptions};
use lessnoisy_core::ordering::{is_degraded, less_noisy_test, order_chain, OrderOptions, OrderStatus};
use lessnoisy_core::region::{brute_force_region, maximize_weighted_sum, two_receiver_region, weight_sweep, OptimizeOptions};
use lessnoisy_core::rng::derive_seed;
use lessnoisy_core::sim::{run_trials, stage_informations, Engine, SimConfig};
use lessnoisy_core::{AuxiliaryJoint, BroadcastChannel, ChannelMatrix};

type Criterion = (&'static str, fn() -> Check);

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn unit(seed: u64, i: u64) -> f64 {
    (derive_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64
}

/// Random channel with every entry bounded away from zero.
fn random_channel(seed: u64, rows: usize, cols: usize) -> ChannelMatrix {
    let rows = (0..rows)
        .map(|r| {
            let raw: Vec<f64> = (0..cols).map(|c| 0.02 + unit(seed, (r * cols + c) as u64)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    ChannelMatrix::new(rows).unwrap()
}

/// Binary-input cascade `W1`, `W1 M1`, `W1 M1 M2`.
fn random_cascade(seed: u64, outputs: [usize; 3]) -> BroadcastChannel {
    let w1 = random_channel(derive_seed(seed, 0), 2, outputs[0]);
    let w2 = compose(&w1, &random_channel(derive_seed(seed, 1), outputs[0], outputs[1])).unwrap();
    let w3 = compose(&w2, &random_channel(derive_seed(seed, 2), outputs[1], outputs[2])).unwrap();
    BroadcastChannel::new(vec![w1, w2, w3]).unwrap()
}

fn cascade() -> BroadcastChannel {
    BroadcastChannel::bsc_cascade(&[0.1, 0.2, 0.3])
}

fn ordering() -> Check {
    let start = Instant::now();
    let (w1, w2) = (ChannelMatrix::bsc(0.1), ChannelMatrix::bsc(0.2));
    let Some(m) = is_degraded(&w1, &w2, 1e-9).unwrap() else {
        return check(false, "no degrading channel found");
    };
    let residual = compose(&w1, &m).unwrap().max_abs_diff(&w2);
    let from_closed_form = m.max_abs_diff(&ChannelMatrix::bsc(0.125));
    let reversed = less_noisy_test(&w2, &w1, &OrderOptions::default()).unwrap();
    let gap = reversed.witness.as_ref().map_or(f64::NAN, |w| w.gap);
    let closed_gap = binary_entropy(0.2) - binary_entropy(0.1);
    let elapsed = start.elapsed();
    check(
        residual <= 1e-9
            && from_closed_form <= 1e-6
            && reversed.status == OrderStatus::NotLessNoisy
            && gap >= 0.25
            && (gap - closed_gap).abs() < 1e-9
            && elapsed < Duration::from_secs(5),
        format!(
            "residual {residual:.1e}, |M - BSC(1/8)| {from_closed_form:.1e}, reversed {} gap {gap:.5} (closed form {closed_gap:.5}), {elapsed:.2?}",
            reversed.status.as_str()
        ),
    )
}

fn corner_points() -> Check {
    let start = Instant::now();
    let bc = cascade();
    let mut worst = 0.0f64;
    let mut found = Vec::new();
    for l in 0..3 {
        let mut w = vec![0.0; 3];
        w[l] = 1.0;
        let (r, _) = maximize_weighted_sum(&bc, &w, &OptimizeOptions::default()).unwrap();
        let mut expect = [0.0; 3];
        expect[l] = 1.0 - binary_entropy([0.1, 0.2, 0.3][l]);
        for (got, want) in r.0.iter().zip(expect) {
            worst = worst.max((got - want).abs());
        }
        found.push(format!("{:.5}", r.0[l]));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-3 && elapsed < Duration::from_secs(120),
        format!("corners [{}], max deviation {worst:.1e}, {elapsed:.2?}", found.join(", ")),
    )
}

fn optimizer_vs_brute_force() -> Check {
    let start = Instant::now();
    let opts = OptimizeOptions {
        caps: Some(vec![2, 2]),
        ..OptimizeOptions::default()
    };
    let w = [1.0, 1.0, 1.0];
    let mut worst = 0.0f64;
    for i in 0..10 {
        let bc = random_cascade(derive_seed(3, i), [3, 3, 2]);
        let (r, _) = maximize_weighted_sum(&bc, &w, &opts).unwrap();
        let brute = brute_force_region(&bc, &w, 0.05, &[2, 2]).unwrap();
        worst = worst.max((r.weighted_sum(&w) - brute.weighted_sum(&w)).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-2 && elapsed < Duration::from_secs(600),
        format!("10 cascades, max |optimizer - grid| {worst:.2e}, {elapsed:.2?}"),
    )
}

fn two_receiver_consistency() -> Check {
    let pairs = [
        (ChannelMatrix::bsc(0.1), ChannelMatrix::bsc(0.2)),
        {
            let w1 = ChannelMatrix::new(vec![vec![0.95, 0.05], vec![0.2, 0.8]]).unwrap();
            let m = ChannelMatrix::new(vec![vec![0.9, 0.1], vec![0.15, 0.85]]).unwrap();
            let w2 = compose(&w1, &m).unwrap();
            (w1, w2)
        },
    ];
    let opts = OptimizeOptions::default();
    let mut worst = 0.0f64;
    for (w1, w2) in pairs {
        let three = BroadcastChannel::new(vec![w1.clone(), w2.clone(), w2.clone()]).unwrap();
        let two = BroadcastChannel::new(vec![w1, w2]).unwrap();
        for w in weight_sweep(2, 5) {
            let (r2, _) = two_receiver_region(&two, &w, &opts).unwrap();
            let (r3, _) = maximize_weighted_sum(&three, &[w[0], w[1], 0.0], &opts).unwrap();
            worst = worst.max((r2.weighted_sum(&w) - (w[0] * r3.0[0] + w[1] * r3.0[1])).abs());
        }
    }
    check(worst <= 1e-3, format!("2 channels x 5 directions, max deviation {worst:.1e}"))
}

fn lemma_on_degraded_pair() -> Check {
    let start = Instant::now();
    let (ws, wt) = (ChannelMatrix::bsc(0.1), ChannelMatrix::bsc(0.2));
    let opts = StressOptions {
        count: 1000,
        seed: 0,
        blocklengths: vec![2],
        message_sizes: vec![2],
        ..StressOptions::default()
    };
    let report = stress_test(&ws, &wt, &opts).unwrap();
    let first_exact = (0..opts.count).all(|i| {
        let inst = stress_instance(&ws, &wt, &opts, i).unwrap();
        lemma_slacks(&inst).unwrap()[0] == (0.0, 0.0)
    });
    let elapsed = start.elapsed();
    check(
        report.instances == 1000 && report.min_slack >= -1e-9 && first_exact && elapsed < Duration::from_secs(60),
        format!(
            "{} instances, min slack {:.3e}, first-letter slacks exactly zero: {first_exact}, {elapsed:.2?}",
            report.instances, report.min_slack
        ),
    )
}

fn cardinality_spot_check() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut tested = 0;
    let mut seed = 0;
    while tested < 20 {
        seed += 1;
        let bc = random_cascade(derive_seed(6, seed), [3, 3, 2]);
        let verdicts = order_chain(&bc, &OrderOptions::default()).unwrap();
        if verdicts.iter().any(|v| v.status == OrderStatus::NotLessNoisy) {
            continue;
        }
        tested += 1;
        let w: Vec<f64> = (0..3).map(|j| 0.1 + unit(derive_seed(60, seed), j)).collect();
        let value = |caps: Vec<usize>| {
            let opts = OptimizeOptions {
                caps: Some(caps),
                ..OptimizeOptions::default()
            };
            maximize_weighted_sum(&bc, &w, &opts).unwrap().0.weighted_sum(&w)
        };
        worst = worst.max((value(vec![3, 9]) - value(vec![4, 12])).abs());
    }
    check(
        worst <= 1e-3,
        format!("20 triples, max |caps (3,9) - caps (4,12)| {worst:.1e}, {:.2?}", start.elapsed()),
    )
}

fn sim_config(n: usize, rates: [f64; 3], aux: &AuxiliaryJoint) -> SimConfig {
    let mut c = SimConfig::new(n, rates, aux.clone(), cascade()).unwrap();
    c.trials = 500;
    c.seed = 0;
    c.engine = Engine::Ensemble;
    c
}

fn boundary_aux(weights: &[f64]) -> (Vec<f64>, AuxiliaryJoint) {
    let opts = OptimizeOptions {
        caps: Some(vec![2, 2]),
        ..OptimizeOptions::default()
    };
    let (r, aux) = maximize_weighted_sum(&cascade(), weights, &opts).unwrap();
    (r.0, aux)
}

fn simulation() -> Check {
    let start = Instant::now();
    let (point, aux) = boundary_aux(&[0.0, 1.0, 0.0]);
    let rates = [0, 1, 2].map(|l| (0.85 * point[l]).max(0.0));
    let p: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| run_trials(&sim_config(n, rates, &aux)).unwrap().p_e())
        .collect();
    let decreasing = p[0] > p[1] && p[1] > p[2];

    let mut zero = sim_config(64, [0.0; 3], &aux);
    zero.engine = Engine::Explicit;
    let p_zero = run_trials(&zero).unwrap().p_e();

    let (_, aux3) = boundary_aux(&[0.0, 0.0, 1.0]);
    let i3 = stage_informations(&sim_config(256, [0.0; 3], &aux3)).unwrap()[2][0];
    let over = run_trials(&sim_config(256, [0.0, 0.0, 1.1 * i3], &aux3)).unwrap().receiver_fraction(3);

    let elapsed = start.elapsed();
    check(
        decreasing && p_zero == 0.0 && over >= 0.5 && elapsed < Duration::from_secs(900),
        format!(
            "P_e at n=64,128,256: {:.3}, {:.3}, {:.3}; rates 0: {p_zero}; R3 = 1.1 I(U;Y3): {over:.3}, {elapsed:.2?}",
            p[0], p[1], p[2]
        ),
    )
}

fn interleavability() -> Check {
    let opts = OrderOptions::default();
    let cascade = parse_channel_file(&fixture("bsc_cascade.json")).unwrap();
    let cert = builtin_certificate(&cascade.bc, CertificateKind::Degraded, 1e-9).unwrap();
    let degraded = verify_certificate(&cascade.bc, &cert, &opts).unwrap().status;

    let three = parse_channel_file(&fixture("three_receiver.json")).unwrap();
    let cert = builtin_certificate(&three.bc, CertificateKind::ThreeReceiver, 1e-9).unwrap();
    let three_status = verify_certificate(&three.bc, &cert, &opts).unwrap().status;

    let negative = parse_channel_file(&fixture("constant_v1.json")).unwrap();
    let report = verify_certificate(&negative.bc, negative.certificate("constant_v1").unwrap(), &opts).unwrap();
    let link = &report.links[1];
    let fails = report.status == InterleaveStatus::Fail
        && (link.upper.as_str(), link.lower.as_str()) == ("V1", "Y2")
        && link.verdict.status == OrderStatus::NotLessNoisy;

    check(
        degraded == InterleaveStatus::Certified && three_status != InterleaveStatus::Fail && fails,
        format!(
            "degraded {}, three_receiver {}, constant V1 link {}>={} {}",
            degraded.as_str(),
            three_status.as_str(),
            link.upper,
            link.lower,
            link.verdict.status.as_str()
        ),
    )
}

fn determinism() -> Check {
    let cascade = fixture("bsc_cascade.json");
    let three = fixture("three_receiver.json");
    let (cascade, three) = (cascade.to_str().unwrap(), three.to_str().unwrap());
    let commands: Vec<Vec<&str>> = vec![
        vec!["check-order", three, "--trials", "2000"],
        vec!["region", cascade, "--directions", "6", "--restarts", "8"],
        vec!["two-region", three, "--pair", "2,3", "--restarts", "8"],
        vec!["simulate", cascade, "--rates", "0.1,0.05,0.05", "--aux", "layered", "--n", "24", "--trials", "200"],
        vec!["simulate", cascade, "--weights", "0,1,0", "--caps", "2,2", "--restarts", "8", "--n", "128", "--engine", "ensemble", "--trials", "200"],
        vec!["verify-lemma", three, "--pair", "2,3", "--count", "300"],
        vec!["interleave", three, "--kind", "three_receiver", "--trials", "2000"],
    ];
    let mut mismatched = Vec::new();
    for args in &commands {
        let run = |threads: &str| {
            let out = Command::new(env!("CARGO_BIN_EXE_lessnoisy"))
                .args(args)
                .args(["--seed", "11", "--no-header", "--format", "csv", "--threads", threads])
                .output()
                .unwrap();
            (out.status.code(), out.stdout)
        };
        let reference = run("1");
        let same = reference.0.is_some_and(|c| c < 2)
            && !reference.1.is_empty()
            && ["1", "2", "4"].iter().all(|t| run(t) == reference);
        if !same {
            mismatched.push(args[0]);
        }
    }
    check(
        mismatched.is_empty(),
        format!("{} command lines, runs at --threads 1, 1, 2, 4; mismatches: {mismatched:?}", commands.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ordering", ordering),
        ("corner points", corner_points),
        ("optimizer vs brute force", optimizer_vs_brute_force),
        ("two-receiver consistency", two_receiver_consistency),
        ("lemma on degraded pair", lemma_on_degraded_pair),
        ("cardinality spot check", cardinality_spot_check),
        ("simulation", simulation),
        ("interleavability", interleavability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let c = f();
        if !c.pass {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if c.pass { "PASS" } else { "FAIL" }, i + 1, c.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
