//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! line whatever happens to the others; exits non-zero if any hard
//! criterion fails. Report-only criteria never fail the run.

use std::path::{Path, PathBuf};
use std::ffi::OsString;
use std::time::{Duration, Instant};

use cacc_dsrc_core::channel::{
    attempt_reception, reception_trial, BroadcastRoster, ChannelModel, Receiver,
};
use cacc_dsrc_core::coefficients::{CoefficientTable, REPAIRED_ENTRIES};
use cacc_dsrc_core::control::{fallback_step, ControlMode, ControllerParams, FallbackEvent};
use cacc_dsrc_core::reception::{reception_probability, DsrcParams, ReceptionDiagnostics};
use cacc_dsrc_core::scenario::{run_replication, ReplicationResult, ScenarioConfig};
use cacc_dsrc_core::traffic::{LanePolicy, RoadNetwork};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const ZERO_DISTANCE_TOL: f64 = 1e-12;
const MC_SIGMAS: f64 = 3.0;
const MC_SINGLE_N: u64 = 100_000;
const MC_FIVE_N: u64 = 1_000_000;
const DESK_RATE_FLOOR: f64 = 0.85;
const DESK_TIME_LIMIT: Duration = Duration::from_secs(300);

/// Full-horizon replications collected for the safety check.
type Runs = Vec<(String, ReplicationResult)>;
type Check = Box<dyn FnOnce(&mut Runs) -> Outcome>;

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Report,
}

struct Outcome {
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn judged(name: &'static str, ok: bool, detail: String) -> Outcome {
    Outcome {
        name,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../cacc-dsrc/tests/data")
        .join(file)
}

/// Runs the command-line front end in-process; returns the exit code and stdout.
fn cli<I: IntoIterator<Item = OsString>>(args: I) -> (u8, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once(OsString::from("cacc-dsrc")).chain(args);
    let code = cacc_dsrc::cli::run_with(argv, &mut out, &mut err);
    if code != 0 {
        eprint!("{}", String::from_utf8_lossy(&err));
    }
    (code, String::from_utf8_lossy(&out).into_owned())
}

fn os(parts: &[&dyn AsRef<std::ffi::OsStr>]) -> Vec<OsString> {
    parts.iter().map(|p| p.as_ref().to_owned()).collect()
}

fn zero_distance() -> Outcome {
    let table = CoefficientTable::published();
    let mut worst = 0.0f64;
    let xis: Vec<f64> = (0..=8).map(|i| i as f64 * 500.0).chain([4400.0]).collect();
    for &xi in &xis {
        let p = reception_probability(&table, 0.0, xi, 300.0).unwrap();
        worst = worst.max((p - 1.0).abs());
    }
    judged(
        "zero-distance exactness",
        worst <= ZERO_DISTANCE_TOL,
        format!("max |P(0, xi, 300) - 1| = {worst:e} over xi = 0, 500, ..., 4000, 4400"),
    )
}

fn coefficient_fidelity() -> Outcome {
    let oracle_path = data("coefficients_oracle.txt");
    let oracle = CoefficientTable::parse(&std::fs::read_to_string(&oracle_path).unwrap()).unwrap();
    let printed =
        CoefficientTable::parse(&std::fs::read_to_string(data("coefficients_as_printed.txt")).unwrap())
            .unwrap();
    let table = CoefficientTable::published();

    let mismatches = table
        .entries()
        .zip(oracle.entries())
        .filter(|(a, b)| a.value != b.value)
        .count();

    // The oracle departs from the printed table at the repaired entries only.
    let repaired: Vec<(u8, u8, u8)> = oracle
        .entries()
        .zip(printed.entries())
        .filter(|(a, b)| a.value != b.value)
        .map(|(a, _)| (a.poly, a.density_exp, a.range_exp))
        .collect();
    let expected: Vec<(u8, u8, u8)> = REPAIRED_ENTRIES
        .iter()
        .map(|r| (r.poly, r.density_exp, r.range_exp))
        .collect();

    let (code, stdout) = cli(os(&[&"validate-coefficients", &"--expect", &oracle_path]));
    let cli_ok = code == 0 && stdout.contains("PASS comparison") && {
        stdout.lines().filter(|l| l.starts_with('h')).count() == 60
    };

    judged(
        "coefficient-table fidelity",
        mismatches == 0 && repaired == expected && cli_ok,
        format!(
            "{mismatches} of 60 differ from the hand-transcribed oracle; entries repaired vs printed: {repaired:?}; \
             validate-coefficients exit {code}"
        ),
    )
}

fn curve_shape() -> Outcome {
    let table = CoefficientTable::published();
    let xis = [500.0, 1500.0, 3000.0];
    let mut rises = Vec::new();
    for &xi in &xis {
        let mut prev = f64::INFINITY;
        let mut worst: Option<(f64, f64)> = None;
        for i in 0..=300 {
            let x = i as f64;
            let p = reception_probability(&table, x, xi, 300.0).unwrap();
            if p > prev && worst.is_none_or(|(_, r)| p - prev > r) {
                worst = Some((x, p - prev));
            }
            prev = p;
        }
        if let Some((x, r)) = worst {
            rises.push(format!("xi {xi}: rise {r:.2e} at x = {x} m"));
        }
    }
    let at150: Vec<f64> = xis
        .iter()
        .map(|&xi| reception_probability(&table, 150.0, xi, 300.0).unwrap())
        .collect();
    let ordered = at150[0] > at150[1] && at150[1] > at150[2];
    judged(
        "curve family shape (non-increasing in x on [0, 300], ordered by xi at 150 m)",
        rises.is_empty() && ordered,
        format!(
            "ordering at 150 m {}: {:.6} > {:.6} > {:.6}; monotonicity {}",
            if ordered { "holds" } else { "broken" },
            at150[0],
            at150[1],
            at150[2],
            if rises.is_empty() {
                "holds".to_owned()
            } else {
                format!("broken ({})", rises.join("; "))
            }
        ),
    )
}

fn monte_carlo() -> Outcome {
    let table = CoefficientTable::published();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, &(x, xi)) in [(100.0, 500.0), (200.0, 1500.0), (250.0, 3000.0)].iter().enumerate() {
        let p = reception_probability(&table, x, xi, 300.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let hits = (0..MC_SINGLE_N)
            .filter(|_| attempt_reception(p, &mut rng).unwrap())
            .count() as f64;
        let freq = hits / MC_SINGLE_N as f64;
        let sigma = (p * (1.0 - p) / MC_SINGLE_N as f64).sqrt();
        let z = (freq - p) / sigma;
        ok &= z.abs() <= MC_SIGMAS;
        parts.push(format!("P({x}, {xi}) = {p:.5}, observed {freq:.5}, z = {z:+.2}"));
    }

    let q = 0.07f64.powi(5);
    let model = ChannelModel::Constant(0.93);
    let roster = BroadcastRoster::new();
    let params = DsrcParams::default();
    let mut diag = ReceptionDiagnostics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    let receiver = Receiver {
        id: None,
        position_m: 0.0,
    };
    let mut failures = 0u64;
    for _ in 0..MC_FIVE_N {
        let o = reception_trial(50.0, receiver, &roster, &model, &params, &mut rng, &mut diag).unwrap();
        failures += u64::from(!o.success);
    }
    let freq = failures as f64 / MC_FIVE_N as f64;
    let sigma = (q * (1.0 - q) / MC_FIVE_N as f64).sqrt();
    let z = (freq - q) / sigma;
    ok &= z.abs() <= MC_SIGMAS;
    parts.push(format!(
        "five-attempt failure at p = 0.93: expected {q:.4e}, observed {freq:.4e} ({failures} of {MC_FIVE_N}), z = {z:+.2}"
    ));
    judged("Monte Carlo convergence", ok, parts.join("; "))
}

fn state_machine() -> Outcome {
    use ControlMode::*;
    use FallbackEvent::*;
    let params = ControllerParams::default();
    let enough = params.rejoin_threshold;
    // (mode, event, consecutive successes, expected)
    let table: Vec<(ControlMode, Option<FallbackEvent>, u32, ControlMode)> = vec![
        (Human, None, 0, Human),
        (Human, None, enough, Human),
        (Human, Some(PacketDrop), 0, Human),
        (Human, Some(InfeasibleSolution), 0, Human),
        (Human, Some(OddExit), 0, Human),
        (Human, Some(AdsFailure), 0, Human),
        (AccFallback, None, 0, AccFallback),
        (AccFallback, None, enough - 1, AccFallback),
        (AccFallback, None, enough, CaccPlatooned),
        (AccFallback, Some(PacketDrop), enough, AccFallback),
        (AccFallback, Some(InfeasibleSolution), enough, AccFallback),
        (AccFallback, Some(OddExit), 0, Human),
        (AccFallback, Some(AdsFailure), 0, Human),
        (CaccPlatooned, None, 0, CaccPlatooned),
        (CaccPlatooned, None, enough, CaccPlatooned),
        (CaccPlatooned, Some(PacketDrop), 0, AccFallback),
        (CaccPlatooned, Some(InfeasibleSolution), 0, AccFallback),
        (CaccPlatooned, Some(OddExit), 0, Human),
        (CaccPlatooned, Some(AdsFailure), 0, Human),
    ];
    let mut covered = std::collections::BTreeSet::new();
    let mut wrong = Vec::new();
    for &(m, e, n, want) in &table {
        covered.insert((m.as_str(), e.map_or("NONE", |e| e.as_str())));
        let got = fallback_step(m, e, n, &params);
        if got != want {
            wrong.push(format!("{m} + {e:?} (n = {n}) gave {got}, expected {want}"));
        }
    }
    judged(
        "fallback state machine transition table",
        wrong.is_empty() && covered.len() == 15,
        format!(
            "{} transitions asserted covering {} of 15 (mode, event) pairs; {}",
            table.len(),
            covered.len(),
            if wrong.is_empty() {
                "all match".to_owned()
            } else {
                wrong.join("; ")
            }
        ),
    )
}

fn desk_config(policy: LanePolicy) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        network: RoadNetwork::freeway(policy),
        ..ScenarioConfig::default()
    };
    c.demand.mpr = 0.4;
    c.demand.volume_vph = 6000.0;
    c.replications = 1;
    c
}

fn desk_scale(runs: &mut Runs) -> Outcome {
    let config = desk_config(LanePolicy::Dl);
    assert_eq!((config.horizon_s, config.warmup_s, config.dt), (3900.0, 300.0, 0.5));
    let start = Instant::now();
    let result = run_replication(&config, config.seed_for(0), &mut ());
    let elapsed = start.elapsed();
    let r = match result {
        Ok(r) => r,
        Err(e) => return judged("desk-scale DL scenario", false, format!("replication failed: {e}")),
    };
    let m = r.metrics();
    let rate = m.reception_rate.unwrap_or(f64::NAN);
    runs.push(("DL desk-scale".into(), r));
    let ok = elapsed <= DESK_TIME_LIMIT && (DESK_RATE_FLOOR..=1.0).contains(&rate);
    judged(
        "desk-scale DL scenario (40% MPR, 6000 vph, 3900 s, 1 replication)",
        ok,
        format!(
            "{:.1} s wall time; reception rate {rate:.6} over {} trials ({} the 0.9 claim, {} the 0.93 claim)",
            elapsed.as_secs_f64(),
            m.trials,
            if rate > 0.9 { "above" } else { "below" },
            if rate > 0.93 { "above" } else { "below" },
        ),
    )
}

fn qualitative(runs: &mut Runs) -> Outcome {
    let mut stats = Vec::new();
    for policy in [LanePolicy::Uml, LanePolicy::Mml, LanePolicy::Dl, LanePolicy::Dla] {
        let config = desk_config(policy);
        match run_replication(&config, config.seed_for(0), &mut ()) {
            Ok(r) => {
                let xi = r.metrics().xi;
                stats.push((policy, xi.map(|s| (s.mean, s.median, s.variance))));
                runs.push((format!("{policy} qualitative"), r));
            }
            Err(e) => {
                eprintln!("{policy} replication failed: {e}");
                stats.push((policy, None));
            }
        }
    }
    let get = |p: LanePolicy| stats.iter().find(|s| s.0 == p).and_then(|s| s.1);
    let mut findings = Vec::new();
    if let (Some(dl), Some(dla)) = (get(LanePolicy::Dl), get(LanePolicy::Dla)) {
        findings.push(format!(
            "DL mean xi {:.2} {} DLA mean xi {:.2}",
            dl.0,
            if dl.0 >= dla.0 { ">=" } else { "<" },
            dla.0
        ));
    }
    let min_var = stats
        .iter()
        .filter_map(|s| s.1.map(|v| (s.0, v.2)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((p, _)) = min_var {
        findings.push(format!(
            "lowest xi variance: {p} ({})",
            if p == LanePolicy::Dla { "as expected" } else { "finding: expected DLA" }
        ));
    }
    let table: Vec<String> = stats
        .iter()
        .map(|(p, s)| match s {
            Some((mean, median, var)) => format!("{p} mean {mean:.2} median {median:.2} var {var:.2}"),
            None => format!("{p} n/a"),
        })
        .collect();
    Outcome {
        name: "qualitative strategy ordering at 40% MPR",
        verdict: Verdict::Report,
        detail: format!("{}; {}", findings.join("; "), table.join(" | ")),
    }
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("cell.toml");
    std::fs::write(
        &config,
        "[scenario]\npolicy = \"DL\"\nmpr = 0.4\nreplications = 1\nbase_seed = 17\n\n\
         [sweep]\npolicies = [\"DL\"]\nmprs = [0.4]\n",
    )
    .unwrap();
    let mut snapshots = Vec::new();
    for run in ["a", "b"] {
        let out = work.path().join(run);
        let (code, _) = cli(os(&[
            &"sweep",
            &"--reception-log",
            &"--fallback-log",
            &"--config",
            &config,
            &"--output-dir",
            &out,
        ]));
        if code != 0 {
            return judged("determinism", false, format!("sweep run {run} exited {code}"));
        }
        snapshots.push(dir_snapshot(&out));
    }
    // Trajectory dump on a shorter horizon: full-length dumps are hundreds of MB.
    let short = work.path().join("short.toml");
    std::fs::write(
        &short,
        "[scenario]\npolicy = \"DLA\"\nmpr = 0.4\nreplications = 1\nhorizon_s = 600\nwarmup_s = 100\n",
    )
    .unwrap();
    for run in ["c", "d"] {
        let out = work.path().join(run);
        let (code, _) = cli(os(&[
            &"run",
            &"--trajectory",
            &"--fallback-log",
            &"--config",
            &short,
            &"--output-dir",
            &out,
        ]));
        if code != 0 {
            return judged("determinism", false, format!("run {run} exited {code}"));
        }
        snapshots.push(dir_snapshot(&out));
    }
    let same_full = snapshots[0] == snapshots[1];
    let same_short = snapshots[2] == snapshots[3];
    let files = snapshots[0].len() + snapshots[2].len();
    let bytes: usize = snapshots[0]
        .iter()
        .chain(&snapshots[2])
        .map(|f| f.1.len())
        .sum();
    judged(
        "determinism (byte-identical summary and logs)",
        same_full && same_short && files >= 6,
        format!("{files} files, {bytes} bytes compared per run pair; full-horizon sweep cell identical: {same_full}; trajectory run identical: {same_short}"),
    )
}

fn safety(runs: &[(String, ReplicationResult)]) -> Outcome {
    let mut bad = Vec::new();
    let mut clamps = 0;
    for (name, r) in runs {
        if !r.conserved() {
            bad.push(format!("{name}: {:?}, on network {}, queued {}", r.counters, r.on_network, r.queued));
        }
        clamps += r.counters.emergency_brakes;
    }
    // Every replication above completed, so the per-step gap check never fired.
    judged(
        "safety and conservation",
        bad.is_empty() && !runs.is_empty(),
        format!(
            "{} full-horizon replications, no invariant breach (positive gaps checked every step), \
             arrivals = spawned + queued and spawned = retired + on network in each; {clamps} emergency kinematic clamps{}",
            runs.len(),
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join("; ")) }
        ),
    )
}

fn main() {
    let mut runs = Vec::new();
    let checks: Vec<Check> = vec![
        Box::new(|_| zero_distance()),
        Box::new(|_| coefficient_fidelity()),
        Box::new(|_| curve_shape()),
        Box::new(|_| monte_carlo()),
        Box::new(|_| state_machine()),
        Box::new(desk_scale),
        Box::new(qualitative),
        Box::new(|_| determinism()),
    ];
    let mut outcomes = Vec::new();
    for check in checks {
        let o = check(&mut runs);
        print_line(&o);
        outcomes.push(o);
    }
    let o = safety(&runs);
    print_line(&o);
    outcomes.push(o);

    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.verdict == Verdict::Fail)
        .map(|o| o.name)
        .collect();
    let passed = outcomes.iter().filter(|o| o.verdict == Verdict::Pass).count();
    println!(
        "acceptance: {passed} passed, {} failed, {} report-only",
        failed.len(),
        outcomes.iter().filter(|o| o.verdict == Verdict::Report).count()
    );
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}

fn print_line(o: &Outcome) {
    let tag = match o.verdict {
        Verdict::Pass => "PASS  ",
        Verdict::Fail => "FAIL  ",
        Verdict::Report => "REPORT",
    };
    println!("{tag} {}: {}", o.name, o.detail);
}
