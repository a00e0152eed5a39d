//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use cacc_dsrc_core::coefficients::{CoefficientTable, REPAIRED_ENTRIES};
use cacc_dsrc_core::reception::{evaluate, MAX_COMMUNICATION_DENSITY};
use cacc_dsrc_core::traffic::LanePolicy;
use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use crate::config::{load_coefficients, load_run_config, RunConfig};
use crate::error::{exit, AppError, AppResult};
use crate::output::{num, AtomicCsv, CURVE_COLUMNS};
use crate::runner::{run_matrix, Cell, LogOptions, SweepReport};

#[derive(Debug, Parser)]
#[command(name = "cacc-dsrc", version, about = "Freeway CACC simulation with an analytical DSRC reception model")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured scenario (one strategy, one MPR) for all replications.
    Run(SimArgs),
    /// Run every strategy x MPR combination listed in the config (or on the command line).
    Sweep(SweepArgs),
    /// Write reception probability curves P(x) for a list of communication densities.
    Curves(CurvesArgs),
    /// Print the coefficient table with checksums and run the sanity suite.
    ValidateCoefficients(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario configuration file (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Directory for the summary and logs.
    #[arg(short, long, env = "CACC_OUTPUT_DIR", default_value = "output")]
    pub output_dir: PathBuf,
    /// Override the base seed (replication k uses seed + k).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    pub replications: Option<u32>,
    /// Write one row per reception trial.
    #[arg(long)]
    pub reception_log: bool,
    /// Write one row per fallback state transition.
    #[arg(long)]
    pub fallback_log: bool,
    /// Write every vehicle's state at every step (large).
    #[arg(long)]
    pub trajectory: bool,
    /// Replications run in parallel [default: number of replications].
    #[arg(short, long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Strategies to sweep, comma separated (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// MPR levels to sweep, comma separated fractions (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub mprs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Communication densities (events/s), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub xi: Vec<f64>,
    /// Transmission range (m).
    #[arg(long, default_value_t = 300.0)]
    pub phi: f64,
    /// Largest distance (m).
    #[arg(long, default_value_t = 300.0)]
    pub xmax: f64,
    /// Distance step (m).
    #[arg(long, default_value_t = 1.0)]
    pub dx: f64,
    /// Coefficient file to use instead of the built-in table.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Output file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Coefficient file to validate instead of the built-in table.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Reference file the table must match entry for entry.
    #[arg(long)]
    pub expect: Option<PathBuf>,
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr())
}

/// [`run`] with explicit output streams. Log records still go to stderr.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{e}");
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();

    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> AppResult<u8> {
    match command {
        Command::Run(args) => {
            let run = prepare(&args)?;
            let cells = [Cell {
                policy: run.base.policy(),
                mpr: run.base.mpr(),
            }];
            simulate(&run, &cells, &args, out)
        }
        Command::Sweep(args) => {
            let mut run = prepare(&args.sim)?;
            if let Some(p) = &args.policies {
                run.sweep_policies = p
                    .iter()
                    .map(|n| {
                        LanePolicy::parse(n)
                            .ok_or_else(|| AppError::Config(format!("unknown policy {n:?}")))
                    })
                    .collect::<AppResult<_>>()?;
            }
            if let Some(m) = &args.mprs {
                run.sweep_mprs = m.clone();
            }
            if run.sweep_policies.is_empty() || run.sweep_mprs.is_empty() {
                return Err(AppError::Config("empty sweep".into()));
            }
            run.validate()?;
            let cells: Vec<Cell> = run
                .sweep_policies
                .iter()
                .flat_map(|&policy| run.sweep_mprs.iter().map(move |&mpr| Cell { policy, mpr }))
                .collect();
            simulate(&run, &cells, &args.sim, out)
        }
        Command::Curves(args) => curves(&args, out),
        Command::ValidateCoefficients(args) => validate(&args, out),
    }
}

fn prepare(args: &SimArgs) -> AppResult<RunConfig> {
    let mut run = load_run_config(&args.config)?;
    if let Some(seed) = args.seed {
        run.base.base_seed = seed;
    }
    if let Some(n) = args.replications {
        run.base.replications = n;
    }
    run.validate()?;
    Ok(run)
}

fn simulate(run: &RunConfig, cells: &[Cell], args: &SimArgs, out: &mut dyn Write) -> AppResult<u8> {
    let logs = LogOptions {
        reception: args.reception_log,
        fallback: args.fallback_log,
        trajectory: args.trajectory,
    };
    let jobs = args.jobs.unwrap_or(run.base.replications as usize);
    info!(
        "{} cell(s) x {} replication(s), {jobs} job(s)",
        cells.len(),
        run.base.replications
    );
    let report = run_matrix(run, cells, &args.output_dir, logs, jobs)?;
    print_report(&report, out)?;
    if let Some(first) = report.failures().next() {
        let n = report.failures().count();
        return Err(AppError::Invariant(format!(
            "{n} replication(s) failed, first: {} mpr {} replication {}: {}",
            first.cell.policy,
            first.cell.mpr,
            first.index,
            first.result.as_ref().err().map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    Ok(exit::OK)
}

fn print_report(report: &SweepReport, out: &mut dyn Write) -> AppResult<()> {
    let w = |out: &mut dyn Write, s: String| {
        writeln!(out, "{s}").map_err(|e| AppError::io("<stdout>", e))
    };
    for o in &report.outcomes {
        let line = match &o.result {
            Ok(r) => {
                let m = r.metrics();
                format!(
                    "{} mpr={} rep={} seed={} trials={} reception_rate={} xi_mean={} throughput_vph={:.0}",
                    o.cell.policy,
                    o.cell.mpr,
                    o.index,
                    o.seed,
                    m.trials,
                    m.reception_rate.map_or("n/a".into(), |r| format!("{r:.6}")),
                    m.xi.map_or("n/a".into(), |x| format!("{:.2}", x.mean)),
                    m.throughput_vph
                )
            }
            Err(e) => format!(
                "{} mpr={} rep={} seed={} FAILED: {e}",
                o.cell.policy, o.cell.mpr, o.index, o.seed
            ),
        };
        w(out, line)?;
    }
    w(out, format!("summary: {}", report.summary_path.display()))?;
    for p in &report.log_paths {
        w(out, format!("log: {}", p.display()))?;
    }
    Ok(())
}

fn table_from(path: Option<&Path>) -> AppResult<CoefficientTable> {
    match path {
        Some(p) => load_coefficients(p),
        None => Ok(CoefficientTable::published()),
    }
}

/// Grid `0, dx, 2dx, ...` up to `xmax` inclusive.
pub fn distance_grid(xmax: f64, dx: f64) -> AppResult<Vec<f64>> {
    if !(dx > 0.0 && xmax >= 0.0 && xmax.is_finite()) {
        return Err(AppError::Config(format!("need dx > 0 and xmax >= 0, got {dx} and {xmax}")));
    }
    let n = (xmax / dx + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * dx).collect())
}

fn curves(args: &CurvesArgs, out: &mut dyn Write) -> AppResult<u8> {
    let table = table_from(args.coefficients.as_deref())?;
    if !(args.phi > 0.0) {
        return Err(AppError::Config(format!("phi must be positive, got {}", args.phi)));
    }
    let grid = distance_grid(args.xmax, args.dx)?;
    let mut rows = Vec::with_capacity(args.xi.len() * grid.len());
    for &xi in &args.xi {
        if !(xi >= 0.0) {
            return Err(AppError::Config(format!("xi must be >= 0, got {xi}")));
        }
        for &x in &grid {
            let e = evaluate(&table, x, xi, args.phi)?;
            rows.push([num(xi), num(x), num(e.probability), num(e.raw)]);
        }
    }
    match &args.output {
        Some(path) => {
            let mut f = AtomicCsv::create(path, "curves", &CURVE_COLUMNS)?;
            for r in &rows {
                f.row(r)?;
            }
            f.commit()?;
        }
        None => {
            let io = |e: std::io::Error| AppError::io("<stdout>", e);
            writeln!(out, "{}", crate::output::header_comment("curves")).map_err(io)?;
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(CURVE_COLUMNS).map_err(|e| io(e.into()))?;
            for r in &rows {
                w.write_record(r).map_err(|e| io(e.into()))?;
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(exit::OK)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One line of the sanity suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SanityCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Informational checks are printed but never fail the command.
    pub informational: bool,
    pub detail: String,
}

/// Domain checks on a coefficient table at the default range (300 m).
pub fn sanity_suite(table: &CoefficientTable) -> AppResult<Vec<SanityCheck>> {
    let phi = 300.0;
    let xis: Vec<f64> = (0..=8).map(|i| i as f64 * 500.0).chain([MAX_COMMUNICATION_DENSITY]).collect();
    let grid = distance_grid(phi, 1.0)?;
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for &xi in &xis {
        worst = worst.max((evaluate(table, 0.0, xi, phi)?.probability - 1.0).abs());
    }
    checks.push(SanityCheck {
        name: "zero distance gives probability 1",
        passed: worst <= 1e-12,
        informational: false,
        detail: format!("max |P(0) - 1| = {worst:e}"),
    });

    let mut ok = true;
    for &xi in &xis {
        for &x in &grid {
            let p = evaluate(table, x, xi, phi)?.probability;
            ok &= (0.0..=1.0).contains(&p);
        }
    }
    checks.push(SanityCheck {
        name: "probability within [0, 1]",
        passed: ok,
        informational: false,
        detail: format!("{} points", xis.len() * grid.len()),
    });

    let at150: Vec<f64> = [500.0, 1500.0, 3000.0]
        .iter()
        .map(|&xi| evaluate(table, 150.0, xi, phi).map(|e| e.probability))
        .collect::<Result<_, _>>()?;
    checks.push(SanityCheck {
        name: "denser channel receives less at 150 m",
        passed: at150[0] > at150[1] && at150[1] > at150[2],
        informational: false,
        detail: format!("P(150) for xi 500/1500/3000 = {:.6}/{:.6}/{:.6}", at150[0], at150[1], at150[2]),
    });

    let mut tail_ok = true;
    let mut full_ok = true;
    let mut largest_rise = 0.0f64;
    for &xi in &[500.0, 1500.0, 3000.0] {
        let ps: Vec<f64> = grid
            .iter()
            .map(|&x| evaluate(table, x, xi, phi).map(|e| e.probability))
            .collect::<Result<_, _>>()?;
        for (k, w) in ps.windows(2).enumerate() {
            let rise = w[1] - w[0];
            if rise > 0.0 {
                full_ok = false;
                largest_rise = largest_rise.max(rise);
                if grid[k] >= 45.0 {
                    tail_ok = false;
                }
            }
        }
    }
    checks.push(SanityCheck {
        name: "non-increasing in distance beyond 45 m",
        passed: tail_ok,
        informational: false,
        detail: "xi 500/1500/3000, 1 m steps".into(),
    });
    checks.push(SanityCheck {
        name: "non-increasing in distance over [0, 300] m",
        passed: full_ok,
        informational: true,
        detail: format!("largest rise between neighbouring points {largest_rise:e}"),
    });
    Ok(checks)
}

fn validate(args: &ValidateArgs, out: &mut dyn Write) -> AppResult<u8> {
    let io = |e: std::io::Error| AppError::io("<stdout>", e);
    let table = table_from(args.coefficients.as_deref())?;
    let source = args
        .coefficients
        .as_ref()
        .map_or("built-in".to_owned(), |p| p.display().to_string());
    writeln!(out, "coefficients: {source}").map_err(io)?;
    for c in table.entries() {
        writeln!(
            out,
            "h{}({},{}) = {:e}",
            c.poly, c.density_exp, c.range_exp, c.value
        )
        .map_err(io)?;
    }
    writeln!(out, "sha256(canonical) = {}", sha256_hex(table.to_text().as_bytes())).map_err(io)?;
    if let Some(p) = &args.coefficients {
        let bytes = std::fs::read(p).map_err(|e| AppError::io(p, e))?;
        writeln!(out, "sha256(file) = {}", sha256_hex(&bytes)).map_err(io)?;
    }
    if args.coefficients.is_none() {
        for r in REPAIRED_ENTRIES {
            writeln!(
                out,
                "repaired h{}({},{}): printed {:e}, used {:e}",
                r.poly, r.density_exp, r.range_exp, r.as_printed, r.adopted
            )
            .map_err(io)?;
        }
    }

    let mut failed = Vec::new();
    if let Some(expect) = &args.expect {
        let reference = load_coefficients(expect)?;
        let mut mismatches = 0;
        for (got, want) in table.entries().zip(reference.entries()) {
            if got.value != want.value {
                mismatches += 1;
                writeln!(
                    out,
                    "MISMATCH h{}({},{}): table {:e}, expected {:e}",
                    got.poly, got.density_exp, got.range_exp, got.value, want.value
                )
                .map_err(io)?;
            }
        }
        let verdict = if mismatches == 0 { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} comparison with {}: {mismatches} of 60 differ", expect.display())
            .map_err(io)?;
        if mismatches > 0 {
            failed.push("coefficient comparison".to_owned());
        }
    }

    for c in sanity_suite(&table)? {
        let tag = match (c.passed, c.informational) {
            (true, _) => "PASS",
            (false, true) => "NOTE",
            (false, false) => "FAIL",
        };
        writeln!(out, "{tag} {}: {}", c.name, c.detail).map_err(io)?;
        if !c.passed && !c.informational {
            failed.push(c.name.to_owned());
        }
    }
    if failed.is_empty() {
        Ok(exit::OK)
    } else {
        Err(AppError::CheckFailed(format!("failed: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(distance_grid(300.0, 1.0).unwrap().len(), 301);
        assert_eq!(distance_grid(1.0, 0.1).unwrap().len(), 11);
        assert!(distance_grid(10.0, 0.0).is_err());
    }

    #[test]
    fn builtin_table_passes_hard_checks() {
        let checks = sanity_suite(&CoefficientTable::published()).unwrap();
        assert!(checks.iter().all(|c| c.passed || c.informational));
    }

    #[test]
    fn help_lists_flags() {
        use clap::CommandFactory;
        let mut cmd = Cli::command();
        cmd.build();
        let help = cmd
            .find_subcommand_mut("run")
            .unwrap()
            .render_long_help()
            .to_string();
        for flag in [
            "--config",
            "--output-dir",
            "--seed",
            "--replications",
            "--reception-log",
            "--fallback-log",
            "--trajectory",
            "--jobs",
            "--verbose",
            "CACC_OUTPUT_DIR",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
    }
}
