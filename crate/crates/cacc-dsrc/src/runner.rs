//! Runs sweep cells and replications, writes logs and the summary.

use std::path::{Path, PathBuf};

use cacc_dsrc_core::scenario::{run_replication, ReplicationResult, ScenarioConfig};
use cacc_dsrc_core::stats::{aggregate, Metrics};
use cacc_dsrc_core::traffic::{LanePolicy, StepObserver, TransitionRecord, TrialRecord, World};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::output::{
    num, opt_num, AtomicCsv, FALLBACK_COLUMNS, RECEPTION_COLUMNS, SUMMARY_COLUMNS,
    TRAJECTORY_COLUMNS,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LogOptions {
    pub reception: bool,
    pub fallback: bool,
    pub trajectory: bool,
}

/// One (strategy, MPR) cell of the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub policy: LanePolicy,
    pub mpr: f64,
}

impl Cell {
    fn tag(&self) -> String {
        format!("{}_mpr{:.2}", self.policy, self.mpr)
    }
}

#[derive(Debug)]
pub struct ReplicationOutcome {
    pub cell: Cell,
    pub index: u32,
    pub seed: u64,
    pub result: Result<ReplicationResult, AppError>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub outcomes: Vec<ReplicationOutcome>,
    pub summary_path: PathBuf,
    pub log_paths: Vec<PathBuf>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &ReplicationOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }
}

/// Writes trial, transition and trajectory rows as the simulation runs.
struct FileLogger {
    reception: Option<AtomicCsv>,
    fallback: Option<AtomicCsv>,
    trajectory: Option<AtomicCsv>,
    error: Option<AppError>,
}

impl FileLogger {
    fn keep(&mut self, r: AppResult<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    fn commit(self, paths: &mut Vec<PathBuf>) -> AppResult<()> {
        if let Some(e) = self.error {
            return Err(e);
        }
        for f in [self.reception, self.fallback, self.trajectory].into_iter().flatten() {
            paths.push(f.commit()?);
        }
        Ok(())
    }
}

impl StepObserver for FileLogger {
    fn on_trial(&mut self, r: &TrialRecord) {
        if let Some(w) = self.reception.as_mut() {
            let res = w.row([
                num(r.time_s),
                r.vehicle_id.to_string(),
                num(r.x_m),
                num(r.delta_veh_per_km),
                num(r.xi_events),
                num(r.probability),
                r.attempts_used.to_string(),
                u8::from(r.success).to_string(),
                u8::from(r.platooned).to_string(),
            ]);
            self.keep(res);
        }
    }

    fn on_transition(&mut self, r: &TransitionRecord) {
        if let Some(w) = self.fallback.as_mut() {
            let res = w.row([
                num(r.time_s),
                r.vehicle_id.to_string(),
                r.from.to_string(),
                r.event.map_or("NONE".to_owned(), |e| e.to_string()),
                r.to.to_string(),
            ]);
            self.keep(res);
        }
    }

    fn on_step_end(&mut self, world: &World) {
        if let Some(w) = self.trajectory.as_mut() {
            let t = num(world.time_s());
            let mut res = Ok(());
            for v in world.vehicles() {
                res = w.row([
                    t.clone(),
                    v.id.to_string(),
                    v.lane.to_string(),
                    num(v.position_m),
                    num(v.speed),
                    v.control.to_string(),
                ]);
                if res.is_err() {
                    break;
                }
            }
            self.keep(res);
        }
    }
}

fn run_logged(
    config: &ScenarioConfig,
    cell: Cell,
    index: u32,
    out_dir: &Path,
    logs: LogOptions,
) -> AppResult<(ReplicationResult, Vec<PathBuf>)> {
    let path = |kind: &str| out_dir.join(format!("{kind}_{}_rep{index}.csv", cell.tag()));
    let open = |on: bool, kind: &str, cols: &[&str]| -> AppResult<Option<AtomicCsv>> {
        on.then(|| AtomicCsv::create(&path(kind), kind, cols)).transpose()
    };
    let mut logger = FileLogger {
        reception: open(logs.reception, "reception", &RECEPTION_COLUMNS)?,
        fallback: open(logs.fallback, "fallback", &FALLBACK_COLUMNS)?,
        trajectory: open(logs.trajectory, "trajectory", &TRAJECTORY_COLUMNS)?,
        error: None,
    };
    let seed = config.seed_for(index);
    let result = run_replication(config, seed, &mut logger)?;
    let mut paths = Vec::new();
    logger.commit(&mut paths)?;
    Ok((result, paths))
}

fn summary_row(cell: Cell, replication: &str, m: &Metrics) -> Vec<String> {
    let xi = m.xi;
    vec![
        cell.policy.to_string(),
        num(cell.mpr),
        replication.to_owned(),
        m.trials.to_string(),
        m.successes.to_string(),
        opt_num(m.reception_rate),
        opt_num(xi.map(|s| s.mean)),
        opt_num(xi.map(|s| s.median)),
        opt_num(xi.map(|s| s.variance)),
        opt_num(xi.map(|s| s.q1)),
        opt_num(xi.map(|s| s.q3)),
        opt_num(xi.map(|s| s.min)),
        opt_num(xi.map(|s| s.max)),
        m.fallbacks.packet_drop.to_string(),
        m.fallbacks.infeasible.to_string(),
        num(m.throughput_vph),
    ]
}

/// Runs every replication of every cell, `jobs` at a time, and writes
/// `summary.csv` plus the requested logs into `out_dir`.
///
/// Replications that breach an invariant are reported and left out of the
/// summary; the others still complete. Rows are ordered by strategy, MPR
/// and replication whatever order the jobs finish in.
pub fn run_matrix(
    run: &RunConfig,
    cells: &[Cell],
    out_dir: &Path,
    logs: LogOptions,
    jobs: usize,
) -> AppResult<SweepReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let reps = run.base.replications;
    let tasks: Vec<(Cell, u32)> = cells
        .iter()
        .flat_map(|&c| (0..reps).map(move |i| (c, i)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    let results: Vec<(ReplicationOutcome, Vec<PathBuf>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, index)| {
                let config = run.cell(cell.policy, cell.mpr);
                let seed = config.seed_for(index);
                info!("{} replication {index} (seed {seed}) started", cell.tag());
                let (result, paths) = match run_logged(&config, cell, index, out_dir, logs) {
                    Ok((r, p)) => (Ok(r), p),
                    Err(e) => (Err(e), Vec::new()),
                };
                if let Err(e) = &result {
                    warn!("{} replication {index} failed: {e}", cell.tag());
                }
                (
                    ReplicationOutcome {
                        cell,
                        index,
                        seed,
                        result,
                    },
                    paths,
                )
            })
            .collect()
    });

    // I/O failures abort the run; invariant breaches only drop the replication.
    let mut outcomes = Vec::with_capacity(results.len());
    let mut log_paths = Vec::new();
    for (o, p) in results {
        match o.result {
            Err(e @ AppError::Io { .. }) => return Err(e),
            _ => outcomes.push(o),
        }
        log_paths.extend(p);
    }

    let summary_path = out_dir.join("summary.csv");
    let mut summary = AtomicCsv::create(&summary_path, "summary", &SUMMARY_COLUMNS)?;
    for &cell in cells {
        let ok: Vec<(u32, &ReplicationResult)> = outcomes
            .iter()
            .filter(|o| o.cell == cell)
            .filter_map(|o| o.result.as_ref().ok().map(|r| (o.index, r)))
            .collect();
        for (index, r) in &ok {
            summary.row(summary_row(cell, &index.to_string(), &r.metrics()))?;
        }
        if !ok.is_empty() {
            let obs: Vec<_> = ok.iter().map(|(_, r)| r.observations.clone()).collect();
            summary.row(summary_row(cell, "pooled", &aggregate(&obs)?))?;
        }
    }
    summary.commit()?;

    Ok(SweepReport {
        outcomes,
        summary_path,
        log_paths,
    })
}
