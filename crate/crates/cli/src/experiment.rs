use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use isl_core::distributions::NoiseSpec;
use isl_core::training::{
    train_isl_1d, train_isl_marginal, train_isl_sliced, train_pareto_isl, Method, TrainConfig, TrainReport, TrainRun,
};
use isl_core::RandomSource;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EvalCounts, ExperimentConfig, Metric};
use crate::error::CliError;
use crate::evaluate::evaluate;

pub const SUMMARY_HEADER: &str =
    "seed,target,method,K,m,epochs,ksd,mae,mse,n_mc,accdf,n_modes,pct_hq,kl,js_marginal,final_loss";
const METRIC_COLUMNS: [&str; 10] = [
    "ksd",
    "mae",
    "mse",
    "n_mc",
    "accdf",
    "n_modes",
    "pct_hq",
    "kl",
    "js_marginal",
    "final_loss",
];

/// Everything one seed produces.
#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub report: TrainReport,
    /// The noise law the generator was trained with (GPD after Pareto setup).
    pub noise: NoiseSpec,
    pub checkpoint: Vec<u8>,
    pub summary_row: String,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    seed: u64,
    method: Method,
    train: &'a TrainConfig,
    pareto_xi: Option<f64>,
    noise_used: &'a NoiseSpec,
    eval: &'a EvalCounts,
    metrics_selected: Vec<Metric>,
    report: &'a TrainReport,
}

/// 17 significant digits, so every value round-trips.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn projections_column(cfg: &ExperimentConfig) -> String {
    match cfg.method {
        Method::IslSliced => match &cfg.train.fixed_directions {
            Some(d) => d.len().to_string(),
            None => cfg.train.projections.to_string(),
        },
        Method::IslMarginal => cfg.train.target.dim().to_string(),
        Method::Isl1d | Method::ParetoIsl => String::new(),
    }
}

pub fn summary_row(cfg: &ExperimentConfig, seed: u64, report: &TrainReport) -> String {
    let mut row = format!(
        "{seed},{},{},{},{},{}",
        cfg.train.target.name(),
        report.method.name(),
        report.final_k,
        projections_column(cfg),
        report.epochs.len()
    );
    for col in METRIC_COLUMNS {
        row.push(',');
        if let Some(v) = report.metrics.get(col) {
            if col == "n_mc" || col == "n_modes" {
                write!(row, "{}", *v as u64).expect("write to String");
            } else {
                row.push_str(&format_float(*v));
            }
        }
    }
    row
}

fn train(config: TrainConfig, method: Method, xi: Option<f64>) -> isl_core::Result<TrainRun> {
    match method {
        Method::Isl1d => train_isl_1d(config),
        Method::ParetoIsl => train_pareto_isl(config, xi),
        Method::IslSliced => train_isl_sliced(config),
        Method::IslMarginal => train_isl_marginal(config),
    }
}

/// Trains and evaluates one seed without touching the file system.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome, CliError> {
    let config = cfg.train_config_for(seed);
    let TrainRun { mut report, generator } = train(config.clone(), cfg.method, cfg.pareto_xi)?;
    let root = RandomSource::new(seed).substream("eval");
    let mut metrics: BTreeMap<String, f64> =
        evaluate(&generator, &config.target, &cfg.selected_metrics(), &cfg.eval, &root)?;
    if let Some(last) = report.epochs.last() {
        metrics.insert("final_loss".into(), last.loss);
    }
    report.metrics = metrics;
    report.checkpoint = Some(checkpoint_name(seed));
    if !cfg.record_timings {
        report.clear_timings();
    }
    let mut checkpoint = Vec::new();
    generator.save(&mut checkpoint)?;
    let summary_row = summary_row(cfg, seed, &report);
    Ok(SeedOutcome {
        seed,
        report,
        noise: generator.noise,
        checkpoint,
        summary_row,
    })
}

pub fn checkpoint_name(seed: u64) -> String {
    format!("checkpoint_{seed}.bin")
}

pub fn report_name(seed: u64) -> String {
    format!("report_{seed}.json")
}

pub fn report_json(cfg: &ExperimentConfig, outcome: &SeedOutcome) -> String {
    let file = ReportFile {
        seed: outcome.seed,
        method: cfg.method,
        train: &cfg.train_config_for(outcome.seed),
        pareto_xi: cfg.pareto_xi,
        noise_used: &outcome.noise,
        eval: &cfg.eval,
        metrics_selected: cfg.selected_metrics(),
        report: &outcome.report,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

/// Worker count from `ISL_THREADS`; all cores when unset.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("ISL_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(
                Some("ISL_THREADS".into()),
                format!("ISL_THREADS must be a positive integer, got {v:?}"),
            )),
        },
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path.display(), e))
}

/// Runs every seed (in parallel up to `threads`) and writes the artifacts.
/// Files are written in seed-list order after all seeds finish, so the output
/// does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<SeedOutcome>, CliError> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(Some("ISL_THREADS".into()), e.to_string()))?;
    let outcomes: Vec<SeedOutcome> =
        pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_, _>>())?;
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for o in &outcomes {
        write_file(&dir.join(report_name(o.seed)), report_json(cfg, o).as_bytes())?;
        write_file(&dir.join(checkpoint_name(o.seed)), &o.checkpoint)?;
        summary.push_str(&o.summary_row);
        summary.push('\n');
    }
    write_file(&dir.join("summary.csv"), summary.as_bytes())?;
    Ok(outcomes)
}
