//! The `optimize`, `sweep` and `validate` verbs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use airfc::config::{load_config, ExperimentConfig};
use airfc::eval::{
    baseline_from_weights, effective_snr_db, evaluate_ota_accuracy, imitation_nmse,
    make_synthetic_task, monte_carlo_sweep, realize_channel, split_seed, train_digital_fc,
    DigitalBaseline, GridPoint, Stat, SweepResult, SyntheticTask, TaskParams, EVAL_SALT,
};
use airfc::io;
use airfc::par::Execution;
use airfc::solver::{run_ao, Termination};
use airfc::system::{realized_map, PowerBudget};
use airfc::Error;

use crate::manifest::{self, RunManifest, MANIFEST_FILE};
use crate::plot::{render_svg, series_from_trials, Metric};

pub const DEFAULT_OUT_DIR: &str = "airfc-out";
pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub no_plots: bool,
}

#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration (exit status 2).
    Config(String),
    /// Anything that fails after the configuration was accepted (exit status 1).
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "invalid config: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub fn load(config_path: &Path, ov: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(w) = ov.workers {
        cfg.workers = w;
    }
    if let Some(out) = &ov.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

pub fn cmd_validate(config_path: &Path) -> Result<(), Failure> {
    let cfg = load(config_path, &Overrides::default())?;
    println!("ok {} (config hash {})", config_path.display(), cfg.hash());
    Ok(())
}

/// The layer being imitated, plus the task it is scored on (absent when the
/// external weights have fewer than two classes).
struct Target {
    baseline: DigitalBaseline,
    task: Option<SyntheticTask>,
    weights_sha256: Option<String>,
    trained: bool,
}

fn prepare_target(cfg: &ExperimentConfig) -> Result<Target, Failure> {
    let n = cfg.system.antennas;
    let Some(path) = &cfg.task.weights_file else {
        let task = make_synthetic_task(cfg.task_params())?;
        let baseline = train_digital_fc(&task)?;
        return Ok(Target {
            baseline,
            task: Some(task),
            weights_sha256: None,
            trained: true,
        });
    };
    let ext = io::load_weights(path)?;
    if ext.weights.nrows() != n {
        return Err(Failure::Runtime(format!(
            "{}: weights are {}x{}, but system.antennas = {n}",
            path.display(),
            ext.weights.nrows(),
            ext.weights.ncols()
        )));
    }
    let sha = Some(manifest::file_sha256(path)?);
    if ext.classes >= 2 {
        let task = make_synthetic_task(TaskParams {
            classes: ext.classes,
            ..cfg.task_params()
        })?;
        let baseline = baseline_from_weights(ext.weights, ext.bias, ext.classes, &task)?;
        Ok(Target {
            baseline,
            task: Some(task),
            weights_sha256: sha,
            trained: false,
        })
    } else {
        let baseline = DigitalBaseline {
            weights: ext.weights,
            bias: ext.bias,
            classes: ext.classes,
            accuracy: f64::NAN,
            regularized: false,
        };
        Ok(Target {
            baseline,
            task: None,
            weights_sha256: sha,
            trained: false,
        })
    }
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
struct OptimizeResult {
    nmse: f64,
    /// Absent when the target has no classification task.
    accuracy: Option<f64>,
    digital_accuracy: Option<f64>,
    effective_snr_db: f64,
    iterations: usize,
    termination: Termination,
    max_violation: f64,
    imitation_error: f64,
    noise_penalty: f64,
    objective: f64,
}

fn finish_manifest(dir: &Path, mut m: RunManifest, outputs: &[String]) -> Result<(), Failure> {
    m.finished_unix = manifest::unix_now();
    m.outputs = manifest::inventory(dir, outputs)?;
    io::write_json(&dir.join(MANIFEST_FILE), &m)?;
    Ok(())
}

/// Optimizes one realization: either the channel file named in the config or
/// the realization a sweep would draw as trial 0 at the `[system]` point.
pub fn cmd_optimize(config_path: &Path, ov: &Overrides) -> Result<(), Failure> {
    let cfg = load(config_path, ov)?;
    let started = manifest::unix_now();
    let target = prepare_target(&cfg)?;
    let dir = output_dir(&cfg)?;
    let scenario = cfg.scenario();
    let point = cfg.base_point();
    let trial_seed = split_seed(cfg.seed, 0);
    let (ch, channel_sha256) = match &cfg.system.channel_file {
        Some(p) => (io::load_channel_set(p)?, Some(manifest::file_sha256(p)?)),
        None => (realize_channel(&point, trial_seed, &scenario)?, None),
    };
    if ch.n_t() != cfg.system.antennas || ch.n_r() != cfg.system.antennas {
        return Err(Failure::Runtime(format!(
            "channel has {}x{} antennas, but system.antennas = {}",
            ch.n_t(),
            ch.n_r(),
            cfg.system.antennas
        )));
    }
    let noise = scenario.noise_model(ch.num_groups());
    let budget = PowerBudget::uniform(cfg.power.tx_max_w, cfg.power.relay_w, &ch.group_sizes());
    let (params, trace) = run_ao(&ch, &target.baseline.weights, &noise, &budget, &cfg.solver)?;
    let obj = trace.final_objective();
    let realized = realized_map(&params, &ch)?;
    let accuracy = match &target.task {
        Some(task) => {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(trial_seed, EVAL_SALT));
            Some(evaluate_ota_accuracy(
                &params,
                &ch,
                &noise,
                &target.baseline,
                task,
                cfg.task.noise_draws,
                cfg.task.tie_break,
                &mut rng,
            )?)
        }
        None => None,
    };
    let result = OptimizeResult {
        nmse: imitation_nmse(&realized, &target.baseline.weights)?,
        accuracy,
        digital_accuracy: target.task.as_ref().map(|_| target.baseline.accuracy),
        effective_snr_db: effective_snr_db(&params, &ch, &noise)?,
        iterations: trace.iterations,
        termination: trace.termination,
        max_violation: *trace.max_violation.last().unwrap_or(&0.0),
        imitation_error: obj.imitation_error,
        noise_penalty: obj.noise_penalty,
        objective: obj.total,
    };

    let mut outputs = vec![
        "params.json".to_string(),
        "trace.csv".into(),
        "objective.json".into(),
        "result.json".into(),
    ];
    io::save_params(&dir.join("params.json"), &params)?;
    io::write_trace_csv(&dir.join("trace.csv"), &trace)?;
    io::write_objective_json(&dir.join("objective.json"), &obj)?;
    io::write_json(&dir.join("result.json"), &result)?;
    if cfg.system.channel_file.is_none() {
        io::save_channel_set(&dir.join("channel.chset.json"), &ch)?;
        outputs.push("channel.chset.json".into());
    }
    if target.trained {
        io::save_weights(&dir.join("weights.wmat.json"), &target.baseline)?;
        outputs.push("weights.wmat.json".into());
    }
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "optimize".into(),
        config_path: config_path.display().to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        base_seed: cfg.seed,
        task_seed: cfg.task.seed,
        trial_seeds: vec![trial_seed],
        weights_sha256: target.weights_sha256,
        channel_sha256,
        started_unix: started,
        finished_unix: 0,
        outputs: vec![],
    };
    finish_manifest(&dir, m, &outputs)?;

    println!(
        "optimize: {} iterations ({:?}), objective {:.6e}, NMSE {:.4e}, max violation {:.2e}",
        result.iterations, result.termination, result.objective, result.nmse, result.max_violation
    );
    if let (Some(a), Some(d)) = (result.accuracy, result.digital_accuracy) {
        println!("accuracy {:.4} (digital {:.4})", a, d);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct PointSummary {
    point: GridPoint,
    realizations: usize,
    failed: usize,
    partial: bool,
    accuracy: Stat,
    nmse: Stat,
    objective: Stat,
    errors: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    config_hash: String,
    digital_accuracy: f64,
    trials: usize,
    failed_points: usize,
    points: Vec<PointSummary>,
}

fn summarize(r: &SweepResult) -> PointSummary {
    PointSummary {
        point: r.point,
        realizations: r.realizations,
        failed: r.failed,
        partial: r.partial,
        accuracy: r.accuracy,
        nmse: r.nmse,
        objective: r.objective,
        errors: r
            .trials
            .iter()
            .filter(|t| !t.ok)
            .map(|t| format!("trial {}: {}", t.trial, t.error))
            .collect(),
    }
}

pub fn cmd_sweep(config_path: &Path, ov: &Overrides) -> Result<(), Failure> {
    let cfg = load(config_path, ov)?;
    let started = manifest::unix_now();
    let target = prepare_target(&cfg)?;
    let Some(task) = &target.task else {
        return Err(Failure::Config(
            "a sweep needs a classification target with at least 2 classes".into(),
        ));
    };
    let dir = output_dir(&cfg)?;
    let grid = cfg.grid();
    let results = monte_carlo_sweep(
        &grid,
        cfg.trials,
        cfg.seed,
        &cfg.scenario(),
        &target.baseline,
        task,
        Execution::with_workers(cfg.workers),
    )?;

    let mut outputs = vec![TRIALS_CSV.to_string(), SUMMARY_JSON.to_string()];
    io::write_trials_csv(&dir.join(TRIALS_CSV), &results)?;
    let points: Vec<PointSummary> = results.iter().map(summarize).collect();
    let failed_points = points.iter().filter(|p| p.realizations == 0).count();
    let summary = SweepSummary {
        config_hash: cfg.hash(),
        digital_accuracy: target.baseline.accuracy,
        trials: cfg.trials,
        failed_points,
        points,
    };
    io::write_json(&dir.join(SUMMARY_JSON), &summary)?;
    if !ov.no_plots {
        let trials: Vec<_> = results
            .iter()
            .flat_map(|r| r.trials.iter().cloned())
            .collect();
        for metric in Metric::ALL {
            let series = series_from_trials(&trials, metric);
            let reference = (metric == Metric::Accuracy)
                .then_some(("digital baseline", target.baseline.accuracy));
            let title = format!("{} vs relays per group", metric.name());
            let name = format!("{}.svg", metric.name());
            fs::write(
                dir.join(&name),
                render_svg(&title, metric, &series, reference),
            )?;
            outputs.push(name);
        }
    }
    if target.trained {
        io::save_weights(&dir.join("weights.wmat.json"), &target.baseline)?;
        outputs.push("weights.wmat.json".into());
    }
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "sweep".into(),
        config_path: config_path.display().to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        base_seed: cfg.seed,
        task_seed: cfg.task.seed,
        trial_seeds: (0..cfg.trials as u64)
            .map(|t| split_seed(cfg.seed, t))
            .collect(),
        weights_sha256: target.weights_sha256.clone(),
        channel_sha256: None,
        started_unix: started,
        finished_unix: 0,
        outputs: vec![],
    };
    finish_manifest(&dir, m, &outputs)?;

    println!("digital baseline accuracy {:.4}", target.baseline.accuracy);
    println!(
        "{:>3} {:>5} {:>9} {:>8} {:>6} {:>10} {:>9} {:>4}",
        "L", "K", "P_relay", "D", "direct", "accuracy", "std", "ok"
    );
    for r in &results {
        let p = &r.point;
        println!(
            "{:>3} {:>5} {:>9} {:>8} {:>6} {:>10.4} {:>9.4} {:>4}",
            p.groups,
            p.relays_per_group,
            p.relay_power_w,
            p.area_length_m,
            p.direct_link,
            r.accuracy.mean,
            r.accuracy.std,
            r.realizations
        );
    }
    println!("wrote {}", dir.display());
    if failed_points == grid.len() {
        return Err(Failure::Runtime(
            "every grid point failed; see summary.json".into(),
        ));
    }
    Ok(())
}
