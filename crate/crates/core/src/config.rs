//! Experiment configuration files (TOML).
//!
//! A file may start with `defaults = "table1"` to fill every physical
//! parameter from the reference simulation table (N = 49, L = 5, K = 12,
//! D = 200 m, 28 GHz, -174 dBm/Hz over 300 MHz, BS/Rx at 5 m, relays at
//! 1.5 m, kappa = 0 dB, P_k = 1 W, P_max = N, BS-Rx link blocked). Without
//! the preset every field marked required below must be present.
//!
//! ```toml
//! defaults = "table1"
//! seed = 7
//! trials = 20
//!
//! [system]
//! antennas = 8            # required without preset
//! groups = 2              # required without preset
//! relays_per_group = 8    # required without preset
//! area_length_m = 200.0   # required without preset
//! carrier_hz = 28e9       # required without preset
//! noise_psd_dbm_hz = -174.0
//! bandwidth_hz = 300e6
//! bs_height_m = 5.0
//! rx_height_m = 5.0
//! relay_height_m = 1.5
//! rician_kappa = 1.0      # linear, >= 0, may be inf
//! direct_link = false
//! # relay_noise_w = [1e-12]   overrides the thermal value, one entry per group
//! # receiver_noise_w = 1e-12
//!
//! [power]
//! tx_max_w = 8.0          # defaults to N
//! relay_w = 1.0           # required without preset
//!
//! [solver]                # every field optional
//! max_iters = 300
//!
//! [task]
//! classes = 4
//! samples = 2000
//! spread = 0.5
//! seed = 1
//! noise_draws = 1
//! # weights_file = "layer.wmat.json"
//!
//! [sweep]                 # each list defaults to the single [system] value
//! groups = [1, 2, 3]
//! relays_per_group = [4, 8, 16]
//!
//! [pathloss.models.umi-street-canyon]   # optional model overrides
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{
    thermal_noise_watts, Heights, LinkSet, LosState, PathlossModel, PathlossTable, MAX_TOTAL_RELAYS,
};
use crate::error::{Error, Result};
use crate::eval::{GridPoint, Scenario, TaskParams, TieBreak};
use crate::solver::AoConfig;

pub const TABLE1: &str = "table1";

// ---------------------------------------------------------------------------
// File schema: everything optional, resolved against the preset.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    defaults: Option<String>,
    seed: Option<u64>,
    trials: Option<usize>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    power: RawPower,
    #[serde(default)]
    solver: AoConfig,
    #[serde(default)]
    task: RawTask,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    pathloss: RawPathloss,
    #[serde(default)]
    links: RawLinks,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    antennas: Option<usize>,
    groups: Option<usize>,
    relays_per_group: Option<usize>,
    area_length_m: Option<f64>,
    carrier_hz: Option<f64>,
    noise_psd_dbm_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    bs_height_m: Option<f64>,
    rx_height_m: Option<f64>,
    relay_height_m: Option<f64>,
    rician_kappa: Option<f64>,
    direct_link: Option<bool>,
    relay_noise_w: Option<Vec<f64>>,
    receiver_noise_w: Option<f64>,
    channel_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    tx_max_w: Option<f64>,
    relay_w: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    classes: Option<usize>,
    samples: Option<usize>,
    spread: Option<f64>,
    seed: Option<u64>,
    noise_draws: Option<usize>,
    tie_break: Option<TieBreak>,
    weights_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    groups: Option<Vec<usize>>,
    relays_per_group: Option<Vec<usize>>,
    relay_power_w: Option<Vec<f64>>,
    area_length_m: Option<Vec<f64>>,
    direct_link: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPathloss {
    #[serde(default)]
    models: BTreeMap<String, PathlossModel>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinks {
    bs_relay_model: Option<String>,
    relay_relay_model: Option<String>,
    relay_rx_model: Option<String>,
    bs_rx_model: Option<String>,
    bs_relay_los: Option<LosState>,
    relay_relay_los: Option<LosState>,
    relay_rx_los: Option<LosState>,
    bs_rx_los: Option<LosState>,
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub antennas: usize,
    pub groups: usize,
    pub relays_per_group: usize,
    pub area_length_m: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub heights: Heights,
    pub rician_kappa: f64,
    pub direct_link: bool,
    /// Per-group relay noise variance; the last entry covers deeper groups.
    pub relay_noise_w: Vec<f64>,
    pub receiver_noise_w: f64,
    /// Load the channel realization for `optimize` from this `.chset.json`.
    pub channel_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub tx_max_w: f64,
    pub relay_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub classes: usize,
    pub samples: usize,
    pub spread: f64,
    pub seed: u64,
    pub noise_draws: usize,
    pub tie_break: TieBreak,
    pub weights_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub groups: Vec<usize>,
    pub relays_per_group: Vec<usize>,
    pub relay_power_w: Vec<f64>,
    pub area_length_m: Vec<f64>,
    pub direct_link: Vec<bool>,
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub power: PowerConfig,
    pub solver: AoConfig,
    pub task: TaskConfig,
    pub sweep: SweepConfig,
    pub links: LinkSet,
    pub pathloss: PathlossTable,
    pub seed: u64,
    pub trials: usize,
    /// Not part of the experiment identity.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    /// Not part of the experiment identity.
    #[serde(skip)]
    pub workers: usize,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required field `{field}`")))
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be a finite value > 0, got {v}"),
        ))
    }
}

fn check_nonneg(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be a finite value >= 0, got {v}"),
        ))
    }
}

fn check_count(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(field, "must be >= 1"))
    }
}

/// Parses and validates a configuration document. Relative file paths are
/// kept as written; see [`load_config`] for resolution against the file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    resolve(raw)
}

/// Reads a configuration file; relative paths inside it are taken relative
/// to the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(f) = p.as_mut() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
    };
    rebase(&mut cfg.system.channel_file);
    rebase(&mut cfg.task.weights_file);
    rebase(&mut cfg.output_dir);
    Ok(cfg)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let preset = match raw.defaults.as_deref() {
        None => false,
        Some(TABLE1) => true,
        Some(other) => {
            return Err(invalid(
                "defaults",
                format!("unknown preset {other:?}, expected \"table1\""),
            ))
        }
    };
    let s = raw.system;
    let pick = |v: Option<f64>, table: f64, field: &str| -> Result<f64> {
        match v {
            Some(x) => Ok(x),
            None if preset => Ok(table),
            None => required(None, field),
        }
    };
    let pick_n = |v: Option<usize>, table: usize, field: &str| -> Result<usize> {
        match v {
            Some(x) => Ok(x),
            None if preset => Ok(table),
            None => required(None, field),
        }
    };
    let antennas = pick_n(s.antennas, 49, "system.antennas")?;
    let groups = pick_n(s.groups, 5, "system.groups")?;
    let relays_per_group = pick_n(s.relays_per_group, 12, "system.relays_per_group")?;
    let area_length_m = pick(s.area_length_m, 200.0, "system.area_length_m")?;
    let carrier_hz = pick(s.carrier_hz, 28e9, "system.carrier_hz")?;
    let noise_psd_dbm_hz = s.noise_psd_dbm_hz.unwrap_or(-174.0);
    let bandwidth_hz = pick(s.bandwidth_hz, 300e6, "system.bandwidth_hz")?;
    let heights = Heights {
        bs: s.bs_height_m.unwrap_or(5.0),
        rx: s.rx_height_m.unwrap_or(5.0),
        relay: s.relay_height_m.unwrap_or(1.5),
    };
    let rician_kappa = pick(s.rician_kappa, 1.0, "system.rician_kappa")?;

    check_count("system.antennas", antennas)?;
    check_count("system.groups", groups)?;
    check_count("system.relays_per_group", relays_per_group)?;
    check_positive("system.area_length_m", area_length_m)?;
    check_positive("system.carrier_hz", carrier_hz)?;
    check_positive("system.bandwidth_hz", bandwidth_hz)?;
    if !noise_psd_dbm_hz.is_finite() {
        return Err(invalid("system.noise_psd_dbm_hz", "must be finite"));
    }
    check_positive("system.bs_height_m", heights.bs)?;
    check_positive("system.rx_height_m", heights.rx)?;
    check_positive("system.relay_height_m", heights.relay)?;
    if !(rician_kappa >= 0.0) {
        return Err(invalid(
            "system.rician_kappa",
            format!("must be >= 0 (linear), got {rician_kappa}"),
        ));
    }

    let thermal = thermal_noise_watts(noise_psd_dbm_hz, bandwidth_hz);
    let relay_noise_w = s.relay_noise_w.unwrap_or_else(|| vec![thermal]);
    if relay_noise_w.is_empty() {
        return Err(invalid("system.relay_noise_w", "must not be empty"));
    }
    for v in &relay_noise_w {
        check_nonneg("system.relay_noise_w", *v)?;
    }
    let receiver_noise_w = s.receiver_noise_w.unwrap_or(thermal);
    check_nonneg("system.receiver_noise_w", receiver_noise_w)?;

    let system = SystemConfig {
        antennas,
        groups,
        relays_per_group,
        area_length_m,
        carrier_hz,
        noise_psd_dbm_hz,
        bandwidth_hz,
        heights,
        rician_kappa,
        direct_link: s.direct_link.unwrap_or(false),
        relay_noise_w,
        receiver_noise_w,
        channel_file: s.channel_file,
    };

    let power = PowerConfig {
        tx_max_w: raw.power.tx_max_w.unwrap_or(antennas as f64),
        relay_w: pick(raw.power.relay_w, 1.0, "power.relay_w")?,
    };
    check_positive("power.tx_max_w", power.tx_max_w)?;
    check_positive("power.relay_w", power.relay_w)?;

    raw.solver.validate().map_err(|e| invalid("solver", e))?;

    let t = raw.task;
    let task = TaskConfig {
        classes: t.classes.unwrap_or(antennas.min(4)),
        samples: t.samples.unwrap_or(2000),
        spread: t.spread.unwrap_or(0.5),
        seed: t.seed.unwrap_or(1),
        noise_draws: t.noise_draws.unwrap_or(1),
        tie_break: t.tie_break.unwrap_or_default(),
        weights_file: t.weights_file,
    };
    // with external weights the class count comes from the weights file
    if task.weights_file.is_none() && (task.classes < 2 || task.classes > antennas) {
        return Err(invalid(
            "task.classes",
            format!("must be in 2..={antennas}, got {}", task.classes),
        ));
    }
    if task.samples < antennas {
        return Err(invalid(
            "task.samples",
            format!("must be >= antennas ({antennas}), got {}", task.samples),
        ));
    }
    check_positive("task.spread", task.spread)?;
    check_count("task.noise_draws", task.noise_draws)?;

    let w = raw.sweep;
    let sweep = SweepConfig {
        groups: w.groups.unwrap_or_else(|| vec![system.groups]),
        relays_per_group: w
            .relays_per_group
            .unwrap_or_else(|| vec![system.relays_per_group]),
        relay_power_w: w.relay_power_w.unwrap_or_else(|| vec![power.relay_w]),
        area_length_m: w
            .area_length_m
            .unwrap_or_else(|| vec![system.area_length_m]),
        direct_link: w.direct_link.unwrap_or_else(|| vec![system.direct_link]),
    };
    let nonempty = |field: &str, n: usize| {
        if n == 0 {
            Err(invalid(field, "must not be empty"))
        } else {
            Ok(())
        }
    };
    nonempty("sweep.groups", sweep.groups.len())?;
    nonempty("sweep.relays_per_group", sweep.relays_per_group.len())?;
    nonempty("sweep.relay_power_w", sweep.relay_power_w.len())?;
    nonempty("sweep.area_length_m", sweep.area_length_m.len())?;
    nonempty("sweep.direct_link", sweep.direct_link.len())?;
    for &g in &sweep.groups {
        check_count("sweep.groups", g)?;
    }
    for &k in &sweep.relays_per_group {
        check_count("sweep.relays_per_group", k)?;
    }
    for &p in &sweep.relay_power_w {
        check_positive("sweep.relay_power_w", p)?;
    }
    for &d in &sweep.area_length_m {
        check_positive("sweep.area_length_m", d)?;
    }
    let max_relays = |g: usize, k: usize| g.saturating_mul(k);
    let worst = sweep
        .groups
        .iter()
        .flat_map(|&g| {
            sweep
                .relays_per_group
                .iter()
                .map(move |&k| max_relays(g, k))
        })
        .chain(std::iter::once(max_relays(
            system.groups,
            system.relays_per_group,
        )))
        .max()
        .unwrap_or(0);
    if worst > MAX_TOTAL_RELAYS {
        return Err(invalid(
            "sweep",
            format!("{worst} relays exceed the limit of {MAX_TOTAL_RELAYS}"),
        ));
    }

    let mut pathloss = PathlossTable::default();
    for (id, model) in raw.pathloss.models {
        pathloss.0.insert(id, model);
    }
    let mut links = LinkSet::standard(heights, rician_kappa);
    let l = raw.links;
    for (slot, model, los) in [
        (&mut links.bs_relay, l.bs_relay_model, l.bs_relay_los),
        (
            &mut links.relay_relay,
            l.relay_relay_model,
            l.relay_relay_los,
        ),
        (&mut links.relay_rx, l.relay_rx_model, l.relay_rx_los),
        (&mut links.bs_rx, l.bs_rx_model, l.bs_rx_los),
    ] {
        if let Some(m) = model {
            slot.pathloss_model = m;
        }
        if let Some(s) = los {
            slot.los_state = s;
        }
    }
    for (name, link) in [
        ("links.bs_relay_model", &links.bs_relay),
        ("links.relay_relay_model", &links.relay_relay),
        ("links.relay_rx_model", &links.relay_rx),
        ("links.bs_rx_model", &links.bs_rx),
    ] {
        pathloss
            .model(&link.pathloss_model)
            .map_err(|e| invalid(name, e))?;
    }

    let trials = raw.trials.unwrap_or(20);
    check_count("trials", trials)?;

    Ok(ExperimentConfig {
        system,
        power,
        solver: raw.solver,
        task,
        sweep,
        links,
        pathloss,
        seed: raw.seed.unwrap_or(0),
        trials,
        output_dir: raw.output_dir,
        workers: raw.workers.unwrap_or(0),
    })
}

impl ExperimentConfig {
    /// SHA-256 (hex) of the canonical JSON form of the resolved experiment.
    /// Output directory and worker count do not enter the hash.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canon);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Grid points in row-major order over
    /// `(groups, relays_per_group, relay_power_w, area_length_m, direct_link)`.
    pub fn grid(&self) -> Vec<GridPoint> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for &groups in &s.groups {
            for &relays_per_group in &s.relays_per_group {
                for &relay_power_w in &s.relay_power_w {
                    for &area_length_m in &s.area_length_m {
                        for &direct_link in &s.direct_link {
                            out.push(GridPoint {
                                groups,
                                relays_per_group,
                                relay_power_w,
                                area_length_m,
                                direct_link,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// The single point described by `[system]` and `[power]`.
    pub fn base_point(&self) -> GridPoint {
        GridPoint {
            groups: self.system.groups,
            relays_per_group: self.system.relays_per_group,
            relay_power_w: self.power.relay_w,
            area_length_m: self.system.area_length_m,
            direct_link: self.system.direct_link,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            antennas: self.system.antennas,
            carrier_hz: self.system.carrier_hz,
            heights: self.system.heights,
            links: self.links.clone(),
            pathloss: self.pathloss.clone(),
            relay_noise_w: self.system.relay_noise_w.clone(),
            receiver_noise_w: self.system.receiver_noise_w,
            tx_max_w: self.power.tx_max_w,
            ao: self.solver.clone(),
            noise_draws: self.task.noise_draws,
            tie_break: self.task.tie_break,
        }
    }

    pub fn task_params(&self) -> TaskParams {
        TaskParams {
            features: self.system.antennas,
            classes: self.task.classes,
            samples: self.task.samples,
            spread: self.task.spread,
            seed: self.task.seed,
        }
    }
}
