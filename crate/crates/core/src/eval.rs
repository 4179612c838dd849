//! Imitation metrics, a synthetic classification task, and Monte-Carlo sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_channel_set, generate_topology, ChannelSet, Heights, LinkSet, PathlossTable,
};
use crate::error::{shape_err, Error, Result};
use crate::linalg::{
    c, cn01, frob_sq, hermitian_inv_sqrt, solve_hermitian_guarded, trace_re, CMat, CVec, C64,
};
use crate::par::{map_ordered, Execution};
use crate::solver::{run_ao, AoConfig, Termination};
use crate::system::{
    noise_covariance, realized_map, simulate_forward, AirFcParams, NoiseModel, PowerBudget,
};

/// `||realized - W||_F^2 / ||W||_F^2`.
pub fn imitation_nmse(realized: &CMat, target: &CMat) -> Result<f64> {
    if realized.shape() != target.shape() {
        return Err(shape_err(format!(
            "realized {:?} vs target {:?}",
            realized.shape(),
            target.shape()
        )));
    }
    let denom = frob_sq(target);
    if denom == 0.0 {
        return Err(Error::UndefinedMetric(
            "NMSE against an all-zero target".into(),
        ));
    }
    Ok(frob_sq(&(realized - target)) / denom)
}

/// Output signal-to-noise ratio in dB: `||F2 H_eff F1||_F^2 / tr(F2 R_n^in F2^H)`.
pub fn effective_snr_db(params: &AirFcParams, ch: &ChannelSet, noise: &NoiseModel) -> Result<f64> {
    let signal = frob_sq(&realized_map(params, ch)?);
    let r = noise_covariance(ch, &params.gains, noise)?;
    let f2 = &params.combiner;
    let noise_power = trace_re(&(f2 * r * f2.adjoint()));
    Ok(10.0 * (signal / noise_power).log10())
}

// ---------------------------------------------------------------------------
// Synthetic task and digital baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    pub features: usize,
    pub classes: usize,
    /// Samples in each of the train and test splits.
    pub samples: usize,
    /// Per-coordinate standard deviation of the intra-class spread, relative
    /// to class means of unit average norm.
    pub spread: f64,
    pub seed: u64,
}

/// Complex Gaussian-mixture classification data, whitened so that
/// `E[x x^H] = I` on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub params: TaskParams,
    pub class_means: Vec<CVec>,
    /// Whitening transform applied to both splits.
    pub whitening: CMat,
    pub train_x: Vec<CVec>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<CVec>,
    pub test_y: Vec<usize>,
}

pub fn make_synthetic_task(params: TaskParams) -> Result<SyntheticTask> {
    let TaskParams {
        features: n,
        classes,
        samples,
        spread,
        seed,
    } = params;
    if classes < 2 || n < classes {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= classes <= features, got C={classes}, N={n}"
        )));
    }
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spread must be > 0, got {spread}"
        )));
    }
    if samples < n {
        return Err(Error::InvalidArgument(format!(
            "need at least {n} samples per split, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_scale = c(1.0 / (n as f64).sqrt(), 0.0);
    let class_means: Vec<CVec> = (0..classes)
        .map(|_| CVec::from_fn(n, |_, _| cn01(&mut rng)) * mean_scale)
        .collect();

    let draw = |rng: &mut ChaCha8Rng| -> (Vec<CVec>, Vec<usize>) {
        let mut labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
        labels.shuffle(rng);
        let xs = labels
            .iter()
            .map(|&y| &class_means[y] + CVec::from_fn(n, |_, _| cn01(rng)) * c(spread, 0.0))
            .collect();
        (xs, labels)
    };
    let (raw_train, train_y) = draw(&mut rng);
    let (raw_test, test_y) = draw(&mut rng);

    let mut second_moment = CMat::zeros(n, n);
    for x in &raw_train {
        second_moment += x * x.adjoint();
    }
    second_moment /= c(samples as f64, 0.0);
    let whitening = hermitian_inv_sqrt(&second_moment)
        .ok_or_else(|| Error::InvalidArgument("degenerate feature covariance".into()))?;
    let train_x = raw_train.iter().map(|x| &whitening * x).collect();
    let test_x = raw_test.iter().map(|x| &whitening * x).collect();
    Ok(SyntheticTask {
        params,
        class_means,
        whitening,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

impl SyntheticTask {
    pub fn features(&self) -> usize {
        self.params.features
    }

    pub fn classes(&self) -> usize {
        self.params.classes
    }

    /// The same task with class `k` renamed to `perm[k]`.
    pub fn relabeled(&self, perm: &[usize]) -> SyntheticTask {
        let mut t = self.clone();
        t.train_y
            .iter_mut()
            .chain(t.test_y.iter_mut())
            .for_each(|y| *y = perm[*y]);
        let mut means = t.class_means.clone();
        for (k, m) in self.class_means.iter().enumerate() {
            means[perm[k]] = m.clone();
        }
        t.class_means = means;
        t
    }
}

/// Digital FC layer `y = W x + b` whose first `classes` outputs are the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBaseline {
    pub weights: CMat,
    pub bias: CVec,
    pub classes: usize,
    /// Test-split accuracy of the digital layer.
    pub accuracy: f64,
    /// The ridge had to be increased to solve the normal equations.
    pub regularized: bool,
}

/// Ridge weight relative to the sample count.
pub const DIGITAL_RIDGE: f64 = 1e-3;

/// Closed-form ridge regression of one-hot targets (in the first `C` of `N`
/// outputs) on the training split, with an unpenalized bias.
pub fn train_digital_fc(task: &SyntheticTask) -> Result<DigitalBaseline> {
    let n = task.features();
    let classes = task.classes();
    let m = task.train_x.len();
    // augmented design z = [x; 1]
    let mut gram = CMat::zeros(n + 1, n + 1);
    let mut cross = CMat::zeros(n + 1, n);
    for (x, &y) in task.train_x.iter().zip(&task.train_y) {
        let z = CVec::from_fn(n + 1, |i, _| if i < n { x[i] } else { c(1.0, 0.0) });
        gram += &z * z.adjoint();
        // Z T^H with real one-hot targets: column y sums the z of class y
        for i in 0..=n {
            cross[(i, y)] += z[i];
        }
    }
    for i in 0..n {
        gram[(i, i)] += c(DIGITAL_RIDGE * m as f64, 0.0);
    }
    // Theta^H = (Z Z^H + ridge)^{-1} Z T^H
    let sol = solve_hermitian_guarded(&gram, &cross, 1e14, 1e-10);
    let theta = sol.x.adjoint(); // N x (N + 1)
    let weights = theta.columns(0, n).into_owned();
    let bias = theta.column(n).into_owned();
    let mut base = DigitalBaseline {
        weights,
        bias,
        classes,
        accuracy: 0.0,
        regularized: sol.regularized,
    };
    base.accuracy = digital_accuracy(&base, task);
    Ok(base)
}

/// Wraps externally supplied weights as a baseline, scoring them on the
/// task's test split.
pub fn baseline_from_weights(
    weights: CMat,
    bias: CVec,
    classes: usize,
    task: &SyntheticTask,
) -> Result<DigitalBaseline> {
    let n = task.features();
    if weights.shape() != (n, n) || bias.len() != n {
        return Err(shape_err(format!(
            "weights {:?} / bias {} do not match {n} task features",
            weights.shape(),
            bias.len()
        )));
    }
    if classes != task.classes() {
        return Err(Error::InvalidArgument(format!(
            "weights have {classes} classes, task has {}",
            task.classes()
        )));
    }
    let mut base = DigitalBaseline {
        weights,
        bias,
        classes,
        accuracy: 0.0,
        regularized: false,
    };
    base.accuracy = digital_accuracy(&base, task);
    Ok(base)
}

fn digital_accuracy(base: &DigitalBaseline, task: &SyntheticTask) -> f64 {
    let correct = task
        .test_x
        .iter()
        .zip(&task.test_y)
        .filter(|(x, &y)| {
            decide(
                &(&base.weights * *x + &base.bias),
                base.classes,
                TieBreak::LowestIndex,
                &mut NoRng,
            ) == y
        })
        .count();
    correct as f64 / task.test_x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    Uniform,
}

/// Placeholder RNG for decisions that never consult randomness.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0);
    }
}

/// Class decision: argmax of the real part over the first `classes` logits.
pub fn decide<R: Rng + ?Sized>(logits: &CVec, classes: usize, tie: TieBreak, rng: &mut R) -> usize {
    let scores = logits.iter().take(classes).map(|z| z.re);
    let best = scores.clone().fold(f64::NEG_INFINITY, f64::max);
    match tie {
        TieBreak::LowestIndex => scores.clone().position(|s| s == best).unwrap_or(0),
        TieBreak::Uniform => {
            let winners: Vec<usize> = scores
                .enumerate()
                .filter(|(_, s)| *s == best)
                .map(|(i, _)| i)
                .collect();
            if winners.len() <= 1 {
                winners.first().copied().unwrap_or(0)
            } else {
                winners[rng.random_range(0..winners.len())]
            }
        }
    }
}

/// `e^{-j arg tr(W^H M)}`: undoes a global phase offset of the realized map.
pub fn derotation(realized: &CMat, target: &CMat) -> C64 {
    let t: C64 = target
        .iter()
        .zip(realized.iter())
        .map(|(w, m)| w.conj() * m)
        .sum();
    if t.norm() == 0.0 {
        c(1.0, 0.0)
    } else {
        (t / t.norm()).conj()
    }
}

/// Accuracy of the over-the-air layer on the test split. Each sample passes
/// through the physical cascade `n_noise_draws` times with fresh noise; the
/// bias is added digitally after combining and the logits are derotated by
/// [`derotation`] before the decision.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_ota_accuracy<R: Rng + ?Sized>(
    params: &AirFcParams,
    ch: &ChannelSet,
    noise: &NoiseModel,
    baseline: &DigitalBaseline,
    task: &SyntheticTask,
    n_noise_draws: usize,
    tie: TieBreak,
    rng: &mut R,
) -> Result<f64> {
    if n_noise_draws == 0 {
        return Err(Error::InvalidArgument(
            "need at least one noise draw".into(),
        ));
    }
    if baseline.weights.shape() != (task.features(), task.features()) {
        return Err(shape_err("baseline weights do not match the task width"));
    }
    let m = realized_map(params, ch)?;
    let rot = derotation(&m, &baseline.weights);
    let mut correct = 0usize;
    for (x, &y) in task.test_x.iter().zip(&task.test_y) {
        for _ in 0..n_noise_draws {
            let out = simulate_forward(params, ch, noise, x, rng)? + &baseline.bias;
            if decide(&(out * rot), baseline.classes, tie, rng) == y {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / (task.test_x.len() * n_noise_draws) as f64)
}

// ---------------------------------------------------------------------------
// Monte-Carlo sweep
// ---------------------------------------------------------------------------

/// One point of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub groups: usize,
    pub relays_per_group: usize,
    pub relay_power_w: f64,
    pub area_length_m: f64,
    pub direct_link: bool,
}

/// Everything a trial needs besides the grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub antennas: usize,
    pub carrier_hz: f64,
    pub heights: Heights,
    /// Link classes; each trial uses these as given.
    pub links: LinkSet,
    pub pathloss: PathlossTable,
    /// Relay noise variance per group; the last entry is reused for deeper groups.
    pub relay_noise_w: Vec<f64>,
    pub receiver_noise_w: f64,
    pub tx_max_w: f64,
    pub ao: AoConfig,
    pub noise_draws: usize,
    pub tie_break: TieBreak,
}

impl Scenario {
    pub fn noise_model(&self, groups: usize) -> NoiseModel {
        let last = *self.relay_noise_w.last().unwrap_or(&0.0);
        NoiseModel {
            relay_variances: (0..groups)
                .map(|l| *self.relay_noise_w.get(l).unwrap_or(&last))
                .collect(),
            receiver_variance: self.receiver_noise_w,
        }
    }
}

/// Outcome of one realization at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub groups: usize,
    pub relays_per_group: usize,
    pub relay_power_w: f64,
    pub area_length_m: f64,
    pub direct_link: bool,
    pub ok: bool,
    pub nmse: f64,
    pub accuracy: f64,
    pub imitation_error: f64,
    pub noise_penalty: f64,
    pub objective: f64,
    pub effective_snr_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub point: GridPoint,
    pub realizations: usize,
    pub failed: usize,
    pub partial: bool,
    pub accuracy: Stat,
    pub nmse: Stat,
    pub objective: Stat,
    pub trials: Vec<TrialRecord>,
}

/// SplitMix64 step; derives decorrelated per-trial seeds from a master seed.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream offsets applied to a trial seed via [`split_seed`].
pub const TOPOLOGY_SALT: u64 = 0x746f_706f;
pub const CHANNEL_SALT: u64 = 0x6368_616e;
pub const EVAL_SALT: u64 = 0x6576_616c;

/// Runs one realization: topology, channels, AO, and evaluation. The seed
/// depends only on the trial index, so every grid point sees the same
/// random streams (common random numbers).
pub fn run_trial(
    point_index: usize,
    point: &GridPoint,
    trial: usize,
    base_seed: u64,
    scenario: &Scenario,
    baseline: &DigitalBaseline,
    task: &SyntheticTask,
) -> TrialRecord {
    let seed = split_seed(base_seed, trial as u64);
    let mut rec = TrialRecord {
        point: point_index,
        trial,
        seed,
        groups: point.groups,
        relays_per_group: point.relays_per_group,
        relay_power_w: point.relay_power_w,
        area_length_m: point.area_length_m,
        direct_link: point.direct_link,
        ok: false,
        nmse: f64::NAN,
        accuracy: f64::NAN,
        imitation_error: f64::NAN,
        noise_penalty: f64::NAN,
        objective: f64::NAN,
        effective_snr_db: f64::NAN,
        iterations: 0,
        converged: false,
        max_violation: f64::NAN,
        error: String::new(),
    };
    match trial_metrics(point, seed, scenario, baseline, task, &mut rec) {
        Ok(()) => rec.ok = true,
        Err(e) => rec.error = e.to_string(),
    }
    rec
}

/// Topology and channel realization for one trial seed; the same streams
/// that [`run_trial`] uses.
pub fn realize_channel(
    point: &GridPoint,
    trial_seed: u64,
    scenario: &Scenario,
) -> Result<ChannelSet> {
    let topo = generate_topology(
        point.area_length_m,
        point.groups,
        point.relays_per_group,
        scenario.heights,
        split_seed(trial_seed, TOPOLOGY_SALT),
    )?;
    generate_channel_set(
        &topo,
        &scenario.links,
        &scenario.pathloss,
        scenario.carrier_hz,
        (scenario.antennas, scenario.antennas),
        point.direct_link,
        split_seed(trial_seed, CHANNEL_SALT),
    )
}

fn trial_metrics(
    point: &GridPoint,
    seed: u64,
    scenario: &Scenario,
    baseline: &DigitalBaseline,
    task: &SyntheticTask,
    rec: &mut TrialRecord,
) -> Result<()> {
    let ch = realize_channel(point, seed, scenario)?;
    let noise = scenario.noise_model(point.groups);
    let budget = PowerBudget::uniform(scenario.tx_max_w, point.relay_power_w, &ch.group_sizes());
    let (params, trace) = run_ao(&ch, &baseline.weights, &noise, &budget, &scenario.ao)?;
    let obj = trace.final_objective();
    let m = realized_map(&params, &ch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, EVAL_SALT));
    rec.nmse = imitation_nmse(&m, &baseline.weights)?;
    rec.accuracy = evaluate_ota_accuracy(
        &params,
        &ch,
        &noise,
        baseline,
        task,
        scenario.noise_draws,
        scenario.tie_break,
        &mut rng,
    )?;
    rec.imitation_error = obj.imitation_error;
    rec.noise_penalty = obj.noise_penalty;
    rec.objective = obj.total;
    rec.effective_snr_db = effective_snr_db(&params, &ch, &noise)?;
    rec.iterations = trace.iterations;
    rec.converged = trace.termination == Termination::Converged;
    rec.max_violation = *trace.max_violation.last().unwrap_or(&0.0);
    Ok(())
}

pub fn aggregate(point: GridPoint, trials: Vec<TrialRecord>) -> SweepResult {
    let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.ok).collect();
    let pick = |f: fn(&TrialRecord) -> f64| Stat::of(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
    let failed = trials.len() - ok.len();
    SweepResult {
        point,
        realizations: ok.len(),
        failed,
        partial: failed > 0,
        accuracy: pick(|t| t.accuracy),
        nmse: pick(|t| t.nmse),
        objective: pick(|t| t.objective),
        trials,
    }
}

/// Runs `trials` independent realizations at every grid point and aggregates
/// them. Failed trials are recorded and mark their point partial. The
/// result is fully determined by `base_seed`.
pub fn monte_carlo_sweep(
    grid: &[GridPoint],
    trials: usize,
    base_seed: u64,
    scenario: &Scenario,
    baseline: &DigitalBaseline,
    task: &SyntheticTask,
    exec: Execution,
) -> Result<Vec<SweepResult>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let records = map_ordered(&jobs, exec, |&(p, t)| {
        run_trial(p, &grid[p], t, base_seed, scenario, baseline, task)
    });
    let mut out = Vec::with_capacity(grid.len());
    let mut it = records.into_iter();
    for point in grid {
        out.push(aggregate(*point, it.by_ref().take(trials).collect()));
    }
    Ok(out)
}
