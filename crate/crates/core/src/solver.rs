//! Alternating optimization of precoder, combiner and relay gains.
//!
//! Each iteration runs, in order: build `H_eff`; the ridge/bisection update
//! of `F1`; the closed-form noise-penalized update of `F2`; then for
//! `l = 1..=L` the Khatri–Rao least-squares update of `a_l` followed by the
//! per-relay magnitude projection. Suffix products are cached at the start
//! of the relay sweep and the prefix product is advanced as each group is
//! updated.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{check_index, shape_err, Error, Result};
use crate::linalg::{
    c, diag_mul, frob_sq, mul_diag, solve_hermitian_guarded, trace_re, CMat, CVec,
};
use crate::system::{
    effective_channel, group_input_map, noise_covariance, objective, relay_input_power_ext,
    AirFcParams, NoiseModel, ObjectiveValue, PowerBudget,
};

/// Regularizer `D_l` used in the relay-gain block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerMode {
    /// `sigma_u,l^2 diag(||U_l e_k||^2)`: the group's own injected noise at the receiver.
    NoiseAware,
    /// `epsilon * mean(diag Gamma_l) * I`.
    FixedEpsilon,
    Off,
    /// Full quadratic form of the noise penalty in `a_l`, including noise
    /// injected upstream of group `l`. Makes the block update the exact
    /// minimizer of the objective.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoConfig {
    pub max_iters: usize,
    pub rel_tolerance: f64,
    pub bisection_tolerance: f64,
    pub bisection_max_steps: usize,
    /// Initial relay gain as a fraction of the largest feasible common gain of its group.
    pub init_gain_rho: f64,
    pub regularizer: RegularizerMode,
    pub fixed_epsilon: f64,
    /// Count amplified upstream relay noise in the relay input power used by the projection.
    pub include_upstream_noise: bool,
    /// Record the objective after every block, not only after every iteration.
    pub record_blocks: bool,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            max_iters: 300,
            rel_tolerance: 1e-6,
            bisection_tolerance: 1e-8,
            bisection_max_steps: 100,
            init_gain_rho: 1e-2,
            regularizer: RegularizerMode::NoiseAware,
            fixed_epsilon: 1e-6,
            include_upstream_noise: false,
            record_blocks: false,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Error::InvalidArgument(format!("{what} must be > 0, got {v}"));
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(bad("rel_tolerance", self.rel_tolerance));
        }
        if !(self.bisection_tolerance > 0.0) {
            return Err(bad("bisection_tolerance", self.bisection_tolerance));
        }
        if self.bisection_max_steps == 0 {
            return Err(Error::InvalidArgument(
                "bisection_max_steps must be >= 1".into(),
            ));
        }
        if !(self.init_gain_rho > 0.0 && self.init_gain_rho <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "init_gain_rho must be in (0, 1], got {}",
                self.init_gain_rho
            )));
        }
        if !(self.fixed_epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fixed_epsilon must be >= 0, got {}",
                self.fixed_epsilon
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Block 1: precoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct F1Update {
    pub precoder: CMat,
    pub lambda: f64,
    /// `Xi` vanished while the target did not: nothing can be fitted.
    pub rank_deficient: bool,
    /// The final feasibility rescale was applied.
    pub rescaled: bool,
}

/// Singular values below this fraction of the largest are dropped from the
/// unregularized (`lambda = 0`) solution.
const PINV_RCOND: f64 = 1e-13;

/// `F1(lambda) = (Xi^H Xi + lambda I)^{-1} Xi^H W`, with `lambda = 0` when that
/// meets `||F1||_F^2 <= p_max` and otherwise `lambda > 0` chosen so the
/// budget is met with equality.
pub fn update_f1(xi: &CMat, target: &CMat, p_max: f64, cfg: &AoConfig) -> Result<F1Update> {
    if !(p_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transmit budget must be > 0, got {p_max}"
        )));
    }
    if xi.nrows() != target.nrows() {
        return Err(shape_err(format!(
            "Xi is {:?}, target is {:?}",
            xi.shape(),
            target.shape()
        )));
    }
    let n_t = xi.ncols();
    let svd = xi.clone().svd(true, true);
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(F1Update {
            precoder: CMat::zeros(n_t, target.ncols()),
            lambda: 0.0,
            rank_deficient: frob_sq(target) > 0.0,
            rescaled: false,
        });
    }
    let proj = u.adjoint() * target; // rank x N
    let weights: Vec<f64> = proj
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect();

    let coeffs = |lambda: f64| -> Vec<f64> {
        s.iter()
            .map(|&si| {
                if lambda == 0.0 {
                    if si > PINV_RCOND * smax {
                        1.0 / si
                    } else {
                        0.0
                    }
                } else {
                    si / (si * si + lambda)
                }
            })
            .collect()
    };
    let norm_sq = |lambda: f64| -> f64 {
        coeffs(lambda)
            .iter()
            .zip(&weights)
            .map(|(ci, wi)| ci * ci * wi)
            .sum()
    };
    let build = |lambda: f64| -> CMat {
        let cf = CVec::from_iterator(s.len(), coeffs(lambda).into_iter().map(|x| c(x, 0.0)));
        v_t.adjoint() * diag_mul(&cf, &proj)
    };

    if norm_sq(0.0) <= p_max {
        return Ok(F1Update {
            precoder: build(0.0),
            lambda: 0.0,
            rank_deficient: false,
            rescaled: false,
        });
    }

    // Bracket: grow the upper end from trace(Xi^H Xi)/N until feasible, then
    // shrink a lower end until infeasible (or it underflows to zero).
    let mut hi = s.iter().map(|x| x * x).sum::<f64>() / target.ncols().max(1) as f64;
    while norm_sq(hi) > p_max {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while lo > f64::MIN_POSITIVE && norm_sq(lo) <= p_max {
        lo /= 2.0;
    }
    if lo <= f64::MIN_POSITIVE {
        lo = 0.0;
    }

    let target_norm = p_max.sqrt();
    for _ in 0..cfg.bisection_max_steps {
        if norm_sq(hi).sqrt() >= target_norm * (1.0 - cfg.bisection_tolerance) {
            break;
        }
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if norm_sq(mid) > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish on the nearly linear secular function 1/||F1(lambda)|| - 1/sqrt(p_max),
    // kept inside the bracket.
    let mut lambda = hi;
    for _ in 0..8 {
        let g = norm_sq(lambda);
        let dg: f64 = s
            .iter()
            .zip(&weights)
            .map(|(&si, &wi)| -2.0 * si * si * wi / (si * si + lambda).powi(3))
            .sum();
        let h = 1.0 / g.sqrt() - 1.0 / target_norm;
        let dh = -0.5 * g.powf(-1.5) * dg;
        if !(dh > 0.0) || h.abs() < 1e-16 / target_norm {
            break;
        }
        let next = lambda - h / dh;
        if !(next > lo && next <= hi * (1.0 + 1e-12)) {
            break;
        }
        lambda = next;
    }

    let mut precoder = build(lambda);
    let fro = frob_sq(&precoder);
    let rescaled = fro > p_max;
    if rescaled {
        precoder *= c((p_max / fro).sqrt() * (1.0 - 1e-15), 0.0);
    }
    Ok(F1Update {
        precoder,
        lambda,
        rank_deficient: false,
        rescaled,
    })
}

// ---------------------------------------------------------------------------
// Block 2: combiner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct F2Update {
    pub combiner: CMat,
    pub regularized: bool,
}

/// `F2 = W U^H (U U^H + R_n)^{-1}`.
pub fn update_f2(u: &CMat, r_n: &CMat, target: &CMat) -> Result<F2Update> {
    let n_r = u.nrows();
    if r_n.shape() != (n_r, n_r) || target.ncols() != u.ncols() {
        return Err(shape_err(format!(
            "U {:?}, R_n {:?}, target {:?}",
            u.shape(),
            r_n.shape(),
            target.shape()
        )));
    }
    let gram = u * u.adjoint() + r_n;
    let rhs = u * target.adjoint();
    let sol = solve_hermitian_guarded(&gram, &rhs, 1e15, 1e-12);
    Ok(F2Update {
        combiner: sol.x.adjoint(),
        regularized: sol.regularized,
    })
}

// ---------------------------------------------------------------------------
// Block 3: relay gains
// ---------------------------------------------------------------------------

/// The chain folded around group `l`: `F2 H_eff F1 = u diag(a_l) v + F2 H_0 F1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFold {
    /// `U_l = F2 H_{L+1} A_L ... A_{l+1} H_{l+1}`, N x K_l.
    pub u: CMat,
    /// `V_l = H_l A_{l-1} ... A_1 H_1 F1`, K_l x N.
    pub v: CMat,
}

impl BlockFold {
    /// `U_l diag(a) V_l`.
    pub fn apply(&self, a: &CVec) -> CMat {
        mul_diag(&self.u, a) * &self.v
    }
}

pub fn fold_chain(ch: &ChannelSet, params: &AirFcParams, l: usize) -> Result<BlockFold> {
    let l_max = ch.num_groups();
    check_index(l, l_max)?;
    crate::system::check_params(params, ch, None)?;
    let mut u = &params.combiner * ch.hop(l_max + 1);
    for i in (l + 1..=l_max).rev() {
        u = mul_diag(&u, &params.gains[i - 1]) * ch.hop(i);
    }
    let v = group_input_map(ch, &params.gains, &params.precoder, l)?;
    Ok(BlockFold { u, v })
}

/// `E_l = W - (M - U_l diag(a_l) V_l)`: the part of the target group `l` must supply.
pub fn residual_target(target: &CMat, realized: &CMat, fold: &BlockFold, a: &CVec) -> Result<CMat> {
    if target.shape() != realized.shape()
        || fold.u.nrows() != target.nrows()
        || fold.v.ncols() != target.ncols()
    {
        return Err(shape_err("residual target operands disagree"));
    }
    Ok(target - (realized - fold.apply(a)))
}

/// Gram matrix of the Khatri–Rao design `B = V^T ⊙ U` without forming it:
/// `B^H B = conj(V V^H) ∘ (U^H U)`.
pub fn gain_gram(fold: &BlockFold) -> CMat {
    let vv = (&fold.v * fold.v.adjoint()).map(|z| z.conj());
    let uu = fold.u.adjoint() * &fold.u;
    vv.component_mul(&uu)
}

/// `B^H vec(E)` without forming `B`: entry `k` is `(U^H E V^H)_{kk}`.
pub fn gain_correlation(fold: &BlockFold, residual: &CMat) -> CVec {
    let p = fold.u.adjoint() * residual;
    CVec::from_iterator(
        p.nrows(),
        p.row_iter()
            .zip(fold.v.row_iter())
            .map(|(pr, vr)| pr.iter().zip(vr.iter()).map(|(a, b)| a * b.conj()).sum()),
    )
}

/// Diagonal of `sigma^2 diag(diag(U^H U))`: `sigma^2 ||U e_k||^2`.
pub fn noise_aware_regularizer(u: &CMat, sigma_sq: f64) -> Vec<f64> {
    u.column_iter()
        .map(|col| sigma_sq * col.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect()
}

/// Regularizer matrix for group `l` under `mode`.
pub fn regularizer_matrix(
    mode: RegularizerMode,
    fold: &BlockFold,
    ch: &ChannelSet,
    gains: &[CVec],
    noise: &NoiseModel,
    l: usize,
    fixed_epsilon: f64,
) -> CMat {
    let k = fold.u.ncols();
    match mode {
        RegularizerMode::Off => CMat::zeros(k, k),
        RegularizerMode::NoiseAware => {
            let d = noise_aware_regularizer(&fold.u, noise.relay_variances[l - 1]);
            CMat::from_diagonal(&CVec::from_iterator(k, d.into_iter().map(|x| c(x, 0.0))))
        }
        RegularizerMode::FixedEpsilon => {
            let scale = fixed_epsilon * trace_re(&gain_gram(fold)) / k as f64;
            CMat::identity(k, k) * c(scale, 0.0)
        }
        RegularizerMode::Exact => {
            let uu = fold.u.adjoint() * &fold.u;
            let own = noise.relay_variances[l - 1];
            let mut d = CMat::from_diagonal(&uu.diagonal()) * c(own, 0.0);
            // Q maps group-j noise to group-l input: H_l A_{l-1} ... H_{j+1} A_j
            if l > 1 {
                let mut q = mul_diag(ch.hop(l), &gains[l - 2]);
                for j in (1..l).rev() {
                    let var = noise.relay_variances[j - 1];
                    if var > 0.0 {
                        let qq = (&q * q.adjoint()).map(|z| z.conj());
                        d += qq.component_mul(&uu) * c(var, 0.0);
                    }
                    if j > 1 {
                        q = mul_diag(&(&q * ch.hop(j)), &gains[j - 2]);
                    }
                }
            }
            d
        }
    }
}

#[derive(Debug, Clone)]
pub struct GainSolve {
    pub gains: CVec,
    pub regularized: bool,
}

/// `a_l = (Gamma_l + D_l)^{-1} eta_l`, minimizing
/// `||U_l diag(a) V_l - E_l||_F^2 + a^H D_l a`.
pub fn solve_relay_gains(fold: &BlockFold, residual: &CMat, reg: &CMat) -> Result<GainSolve> {
    let k = fold.u.ncols();
    if fold.v.nrows() != k || reg.shape() != (k, k) {
        return Err(shape_err(format!(
            "fold U {:?}, V {:?}, regularizer {:?}",
            fold.u.shape(),
            fold.v.shape(),
            reg.shape()
        )));
    }
    let lhs = gain_gram(fold) + reg;
    let rhs = gain_correlation(fold, residual);
    let sol = solve_hermitian_guarded(
        &lhs,
        &CMat::from_column_slice(k, 1, rhs.as_slice()),
        1e12,
        1e-10,
    );
    Ok(GainSolve {
        gains: CVec::from_column_slice(sol.x.as_slice()),
        regularized: sol.regularized,
    })
}

/// Clips each `|a_k|` to `sqrt(P_k / p_in_k)`, keeping its phase.
pub fn project_gains(a: &CVec, p_in: &[f64], budget: &[f64]) -> CVec {
    CVec::from_iterator(
        a.len(),
        a.iter()
            .zip(p_in.iter().zip(budget))
            .map(|(&ak, (&p, &pk))| {
                let mag = ak.norm();
                let bound = (pk / p).sqrt();
                if mag > bound {
                    ak * (bound / mag)
                } else {
                    ak
                }
            }),
    )
}

// ---------------------------------------------------------------------------
// AO loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Precoder,
    Combiner,
    /// Relay group (1-based), after projection.
    Relay(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub iteration: usize,
    pub block: Block,
    pub total: f64,
    /// Objective before projection, for relay blocks.
    pub unprojected_total: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveFlags {
    pub f1_rank_deficient: usize,
    pub f1_rescaled: usize,
    pub f2_regularized: usize,
    pub gains_regularized: usize,
    pub projections_active: usize,
}

/// Per-iteration history. Entry 0 is the initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoTrace {
    pub objectives: Vec<ObjectiveValue>,
    pub max_violation: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub blocks: Vec<BlockRecord>,
    pub flags: SolveFlags,
}

impl AoTrace {
    pub fn final_objective(&self) -> ObjectiveValue {
        *self
            .objectives
            .last()
            .expect("trace holds the initial point")
    }
}

/// Largest relative constraint violation `max(||F1||^2/P_max, |a|^2 p_in / P) - 1`, floored at 0.
pub fn max_violation(
    params: &AirFcParams,
    ch: &ChannelSet,
    noise: &NoiseModel,
    budget: &PowerBudget,
    include_upstream_noise: bool,
) -> Result<f64> {
    let mut worst = frob_sq(&params.precoder) / budget.tx_max - 1.0;
    for l in 1..=ch.num_groups() {
        let p_in = relay_input_power_ext(
            ch,
            &params.gains,
            &params.precoder,
            noise,
            l,
            include_upstream_noise,
        )?;
        for ((a, p), cap) in params.gains[l - 1]
            .iter()
            .zip(&p_in)
            .zip(&budget.relay[l - 1])
        {
            worst = worst.max(a.norm_sqr() * p / cap - 1.0);
        }
    }
    Ok(worst.max(0.0))
}

/// Feasible starting point: `F1` a scaled identity inside the transmit budget,
/// `F2 = I`, and group `l` gains all equal to `cfg.init_gain_rho` times the
/// largest common gain that keeps every relay of the group within budget.
/// Groups are set in chain order, since relay input power depends only on
/// upstream gains.
pub fn initial_params(
    ch: &ChannelSet,
    width: usize,
    noise: &NoiseModel,
    budget: &PowerBudget,
    cfg: &AoConfig,
) -> Result<AirFcParams> {
    let eye_t = CMat::identity(ch.n_t(), width);
    let scale = (budget.tx_max / frob_sq(&eye_t)).sqrt().min(1.0);
    let mut params = AirFcParams {
        precoder: eye_t * c(scale, 0.0),
        combiner: CMat::identity(width, ch.n_r()),
        gains: ch.group_sizes().iter().map(|&k| CVec::zeros(k)).collect(),
    };
    for l in 1..=ch.num_groups() {
        let p_in = relay_input_power_ext(
            ch,
            &params.gains,
            &params.precoder,
            noise,
            l,
            cfg.include_upstream_noise,
        )?;
        let largest = p_in
            .iter()
            .zip(&budget.relay[l - 1])
            .map(|(p, cap)| {
                if *p > 0.0 {
                    (cap / p).sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min);
        let rho = if largest.is_finite() {
            cfg.init_gain_rho * largest
        } else {
            cfg.init_gain_rho
        };
        params.gains[l - 1].fill(c(rho, 0.0));
    }
    Ok(params)
}

/// Runs alternating optimization until the relative objective change falls
/// below `cfg.rel_tolerance` or `cfg.max_iters` iterations have run.
pub fn run_ao(
    ch: &ChannelSet,
    target: &CMat,
    noise: &NoiseModel,
    budget: &PowerBudget,
    cfg: &AoConfig,
) -> Result<(AirFcParams, AoTrace)> {
    let init = {
        cfg.validate()?;
        if target.nrows() != target.ncols() {
            return Err(shape_err(format!(
                "target must be square, got {:?}",
                target.shape()
            )));
        }
        noise.validate(ch.num_groups())?;
        budget.validate(&ch.group_sizes())?;
        initial_params(ch, target.nrows(), noise, budget, cfg)?
    };
    run_ao_from(ch, target, noise, budget, cfg, init)
}

/// [`run_ao`] from a caller-supplied starting point.
pub fn run_ao_from(
    ch: &ChannelSet,
    target: &CMat,
    noise: &NoiseModel,
    budget: &PowerBudget,
    cfg: &AoConfig,
    mut params: AirFcParams,
) -> Result<(AirFcParams, AoTrace)> {
    cfg.validate()?;
    noise.validate(ch.num_groups())?;
    budget.validate(&ch.group_sizes())?;
    let l_max = ch.num_groups();
    let upstream = cfg.include_upstream_noise;

    let first = objective(&params, ch, target, noise)?;
    let mut trace = AoTrace {
        objectives: vec![first],
        max_violation: vec![max_violation(&params, ch, noise, budget, upstream)?],
        lambdas: Vec::new(),
        iterations: 0,
        termination: Termination::MaxIterations,
        blocks: Vec::new(),
        flags: SolveFlags::default(),
    };

    let record = |trace: &mut AoTrace,
                  params: &AirFcParams,
                  it: usize,
                  block: Block,
                  pre: Option<f64>|
     -> Result<()> {
        let total = objective(params, ch, target, noise)?.total;
        trace.blocks.push(BlockRecord {
            iteration: it,
            block,
            total,
            unprojected_total: pre,
        });
        Ok(())
    };

    for it in 1..=cfg.max_iters {
        let h_eff = effective_channel(ch, &params.gains)?;

        let xi = &params.combiner * &h_eff;
        let f1 = update_f1(&xi, target, budget.tx_max, cfg)?;
        trace.flags.f1_rank_deficient += f1.rank_deficient as usize;
        trace.flags.f1_rescaled += f1.rescaled as usize;
        trace.lambdas.push(f1.lambda);
        params.precoder = f1.precoder;
        if cfg.record_blocks {
            record(&mut trace, &params, it, Block::Precoder, None)?;
        }

        let u = &h_eff * &params.precoder;
        let r_n = noise_covariance(ch, &params.gains, noise)?;
        let f2 = update_f2(&u, &r_n, target)?;
        trace.flags.f2_regularized += f2.regularized as usize;
        params.combiner = f2.combiner;
        if cfg.record_blocks {
            record(&mut trace, &params, it, Block::Combiner, None)?;
        }

        // suffix cache with the gains as they stand at the start of the sweep
        let mut suffix = vec![CMat::zeros(0, 0); l_max];
        suffix[l_max - 1] = &params.combiner * ch.hop(l_max + 1);
        for l in (1..l_max).rev() {
            suffix[l - 1] = mul_diag(&suffix[l], &params.gains[l]) * ch.hop(l + 1);
        }
        let direct_term = ch
            .direct
            .as_ref()
            .map(|h0| &params.combiner * h0 * &params.precoder);
        let mut prefix = ch.hop(1) * &params.precoder;

        for l in 1..=l_max {
            let fold = BlockFold {
                u: std::mem::take(&mut suffix[l - 1]),
                v: prefix,
            };
            let a_old = &params.gains[l - 1];
            let mut realized = fold.apply(a_old);
            if let Some(d) = &direct_term {
                realized += d;
            }
            let residual = residual_target(target, &realized, &fold, a_old)?;
            let reg = regularizer_matrix(
                cfg.regularizer,
                &fold,
                ch,
                &params.gains,
                noise,
                l,
                cfg.fixed_epsilon,
            );
            let solved = solve_relay_gains(&fold, &residual, &reg)?;
            trace.flags.gains_regularized += solved.regularized as usize;

            let pre = if cfg.record_blocks {
                let mut tmp = params.clone();
                tmp.gains[l - 1] = solved.gains.clone();
                Some(objective(&tmp, ch, target, noise)?.total)
            } else {
                None
            };

            let p_in =
                relay_input_power_ext(ch, &params.gains, &params.precoder, noise, l, upstream)?;
            let projected = project_gains(&solved.gains, &p_in, &budget.relay[l - 1]);
            if projected != solved.gains {
                trace.flags.projections_active += 1;
            }
            params.gains[l - 1] = projected;
            if cfg.record_blocks {
                record(&mut trace, &params, it, Block::Relay(l), pre)?;
            }
            prefix = if l < l_max {
                ch.hop(l + 1) * diag_mul(&params.gains[l - 1], &fold.v)
            } else {
                fold.v
            };
        }

        let obj = objective(&params, ch, target, noise)?;
        if !obj.total.is_finite() || !params.is_finite() {
            trace.iterations = it;
            return Err(Error::AoDiverged {
                iteration: it,
                trace: Box::new(trace),
            });
        }
        let prev = trace.final_objective().total;
        trace.objectives.push(obj);
        trace
            .max_violation
            .push(max_violation(&params, ch, noise, budget, upstream)?);
        trace.iterations = it;
        let change = if prev > 0.0 {
            (prev - obj.total).abs() / prev
        } else {
            0.0
        };
        if change < cfg.rel_tolerance {
            trace.termination = Termination::Converged;
            break;
        }
    }
    Ok((params, trace))
}
