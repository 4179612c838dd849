//! The relay cascade as a linear system: effective channel, noise transfer,
//! relay input power and the imitation objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{check_index, shape_err, Error, Result};
use crate::linalg::{cn_vector, diag_mul, frob_sq, mul_diag, trace_re, CMat, CVec};

/// Precoder, combiner and per-group relay gains.
#[derive(Debug, Clone, PartialEq)]
pub struct AirFcParams {
    /// `F1`, N_t x N.
    pub precoder: CMat,
    /// `F2`, N x N_r.
    pub combiner: CMat,
    /// `a_l` for each group; `A_l = diag(a_l)`.
    pub gains: Vec<CVec>,
}

impl AirFcParams {
    pub fn is_finite(&self) -> bool {
        let ok = |m: &CMat| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        ok(&self.precoder)
            && ok(&self.combiner)
            && self
                .gains
                .iter()
                .all(|a| a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `sigma_u,l^2` per relay group (watts).
    pub relay_variances: Vec<f64>,
    /// `sigma_c^2` at the receiver (watts).
    pub receiver_variance: f64,
}

impl NoiseModel {
    pub fn uniform(num_groups: usize, variance: f64) -> Self {
        NoiseModel {
            relay_variances: vec![variance; num_groups],
            receiver_variance: variance,
        }
    }

    pub fn noiseless(num_groups: usize) -> Self {
        Self::uniform(num_groups, 0.0)
    }

    pub fn validate(&self, num_groups: usize) -> Result<()> {
        if self.relay_variances.len() != num_groups {
            return Err(shape_err(format!(
                "{} relay noise variances for {num_groups} groups",
                self.relay_variances.len()
            )));
        }
        let all = self
            .relay_variances
            .iter()
            .chain(std::iter::once(&self.receiver_variance));
        for &v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "noise variance must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Transmit budget on `||F1||_F^2` (watts).
    pub tx_max: f64,
    /// Per-relay budgets `P_{l,k}` (watts), indexed `[l-1][k]`.
    pub relay: Vec<Vec<f64>>,
}

impl PowerBudget {
    pub fn uniform(tx_max: f64, relay_power: f64, group_sizes: &[usize]) -> Self {
        PowerBudget {
            tx_max,
            relay: group_sizes.iter().map(|&k| vec![relay_power; k]).collect(),
        }
    }

    pub fn validate(&self, group_sizes: &[usize]) -> Result<()> {
        if !(self.tx_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "transmit budget must be > 0, got {}",
                self.tx_max
            )));
        }
        let sizes: Vec<usize> = self.relay.iter().map(Vec::len).collect();
        if sizes != group_sizes {
            return Err(shape_err(format!(
                "relay budgets shaped {sizes:?}, groups are {group_sizes:?}"
            )));
        }
        if let Some(p) = self.relay.iter().flatten().find(|&&p| !(p > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "relay budget must be > 0, got {p}"
            )));
        }
        Ok(())
    }
}

/// Imitation error plus noise penalty. `total` is always the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub imitation_error: f64,
    pub noise_penalty: f64,
    pub total: f64,
}

impl ObjectiveValue {
    pub fn new(imitation_error: f64, noise_penalty: f64) -> Self {
        ObjectiveValue {
            imitation_error,
            noise_penalty,
            total: imitation_error + noise_penalty,
        }
    }
}

fn check_gains(ch: &ChannelSet, gains: &[CVec]) -> Result<()> {
    let sizes = ch.group_sizes();
    if gains.len() != sizes.len() || gains.iter().zip(&sizes).any(|(a, &k)| a.len() != k) {
        let got: Vec<usize> = gains.iter().map(|a| a.len()).collect();
        return Err(shape_err(format!(
            "gain vectors sized {got:?}, groups are {sizes:?}"
        )));
    }
    Ok(())
}

/// Relay cascade `H_{L+1} A_L H_L ... A_1 H_1` without the direct link.
pub fn relay_cascade(ch: &ChannelSet, gains: &[CVec]) -> Result<CMat> {
    check_gains(ch, gains)?;
    let mut acc = diag_mul(&gains[0], ch.hop(1));
    for l in 2..=ch.num_groups() {
        acc = diag_mul(&gains[l - 1], &(ch.hop(l) * acc));
    }
    Ok(ch.hop(ch.num_groups() + 1) * acc)
}

/// `H_eff = H_0 + H_{L+1} A_L H_L ... A_1 H_1`; the `H_0` term is skipped when absent.
pub fn effective_channel(ch: &ChannelSet, gains: &[CVec]) -> Result<CMat> {
    let cascade = relay_cascade(ch, gains)?;
    Ok(match &ch.direct {
        Some(h0) => h0 + cascade,
        None => cascade,
    })
}

/// All transfer matrices `T_1 .. T_L` via the suffix recursion
/// `T_L = H_{L+1} A_L`, `T_j = T_{j+1} H_{j+1} A_j`.
pub fn transfer_matrices(ch: &ChannelSet, gains: &[CVec]) -> Result<Vec<CMat>> {
    check_gains(ch, gains)?;
    let l_max = ch.num_groups();
    let mut out = vec![CMat::zeros(0, 0); l_max];
    out[l_max - 1] = mul_diag(ch.hop(l_max + 1), &gains[l_max - 1]);
    for j in (1..l_max).rev() {
        out[j - 1] = mul_diag(&(&out[j] * ch.hop(j + 1)), &gains[j - 1]);
    }
    Ok(out)
}

/// `T_j = H_{L+1} A_L H_L ... H_{j+1} A_j`, the map from group-`j` noise to the Rx input.
pub fn transfer_matrix(ch: &ChannelSet, gains: &[CVec], j: usize) -> Result<CMat> {
    check_index(j, ch.num_groups())?;
    Ok(transfer_matrices(ch, gains)?.swap_remove(j - 1))
}

/// `R_n^in = sigma_c^2 I + sum_j sigma_u,j^2 T_j T_j^H`.
pub fn noise_covariance(ch: &ChannelSet, gains: &[CVec], noise: &NoiseModel) -> Result<CMat> {
    noise.validate(ch.num_groups())?;
    let n_r = ch.n_r();
    let mut r = CMat::identity(n_r, n_r) * crate::linalg::c(noise.receiver_variance, 0.0);
    for (t, &var) in transfer_matrices(ch, gains)?
        .iter()
        .zip(&noise.relay_variances)
    {
        if var > 0.0 {
            r += (t * t.adjoint()) * crate::linalg::c(var, 0.0);
        }
    }
    // symmetrize away rounding
    Ok((&r + r.adjoint()) * crate::linalg::c(0.5, 0.0))
}

/// Signal reaching group `l` before its noise is added:
/// `H_l A_{l-1} H_{l-1} ... A_1 H_1 F1` (K_l x N).
pub fn group_input_map(ch: &ChannelSet, gains: &[CVec], precoder: &CMat, l: usize) -> Result<CMat> {
    check_index(l, ch.num_groups())?;
    check_gains(ch, gains)?;
    if precoder.nrows() != ch.n_t() {
        return Err(shape_err(format!(
            "precoder has {} rows, N_t = {}",
            precoder.nrows(),
            ch.n_t()
        )));
    }
    let mut acc = ch.hop(1) * precoder;
    for i in 2..=l {
        acc = ch.hop(i) * diag_mul(&gains[i - 2], &acc);
    }
    Ok(acc)
}

/// Instantaneous relay input power `p_in_{l,k} = ||row_k(H_l A_{l-1} ... H_1 F1)||^2 + sigma_u,l^2`.
pub fn relay_input_power(
    ch: &ChannelSet,
    gains: &[CVec],
    precoder: &CMat,
    noise: &NoiseModel,
    l: usize,
) -> Result<Vec<f64>> {
    relay_input_power_ext(ch, gains, precoder, noise, l, false)
}

/// As [`relay_input_power`]; with `include_upstream_noise` the amplified noise
/// of groups `1..l-1` reaching group `l` is added as well.
pub fn relay_input_power_ext(
    ch: &ChannelSet,
    gains: &[CVec],
    precoder: &CMat,
    noise: &NoiseModel,
    l: usize,
    include_upstream_noise: bool,
) -> Result<Vec<f64>> {
    noise.validate(ch.num_groups())?;
    let sig = group_input_map(ch, gains, precoder, l)?;
    let own = noise.relay_variances[l - 1];
    let mut p: Vec<f64> = sig
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>() + own)
        .collect();
    if include_upstream_noise && l > 1 {
        // map from group j noise to group l input: H_l A_{l-1} ... H_{j+1} A_j
        let mut m = mul_diag(ch.hop(l), &gains[l - 2]);
        for j in (1..l).rev() {
            let var = noise.relay_variances[j - 1];
            for (k, row) in m.row_iter().enumerate() {
                p[k] += var * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            if j > 1 {
                m = mul_diag(&(&m * ch.hop(j)), &gains[j - 2]);
            }
        }
    }
    Ok(p)
}

/// Upper bound on the rank of `F2 H_eff F1` set by the per-hop bottlenecks.
pub fn chain_rank_bound(
    n_t: usize,
    n_r: usize,
    group_sizes: &[usize],
    hop_ranks: &[usize],
) -> usize {
    std::iter::once(n_t)
        .chain(std::iter::once(n_r))
        .chain(group_sizes.iter().copied())
        .chain(hop_ranks.iter().copied())
        .min()
        .unwrap_or(0)
}

/// Realized map `F2 H_eff F1`.
pub fn realized_map(params: &AirFcParams, ch: &ChannelSet) -> Result<CMat> {
    check_params(params, ch, None)?;
    Ok(&params.combiner * effective_channel(ch, &params.gains)? * &params.precoder)
}

pub(crate) fn check_params(params: &AirFcParams, ch: &ChannelSet, n: Option<usize>) -> Result<()> {
    let (pr, pc) = params.precoder.shape();
    let (cr, cc) = params.combiner.shape();
    if pr != ch.n_t() || cc != ch.n_r() || pc != cr {
        return Err(shape_err(format!(
            "precoder {:?} / combiner {:?} incompatible with N_t={}, N_r={}",
            (pr, pc),
            (cr, cc),
            ch.n_t(),
            ch.n_r()
        )));
    }
    if let Some(n) = n {
        if pc != n {
            return Err(shape_err(format!("layer width {pc} but target is {n}x{n}")));
        }
    }
    check_gains(ch, &params.gains)
}

/// `||F2 H_eff F1 - W||_F^2 + tr(F2 R_n^in F2^H)`.
pub fn objective(
    params: &AirFcParams,
    ch: &ChannelSet,
    target: &CMat,
    noise: &NoiseModel,
) -> Result<ObjectiveValue> {
    if target.nrows() != target.ncols() {
        return Err(shape_err(format!(
            "target must be square, got {:?}",
            target.shape()
        )));
    }
    check_params(params, ch, Some(target.nrows()))?;
    let m = realized_map(params, ch)?;
    let r = noise_covariance(ch, &params.gains, noise)?;
    let f2 = &params.combiner;
    Ok(ObjectiveValue::new(
        frob_sq(&(m - target)),
        trace_re(&(f2 * r * f2.adjoint())),
    ))
}

/// One noisy pass through the cascade: `y = F2 (H_eff F1 x + n_in)`.
///
/// Noise is drawn physically: fresh `CN(0, sigma_u,l^2 I)` at each group input
/// before amplification and `CN(0, sigma_c^2 I)` at the receiver.
pub fn simulate_forward<R: Rng + ?Sized>(
    params: &AirFcParams,
    ch: &ChannelSet,
    noise: &NoiseModel,
    x: &CVec,
    rng: &mut R,
) -> Result<CVec> {
    check_params(params, ch, Some(x.len()))?;
    noise.validate(ch.num_groups())?;
    let s = &params.precoder * x;
    let mut z = s.clone();
    for l in 1..=ch.num_groups() {
        let mut u = ch.hop(l) * &z;
        let var = noise.relay_variances[l - 1];
        if var > 0.0 {
            u += cn_vector(u.len(), rng) * crate::linalg::c(var.sqrt(), 0.0);
        }
        z = u.component_mul(&params.gains[l - 1]);
    }
    let mut r = ch.hop(ch.num_groups() + 1) * z;
    if let Some(h0) = &ch.direct {
        r += h0 * &s;
    }
    if noise.receiver_variance > 0.0 {
        r += cn_vector(r.len(), rng) * crate::linalg::c(noise.receiver_variance.sqrt(), 0.0);
    }
    Ok(&params.combiner * r)
}
