//! Each block update is a minimizer of its own block: random perturbations
//! never do better, and re-solving right after the update changes nothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airfc::channel::ChannelSet;
use airfc::linalg::{c, cn_matrix, cn_vector, frob_sq, CMat, CVec};
use airfc::random::{random_chain, random_matrix, random_params};
use airfc::solver::*;
use airfc::system::{
    effective_channel, noise_covariance, objective, realized_map, AirFcParams, NoiseModel,
};

const SEEDS: u64 = 20;
const PERTURBATIONS: usize = 500;

struct Instance {
    ch: ChannelSet,
    w: CMat,
    params: AirFcParams,
    noise: NoiseModel,
    p_max: f64,
}

fn instance(seed: u64) -> Instance {
    let ch = random_chain(&[3, 3], 4, seed % 2 == 0, 900 + seed);
    let params = random_params(&ch, 4, 1900 + seed);
    // alternate between a budget that binds and one that does not
    let p_max = if seed % 3 == 0 { 0.2 } else { 50.0 };
    Instance {
        w: random_matrix(4, 4, 2900 + seed),
        params,
        noise: NoiseModel::uniform(2, 0.1),
        ch,
        p_max,
    }
}

fn total(inst: &Instance, params: &AirFcParams) -> f64 {
    objective(params, &inst.ch, &inst.w, &inst.noise)
        .unwrap()
        .total
}

/// Perturbation scale between 1e-4 and 1 relative to `reference`.
fn step<R: Rng>(rng: &mut R, reference: f64) -> f64 {
    reference.max(1e-12) * 10f64.powf(rng.random_range(-4.0..0.0))
}

#[test]
fn precoder_update_beats_feasible_perturbations() {
    for seed in 0..SEEDS {
        let inst = instance(seed);
        let xi = &inst.params.combiner * effective_channel(&inst.ch, &inst.params.gains).unwrap();
        let f1 = update_f1(&xi, &inst.w, inst.p_max, &AoConfig::default())
            .unwrap()
            .precoder;
        assert!(frob_sq(&f1) <= inst.p_max * (1.0 + 1e-9));
        let best = AirFcParams {
            precoder: f1.clone(),
            ..inst.params.clone()
        };
        let j0 = total(&inst, &best);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = frob_sq(&f1).sqrt();
        for _ in 0..PERTURBATIONS {
            let s = step(&mut rng, norm);
            let mut f = &f1 + cn_matrix(4, 4, &mut rng) * c(s / 4.0, 0.0);
            let pw = frob_sq(&f);
            if pw > inst.p_max {
                f *= c((inst.p_max / pw).sqrt(), 0.0);
            }
            let j = total(
                &inst,
                &AirFcParams {
                    precoder: f,
                    ..best.clone()
                },
            );
            assert!(j >= j0 * (1.0 - 1e-9), "seed {seed}: perturbed {j} < {j0}");
        }
        // re-solving from the updated point reproduces it
        let again = update_f1(&xi, &inst.w, inst.p_max, &AoConfig::default())
            .unwrap()
            .precoder;
        assert!(frob_sq(&(&again - &f1)) <= 1e-16 * frob_sq(&f1).max(1e-300));
    }
}

#[test]
fn combiner_update_beats_perturbations() {
    for seed in 0..SEEDS {
        let inst = instance(seed);
        let u = effective_channel(&inst.ch, &inst.params.gains).unwrap() * &inst.params.precoder;
        let r = noise_covariance(&inst.ch, &inst.params.gains, &inst.noise).unwrap();
        let f2 = update_f2(&u, &r, &inst.w).unwrap().combiner;
        let best = AirFcParams {
            combiner: f2.clone(),
            ..inst.params.clone()
        };
        let j0 = total(&inst, &best);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let norm = frob_sq(&f2).sqrt();
        for _ in 0..PERTURBATIONS {
            let s = step(&mut rng, norm);
            let f = &f2 + cn_matrix(4, 4, &mut rng) * c(s / 4.0, 0.0);
            let j = total(
                &inst,
                &AirFcParams {
                    combiner: f,
                    ..best.clone()
                },
            );
            assert!(j >= j0 * (1.0 - 1e-12), "seed {seed}: perturbed {j} < {j0}");
        }
    }
}

fn solve_group(
    inst: &Instance,
    params: &AirFcParams,
    l: usize,
    mode: RegularizerMode,
) -> (CVec, BlockFold, CMat) {
    let fold = fold_chain(&inst.ch, params, l).unwrap();
    let realized = realized_map(params, &inst.ch).unwrap();
    let residual = residual_target(&inst.w, &realized, &fold, &params.gains[l - 1]).unwrap();
    let reg = regularizer_matrix(mode, &fold, &inst.ch, &params.gains, &inst.noise, l, 1e-3);
    let a = solve_relay_gains(&fold, &residual, &reg).unwrap().gains;
    (a, fold, reg)
}

#[test]
fn exact_gain_update_minimizes_the_true_objective() {
    for seed in 0..SEEDS {
        let inst = instance(seed);
        for l in 1..=2 {
            let (a, _, _) = solve_group(&inst, &inst.params, l, RegularizerMode::Exact);
            let mut best = inst.params.clone();
            best.gains[l - 1] = a.clone();
            let j0 = total(&inst, &best);
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let norm = a.norm();
            for _ in 0..PERTURBATIONS {
                let s = step(&mut rng, norm);
                let mut p = best.clone();
                p.gains[l - 1] = &a + cn_vector(3, &mut rng) * c(s / 3f64.sqrt(), 0.0);
                let j = total(&inst, &p);
                assert!(
                    j >= j0 * (1.0 - 1e-10),
                    "seed {seed}, group {l}: perturbed {j} < {j0}"
                );
            }
            let (again, _, _) = solve_group(&inst, &best, l, RegularizerMode::Exact);
            assert!(
                (&again - &a).norm() <= 1e-8 * a.norm(),
                "seed {seed}, group {l}: not a fixed point"
            );
        }
    }
}

#[test]
fn noise_aware_gain_update_minimizes_its_surrogate() {
    for seed in 0..SEEDS {
        let inst = instance(seed);
        for l in 1..=2 {
            let (a, fold, reg) = solve_group(&inst, &inst.params, l, RegularizerMode::NoiseAware);
            let realized = realized_map(&inst.params, &inst.ch).unwrap();
            let residual =
                residual_target(&inst.w, &realized, &fold, &inst.params.gains[l - 1]).unwrap();
            let surrogate = |x: &CVec| {
                frob_sq(&(fold.apply(x) - &residual)) + (x.adjoint() * &reg * x)[(0, 0)].re
            };
            let j0 = surrogate(&a);
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            for _ in 0..PERTURBATIONS {
                let s = step(&mut rng, a.norm());
                let x = &a + cn_vector(3, &mut rng) * c(s / 3f64.sqrt(), 0.0);
                assert!(
                    surrogate(&x) >= j0 * (1.0 - 1e-12),
                    "seed {seed}, group {l}"
                );
            }
            let mut next = inst.params.clone();
            next.gains[l - 1] = a.clone();
            let (again, _, _) = solve_group(&inst, &next, l, RegularizerMode::NoiseAware);
            assert!(
                (&again - &a).norm() <= 1e-8 * a.norm(),
                "seed {seed}, group {l}: not a fixed point"
            );
        }
    }
}
