use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use airfc::channel::*;
use airfc::linalg::C64;

fn link(kind: LinkKind, kappa: f64) -> LinkParams {
    LinkParams {
        kind,
        pathloss_model: UMI_STREET_CANYON.into(),
        rician_kappa: kappa,
        los_state: LosState::Nlos,
        endpoint_heights: [10.0, 1.5],
    }
}

fn moments(link: &LinkParams, draws: usize, seed: u64) -> (C64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = C64::new(0.0, 0.0);
    let mut power = 0.0;
    for _ in 0..draws {
        let h = draw_small_scale(link, 1, 1, &mut rng)[(0, 0)];
        mean += h;
        power += h.norm_sqr();
    }
    (mean / draws as f64, power / draws as f64)
}

#[test]
fn rayleigh_fading_is_zero_mean_unit_power() {
    let (mean, power) = moments(&link(LinkKind::RelayRelay, 1.0), 100_000, 1);
    // standard errors are about 0.003 for both
    assert!(mean.norm() < 0.015, "mean {mean}");
    assert!((power - 1.0).abs() < 0.02, "power {power}");
}

#[test]
fn rician_direct_link_has_los_mean() {
    for kappa in [0.5, 1.0, 4.0] {
        let (mean, power) = moments(&link(LinkKind::BsRx, kappa), 100_000, 2);
        let expected = (kappa / (1.0 + kappa)).sqrt();
        assert!(
            (mean.re - expected).abs() < 0.015 && mean.im.abs() < 0.015,
            "kappa {kappa}: mean {mean}"
        );
        assert!((power - 1.0).abs() < 0.02, "kappa {kappa}: power {power}");
    }
}

#[test]
fn infinite_kappa_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = draw_small_scale(&link(LinkKind::BsRx, f64::INFINITY), 3, 2, &mut rng);
    assert!(h.iter().all(|z| *z == C64::new(1.0, 0.0)));
}

#[test]
fn los_probability_matches_closed_form() {
    assert_eq!(los_probability(0.0), 1.0);
    assert_eq!(los_probability(18.0), 1.0);
    for d in [20.0, 50.0, 100.0, 300.0] {
        let e = (-d / 36.0f64).exp();
        let expected = 18.0 / d * (1.0 - e) + e;
        assert!((los_probability(d) - expected).abs() < 1e-15);
    }
    assert!(los_probability(100.0) > los_probability(200.0));
}

#[test]
fn thermal_noise_over_300_mhz() {
    // -174 dBm/Hz over 300 MHz: 10^(-20.4) W/Hz * 3e8 Hz
    let expected = 10f64.powf(-20.4) * 3e8;
    assert!((thermal_noise_watts(-174.0, 300e6) / expected - 1.0).abs() < 1e-12);
    assert!((expected - 1.194e-12).abs() < 1e-15);
}

#[test]
fn sidelink_pathloss_matches_log_distance_formula() {
    let table = PathlossTable::default();
    let (d, f) = (80.0, 28e9);
    let los = table
        .pathloss_db(SIDELINK_URBAN, true, d, f, [1.5, 1.5])
        .unwrap();
    assert!((los - (38.77 + 16.7 * d.log10() + 18.2 * 28f64.log10())).abs() < 1e-12);
    let nlos = table
        .pathloss_db(SIDELINK_URBAN, false, d, f, [1.5, 1.5])
        .unwrap();
    assert!((nlos - (36.85 + 30.0 * d.log10() + 18.9 * 28f64.log10())).abs() < 1e-12);
}

#[test]
fn umi_nlos_is_never_better_than_los() {
    let table = PathlossTable::default();
    for d in [5.0, 20.0, 60.0, 150.0, 400.0, 1000.0] {
        let los = table
            .pathloss_db(UMI_STREET_CANYON, true, d, 28e9, [10.0, 1.5])
            .unwrap();
        let nlos = table
            .pathloss_db(UMI_STREET_CANYON, false, d, 28e9, [10.0, 1.5])
            .unwrap();
        assert!(nlos >= los, "d = {d}: {nlos} < {los}");
    }
}

#[test]
fn umi_los_breakpoint_switches_to_steeper_slope() {
    let table = PathlossTable::default();
    let (h_bs, h_ut, f) = (10.0, 1.5, 28e9);
    let breakpoint = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * f / 299_792_458.0;
    let near = |d: f64| 32.4 + 21.0 * d.log10() + 20.0 * 28f64.log10();
    let d1 = breakpoint * 0.5;
    assert!(
        (table
            .pathloss_db(UMI_STREET_CANYON, true, d1, f, [h_bs, h_ut])
            .unwrap()
            - near(d1))
        .abs()
            < 1e-12
    );
    let d2 = breakpoint * 2.0;
    let far = 32.4 + 40.0 * d2.log10() + 20.0 * 28f64.log10()
        - 9.5 * (breakpoint * breakpoint + (h_bs - h_ut) * (h_bs - h_ut)).log10();
    assert!(
        (table
            .pathloss_db(UMI_STREET_CANYON, true, d2, f, [h_bs, h_ut])
            .unwrap()
            - far)
            .abs()
            < 1e-12
    );
}
