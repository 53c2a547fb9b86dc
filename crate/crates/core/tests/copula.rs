use proptest::prelude::*;
use tailmix::copula::{diagonal, limiting_lambda, penultimate_lambda};
use tailmix::sim::mc_tail_counts;
use tailmix::{CopulaFamily, MixingDistribution, SamplingMode};

fn families() -> Vec<CopulaFamily> {
    vec![
        CopulaFamily::gaussian(),
        CopulaFamily::student_t(1.0).unwrap(),
        CopulaFamily::student_t(3.0).unwrap(),
        CopulaFamily::student_t(5.0).unwrap(),
        CopulaFamily::student_t(20.0).unwrap(),
    ]
}

fn min_second_difference(u: f64, fam: CopulaFamily, grid: &[f64]) -> f64 {
    let vals: Vec<f64> = grid.iter().map(|&r| penultimate_lambda(u, r, fam).unwrap()).collect();
    vals.windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn convex_on_unit_interval() {
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    for u in [0.5, 0.1, 0.01, 1e-4] {
        for fam in families() {
            let m = min_second_difference(u, fam, &grid);
            assert!(m >= -1e-8, "u={u} {fam}: {m}");
        }
    }
}

#[test]
fn convex_on_full_range_for_small_u() {
    let grid: Vec<f64> = (0..=198).map(|k| -0.99 + k as f64 / 100.0).collect();
    for fam in [CopulaFamily::student_t(3.0).unwrap(), CopulaFamily::gaussian()] {
        let m = min_second_difference(1e-4, fam, &grid);
        assert!(m >= -1e-8, "{fam}: {m}");
    }
}

#[test]
fn limiting_closed_forms() {
    for nu in [0.5, 1.0, 4.0, 100.0] {
        assert_eq!(limiting_lambda(1.0, CopulaFamily::student_t(nu).unwrap()).unwrap(), 1.0);
    }
    // 2·t₂(−√2) from the closed-form t₂ CDF.
    let x = -2f64.sqrt();
    let oracle = 2.0 * (0.5 + x / (2.0 * 2f64.sqrt() * (1.0 + x * x / 2.0).sqrt()));
    let v = limiting_lambda(0.0, CopulaFamily::student_t(1.0).unwrap()).unwrap();
    assert!((v - 0.29289).abs() < 1e-5);
    assert!((v - oracle).abs() < 1e-14);
    assert_eq!(limiting_lambda(0.5, CopulaFamily::gaussian()).unwrap(), 0.0);
    assert_eq!(limiting_lambda(1.0, CopulaFamily::gaussian()).unwrap(), 1.0);
    assert_eq!(
        limiting_lambda(-1.0, CopulaFamily::student_t(2.0).unwrap()).unwrap(),
        0.0
    );
}

#[test]
fn limiting_monotone_in_rho_and_nu() {
    let nus = [0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0];
    for k in 0..=40 {
        let rho = -0.99 + k as f64 * 0.0495;
        let vals: Vec<f64> = nus
            .iter()
            .map(|&nu| limiting_lambda(rho, CopulaFamily::student_t(nu).unwrap()).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]), "rho={rho}: {vals:?}");
    }
    for nu in nus {
        let fam = CopulaFamily::student_t(nu).unwrap();
        let vals: Vec<f64> = (0..=40)
            .map(|k| limiting_lambda(-0.99 + k as f64 * 0.0495, fam).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]), "nu={nu}");
    }
}

#[test]
fn fixed_points() {
    for fam in families() {
        for u in [1e-6, 0.01, 0.3, 0.9] {
            assert_eq!(diagonal(u, 1.0, fam).unwrap(), u);
            assert_eq!(diagonal(u, -1.0, fam).unwrap(), (2.0 * u - 1.0).max(0.0));
        }
        assert!((penultimate_lambda(1.0, 0.3, fam).unwrap() - 1.0).abs() < 1e-15);
        assert!(diagonal(0.0, 0.3, fam).is_err());
        assert!(diagonal(1.5, 0.3, fam).is_err());
    }
    let g = diagonal(0.01, 0.0, CopulaFamily::gaussian()).unwrap();
    assert!((g - 1e-4).abs() < 1e-16);
}

#[test]
fn penultimate_approaches_limit() {
    for nu in [1.0, 2.0, 3.0, 5.0] {
        let fam = CopulaFamily::student_t(nu).unwrap();
        for rho in [0.0, 0.5, 0.9] {
            let d = penultimate_lambda(1e-10, rho, fam).unwrap() - limiting_lambda(rho, fam).unwrap();
            assert!(d.abs() <= 5e-2, "nu={nu} rho={rho}: {d}");
        }
    }
}

#[test]
fn penultimate_matches_monte_carlo() {
    let fam = CopulaFamily::student_t(5.0).unwrap();
    let mu = MixingDistribution::point(0.5).unwrap();
    let mc = mc_tail_counts(10_000_000, fam, &mu, 0.01, 7, SamplingMode::Iid).unwrap();
    let exact = penultimate_lambda(0.01, 0.5, fam).unwrap();
    let se = mc.std_error_at(exact);
    assert!(
        (mc.value - exact).abs() <= 3.0 * se,
        "{} vs {exact} (se {se})",
        mc.value
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn penultimate_in_unit_interval(
        log_u in -10.0f64..0.0,
        rho in -1.0f64..=1.0,
        nu in prop_oneof![Just(f64::INFINITY), 0.5f64..40.0],
    ) {
        let fam = if nu.is_finite() { CopulaFamily::student_t(nu).unwrap() } else { CopulaFamily::gaussian() };
        let v = penultimate_lambda(10f64.powf(log_u), rho, fam).unwrap();
        prop_assert!((0.0..=1.0).contains(&v), "{v}");
    }

    #[test]
    fn diagonal_within_frechet_bounds(u in 1e-6f64..1.0, rho in -0.999f64..0.999, nu in 1.0f64..20.0) {
        let c = diagonal(u, rho, CopulaFamily::student_t(nu).unwrap()).unwrap();
        prop_assert!(c >= (2.0 * u - 1.0).max(0.0) - 1e-15);
        prop_assert!(c <= u + 1e-15);
    }
}
