use proptest::prelude::*;
use tailmix::copula::{limiting_lambda, penultimate_lambda};
use tailmix::dist::chi_square_cdf;
use tailmix::mixing::mean_correlation;
use tailmix::sim::mc_tail_counts;
use tailmix::tails::*;
use tailmix::{CopulaFamily, Dof, MixingDistribution, SamplingMode, TailCurve};

fn t(nu: f64) -> CopulaFamily {
    CopulaFamily::student_t(nu).unwrap()
}

fn scar() -> MixingDistribution {
    MixingDistribution::scar_with_mean(0.5, 0.97, 0.2).unwrap()
}

#[test]
fn mixture_matches_monte_carlo() {
    let mu = MixingDistribution::uniform(0.0, 1.0).unwrap();
    let exact = mixture_penultimate_lambda(0.01, t(5.0), &mu).unwrap();
    let mc = mc_tail_counts(10_000_000, t(5.0), &mu, 0.01, 5, SamplingMode::Iid).unwrap();
    let se = mc.std_error_at(exact);
    assert!(
        (mc.value - exact).abs() <= 3.0 * se,
        "{} vs {exact} (se {se})",
        mc.value
    );
    let diag = mixture_diagonal(0.01, t(5.0), &mu).unwrap();
    assert_eq!(diag / 0.01, exact);
}

#[test]
fn degenerate_and_unit_cases() {
    let mu = MixingDistribution::point(0.3).unwrap();
    for fam in [CopulaFamily::gaussian(), t(4.0)] {
        for u in [1e-8, 0.01, 0.4] {
            assert_eq!(
                mixture_penultimate_lambda(u, fam, &mu).unwrap(),
                penultimate_lambda(u, 0.3, fam).unwrap()
            );
        }
        assert!((mixture_diagonal(1.0, fam, &scar()).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn scar_exceeds_constant_correlation() {
    let g = CopulaFamily::gaussian();
    let mixed = mixture_penultimate_lambda(1e-4, g, &scar()).unwrap();
    let fixed = penultimate_lambda(1e-4, 0.5, g).unwrap();
    assert!(mixed > fixed, "{mixed} vs {fixed}");
}

#[test]
fn limiting_lambda_of_mixtures() {
    assert_eq!(mixture_limiting_lambda(CopulaFamily::gaussian(), &scar()).unwrap(), 0.0);
    let uniform = MixingDistribution::uniform(0.0, 1.0).unwrap();
    assert_eq!(
        mixture_limiting_lambda(CopulaFamily::gaussian(), &uniform).unwrap(),
        0.0
    );
    let point = MixingDistribution::point(0.5).unwrap();
    for nu in 2..=30 {
        let fam = t(nu as f64);
        let p = mixture_limiting_lambda(fam, &point).unwrap();
        assert!((p - limiting_lambda(0.5, fam).unwrap()).abs() < 1e-15);
        assert!(mixture_limiting_lambda(fam, &uniform).unwrap() > p, "nu={nu}");
    }
}

#[test]
fn expansion_constant_examples() {
    let point = MixingDistribution::point(0.5).unwrap();
    let c = expansion_constants(Dof::Finite(2.0), &point).unwrap();
    assert!((c.a_nu - 1.0).abs() < 1e-15);
    assert!((c.b_nu - 0.5).abs() < 1e-15);
    assert!((c.ez_nu - 0.5).abs() < 1e-14);
    let c5 = expansion_constants(Dof::Finite(5.0), &point).unwrap();
    assert!(limiting_lambda(0.5, t(5.0)).unwrap() > limiting_lambda(0.5, t(7.0)).unwrap());
    assert!(c5.gamma > 0.0);
    assert!(expansion_constants(Dof::Infinite, &point).is_err());
    // Increasing in u, and the limit at u -> 0.
    let a = expansion_lambda(1e-6, &c5).unwrap();
    let b = expansion_lambda(1e-3, &c5).unwrap();
    assert!(b > a && a > c5.lambda_limit);
    assert!((expansion_lambda(1e-300, &c5).unwrap() - c5.lambda_limit).abs() < 1e-20);
}

fn laws() -> Vec<MixingDistribution> {
    vec![
        MixingDistribution::point(0.5).unwrap(),
        MixingDistribution::uniform(0.0, 1.0).unwrap(),
    ]
}

#[test]
fn gamma_matches_direct_slope() {
    // Direct difference of the quadrature λ(u) and λ, divided by u^{2/ν}.
    for (nu, u, tol) in [(2.0, 1e-5f64, 1e-3), (5.0, 1e-8, 2e-3)] {
        for mu in laws() {
            let c = expansion_constants(Dof::Finite(nu), &mu).unwrap();
            let lam_u = mixture_penultimate_lambda(u, t(nu), &mu).unwrap();
            let slope = (lam_u - c.lambda_limit) / u.powf(2.0 / nu);
            assert!(
                (slope / c.gamma - 1.0).abs() < tol,
                "nu={nu} {mu}: {slope} vs {}",
                c.gamma
            );
        }
    }
}

#[test]
fn residual_matches_direct_difference() {
    let u = 1e-4f64;
    for nu in [2.0, 5.0] {
        for mu in laws() {
            let c = expansion_constants(Dof::Finite(nu), &mu).unwrap();
            let s = u.powf(2.0 / nu);
            let direct = (mixture_penultimate_lambda(u, t(nu), &mu).unwrap() - c.lambda_limit - c.gamma * s) / s;
            let r = expansion_residual(u, Dof::Finite(nu), &mu).unwrap();
            assert!((r - direct).abs() < 1e-6, "nu={nu} {mu}: {r} vs {direct}");
        }
    }
}

#[test]
fn residual_shrinks() {
    for nu in [2.0, 5.0] {
        for mu in laws() {
            let c = expansion_constants(Dof::Finite(nu), &mu).unwrap();
            let r: Vec<f64> = [1e-4, 1e-6, 1e-8]
                .iter()
                .map(|&u| expansion_residual(u, Dof::Finite(nu), &mu).unwrap().abs())
                .collect();
            assert!(r[1] < r[0] && r[2] < r[1], "nu={nu} {mu}: {r:?}");
            assert!(r[2] <= 0.05 * c.gamma);
        }
    }
}

#[test]
fn expansion_agrees_within_ten_percent() {
    for nu in [1.0, 2.0, 3.0, 5.0] {
        for mu in laws() {
            let c = expansion_constants(Dof::Finite(nu), &mu).unwrap();
            for u in [1e-6, 1e-8, 1e-10] {
                let exact = mixture_penultimate_lambda(u, t(nu), &mu).unwrap();
                let approx = expansion_lambda(u, &c).unwrap();
                assert!((approx / exact - 1.0).abs() <= 0.1, "nu={nu} {mu} u={u}");
            }
        }
    }
}

#[test]
fn inverse_chi_tail_bound() {
    for nu in [1.0, 2.0, 5.0, 10.0] {
        for z in [2.0, 5.0, 10.0, 50.0] {
            let r = inv_chi_tail(z, Dof::Finite(nu)).unwrap();
            let oracle = chi_square_cdf(nu / (z * z), Dof::Finite(nu)).unwrap();
            assert_eq!(r.exact, oracle);
            let delta = r.exact - r.expansion;
            assert!(
                delta >= 0.0 && delta <= r.delta_bound,
                "nu={nu} z={z}: {delta} vs {}",
                r.delta_bound
            );
        }
        let far = inv_chi_tail(1e4, Dof::Finite(nu)).unwrap();
        let lead = tailmix::tails::expansion_constants(Dof::Finite(nu), &MixingDistribution::point(0.0).unwrap())
            .unwrap()
            .a_nu
            * 1e4f64.powf(-nu);
        assert!((far.exact / lead - 1.0).abs() < 1e-6);
    }
    let r = inv_chi_tail(10.0, Dof::Finite(2.0)).unwrap();
    assert!((r.exact / -(-0.01f64).exp_m1() - 1.0).abs() < 1e-13);
    assert!(inv_chi_tail(0.0, Dof::Finite(2.0)).is_err());
    assert!(inv_chi_tail(1.0, Dof::Infinite).is_err());
}

#[test]
fn near_asymptotic_dependence() {
    let g = CopulaFamily::gaussian();
    let lam = |u: f64| mixture_penultimate_lambda(u, g, &scar()).unwrap();
    // u^{-ε} λ(u) turns upward once the local log-slope of λ drops below ε.
    let vals: Vec<f64> = [1e-8, 1e-10, 1e-12, 1e-14]
        .iter()
        .map(|&u: &f64| u.powf(-0.05) * lam(u))
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    let slopes: Vec<f64> = (4..=14)
        .step_by(2)
        .map(|k| {
            let u = 10f64.powi(-k);
            (lam(u).ln() - lam(u / 10.0).ln()) / std::f64::consts::LN_10
        })
        .collect();
    assert!(slopes.windows(2).all(|w| w[1] < w[0]), "{slopes:?}");
    assert!(*slopes.last().unwrap() < 0.05);
}

#[test]
fn exact_power_law_regression() {
    let grid = log_grid(1e-1, 1e-10, 50).unwrap();
    let curve = TailCurve::new(grid.iter().map(|&u| (u, u.powf(1.0 / 3.0))).collect()).unwrap();
    let e = estimate_eta(&curve, 1e-6, 1e-3).unwrap();
    assert!((e.eta - 0.75).abs() < 1e-10);
    assert!((e.chi_bar - 0.5).abs() < 1e-10);
    assert_eq!(e.points, 151);
    assert!(estimate_eta(&curve, 1e-6, 1.2e-6).is_err());
}

#[test]
fn gaussian_point_mass_eta() {
    let grid = log_grid(1e-3, 1e-6, 50).unwrap();
    let curve = tail_curve(
        CopulaFamily::gaussian(),
        &MixingDistribution::point(0.5).unwrap(),
        &grid,
    )
    .unwrap();
    let e = estimate_eta(&curve, 1e-6, 1e-3).unwrap();
    assert!((e.eta - 0.75).abs() <= 0.02, "{}", e.eta);
}

#[test]
fn independence_curve_is_identity() {
    let grid = log_grid(1e-1, 1e-10, 10).unwrap();
    let curve = tail_curve(
        CopulaFamily::gaussian(),
        &MixingDistribution::point(0.0).unwrap(),
        &grid,
    )
    .unwrap();
    for &(u, l) in curve.points() {
        assert!((l / u - 1.0).abs() < 1e-10, "u={u} l={l}");
    }
}

#[test]
fn curve_is_thread_count_invariant() {
    let grid = log_grid(1e-1, 1e-8, 10).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| tail_curve(t(3.0), &scar(), &grid).unwrap())
    };
    let (a, b) = (run(1), run(4));
    let bits = |c: &TailCurve| c.points().iter().map(|p| p.1.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let mut out = Vec::new();
    a.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("u,lambda_u\n"));
    assert_eq!(text.lines().count(), grid.len() + 1);
}

#[test]
fn grid_and_window_shapes() {
    let g = log_grid(0.1, 1e-10, 50).unwrap();
    assert_eq!(g.len(), 451);
    assert_eq!(g[0], 0.1);
    assert_eq!(*g.last().unwrap(), 1e-10);
    let w = eta_windows(3.0, 10.0, 0.01).unwrap();
    assert_eq!(w.len(), 701);
    assert_eq!(w[0], (1e-6, 1e-3));
    assert!(log_grid(1e-3, 1e-2, 10).is_err());
}

fn jensen_holds(u: f64, fam: CopulaFamily, mu: &MixingDistribution) -> bool {
    let mixed = mixture_penultimate_lambda(u, fam, mu).unwrap();
    let fixed = penultimate_lambda(u, mean_correlation(mu), fam).unwrap();
    mixed >= fixed - 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jensen_bound_nonnegative_support(
        log_u in -10.0f64..-std::f64::consts::LOG10_2,
        lo in 0.0f64..0.9,
        width in 0.01f64..1.0,
        nu in prop_oneof![Just(f64::INFINITY), 1.0f64..30.0],
    ) {
        let fam = if nu.is_finite() { t(nu) } else { CopulaFamily::gaussian() };
        let mu = MixingDistribution::uniform(lo, (lo + width).min(1.0)).unwrap();
        prop_assert!(jensen_holds(10f64.powf(log_u), fam, &mu));
    }

    #[test]
    fn curve_values_in_unit_interval(log_u in -10.0f64..0.0, nu in 1.0f64..30.0) {
        let u = 10f64.powf(log_u);
        for mu in [scar(), MixingDistribution::uniform(-1.0, 1.0).unwrap()] {
            let l = mixture_penultimate_lambda(u, t(nu), &mu).unwrap();
            prop_assert!((0.0..=1.0).contains(&l));
        }
    }
}
