use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simcurv::criteria::{
    brent_minimize, closed_form_minimizer, closed_form_second_derivative, eval_criterion, minimize_criterion,
    sufficient_characterization_check, sweep, Criterion, CriterionSpec,
};
use simcurv::grid::GridSpec;
use simcurv::systems::SlowFastSystem;

fn ds(gamma: f64) -> SlowFastSystem {
    SlowFastSystem::davis_skodje(gamma).unwrap()
}

fn kinds(gamma: f64, u: f64) -> [Criterion; 3] {
    [
        Criterion::F1,
        Criterion::F2,
        Criterion::F3 {
            k1: 1.0,
            k2: gamma / (u + 1.0),
        },
    ]
}

#[test]
fn criteria_are_quadratic_in_c() {
    for u in [0.5, 1.0, 2.0] {
        for kind in kinds(3.5, u) {
            let spec = CriterionSpec::new(ds(3.5), kind, u).unwrap();
            let f = |c| eval_criterion(&spec, c).unwrap();
            let (fm, f0, fp) = (f(-1.0), f(0.0), f(1.0));
            let a2 = 0.5 * (fp + fm) - f0;
            let a1 = 0.5 * (fp - fm);
            let c = 0.37;
            let pred = a2 * c * c + a1 * c + f0;
            assert!((pred - f(c)).abs() <= 1e-12 * f0.abs().max(a2.abs()).max(1.0), "{kind:?} u = {u}");
        }
    }
}

#[test]
fn second_derivatives_match_closed_forms() {
    for u in [0.5, 1.0, 2.0] {
        for kind in kinds(3.5, u) {
            let spec = CriterionSpec::new(ds(3.5), kind, u).unwrap();
            let m = minimize_criterion(&spec).unwrap();
            let exact = closed_form_second_derivative(&spec);
            assert!(exact > 0.0);
            assert!((m.second_derivative - exact).abs() <= 1e-10 * exact, "{kind:?} u = {u}");
        }
    }
}

#[test]
fn energy_second_derivative_matches_reduced_expression() {
    // with k2 = gamma/(u+1): 2 gamma u^(2 gamma) (gamma u + gamma - 1)/(u + 1)
    let g = 3.5;
    for u in [0.5, 1.0, 2.0] {
        let spec = CriterionSpec::new(ds(g), kinds(g, u)[2], u).unwrap();
        let reduced = 2.0 * g * u.powf(2.0 * g) * (g * u + g - 1.0) / (u + 1.0);
        assert!((closed_form_second_derivative(&spec) - reduced).abs() <= 1e-12 * reduced);
    }
}

#[test]
fn energy_stationary_point_matches_rational_expression() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let g = rng.random_range(1.5..4.0);
        let u: f64 = rng.random_range(0.3..1.5);
        let k1 = rng.random_range(0.5..2.0);
        let k2 = rng.random_range(0.0..0.4) * k1;
        let spec = CriterionSpec::new(ds(g), Criterion::F3 { k1, k2 }, u).unwrap();
        // expanded numerator and denominator as printed
        let num = -(g * k1 - u * k2 - k2) * u;
        let den = (g * g * u * u * k1 + 2.0 * g * g * u * k1 + g * g * k1 - u * u * k2 - 2.0 * u * k2 - k2) * u.powf(g);
        let printed = num / den;
        let (c, _) = brent_minimize(|c| eval_criterion(&spec, c).unwrap(), -10.0, 10.0, 1e-14, 500);
        let scale = printed.abs().max(1.0);
        assert!((closed_form_minimizer(&spec) - printed).abs() <= 1e-12 * scale);
        let m = minimize_criterion(&spec);
        if printed.abs() < 1.0 {
            let m = m.unwrap();
            assert!((m.c_numeric - printed).abs() <= 1e-10 * scale, "{} vs {printed}", m.c_numeric);
        }
        assert!((c - printed).abs() <= 1e-7 * scale, "{c} vs {printed}");
    }
}

#[test]
fn printed_minimizers() {
    let expect = [(0.0028, 0.0032), (0.00051, 0.00056)];
    for (kind, (lo, hi)) in kinds(3.5, 2.0).iter().zip(expect) {
        let m = minimize_criterion(&CriterionSpec::new(ds(3.5), *kind, 2.0).unwrap()).unwrap();
        assert!(m.c_closed >= lo && m.c_closed <= hi, "{kind:?}: {}", m.c_closed);
        assert!((m.c_closed - m.c_numeric).abs() <= 1e-8);
    }
    let m = minimize_criterion(&CriterionSpec::new(ds(3.5), kinds(3.5, 2.0)[2], 2.0).unwrap()).unwrap();
    assert!(m.c_closed.abs() <= 1e-10 && m.c_numeric.abs() <= 1e-10);
}

#[test]
fn characterization_holds_on_davis_skodje() {
    let grid = GridSpec::uniform([0.0, 2.0], 5, &[[0.0, 2.0]], &[5]).unwrap();
    let report = sufficient_characterization_check(&ds(3.5), &grid, &[0.0, 0.5, 1.0, 2.0, 3.0], &[0.05, -0.5, 2.0], 1e-7)
        .unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.not_worse_at.is_empty());
}

#[test]
fn sweep_has_requested_shape() {
    let rows = sweep(&ds(3.5), 2.0, 1.0, 3.5 / 3.0, [-0.05, 0.05], 201).unwrap();
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0].c, -0.05);
    assert_eq!(rows[200].c, 0.05);
    assert!(rows[100].c.abs() < 1e-15);
    let best = rows.iter().min_by(|a, b| a.f3.total_cmp(&b.f3)).unwrap();
    assert!(best.c.abs() < 1e-15);
}
