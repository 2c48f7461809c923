use simcurv::asymptotic::{asymptotic_coefficients, MAX_ORDER};
use simcurv::lift::InitialValueFunction;
use simcurv::systems::{invariance_residual, SlowFastSystem};

fn enzyme(eps: f64) -> SlowFastSystem {
    SlowFastSystem::enzyme_mmh(eps, 1.0, 0.5).unwrap()
}

#[test]
fn residual_scales_with_the_next_power_of_eps() {
    for k in 0..=2usize {
        let scaled: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&eps| {
                let sys = enzyme(eps);
                let a = InitialValueFunction::asymptotic(&sys, k).unwrap();
                invariance_residual(&sys, &a, &[0.7]).unwrap()[0].abs() / eps.powi(k as i32 + 1)
            })
            .collect();
        let (lo, hi) = scaled
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(lo > 0.0 && hi / lo <= 3.0, "k = {k}: {scaled:?}");
    }
}

#[test]
fn leading_coefficient_is_the_critical_manifold() {
    let sys = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
    let exp = asymptotic_coefficients(&sys, 3).unwrap();
    assert!((exp.coefficient(0, &[1.0]).unwrap()[0] - 0.4).abs() < 1e-15);
    for n in 0..=3 {
        assert_eq!(exp.coefficient(n, &[0.0]).unwrap()[0], 0.0);
    }
}

#[test]
fn order_cap_is_enforced() {
    let sys = enzyme(0.1);
    assert!(asymptotic_coefficients(&sys, MAX_ORDER).is_ok());
    assert!(asymptotic_coefficients(&sys, MAX_ORDER + 1).is_err());
}

#[test]
fn truncations_approach_the_invariant_graph() {
    let sys = enzyme(0.05);
    let mut last = f64::INFINITY;
    for k in 0..=5 {
        let a = InitialValueFunction::asymptotic(&sys, k).unwrap();
        let r = invariance_residual(&sys, &a, &[1.2]).unwrap()[0].abs();
        assert!(r < last, "order {k}: {r} !< {last}");
        last = r;
    }
}
