use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simcurv::lift::InitialValueFunction;
use simcurv::systems::{invariance_residual, invariant_family, SlowFastSystem, MODEL_NAMES};

fn default_model(name: &str) -> SlowFastSystem {
    SlowFastSystem::from_name(name, &Default::default()).unwrap()
}

/// Five-point central difference, accurate to O(h^4).
fn time_derivative(sys: &SlowFastSystem, c: &[f64], t: f64) -> Vec<f64> {
    let h = 1e-3;
    let at = |s: f64| sys.flow_solution(c, t + s * h).unwrap();
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    (0..c.len())
        .map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h))
        .collect()
}

#[test]
fn flow_solutions_solve_the_ode() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in ["davis_skodje", "kuehn_nonlinear", "ds_2_1", "model_3_2"] {
        let sys = default_model(name);
        for _ in 0..50 {
            let k = sys.slow_dim();
            let mut c: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            c.extend((0..sys.fast_dim()).map(|_| rng.random_range(-0.5..0.5)));
            let t = rng.random_range(0.0..1.0);
            let state = sys.flow_solution(&c, t).unwrap();
            let rhs = sys.rhs(&state).unwrap();
            let d = time_derivative(&sys, &c, t);
            for (a, b) in rhs.iter().zip(&d) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{name}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn flow_constants_invert_flow_solution() {
    let sys = default_model("model_3_2");
    let s0 = [0.3, 0.7, 0.2, 0.9, -0.1];
    let c = sys.flow_constants(&s0).unwrap();
    let back = sys.flow_solution(&c, 0.0).unwrap();
    for (a, b) in s0.iter().zip(&back) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn slow_manifolds_are_invariant() {
    for name in MODEL_NAMES {
        let sys = default_model(name);
        let h = InitialValueFunction::slow_manifold(&sys).unwrap();
        let k = sys.slow_dim();
        for i in 0..10 {
            let x: Vec<f64> = (0..k).map(|j| 0.1 + 0.2 * i as f64 + 0.05 * j as f64).collect();
            let r = invariance_residual(&sys, &h, &x).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-9), "{name} at {x:?}: {r:?}");
        }
    }
}

#[test]
fn finite_difference_invariance_residual_agrees() {
    let sys = default_model("kuehn_nonlinear");
    let c = 1.0 / (1.0 - 2.0 * 0.01);
    let h = InitialValueFunction::from_fn(1, 1, move |x| vec![c * x[0] * x[0]]);
    let r = invariance_residual(&sys, &h, &[0.8]).unwrap();
    assert!(r[0].abs() <= 1e-9);
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in MODEL_NAMES {
        let sys = default_model(name);
        let n = sys.dim();
        for _ in 0..20 {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.5)).collect();
            let j = sys.rhs_jacobian(&s).unwrap();
            for c in 0..n {
                let h = 1e-6 * s[c].abs().max(1.0);
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp[c] += h;
                sm[c] -= h;
                let (fp, fm) = (sys.rhs(&sp).unwrap(), sys.rhs(&sm).unwrap());
                for r in 0..n {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(
                        (fd - j[(r, c)]).abs() <= 1e-6 * j[(r, c)].abs().max(1.0),
                        "{name} J[{r},{c}]: {fd} vs {}",
                        j[(r, c)]
                    );
                }
            }
        }
    }
}

#[test]
fn family_with_zero_parameters_is_the_slow_manifold() {
    for name in ["davis_skodje", "kuehn_nonlinear", "ds_2_1", "model_3_2"] {
        let sys = default_model(name);
        let n_free = sys.model().family_params().len();
        let fam = invariant_family(&sys, &vec![0.0; n_free]).unwrap();
        let h = InitialValueFunction::slow_manifold(&sys).unwrap();
        let x: Vec<f64> = (0..sys.slow_dim()).map(|j| 0.4 + 0.3 * j as f64).collect();
        assert_eq!(fam.eval(&x), h.eval(&x), "{name}");
    }
}

#[test]
fn printed_family_values() {
    let ds = default_model("davis_skodje");
    assert_eq!(invariant_family(&ds, &[0.0]).unwrap().eval(&[1.0]), vec![0.5]);
    assert_eq!(invariant_family(&ds, &[1.0]).unwrap().eval(&[0.0]), vec![0.0]);
    let ku = default_model("kuehn_nonlinear");
    let v = invariant_family(&ku, &[0.0]).unwrap().eval(&[0.5])[0];
    assert!((v - 0.25 / 0.98).abs() < 1e-15);
}

#[test]
fn enzyme_without_family_is_unsupported() {
    let sys = default_model("enzyme_mmh");
    assert!(invariant_family(&sys, &[0.0]).is_err());
}

proptest! {
    #[test]
    fn family_members_are_invariant(c in -2.0f64..2.0, x in 0.05f64..2.0) {
        let ds = default_model("davis_skodje");
        let a = invariant_family(&ds, &[c]).unwrap();
        let r = invariance_residual(&ds, &a, &[x]).unwrap();
        prop_assert!(r[0].abs() <= 1e-9 * (1.0 + c.abs() * x.powf(3.5) * 3.5));
    }

    #[test]
    fn multi_slow_family_members_are_invariant(
        v in -1.0f64..1.0, w in -1.0f64..1.0, x1 in 0.05f64..1.5, x2 in 0.05f64..1.5, x3 in 0.05f64..1.5,
    ) {
        let m = default_model("model_3_2");
        let a = invariant_family(&m, &[v, w]).unwrap();
        let r = invariance_residual(&m, &a, &[x1, x2, x3]).unwrap();
        let scale = 1.0 + a.eval(&[x1, x2, x3]).iter().map(|y| y.abs()).sum::<f64>() * 400.0;
        prop_assert!(r.iter().all(|e| e.abs() <= 1e-12 * scale), "{:?}", r);
    }
}
