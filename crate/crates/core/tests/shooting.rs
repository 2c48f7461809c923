use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simcurv::bvp::{check_uniqueness, solve_bvp, BvpConfig, BvpProblem};
use simcurv::lift::InitialValueFunction;
use simcurv::systems::SlowFastSystem;

/// Graph of the Davis-Skodje trajectories launched from `y(0) = 1 - x(0)/2`.
fn ds_linear_lift_graph(t: f64, x: f64) -> f64 {
    let g = 3.5;
    let u = x * t.exp();
    let a = 1.0 - u / 2.0;
    (a - u / (u + 1.0)) * (-g * t).exp() + x / (x + 1.0)
}

#[test]
fn shooting_matches_closed_form_graph() {
    let sys = SlowFastSystem::davis_skodje(3.5).unwrap();
    let a = InitialValueFunction::polynomial(&[1.0, -0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let t: f64 = rng.random_range(0.0..2.0);
        let x: f64 = rng.random_range(0.0..2.0);
        let sol = solve_bvp(
            &BvpProblem {
                system: &sys,
                t_star: t,
                x_star: vec![x],
                a: &a,
            },
            &BvpConfig::default(),
        )
        .unwrap();
        assert!(sol.residual_norm <= 1e-10);
        let exact = ds_linear_lift_graph(t, x);
        assert!((sol.y_star[0] - exact).abs() <= 1e-8, "({t}, {x}): {} vs {exact}", sol.y_star[0]);
        assert_eq!(sol.trajectory.first()[1], a.eval(&sol.xi0)[0]);
    }
}

#[test]
fn invariant_graphs_round_trip() {
    for sys in [
        SlowFastSystem::davis_skodje(3.5).unwrap(),
        SlowFastSystem::kuehn_nonlinear(0.01).unwrap(),
        SlowFastSystem::ds_2_1(3.5).unwrap(),
        SlowFastSystem::model_3_2(0.01).unwrap(),
    ] {
        let h = InitialValueFunction::slow_manifold(&sys).unwrap();
        let x: Vec<f64> = (0..sys.slow_dim()).map(|j| 0.6 + 0.2 * j as f64).collect();
        for t in [0.5, 1.0, 2.0] {
            let sol = solve_bvp(
                &BvpProblem {
                    system: &sys,
                    t_star: t,
                    x_star: x.clone(),
                    a: &h,
                },
                &BvpConfig::default(),
            )
            .unwrap();
            for (y, e) in sol.y_star.iter().zip(h.eval(&x)) {
                assert!((y - e).abs() <= 1e-7, "{} t = {t}: {y} vs {e}", sys.name());
            }
        }
    }
}

#[test]
fn initial_guesses_agree_on_enzyme_configuration() {
    let sys = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
    let a = InitialValueFunction::constant(1, &[0.5]);
    let problem = BvpProblem {
        system: &sys,
        t_star: 1.0,
        x_star: vec![1.0],
        a: &a,
    };
    let report = check_uniqueness(&problem, &BvpConfig::default()).unwrap();
    assert!(report.max_difference <= 1e-8);
    assert!(!report.multiple_roots_suspected);
    let perturbed = solve_bvp(
        &problem,
        &BvpConfig {
            initial_guess: Some(vec![1.2]),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((perturbed.xi0[0] - report.xi_from_target[0]).abs() <= 1e-8);
}

#[test]
fn enzyme_constant_lift_regression() {
    let sys = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
    let a = InitialValueFunction::constant(1, &[0.5]);
    let sol = solve_bvp(
        &BvpProblem {
            system: &sys,
            t_star: 1.0,
            x_star: vec![1.0],
            a: &a,
        },
        &BvpConfig::default(),
    )
    .unwrap();
    // locked after cross-checking against two further initial guesses
    assert!((sol.xi0[0] - 1.001_267_364_108_19).abs() < 1e-9);
    assert!((sol.y_star[0] - 0.408_314_017_416_52).abs() < 1e-9);
}
