//! Single shooting for the lifted boundary value problem
//!
//! ```text
//! (x, y)' = F(x, y),   y(0) = a(x(0)),   x(t*) = x*
//! ```
//!
//! whose solution gives the graph value `y* = p(t*, x*; a)`. The unknown is
//! the slow initial state `xi = x(0)`; the fast initial state follows from
//! the lift, so only the slow block enters Newton's method.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::lift::InitialValueFunction;
use crate::ode::{integrate_fn, integrate_on_mesh, IntegratorConfig, Trajectory};
use crate::systems::SlowFastSystem;

#[derive(Debug, Clone)]
pub struct BvpProblem<'a> {
    pub system: &'a SlowFastSystem,
    pub t_star: f64,
    pub x_star: Vec<f64>,
    pub a: &'a InitialValueFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpConfig {
    pub integrator: IntegratorConfig,
    /// Convergence threshold on `|x(t*) - x*|_inf`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative forward-difference step for the shooting Jacobian.
    pub fd_step: f64,
    /// Overrides the default backward-integrated initial guess.
    pub initial_guess: Option<Vec<f64>>,
}

impl Default for BvpConfig {
    fn default() -> Self {
        BvpConfig {
            integrator: IntegratorConfig::default(),
            tol: 1e-10,
            max_iter: 25,
            fd_step: 1e-7,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub xi0: Vec<f64>,
    pub y_star: Vec<f64>,
    pub trajectory: Trajectory,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

/// How the shooting map propagates an initial state to `t*`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Propagation<'m> {
    Adaptive(&'m IntegratorConfig),
    /// Fixed steps on `t* * mesh[i]`, with `mesh` running from 0 to 1.
    Mesh(&'m [f64]),
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn lifted_state(a: &InitialValueFunction, xi: &[f64]) -> Result<Vec<f64>> {
    let mut s = xi.to_vec();
    s.extend(a.try_eval(xi)?);
    if s.iter().all(|v| v.is_finite()) {
        Ok(s)
    } else {
        Err(Error::NonFiniteValue {
            what: "initial-value function".into(),
            point: xi.to_vec(),
        })
    }
}

/// Full state at `t_star` launched from `(xi, a(xi))`.
pub(crate) fn propagate(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    xi: &[f64],
    t_star: f64,
    prop: Propagation<'_>,
) -> Result<Vec<f64>> {
    let s0 = lifted_state(a, xi)?;
    let model = system.model();
    let rhs = |y: &[f64], out: &mut [f64]| model.rhs(y, out);
    match prop {
        Propagation::Adaptive(cfg) => {
            let tr = integrate_fn(rhs, &s0, 0.0, t_star, cfg)?;
            Ok(if t_star >= 0.0 { tr.last() } else { tr.first() }.to_vec())
        }
        Propagation::Mesh(mesh) => {
            let times: Vec<f64> = mesh.iter().map(|s| s * t_star).collect();
            integrate_on_mesh(rhs, &s0, &times)
        }
    }
}

/// Guess for `xi`: the slow subsystem integrated backward from `x*` with the
/// fast variables frozen at `a(x*)`.
pub fn default_initial_guess(problem: &BvpProblem<'_>, cfg: &IntegratorConfig) -> Option<Vec<f64>> {
    let k = problem.system.slow_dim();
    let frozen = problem.a.try_eval(&problem.x_star).ok()?;
    let model = problem.system.model();
    let n = problem.system.dim();
    let rhs = |x: &[f64], out: &mut [f64]| {
        let mut s = x.to_vec();
        s.extend_from_slice(&frozen);
        let mut full = vec![0.0; n];
        model.rhs(&s, &mut full);
        out.copy_from_slice(&full[..k]);
    };
    let tr = integrate_fn(rhs, &problem.x_star, problem.t_star, 0.0, cfg).ok()?;
    let xi = tr.dense_eval(0.0)?;
    (xi.iter().all(|v| v.is_finite()) && problem.system.admissible(&xi)).then_some(xi)
}

#[allow(clippy::too_many_arguments)]
/// Damped Newton on `r(xi) = x(t*; xi) - x*`. With `polish`, iterations
/// continue past `tol` while the residual keeps shrinking.
pub(crate) fn shoot(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t_star: f64,
    x_star: &[f64],
    guess: Vec<f64>,
    cfg: &BvpConfig,
    prop: Propagation<'_>,
    polish: bool,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64)> {
    let k = system.slow_dim();
    let residual = |xi: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        if !system.admissible(xi) {
            return Err(Error::Inadmissible { xi: xi.to_vec() });
        }
        let end = propagate(system, a, xi, t_star, prop)?;
        let r: Vec<f64> = (0..k).map(|j| end[j] - x_star[j]).collect();
        Ok((r, end))
    };

    let mut xi = guess;
    let (mut r, mut end) = residual(&xi)?;
    let mut rn = inf_norm(&r);
    let mut iters = 0;
    let mut extra = 0;
    loop {
        if rn <= cfg.tol {
            if !polish || extra >= 3 || rn == 0.0 {
                break;
            }
            extra += 1;
        }
        if iters >= cfg.max_iter {
            if rn <= cfg.tol {
                break;
            }
            return Err(Error::NewtonNonConvergence {
                iterations: iters,
                residual: rn,
            });
        }
        iters += 1;
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let h = cfg.fd_step * xi[j].abs().max(1.0);
            let mut xp = xi.clone();
            xp[j] += h;
            let (rp, _) = residual(&xp)?;
            for i in 0..k {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_iterator(k, r.iter().map(|v| -v)))
            .ok_or(Error::NewtonNonConvergence {
                iterations: iters,
                residual: rn,
            })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut last_err = None;
        for _ in 0..30 {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
            match residual(&trial) {
                Ok((rt, et)) if inf_norm(&rt) < rn => {
                    xi = trial;
                    r = rt;
                    end = et;
                    rn = inf_norm(&r);
                    accepted = true;
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            lambda *= 0.5;
        }
        if !accepted {
            if rn <= cfg.tol {
                break;
            }
            return Err(match last_err {
                Some(e @ Error::Inadmissible { .. }) => e,
                _ => Error::NewtonNonConvergence {
                    iterations: iters,
                    residual: rn,
                },
            });
        }
    }
    Ok((xi, end[k..].to_vec(), iters, rn))
}

/// Solves the boundary value problem by single shooting.
///
/// The default initial guess comes from [`default_initial_guess`], falling
/// back to `x*`. Negative `t_star` is accepted and integrates backward.
pub fn solve_bvp(problem: &BvpProblem<'_>, cfg: &BvpConfig) -> Result<BvpSolution> {
    let sys = problem.system;
    check_dim(sys.slow_dim(), problem.x_star.len())?;
    check_dim(sys.fast_dim(), problem.a.fast_dim())?;
    check_dim(sys.slow_dim(), problem.a.slow_dim())?;
    if !problem.t_star.is_finite() {
        return Err(Error::invalid("t_star", problem.t_star, "must be finite"));
    }
    cfg.integrator.validate()?;
    if problem.t_star == 0.0 {
        let s0 = lifted_state(problem.a, &problem.x_star)?;
        let trajectory = integrate_fn(|_, _| {}, &s0, 0.0, 0.0, &cfg.integrator)?;
        return Ok(BvpSolution {
            xi0: problem.x_star.clone(),
            y_star: s0[sys.slow_dim()..].to_vec(),
            trajectory,
            newton_iters: 0,
            residual_norm: 0.0,
        });
    }
    let guess = cfg
        .initial_guess
        .clone()
        .or_else(|| default_initial_guess(problem, &cfg.integrator))
        .unwrap_or_else(|| problem.x_star.clone());
    let prop = Propagation::Adaptive(&cfg.integrator);
    let attempt = shoot(sys, problem.a, problem.t_star, &problem.x_star, guess.clone(), cfg, prop, false);
    let (xi, _, iters, rn) = match attempt {
        Ok(v) => v,
        Err(e) if guess != problem.x_star && cfg.initial_guess.is_none() => {
            shoot(sys, problem.a, problem.t_star, &problem.x_star, problem.x_star.clone(), cfg, prop, false)
                .map_err(|_| e)?
        }
        Err(e) => return Err(e),
    };
    let s0 = lifted_state(problem.a, &xi)?;
    let model = sys.model();
    let trajectory = integrate_fn(|y, o| model.rhs(y, o), &s0, 0.0, problem.t_star, &cfg.integrator)?;
    let end = if problem.t_star > 0.0 {
        trajectory.last()
    } else {
        trajectory.first()
    };
    let y_star = end[sys.slow_dim()..].to_vec();
    Ok(BvpSolution {
        xi0: xi,
        y_star,
        trajectory,
        newton_iters: iters,
        residual_norm: rn,
    })
}

/// Outcome of solving from two different initial guesses.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub xi_from_target: Vec<f64>,
    pub xi_from_backward_guess: Vec<f64>,
    pub max_difference: f64,
    /// True when the two roots differ by more than `1e-8`.
    pub multiple_roots_suspected: bool,
}

/// Solves from `xi = x*` and from the backward-integrated guess and
/// compares the roots. Disagreement is reported, not resolved.
pub fn check_uniqueness(problem: &BvpProblem<'_>, cfg: &BvpConfig) -> Result<UniquenessReport> {
    let from_target = solve_bvp(
        problem,
        &BvpConfig {
            initial_guess: Some(problem.x_star.clone()),
            ..cfg.clone()
        },
    )?;
    let guess = default_initial_guess(problem, &cfg.integrator).unwrap_or_else(|| problem.x_star.clone());
    let from_guess = solve_bvp(
        problem,
        &BvpConfig {
            initial_guess: Some(guess),
            ..cfg.clone()
        },
    )?;
    let d = from_target
        .xi0
        .iter()
        .zip(&from_guess.xi0)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(UniquenessReport {
        xi_from_target: from_target.xi0,
        xi_from_backward_guess: from_guess.xi0,
        max_difference: d,
        multiple_roots_suspected: d > 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_closed_p(gamma: f64, a: impl Fn(f64) -> f64, t: f64, x: f64) -> f64 {
        let u = x * t.exp();
        let h = |v: f64| v / (1.0 + v);
        (a(u) - h(u)) * (-gamma * t).exp() + h(x)
    }

    #[test]
    fn davis_skodje_linear_lift_matches_closed_form() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let a = InitialValueFunction::polynomial(&[1.0, -0.5]);
        let pb = BvpProblem {
            system: &s,
            t_star: 1.5,
            x_star: vec![0.5],
            a: &a,
        };
        let sol = solve_bvp(&pb, &BvpConfig::default()).unwrap();
        let exact = ds_closed_p(3.5, |u| 1.0 - u / 2.0, 1.5, 0.5);
        assert!((sol.y_star[0] - exact).abs() < 1e-8);
        assert!(sol.residual_norm <= 1e-10);
        assert_eq!(sol.y_star, sol.trajectory.last()[1..].to_vec());
        assert_eq!(sol.trajectory.first()[1], a.eval(&sol.xi0)[0]);
    }

    #[test]
    fn zero_horizon_returns_the_lift() {
        let s = SlowFastSystem::model_3_2(0.01).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        let x = vec![0.3, 1.0, 0.5];
        let sol = solve_bvp(
            &BvpProblem {
                system: &s,
                t_star: 0.0,
                x_star: x.clone(),
                a: &a,
            },
            &BvpConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.xi0, x);
        assert_eq!(sol.y_star, a.eval(&x));
        assert_eq!(sol.newton_iters, 0);
    }

    #[test]
    fn invariant_lift_round_trips() {
        let s = SlowFastSystem::kuehn_nonlinear(0.1).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h_eps.unwrap());
        for t in [0.5, 1.0, 2.0] {
            let sol = solve_bvp(
                &BvpProblem {
                    system: &s,
                    t_star: t,
                    x_star: vec![0.8],
                    a: &a,
                },
                &BvpConfig::default(),
            )
            .unwrap();
            assert!((sol.y_star[0] - 0.64 / 0.8).abs() < 1e-7);
        }
    }

    #[test]
    fn enzyme_constant_lift_is_guess_independent() {
        let s = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        let a = InitialValueFunction::constant(1, &[0.5]);
        let pb = BvpProblem {
            system: &s,
            t_star: 1.0,
            x_star: vec![1.0],
            a: &a,
        };
        let mut ys = Vec::new();
        for g in [1.0, 1.2] {
            let cfg = BvpConfig {
                initial_guess: Some(vec![g]),
                ..BvpConfig::default()
            };
            ys.push(solve_bvp(&pb, &cfg).unwrap().y_star[0]);
        }
        assert!((ys[0] - ys[1]).abs() < 1e-8);
        let rep = check_uniqueness(&pb, &BvpConfig::default()).unwrap();
        assert!(!rep.multiple_roots_suspected);
    }

    #[test]
    fn inadmissible_guess_is_reported() {
        let s = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        let a = InitialValueFunction::constant(1, &[0.5]);
        let pb = BvpProblem {
            system: &s,
            t_star: 1.0,
            x_star: vec![1.0],
            a: &a,
        };
        let cfg = BvpConfig {
            initial_guess: Some(vec![-2.0]),
            ..BvpConfig::default()
        };
        assert!(matches!(solve_bvp(&pb, &cfg), Err(Error::Inadmissible { .. })));
    }
}
