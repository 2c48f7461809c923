//! The graph parameterization `p(t, x; a)`, the fast state reached at time
//! `t` and slow state `x` by the trajectory launched from the lift `a`, and
//! its partial derivatives in `(t, x)`.
//!
//! Models with an explicit flow get exact partials through the chain rule:
//! with `U_j = x_j e^{lambda_j t}`,
//!
//! ```text
//! p_l(t, x) = [a_l(U) - h_l(U)] e^{-mu_l t} + h_l(x).
//! ```
//!
//! Everything else goes through finite differences over shooting solves.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bvp::{shoot, solve_bvp, BvpConfig, BvpProblem, Propagation};
use crate::error::{check_dim, Error, Result};
use crate::lift::InitialValueFunction;
use crate::ode::integrate_fn;
use crate::partials::{compose, index_tuples, times_time_factor, Partials};
use crate::systems::SlowFastSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Closed form when available, otherwise finite differences.
    Auto,
    Closed,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    FiniteDifference,
}

/// `p` and its partials at one point `(t, x)`; coordinate 0 is time.
#[derive(Debug, Clone)]
pub struct GraphEval {
    pub point: Vec<f64>,
    pub partials: Partials,
    pub source: Source,
}

impl GraphEval {
    pub fn p(&self) -> &[f64] {
        self.partials.value()
    }

    pub fn order(&self) -> usize {
        self.partials.order()
    }

    pub fn slow_dim(&self) -> usize {
        self.point.len() - 1
    }

    pub fn fast_dim(&self) -> usize {
        self.partials.out()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub bvp: BvpConfig,
    /// Relative stencil step for shooting-backed derivatives.
    pub fd_step: f64,
    /// Largest tolerated asymmetry of numerical mixed partials.
    pub symmetry_tol: f64,
    /// Minimum number of steps of the fixed mesh shared by a stencil.
    pub min_mesh_steps: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            bvp: BvpConfig::default(),
            fd_step: 1e-3,
            symmetry_tol: 1e-6,
            min_mesh_steps: 16,
        }
    }
}

/// Whether the closed-form route applies to this system and lift.
pub fn has_closed_form(system: &SlowFastSystem, a: &InitialValueFunction) -> bool {
    let art = system.analytic();
    art.flow.is_some() && art.h_eps.is_some() && a.differentiable()
}

pub fn eval_graph(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    order: usize,
    mode: EvalMode,
) -> Result<GraphEval> {
    eval_graph_with(system, a, t, x, order, mode, &GraphConfig::default())
}

pub fn eval_graph_with(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    order: usize,
    mode: EvalMode,
    cfg: &GraphConfig,
) -> Result<GraphEval> {
    check_dim(system.slow_dim(), x.len())?;
    check_dim(system.slow_dim(), a.slow_dim())?;
    check_dim(system.fast_dim(), a.fast_dim())?;
    if !(1..=3).contains(&order) {
        return Err(Error::invalid("order", order as f64, "derivative order must be 1, 2 or 3"));
    }
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: "evaluation point".into(),
            point: std::iter::once(t).chain(x.iter().copied()).collect(),
        });
    }
    let closed = has_closed_form(system, a);
    let ge = match mode {
        EvalMode::Closed if !closed => {
            return Err(Error::Unsupported(format!(
                "no closed-form parameterization for {} with this initial-value function",
                system.name()
            )))
        }
        EvalMode::Closed => closed_eval(system, a, t, x, order)?,
        EvalMode::Auto if closed => closed_eval(system, a, t, x, order)?,
        _ => numeric_eval(system, a, t, x, order, cfg)?,
    };
    if !ge.partials.all_finite() {
        return Err(Error::NonFiniteValue {
            what: "graph partials".into(),
            point: ge.point,
        });
    }
    let defect = ge.partials.symmetry_defect();
    if defect > cfg.symmetry_tol {
        return Err(Error::Asymmetry(defect));
    }
    Ok(ge)
}

/// Partials of `h(x)` seen as a function of `(t, x)`.
fn lift_to_time(p: &Partials) -> Partials {
    let k = p.dim();
    let mut r = Partials::zeros(k + 1, p.out(), p.order());
    r.value_mut().copy_from_slice(p.value());
    for l in 0..p.out() {
        for n in 1..=p.order() {
            for idx in index_tuples(k, n) {
                if idx.windows(2).any(|w| w[0] > w[1]) {
                    continue;
                }
                let v = p.get(l, &idx);
                match idx[..] {
                    [i] => r.set_d1(l, i + 1, v),
                    [i, j] => r.set_d2(l, i + 1, j + 1, v),
                    [i, j, m] => r.set_d3(l, i + 1, j + 1, m + 1, v),
                    _ => unreachable!(),
                }
            }
        }
    }
    r
}

fn closed_eval(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    order: usize,
) -> Result<GraphEval> {
    let art = system.analytic();
    let (flow, h) = (art.flow.expect("checked"), art.h_eps.expect("checked"));
    let k = x.len();
    let m = a.fast_dim();

    // U_j(t, x) = x_j e^{lambda_j t}
    let mut inner = Partials::zeros(k + 1, k, order);
    let mut u = vec![0.0; k];
    for j in 0..k {
        let lam = flow.slow_rates[j];
        let e = (lam * t).exp();
        u[j] = x[j] * e;
        inner.value_mut()[j] = u[j];
        inner.set_d1(j, 0, lam * u[j]);
        inner.set_d1(j, j + 1, e);
        if order >= 2 {
            inner.set_d2(j, 0, 0, lam * lam * u[j]);
            inner.set_d2(j, 0, j + 1, lam * e);
        }
        if order >= 3 {
            inner.set_d3(j, 0, 0, 0, lam.powi(3) * u[j]);
            inner.set_d3(j, 0, 0, j + 1, lam * lam * e);
        }
    }
    let mut diff = a.partials(&u, order).expect("checked");
    let mut hu = h.partials(&u, order);
    hu.scale(-1.0);
    diff.add(&hu);
    let composed = compose(&diff, &inner);
    let decay: Vec<[f64; 4]> = (0..m)
        .map(|l| {
            let mu = flow.fast_rates[l];
            let e = (-mu * t).exp();
            [e, -mu * e, mu * mu * e, -mu.powi(3) * e]
        })
        .collect();
    let mut p = times_time_factor(&composed, 0, &decay);
    p.add(&lift_to_time(&h.partials(x, order)));
    let mut point = vec![t];
    point.extend_from_slice(x);
    Ok(GraphEval {
        point,
        partials: p,
        source: Source::ClosedForm,
    })
}

/// Fixed time mesh on `[0, 1]` shared by every solve of one stencil.
fn stencil_mesh(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    xi_center: &[f64],
    cfg: &GraphConfig,
) -> Result<Vec<f64>> {
    let span = if t.abs() >= 2.0 * cfg.fd_step {
        t
    } else {
        2.0 * cfg.fd_step * t.abs().max(1.0)
    };
    let start = if t == 0.0 { x } else { xi_center };
    let mut s0 = start.to_vec();
    s0.extend(a.try_eval(start)?);
    let model = system.model();
    let tr = integrate_fn(|y, o| model.rhs(y, o), &s0, 0.0, span, &cfg.bvp.integrator)?;
    let mut mesh: Vec<f64> = tr.times().iter().map(|s| s / span).collect();
    if span < 0.0 {
        mesh.reverse();
    }
    let steps = mesh.len() - 1;
    if steps < cfg.min_mesh_steps {
        let sub = cfg.min_mesh_steps.div_ceil(steps);
        let mut fine = Vec::with_capacity(steps * sub + 1);
        for w in mesh.windows(2) {
            for q in 0..sub {
                fine.push(w[0] + (w[1] - w[0]) * q as f64 / sub as f64);
            }
        }
        fine.push(1.0);
        mesh = fine;
    }
    *mesh.last_mut().expect("nonempty") = 1.0;
    Ok(mesh)
}

fn numeric_eval(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    order: usize,
    cfg: &GraphConfig,
) -> Result<GraphEval> {
    if order > 2 {
        return Err(Error::Unsupported(
            "third derivatives of a shooting-backed parameterization are not available; \
             use the Gauss-equation route"
                .into(),
        ));
    }
    let k = x.len();
    let m = a.fast_dim();
    let d = k + 1;
    let mut point = vec![t];
    point.extend_from_slice(x);

    let center = solve_bvp(
        &BvpProblem {
            system,
            t_star: t,
            x_star: x.to_vec(),
            a,
        },
        &cfg.bvp,
    )
    .map_err(|e| e.at(&point))?;
    let mesh = stencil_mesh(system, a, t, x, &center.xi0, cfg).map_err(|e| e.at(&point))?;
    let steps: Vec<f64> = point.iter().map(|c| cfg.fd_step * c.abs().max(1.0)).collect();

    let eval_at = |offsets: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut q = point.clone();
        for &(i, s) in offsets {
            q[i] += s * steps[i];
        }
        let (tq, xq) = (q[0], &q[1..]);
        if tq == 0.0 {
            return a.try_eval(xq);
        }
        let guess: Vec<f64> = (0..k).map(|j| center.xi0[j] + (xq[j] - x[j])).collect();
        let guess = if system.admissible(&guess) { guess } else { center.xi0.clone() };
        shoot(system, a, tq, xq, guess, &cfg.bvp, Propagation::Mesh(&mesh), true)
            .map(|(_, y, _, _)| y)
            .map_err(|e| e.at(&q))
    };

    let p0 = eval_at(&[])?;
    let mut p = Partials::zeros(d, m, order);
    p.value_mut().copy_from_slice(&p0);
    for i in 0..d {
        let plus = eval_at(&[(i, 1.0)])?;
        let minus = eval_at(&[(i, -1.0)])?;
        for l in 0..m {
            p.set_d1(l, i, (plus[l] - minus[l]) / (2.0 * steps[i]));
            if order >= 2 {
                p.set_d2(l, i, i, (plus[l] - 2.0 * p0[l] + minus[l]) / (steps[i] * steps[i]));
            }
        }
        if order >= 2 {
            for j in (i + 1)..d {
                let pp = eval_at(&[(i, 1.0), (j, 1.0)])?;
                let pm = eval_at(&[(i, 1.0), (j, -1.0)])?;
                let mp = eval_at(&[(i, -1.0), (j, 1.0)])?;
                let mm = eval_at(&[(i, -1.0), (j, -1.0)])?;
                for l in 0..m {
                    let v = (pp[l] - pm[l] - mp[l] + mm[l]) / (4.0 * steps[i] * steps[j]);
                    p.set_d2(l, i, j, v);
                }
            }
        }
    }
    Ok(GraphEval {
        point,
        partials: p,
        source: Source::FiniteDifference,
    })
}

/// Jacobian of the immersion `(t, x) -> (t, x, p(t, x))`: identity on top,
/// first partials of `p` below.
pub fn immersion_jacobian(ge: &GraphEval) -> DMatrix<f64> {
    let d = ge.point.len();
    let m = ge.fast_dim();
    let mut j = DMatrix::zeros(d + m, d);
    for i in 0..d {
        j[(i, i)] = 1.0;
    }
    for l in 0..m {
        for i in 0..d {
            j[(d + l, i)] = ge.partials.d1(l, i);
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kuehn_h0_p(eps: f64, t: f64, x: f64) -> f64 {
        // p = x^2 (A + B e^{(2 eps - 1) t}), A = 1/(1 - 2 eps)
        let a = 1.0 / (1.0 - 2.0 * eps);
        let b = -2.0 * eps / (1.0 - 2.0 * eps);
        x * x * (a + b * ((2.0 * eps - 1.0) * t).exp())
    }

    #[test]
    fn invariant_graph_has_no_time_dependence() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h_eps.unwrap());
        let ge = eval_graph(&s, &a, 1.3, &[0.7], 3, EvalMode::Auto).unwrap();
        assert_eq!(ge.source, Source::ClosedForm);
        assert!((ge.p()[0] - 0.7 / 1.7).abs() < 1e-15);
        assert_eq!(ge.partials.d1(0, 0), 0.0);
        assert_eq!(ge.partials.d2(0, 0, 1), 0.0);
    }

    #[test]
    fn closed_partials_match_hand_derivatives_kuehn() {
        let eps = 0.01;
        let s = SlowFastSystem::kuehn_nonlinear(eps).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        let (t, x) = (0.7, 0.5);
        let ge = eval_graph(&s, &a, t, &[x], 3, EvalMode::Closed).unwrap();
        let r = 2.0 * eps - 1.0;
        let b = -2.0 * eps / (1.0 - 2.0 * eps);
        let e = (r * t).exp();
        assert!((ge.p()[0] - kuehn_h0_p(eps, t, x)).abs() < 1e-15);
        assert!((ge.partials.d1(0, 0) - x * x * b * r * e).abs() < 1e-14);
        assert!((ge.partials.d2(0, 0, 1) - 2.0 * x * b * r * e).abs() < 1e-14);
        assert!((ge.partials.d3(0, 0, 0, 0) - x * x * b * r.powi(3) * e).abs() < 1e-14);
        assert!((ge.partials.d3(0, 1, 1, 0) - 2.0 * b * r * e).abs() < 1e-14);
    }

    #[test]
    fn numeric_matches_closed_at_kuehn_point() {
        let s = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        let c = eval_graph(&s, &a, 0.0, &[0.5], 2, EvalMode::Closed).unwrap();
        let n = eval_graph(&s, &a, 0.0, &[0.5], 2, EvalMode::Numeric).unwrap();
        assert_eq!(n.source, Source::FiniteDifference);
        for i in 0..2 {
            assert!((c.partials.d1(0, i) - n.partials.d1(0, i)).abs() < 1e-5);
            for j in 0..2 {
                assert!((c.partials.d2(0, i, j) - n.partials.d2(0, i, j)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn numeric_third_order_is_unsupported() {
        let s = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        let a = InitialValueFunction::constant(1, &[0.5]);
        assert!(matches!(
            eval_graph(&s, &a, 1.0, &[1.0], 3, EvalMode::Auto),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            eval_graph(&s, &a, 1.0, &[1.0], 2, EvalMode::Closed),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn time_zero_returns_the_lift() {
        let s = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        let a = InitialValueFunction::polynomial(&[0.2, 0.1]);
        let ge = eval_graph(&s, &a, 0.0, &[1.0], 1, EvalMode::Numeric).unwrap();
        assert_eq!(ge.p(), &[0.30000000000000004]);
    }

    #[test]
    fn immersion_jacobian_structure() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h_eps.unwrap());
        let ge = eval_graph(&s, &a, 1.0, &[1.0], 1, EvalMode::Auto).unwrap();
        let j = immersion_jacobian(&ge);
        assert_eq!(j.shape(), (3, 2));
        assert_eq!(j[(2, 0)], 0.0);
        assert!((j[(2, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(j.rank(1e-12), 2);
    }
}
