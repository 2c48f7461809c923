//! Induced metric, Christoffel symbols, the Riemann components `R^m_{1ii}`
//! and the time-sectional curvatures `K(sigma_i)` of the graph immersion
//! `(t, x) -> (t, x, p(t, x))`.
//!
//! Coordinates are indexed from 0 in code: index 0 is time and index `i`
//! (1..=k) is `x_i`, so `sigma_i` is the plane spanned by coordinates 0 and
//! `i`.
//!
//! Sign convention: `R^m_{1ii} = d_1 G^m_ii - d_i G^m_1i + G^l_ii G^m_1l -
//! G^l_1i G^m_il` and `K(sigma_i) = R^m_{1ii} g_m1 / (g_11 g_ii - g_1i^2)`.
//! With this choice the codimension-one, one-slow-variable case reduces to
//! `(p_tt p_xx - p_xt^2) / (1 + p_t^2 + p_x^2)^2` (checked in the tests).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graphp::{eval_graph_with, immersion_jacobian, EvalMode, GraphConfig, GraphEval};
use crate::grid::GridSpec;
use crate::lift::InitialValueFunction;
use crate::systems::SlowFastSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Christoffel symbols and Riemann components; needs third partials.
    Christoffel,
    /// Second fundamental form and the Gauss equation; needs second partials.
    GaussEquation,
    /// Closed-form Gaussian curvature of a surface in R^3.
    Closed11,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Christoffel => "christoffel",
            Route::GaussEquation => "gauss",
            Route::Closed11 => "closed11",
        }
    }

    pub fn derivative_order(&self) -> usize {
        match self {
            Route::Christoffel => 3,
            _ => 2,
        }
    }
}

impl std::str::FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "christoffel" => Ok(Route::Christoffel),
            "gauss" | "gauss_equation" => Ok(Route::GaussEquation),
            "closed11" | "closed_11" => Ok(Route::Closed11),
            other => Err(Error::Parse(format!(
                "unknown route `{other}` (expected gauss, christoffel or closed11)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricTensor {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det_g: f64,
}

/// `g = J^T J`, inverted through its Cholesky factor.
pub fn metric_tensor(j: &DMatrix<f64>) -> Result<MetricTensor> {
    let g = j.transpose() * j;
    let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let det_g = chol.l().diagonal().iter().map(|v| v * v).product();
    let g_inv = chol.inverse();
    Ok(MetricTensor { g, g_inv, det_g })
}

/// `d_c g_ab = sum_l (p_ac p_b + p_a p_bc)`, indexed `[c][a][b]`.
fn metric_first_derivatives(ge: &GraphEval) -> Vec<DMatrix<f64>> {
    let d = ge.point.len();
    let p = &ge.partials;
    (0..d)
        .map(|c| {
            DMatrix::from_fn(d, d, |a, b| {
                (0..p.out())
                    .map(|l| p.d2(l, a, c) * p.d1(l, b) + p.d1(l, a) * p.d2(l, b, c))
                    .sum()
            })
        })
        .collect()
}

/// `d_e d_c g_ab`, indexed `[e][c]`.
fn metric_second_derivatives(ge: &GraphEval) -> Vec<Vec<DMatrix<f64>>> {
    let d = ge.point.len();
    let p = &ge.partials;
    (0..d)
        .map(|e| {
            (0..d)
                .map(|c| {
                    DMatrix::from_fn(d, d, |a, b| {
                        (0..p.out())
                            .map(|l| {
                                p.d3(l, a, c, e) * p.d1(l, b)
                                    + p.d2(l, a, c) * p.d2(l, b, e)
                                    + p.d2(l, a, e) * p.d2(l, b, c)
                                    + p.d1(l, a) * p.d3(l, b, c, e)
                            })
                            .sum()
                    })
                })
                .collect()
        })
        .collect()
}

/// Christoffel symbols of the second kind, flattened `[m][i][j]`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    values: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, m: usize, i: usize, j: usize) -> f64 {
        self.values[(m * self.dim + i) * self.dim + j]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|G^m_ij - G^m_ji|`.
    pub fn lower_symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut r: f64 = 0.0;
        for m in 0..d {
            for i in 0..d {
                for j in 0..d {
                    r = r.max((self.get(m, i, j) - self.get(m, j, i)).abs());
                }
            }
        }
        r
    }
}

/// `S_ijl = d_i g_jl + d_j g_il - d_l g_ij`.
fn first_kind(dg: &[DMatrix<f64>], i: usize, j: usize, l: usize) -> f64 {
    dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]
}

/// `G^m_ij = 1/2 g^{ml} (d_i g_jl + d_j g_il - d_l g_ij)` from metric
/// derivatives `dg[c] = d_c g`.
pub fn christoffel(metric: &MetricTensor, dg: &[DMatrix<f64>]) -> Christoffel {
    let d = metric.g.nrows();
    let mut values = vec![0.0; d * d * d];
    for m in 0..d {
        for i in 0..d {
            for j in 0..d {
                values[(m * d + i) * d + j] = 0.5
                    * (0..d)
                        .map(|l| metric.g_inv[(m, l)] * first_kind(dg, i, j, l))
                        .sum::<f64>();
            }
        }
    }
    Christoffel { dim: d, values }
}

/// `d_c G^m_ij` from `d g` and `d d g`, flattened `[c][m][i][j]`.
fn christoffel_derivatives(
    metric: &MetricTensor,
    dg: &[DMatrix<f64>],
    ddg: &[Vec<DMatrix<f64>>],
) -> Vec<f64> {
    let d = metric.g.nrows();
    let gi = &metric.g_inv;
    let dginv: Vec<DMatrix<f64>> = dg.iter().map(|dgc| -(gi * dgc * gi)).collect();
    let mut out = vec![0.0; d * d * d * d];
    for c in 0..d {
        for m in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut v = 0.0;
                    for l in 0..d {
                        let s = first_kind(dg, i, j, l);
                        let ds = ddg[c][i][(j, l)] + ddg[c][j][(i, l)] - ddg[c][l][(i, j)];
                        v += dginv[c][(m, l)] * s + gi[(m, l)] * ds;
                    }
                    out[((c * d + m) * d + i) * d + j] = 0.5 * v;
                }
            }
        }
    }
    out
}

/// `R^m_{1ii}` for `i = 1..=k` (0-based time index 0), indexed `[i-1][m]`.
pub fn riemann_slice(gamma: &Christoffel, dgamma: &[f64]) -> Vec<Vec<f64>> {
    let d = gamma.dim();
    let dg = |c: usize, m: usize, i: usize, j: usize| dgamma[((c * d + m) * d + i) * d + j];
    (1..d)
        .map(|i| {
            (0..d)
                .map(|m| {
                    let mut r = dg(0, m, i, i) - dg(i, m, 0, i);
                    for l in 0..d {
                        r += gamma.get(l, i, i) * gamma.get(m, 0, l)
                            - gamma.get(l, 0, i) * gamma.get(m, i, l);
                    }
                    r
                })
                .collect()
        })
        .collect()
}

fn plane_denominator(g: &DMatrix<f64>, i: usize) -> Result<f64> {
    let den = g[(0, 0)] * g[(i, i)] - g[(0, i)] * g[(0, i)];
    if den > 0.0 && den.is_finite() {
        Ok(den)
    } else {
        Err(Error::DegeneratePlane(den))
    }
}

/// `K(sigma_i) = sum_m R^m_{1ii} g_m1 / (g_11 g_ii - g_1i^2)`.
pub fn time_sectional_curvatures(metric: &MetricTensor, riemann: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = metric.g.nrows();
    (1..d)
        .map(|i| {
            let num: f64 = (0..d).map(|m| riemann[i - 1][m] * metric.g[(m, 0)]).sum();
            Ok(num / plane_denominator(&metric.g, i)?)
        })
        .collect()
}

/// `(p_tt p_xx - p_xt^2) / (1 + p_t^2 + p_x^2)^2` for one slow and one fast
/// variable.
pub fn gaussian_curvature_11(ge: &GraphEval) -> Result<f64> {
    check_dim(2, ge.point.len())?;
    check_dim(1, ge.fast_dim())?;
    if ge.order() < 2 {
        return Err(Error::invalid("order", ge.order() as f64, "needs second partials"));
    }
    let p = &ge.partials;
    let (pt, px) = (p.d1(0, 0), p.d1(0, 1));
    let (ptt, pxx, pxt) = (p.d2(0, 0, 0), p.d2(0, 1, 1), p.d2(0, 0, 1));
    let w = 1.0 + pt * pt + px * px;
    Ok((ptt * pxx - pxt * pxt) / (w * w))
}

/// Second fundamental form `II(a, b)`: the normal part of
/// `(0, ..., 0, p_ab)`.
fn second_fundamental_form(ge: &GraphEval, j: &DMatrix<f64>, metric: &MetricTensor) -> Vec<Vec<nalgebra::DVector<f64>>> {
    let d = ge.point.len();
    let m = ge.fast_dim();
    let n = d + m;
    let proj = DMatrix::<f64>::identity(n, n) - j * &metric.g_inv * j.transpose();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let mut v = nalgebra::DVector::zeros(n);
                    for l in 0..m {
                        v[d + l] = ge.partials.d2(l, a, b);
                    }
                    &proj * v
                })
                .collect()
        })
        .collect()
}

/// Curvatures from the Gauss equation:
/// `K(sigma_i) = (<II_11, II_ii> - |II_1i|^2) / (g_11 g_ii - g_1i^2)`.
pub fn gauss_equation_curvatures(ge: &GraphEval, metric: &MetricTensor) -> Result<Vec<f64>> {
    if ge.order() < 2 {
        return Err(Error::invalid("order", ge.order() as f64, "needs second partials"));
    }
    let j = immersion_jacobian(ge);
    if j.rank(1e-12) < ge.point.len() {
        return Err(Error::DegeneratePlane(0.0));
    }
    let ii = second_fundamental_form(ge, &j, metric);
    (1..ge.point.len())
        .map(|i| {
            let num = ii[0][0].dot(&ii[i][i]) - ii[0][i].norm_squared();
            Ok(num / plane_denominator(&metric.g, i)?)
        })
        .collect()
}

/// Everything computed at one point.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub p: Vec<f64>,
    pub metric: MetricTensor,
    pub christoffel: Option<Christoffel>,
    /// `R^m_{1ii}`, indexed `[i-1][m]`; present on the Christoffel route.
    pub riemann_slice: Option<Vec<Vec<f64>>>,
    /// `K(sigma_2), ..., K(sigma_{k+1})`.
    pub k: Vec<f64>,
    pub route: Route,
}

/// Curvatures of an already evaluated graph point.
pub fn curvature_from_graph(ge: &GraphEval, route: Route) -> Result<CurvatureReport> {
    let metric = metric_tensor(&immersion_jacobian(ge))?;
    let (k, christ, riem) = match route {
        Route::Closed11 => (vec![gaussian_curvature_11(ge)?], None, None),
        Route::GaussEquation => (gauss_equation_curvatures(ge, &metric)?, None, None),
        Route::Christoffel => {
            if ge.order() < 3 {
                return Err(Error::Unsupported(
                    "the Christoffel route needs third partials of p".into(),
                ));
            }
            let dg = metric_first_derivatives(ge);
            let ddg = metric_second_derivatives(ge);
            let gamma = christoffel(&metric, &dg);
            let dgamma = christoffel_derivatives(&metric, &dg, &ddg);
            let r = riemann_slice(&gamma, &dgamma);
            (time_sectional_curvatures(&metric, &r)?, Some(gamma), Some(r))
        }
    };
    if let Some(bad) = k.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: format!("sectional curvature ({bad})"),
            point: ge.point.clone(),
        });
    }
    Ok(CurvatureReport {
        point: ge.point.clone(),
        p: ge.p().to_vec(),
        metric,
        christoffel: christ,
        riemann_slice: riem,
        k,
        route,
    })
}

/// Evaluates `p` to the order `route` needs and returns the curvatures.
pub fn curvature_at(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    t: f64,
    x: &[f64],
    route: Route,
    mode: EvalMode,
    cfg: &GraphConfig,
) -> Result<CurvatureReport> {
    if route == Route::Closed11 && (system.slow_dim() != 1 || system.fast_dim() != 1) {
        return Err(Error::Unsupported(format!(
            "the closed11 route needs one slow and one fast variable; {} has ({}, {})",
            system.name(),
            system.slow_dim(),
            system.fast_dim()
        )));
    }
    let ge = eval_graph_with(system, a, t, x, route.derivative_order(), mode, cfg)?;
    let mut point = vec![t];
    point.extend_from_slice(x);
    curvature_from_graph(&ge, route).map_err(|e| e.at(&point))
}

/// Curvature reports for every grid node, in node order. Runs on the current
/// rayon pool; the first failing node (in node order) aborts the sweep.
pub fn curvature_field(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    grid: &GridSpec,
    route: Route,
    mode: EvalMode,
    cfg: &GraphConfig,
) -> Result<Vec<CurvatureReport>> {
    check_dim(system.slow_dim(), grid.slow_dim())?;
    let results: Vec<Result<CurvatureReport>> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let node = grid.node(n);
            curvature_at(system, a, node[0], &node[1..], route, mode, cfg).map_err(|e| e.at(&node))
        })
        .collect();
    results.into_iter().collect()
}

/// Node mean of `|K(sigma_2)|` over the grid.
pub fn curvature_integral(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    grid: &GridSpec,
    route: Route,
    mode: EvalMode,
    cfg: &GraphConfig,
) -> Result<f64> {
    let field = curvature_field(system, a, grid, route, mode, cfg)?;
    Ok(node_mean_abs_k2(&field))
}

pub fn node_mean_abs_k2(field: &[CurvatureReport]) -> f64 {
    field.iter().map(|r| r.k[0].abs()).sum::<f64>() / field.len() as f64
}

/// Largest `|K(sigma_i)|` over a field, all planes.
pub fn max_abs_curvature(field: &[CurvatureReport]) -> f64 {
    field
        .iter()
        .flat_map(|r| r.k.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphp::eval_graph;
    use crate::partials::Partials;
    use crate::graphp::Source;

    fn synthetic(point: Vec<f64>, p: Partials) -> GraphEval {
        GraphEval {
            point,
            partials: p,
            source: Source::ClosedForm,
        }
    }

    #[test]
    fn flat_graph_has_identity_metric_and_no_curvature() {
        let mut p = Partials::zeros(2, 1, 3);
        p.value_mut()[0] = 3.0;
        let ge = synthetic(vec![0.0, 0.0], p);
        let rep = curvature_from_graph(&ge, Route::Christoffel).unwrap();
        assert_eq!(rep.metric.g, DMatrix::identity(2, 2));
        assert_eq!(rep.k, vec![0.0]);
        assert!(rep.christoffel.unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kuehn_point_value() {
        let s = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        let cfg = GraphConfig::default();
        let exact = -0.0102 / 4.0001;
        for route in [Route::Closed11, Route::GaussEquation, Route::Christoffel] {
            let r = curvature_at(&s, &a, 0.0, &[0.5], route, EvalMode::Auto, &cfg).unwrap();
            assert!((r.k[0] - exact).abs() < 1e-12, "{route:?}: {}", r.k[0]);
        }
    }

    #[test]
    fn sign_convention_matches_surface_formula_for_saddle_and_bowl() {
        // p = t^2 + x^2 (bowl, K > 0) and p = t^2 - x^2 (saddle, K < 0) at origin
        for (sx, expected) in [(1.0, 4.0), (-1.0, -4.0)] {
            let mut p = Partials::zeros(2, 1, 3);
            p.set_d2(0, 0, 0, 2.0);
            p.set_d2(0, 1, 1, 2.0 * sx);
            let ge = synthetic(vec![0.0, 0.0], p);
            for route in [Route::Closed11, Route::GaussEquation, Route::Christoffel] {
                let k = curvature_from_graph(&ge, route).unwrap().k[0];
                assert!((k - expected).abs() < 1e-14, "{route:?}");
            }
        }
    }

    #[test]
    fn davis_skodje_metric_at_one_one() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h_eps.unwrap());
        let ge = eval_graph(&s, &a, 1.0, &[1.0], 2, EvalMode::Auto).unwrap();
        let m = metric_tensor(&immersion_jacobian(&ge)).unwrap();
        assert_eq!(m.g[(0, 0)], 1.0);
        assert_eq!(m.g[(0, 1)], 0.0);
        assert!((m.g[(1, 1)] - (1.0 + 1.0 / 16.0)).abs() < 1e-15);
        assert!((m.det_g - 17.0 / 16.0).abs() < 1e-14);
        assert!(((&m.g * &m.g_inv) - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn closed11_rejects_higher_dimensions() {
        let s = SlowFastSystem::ds_2_1(3.5).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        assert!(curvature_at(&s, &a, 0.0, &[1.0, 1.0], Route::Closed11, EvalMode::Auto, &GraphConfig::default())
            .is_err());
        assert!("bogus".parse::<Route>().is_err());
        assert_eq!("gauss".parse::<Route>().unwrap(), Route::GaussEquation);
    }

    #[test]
    fn single_node_integral_is_abs_curvature() {
        let s = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        let a = InitialValueFunction::closed_form(s.analytic().h0.unwrap());
        let g = GridSpec::point(0.0, &[0.5]);
        let cfg = GraphConfig::default();
        let i = curvature_integral(&s, &a, &g, Route::GaussEquation, EvalMode::Auto, &cfg).unwrap();
        assert!((i - 0.0102 / 4.0001).abs() < 1e-12);
    }
}
