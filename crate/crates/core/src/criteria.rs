//! Scalar selection criteria over the Davis-Skodje invariant family
//! `a_c(u) = u/(u+1) + c u^gamma`.
//!
//! Every member of the family has vanishing time-sectional curvature, so the
//! curvature test alone cannot single out the slow manifold (`c = 0`). The
//! criteria below are evaluated pointwise at a fixed `u` and minimized over
//! `c`:
//!
//! - `F1 = a''(u)^2`, the squared curvature of the graph;
//! - `F2 = |J(u, a(u)) F(u, a(u))|^2` with `J` the system Jacobian;
//! - `F3 = k1 |F(u, a(u))|^2 - k2 |(u, a(u))|^2`.
//!
//! Values come from the registered system (right-hand side, Jacobian and
//! the family lift); the closed-form minimizers are evaluated separately and
//! cross-checked against a bracketing minimizer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{curvature_field, max_abs_curvature, Route};
use crate::graphp::{EvalMode, GraphConfig};
use crate::grid::GridSpec;
use crate::systems::{invariant_family, SlowFastSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Squared second derivative of the lift.
    F1,
    /// Squared norm of the Jacobian applied to the vector field.
    F2,
    /// Kinetic minus potential energy with weights `k1`, `k2`.
    F3 { k1: f64, k2: f64 },
}

impl Criterion {
    pub fn label(&self) -> &'static str {
        match self {
            Criterion::F1 => "F1",
            Criterion::F2 => "F2",
            Criterion::F3 { .. } => "F3",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionSpec {
    pub kind: Criterion,
    pub u: f64,
    pub system: SlowFastSystem,
}

impl CriterionSpec {
    pub fn new(system: SlowFastSystem, kind: Criterion, u: f64) -> Result<Self> {
        if system.name() != "davis_skodje" {
            return Err(Error::Unsupported(format!(
                "criteria are defined for the Davis-Skodje model only, not {}",
                system.name()
            )));
        }
        if !u.is_finite() || u < 0.0 {
            return Err(Error::invalid("u", u, "must be finite and non-negative"));
        }
        if let Criterion::F3 { k1, k2 } = kind {
            if !k1.is_finite() || !k2.is_finite() {
                return Err(Error::invalid("k1/k2", f64::NAN, "weights must be finite"));
            }
        }
        Ok(CriterionSpec { kind, u, system })
    }

    fn gamma(&self) -> f64 {
        self.system.param("gamma").expect("Davis-Skodje carries gamma")
    }
}

/// Value of the criterion at family parameter `c`.
pub fn eval_criterion(spec: &CriterionSpec, c: f64) -> Result<f64> {
    let a = invariant_family(&spec.system, &[c])?;
    let u = spec.u;
    let pa = a.partials(&[u], 2).expect("family lifts are differentiable");
    let y = pa.value()[0];
    let state = [u, y];
    let v = match spec.kind {
        Criterion::F1 => pa.d2(0, 0, 0).powi(2),
        Criterion::F2 => {
            let f = spec.system.rhs(&state)?;
            let j = spec.system.rhs_jacobian(&state)?;
            (0..2)
                .map(|r| (j[(r, 0)] * f[0] + j[(r, 1)] * f[1]).powi(2))
                .sum()
        }
        Criterion::F3 { k1, k2 } => {
            let f = spec.system.rhs(&state)?;
            k1 * (f[0] * f[0] + f[1] * f[1]) - k2 * (u * u + y * y)
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue {
            what: format!("criterion {}", spec.kind.label()),
            point: vec![u, c],
        })
    }
}

/// Stationary point of the criterion in `c` from the closed-form expressions.
pub fn closed_form_minimizer(spec: &CriterionSpec) -> f64 {
    let (g, u) = (spec.gamma(), spec.u);
    let w = u + 1.0;
    match spec.kind {
        Criterion::F1 => 2.0 * u.powf(2.0 - g) / (g * (g - 1.0) * w.powi(3)),
        Criterion::F2 => u * (u - 1.0) / (u.powf(g) * g * g * w.powi(3)),
        Criterion::F3 { k1, k2 } => {
            -(g * k1 - u * k2 - k2) * u / ((g * g * k1 - k2) * w * w * u.powf(g))
        }
    }
}

/// `d^2 F / dc^2` from the closed-form expressions.
pub fn closed_form_second_derivative(spec: &CriterionSpec) -> f64 {
    let (g, u) = (spec.gamma(), spec.u);
    match spec.kind {
        Criterion::F1 => 2.0 * (g * (g - 1.0) * u.powf(g - 2.0)).powi(2),
        Criterion::F2 => 2.0 * (u.powf(g) * g * g).powi(2),
        Criterion::F3 { k1, k2 } => 2.0 * u.powf(2.0 * g) * (k1 * g * g - k2),
    }
}

/// Derivative-free minimization on `[lo, hi]`: golden-section search with
/// parabolic interpolation steps (Brent's method).
pub fn brent_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-300_f64.max(tol * 1e-3);
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let z = x + d;
                if z - a < tol2 || b - z < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let z = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fz = f(z);
        if fz <= fx {
            if z >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = z;
            fx = fz;
        } else {
            if z < x {
                a = z;
            } else {
                b = z;
            }
            if fz <= fw || w == x {
                v = w;
                fv = fw;
                w = z;
                fw = fz;
            } else if fz <= fv || v == x || v == w {
                v = z;
                fv = fz;
            }
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, Serialize)]
pub struct Minimizer {
    pub criterion: Criterion,
    pub c_closed: f64,
    pub c_numeric: f64,
    pub value: f64,
    /// Second difference of the criterion around `c_numeric`.
    pub second_derivative: f64,
    pub second_derivative_closed: f64,
}

/// Closed-form minimizer cross-checked by [`brent_minimize`] on
/// `c in [-1, 1]`; disagreement beyond `1e-8` is an error.
pub fn minimize_criterion(spec: &CriterionSpec) -> Result<Minimizer> {
    let c_closed = closed_form_minimizer(spec);
    let failure = std::cell::RefCell::new(None);
    let (c_numeric, _) = brent_minimize(
        |c| match eval_criterion(spec, c) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        },
        -1.0,
        1.0,
        1e-12,
        500,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    // one parabolic step through c +- dc; exact for a quadratic criterion
    let dc = 0.1;
    let (fm, f0, fp) = (
        eval_criterion(spec, c_numeric - dc)?,
        eval_criterion(spec, c_numeric)?,
        eval_criterion(spec, c_numeric + dc)?,
    );
    let second_derivative = (fp - 2.0 * f0 + fm) / (dc * dc);
    let mut c_numeric = c_numeric;
    if second_derivative > 0.0 {
        let c = c_numeric - 0.5 * (fp - fm) / (dc * second_derivative);
        if (c - c_numeric).abs() < dc {
            c_numeric = c;
        }
    }
    let value = eval_criterion(spec, c_numeric)?;
    if !c_closed.is_finite() || (c_closed - c_numeric).abs() > 1e-8 {
        return Err(Error::MinimizerMismatch {
            closed: c_closed,
            numeric: c_numeric,
        });
    }
    Ok(Minimizer {
        criterion: spec.kind,
        c_closed,
        c_numeric,
        value,
        second_derivative,
        second_derivative_closed: closed_form_second_derivative(spec),
    })
}

/// One row of a criteria sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// `F1, F2, F3` at `samples` equidistant values of `c` in `c_range`
/// (a single sample sits at the range start).
pub fn sweep(
    system: &SlowFastSystem,
    u: f64,
    k1: f64,
    k2: f64,
    c_range: [f64; 2],
    samples: usize,
) -> Result<Vec<SweepRow>> {
    if samples == 0 {
        return Err(Error::invalid("samples", 0.0, "need at least one sample"));
    }
    if !c_range.iter().all(|v| v.is_finite()) || (samples > 1 && c_range[0] >= c_range[1]) {
        return Err(Error::invalid("c_range", c_range[0], "needs finite start < end"));
    }
    let specs = [
        CriterionSpec::new(system.clone(), Criterion::F1, u)?,
        CriterionSpec::new(system.clone(), Criterion::F2, u)?,
        CriterionSpec::new(system.clone(), Criterion::F3 { k1, k2 }, u)?,
    ];
    (0..samples)
        .map(|i| {
            let c = if samples == 1 {
                c_range[0]
            } else if i + 1 == samples {
                c_range[1]
            } else {
                c_range[0] + (c_range[1] - c_range[0]) * i as f64 / (samples - 1) as f64
            };
            Ok(SweepRow {
                c,
                f1: eval_criterion(&specs[0], c)?,
                f2: eval_criterion(&specs[1], c)?,
                f3: eval_criterion(&specs[2], c)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationReport {
    /// Largest `|K(sigma_2)|` of the slow manifold (`c = 0`) on the grid.
    pub slow_manifold_max_curvature: f64,
    /// `u` samples where `c = 0` is not the stationary point of `F3`.
    pub not_minimal_at: Vec<f64>,
    /// Per tested `c != 0`: largest grid curvature.
    pub family_max_curvature: Vec<(f64, f64)>,
    /// `(c, u)` pairs where a `c != 0` member is not strictly worse in `F3`.
    pub not_worse_at: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Checks both directions of "`a = h_eps` iff zero time-sectional curvature
/// and `F3`-minimal" on the invariant family, with `k1 = 1` and
/// `k2 = gamma/(u+1)`. Samples with `u = 0` are skipped for the
/// minimality claims.
pub fn sufficient_characterization_check(
    system: &SlowFastSystem,
    grid: &GridSpec,
    u_samples: &[f64],
    family_c: &[f64],
    curvature_tol: f64,
) -> Result<CharacterizationReport> {
    let gamma = system.param("gamma").ok_or_else(|| {
        Error::Unsupported(format!("{} is not a Davis-Skodje model", system.name()))
    })?;
    let cfg = GraphConfig::default();
    let field_max = |c: f64| -> Result<f64> {
        let a = invariant_family(system, &[c])?;
        let f = curvature_field(system, &a, grid, Route::Closed11, EvalMode::Auto, &cfg)?;
        Ok(max_abs_curvature(&f))
    };
    let slow_manifold_max_curvature = field_max(0.0)?;
    let mut not_minimal_at = Vec::new();
    let mut not_worse_at = Vec::new();
    for &u in u_samples.iter().filter(|u| **u != 0.0) {
        let spec = CriterionSpec::new(
            system.clone(),
            Criterion::F3 {
                k1: 1.0,
                k2: gamma / (u + 1.0),
            },
            u,
        )?;
        if closed_form_minimizer(&spec).abs() > 1e-10 || closed_form_second_derivative(&spec) <= 0.0 {
            not_minimal_at.push(u);
        }
        let f0 = eval_criterion(&spec, 0.0)?;
        for &c in family_c {
            if eval_criterion(&spec, c)? <= f0 {
                not_worse_at.push((c, u));
            }
        }
    }
    let family_max_curvature = family_c
        .iter()
        .map(|&c| Ok((c, field_max(c)?)))
        .collect::<Result<Vec<_>>>()?;
    let passed = slow_manifold_max_curvature <= curvature_tol
        && not_minimal_at.is_empty()
        && not_worse_at.is_empty()
        && family_max_curvature.iter().all(|(_, k)| *k <= curvature_tol);
    Ok(CharacterizationReport {
        slow_manifold_max_curvature,
        not_minimal_at,
        family_max_curvature,
        not_worse_at,
        passed,
    })
}
