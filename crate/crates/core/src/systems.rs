//! Slow-fast model registry.
//!
//! A [`SlowFastSystem`] wraps any [`SlowFastModel`]; the five built-in
//! models carry whatever closed-form artifacts are known for them (critical
//! manifold, slow manifold, invariant families, explicit flow).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotic::AffineStructure;
use crate::error::{check_dim, Error, Result};
use crate::lift::InitialValueFunction;
use crate::separable::{SeparableMap, Term, Univariate};

/// Which side of the system the small parameter sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeConvention {
    /// `x' = f`, `y' = g / eps`: the slow variables move at unit rate.
    SlowTime,
    /// `x' = eps f`, `y' = g`: the fast variables relax at unit rate.
    FastTime,
}

/// Explicit flow of the models whose slow block is linear and diagonal and
/// whose fast block relaxes linearly onto the slow manifold:
///
/// `x_j(t) = x_j(0) e^{-slow_rates[j] t}`,
/// `y(t) = (y(0) - h(x(0))) e^{-fast_rates t} + h(x(t))`
///
/// with `h` the slow manifold graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRelaxationFlow {
    pub slow_rates: Vec<f64>,
    pub fast_rates: Vec<f64>,
}

/// A `(k, m)` slow-fast ODE. Implementors must be autonomous and immutable.
pub trait SlowFastModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn params(&self) -> Vec<(&'static str, f64)>;
    fn time_convention(&self) -> TimeConvention;

    /// Full right-hand side `(dx/dt, dy/dt)` in the model's own time.
    fn rhs(&self, state: &[f64], out: &mut [f64]);

    /// Row-major `n x n` Jacobian of [`SlowFastModel::rhs`].
    fn jacobian(&self, state: &[f64], out: &mut [f64]);

    fn critical_manifold(&self) -> Option<SeparableMap> {
        None
    }

    fn slow_manifold(&self) -> Option<SeparableMap> {
        None
    }

    /// Names of the constant free parameters of the invariant family.
    fn family_params(&self) -> &'static [&'static str] {
        &[]
    }

    /// Member of the published invariant-graph family; all-zero parameters
    /// give the slow manifold.
    fn invariant_family(&self, _free: &[f64]) -> Option<SeparableMap> {
        None
    }

    fn linear_flow(&self) -> Option<LinearRelaxationFlow> {
        None
    }

    /// Decomposition `f = f0 + F1 y`, `g = g0 + diag(g1) y` in the
    /// fast-time convention, when the model has it.
    fn affine_structure(&self) -> Option<AffineStructure> {
        None
    }

    /// Whether a slow state lies where the model's expressions are defined.
    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Closed-form artifacts of a model, when known.
#[derive(Debug, Clone)]
pub struct AnalyticArtifacts {
    pub h0: Option<SeparableMap>,
    pub h_eps: Option<SeparableMap>,
    pub flow: Option<LinearRelaxationFlow>,
}

/// Shared handle to a slow-fast model.
#[derive(Debug, Clone)]
pub struct SlowFastSystem {
    model: Arc<dyn SlowFastModel>,
}

/// Names accepted by [`SlowFastSystem::from_name`].
pub const MODEL_NAMES: [&str; 5] = [
    "davis_skodje",
    "kuehn_nonlinear",
    "enzyme_mmh",
    "ds_2_1",
    "model_3_2",
];

/// Model selection in the `{"model": ..., "params": {...}}` form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl SlowFastSystem {
    pub fn new(model: impl SlowFastModel + 'static) -> Self {
        SlowFastSystem {
            model: Arc::new(model),
        }
    }

    pub fn davis_skodje(gamma: f64) -> Result<Self> {
        Ok(Self::new(DavisSkodje::new(gamma)?))
    }

    pub fn kuehn_nonlinear(eps: f64) -> Result<Self> {
        Ok(Self::new(KuehnNonlinear::new(eps)?))
    }

    pub fn enzyme_mmh(eps: f64, kappa: f64, lambda: f64) -> Result<Self> {
        Ok(Self::new(EnzymeMmh::new(eps, kappa, lambda)?))
    }

    pub fn ds_2_1(gamma: f64) -> Result<Self> {
        Ok(Self::new(Ds21::new(gamma)?))
    }

    pub fn model_3_2(eps: f64) -> Result<Self> {
        Ok(Self::new(Model32::new(eps)?))
    }

    /// Registry lookup; missing parameters take the values used throughout
    /// the examples (gamma = 3.5, eps = 0.01, kappa = 1.5, lambda = 0.5).
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "davis_skodje" | "ds_2_1" => &["gamma"],
            "kuehn_nonlinear" | "model_3_2" => &["eps"],
            "enzyme_mmh" => &["eps", "kappa", "lambda"],
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!(
                "model {name} has no parameter `{bad}` (expected one of {allowed:?})"
            )));
        }
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        match name {
            "davis_skodje" => Self::davis_skodje(get("gamma", 3.5)),
            "ds_2_1" => Self::ds_2_1(get("gamma", 3.5)),
            "kuehn_nonlinear" => Self::kuehn_nonlinear(get("eps", 0.01)),
            "model_3_2" => Self::model_3_2(get("eps", 0.01)),
            _ => Self::enzyme_mmh(get("eps", 0.01), get("kappa", 1.5), get("lambda", 0.5)),
        }
    }

    pub fn from_selection(sel: &ModelSelection) -> Result<Self> {
        Self::from_name(&sel.model, &sel.params)
    }

    /// Parses `{"model": "davis_skodje", "params": {"gamma": 3.5}}`.
    pub fn from_json(json: &str) -> Result<Self> {
        let sel: ModelSelection =
            serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_selection(&sel)
    }

    pub fn selection(&self) -> ModelSelection {
        ModelSelection {
            model: self.name().to_string(),
            params: self
                .model
                .params()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    pub fn model(&self) -> &dyn SlowFastModel {
        self.model.as_ref()
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn slow_dim(&self) -> usize {
        self.model.slow_dim()
    }

    pub fn fast_dim(&self) -> usize {
        self.model.fast_dim()
    }

    pub fn dim(&self) -> usize {
        self.slow_dim() + self.fast_dim()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.model
            .params()
            .into_iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v)
    }

    pub fn time_convention(&self) -> TimeConvention {
        self.model.time_convention()
    }

    pub fn rhs(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), state.len())?;
        let mut out = vec![0.0; self.dim()];
        self.model.rhs(state, &mut out);
        Ok(out)
    }

    pub fn rhs_jacobian(&self, state: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), state.len())?;
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        self.model.jacobian(state, &mut out);
        Ok(DMatrix::from_row_slice(n, n, &out))
    }

    pub fn analytic(&self) -> AnalyticArtifacts {
        AnalyticArtifacts {
            h0: self.model.critical_manifold(),
            h_eps: self.model.slow_manifold(),
            flow: self.model.linear_flow(),
        }
    }

    pub fn admissible(&self, x: &[f64]) -> bool {
        self.model.admissible(x)
    }

    /// Explicit trajectory point from flow constants `(x(0), y(0) - h(x(0)))`.
    pub fn flow_solution(&self, constants: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), constants.len())?;
        let (flow, h) = match (self.model.linear_flow(), self.model.slow_manifold()) {
            (Some(f), Some(h)) => (f, h),
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} has no closed-form flow",
                    self.name()
                )))
            }
        };
        let k = self.slow_dim();
        let x: Vec<f64> = (0..k)
            .map(|j| constants[j] * (-flow.slow_rates[j] * t).exp())
            .collect();
        let hx = h.eval(&x);
        let mut out = x;
        for (l, hl) in hx.iter().enumerate() {
            out.push(constants[k + l] * (-flow.fast_rates[l] * t).exp() + hl);
        }
        Ok(out)
    }

    /// Flow constants matching an initial state (inverse of
    /// [`SlowFastSystem::flow_solution`] at `t = 0`).
    pub fn flow_constants(&self, state0: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), state0.len())?;
        let h = self.model.slow_manifold().ok_or_else(|| {
            Error::Unsupported(format!("{} has no closed-form slow manifold", self.name()))
        })?;
        let k = self.slow_dim();
        let hx = h.eval(&state0[..k]);
        let mut c = state0[..k].to_vec();
        c.extend(state0[k..].iter().zip(&hx).map(|(y, h)| y - h));
        Ok(c)
    }
}

/// Published invariant family member; all-zero parameters give `h_eps`.
pub fn invariant_family(system: &SlowFastSystem, free: &[f64]) -> Result<InitialValueFunction> {
    let names = system.model().family_params();
    if names.is_empty() {
        return Err(Error::Unsupported(format!(
            "{} has no published invariant family",
            system.name()
        )));
    }
    check_dim(names.len(), free.len())?;
    let map = system
        .model()
        .invariant_family(free)
        .expect("family parameters declared");
    Ok(InitialValueFunction::family(map, free.to_vec()))
}

/// Invariance defect `Da(x) x' - y'` evaluated on the graph `y = a(x)`, in
/// the model's own time. Zero exactly when the graph is flow-invariant.
///
/// Uses exact partials of `a` when available, else central differences with
/// step `1e-6 max(1, |x_j|)`.
pub fn invariance_residual(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    x: &[f64],
) -> Result<Vec<f64>> {
    let k = system.slow_dim();
    let m = system.fast_dim();
    check_dim(k, x.len())?;
    check_dim(m, a.fast_dim())?;
    let (y, jac) = match a.partials(x, 1) {
        Some(p) => {
            let jac: Vec<Vec<f64>> = (0..m)
                .map(|l| (0..k).map(|j| p.d1(l, j)).collect())
                .collect();
            (p.value().to_vec(), jac)
        }
        None => {
            let y = a.eval(x);
            let mut jac = vec![vec![0.0; k]; m];
            for j in 0..k {
                let h = 1e-6 * x[j].abs().max(1.0);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let (ap, am) = (a.eval(&xp), a.eval(&xm));
                for l in 0..m {
                    jac[l][j] = (ap[l] - am[l]) / (2.0 * h);
                }
            }
            (y, jac)
        }
    };
    let mut state = x.to_vec();
    state.extend_from_slice(&y);
    let f = system.rhs(&state)?;
    Ok((0..m)
        .map(|l| (0..k).map(|j| jac[l][j] * f[j]).sum::<f64>() - f[k + l])
        .collect())
}

fn pow(var: usize, alpha: f64) -> (usize, Univariate) {
    (var, Univariate::Power(alpha))
}

/// Davis-Skodje: `x' = -x`, `y' = -gamma y + ((gamma-1) x + gamma x^2)/(1+x)^2`.
#[derive(Debug, Clone)]
pub struct DavisSkodje {
    gamma: f64,
}

impl DavisSkodje {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", gamma, "Davis-Skodje requires gamma > 1"));
        }
        Ok(DavisSkodje { gamma })
    }

    fn sim(&self) -> SeparableMap {
        SeparableMap::new(
            1,
            vec![vec![Term::new(1.0, vec![(0, Univariate::Saturating(1.0))])]],
        )
    }
}

impl SlowFastModel for DavisSkodje {
    fn name(&self) -> &str {
        "davis_skodje"
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("gamma", self.gamma)]
    }
    fn time_convention(&self) -> TimeConvention {
        TimeConvention::SlowTime
    }

    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        let (x, y, g) = (s[0], s[1], self.gamma);
        out[0] = -x;
        out[1] = -g * y + ((g - 1.0) * x + g * x * x) / ((1.0 + x) * (1.0 + x));
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let (x, g) = (s[0], self.gamma);
        out[0] = -1.0;
        out[1] = 0.0;
        out[2] = ((g - 1.0) + (g + 1.0) * x) / (1.0 + x).powi(3);
        out[3] = -g;
    }

    fn critical_manifold(&self) -> Option<SeparableMap> {
        Some(self.sim())
    }
    fn slow_manifold(&self) -> Option<SeparableMap> {
        Some(self.sim())
    }
    fn family_params(&self) -> &'static [&'static str] {
        &["c"]
    }
    fn invariant_family(&self, free: &[f64]) -> Option<SeparableMap> {
        let extra = SeparableMap::new(1, vec![vec![Term::power(free[0], 0, self.gamma)]]);
        Some(self.sim().plus(extra))
    }
    fn linear_flow(&self) -> Option<LinearRelaxationFlow> {
        Some(LinearRelaxationFlow {
            slow_rates: vec![1.0],
            fast_rates: vec![self.gamma],
        })
    }
}

/// `x' = -eps x`, `y' = x^2 - y`.
#[derive(Debug, Clone)]
pub struct KuehnNonlinear {
    eps: f64,
}

impl KuehnNonlinear {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid("eps", eps, "requires 0 < eps < 1/2"));
        }
        Ok(KuehnNonlinear { eps })
    }
}

impl SlowFastModel for KuehnNonlinear {
    fn name(&self) -> &str {
        "kuehn_nonlinear"
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("eps", self.eps)]
    }
    fn time_convention(&self) -> TimeConvention {
        TimeConvention::FastTime
    }

    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        out[0] = -self.eps * s[0];
        out[1] = s[0] * s[0] - s[1];
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[-self.eps, 0.0, 2.0 * s[0], -1.0]);
    }

    fn critical_manifold(&self) -> Option<SeparableMap> {
        Some(SeparableMap::new(1, vec![vec![Term::power(1.0, 0, 2.0)]]))
    }
    fn slow_manifold(&self) -> Option<SeparableMap> {
        let c = 1.0 / (1.0 - 2.0 * self.eps);
        Some(SeparableMap::new(1, vec![vec![Term::power(c, 0, 2.0)]]))
    }
    fn family_params(&self) -> &'static [&'static str] {
        &["c"]
    }
    fn invariant_family(&self, free: &[f64]) -> Option<SeparableMap> {
        let extra = SeparableMap::new(1, vec![vec![Term::power(free[0], 0, 1.0 / self.eps)]]);
        Some(self.slow_manifold()?.plus(extra))
    }
    fn linear_flow(&self) -> Option<LinearRelaxationFlow> {
        Some(LinearRelaxationFlow {
            slow_rates: vec![self.eps],
            fast_rates: vec![1.0],
        })
    }
    fn affine_structure(&self) -> Option<AffineStructure> {
        Some(AffineStructure {
            f0: SeparableMap::new(1, vec![vec![Term::power(-1.0, 0, 1.0)]]),
            f1: vec![SeparableMap::new(1, vec![vec![]])],
            g0: SeparableMap::new(1, vec![vec![Term::power(1.0, 0, 2.0)]]),
            g1: SeparableMap::new(1, vec![vec![Term::constant(-1.0)]]),
        })
    }
}

/// Michaelis-Menten-Henri kinetics:
/// `x' = eps (-x + (x + kappa - lambda) y)`, `y' = x - (x + kappa) y`.
#[derive(Debug, Clone)]
pub struct EnzymeMmh {
    eps: f64,
    kappa: f64,
    lambda: f64,
}

impl EnzymeMmh {
    pub fn new(eps: f64, kappa: f64, lambda: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid("eps", eps, "requires eps > 0"));
        }
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda", lambda, "requires lambda > 0"));
        }
        if !(kappa > lambda && kappa.is_finite()) {
            return Err(Error::invalid("kappa", kappa, "requires kappa > lambda"));
        }
        Ok(EnzymeMmh { eps, kappa, lambda })
    }
}

impl SlowFastModel for EnzymeMmh {
    fn name(&self) -> &str {
        "enzyme_mmh"
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("eps", self.eps),
            ("kappa", self.kappa),
            ("lambda", self.lambda),
        ]
    }
    fn time_convention(&self) -> TimeConvention {
        TimeConvention::FastTime
    }

    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        let (x, y) = (s[0], s[1]);
        out[0] = self.eps * (-x + (x + self.kappa - self.lambda) * y);
        out[1] = x - (x + self.kappa) * y;
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let (x, y) = (s[0], s[1]);
        out[0] = self.eps * (y - 1.0);
        out[1] = self.eps * (x + self.kappa - self.lambda);
        out[2] = 1.0 - y;
        out[3] = -(x + self.kappa);
    }

    fn critical_manifold(&self) -> Option<SeparableMap> {
        Some(SeparableMap::new(
            1,
            vec![vec![Term::new(1.0, vec![(0, Univariate::Saturating(self.kappa))])]],
        ))
    }
    fn affine_structure(&self) -> Option<AffineStructure> {
        Some(AffineStructure {
            f0: SeparableMap::new(1, vec![vec![Term::power(-1.0, 0, 1.0)]]),
            f1: vec![SeparableMap::new(
                1,
                vec![vec![
                    Term::power(1.0, 0, 1.0),
                    Term::constant(self.kappa - self.lambda),
                ]],
            )],
            g0: SeparableMap::new(1, vec![vec![Term::power(1.0, 0, 1.0)]]),
            g1: SeparableMap::new(
                1,
                vec![vec![Term::power(-1.0, 0, 1.0), Term::constant(-self.kappa)]],
            ),
        })
    }
    fn admissible(&self, x: &[f64]) -> bool {
        x[0].is_finite() && x[0] > -self.kappa
    }
}

/// Two slow Davis-Skodje-like directions feeding one fast variable.
#[derive(Debug, Clone)]
pub struct Ds21 {
    gamma: f64,
}

impl Ds21 {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 2.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", gamma, "the (2,1) model requires gamma > 2"));
        }
        Ok(Ds21 { gamma })
    }

    fn sim(&self) -> SeparableMap {
        SeparableMap::new(
            2,
            vec![vec![
                Term::new(1.0, vec![(0, Univariate::Saturating(1.0))]),
                Term::new(2.0, vec![(1, Univariate::Saturating(1.0))]),
            ]],
        )
    }
}

impl SlowFastModel for Ds21 {
    fn name(&self) -> &str {
        "ds_2_1"
    }
    fn slow_dim(&self) -> usize {
        2
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("gamma", self.gamma)]
    }
    fn time_convention(&self) -> TimeConvention {
        TimeConvention::SlowTime
    }

    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        let (x1, x2, y, g) = (s[0], s[1], s[2], self.gamma);
        out[0] = -x1;
        out[1] = -2.0 * x2;
        out[2] = -g * y
            + ((g - 1.0) * x1 + g * x1 * x1) / ((1.0 + x1) * (1.0 + x1))
            + (2.0 * (g - 2.0) * x2 + 2.0 * g * x2 * x2) / ((1.0 + x2) * (1.0 + x2));
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let (x1, x2, g) = (s[0], s[1], self.gamma);
        out.copy_from_slice(&[
            -1.0,
            0.0,
            0.0,
            0.0,
            -2.0,
            0.0,
            ((g - 1.0) + (g + 1.0) * x1) / (1.0 + x1).powi(3),
            (2.0 * (g - 2.0) + (2.0 * g + 4.0) * x2) / (1.0 + x2).powi(3),
            -g,
        ]);
    }

    fn critical_manifold(&self) -> Option<SeparableMap> {
        Some(self.sim())
    }
    fn slow_manifold(&self) -> Option<SeparableMap> {
        Some(self.sim())
    }
    fn family_params(&self) -> &'static [&'static str] {
        &["v"]
    }
    fn invariant_family(&self, free: &[f64]) -> Option<SeparableMap> {
        let extra = SeparableMap::new(2, vec![vec![Term::power(free[0], 0, self.gamma)]]);
        Some(self.sim().plus(extra))
    }
    fn linear_flow(&self) -> Option<LinearRelaxationFlow> {
        Some(LinearRelaxationFlow {
            slow_rates: vec![1.0, 2.0],
            fast_rates: vec![self.gamma],
        })
    }
}

/// Three slow, two fast variables with polynomial coupling.
#[derive(Debug, Clone)]
pub struct Model32 {
    eps: f64,
}

impl Model32 {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid("eps", eps, "the (3,2) model requires 0 < eps < 1/2"));
        }
        Ok(Model32 { eps })
    }

    fn graph(&self, c: [f64; 4]) -> SeparableMap {
        SeparableMap::new(
            3,
            vec![
                vec![
                    Term::power(c[0], 0, 2.0),
                    Term::new(c[1], vec![pow(1, 2.0), pow(2, 1.0)]),
                ],
                vec![Term::power(c[2], 0, 4.0), Term::power(c[3], 1, 3.0)],
            ],
        )
    }
}

impl SlowFastModel for Model32 {
    fn name(&self) -> &str {
        "model_3_2"
    }
    fn slow_dim(&self) -> usize {
        3
    }
    fn fast_dim(&self) -> usize {
        2
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("eps", self.eps)]
    }
    fn time_convention(&self) -> TimeConvention {
        TimeConvention::FastTime
    }

    fn rhs(&self, s: &[f64], out: &mut [f64]) {
        let e = self.eps;
        let (x1, x2, x3, y1, y2) = (s[0], s[1], s[2], s[3], s[4]);
        out[0] = -e * x1;
        out[1] = -2.0 * e * x2;
        out[2] = -3.0 * e * x3;
        out[3] = 2.0 * x1 * x1 + x2 * x2 * x3 - 4.0 * y1;
        out[4] = 3.0 * x1.powi(4) + x2.powi(3) - 3.0 * y2;
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let e = self.eps;
        let (x1, x2, x3) = (s[0], s[1], s[2]);
        #[rustfmt::skip]
        let j = [
            -e, 0.0, 0.0, 0.0, 0.0,
            0.0, -2.0 * e, 0.0, 0.0, 0.0,
            0.0, 0.0, -3.0 * e, 0.0, 0.0,
            4.0 * x1, 2.0 * x2 * x3, x2 * x2, -4.0, 0.0,
            12.0 * x1.powi(3), 3.0 * x2 * x2, 0.0, 0.0, -3.0,
        ];
        out.copy_from_slice(&j);
    }

    fn critical_manifold(&self) -> Option<SeparableMap> {
        Some(self.graph([0.5, 0.25, 1.0, 1.0 / 3.0]))
    }
    fn slow_manifold(&self) -> Option<SeparableMap> {
        let e = self.eps;
        Some(self.graph([
            1.0 / (2.0 - e),
            1.0 / (4.0 - 7.0 * e),
            3.0 / (3.0 - 4.0 * e),
            1.0 / (3.0 - 6.0 * e),
        ]))
    }
    fn family_params(&self) -> &'static [&'static str] {
        &["v1", "v2"]
    }
    fn invariant_family(&self, free: &[f64]) -> Option<SeparableMap> {
        let e = self.eps;
        let extra = SeparableMap::new(
            3,
            vec![
                vec![Term::power(free[0], 0, 4.0 / e)],
                vec![Term::power(free[1], 0, 3.0 / e)],
            ],
        );
        Some(self.slow_manifold()?.plus(extra))
    }
    fn linear_flow(&self) -> Option<LinearRelaxationFlow> {
        let e = self.eps;
        Some(LinearRelaxationFlow {
            slow_rates: vec![e, 2.0 * e, 3.0 * e],
            fast_rates: vec![4.0, 3.0],
        })
    }
    fn affine_structure(&self) -> Option<AffineStructure> {
        let zero = || SeparableMap::new(3, vec![vec![], vec![], vec![]]);
        Some(AffineStructure {
            f0: SeparableMap::new(
                3,
                vec![
                    vec![Term::power(-1.0, 0, 1.0)],
                    vec![Term::power(-2.0, 1, 1.0)],
                    vec![Term::power(-3.0, 2, 1.0)],
                ],
            ),
            f1: vec![zero(), zero()],
            g0: self.graph([2.0, 1.0, 3.0, 1.0]),
            g1: SeparableMap::new(3, vec![vec![Term::constant(-4.0)], vec![Term::constant(-3.0)]]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn davis_skodje_rhs_matches_hand_value() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let r = s.rhs(&[1.0, 0.5]).unwrap();
        assert_eq!(r[0], -1.0);
        assert!((r[1] - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn kuehn_origin_is_equilibrium() {
        let s = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        assert_eq!(s.rhs(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn enzyme_rhs_hand_substitution() {
        let s = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        let r = s.rhs(&[1.0, 0.4]).unwrap();
        assert!((r[0] - (-0.002)).abs() < 1e-15);
        assert!(r[1].abs() < 1e-15);
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(SlowFastSystem::davis_skodje(1.0).is_err());
        assert!(SlowFastSystem::ds_2_1(2.0).is_err());
        assert!(SlowFastSystem::model_3_2(0.5).is_err());
        assert!(SlowFastSystem::model_3_2(0.0).is_err());
        assert!(SlowFastSystem::enzyme_mmh(0.01, 0.5, 0.5).is_err());
        assert!(SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.0).is_err());
        assert!(SlowFastSystem::kuehn_nonlinear(-0.1).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        assert_eq!(
            s.rhs(&[1.0]).unwrap_err(),
            Error::Dimension {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn registry_json_selection() {
        let s = SlowFastSystem::from_json(r#"{"model": "davis_skodje", "params": {"gamma": 3.5}}"#)
            .unwrap();
        assert_eq!(s.name(), "davis_skodje");
        assert_eq!(s.param("gamma"), Some(3.5));
        assert!(matches!(
            SlowFastSystem::from_json(r#"{"model": "brusselator"}"#),
            Err(Error::UnknownModel(_))
        ));
        assert!(SlowFastSystem::from_json(r#"{"model": "davis_skodje", "params": {"eps": 0.1}}"#)
            .is_err());
        for name in MODEL_NAMES {
            assert_eq!(SlowFastSystem::from_name(name, &BTreeMap::new()).unwrap().name(), name);
        }
    }

    #[test]
    fn family_values() {
        let ds = SlowFastSystem::davis_skodje(3.5).unwrap();
        assert_eq!(invariant_family(&ds, &[0.0]).unwrap().eval(&[1.0]), vec![0.5]);
        assert_eq!(invariant_family(&ds, &[1.0]).unwrap().eval(&[0.0]), vec![0.0]);
        let ku = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        let v = invariant_family(&ku, &[0.0]).unwrap().eval(&[0.5])[0];
        assert!((v - 0.25 / 0.98).abs() < 1e-15);
        let en = SlowFastSystem::enzyme_mmh(0.01, 1.5, 0.5).unwrap();
        assert!(matches!(invariant_family(&en, &[0.0]), Err(Error::Unsupported(_))));
    }
}
