//! Initial-value functions `a: R^k -> R^m` that select one trajectory per
//! slow initial condition.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::asymptotic::{asymptotic_coefficients, AsymptoticExpansion, MAX_ORDER};
use crate::error::{check_dim, Error, Result};
use crate::partials::{index_tuples, Partials};
use crate::separable::{SeparableMap, Term, Univariate};
use crate::series::Series;
use crate::systems::SlowFastSystem;

/// How a lift was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftKind {
    ClosedForm,
    AsymptoticTruncation { order: usize },
    InvariantFamily { free_parameters: Vec<f64> },
}

type LiftFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Repr {
    Separable(SeparableMap),
    Asymptotic(AsymptoticExpansion),
    Function {
        slow: usize,
        fast: usize,
        f: Arc<LiftFn>,
    },
}

/// An initial-value function together with the means to differentiate it.
#[derive(Clone)]
pub struct InitialValueFunction {
    kind: LiftKind,
    repr: Repr,
}

impl fmt::Debug for InitialValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let repr = match &self.repr {
            Repr::Separable(m) => format!("{m:?}"),
            Repr::Asymptotic(e) => format!("asymptotic(order {})", e.order()),
            Repr::Function { slow, fast, .. } => format!("fn(R^{slow} -> R^{fast})"),
        };
        f.debug_struct("InitialValueFunction")
            .field("kind", &self.kind)
            .field("repr", &repr)
            .finish()
    }
}

impl InitialValueFunction {
    pub fn closed_form(map: SeparableMap) -> Self {
        InitialValueFunction {
            kind: LiftKind::ClosedForm,
            repr: Repr::Separable(map),
        }
    }

    pub(crate) fn family(map: SeparableMap, free: Vec<f64>) -> Self {
        InitialValueFunction {
            kind: LiftKind::InvariantFamily {
                free_parameters: free,
            },
            repr: Repr::Separable(map),
        }
    }

    /// `a(x) = values` for every `x` in `R^slow`.
    pub fn constant(slow: usize, values: &[f64]) -> Self {
        Self::closed_form(SeparableMap::new(
            slow,
            values.iter().map(|&v| vec![Term::constant(v)]).collect(),
        ))
    }

    /// Scalar polynomial `c0 + c1 x + c2 x^2 + ...` for one slow and one
    /// fast variable.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| {
                if n == 0 {
                    Term::constant(c)
                } else {
                    Term::new(c, vec![(0, Univariate::Power(n as f64))])
                }
            })
            .collect();
        Self::closed_form(SeparableMap::new(1, vec![terms]))
    }

    /// Arbitrary closure; partials are unavailable, so only numerical
    /// differentiation paths accept it.
    pub fn from_fn(
        slow: usize,
        fast: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        InitialValueFunction {
            kind: LiftKind::ClosedForm,
            repr: Repr::Function {
                slow,
                fast,
                f: Arc::new(f),
            },
        }
    }

    /// The truncation `h_0 + eps h_1 + ... + eps^order h_order`.
    pub fn asymptotic(system: &SlowFastSystem, order: usize) -> Result<Self> {
        let exp = asymptotic_coefficients(system, order)?;
        Ok(InitialValueFunction {
            kind: LiftKind::AsymptoticTruncation { order },
            repr: Repr::Asymptotic(exp),
        })
    }

    /// The critical manifold graph `h_0`.
    pub fn critical_manifold(system: &SlowFastSystem) -> Result<Self> {
        system
            .analytic()
            .h0
            .map(Self::closed_form)
            .ok_or_else(|| Error::Unsupported(format!("{} has no critical manifold graph", system.name())))
    }

    /// The slow manifold graph `h_eps`: the closed form when one is known,
    /// otherwise the asymptotic expansion at [`MAX_ORDER`].
    pub fn slow_manifold(system: &SlowFastSystem) -> Result<Self> {
        match system.analytic().h_eps {
            Some(h) => Ok(Self::closed_form(h)),
            None => Self::asymptotic(system, MAX_ORDER),
        }
    }

    /// Whether exact partials are available.
    pub fn differentiable(&self) -> bool {
        !matches!(self.repr, Repr::Function { .. })
    }

    pub fn kind(&self) -> &LiftKind {
        &self.kind
    }

    /// The separable representation, when the lift has one.
    pub fn separable(&self) -> Option<&SeparableMap> {
        match &self.repr {
            Repr::Separable(m) => Some(m),
            _ => None,
        }
    }

    pub fn slow_dim(&self) -> usize {
        match &self.repr {
            Repr::Separable(m) => m.dim(),
            Repr::Asymptotic(e) => e.slow_dim(),
            Repr::Function { slow, .. } => *slow,
        }
    }

    pub fn fast_dim(&self) -> usize {
        match &self.repr {
            Repr::Separable(m) => m.out(),
            Repr::Asymptotic(e) => e.fast_dim(),
            Repr::Function { fast, .. } => *fast,
        }
    }

    /// Panics if `x` has the wrong length; see [`InitialValueFunction::try_eval`].
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.try_eval(x).expect("lift evaluation")
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.slow_dim(), x.len())?;
        match &self.repr {
            Repr::Separable(m) => Ok(m.eval(x)),
            Repr::Asymptotic(e) => Ok(e
                .truncation_series(x, e.order(), 0)?
                .iter()
                .map(Series::value)
                .collect()),
            Repr::Function { f, fast, .. } => {
                let v = f(x);
                check_dim(*fast, v.len())?;
                Ok(v)
            }
        }
    }

    /// Exact partials through `order` (at most 3), or `None` for closures.
    pub fn partials(&self, x: &[f64], order: usize) -> Option<Partials> {
        if x.len() != self.slow_dim() {
            return None;
        }
        match &self.repr {
            Repr::Separable(m) => Some(m.partials(x, order)),
            Repr::Asymptotic(e) => {
                let s = e.truncation_series(x, e.order(), order).ok()?;
                Some(partials_from_series(&s, self.slow_dim(), order))
            }
            Repr::Function { .. } => None,
        }
    }
}

fn partials_from_series(s: &[Series], dim: usize, order: usize) -> Partials {
    let mut p = Partials::zeros(dim, s.len(), order);
    for (l, sl) in s.iter().enumerate() {
        p.value_mut()[l] = sl.value();
        for n in 1..=order {
            for idx in index_tuples(dim, n) {
                if idx.windows(2).any(|w| w[0] > w[1]) {
                    continue;
                }
                let mut alpha = vec![0u8; dim];
                for &i in &idx {
                    alpha[i] += 1;
                }
                let v = sl.partial_at_base(&alpha);
                match n {
                    1 => p.set_d1(l, idx[0], v),
                    2 => p.set_d2(l, idx[0], idx[1], v),
                    _ => p.set_d3(l, idx[0], idx[1], idx[2], v),
                }
            }
        }
    }
    p
}
