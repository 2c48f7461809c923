//! Closed-form maps built from sums of products of univariate factors.
//!
//! Every closed-form graph in the model registry (critical manifolds, slow
//! manifolds, invariant families, user polynomials) has this shape, which
//! makes exact partials up to third order a matter of bookkeeping.

use crate::partials::{index_tuples, Partials};

/// A univariate factor with closed-form derivatives of every order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Univariate {
    /// `u^alpha`
    Power(f64),
    /// `u / (u + kappa)`
    Saturating(f64),
}

impl Univariate {
    /// n-th derivative at `u`.
    pub fn deriv(&self, u: f64, n: usize) -> f64 {
        match *self {
            Univariate::Power(alpha) => {
                let is_int = alpha.fract() == 0.0;
                if is_int && alpha >= 0.0 && (n as f64) > alpha {
                    return 0.0;
                }
                let mut coef = 1.0;
                for j in 0..n {
                    coef *= alpha - j as f64;
                }
                let e = alpha - n as f64;
                if is_int {
                    coef * u.powi(e as i32)
                } else {
                    coef * u.powf(e)
                }
            }
            Univariate::Saturating(kappa) => {
                let s = u + kappa;
                if n == 0 {
                    u / s
                } else {
                    let fact: f64 = (1..=n).map(|j| j as f64).product();
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    sign * kappa * fact / s.powi(n as i32 + 1)
                }
            }
        }
    }
}

/// `coef * prod_j factor_j(u[var_j])`; each variable appears at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<(usize, Univariate)>,
}

impl Term {
    pub fn constant(c: f64) -> Self {
        Term {
            coef: c,
            factors: Vec::new(),
        }
    }

    pub fn new(coef: f64, factors: Vec<(usize, Univariate)>) -> Self {
        Term { coef, factors }
    }

    /// `coef * u_var^alpha`
    pub fn power(coef: f64, var: usize, alpha: f64) -> Self {
        Term::new(coef, vec![(var, Univariate::Power(alpha))])
    }

    fn partial(&self, u: &[f64], idx: &[usize]) -> f64 {
        let mut counts = [0usize; 8];
        for &i in idx {
            counts[i] += 1;
        }
        // a derivative along a variable that no factor depends on vanishes
        for &i in idx {
            if !self.factors.iter().any(|(v, _)| *v == i) {
                return 0.0;
            }
        }
        self.coef
            * self
                .factors
                .iter()
                .map(|(v, f)| f.deriv(u[*v], counts[*v]))
                .product::<f64>()
    }
}

/// A map `R^dim -> R^out`, each component a sum of [`Term`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableMap {
    dim: usize,
    components: Vec<Vec<Term>>,
}

impl SeparableMap {
    pub fn new(dim: usize, components: Vec<Vec<Term>>) -> Self {
        assert!(dim <= 8, "separable maps support at most 8 variables");
        for c in &components {
            for t in c {
                assert!(t.factors.iter().all(|(v, _)| *v < dim));
            }
        }
        SeparableMap { dim, components }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn out(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<Term>] {
        &self.components
    }

    /// Component-wise sum.
    pub fn plus(mut self, other: SeparableMap) -> SeparableMap {
        assert_eq!((self.dim, self.out()), (other.dim, other.out()));
        for (a, b) in self.components.iter_mut().zip(other.components) {
            a.extend(b);
        }
        self
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|terms| terms.iter().map(|t| t.partial(u, &[])).sum())
            .collect()
    }

    pub fn partials(&self, u: &[f64], order: usize) -> Partials {
        let mut p = Partials::zeros(self.dim, self.out(), order);
        p.value_mut().copy_from_slice(&self.eval(u));
        for (l, terms) in self.components.iter().enumerate() {
            for n in 1..=order {
                for idx in index_tuples(self.dim, n) {
                    if idx.windows(2).any(|w| w[0] > w[1]) {
                        continue;
                    }
                    let v: f64 = terms.iter().map(|t| t.partial(u, &idx)).sum();
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
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_derivatives() {
        let f = Univariate::Saturating(1.0);
        let u = 1.0;
        assert_eq!(f.deriv(u, 0), 0.5);
        assert_eq!(f.deriv(u, 1), 0.25);
        assert_eq!(f.deriv(u, 2), -0.25);
        assert_eq!(f.deriv(u, 3), 6.0 / 16.0);
    }

    #[test]
    fn integer_powers_handle_negative_arguments() {
        let f = Univariate::Power(2.0);
        assert_eq!(f.deriv(-3.0, 0), 9.0);
        assert_eq!(f.deriv(-3.0, 1), -6.0);
        assert_eq!(f.deriv(-3.0, 3), 0.0);
        let g = Univariate::Power(3.5);
        assert!((g.deriv(4.0, 2) - 3.5 * 2.5 * 4.0f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn mixed_partials_of_product_term() {
        // x^2 y z at (1, 2, 3)
        let m = SeparableMap::new(
            3,
            vec![vec![Term::new(
                1.0,
                vec![
                    (0, Univariate::Power(2.0)),
                    (1, Univariate::Power(1.0)),
                    (2, Univariate::Power(1.0)),
                ],
            )]],
        );
        let p = m.partials(&[1.0, 2.0, 3.0], 3);
        assert_eq!(p.value()[0], 6.0);
        assert_eq!(p.d1(0, 0), 12.0);
        assert_eq!(p.d2(0, 1, 2), 1.0);
        assert_eq!(p.d2(0, 2, 1), 1.0);
        assert_eq!(p.d3(0, 0, 1, 2), 2.0);
        assert_eq!(p.d3(0, 2, 0, 1), 2.0);
        assert_eq!(p.d2(0, 1, 1), 0.0);
    }
}
