//! Asymptotic expansion `h = h_0 + eps h_1 + eps^2 h_2 + ...` of the slow
//! manifold for fast-time systems that are affine in the fast variables.
//!
//! Substituting the expansion into the invariance equation
//! `eps Dh (f0 + F1 h) = g0 + diag(g1) h` and matching powers of `eps` gives
//!
//! ```text
//! h_0 = -g0 / g1
//! h_n = [ Dh_{n-1} f0 + sum_{i+j=n-1} Dh_i F1 h_j ] / g1
//! ```
//!
//! Each `h_n` is carried as a local Taylor series so the derivatives the
//! recursion needs are exact up to rounding.

use crate::error::{check_dim, Error, Result};
use crate::separable::SeparableMap;
use crate::series::{series_of_map, MonomialTable, Series};
use crate::systems::{SlowFastSystem, TimeConvention};

/// Highest supported expansion order.
pub const MAX_ORDER: usize = 8;

/// `f(x, y) = f0(x) + sum_l f1[l](x) y_l`, `g_l(x, y) = g0_l(x) + g1_l(x) y_l`.
#[derive(Debug, Clone)]
pub struct AffineStructure {
    pub f0: SeparableMap,
    /// Column `l` of `F1`, a map into the slow space.
    pub f1: Vec<SeparableMap>,
    pub g0: SeparableMap,
    pub g1: SeparableMap,
}

/// Coefficient functions `h_0, ..., h_order` of a system.
#[derive(Debug, Clone)]
pub struct AsymptoticExpansion {
    structure: AffineStructure,
    eps: f64,
    order: usize,
}

/// Builds the expansion of `system` through `order`.
pub fn asymptotic_coefficients(system: &SlowFastSystem, order: usize) -> Result<AsymptoticExpansion> {
    if order > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "asymptotic order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    if system.time_convention() != TimeConvention::FastTime {
        return Err(Error::Unsupported(format!(
            "{} is not written in fast time; no asymptotic expansion",
            system.name()
        )));
    }
    let structure = system.model().affine_structure().ok_or_else(|| {
        Error::Unsupported(format!(
            "{} is not affine in the fast variables; no asymptotic expansion",
            system.name()
        ))
    })?;
    let eps = system
        .param("eps")
        .expect("fast-time models carry an eps parameter");
    Ok(AsymptoticExpansion {
        structure,
        eps,
        order,
    })
}

impl AsymptoticExpansion {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn slow_dim(&self) -> usize {
        self.structure.f0.dim()
    }

    pub fn fast_dim(&self) -> usize {
        self.structure.g0.out()
    }

    /// Local Taylor series of `h_0 .. h_upto` at `x`, each valid through
    /// total degree `degree`. Indexed `[n][l]`.
    pub fn coefficient_series(&self, x: &[f64], upto: usize, degree: usize) -> Result<Vec<Vec<Series>>> {
        let k = self.slow_dim();
        let m = self.fast_dim();
        check_dim(k, x.len())?;
        let table = MonomialTable::new(k, degree + upto);
        let s = &self.structure;
        let f0 = series_of_map(&s.f0, x, &table);
        let f1: Vec<Vec<Series>> = s.f1.iter().map(|c| series_of_map(c, x, &table)).collect();
        let g0 = series_of_map(&s.g0, x, &table);
        let g1 = series_of_map(&s.g1, x, &table);
        let mut inv_g1 = Vec::with_capacity(m);
        for (l, g) in g1.iter().enumerate() {
            if g.value() == 0.0 || !g.value().is_finite() {
                return Err(Error::NonFiniteValue {
                    what: format!("1/g1[{l}] in asymptotic recursion"),
                    point: x.to_vec(),
                });
            }
            inv_g1.push(g.recip());
        }

        let mut h: Vec<Vec<Series>> = Vec::with_capacity(upto + 1);
        h.push(
            (0..m)
                .map(|l| g0[l].mul(&inv_g1[l]).scale(-1.0))
                .collect(),
        );
        let mut grads: Vec<Vec<Vec<Series>>> = Vec::new();
        // F1 h_j, indexed [j][r]
        let mut f1h: Vec<Vec<Series>> = Vec::new();
        for n in 1..=upto {
            let prev = n - 1;
            grads.push(
                h[prev]
                    .iter()
                    .map(|hl| (0..k).map(|r| hl.deriv(r)).collect())
                    .collect(),
            );
            f1h.push(
                (0..k)
                    .map(|r| {
                        let mut acc = Series::constant(&table, 0.0);
                        for (lp, col) in f1.iter().enumerate() {
                            acc = acc.add(&col[r].mul(&h[prev][lp]));
                        }
                        acc
                    })
                    .collect(),
            );
            let hn = (0..m)
                .map(|l| {
                    let mut acc = Series::constant(&table, 0.0);
                    for r in 0..k {
                        acc = acc.add(&grads[prev][l][r].mul(&f0[r]));
                    }
                    for i in 0..n {
                        let j = n - 1 - i;
                        for r in 0..k {
                            acc = acc.add(&grads[i][l][r].mul(&f1h[j][r]));
                        }
                    }
                    acc.mul(&inv_g1[l])
                })
                .collect();
            h.push(hn);
        }
        Ok(h)
    }

    /// Value of `h_n(x)`.
    pub fn coefficient(&self, n: usize, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.coefficient_series(x, n, 0)?;
        Ok(h[n].iter().map(|s| s.value()).collect())
    }

    /// Series of the truncation `sum_{n <= order} eps^n h_n` at `x`.
    pub(crate) fn truncation_series(&self, x: &[f64], order: usize, degree: usize) -> Result<Vec<Series>> {
        let h = self.coefficient_series(x, order, degree)?;
        let m = self.fast_dim();
        let mut out = h[0].clone();
        let mut w = 1.0;
        for hn in h.iter().skip(1) {
            w *= self.eps;
            for l in 0..m {
                out[l] = out[l].add(&hn[l].scale(w));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kuehn_coefficients_are_powers_of_two() {
        let s = SlowFastSystem::kuehn_nonlinear(0.01).unwrap();
        let e = asymptotic_coefficients(&s, 6).unwrap();
        for n in 0..=6 {
            let v = e.coefficient(n, &[0.7]).unwrap()[0];
            let exact = 2f64.powi(n as i32) * 0.49;
            assert!((v - exact).abs() < 1e-12 * exact, "n = {n}: {v} vs {exact}");
        }
    }

    #[test]
    fn enzyme_first_coefficient_by_hand() {
        // h1 = kappa lambda x / (x + kappa)^4
        let (kappa, lambda) = (1.5, 0.5);
        let s = SlowFastSystem::enzyme_mmh(0.01, kappa, lambda).unwrap();
        let e = asymptotic_coefficients(&s, 1).unwrap();
        for x in [0.0, 0.3, 1.0, 2.5] {
            let h0 = e.coefficient(0, &[x]).unwrap()[0];
            let h1 = e.coefficient(1, &[x]).unwrap()[0];
            assert!((h0 - x / (x + kappa)).abs() < 1e-15);
            let exact = kappa * lambda * x / (x + kappa).powi(4);
            assert!((h1 - exact).abs() < 1e-14, "x = {x}: {h1} vs {exact}");
        }
    }

    #[test]
    fn model_3_2_leading_order_is_critical_manifold() {
        let s = SlowFastSystem::model_3_2(0.01).unwrap();
        let e = asymptotic_coefficients(&s, 0).unwrap();
        let x = [0.3, 1.0, 0.5];
        let h0 = e.coefficient(0, &x).unwrap();
        let exact = s.analytic().h0.unwrap().eval(&x);
        for l in 0..2 {
            assert!((h0[l] - exact[l]).abs() < 1e-15);
        }
    }

    #[test]
    fn slow_time_models_are_rejected() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        assert!(matches!(
            asymptotic_coefficients(&s, 2),
            Err(Error::Unsupported(_))
        ));
        let k = SlowFastSystem::kuehn_nonlinear(0.1).unwrap();
        assert!(asymptotic_coefficients(&k, MAX_ORDER + 1).is_err());
    }
}
