//! Truncated multivariate Taylor series around a base point.
//!
//! Used to carry the asymptotic slow-manifold recursion exactly to rounding:
//! every coefficient `h_n` needs derivatives of `h_{n-1}`, so representing
//! each `h_n` by its local Taylor polynomial turns differentiation into an
//! index shift instead of a nested difference quotient.

use std::collections::HashMap;
use std::sync::Arc;

use crate::separable::SeparableMap;

/// Monomials `delta^alpha` with `|alpha| <= degree`, graded order.
#[derive(Debug)]
pub struct MonomialTable {
    nvars: usize,
    degree: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl MonomialTable {
    pub fn new(nvars: usize, degree: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut frontier = exps.clone();
        for _ in 0..degree {
            let mut next = Vec::new();
            for e in &frontier {
                // extend only at or after the last nonzero position to avoid duplicates
                let last = e.iter().rposition(|&v| v > 0).unwrap_or(0);
                for j in last..nvars {
                    let mut f = e.clone();
                    f[j] += 1;
                    next.push(f);
                }
            }
            exps.extend(next.iter().cloned());
            frontier = next;
        }
        let index = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Arc::new(MonomialTable {
            nvars,
            degree,
            exps,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn deg(&self, i: usize) -> usize {
        self.exps[i].iter().map(|&v| v as usize).sum()
    }

    pub fn index_of(&self, exp: &[u8]) -> Option<usize> {
        self.index.get(exp).copied()
    }
}

/// A Taylor polynomial in the local offsets `delta = x - x0`, valid through
/// total degree `valid`; coefficients above it are unknown and kept at zero.
#[derive(Debug, Clone)]
pub struct Series {
    table: Arc<MonomialTable>,
    valid: usize,
    c: Vec<f64>,
}

impl Series {
    pub fn constant(table: &Arc<MonomialTable>, v: f64) -> Self {
        let mut c = vec![0.0; table.len()];
        c[0] = v;
        Series {
            table: table.clone(),
            valid: table.degree,
            c,
        }
    }

    /// Taylor series of a univariate function in variable `var`, from its
    /// derivatives `derivs(n)` at the base point.
    pub fn univariate(
        table: &Arc<MonomialTable>,
        var: usize,
        derivs: impl Fn(usize) -> f64,
    ) -> Self {
        let mut s = Series::constant(table, 0.0);
        let mut fact = 1.0;
        let mut e = vec![0u8; table.nvars];
        for n in 0..=table.degree {
            if n > 0 {
                fact *= n as f64;
            }
            e[var] = n as u8;
            let i = table.index_of(&e).expect("monomial in table");
            s.c[i] = derivs(n) / fact;
        }
        s
    }

    pub fn valid_degree(&self) -> usize {
        self.valid
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn truncate_to(&mut self, valid: usize) {
        self.valid = valid;
        for i in 0..self.c.len() {
            if self.table.deg(i) > valid {
                self.c[i] = 0.0;
            }
        }
    }

    pub fn add(&self, o: &Series) -> Series {
        let mut r = self.clone();
        r.c.iter_mut().zip(&o.c).for_each(|(a, b)| *a += b);
        r.truncate_to(self.valid.min(o.valid));
        r
    }

    pub fn scale(&self, s: f64) -> Series {
        let mut r = self.clone();
        r.c.iter_mut().for_each(|a| *a *= s);
        r
    }

    pub fn mul(&self, o: &Series) -> Series {
        let valid = self.valid.min(o.valid);
        let t = &self.table;
        let mut c = vec![0.0; t.len()];
        let mut e = vec![0u8; t.nvars];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0.0 || t.deg(i) > valid {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                if b == 0.0 || t.deg(i) + t.deg(j) > valid {
                    continue;
                }
                for v in 0..t.nvars {
                    e[v] = t.exps[i][v] + t.exps[j][v];
                }
                c[t.index_of(&e).expect("monomial in table")] += a * b;
            }
        }
        Series {
            table: t.clone(),
            valid,
            c,
        }
    }

    /// Multiplicative inverse by Newton iteration `r <- r (2 - s r)`, which
    /// doubles the number of correct degrees per sweep.
    pub fn recip(&self) -> Series {
        let mut r = Series::constant(&self.table, 1.0 / self.c[0]);
        r.truncate_to(self.valid);
        let mut correct = 0usize;
        while correct < self.valid {
            let sr = self.mul(&r);
            let two_minus = Series::constant(&self.table, 2.0).add(&sr.scale(-1.0));
            r = r.mul(&two_minus);
            correct = 2 * correct + 1;
        }
        r
    }

    /// Partial derivative along `var`; lowers the valid degree by one.
    pub fn deriv(&self, var: usize) -> Series {
        let t = &self.table;
        let mut c = vec![0.0; t.len()];
        let mut e = vec![0u8; t.nvars];
        for (i, &a) in self.c.iter().enumerate() {
            let n = t.exps[i][var];
            if a == 0.0 || n == 0 {
                continue;
            }
            e.copy_from_slice(&t.exps[i]);
            e[var] -= 1;
            c[t.index_of(&e).expect("monomial in table")] += a * n as f64;
        }
        let mut r = Series {
            table: t.clone(),
            valid: self.valid.saturating_sub(1),
            c,
        };
        r.truncate_to(r.valid);
        r
    }

    /// Partial derivative of order `alpha` at the base point.
    pub fn partial_at_base(&self, alpha: &[u8]) -> f64 {
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a as usize).map(|j| j as f64).product::<f64>())
            .product();
        self.table
            .index_of(alpha)
            .map(|i| self.c[i] * fact)
            .unwrap_or(0.0)
    }
}

/// Taylor series of each output component of a separable map at `x0`.
pub fn series_of_map(map: &SeparableMap, x0: &[f64], table: &Arc<MonomialTable>) -> Vec<Series> {
    map.components()
        .iter()
        .map(|terms| {
            let mut acc = Series::constant(table, 0.0);
            for term in terms {
                let mut prod = Series::constant(table, term.coef);
                for (var, f) in &term.factors {
                    let u = x0[*var];
                    let s = Series::univariate(table, *var, |n| f.deriv(u, n));
                    prod = prod.mul(&s);
                }
                acc = acc.add(&prod);
            }
            acc
        })
        .collect()
}
