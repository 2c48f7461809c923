//! Dense storage for a vector-valued map's value and partial derivatives up
//! to third order, plus the two calculus rules the closed-form graphs need:
//! the chain rule for a composition and the Leibniz rule for a product with
//! a purely time-dependent factor.

/// Value and partials (orders 1..=3) of a map `R^dim -> R^out` at one point.
///
/// Tensors are stored in full, symmetric entries duplicated, so indexing is
/// plain `[l][i][j][k]` arithmetic. Dimensions here never exceed a handful.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    dim: usize,
    out: usize,
    order: usize,
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Partials {
    pub fn zeros(dim: usize, out: usize, order: usize) -> Self {
        assert!(order <= 3, "partials are tracked up to third order");
        Partials {
            dim,
            out,
            order,
            value: vec![0.0; out],
            d1: vec![0.0; if order >= 1 { out * dim } else { 0 }],
            d2: vec![0.0; if order >= 2 { out * dim * dim } else { 0 }],
            d3: vec![0.0; if order >= 3 { out * dim * dim * dim } else { 0 }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn out(&self) -> usize {
        self.out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [f64] {
        &mut self.value
    }

    pub fn d1(&self, l: usize, i: usize) -> f64 {
        self.d1[l * self.dim + i]
    }

    pub fn d2(&self, l: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.d2[(l * d + i) * d + j]
    }

    pub fn d3(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let d = self.dim;
        self.d3[((l * d + i) * d + j) * d + k]
    }

    pub fn set_d1(&mut self, l: usize, i: usize, v: f64) {
        let d = self.dim;
        self.d1[l * d + i] = v;
    }

    /// Sets a second partial and its mirror.
    pub fn set_d2(&mut self, l: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.d2[(l * d + i) * d + j] = v;
        self.d2[(l * d + j) * d + i] = v;
    }

    /// Sets a third partial and all its index permutations.
    pub fn set_d3(&mut self, l: usize, i: usize, j: usize, k: usize, v: f64) {
        let d = self.dim;
        for (a, b, c) in [
            (i, j, k),
            (i, k, j),
            (j, i, k),
            (j, k, i),
            (k, i, j),
            (k, j, i),
        ] {
            self.d3[((l * d + a) * d + b) * d + c] = v;
        }
    }

    /// Partial derivative of component `l` along the multiset `idx`
    /// (`idx.len()` is the derivative order, 0..=3).
    pub fn get(&self, l: usize, idx: &[usize]) -> f64 {
        match *idx {
            [] => self.value[l],
            [i] => self.d1(l, i),
            [i, j] => self.d2(l, i, j),
            [i, j, k] => self.d3(l, i, j, k),
            _ => panic!("derivative order above 3"),
        }
    }

    /// Adds `v` to the partial along `idx` (no mirroring; callers loop over
    /// every index tuple).
    fn add_raw(&mut self, l: usize, idx: &[usize], v: f64) {
        let d = self.dim;
        match *idx {
            [] => self.value[l] += v,
            [i] => self.d1[l * d + i] += v,
            [i, j] => self.d2[(l * d + i) * d + j] += v,
            [i, j, k] => self.d3[((l * d + i) * d + j) * d + k] += v,
            _ => panic!("derivative order above 3"),
        }
    }

    /// Largest deviation between `d2[l][i][j]` and `d2[l][j][i]` (and the
    /// analogous permutations of `d3`).
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for l in 0..self.out {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if self.order >= 2 {
                        defect = defect.max((self.d2(l, i, j) - self.d2(l, j, i)).abs());
                    }
                    if self.order >= 3 {
                        for k in 0..self.dim {
                            let v = self.d3(l, i, j, k);
                            defect = defect
                                .max((v - self.d3(l, j, i, k)).abs())
                                .max((v - self.d3(l, i, k, j)).abs());
                        }
                    }
                }
            }
        }
        defect
    }

    pub fn all_finite(&self) -> bool {
        self.value
            .iter()
            .chain(&self.d1)
            .chain(&self.d2)
            .chain(&self.d3)
            .all(|v| v.is_finite())
    }

    /// Restricts to lower order.
    pub fn truncate(mut self, order: usize) -> Self {
        if order < 3 {
            self.d3.clear();
        }
        if order < 2 {
            self.d2.clear();
        }
        if order < 1 {
            self.d1.clear();
        }
        self.order = self.order.min(order);
        self
    }

    /// `self + other` for maps of identical shape.
    pub fn add(&mut self, other: &Partials) {
        assert_eq!((self.dim, self.out), (other.dim, other.out));
        let order = self.order.min(other.order);
        for (a, b) in self.value.iter_mut().zip(&other.value) {
            *a += b;
        }
        if order >= 1 {
            self.d1.iter_mut().zip(&other.d1).for_each(|(a, b)| *a += b);
        }
        if order >= 2 {
            self.d2.iter_mut().zip(&other.d2).for_each(|(a, b)| *a += b);
        }
        if order >= 3 {
            self.d3.iter_mut().zip(&other.d3).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self
            .value
            .iter_mut()
            .chain(self.d1.iter_mut())
            .chain(self.d2.iter_mut())
            .chain(self.d3.iter_mut())
        {
            *v *= s;
        }
    }
}

/// Every index tuple of length `n` over `0..dim`.
pub(crate) fn index_tuples(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..dim).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// All ways to split an index tuple into set partitions, restricted to the
/// forms the third-order chain rule needs.
fn partitions(idx: &[usize]) -> Vec<Vec<Vec<usize>>> {
    match *idx {
        [] => vec![vec![]],
        [a] => vec![vec![vec![a]]],
        [a, b] => vec![vec![vec![a], vec![b]], vec![vec![a, b]]],
        [a, b, c] => vec![
            vec![vec![a], vec![b], vec![c]],
            vec![vec![a, b], vec![c]],
            vec![vec![a, c], vec![b]],
            vec![vec![b, c], vec![a]],
            vec![vec![a, b, c]],
        ],
        _ => panic!("derivative order above 3"),
    }
}

/// Partials of `outer ∘ inner` from those of `outer` (taken at `inner`'s
/// value) and `inner`: the multivariate Faà di Bruno formula to third order.
pub fn compose(outer: &Partials, inner: &Partials) -> Partials {
    assert_eq!(outer.dim, inner.out, "composition shape mismatch");
    let order = outer.order.min(inner.order);
    let mut res = Partials::zeros(inner.dim, outer.out, order);
    res.value.copy_from_slice(&outer.value);
    for n in 1..=order {
        for idx in index_tuples(inner.dim, n) {
            for part in partitions(&idx) {
                // sum over outer indices (one per block)
                for outer_idx in index_tuples(outer.dim, part.len()) {
                    let inner_factor: f64 = part
                        .iter()
                        .zip(&outer_idx)
                        .map(|(block, &o)| inner.get(o, block))
                        .product();
                    if inner_factor == 0.0 {
                        continue;
                    }
                    for l in 0..outer.out {
                        let v = outer.get(l, &outer_idx) * inner_factor;
                        res.add_raw(l, &idx, v);
                    }
                }
            }
        }
    }
    res
}

/// Partials of `f_l(z) * e_l(z_time)` where each `e_l` depends on coordinate
/// `time` only; `e_derivs[l][n]` is the n-th derivative of `e_l`.
pub fn times_time_factor(f: &Partials, time: usize, e_derivs: &[[f64; 4]]) -> Partials {
    assert_eq!(e_derivs.len(), f.out);
    let mut res = Partials::zeros(f.dim, f.out, f.order);
    for n in 0..=f.order {
        for idx in index_tuples(f.dim, n) {
            // Leibniz: split positions into (to f, to e); e-part must be all `time`.
            for mask in 0u32..(1 << n) {
                let (mut fi, mut en) = (Vec::new(), 0usize);
                let mut ok = true;
                for (p, &i) in idx.iter().enumerate() {
                    if mask & (1 << p) != 0 {
                        if i != time {
                            ok = false;
                            break;
                        }
                        en += 1;
                    } else {
                        fi.push(i);
                    }
                }
                if !ok {
                    continue;
                }
                for l in 0..f.out {
                    res.add_raw(l, &idx, f.get(l, &fi) * e_derivs[l][en]);
                }
            }
        }
    }
    res
}
