//! Dormand-Prince 5(4) integrator with step-size control and the pair's
//! fourth-order continuous extension.
//!
//! Integration may run backward (`t_end < t0`); trajectories are always
//! stored with ascending times.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::systems::SlowFastSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; `None` picks one from the local derivatives.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) {
            return Err(Error::invalid("rtol", self.rtol, "must be positive"));
        }
        if !(self.atol > 0.0) {
            return Err(Error::invalid("atol", self.atol, "must be positive"));
        }
        if !(self.h_min > 0.0) {
            return Err(Error::invalid("h_min", self.h_min, "must be positive"));
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0) {
                return Err(Error::invalid("h_init", h, "must be positive"));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", 0.0, "must be at least 1"));
        }
        Ok(())
    }
}

/// Accepted steps of one integration plus the dense-output coefficients of
/// every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    /// Per interval `[times[i], times[i+1]]`: the step's start time, signed
    /// step and five coefficient vectors.
    dense: Vec<DenseStep>,
}

#[derive(Debug, Clone)]
struct DenseStep {
    t_old: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.states[self.states.len() - 1]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// State at any time inside the covered interval; exact at nodes.
    pub fn dense_eval(&self, t: f64) -> Option<Vec<f64>> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return None;
        }
        let i = self.times.partition_point(|&s| s < t);
        if i < self.times.len() && self.times[i] == t {
            return Some(self.states[i].clone());
        }
        let d = &self.dense[i - 1];
        let th = (t - d.t_old) / d.h;
        let th1 = 1.0 - th;
        Some(
            (0..d.r[0].len())
                .map(|j| {
                    d.r[0][j] + th * (d.r[1][j] + th1 * (d.r[2][j] + th * (d.r[3][j] + th1 * d.r[4][j])))
                })
                .collect(),
        )
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Stage vectors of one Dormand-Prince step.
struct Stages {
    k: [Vec<f64>; 7],
    y_new: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_new: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Fills stages 2..7 given `k[0] = f(y)`; `k[6]` ends up as `f(y_new)`.
    fn step<F: Fn(&[f64], &mut [f64])>(&mut self, f: &F, y: &[f64], h: f64) {
        let n = y.len();
        let combos: [(usize, &[f64]); 5] = [
            (1, &[A21]),
            (2, &[A31, A32]),
            (3, &[A41, A42, A43]),
            (4, &[A51, A52, A53, A54]),
            (5, &[A61, A62, A63, A64, A65]),
        ];
        for (stage, coefs) in combos {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, c) in coefs.iter().enumerate() {
                    acc += c * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            f(&self.tmp, &mut self.k[stage]);
        }
        for i in 0..n {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        f(&self.y_new, &mut self.k[6]);
    }

    fn error_norm(&self, y: &[f64], h: f64, cfg: &IntegratorConfig) -> f64 {
        let n = y.len();
        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sk = cfg.atol + cfg.rtol * y[i].abs().max(self.y_new[i].abs());
            acc += (e / sk).powi(2);
        }
        (acc / n as f64).sqrt()
    }

    fn dense(&self, y: &[f64], t_old: f64, h: f64) -> DenseStep {
        let n = y.len();
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * self.k[6][i] - bspl;
            r[4][i] = h
                * (D1 * self.k[0][i]
                    + D3 * self.k[2][i]
                    + D4 * self.k[3][i]
                    + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
        DenseStep { t_old, h, r }
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn initial_step<F: Fn(&[f64], &mut [f64])>(
    f: &F,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let n = y0.len() as f64;
    let sk: Vec<f64> = y0.iter().map(|y| cfg.atol + cfg.rtol * y.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter()
            .zip(&sk)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + dir * h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = if all_finite(&diff) {
        norm(&diff) / h0
    } else {
        f64::INFINITY
    };
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates the autonomous system `y' = f(y)` from `t0` to `t_end`.
pub fn integrate_fn<F: Fn(&[f64], &mut [f64])>(
    f: F,
    state0: &[f64],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = state0.len();
    if !all_finite(state0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::NonFinite { t: t0 });
    }
    let mut times = vec![t0];
    let mut states = vec![state0.to_vec()];
    let mut dense = Vec::new();
    if t_end == t0 {
        return Ok(Trajectory {
            times,
            states,
            dense,
        });
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();

    let mut st = Stages::new(n);
    let mut y = state0.to_vec();
    f(&y, &mut st.k[0]);
    if !all_finite(&st.k[0]) {
        return Err(Error::NonFinite { t: t0 });
    }
    let mut h = cfg
        .h_init
        .unwrap_or_else(|| initial_step(&f, &y, &st.k[0].clone(), dir, span, cfg))
        .min(span);
    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0usize;
    const BETA: f64 = 0.04;
    const SAFE: f64 = 0.9;
    loop {
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        let mut last = false;
        if (t + 1.01 * dir * h - t_end) * dir >= 0.0 {
            h = (t_end - t).abs();
            last = true;
        }
        if h < cfg.h_min && !last {
            return Err(Error::StepUnderflow { t, h });
        }
        steps += 1;
        let hs = dir * h;
        st.step(&f, &y, hs);
        let trial_ok = all_finite(&st.y_new) && st.k.iter().all(|k| all_finite(k));
        let err = if trial_ok {
            st.error_norm(&y, hs, cfg)
        } else {
            f64::INFINITY
        };
        if err.is_finite() && err <= 1.0 {
            let fac11 = err.powf(0.2 - BETA * 0.75);
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(0.2, 10.0);
            facold = err.max(1e-4);
            dense.push(st.dense(&y, t, hs));
            t = if last { t_end } else { t + hs };
            y.copy_from_slice(&st.y_new);
            let (first, rest) = st.k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            times.push(t);
            states.push(y.clone());
            if last {
                break;
            }
            let mut hnew = h / fac;
            if reject {
                hnew = hnew.min(h);
            }
            reject = false;
            h = hnew;
        } else {
            if h <= cfg.h_min {
                if !trial_ok {
                    return Err(Error::NonFinite { t });
                }
                return Err(Error::StepUnderflow { t, h });
            }
            let shrink = if err.is_finite() {
                (err.powf(0.2 - BETA * 0.75) / SAFE).min(5.0)
            } else {
                5.0
            };
            h = (h / shrink).max(cfg.h_min);
            reject = true;
        }
    }
    if dir < 0.0 {
        times.reverse();
        states.reverse();
        dense.reverse();
    }
    Ok(Trajectory {
        times,
        states,
        dense,
    })
}

/// Integrates a registered system in its own time variable.
pub fn integrate(
    system: &SlowFastSystem,
    state0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_dim(system.dim(), state0.len())?;
    let model = system.model();
    integrate_fn(|y, out| model.rhs(y, out), state0, t_span[0], t_span[1], cfg)
}

/// Steps through a prescribed time mesh (`mesh[0]` is the start) with one
/// Dormand-Prince step per interval and no error control, returning the
/// final state. With a mesh fixed in advance the result is a smooth
/// function of the initial state and of the mesh end points, which keeps
/// finite differences of it free of step-selection noise.
pub fn integrate_on_mesh<F: Fn(&[f64], &mut [f64])>(
    f: F,
    state0: &[f64],
    mesh: &[f64],
) -> Result<Vec<f64>> {
    let n = state0.len();
    let mut y = state0.to_vec();
    let mut st = Stages::new(n);
    if mesh.len() < 2 {
        return Ok(y);
    }
    f(&y, &mut st.k[0]);
    for w in mesh.windows(2) {
        let h = w[1] - w[0];
        st.step(&f, &y, h);
        if !all_finite(&st.y_new) {
            return Err(Error::NonFinite { t: w[1] });
        }
        y.copy_from_slice(&st.y_new);
        let (first, rest) = st.k.split_at_mut(1);
        first[0].copy_from_slice(&rest[5]);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_exact(t: f64) -> [f64; 2] {
        let x = (-t).exp();
        [x, x / (1.0 + x)]
    }

    #[test]
    fn davis_skodje_on_slow_manifold() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let tr = integrate(&s, &[1.0, 0.5], [0.0, 1.0], &IntegratorConfig::default()).unwrap();
        let e = ds_exact(1.0);
        assert!((tr.last()[0] - e[0]).abs() < 1e-10);
        assert!((tr.last()[1] - e[1]).abs() < 1e-10);
    }

    #[test]
    fn zero_length_span_is_single_node() {
        let s = SlowFastSystem::kuehn_nonlinear(0.1).unwrap();
        let tr = integrate(&s, &[1.0, 2.0], [0.5, 0.5], &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.first(), &[1.0, 2.0]);
    }

    #[test]
    fn backward_integration_returns_ascending_times() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let e = ds_exact(1.0);
        let tr = integrate(&s, &e, [1.0, 0.0], &IntegratorConfig::default()).unwrap();
        assert!(tr.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(tr.t_start(), 0.0);
        assert!((tr.first()[0] - 1.0).abs() < 1e-9);
        assert!((tr.first()[1] - 0.5).abs() < 1e-9);
        assert_eq!(tr.last(), &e);
    }

    #[test]
    fn dense_output_is_exact_at_nodes_and_accurate_between() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let tr = integrate(&s, &[1.0, 0.5], [0.0, 2.0], &IntegratorConfig::default()).unwrap();
        for (t, y) in tr.times().iter().zip(tr.states()) {
            assert_eq!(&tr.dense_eval(*t).unwrap(), y);
        }
        for i in 0..40 {
            let t = 0.05 * i as f64 + 0.013;
            let v = tr.dense_eval(t).unwrap();
            let e = ds_exact(t);
            assert!((v[0] - e[0]).abs() < 1e-8 && (v[1] - e[1]).abs() < 1e-8);
        }
        assert!(tr.dense_eval(2.5).is_none());
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        assert!(matches!(
            integrate(&s, &[-1.0, 0.0], [0.0, 1.0], &IntegratorConfig::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn max_steps_is_enforced() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..IntegratorConfig::default()
        };
        assert_eq!(
            integrate(&s, &[1.0, 0.5], [0.0, 10.0], &cfg).unwrap_err(),
            Error::MaxSteps(3)
        );
    }

    #[test]
    fn mesh_integration_matches_adaptive() {
        let s = SlowFastSystem::davis_skodje(3.5).unwrap();
        let m = s.model();
        let mesh: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let y = integrate_on_mesh(|y, o| m.rhs(y, o), &[1.0, 0.5], &mesh).unwrap();
        let e = ds_exact(1.0);
        assert!((y[0] - e[0]).abs() < 1e-11 && (y[1] - e[1]).abs() < 1e-11);
    }
}
