//! Tensor-product grids over `(t, x_1, ..., x_k)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One equidistant axis `start, ..., end` with `count` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Axis {
    pub fn node(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.start
        } else if i + 1 == self.count {
            self.end
        } else {
            self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64
        }
    }
}

/// Axis 0 is time, axes `1..=k` are the slow variables. Nodes are ordered
/// with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.len() < 2 {
            return Err(Error::Parse("a grid needs a time axis and at least one slow axis".into()));
        }
        for ax in &axes {
            if ax.count == 0 {
                return Err(Error::Parse(format!("axis {} has no nodes", ax.name)));
            }
            if !ax.start.is_finite() || !ax.end.is_finite() {
                return Err(Error::Parse(format!("axis {} has a non-finite bound", ax.name)));
            }
            if ax.count > 1 && ax.start == ax.end {
                return Err(Error::Parse(format!(
                    "axis {} is degenerate but asks for {} nodes",
                    ax.name, ax.count
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    /// Uniform grid `t in [t0, t1]`, `x_j in x_ranges[j]`.
    pub fn uniform(t_range: [f64; 2], n_t: usize, x_ranges: &[[f64; 2]], n_x: &[usize]) -> Result<Self> {
        if x_ranges.len() != n_x.len() {
            return Err(Error::Dimension {
                expected: x_ranges.len(),
                got: n_x.len(),
            });
        }
        let mut axes = vec![Axis {
            name: "t".into(),
            start: t_range[0],
            end: t_range[1],
            count: n_t,
        }];
        for (j, (r, &n)) in x_ranges.iter().zip(n_x).enumerate() {
            axes.push(Axis {
                name: format!("x{}", j + 1),
                start: r[0],
                end: r[1],
                count: n,
            });
        }
        Self::new(axes)
    }

    /// Single node `(t, x)`.
    pub fn point(t: f64, x: &[f64]) -> Self {
        let mut axes = vec![Axis {
            name: "t".into(),
            start: t,
            end: t,
            count: 1,
        }];
        for (j, &v) in x.iter().enumerate() {
            axes.push(Axis {
                name: format!("x{}", j + 1),
                start: v,
                end: v,
                count: 1,
            });
        }
        GridSpec { axes }
    }

    pub fn slow_dim(&self) -> usize {
        self.axes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `n` as `(t, x_1, ..., x_k)`.
    pub fn node(&self, mut n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (d, ax) in self.axes.iter().enumerate().rev() {
            out[d] = ax.node(n % ax.count);
            n /= ax.count;
        }
        out
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|n| self.node(n)).collect()
    }
}

/// `t=0:2:10,x1=0:3:20` (name=start:end:count per axis; `t` first, then
/// `x1..xk` in order).
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for (pos, part) in s.split(',').map(str::trim).enumerate() {
            let (name, spec) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("grid axis `{part}` lacks `name=`")))?;
            let expected = if pos == 0 { "t".to_string() } else { format!("x{pos}") };
            if name.trim() != expected {
                return Err(Error::Parse(format!(
                    "grid axis {pos} must be named `{expected}`, found `{name}`"
                )));
            }
            let fields: Vec<&str> = spec.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "grid axis `{part}` must read name=start:end:count"
                )));
            }
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{v}` in grid axis `{part}`")))
            };
            let count = fields[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad node count in grid axis `{part}`")))?;
            axes.push(Axis {
                name: expected,
                start: num(fields[0])?,
                end: num(fields[1])?,
                count,
            });
        }
        GridSpec::new(axes)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{}={}:{}:{}", a.name, a.start, a.end, a.count))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_enumerate() {
        let g: GridSpec = "t=0:2:3,x1=0:3:4".parse().unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.node(0), vec![0.0, 0.0]);
        assert_eq!(g.node(1), vec![0.0, 1.0]);
        assert_eq!(g.node(11), vec![2.0, 3.0]);
        assert_eq!(g.to_string(), "t=0:2:3,x1=0:3:4");
    }

    #[test]
    fn rejects_malformed_grids() {
        for bad in [
            "t=0:2:0,x1=0:1:2",
            "t=0:2,x1=0:1:2",
            "x1=0:1:2,t=0:2:3",
            "t=0:2:3",
            "t=1:1:3,x1=0:1:2",
            "t=a:2:3,x1=0:1:2",
        ] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
        assert!("t=1:1:1,x1=0:1:2".parse::<GridSpec>().is_ok());
    }
}
