//! Sectional curvature of time-extended graph immersions for slow-fast
//! systems.
//!
//! A slow-fast system `x' = f(x, y)`, `y' = g(x, y)` together with an
//! initial-value function `y(0) = a(x(0))` sweeps out the surface
//! `M = {(t, x, p(t, x; a))}` in time-phase space. For the slow invariant
//! manifold `a = h_eps` the graph is flow-invariant, `p` does not depend on
//! `t`, and every sectional curvature of `M` in a plane containing the time
//! direction vanishes. This crate computes those curvatures for arbitrary
//! lifts, either from closed-form flows or from shooting solves.
//!
//! ```
//! use simcurv::geometry::{curvature_at, Route};
//! use simcurv::graphp::{EvalMode, GraphConfig};
//! use simcurv::lift::InitialValueFunction;
//! use simcurv::systems::SlowFastSystem;
//!
//! let sys = SlowFastSystem::kuehn_nonlinear(0.01)?;
//! let h0 = InitialValueFunction::critical_manifold(&sys)?;
//! let r = curvature_at(&sys, &h0, 0.0, &[0.5], Route::Closed11, EvalMode::Auto, &GraphConfig::default())?;
//! assert!((r.k[0] + 0.00255).abs() < 1e-5);
//! # Ok::<(), simcurv::Error>(())
//! ```

pub mod asymptotic;
pub mod bvp;
pub mod criteria;
pub mod error;
pub mod geometry;
pub mod graphp;
pub mod grid;
pub mod lift;
pub mod ode;
pub mod partials;
pub mod separable;
pub mod series;
pub mod systems;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/graph.md")]
    pub mod graph {}
    #[doc = include_str!("../../../book/src/curvature.md")]
    pub mod curvature {}
    #[doc = include_str!("../../../book/src/integrals.md")]
    pub mod integrals {}
    #[doc = include_str!("../../../book/src/criteria.md")]
    pub mod criteria {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
