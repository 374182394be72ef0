//! Skew products over generalized baker maps.
//!
//! The base is the baker map `T` on the unit square, the fibre maps are an
//! increasing family `y -> f_x(y)` with negative Schwarzian derivative, and
//! the total map is `(xi, x, y) -> (T(xi, x), f_x(y))`.  The crate computes
//! invariant graphs, strong stable fibres, fibre Lyapunov exponents, a case
//! classification and dimension estimates for the set where the bounding
//! graphs pinch.

pub mod baker;
pub mod classify;
pub mod config;
pub mod dimension;
pub mod error;
pub mod fibre;
pub mod graphs;
pub mod grid;
pub mod hypotheses;
pub mod lyapunov;
pub mod output;
pub mod rng;
pub mod scenario;
pub mod stablefibre;
pub mod strips;

pub use baker::{BakerSystem, PeriodicPoint, SymbolSeq};
pub use error::{Error, Result};
pub use fibre::{ArctanFamily, FibreFamily};
pub use grid::Interval;
