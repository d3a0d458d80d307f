//! Objective (reference) priors under constraints.
//!
//! Densities live on tensor grids and are carried up to a positive factor
//! ([`GridDensity`]). The crate computes Jeffreys densities from Fisher
//! information ([`fisher`]), evaluates the asymptotic mutual-information
//! functional `l(π)` and Monte Carlo mutual information ([`functional`]),
//! solves for reference priors under moment constraints, decay-rate
//! constraints and properizing moment functions ([`constrain`]), builds
//! two-block sequential reference priors ([`hierarchy`]), and samples
//! posteriors ([`mcmc`]).

pub mod constrain;
pub mod density;
pub mod error;
pub mod fisher;
pub mod functional;
pub mod grid;
pub mod hierarchy;
pub mod mcmc;
pub mod model;
pub mod models;
pub mod space;

pub use density::{GridDensity, Properness};
pub use error::{Error, ErrorKind, Result};
pub use grid::{make_grid, Grid};
pub use model::{Model, SimRng};
pub use space::{AlphaParams, CompactNest, Edge, ParamSpace, Side};
