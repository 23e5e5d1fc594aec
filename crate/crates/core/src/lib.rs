//! Exact filling constructions for cycles in Euclidean space and
//! higher-divergence estimates for nilpotent groups.
//!
//! Chains are either piecewise-linear ([`PLChain`]) with exact rational
//! vertices, or cubical ([`CubicalChain`]) on the dyadic grids `2^i Z^n`.

pub mod avoid;
pub mod carnot;
pub mod constants;
pub mod cubical;
pub mod deform;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod intsolve;
pub mod linalg;
pub mod multiscale;
pub mod plchain;
pub mod rational;

pub use cubical::{Cell, CubeComplex, CubicalChain, GridComplex, SlabComplex};
pub use deform::{deform, DeformationResult};
pub use error::{Error, Result};
pub use geometry::{PLSimplex, Point};
pub use multiscale::{fill, Filling, FillingLedger};
pub use plchain::PLChain;
pub use rational::Q;
