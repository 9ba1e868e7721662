//! Max-min fair multicast beamforming with joint antenna selection.
//!
//! The nonconvex problem
//!
//! ```text
//! max_w min_m |h_mᴴ w|² / σ_m²   s.t. ‖w‖₂² ≤ P,  ‖w‖₀ ≤ K
//! ```
//!
//! is attacked with successive convex approximation on a group-lasso
//! relaxation of the cardinality constraint. Each convex subproblem is a
//! bilinear saddle point solved by saddle-point mirror-prox ([`spmp`]); the
//! regularization weight is tuned by bisection until exactly `K` antennas
//! survive ([`select`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channelgen;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod realcplx;
pub mod rng;
pub mod select;
pub mod spmp;
pub mod surrogate;

pub use error::{Error, Result};
pub use problem::{Beamformer, ProblemInstance, Snr};
pub use select::{BisectionConfig, LambdaScale, ProbeInit, ScaConfig, SelectionResult};
