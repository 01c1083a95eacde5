//! First-passage skeleton calculus for Brownian functionals.
//!
//! A Brownian path is discretized in *space* rather than time: the stopping
//! times `T^k_n` record successive moves of size `2^-k`, and the pure-jump
//! process `A^k` (equal to the path at those times) carries the complete
//! discrete information set. On top of that skeleton the library builds
//!
//! * exact simulation of the dyadic exit-time law driving the skeleton
//!   ([`first_exit`]),
//! * the renewal-density intensity `h^k` of the jump measure and the angle
//!   bracket of `A^k` ([`intensity`]),
//! * the embedded semimartingale decomposition of a functional projected on
//!   the skeleton filtration, its stochastic derivative, energies and
//!   covariation probes ([`projection`]),
//! * a martingale-representation (Clark–Ocone type) density estimator with
//!   residual-based verification ([`clark`]),
//! * level-crossing counts, local-time estimation and local-time integral
//!   approximations ([`local_time`]),
//! * Volterra simulation of fractional Brownian motion and the associated
//!   energy scans ([`fbm`], [`fbm_experiments`]).
//!
//! Everything is deterministic given a master seed: per-path generators are
//! counter-derived ([`streams`]) so results do not depend on the worker count.

pub mod clark;
pub mod error;
pub mod fbm;
pub mod fbm_experiments;
pub mod first_exit;
pub mod functionals;
pub mod intensity;
pub mod local_time;
pub mod projection;
pub mod quadrature;
pub mod skeleton;
pub mod special;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
pub use first_exit::FirstExitLaw;
pub use functionals::{Functional, GridPath, RealFn};
pub use intensity::IntensityTable;
pub use skeleton::{Skeleton, StepProcess};
pub use stats::Estimate;
