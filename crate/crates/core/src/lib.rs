//! Dense-time signal temporal logic with smooth, sign-exact robustness, and a
//! penalized prox-convex trajectory optimizer built on multiple shooting.
//!
//! The pieces, bottom up:
//!
//! * [`stl`]: formula trees, parser and printer.
//! * [`gmsr`]: smooth conjunction and disjunction with gradients.
//! * [`robustness`]: smooth robustness over sampled signals, with reverse-mode
//!   gradients; [`classic`] holds the min/max reference.
//! * [`dynamics`] and [`transcription`]: models, RK4 shooting, dense grids and
//!   their sensitivities.
//! * [`qp`]: a dense ADMM solver for the convex subproblems.
//! * [`scp`]: the outer penalized prox-convex loop.

pub mod classic;
pub mod dynamics;
pub mod gmsr;
pub mod qp;
pub mod robustness;
pub mod scp;
pub mod signal;
pub mod stl;
pub mod transcription;

pub use gmsr::GmsrConfig;
pub use signal::Signal;
pub use stl::{Formula, Interval};
