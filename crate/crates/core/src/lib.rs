//! Numerical laboratory for curve shortening flow of closed curves in R^n.
//!
//! The crate evolves discrete closed curves under `γ_t = γ_ss` and monitors
//! Huisken's chord-arc distance ratio, its reflection-symmetric restriction,
//! plane-crossing counts, convex projections, and the blow-up behaviour at the
//! singular time.

pub mod curve;
pub mod flow;
pub mod fourier;
pub mod projection;
pub mod ratio;
pub mod singularity;
pub mod spline;
pub mod symmetry;

pub use curve::{Curve, CurveError};
pub use fourier::{synthesize_fourier_curve, FourierSpec, FourierTerm};
pub use spline::PeriodicSpline;
