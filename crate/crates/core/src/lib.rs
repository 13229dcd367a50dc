//! Simulation and tail diagnostics for marked Poisson cluster processes
//! (renewal cluster and Hawkes) with regularly varying marks.
//!
//! * [`heavytail`]: mark laws, joint `(X, K)` / `(X, kappa)` regimes, analytic
//!   constants and asymptotic denominators.
//! * [`clusters`]: exact samplers of one generic cluster, max/sum functionals.
//! * [`process`]: the process on a window `[0, T]`.
//! * [`estimate`]: empirical survival, ratio curves, Hill and Laplace-transform
//!   diagnostics.
//! * [`oracle`]: exact distributions on small discrete models.
//! * [`ldp`]: large-deviation sweeps over growing horizons.

pub mod clusters;
pub mod error;
pub mod estimate;
pub mod heavytail;
pub mod ldp;
pub mod oracle;
pub mod parallel;
pub mod process;
pub mod report;
pub mod rng;
mod special;

pub use error::{Error, Result};
pub use parallel::Workers;
pub use rng::RngStream;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
