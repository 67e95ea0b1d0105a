//! Preconditioned Hamiltonian Monte Carlo on a discretized function space.
//!
//! Targets measures `dπ ∝ exp(−Φ(q)) dπ₀` where `π₀ = N(0, C)` is a Gaussian
//! prior with trace-class covariance. The kernel is well defined as `N → ∞`,
//! so step sizes need not shrink with the discretization.
//!
//! * [`function_space`]: representations, Sobolev-like norms, the prior.
//! * [`potentials`]: `Φ`, its gradient, and the test potentials.
//! * [`integrator`]: rotation/kick split flows and the Strang step.
//! * [`sampler`]: exact and adjusted kernels, energy error `ΔH`.
//! * [`coupling`]: synchronous coupling, contraction estimates, audits.

pub mod coupling;
pub mod error;
pub mod function_space;
pub mod integrator;
pub mod potentials;
pub mod sampler;

pub use error::{PhmcError, Result};
pub use function_space::{CovarianceModel, Field, Representation, SobolevIndex};
pub use integrator::{IntegratorParams, PhaseState};
pub use potentials::Potential;
pub use sampler::{HmcConfig, Mode, Phmc, StepOutcome};
