//! Simulation of third-order 2D photon-echo electronic spectra for excitonic
//! systems linearly coupled to harmonic baths.
//!
//! The response functions are evaluated in the stationary (Q = 0) exciton
//! basis. Energy fluctuations (decoherence) and momentum-driven nonadiabatic
//! transitions (population relaxation) are traced over the bath with a
//! second-order cumulant expansion. Every time integral is done in closed form
//! per bath frequency so only the frequency integral is numeric.
//!
//! Module map:
//!
//! - [`model`]: site Hamiltonians, stationary basis, gradients, nonadiabatic
//!   couplings, transition dipoles.
//! - [`bath`]: spectral densities, thermal factors, frequency quadrature and
//!   the position / momentum correlation kernels.
//! - [`kernels`]: closed-form single and ordered double time integrals.
//! - [`lineshape`]: X / Y / Z terms and the decoherence exponents.
//! - [`population`]: L / N / O terms and the relaxation exponents.
//! - [`response`]: tuple sums for SE, GSB and ESA and the total signal.
//! - [`spectrum`]: double Fourier transform and peak extraction.
//! - [`oracle`]: exact discretized-bath reference propagation.
//! - [`config`] / [`pipeline`]: run configuration, orchestration and file
//!   output used by the CLI.

pub mod bath;
pub mod config;
pub mod error;
pub mod kernels;
pub mod lineshape;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod population;
pub mod response;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
