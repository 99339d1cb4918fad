//! Numerical workhorses shared across the physics modules.
//!
//! Two families live here: adaptive Gauss–Kronrod quadrature ([`quad`]) for
//! the path, aperture, drift, and scintillation integrals, and hand-rolled
//! special functions ([`special`]) — exponentially scaled modified Bessel
//! functions and the log-gamma function — needed in regions where naive
//! evaluation overflows (Bessel arguments beyond 10³ are routine in sweeps).
//! Every special function is pinned against high-precision reference values
//! in its unit tests.

pub mod quad;
pub mod special;
