//! Numerical laboratory for explicit nonunique solutions of the incompressible
//! transport equation.
//!
//! The crate builds two families of self-similar divergence-free velocity
//! fields together with their piecewise-constant densities: a synchronous
//! construction whose density lives only in `L^1`, and an asynchronous one
//! whose density stays in `L^r` for the sharp exponent range. Both are
//! realized as depth-capped recursive evaluators over a dyadic space-time
//! skeleton, with exact cube-ensemble representations of the density, norm
//! engines, weak-form residual checks, and closed-form contraction/feasibility
//! calculators.
//!
//! Everything is a pure function of immutable parameter records; grid sweeps
//! parallelize with rayon when the `parallel` feature (default) is enabled.

pub mod analysis;
pub mod blocks;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod l1;
pub mod lr;
pub mod ode;
pub mod par;
pub mod schedule;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
pub(crate) fn runif(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}
