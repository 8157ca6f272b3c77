//! Numerical laboratory for the uplink of a multicell massive MIMO system.
//!
//! The crate models a base station with `M` antennas that estimates user
//! channels from shared (and therefore mutually contaminating) pilot
//! sequences, applies MRC, S-MMSE, or M-MMSE receive combining, and measures
//! spectral efficiency by Monte Carlo simulation. A deterministic companion
//! module computes the large-`M` coefficients that predict when the M-MMSE
//! SINR keeps growing with the array size and when pilot contamination caps
//! it.

pub mod asymptotics;
pub mod cli;
pub mod combining;
pub mod covariance;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod io;
mod linalg;
pub mod rng;
pub mod scenario;
#[cfg(test)]
pub(crate) mod test_oracles;

pub use error::{Error, Result};

/// Compiles and runs every code block in the guide under `book/`, so the
/// chapters cannot drift from the library they document.
#[cfg(doctest)]
mod guide {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(intro, "../../../book/src/intro.md");
    chapter!(getting_started, "../../../book/src/getting-started.md");
    chapter!(covariance, "../../../book/src/covariance.md");
    chapter!(estimation, "../../../book/src/estimation.md");
    chapter!(combining, "../../../book/src/combining.md");
    chapter!(asymptotics, "../../../book/src/asymptotics.md");
    chapter!(simulation, "../../../book/src/simulation.md");
    chapter!(cli, "../../../book/src/cli.md");
}
