//! Numerical laboratory for trace-function weights modulo primes and the
//! weighted ergodic averages they drive.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! modular  ->  weights  ->  averages / bounds / spectral
//!                 ^
//!               dynamics (orbits feeding the averages)
//! ```
//!
//! * [`modular`] — exact 64-bit modular arithmetic, primality, sparse prime
//!   sets.
//! * [`fft`] — power-of-two FFT and the chirp-z (Bluestein) transform for
//!   prime lengths.
//! * [`weights`] — the weight families (Legendre, characters, polynomial
//!   phases, Kloosterman) as explicit complex vectors over F_p.
//! * [`dynamics`] — the dynamical systems and observables whose orbits feed
//!   the averages, including exact continued-fraction orbits.
//! * [`averages`] — the weighted averaging engine, convergence diagnostics,
//!   maximal functions, and the discrete transfer-side maximal function.
//! * [`bounds`] — direct verification of sum envelopes: interval sums, phased
//!   (Weyl) sums, sup over frequencies, shifted-product correlations, moment
//!   exceedance counts.
//! * [`spectral`] — Fejér-kernel analysis of rotation averages, diophantine
//!   approximation searches, interval-coverage experiments, and the
//!   skew-product dichotomy.
//! * [`selftest`] — the fast invariant suite behind the CLI `selftest`
//!   subcommand.

pub mod averages;
pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod modular;
pub mod rng;
pub mod selftest;
pub mod spectral;
pub mod summation;
pub mod weights;

pub use error::{Error, Result};
pub use modular::{build_prime_set, is_prime, legendre_symbol, Prime, PrimeSet, PrimeSetRule};
pub use weights::{make_weight, Weight, WeightFamily, WeightPlan};

/// Schema tag stamped on every JSON summary this crate emits.
pub const SCHEMA: &str = "tracelab/1";
