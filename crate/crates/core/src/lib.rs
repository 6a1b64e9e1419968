//! Discrete path-integral simulation on causal tapestries.
//!
//! A causal tapestry is a single generation of informons: labelled lattice
//! events carrying a complex strength, a property record, and a content set
//! of causal ancestors. Generations evolve by a token-passing game strategy
//! whose propagator weights are discrete path-integral amplitudes, and the
//! sampled strengths lift to wave fields through translated-sinc (cardinal
//! series) interpolation.
//!
//! Modules:
//! - [`tapestry`]: informons, lattice geometry, causal-consistency checks
//! - [`dynamics`]: Lagrangian, propagator, token placement, generation evolution
//! - [`interp`]: sinc kernels, global fields, cardinal-series reconstruction
//! - [`algebra`]: process expressions, sequence trees, covering maps
//! - [`oracle`]: exact references, brute-force chains, discrepancy metrics,
//!   interpolation error bounds

pub mod algebra;
pub mod dynamics;
pub mod interp;
pub mod oracle;
pub mod tapestry;

pub use dynamics::{BoundaryMode, Potential, StrategyParams, Token, Truncation};
pub use interp::WaveField;
pub use tapestry::{CausalTapestry, Informon, Label, LatticeSite, SpacetimePoint};

/// Deterministic RNG used everywhere a seeded choice is required.
pub type SimRng = rand_chacha::ChaCha12Rng;

/// Builds the simulator RNG from a configuration seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
