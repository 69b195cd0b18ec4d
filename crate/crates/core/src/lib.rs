//! Numerical laboratory for entropy decay of non-local reversible Markov
//! generators built from birth and death moves.
//!
//! The crate works on exact finite configuration spaces: it enumerates the
//! allowed configurations of a model, assembles the rate kernel and the
//! generator, and evaluates the functionals (entropy, Dirichlet forms, the
//! second-order entropy production) needed to certify and bound decay
//! constants. Continuum Glauber dynamics is handled by exact stochastic
//! simulation in [`montecarlo`].
//!
//! Module map:
//!
//! - [`statespace`]: configurations, moves, enumeration, discrete gradients.
//! - [`models`]: model families, Hamiltonians, closed-form bound constants.
//! - [`generator`]: rate kernels, generator matrices, stationary measures.
//! - [`functionals`]: entropy, relative entropy, Dirichlet forms.
//! - [`bochner`]: admissible weights, Bochner identities, the key inequality.
//! - [`spectral`]: spectral gap, semigroup evolution, constant searches.
//! - [`montecarlo`]: trajectory simulation and empirical estimators.

pub mod bochner;
pub mod error;
pub mod functionals;
pub mod generator;
pub mod models;
pub mod montecarlo;
pub mod spectral;
pub mod statespace;

pub use error::{Error, Result};
pub use generator::{FiniteChain, GeneratorMatrix, RateKernel, StationaryMeasure};
pub use models::{BoundReport, ContinuumSpec, Family, Model, PairPotential};
pub use statespace::{Configuration, Move, MoveKind, StateIndex, StateSpace};
