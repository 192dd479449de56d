//! Classical toolkit for quantum-annealing style multi-target data association.
//!
//! The crate builds QUBO / Ising problems for the k-rooks and multi-target data
//! association (MTDA) problems, solves them with exact, simulated-annealing and
//! state-vector adiabatic backends, fits minimum-Gumbel laws to per-run minimum
//! energies and closes a JPDA tracking recursion from the sampled states.
//!
//! Module map:
//!
//! * [`qubo`]: QUBO, Ising and binary-ILP forms, conversions, brute force.
//! * [`tracking`]: linear-Gaussian target model and scan simulation.
//! * [`assoc`]: cost matrix, feasibility and association likelihood.
//! * [`builders`]: k-rooks, biased k-rooks and MTDA Ising models.
//! * [`sampler`]: shot/run sampling and density of states.
//! * [`adiabatic`]: state-vector simulation of `H(s) = (1-s) H_B + s H_P`.
//! * [`gumbel`]: minimum-Gumbel density and maximum-likelihood fitting.
//! * [`jpda`]: hybrid soft association and the tracking recursion.

pub mod adiabatic;
pub mod assoc;
pub mod builders;
pub mod error;
pub mod gumbel;
pub mod jpda;
pub mod qubo;
pub mod sampler;
pub mod tracking;
mod util;

pub use assoc::{AssociationMatrix, CostMatrix, Innovation};
pub use builders::SiteLabels;
pub use error::{Error, Result};
pub use gumbel::GumbelParams;
pub use jpda::{AssociationPosterior, MarginalWeights};
pub use qubo::{BinaryIlp, BitVector, IsingModel, Qubo, SpinVector};
pub use sampler::{AnnealParams, Backend, RunResult, Shot};
pub use tracking::{Scan, ScenarioParams, TargetState};
