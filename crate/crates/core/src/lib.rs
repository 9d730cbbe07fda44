//! Vector Ising spin annealing and scalar gain-based Ising machines.
//!
//! The crate is organised around the pipeline an experiment follows:
//!
//! - [`graph`] builds coupling matrices (J-Möbius ladders, J-G circulant
//!   graphs, Sherrington-Kirkpatrick and weighted 3-regular instances) and
//!   evaluates the closed-form circulant analytics.
//! - [`ising`] evaluates Ising energies, enumerates small instances exactly
//!   and reads binary spins out of continuous states.
//! - [`dynamics`] holds the annealing schedules and the fixed-step RK4 and
//!   Euler-Maruyama steppers.
//! - [`solvers`] implements VISA, CIM, MR-CIM, ME-HT, SVL and a BFGS
//!   baseline behind one configuration type.
//! - [`landscape`] analyses the VISA energy landscape at frozen gain and
//!   penalty: critical points, saddle paths, basins and phase maps.
//! - [`bench`] runs seeded ground-state-probability sweeps and random
//!   instance benchmarks.

pub mod bench;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod ising;
pub mod landscape;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::CouplingMatrix;
pub use ising::{SpinConfig, VectorState};
pub use solvers::{RunResult, SolverConfig, SolverKind};
