//! Phosphorus donor in silicon: tight-binding states, ²⁹Si hyperfine
//! couplings and their Stark shifts.
//!
//! Numerics are generic over [`Real`] (f32 or f64); the aliases below fix
//! the scalar to f64.

pub mod crystal;
pub mod donor_model;
pub mod eigensolver;
pub mod hyperfine;
pub mod scalar;
pub mod stark;

pub use scalar::Real;

pub type Hamiltonian = donor_model::TbHamiltonian<f64>;
pub type Parameters = donor_model::SkParameters<f64>;
pub type Potential = donor_model::PotentialSpec<f64>;
pub type State = eigensolver::DonorState<f64>;
pub type Outcome = eigensolver::SolveOutcome<f64>;
pub type StarkScenario = stark::Scenario<f64>;
