//! Steering SDPs and guessing-probability certification.

pub mod guessing;
pub mod program;
pub mod steering;
pub mod strategies;

pub use guessing::{guess_prob_anchored, guess_prob_sequential, guess_prob_single, Anchor, CertificationReport};
pub use program::{HermitianProgram, HermitianSolution};
pub use steering::{projective_functional, steering_inequality, steering_weight, violation, SteeringFunctional, SteeringWeight};
pub use strategies::{enumerate_strategies, DeterministicStrategy, DEFAULT_STRATEGY_CAP};
pub use seqsteer_conic::{SolverSettings, Status};
