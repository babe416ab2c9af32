//! Heterogeneous two-timescale fictitious play in two-player zero-sum
//! stochastic games, with an exact Shapley value-iteration oracle and the
//! diagnostics used to check convergence.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod matrix;
pub mod scalar;
pub mod shapley;
pub mod tensor;

pub use diagnostics::{
    check_assumptions, coupled_iterates, lyapunov, one_sided_recursion, tracking_error, AssumptionReport,
    DiagnosticsRecord, StateDiagnostics,
};
pub use dynamics::{
    asymptotic_ratio, best_response, run, step, value_estimate, BeliefState, RateRatio, RunConfig, Schedules,
    StepSchedule, TieRule,
};
pub use error::{Error, Result};
pub use game::{generate_random_game, payoff_bound, validate_game, Player, StochasticGame, ValidationReport};
pub use matrix::{expected_payoff, minimax_value, support_enumeration, Matrix, MinimaxSolution};
pub use scalar::Scalar;
pub use shapley::{apply_operator, solve_fixed_point, EquilibriumSolution, OracleOptions};
pub use tensor::JointTensor;

pub type Game = StochasticGame<f64>;
pub type GameSpec = game::GeneratorSpec<f64>;
pub type PayoffMatrix = Matrix<f64>;
pub type Solution = MinimaxSolution<f64>;
pub type Equilibrium = EquilibriumSolution<f64>;
pub type QTensor = JointTensor<f64>;
pub type Beliefs = BeliefState<f64>;
pub type Schedule = StepSchedule<f64>;
pub type Config = RunConfig<f64>;
pub type Record = DiagnosticsRecord<f64>;
pub type Assumptions = AssumptionReport<f64>;
