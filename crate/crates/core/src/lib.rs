//! Equilibrium computation for a two-candidate campaign resource-allocation
//! game, under a nationwide majority rule (MS) and an electoral college (EC).
//!
//! Strategies are effort vectors on the unit simplex. The crate covers
//! the deterministic majority game (closed-form and barrier-Newton
//! equilibria), the Dirichlet-noise majority game (Monte-Carlo
//! gradient-descent-ascent with sample reuse), and the electoral-college
//! game (exact win probability, gradient, and a lattice double oracle for
//! mixed equilibria).

pub mod ec_probability;
pub mod error;
pub mod experiments;
pub mod game_model;
pub mod instance_file;
pub mod lattice;
pub mod matrix_game;
pub mod ms_deterministic;
pub mod presets;
pub mod quadrature;
pub mod simplex_dynamics;
pub mod special;
pub mod stochastic;

pub use ec_probability::{EcOracle, ev_distribution, state_win_prob, win_prob_ec, win_prob_ec_gradient, EVDistribution, StateModel, StateWinProbs};
pub use error::{Error, Result};
pub use game_model::{payoff_qa, payoff_qb, vote_shares, ElectionInstance, SimplexPoint, StrategyProfile};
pub use lattice::{double_oracle_solve, hull_decompose, lattice_neighborhood, DoubleOracleConfig, DoubleOracleResult, LatticePoint};
pub use matrix_game::{solve_matrix_game, MixedEquilibrium, PayoffMatrix};
pub use ms_deterministic::{constrained_equilibrium, unbounded_equilibrium, BarrierConfig, UnboundedEquilibrium};
pub use simplex_dynamics::{complementary_slackness, gda_solve, simplex_direction, GdaConfig};
pub use stochastic::{estimate_gradient, estimate_win_prob, reuse_estimate, sample_batch, should_resample, SampleBatch};
