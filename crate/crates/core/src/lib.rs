//! Data-driven goal recognition design for grid worlds.
//!
//! The pipeline: represent and generate environments ([`env`]), model agent
//! behavior with discounting planners or learned policies ([`agents`]),
//! compute ground-truth worst-case distinctiveness ([`wcd`]), encode
//! simulations into labeled datasets ([`datagen`]), train a differentiable
//! surrogate that predicts wcd ([`neural`]), optimize environment
//! modifications against it ([`design`]), and check the downstream effect on
//! Bayesian goal inference ([`inference`]).

pub mod agents;
pub mod datagen;
pub mod design;
pub mod env;
pub mod inference;
pub mod neural;
pub mod stats;
pub mod wcd;

pub use agents::{
    action_likelihood, clone_policy, default_horizon, discount_weight, plan_trajectory, Action,
    ActionLikelihood, AgentModel, DiscountSpec, PolicyNet, Trajectory, DEFAULT_EPSILON,
};
pub use datagen::{encode, generate_dataset, AgentSampler, EncodingSpec, LabelMode, Sample};
pub use design::{
    exhaustive_search, gradient_optimize, greedy, lagrangian_value, lambda_sweep, pruned_reduce,
    BudgetSpec, DesignOutcome, LagrangianConfig, NetSurrogate, PredictedWcdScorer, TrueWcdScorer,
    DEFAULT_LAMBDA_GRID,
};
pub use env::{
    apply, cost, random_environment, reachable_set, validate, Cell, CostVector, GenerationConfig,
    GridEnvironment, ModKind, Modification,
};
pub use inference::{evaluate_inference, infer_goal, update, Posterior};
pub use neural::{Checkpoint, LossKind, Network, NetworkSpec, Target, Tensor, TrainConfig};
pub use wcd::{
    brute_force_wcd, common_prefix_length, wcd, wcd_deterministic, wcd_optimal_worstcase,
    WcdNotion, WcdResult,
};
