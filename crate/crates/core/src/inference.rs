//! Bayesian goal inference from observed action prefixes: posterior updates
//! driven by the behavior model's action likelihoods, plus the accuracy
//! evaluation over revealed-prefix fractions.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::{action_likelihood, plan_trajectory, Action, AgentModel, PlanError};
use crate::env::{Cell, GridEnvironment};
use crate::stats::{mean, stderr};

/// Per-goal probabilities aligned with `env.goals`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub probabilities: Vec<f64>,
}

/// Probabilities closer than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

impl Posterior {
    pub fn uniform(goals: usize) -> Self {
        Posterior { probabilities: vec![1.0 / goals as f64; goals] }
    }

    /// Indices of all goals within tolerance of the maximum probability.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.probabilities.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= max - TIE_TOLERANCE)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_normalized(&self) -> bool {
        (self.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("all goal likelihoods are zero; posterior undefined")]
    DegenerateUpdate,
    #[error("{likelihoods} likelihoods for {goals} goals")]
    LengthMismatch { likelihoods: usize, goals: usize },
    #[error("fractions must be sorted ascending within (0, 1]")]
    BadFractions,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One Bayesian update: `post'_g ∝ post_g * likelihood_g`.
pub fn update(post: &Posterior, likelihood_per_goal: &[f64]) -> Result<Posterior, InferenceError> {
    if likelihood_per_goal.len() != post.probabilities.len() {
        return Err(InferenceError::LengthMismatch {
            likelihoods: likelihood_per_goal.len(),
            goals: post.probabilities.len(),
        });
    }
    let unnormalized: Vec<f64> = post
        .probabilities
        .iter()
        .zip(likelihood_per_goal)
        .map(|(p, l)| p * l)
        .collect();
    let total: f64 = unnormalized.iter().sum();
    if total <= 0.0 {
        return Err(InferenceError::DegenerateUpdate);
    }
    Ok(Posterior { probabilities: unnormalized.into_iter().map(|p| p / total).collect() })
}

/// Posterior over goals after observing a prefix of (cell, action) pairs,
/// starting from a uniform prior. Collected subgoals are tracked along the
/// observed walk so likelihood queries see the agent's progress.
pub fn infer_goal(
    env: &GridEnvironment,
    model: &AgentModel,
    observed: &[(Cell, Action)],
    epsilon: f64,
) -> Result<Posterior, InferenceError> {
    let mut posterior = Posterior::uniform(env.goals.len());
    let mut collected: BTreeSet<Cell> = BTreeSet::new();
    for &(cell, action) in observed {
        let likelihoods: Vec<f64> = env
            .goals
            .iter()
            .map(|&goal| action_likelihood(model, env, goal, cell, &collected, epsilon).get(action))
            .collect();
        posterior = update(&posterior, &likelihoods)?;
        if let Some(next) = action.step(cell, env.width, env.height) {
            if env.subgoal_rewards.contains_key(&next) {
                collected.insert(next);
            }
        }
    }
    Ok(posterior)
}

/// Accuracy of argmax-posterior goal identification at one revealed
/// fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyPoint {
    pub fraction: f64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Rolls the walker to every goal of every environment, reveals the first
/// `ceil(k * T)` actions to the inference algorithm, and scores argmax
/// correctness. A tie splits credit evenly among the tied goals, so a
/// two-way tie counts 0.5.
pub fn evaluate_inference(
    envs: &[GridEnvironment],
    walker: &AgentModel,
    model: &AgentModel,
    fractions: &[f64],
    epsilon: f64,
) -> Result<Vec<AccuracyPoint>, InferenceError> {
    if fractions.is_empty()
        || fractions.windows(2).any(|w| w[0] > w[1])
        || fractions.iter().any(|&k| !(0.0..=1.0).contains(&k) || k == 0.0)
    {
        return Err(InferenceError::BadFractions);
    }

    // score[(env, goal)][fraction]
    let per_sample: Vec<Vec<f64>> = envs
        .par_iter()
        .map(|env| -> Result<Vec<Vec<f64>>, InferenceError> {
            let mut rows = Vec::new();
            for (goal_idx, &goal) in env.goals.iter().enumerate() {
                let traj = plan_trajectory(env, walker, goal)?;
                let total = traj.len();

                // Posterior after each prefix length, computed incrementally.
                let mut prefix_posteriors = Vec::with_capacity(total + 1);
                let mut posterior = Posterior::uniform(env.goals.len());
                let mut collected: BTreeSet<Cell> = BTreeSet::new();
                prefix_posteriors.push(posterior.clone());
                for &(cell, action) in &traj.steps {
                    let likelihoods: Vec<f64> = env
                        .goals
                        .iter()
                        .map(|&g| {
                            action_likelihood(model, env, g, cell, &collected, epsilon).get(action)
                        })
                        .collect();
                    posterior = update(&posterior, &likelihoods)?;
                    prefix_posteriors.push(posterior.clone());
                    if let Some(next) = action.step(cell, env.width, env.height) {
                        if env.subgoal_rewards.contains_key(&next) {
                            collected.insert(next);
                        }
                    }
                }

                let row: Vec<f64> = fractions
                    .iter()
                    .map(|&k| {
                        let revealed = ((k * total as f64).ceil() as usize).min(total);
                        let winners = prefix_posteriors[revealed].argmax_set();
                        if winners.contains(&goal_idx) {
                            1.0 / winners.len() as f64
                        } else {
                            0.0
                        }
                    })
                    .collect();
                rows.push(row);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            let scores: Vec<f64> = per_sample.iter().map(|row| row[i]).collect();
            AccuracyPoint {
                fraction,
                mean: mean(&scores),
                stderr: stderr(&scores),
                samples: scores.len(),
            }
        })
        .collect())
}
