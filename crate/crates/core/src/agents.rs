//! Agent behavior models: discounting planners (geometric or hyperbolic)
//! solved by exact finite-horizon dynamic programming, learned policies
//! rolled out greedily, smoothed action likelihoods, and behavior cloning
//! from trajectory logs.
//!
//! Planners are deterministic. A plan maximizes the discounted return
//! `sum_t d(t) * r_t`; among value-optimal plans the earliest goal arrival
//! wins, and remaining ties fall to the fixed action order Up, Down, Left,
//! Right. When planning toward a goal, all other goals are treated as
//! blocked cells.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Cell, GridEnvironment};
use crate::neural::{
    classification_accuracy, holdout_split, softmax, train, LossKind, Network, NetworkSpec,
    NeuralError, Target, Tensor, TrainConfig, TrainingReport,
};

/// Grid moves in the fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// The cell this action leads to, or `None` when it leaves the grid.
    pub fn step(self, from: Cell, width: usize, height: usize) -> Option<Cell> {
        let (row, col) = (from.row, from.col);
        let next = match self {
            Action::Up => Cell::new(row.checked_sub(1)?, col),
            Action::Down => Cell::new(row + 1, col),
            Action::Left => Cell::new(row, col.checked_sub(1)?),
            Action::Right => Cell::new(row, col + 1),
        };
        (next.row < height && next.col < width).then_some(next)
    }
}

/// Time-discounting variants: `d(t) = gamma^t` or `d(t) = 1 / (1 + k t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiscountSpec {
    Geometric { gamma: f64 },
    Hyperbolic { k: f64 },
}

/// Discount weight at step `t`; `d(0) = 1` for every variant.
pub fn discount_weight(spec: &DiscountSpec, t: usize) -> f64 {
    match spec {
        DiscountSpec::Geometric { gamma } => gamma.powi(t as i32),
        DiscountSpec::Hyperbolic { k } => 1.0 / (1.0 + k * t as f64),
    }
}

/// A learned stochastic policy: a network producing 4 action logits from the
/// environment encoding plus position and pursued-goal channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub net: Network,
    pub grid: usize,
    pub goal_count: usize,
}

/// The behavior model `h`: a discounting planner or a learned policy.
#[derive(Debug, Clone)]
pub enum AgentModel {
    Planner { discount: DiscountSpec, horizon: usize },
    Learned { policy: Arc<PolicyNet> },
}

/// Default planning horizon, generous enough for detour-optimal paths at the
/// densities used in the experiments.
pub fn default_horizon(width: usize, height: usize) -> usize {
    4 * (width + height)
}

impl AgentModel {
    pub fn geometric(gamma: f64, horizon: usize) -> Self {
        AgentModel::Planner { discount: DiscountSpec::Geometric { gamma }, horizon }
    }

    pub fn hyperbolic(k: f64, horizon: usize) -> Self {
        AgentModel::Planner { discount: DiscountSpec::Hyperbolic { k }, horizon }
    }

    /// The undiscounted shortest-path agent sized for `env`.
    pub fn optimal_for(env: &GridEnvironment) -> Self {
        AgentModel::geometric(1.0, default_horizon(env.width, env.height))
    }

    pub fn learned(policy: PolicyNet) -> Self {
        AgentModel::Learned { policy: Arc::new(policy) }
    }

    /// Raw behavior parameter used in environment encodings: gamma, k, or 0
    /// for learned policies.
    pub fn encoding_param(&self) -> f64 {
        match self {
            AgentModel::Planner { discount: DiscountSpec::Geometric { gamma }, .. } => *gamma,
            AgentModel::Planner { discount: DiscountSpec::Hyperbolic { k }, .. } => *k,
            AgentModel::Learned { .. } => 0.0,
        }
    }

    /// True when this is the undiscounted planner, whose wcd admits the
    /// shortest-path-DAG treatment.
    pub fn is_optimal_planner(&self) -> bool {
        matches!(
            self,
            AgentModel::Planner { discount: DiscountSpec::Geometric { gamma }, .. }
            if *gamma == 1.0
        )
    }
}

/// A goal-directed walk: standing cells paired with the action taken from
/// each, ending at the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub goal: Cell,
    pub steps: Vec<(Cell, Action)>,
    pub terminal: Cell,
}

impl Trajectory {
    /// Number of actions taken.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|&(_, a)| a)
    }

    pub fn start(&self) -> Option<Cell> {
        self.steps.first().map(|&(c, _)| c)
    }

    /// Checks every trajectory invariant against `env`.
    pub fn check(&self, env: &GridEnvironment) -> Result<(), String> {
        if self.steps.is_empty() {
            return Err("trajectory has no steps".into());
        }
        if self.steps[0].0 != env.start {
            return Err(format!("trajectory starts at {} not {}", self.steps[0].0, env.start));
        }
        if self.terminal != self.goal {
            return Err(format!("terminal {} is not the goal {}", self.terminal, self.goal));
        }
        let mut cur = self.steps[0].0;
        for (i, &(cell, action)) in self.steps.iter().enumerate() {
            if cell != cur {
                return Err(format!("step {i} stands at {cell}, expected {cur}"));
            }
            if env.is_blocked(cell) || env.goals.contains(&cell) {
                return Err(format!("step {i} stands on a blocked or goal cell {cell}"));
            }
            cur = action
                .step(cell, env.width, env.height)
                .ok_or_else(|| format!("step {i} leaves the grid"))?;
            if env.is_blocked(cur) {
                return Err(format!("step {i} enters blocked cell {cur}"));
            }
        }
        if cur != self.terminal {
            return Err(format!("walk ends at {cur}, terminal says {}", self.terminal));
        }
        Ok(())
    }
}

/// Probability of each action at a state, in [`Action::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionLikelihood {
    pub probabilities: [f64; 4],
}

impl ActionLikelihood {
    pub fn uniform() -> Self {
        ActionLikelihood { probabilities: [0.25; 4] }
    }

    pub fn get(&self, action: Action) -> f64 {
        self.probabilities[action.index()]
    }
}

/// Smoothing weight for deterministic planner likelihoods.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Most subgoal cells one exact plan can track.
pub const SUBGOAL_CAP: usize = 12;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("goal {0} is not a goal of this environment")]
    GoalNotInEnv(Cell),
    #[error("goal {0} is unreachable within the horizon")]
    Unreachable(Cell),
    #[error("{0} subgoal cells exceed the cap of {SUBGOAL_CAP}")]
    CapExceeded(usize),
    #[error("horizon {horizon} is shorter than width + height = {minimum}")]
    HorizonTooShort { horizon: usize, minimum: usize },
    #[error("start cell {0} is blocked, out of bounds, or a goal")]
    BadStart(Cell),
    #[error("learned rollout exceeded the horizon without reaching the goal")]
    NonTerminating,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("behavior cloning needs at least one trajectory")]
    EmptyDataset,
    #[error("trajectories span different grid shapes or goal counts")]
    MixedShapes,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

struct PlanProblem {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    goal_idx: usize,
    goal_reward: f64,
    subgoal_cells: Vec<usize>,
    subgoal_rewards: Vec<f64>,
    subgoal_bit: Vec<Option<u8>>,
}

impl PlanProblem {
    fn build(env: &GridEnvironment, goal: Cell) -> Result<Self, PlanError> {
        if !env.goals.contains(&goal) {
            return Err(PlanError::GoalNotInEnv(goal));
        }
        if env.subgoal_rewards.len() > SUBGOAL_CAP {
            return Err(PlanError::CapExceeded(env.subgoal_rewards.len()));
        }
        let blocked = env.blocked_mask(&env.other_goals(goal));
        let mut subgoal_cells = Vec::new();
        let mut subgoal_rewards = Vec::new();
        let mut subgoal_bit = vec![None; env.cell_count()];
        for (bit, (&cell, &reward)) in env.subgoal_rewards.iter().enumerate() {
            let idx = env.cell_index(cell);
            subgoal_bit[idx] = Some(bit as u8);
            subgoal_cells.push(idx);
            subgoal_rewards.push(reward);
        }
        Ok(PlanProblem {
            width: env.width,
            height: env.height,
            blocked,
            goal_idx: env.cell_index(goal),
            goal_reward: env.goal_reward,
            subgoal_cells,
            subgoal_rewards,
            subgoal_bit,
        })
    }

    fn masks(&self) -> usize {
        1 << self.subgoal_cells.len()
    }
}

/// Exact finite-horizon plan from an arbitrary standing cell. The committed
/// plan is chosen once, with reward at arrival time `t` weighted by `d(t)`.
fn plan_from(
    env: &GridEnvironment,
    discount: &DiscountSpec,
    horizon: usize,
    goal: Cell,
    start: Cell,
    initial_mask: u32,
) -> Result<Trajectory, PlanError> {
    let minimum = env.width + env.height;
    if horizon < minimum {
        return Err(PlanError::HorizonTooShort { horizon, minimum });
    }
    let problem = PlanProblem::build(env, goal)?;
    let start_idx = env.cell_index(start);
    if !env.in_bounds(start) || problem.blocked[start_idx] || start == goal {
        return Err(PlanError::BadStart(start));
    }

    let cells = env.cell_count();
    let masks = problem.masks();
    let states = cells * masks;
    let weights: Vec<f64> = (0..=horizon).map(|t| discount_weight(discount, t)).collect();

    // Rolling value/arrival layers over absolute time, plus a full action
    // table for plan extraction.
    let mut value_next = vec![f64::NEG_INFINITY; states];
    let mut arrival_next = vec![u32::MAX; states];
    let mut value_cur = vec![f64::NEG_INFINITY; states];
    let mut arrival_cur = vec![u32::MAX; states];
    let mut choice = vec![u8::MAX; horizon * states];

    for t in (0..horizon).rev() {
        for cell_idx in 0..cells {
            if problem.blocked[cell_idx] || cell_idx == problem.goal_idx {
                continue;
            }
            let cell = Cell::new(cell_idx / env.width, cell_idx % env.width);
            for mask in 0..masks {
                let state = cell_idx * masks + mask;
                let mut best_value = f64::NEG_INFINITY;
                let mut best_arrival = u32::MAX;
                let mut best_action = u8::MAX;
                for action in Action::ALL {
                    let Some(next) = action.step(cell, problem.width, problem.height) else {
                        continue;
                    };
                    let next_idx = next.row * problem.width + next.col;
                    if problem.blocked[next_idx] {
                        continue;
                    }
                    let (cand_value, cand_arrival) = if next_idx == problem.goal_idx {
                        (weights[t + 1] * problem.goal_reward, (t + 1) as u32)
                    } else {
                        let (next_mask, reward) = match problem.subgoal_bit[next_idx] {
                            Some(bit) if mask & (1 << bit) == 0 => (
                                mask | (1 << bit),
                                problem.subgoal_rewards[bit as usize],
                            ),
                            _ => (mask, 0.0),
                        };
                        let next_state = next_idx * masks + next_mask;
                        let future = value_next[next_state];
                        if future == f64::NEG_INFINITY {
                            continue;
                        }
                        (weights[t + 1] * reward + future, arrival_next[next_state])
                    };
                    if cand_value > best_value
                        || (cand_value == best_value && cand_arrival < best_arrival)
                    {
                        best_value = cand_value;
                        best_arrival = cand_arrival;
                        best_action = action.index() as u8;
                    }
                }
                value_cur[state] = best_value;
                arrival_cur[state] = best_arrival;
                choice[t * states + state] = best_action;
            }
        }
        std::mem::swap(&mut value_cur, &mut value_next);
        std::mem::swap(&mut arrival_cur, &mut arrival_next);
        value_cur.fill(f64::NEG_INFINITY);
        arrival_cur.fill(u32::MAX);
    }

    // After the loop the t = 0 layer sits in the "next" buffers.
    let start_state = start_idx * masks + initial_mask as usize;
    if value_next[start_state] == f64::NEG_INFINITY {
        return Err(PlanError::Unreachable(goal));
    }

    let mut steps = Vec::new();
    let mut cell = start;
    let mut mask = initial_mask as usize;
    for t in 0..horizon {
        let cell_idx = cell.row * problem.width + cell.col;
        let state = cell_idx * masks + mask;
        let action_idx = choice[t * states + state];
        debug_assert_ne!(action_idx, u8::MAX, "plan extraction hit a dead state");
        let action = Action::from_index(action_idx as usize).expect("stored action is valid");
        steps.push((cell, action));
        let next = action
            .step(cell, problem.width, problem.height)
            .expect("stored action stays on the grid");
        let next_idx = next.row * problem.width + next.col;
        if next_idx == problem.goal_idx {
            return Ok(Trajectory { goal, steps, terminal: goal });
        }
        if let Some(bit) = problem.subgoal_bit[next_idx] {
            mask |= 1 << bit;
        }
        cell = next;
    }
    Err(PlanError::Unreachable(goal))
}

fn rollout_learned(
    env: &GridEnvironment,
    policy: &PolicyNet,
    goal: Cell,
    horizon: usize,
) -> Result<Trajectory, PlanError> {
    let goal_slot = env
        .goals
        .iter()
        .position(|&g| g == goal)
        .ok_or(PlanError::GoalNotInEnv(goal))?;
    let blocked = env.blocked_mask(&env.other_goals(goal));
    let mut collected = BTreeSet::new();
    let mut cell = env.start;
    let mut steps = Vec::new();
    for _ in 0..horizon {
        let x = policy_input(env, goal_slot, cell, &collected)?;
        let logits = policy.net.forward(&x)?;
        let mut best: Option<(f64, Action, Cell)> = None;
        for action in Action::ALL {
            let Some(next) = action.step(cell, env.width, env.height) else { continue };
            if blocked[env.cell_index(next)] {
                continue;
            }
            let score = logits.data()[action.index()];
            if best.map_or(true, |(b, _, _)| score > b) {
                best = Some((score, action, next));
            }
        }
        let Some((_, action, next)) = best else {
            return Err(PlanError::NonTerminating);
        };
        steps.push((cell, action));
        if next == goal {
            return Ok(Trajectory { goal, steps, terminal: goal });
        }
        if env.subgoal_rewards.contains_key(&next) {
            collected.insert(next);
        }
        cell = next;
    }
    Err(PlanError::NonTerminating)
}

/// Plans the agent's committed trajectory from the environment start toward
/// `goal`. Deterministic given its inputs.
pub fn plan_trajectory(
    env: &GridEnvironment,
    agent: &AgentModel,
    goal: Cell,
) -> Result<Trajectory, PlanError> {
    match agent {
        AgentModel::Planner { discount, horizon } => {
            plan_from(env, discount, *horizon, goal, env.start, 0)
        }
        AgentModel::Learned { policy } => {
            rollout_learned(env, policy, goal, default_horizon(env.width, env.height))
        }
    }
}

/// Like [`plan_trajectory`] but from an arbitrary standing cell with some
/// subgoals already collected. Used by likelihood queries.
pub fn plan_trajectory_from(
    env: &GridEnvironment,
    agent: &AgentModel,
    goal: Cell,
    from: Cell,
    collected: u32,
) -> Result<Trajectory, PlanError> {
    match agent {
        AgentModel::Planner { discount, horizon } => {
            plan_from(env, discount, *horizon, goal, from, collected)
        }
        AgentModel::Learned { .. } => Err(PlanError::BadStart(from)),
    }
}

fn collected_mask(env: &GridEnvironment, collected: &BTreeSet<Cell>) -> u32 {
    let mut mask = 0u32;
    for (bit, (&cell, _)) in env.subgoal_rewards.iter().enumerate() {
        if collected.contains(&cell) {
            mask |= 1 << bit;
        }
    }
    mask
}

/// Action distribution of `agent` at a standing cell under a goal
/// hypothesis. Planner policies are epsilon-smoothed: the planned action
/// gets `1 - eps + eps/4`, every other action `eps/4`. When no plan exists
/// from the cell the distribution falls back to uniform.
pub fn action_likelihood(
    agent: &AgentModel,
    env: &GridEnvironment,
    goal: Cell,
    cell: Cell,
    collected: &BTreeSet<Cell>,
    epsilon: f64,
) -> ActionLikelihood {
    match agent {
        AgentModel::Planner { discount, horizon } => {
            let mask = collected_mask(env, collected);
            match plan_from(env, discount, *horizon, goal, cell, mask) {
                Ok(traj) => {
                    let planned = traj.steps[0].1;
                    let mut probabilities = [epsilon / 4.0; 4];
                    probabilities[planned.index()] += 1.0 - epsilon;
                    ActionLikelihood { probabilities }
                }
                Err(_) => ActionLikelihood::uniform(),
            }
        }
        AgentModel::Learned { policy } => {
            let goal_slot = match env.goals.iter().position(|&g| g == goal) {
                Some(slot) => slot,
                None => return ActionLikelihood::uniform(),
            };
            match policy_input(env, goal_slot, cell, collected)
                .and_then(|x| policy.net.forward(&x).map_err(PlanError::from))
            {
                Ok(logits) => {
                    let probs = softmax(logits.data());
                    ActionLikelihood { probabilities: [probs[0], probs[1], probs[2], probs[3]] }
                }
                Err(_) => ActionLikelihood::uniform(),
            }
        }
    }
}

/// Policy-network input: the environment encoding (with a zero behavior
/// parameter and collected subgoals blanked out) plus a current-position
/// channel and a pursued-goal channel.
pub fn policy_input(
    env: &GridEnvironment,
    goal_slot: usize,
    position: Cell,
    collected: &BTreeSet<Cell>,
) -> Result<Tensor, PlanError> {
    let n = env.width;
    if env.height != n {
        return Err(PlanError::Neural(NeuralError::Shape(
            "policy encoding needs a square grid".into(),
        )));
    }
    let base = crate::datagen::env_channel_data(env, 0.0, collected);
    let plane = n * n;
    let channels = base.len() / plane + 2;
    let mut data = base;
    data.resize(channels * plane, 0.0);
    let pos_offset = (channels - 2) * plane;
    data[pos_offset + env.cell_index(position)] = 1.0;
    let goal_offset = (channels - 1) * plane;
    data[goal_offset + env.cell_index(env.goals[goal_slot])] = 1.0;
    Ok(Tensor::new(vec![channels, n, n], data)?)
}

pub fn policy_channels(goal_count: usize) -> usize {
    4 + goal_count + 2
}

/// First action of the undiscounted shortest-path agent from `from`, or
/// `None` when the goal is unreachable. Subgoal rewards are ignored.
pub fn shortest_path_action(env: &GridEnvironment, goal: Cell, from: Cell) -> Option<Action> {
    let blocked = env.blocked_mask(&env.other_goals(goal));
    let dist = bfs_distances(env, goal, &blocked);
    let here = dist[env.cell_index(from)]?;
    for action in Action::ALL {
        let Some(next) = action.step(from, env.width, env.height) else { continue };
        if next == goal {
            return Some(action);
        }
        let idx = env.cell_index(next);
        if !blocked[idx] && dist[idx] == Some(here - 1) {
            return Some(action);
        }
    }
    None
}

fn bfs_distances(env: &GridEnvironment, to: Cell, blocked: &[bool]) -> Vec<Option<usize>> {
    let mut dist = vec![None; env.cell_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[env.cell_index(to)] = Some(0);
    queue.push_back(to);
    while let Some(cell) = queue.pop_front() {
        let d = dist[env.cell_index(cell)].expect("queued cells have distances");
        for next in env.neighbors(cell) {
            let idx = env.cell_index(next);
            if dist[idx].is_none() && !blocked[idx] && next != to {
                dist[idx] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Result of [`clone_policy`]: the learned agent plus its held-out accuracy.
#[derive(Debug)]
pub struct ClonedPolicy {
    pub agent: AgentModel,
    pub holdout_accuracy: f64,
    pub report: TrainingReport,
}

/// Trains a policy network to imitate logged trajectories by cross-entropy
/// on next actions. Deterministic given the config seed.
pub fn clone_policy(
    trajectories: &[(GridEnvironment, Trajectory)],
    config: &TrainConfig,
) -> Result<ClonedPolicy, AgentError> {
    if trajectories.is_empty() {
        return Err(AgentError::EmptyDataset);
    }
    let (env0, _) = &trajectories[0];
    let n = env0.width;
    let goal_count = env0.goals.len();
    if env0.height != n {
        return Err(AgentError::MixedShapes);
    }

    let mut dataset: Vec<(Tensor, Target)> = Vec::new();
    for (env, traj) in trajectories {
        if env.width != n || env.height != n || env.goals.len() != goal_count {
            return Err(AgentError::MixedShapes);
        }
        let goal_slot = env
            .goals
            .iter()
            .position(|&g| g == traj.goal)
            .ok_or(PlanError::GoalNotInEnv(traj.goal))?;
        let mut collected = BTreeSet::new();
        for &(cell, action) in &traj.steps {
            let x = policy_input(env, goal_slot, cell, &collected)?;
            dataset.push((x, Target::Class(action.index())));
            if let Some(next) = action.step(cell, env.width, env.height) {
                if env.subgoal_rewards.contains_key(&next) {
                    collected.insert(next);
                }
            }
        }
    }

    let spec = NetworkSpec::policy_mlp(policy_channels(goal_count), n);
    let mut net = Network::init(spec, config.seed).map_err(AgentError::Neural)?;
    let report = train(&mut net, &dataset, LossKind::CrossEntropy, config)?;
    let (val_idx, _) = holdout_split(dataset.len(), config.validation_fraction, config.seed);
    let holdout_accuracy = if val_idx.is_empty() {
        classification_accuracy(&net, &dataset, &(0..dataset.len()).collect::<Vec<_>>())
    } else {
        classification_accuracy(&net, &dataset, &val_idx)
    };

    Ok(ClonedPolicy {
        agent: AgentModel::learned(PolicyNet { net, grid: n, goal_count }),
        holdout_accuracy,
        report,
    })
}

/// One step of a trajectory log, in the JSONL interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLogRecord {
    pub env_id: usize,
    pub goal_index: usize,
    pub t: usize,
    pub cell: [usize; 2],
    pub action: Action,
}

/// Writes trajectories as JSONL, one record per step.
pub fn write_trajectory_log<W: Write>(
    out: &mut W,
    entries: &[(usize, usize, &Trajectory)],
) -> std::io::Result<()> {
    for &(env_id, goal_index, traj) in entries {
        for (t, &(cell, action)) in traj.steps.iter().enumerate() {
            let record = TrajectoryLogRecord {
                env_id,
                goal_index,
                t,
                cell: [cell.row, cell.col],
                action,
            };
            writeln!(out, "{}", serde_json::to_string(&record).expect("record serializes"))?;
        }
    }
    Ok(())
}

pub fn read_trajectory_log<R: BufRead>(input: R) -> std::io::Result<Vec<TrajectoryLogRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryLogRecord = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{random_environment, GenerationConfig, GridEnvironment};

    fn empty_env() -> GridEnvironment {
        GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(0, 5), Cell::new(5, 5)],
            [],
        )
    }

    #[test]
    fn discount_weights() {
        let geo = DiscountSpec::Geometric { gamma: 0.9 };
        assert!((discount_weight(&geo, 2) - 0.81).abs() < 1e-12);
        let hyp = DiscountSpec::Hyperbolic { k: 8.0 };
        assert!((discount_weight(&hyp, 1) - 1.0 / 9.0).abs() < 1e-12);
        let degenerate = DiscountSpec::Hyperbolic { k: 0.0 };
        for t in 0..10 {
            assert_eq!(discount_weight(&degenerate, t), 1.0);
        }
        assert_eq!(discount_weight(&geo, 0), 1.0);
        assert_eq!(discount_weight(&hyp, 0), 1.0);
    }

    #[test]
    fn straight_line_plan() {
        let env = empty_env();
        let agent = AgentModel::optimal_for(&env);
        let traj = plan_trajectory(&env, &agent, Cell::new(0, 5)).unwrap();
        assert_eq!(traj.len(), 5);
        assert!(traj.actions().all(|a| a == Action::Right));
        traj.check(&env).unwrap();
    }

    #[test]
    fn shortest_path_length_matches_bfs() {
        for seed in 0..100 {
            let env = random_environment(&GenerationConfig::new(6, 6, 3_000 + seed)).unwrap();
            let agent = AgentModel::optimal_for(&env);
            for &goal in &env.goals {
                let traj = plan_trajectory(&env, &agent, goal).unwrap();
                let blocked = env.blocked_mask(&env.other_goals(goal));
                let dist = bfs_distances(&env, goal, &blocked);
                assert_eq!(
                    traj.len(),
                    dist[env.cell_index(env.start)].expect("goal reachable"),
                    "seed {seed}"
                );
                traj.check(&env).unwrap();
            }
        }
    }

    #[test]
    fn hyperbolic_k0_equals_geometric_gamma1() {
        for seed in 0..100 {
            let config = GenerationConfig::new(6, 6, 7_000 + seed).with_subgoals((seed % 4) as usize);
            let env = random_environment(&config).unwrap();
            let horizon = default_horizon(6, 6);
            let geo = AgentModel::geometric(1.0, horizon);
            let hyp = AgentModel::hyperbolic(0.0, horizon);
            for &goal in &env.goals {
                let a = plan_trajectory(&env, &geo, goal).unwrap();
                let b = plan_trajectory(&env, &hyp, goal).unwrap();
                assert_eq!(a, b, "seed {seed}");
            }
        }
    }

    #[test]
    fn planner_is_deterministic() {
        let config = GenerationConfig::new(6, 6, 99).with_subgoals(3);
        let env = random_environment(&config).unwrap();
        let agent = AgentModel::hyperbolic(8.0, default_horizon(6, 6));
        let a = plan_trajectory(&env, &agent, env.goals[0]).unwrap();
        let b = plan_trajectory(&env, &agent, env.goals[0]).unwrap();
        assert_eq!(a, b);
    }

    /// Exhaustive walk enumeration used as the planning oracle: every walk of
    /// bounded length is scored by the same discounted-return objective.
    fn oracle_best_walk(
        env: &GridEnvironment,
        discount: &DiscountSpec,
        goal: Cell,
        max_len: usize,
    ) -> Option<(f64, usize, Vec<Action>)> {
        struct Search<'a> {
            env: &'a GridEnvironment,
            discount: &'a DiscountSpec,
            goal: Cell,
            blocked: Vec<bool>,
            max_len: usize,
            best: Option<(f64, usize, Vec<Action>)>,
        }
        impl Search<'_> {
            fn visit(
                &mut self,
                cell: Cell,
                collected: &mut BTreeSet<Cell>,
                value: f64,
                path: &mut Vec<Action>,
            ) {
                let t = path.len();
                if t >= self.max_len {
                    return;
                }
                for action in Action::ALL {
                    let Some(next) = action.step(cell, self.env.width, self.env.height) else {
                        continue;
                    };
                    if self.blocked[self.env.cell_index(next)] {
                        continue;
                    }
                    path.push(action);
                    if next == self.goal {
                        let total =
                            value + discount_weight(self.discount, t + 1) * self.env.goal_reward;
                        let candidate = (total, t + 1, path.clone());
                        let better = match &self.best {
                            None => true,
                            Some((bv, ba, bp)) => {
                                total > *bv
                                    || (total == *bv && t + 1 < *ba)
                                    || (total == *bv && t + 1 == *ba && path.as_slice() < bp.as_slice())
                            }
                        };
                        if better {
                            self.best = Some(candidate);
                        }
                    } else {
                        let newly = self
                            .env
                            .subgoal_rewards
                            .get(&next)
                            .filter(|_| !collected.contains(&next))
                            .copied();
                        let gain = newly
                            .map(|r| discount_weight(self.discount, t + 1) * r)
                            .unwrap_or(0.0);
                        if newly.is_some() {
                            collected.insert(next);
                        }
                        self.visit(next, collected, value + gain, path);
                        if newly.is_some() {
                            collected.remove(&next);
                        }
                    }
                    path.pop();
                }
            }
        }
        let blocked = env.blocked_mask(&env.other_goals(goal));
        let mut search = Search { env, discount, goal, blocked, max_len, best: None };
        search.visit(env.start, &mut BTreeSet::new(), 0.0, &mut Vec::new());
        search.best
    }

    /// A present-biased agent detours through an early off-path subgoal; the
    /// instance is checked against exhaustive walk enumeration.
    #[test]
    fn hyperbolic_detour_matches_walk_oracle() {
        // 4x4: the subgoal at (1, 0) sits in a dead-end pocket one step off
        // the unique shortest path toward the far goal.
        let mut env = GridEnvironment::plain(
            4,
            4,
            Cell::new(0, 0),
            vec![Cell::new(3, 3), Cell::new(3, 0)],
            [Cell::new(1, 1), Cell::new(2, 0)],
        );
        env.subgoal_rewards.insert(Cell::new(1, 0), 0.3);
        env.goal_reward = 3.0;
        let goal = Cell::new(3, 3);
        let horizon = 9;

        let discount = DiscountSpec::Hyperbolic { k: 8.0 };
        let planned = plan_from(&env, &discount, horizon, goal, env.start, 0).unwrap();
        let (oracle_value, oracle_arrival, oracle_actions) =
            oracle_best_walk(&env, &discount, goal, horizon).unwrap();
        let actions: Vec<Action> = planned.actions().collect();
        assert_eq!(actions, oracle_actions);
        assert_eq!(planned.len(), oracle_arrival);
        assert!(oracle_value > 0.0);
        // The detour visits the subgoal pocket.
        assert_eq!(planned.steps[1].0, Cell::new(1, 0));

        // With a negligible subgoal the same agent goes straight.
        let mut plain = env.clone();
        plain.subgoal_rewards.insert(Cell::new(1, 0), 0.01);
        let direct = plan_from(&plain, &discount, horizon, goal, plain.start, 0).unwrap();
        let (_, direct_arrival, direct_actions) =
            oracle_best_walk(&plain, &discount, goal, horizon).unwrap();
        assert_eq!(direct.actions().collect::<Vec<_>>(), direct_actions);
        assert_eq!(direct.len(), direct_arrival);
        assert_eq!(direct.len(), 6);
    }

    #[test]
    fn geometric_discounted_plan_matches_walk_oracle() {
        for seed in 0..20 {
            let env = random_environment(
                &GenerationConfig::new(4, 4, 40_000 + seed).with_max_blocked(4),
            )
            .unwrap();
            let discount = DiscountSpec::Geometric { gamma: 0.8 };
            let horizon = 8;
            for &goal in &env.goals {
                let planned = plan_from(&env, &discount, horizon, goal, env.start, 0);
                let oracle = oracle_best_walk(&env, &discount, goal, horizon);
                match (planned, oracle) {
                    (Ok(traj), Some((value, arrival, actions))) => {
                        assert_eq!(traj.actions().collect::<Vec<_>>(), actions, "seed {seed}");
                        assert_eq!(traj.len(), arrival);
                        assert!(value.is_finite());
                    }
                    (Err(PlanError::Unreachable(_)), None) => {}
                    (p, o) => panic!("planner/oracle disagree on feasibility: {p:?} vs {o:?}"),
                }
            }
        }
    }

    #[test]
    fn horizon_too_short_rejected() {
        let env = empty_env();
        let agent = AgentModel::geometric(1.0, 5);
        let err = plan_trajectory(&env, &agent, Cell::new(0, 5));
        assert!(matches!(err, Err(PlanError::HorizonTooShort { .. })));
    }

    #[test]
    fn unreachable_goal_reported() {
        let env = GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(0, 5), Cell::new(5, 5)],
            [Cell::new(0, 4), Cell::new(1, 5), Cell::new(1, 4)],
        );
        let agent = AgentModel::optimal_for(&env);
        assert!(matches!(
            plan_trajectory(&env, &agent, Cell::new(0, 5)),
            Err(PlanError::Unreachable(_))
        ));
    }

    #[test]
    fn likelihood_smoothing_values() {
        let env = empty_env();
        let agent = AgentModel::optimal_for(&env);
        // Toward (0, 5) from the start the planned action is Right.
        let lik = action_likelihood(
            &agent,
            &env,
            Cell::new(0, 5),
            Cell::new(0, 0),
            &BTreeSet::new(),
            0.05,
        );
        assert!((lik.get(Action::Right) - 0.9625).abs() < 1e-12);
        assert!((lik.get(Action::Up) - 0.0125).abs() < 1e-12);
        assert!((lik.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let hard = action_likelihood(
            &agent,
            &env,
            Cell::new(0, 5),
            Cell::new(0, 0),
            &BTreeSet::new(),
            0.0,
        );
        assert_eq!(hard.get(Action::Right), 1.0);
        assert_eq!(hard.get(Action::Down), 0.0);
    }

    #[test]
    fn uniform_logits_give_uniform_likelihood() {
        let env = empty_env();
        let spec = NetworkSpec::policy_mlp(policy_channels(2), 6);
        let mut net = Network::init(spec, 0).unwrap();
        for params in net.param_slices_mut() {
            params.fill(0.0);
        }
        let agent = AgentModel::learned(PolicyNet { net, grid: 6, goal_count: 2 });
        let lik = action_likelihood(
            &agent,
            &env,
            Cell::new(0, 5),
            Cell::new(2, 2),
            &BTreeSet::new(),
            0.05,
        );
        for p in lik.probabilities {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn clone_policy_smoke_single_trajectory() {
        let env = empty_env();
        let agent = AgentModel::optimal_for(&env);
        let traj = plan_trajectory(&env, &agent, Cell::new(0, 5)).unwrap();
        let config = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
        let cloned = clone_policy(&[(env, traj)], &config).unwrap();
        assert!(cloned.report.train_losses[0].is_finite());
    }

    #[test]
    fn clone_policy_rejects_empty() {
        assert!(matches!(
            clone_policy(&[], &TrainConfig::default()),
            Err(AgentError::EmptyDataset)
        ));
    }

    #[test]
    fn trajectory_log_roundtrip() {
        let env = empty_env();
        let agent = AgentModel::optimal_for(&env);
        let traj = plan_trajectory(&env, &agent, Cell::new(0, 5)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_log(&mut buf, &[(7, 0, &traj)]).unwrap();
        let records = read_trajectory_log(&buf[..]).unwrap();
        assert_eq!(records.len(), traj.len());
        assert_eq!(records[0].env_id, 7);
        assert_eq!(records[0].cell, [0, 0]);
        assert_eq!(records[0].action, Action::Right);
    }

    #[test]
    fn shortest_path_action_agrees_with_planner() {
        for seed in 0..50 {
            let env = random_environment(&GenerationConfig::new(6, 6, 60_000 + seed)).unwrap();
            let agent = AgentModel::optimal_for(&env);
            for &goal in &env.goals {
                let traj = plan_trajectory(&env, &agent, goal).unwrap();
                for &(cell, action) in &traj.steps {
                    assert_eq!(shortest_path_action(&env, goal, cell), Some(action));
                }
            }
        }
    }
}
