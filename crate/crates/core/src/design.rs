//! Environment-design algorithms: exhaustive search, Pruned-Reduce, greedy
//! under true or predicted wcd, and Lagrangian-relaxed discrete gradient
//! descent over a differentiable surrogate, with a multiplier sweep for
//! tracing realized cost against wcd reduction.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::AgentModel;
use crate::datagen::{encode, DatagenError};
use crate::env::{
    apply, cost, validate, Cell, CostVector, EnvError, GridEnvironment, ModKind, Modification,
};
use crate::neural::{Network, NeuralError};
use crate::wcd::{shortest_path_dag_cells, wcd, WcdError, WcdNotion};

/// The multiplier grid swept when budgets are controlled indirectly.
pub const DEFAULT_LAMBDA_GRID: [f64; 17] = [
    0.0, 0.001, 0.002, 0.005, 0.007, 0.01, 0.02, 0.05, 0.07, 0.1, 0.2, 0.5, 0.7, 1.0, 2.0, 5.0,
    7.0,
];

/// Budget structure: blocking-only, one shared pool, or separate per-kind
/// limits (experiments default to a 5:1 block/unblock ratio).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetSpec {
    BlockingOnly { budget: usize },
    Shared { budget: usize },
    Individual { blocks: usize, unblocks: usize },
}

impl BudgetSpec {
    /// Per-constraint budget vector, aligned with [`Self::cost_components`].
    pub fn constraint_budgets(&self) -> Vec<f64> {
        match self {
            BudgetSpec::BlockingOnly { budget } | BudgetSpec::Shared { budget } => {
                vec![*budget as f64]
            }
            BudgetSpec::Individual { blocks, unblocks } => {
                vec![*blocks as f64, *unblocks as f64]
            }
        }
    }

    /// Cost vector projected onto this budget's constraints.
    pub fn cost_components(&self, cv: &CostVector) -> Vec<f64> {
        match self {
            BudgetSpec::BlockingOnly { .. } => vec![cv.blocks_added as f64],
            BudgetSpec::Shared { .. } => vec![cv.total() as f64],
            BudgetSpec::Individual { .. } => {
                vec![cv.blocks_added as f64, cv.blocks_removed as f64]
            }
        }
    }

    pub fn within(&self, cv: &CostVector) -> bool {
        match self {
            BudgetSpec::BlockingOnly { budget } => {
                cv.blocks_removed == 0 && cv.blocks_added <= *budget
            }
            BudgetSpec::Shared { budget } => cv.total() <= *budget,
            BudgetSpec::Individual { blocks, unblocks } => {
                cv.blocks_added <= *blocks && cv.blocks_removed <= *unblocks
            }
        }
    }
}

/// Multiplier sweep and convergence settings for the gradient optimizer.
#[derive(Debug, Clone)]
pub struct LagrangianConfig {
    pub lambda_grid: Vec<f64>,
    /// Reference budgets for reporting the scalar L; when empty the budgets
    /// of the [`BudgetSpec`] are used. They shift L by a constant and never
    /// change the optimization path.
    pub budgets: Vec<f64>,
    pub max_steps: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig {
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            budgets: Vec::new(),
            max_steps: 50,
        }
    }
}

impl LagrangianConfig {
    fn effective_budgets(&self, mode: &BudgetSpec) -> Vec<f64> {
        let wanted = mode.constraint_budgets();
        if self.budgets.len() == wanted.len() {
            self.budgets.clone()
        } else {
            wanted
        }
    }
}

/// Result of one design run. `wcd_after` is always recomputed with the true
/// oracle, whatever drove the search.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub final_env: GridEnvironment,
    pub modifications: Vec<Modification>,
    pub realized_cost: CostVector,
    pub wcd_before: usize,
    pub wcd_after: usize,
    pub predicted_trace: Vec<f64>,
    pub nodes_or_steps: usize,
    pub wall_time: Duration,
}

impl DesignOutcome {
    pub fn reduction(&self) -> i64 {
        self.wcd_before as i64 - self.wcd_after as i64
    }
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("search space too large: {0}")]
    TooLarge(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Wcd(#[from] WcdError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
}

/// Anything that can score an environment for greedy search.
pub trait WcdScorer: Sync {
    fn score(&self, env: &GridEnvironment) -> Result<f64, DesignError>;
}

/// Scores with the exact oracle under the given notion.
pub struct TrueWcdScorer<'a> {
    pub agent: &'a AgentModel,
    pub notion: WcdNotion,
}

impl WcdScorer for TrueWcdScorer<'_> {
    fn score(&self, env: &GridEnvironment) -> Result<f64, DesignError> {
        Ok(wcd(env, self.agent, self.notion)?.value as f64)
    }
}

/// Scores with a trained surrogate network over the environment encoding.
pub struct PredictedWcdScorer<'a> {
    pub net: &'a Network,
    pub agent: &'a AgentModel,
}

impl WcdScorer for PredictedWcdScorer<'_> {
    fn score(&self, env: &GridEnvironment) -> Result<f64, DesignError> {
        let x = encode(env, self.agent)?;
        Ok(self.net.forward_scalar(&x)?)
    }
}

/// A differentiable wcd estimate: a prediction plus its gradient over the
/// blocked channel of the encoding.
pub trait WcdSurrogate: Sync {
    fn predict(&self, env: &GridEnvironment) -> Result<f64, DesignError>;
    /// Gradient of the prediction with respect to the blocked-channel entry
    /// of every cell, row-major.
    fn blocked_gradient(&self, env: &GridEnvironment) -> Result<Vec<f64>, DesignError>;
}

/// The trained network as a surrogate.
pub struct NetSurrogate<'a> {
    pub net: &'a Network,
    pub agent: &'a AgentModel,
}

impl WcdSurrogate for NetSurrogate<'_> {
    fn predict(&self, env: &GridEnvironment) -> Result<f64, DesignError> {
        let x = encode(env, self.agent)?;
        Ok(self.net.forward_scalar(&x)?)
    }

    fn blocked_gradient(&self, env: &GridEnvironment) -> Result<Vec<f64>, DesignError> {
        let x = encode(env, self.agent)?;
        let grad = self.net.input_gradient(&x)?;
        Ok(grad.data()[..env.cell_count()].to_vec())
    }
}

/// Exact-oracle stand-in for a surrogate: predictions are true wcd values
/// and gradients are single-flip finite differences. Useful for isolating
/// optimizer behavior from predictor quality.
pub struct OracleSurrogate<'a> {
    pub agent: &'a AgentModel,
    pub notion: WcdNotion,
}

impl WcdSurrogate for OracleSurrogate<'_> {
    fn predict(&self, env: &GridEnvironment) -> Result<f64, DesignError> {
        Ok(wcd(env, self.agent, self.notion)?.value as f64)
    }

    fn blocked_gradient(&self, env: &GridEnvironment) -> Result<Vec<f64>, DesignError> {
        let here = self.predict(env)?;
        let mut grad = vec![0.0; env.cell_count()];
        for cell in env.cells() {
            if cell == env.start || env.goals.contains(&cell) {
                continue;
            }
            let m = if env.is_blocked(cell) {
                Modification::unblock(cell)
            } else {
                Modification::block(cell)
            };
            let Ok(flipped) = apply(env, &m) else { continue };
            if !validate(&flipped).ok {
                continue;
            }
            let there = self.predict(&flipped)?;
            // Forward difference along the 0 -> 1 direction of the channel.
            grad[env.cell_index(cell)] = match m.kind {
                ModKind::Block => there - here,
                ModKind::Unblock => here - there,
            };
        }
        Ok(grad)
    }
}

fn true_wcd_value(
    env: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
) -> Result<usize, DesignError> {
    Ok(wcd(env, agent, notion)?.value)
}

fn require_valid(env: &GridEnvironment) -> Result<(), DesignError> {
    let report = validate(env);
    if !report.ok {
        return Err(DesignError::Precondition(format!(
            "environment invalid: {}",
            report
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    Ok(())
}

/// All single modifications allowed under the budget mode, in the fixed
/// tie-break order: cell (row, col) ascending, Block before Unblock.
fn candidate_modifications(env: &GridEnvironment, mode: &BudgetSpec) -> Vec<Modification> {
    let allow_unblock = !matches!(mode, BudgetSpec::BlockingOnly { .. });
    let mut mods = Vec::new();
    for cell in env.cells() {
        if cell == env.start || env.goals.contains(&cell) {
            continue;
        }
        if env.is_blocked(cell) {
            if allow_unblock {
                mods.push(Modification::unblock(cell));
            }
        } else {
            mods.push(Modification::block(cell));
        }
    }
    mods
}

const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Evaluates every modification set within the budget and returns a global
/// minimizer of true wcd. Ties break toward fewer modifications, then the
/// lexicographically first set.
pub fn exhaustive_search(
    env0: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
    budget: &BudgetSpec,
) -> Result<DesignOutcome, DesignError> {
    exhaustive_search_capped(env0, agent, notion, budget, DEFAULT_NODE_CAP)
}

pub fn exhaustive_search_capped(
    env0: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
    budget: &BudgetSpec,
    node_cap: usize,
) -> Result<DesignOutcome, DesignError> {
    require_valid(env0)?;
    let started = Instant::now();
    let wcd_before = true_wcd_value(env0, agent, notion)?;
    let candidates = candidate_modifications(env0, budget);
    let max_size = match budget {
        BudgetSpec::BlockingOnly { budget } | BudgetSpec::Shared { budget } => *budget,
        BudgetSpec::Individual { blocks, unblocks } => blocks + unblocks,
    }
    .min(candidates.len());

    let mut best_wcd = wcd_before;
    let mut best_mods: Vec<Modification> = Vec::new();
    let mut best_env = env0.clone();
    let mut nodes = 1usize;

    let mut combo: Vec<usize> = Vec::new();
    'sizes: for size in 1..=max_size {
        if best_wcd == 0 {
            break;
        }
        combo.clear();
        combo.extend(0..size);
        loop {
            if nodes >= node_cap {
                return Err(DesignError::TooLarge(format!("node cap {node_cap} reached")));
            }
            let mods: Vec<Modification> = combo.iter().map(|&i| candidates[i]).collect();
            if budget_allows(budget, &mods) {
                if let Some(env) = apply_all(env0, &mods) {
                    if validate(&env).ok {
                        nodes += 1;
                        let value = true_wcd_value(&env, agent, notion)?;
                        if value < best_wcd {
                            best_wcd = value;
                            best_mods = mods;
                            best_env = env;
                            if best_wcd == 0 {
                                break 'sizes;
                            }
                        }
                    }
                }
            }
            if !next_combination(&mut combo, candidates.len()) {
                break;
            }
        }
    }

    Ok(DesignOutcome {
        realized_cost: cost(env0, &best_env)?,
        final_env: best_env,
        modifications: best_mods,
        wcd_before,
        wcd_after: best_wcd,
        predicted_trace: Vec::new(),
        nodes_or_steps: nodes,
        wall_time: started.elapsed(),
    })
}

fn budget_allows(budget: &BudgetSpec, mods: &[Modification]) -> bool {
    let blocks = mods.iter().filter(|m| m.kind == ModKind::Block).count();
    let unblocks = mods.len() - blocks;
    match budget {
        BudgetSpec::BlockingOnly { budget } => unblocks == 0 && blocks <= *budget,
        BudgetSpec::Shared { budget } => mods.len() <= *budget,
        BudgetSpec::Individual { blocks: b, unblocks: u } => blocks <= *b && unblocks <= *u,
    }
}

fn apply_all(env0: &GridEnvironment, mods: &[Modification]) -> Option<GridEnvironment> {
    let mut env = env0.clone();
    for m in mods {
        env = apply(&env, m).ok()?;
    }
    Some(env)
}

/// Advances `combo` to the next lexicographic k-combination of `0..n`.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Branch-and-prune blocking search for the optimal agent. Tree nodes only
/// expand cells on some current shortest path: blocking anywhere else leaves
/// every shortest-path DAG, and therefore the wcd, unchanged.
pub fn pruned_reduce(
    env0: &GridEnvironment,
    agent: &AgentModel,
    budget: usize,
) -> Result<DesignOutcome, DesignError> {
    pruned_reduce_capped(env0, agent, budget, DEFAULT_NODE_CAP)
}

pub fn pruned_reduce_capped(
    env0: &GridEnvironment,
    agent: &AgentModel,
    budget: usize,
    node_cap: usize,
) -> Result<DesignOutcome, DesignError> {
    if !agent.is_optimal_planner() {
        return Err(DesignError::Precondition(
            "pruned-reduce applies to the optimal shortest-path agent only".into(),
        ));
    }
    require_valid(env0)?;
    let started = Instant::now();

    struct Search {
        budget: usize,
        node_cap: usize,
        nodes: usize,
        visited: HashSet<Vec<Cell>>,
        best: (usize, Vec<Cell>),
    }

    impl Search {
        fn explore(
            &mut self,
            env: &GridEnvironment,
            blocks: &mut Vec<Cell>,
        ) -> Result<(), DesignError> {
            if self.nodes >= self.node_cap {
                return Err(DesignError::TooLarge(format!(
                    "node cap {} reached",
                    self.node_cap
                )));
            }
            self.nodes += 1;
            let value = crate::wcd::wcd_optimal_worstcase(env)?.value;
            let candidate = (value, blocks.clone());
            if candidate.0 < self.best.0
                || (candidate.0 == self.best.0
                    && (candidate.1.len() < self.best.1.len()
                        || (candidate.1.len() == self.best.1.len() && candidate.1 < self.best.1)))
            {
                self.best = candidate;
            }
            if blocks.len() == self.budget || value == 0 {
                return Ok(());
            }
            for cell in shortest_path_dag_cells(env)? {
                let blocked = apply(env, &Modification::block(cell))?;
                if !validate(&blocked).ok {
                    continue;
                }
                blocks.push(cell);
                let mut key = blocks.clone();
                key.sort();
                if self.visited.insert(key) {
                    self.explore(&blocked, blocks)?;
                }
                blocks.pop();
            }
            Ok(())
        }
    }

    let wcd_before = crate::wcd::wcd_optimal_worstcase(env0)?.value;
    let mut search = Search {
        budget,
        node_cap,
        nodes: 0,
        visited: HashSet::new(),
        best: (wcd_before, Vec::new()),
    };
    search.explore(env0, &mut Vec::new())?;

    let (wcd_after, cells) = search.best;
    let mods: Vec<Modification> = cells.iter().map(|&c| Modification::block(c)).collect();
    let final_env = apply_all(env0, &mods).expect("winning blocks re-apply cleanly");
    Ok(DesignOutcome {
        realized_cost: cost(env0, &final_env)?,
        final_env,
        modifications: mods,
        wcd_before,
        wcd_after,
        predicted_trace: Vec::new(),
        nodes_or_steps: search.nodes,
        wall_time: started.elapsed(),
    })
}

/// Applies the single best strict improvement under the scorer until none
/// exists or the budget runs out. `wcd_after` comes from the true oracle
/// regardless of the scorer.
pub fn greedy(
    env0: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
    budget: &BudgetSpec,
    scorer: &dyn WcdScorer,
) -> Result<DesignOutcome, DesignError> {
    require_valid(env0)?;
    let started = Instant::now();
    let wcd_before = true_wcd_value(env0, agent, notion)?;

    let mut env = env0.clone();
    let mut mods: Vec<Modification> = Vec::new();
    let mut blocks_used = 0usize;
    let mut unblocks_used = 0usize;
    let mut evaluations = 0usize;
    let mut trace = Vec::new();

    loop {
        let current = scorer.score(&env)?;
        evaluations += 1;
        if trace.is_empty() {
            trace.push(current);
        }

        let kind_allowed = |kind: ModKind| match (kind, budget) {
            (ModKind::Block, BudgetSpec::BlockingOnly { budget }) => blocks_used < *budget,
            (ModKind::Unblock, BudgetSpec::BlockingOnly { .. }) => false,
            (_, BudgetSpec::Shared { budget }) => blocks_used + unblocks_used < *budget,
            (ModKind::Block, BudgetSpec::Individual { blocks, .. }) => blocks_used < *blocks,
            (ModKind::Unblock, BudgetSpec::Individual { unblocks, .. }) => {
                unblocks_used < *unblocks
            }
        };

        let mut best: Option<(f64, Modification, GridEnvironment)> = None;
        for m in candidate_modifications(&env, budget) {
            if !kind_allowed(m.kind) {
                continue;
            }
            let Ok(next) = apply(&env, &m) else { continue };
            if !validate(&next).ok {
                continue;
            }
            let score = scorer.score(&next)?;
            evaluations += 1;
            if score < current && best.as_ref().map_or(true, |(b, _, _)| score < *b) {
                best = Some((score, m, next));
            }
        }

        match best {
            Some((score, m, next)) => {
                match m.kind {
                    ModKind::Block => blocks_used += 1,
                    ModKind::Unblock => unblocks_used += 1,
                }
                mods.push(m);
                env = next;
                trace.push(score);
            }
            None => break,
        }
    }

    let wcd_after = true_wcd_value(&env, agent, notion)?;
    Ok(DesignOutcome {
        realized_cost: cost(env0, &env)?,
        final_env: env,
        modifications: mods,
        wcd_before,
        wcd_after,
        predicted_trace: trace,
        nodes_or_steps: evaluations,
        wall_time: started.elapsed(),
    })
}

/// The relaxed objective `predicted + sum_i lambda_i (c_i - B_i)`.
pub fn lagrangian_value(
    predicted_wcd: f64,
    cost_components: &[f64],
    lambdas: &[f64],
    budgets: &[f64],
) -> f64 {
    debug_assert_eq!(cost_components.len(), lambdas.len());
    debug_assert_eq!(budgets.len(), lambdas.len());
    predicted_wcd
        + lambdas
            .iter()
            .zip(cost_components.iter().zip(budgets))
            .map(|(l, (c, b))| l * (c - b))
            .sum::<f64>()
}

/// Convenience form computing the cost components from an environment pair.
pub fn lagrangian_value_env(
    env0: &GridEnvironment,
    env: &GridEnvironment,
    mode: &BudgetSpec,
    lambdas: &[f64],
    budgets: &[f64],
    predicted_wcd: f64,
) -> Result<f64, DesignError> {
    let components = mode.cost_components(&cost(env0, env)?);
    Ok(lagrangian_value(predicted_wcd, &components, lambdas, budgets))
}

/// Cost-component deltas of flipping one cell, relative to `env0`.
fn flip_cost_delta(
    env0: &GridEnvironment,
    m: &Modification,
    mode: &BudgetSpec,
) -> Vec<f64> {
    let originally_blocked = env0.is_blocked(m.cell);
    let (added, removed) = match (m.kind, originally_blocked) {
        (ModKind::Block, false) => (1.0, 0.0),
        (ModKind::Block, true) => (0.0, -1.0),
        (ModKind::Unblock, true) => (0.0, 1.0),
        (ModKind::Unblock, false) => (-1.0, 0.0),
    };
    match mode {
        BudgetSpec::BlockingOnly { .. } => vec![added],
        BudgetSpec::Shared { .. } => vec![added + removed],
        BudgetSpec::Individual { .. } => vec![added, removed],
    }
}

/// Flip space of the gradient optimizer under a budget mode. Blocking-only
/// runs may still revert their own added blocks, but never touch cells that
/// were blocked at the outset.
fn flip_allowed(env0: &GridEnvironment, m: &Modification, mode: &BudgetSpec) -> bool {
    match mode {
        BudgetSpec::BlockingOnly { .. } => match m.kind {
            ModKind::Block => true,
            ModKind::Unblock => !env0.is_blocked(m.cell),
        },
        _ => true,
    }
}

/// Discrete gradient descent on the Lagrangian relaxation. Each step ranks
/// all flips by the estimated decrease of L (surrogate gradient plus the
/// per-flip cost delta weighted by lambda), applies the best-ranked flip
/// that yields a valid environment, and stops as soon as the realized L
/// fails to strictly decrease or `max_steps` is reached.
pub fn gradient_optimize(
    env0: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
    surrogate: &dyn WcdSurrogate,
    mode: &BudgetSpec,
    lambdas: &[f64],
    config: &LagrangianConfig,
) -> Result<DesignOutcome, DesignError> {
    require_valid(env0)?;
    let budgets = config.effective_budgets(mode);
    if lambdas.len() != budgets.len() {
        return Err(DesignError::Precondition(format!(
            "{} multipliers for {} constraints",
            lambdas.len(),
            budgets.len()
        )));
    }
    let started = Instant::now();
    let wcd_before = true_wcd_value(env0, agent, notion)?;

    let mut env = env0.clone();
    let initial_predicted = surrogate.predict(&env)?;
    let mut trace = vec![initial_predicted];
    let mut current_l =
        lagrangian_value_env(env0, &env, mode, lambdas, &budgets, initial_predicted)?;
    let mut mods: Vec<Modification> = Vec::new();

    'steps: while mods.len() < config.max_steps {
        let grad = surrogate.blocked_gradient(&env)?;
        let mut ranked: Vec<(f64, Modification)> = Vec::new();
        for m in candidate_modifications(&env, &BudgetSpec::Shared { budget: usize::MAX }) {
            if !flip_allowed(env0, &m, mode) {
                continue;
            }
            let direction = match m.kind {
                ModKind::Block => 1.0,
                ModKind::Unblock => -1.0,
            };
            let gradient_term = direction * grad[env.cell_index(m.cell)];
            let penalty_term: f64 = flip_cost_delta(env0, &m, mode)
                .iter()
                .zip(lambdas)
                .map(|(d, l)| d * l)
                .sum();
            let estimate = gradient_term + penalty_term;
            if estimate < 0.0 {
                ranked.push((estimate, m));
            }
        }
        // Most negative estimated change of L first; ties follow the fixed
        // cell-then-kind order already present in the candidate scan.
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite estimates"));

        for (_, m) in ranked {
            let Ok(next) = apply(&env, &m) else { continue };
            if !validate(&next).ok {
                continue;
            }
            let next_predicted = surrogate.predict(&next)?;
            let next_l =
                lagrangian_value_env(env0, &next, mode, lambdas, &budgets, next_predicted)?;
            if next_l < current_l {
                env = next;
                current_l = next_l;
                trace.push(next_predicted);
                mods.push(m);
                continue 'steps;
            }
            // The best valid flip failed to improve L: converged.
            break 'steps;
        }
        break;
    }

    let wcd_after = true_wcd_value(&env, agent, notion)?;
    let steps = trace.len() - 1;
    Ok(DesignOutcome {
        realized_cost: cost(env0, &env)?,
        final_env: env,
        modifications: mods,
        wcd_before,
        wcd_after,
        predicted_trace: trace,
        nodes_or_steps: steps,
        wall_time: started.elapsed(),
    })
}

/// One sweep entry: the multipliers used and the outcome they produced.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub lambdas: Vec<f64>,
    pub outcome: DesignOutcome,
}

/// Runs [`gradient_optimize`] once per multiplier assignment: one run per
/// grid value for single-constraint modes, one per grid pair when blocking
/// and unblocking are constrained individually.
pub fn lambda_sweep<S: WcdSurrogate>(
    env0: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
    surrogate: &S,
    mode: &BudgetSpec,
    config: &LagrangianConfig,
) -> Result<Vec<SweepEntry>, DesignError> {
    let assignments: Vec<Vec<f64>> = match mode {
        BudgetSpec::Individual { .. } => config
            .lambda_grid
            .iter()
            .flat_map(|&a| config.lambda_grid.iter().map(move |&b| vec![a, b]))
            .collect(),
        _ => config.lambda_grid.iter().map(|&l| vec![l]).collect(),
    };
    assignments
        .into_par_iter()
        .map(|lambdas| {
            let outcome =
                gradient_optimize(env0, agent, notion, surrogate, mode, &lambdas, config)?;
            Ok(SweepEntry { lambdas, outcome })
        })
        .collect()
}

/// Best wcd reduction achieved at each realized total cost, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub realized_cost: usize,
    pub best_reduction: i64,
    pub lambdas: Vec<f64>,
}

pub fn frontier(entries: &[SweepEntry]) -> Vec<FrontierPoint> {
    let mut by_cost: std::collections::BTreeMap<usize, (i64, Vec<f64>)> =
        std::collections::BTreeMap::new();
    for entry in entries {
        let cost = entry.outcome.realized_cost.total();
        let reduction = entry.outcome.reduction();
        by_cost
            .entry(cost)
            .and_modify(|(best, lambdas)| {
                if reduction > *best {
                    *best = reduction;
                    *lambdas = entry.lambdas.clone();
                }
            })
            .or_insert_with(|| (reduction, entry.lambdas.clone()));
    }
    by_cost
        .into_iter()
        .map(|(realized_cost, (best_reduction, lambdas))| FrontierPoint {
            realized_cost,
            best_reduction,
            lambdas,
        })
        .collect()
}
