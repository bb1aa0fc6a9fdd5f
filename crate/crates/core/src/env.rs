//! Grid-world environments: geometry, validity checking, random generation,
//! modifications, and modification-cost accounting.
//!
//! Environments are immutable values. Every operation that "changes" an
//! environment returns a new one, so they are safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A grid position, row-major. `(0, 0)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// The two kinds of environment edits. `Block` occupies a free cell,
/// `Unblock` frees an occupied one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModKind {
    Block,
    Unblock,
}

/// A single-cell environment edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Modification {
    pub kind: ModKind,
    pub cell: Cell,
}

impl Modification {
    pub const fn block(cell: Cell) -> Self {
        Modification { kind: ModKind::Block, cell }
    }

    pub const fn unblock(cell: Cell) -> Self {
        Modification { kind: ModKind::Unblock, cell }
    }
}

impl fmt::Display for Modification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModKind::Block => write!(f, "block {}", self.cell),
            ModKind::Unblock => write!(f, "unblock {}", self.cell),
        }
    }
}

/// Per-kind modification counts between an original and a modified
/// environment, computed as blocked-set differences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostVector {
    pub blocks_added: usize,
    pub blocks_removed: usize,
}

impl CostVector {
    pub fn total(&self) -> usize {
        self.blocks_added + self.blocks_removed
    }
}

/// The decision-making world: a rectangular grid with blocked cells, a start
/// cell, at least two goal cells, and optional subgoal rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnvironment {
    pub width: usize,
    pub height: usize,
    pub blocked: BTreeSet<Cell>,
    pub start: Cell,
    pub goals: Vec<Cell>,
    pub subgoal_rewards: BTreeMap<Cell, f64>,
    pub goal_reward: f64,
}

/// Default goal reward when an environment carries no subgoals. Matches the
/// cap implied by `goal_reward = 10 x` the largest possible subgoal draw.
pub const DEFAULT_GOAL_REWARD: f64 = 3.0;

/// Subgoal rewards are drawn uniformly from this range.
pub const SUBGOAL_REWARD_RANGE: (f64, f64) = (0.05, 0.3);

impl GridEnvironment {
    pub fn new(
        width: usize,
        height: usize,
        start: Cell,
        goals: Vec<Cell>,
        blocked: BTreeSet<Cell>,
        subgoal_rewards: BTreeMap<Cell, f64>,
        goal_reward: f64,
    ) -> Self {
        GridEnvironment { width, height, blocked, start, goals, subgoal_rewards, goal_reward }
    }

    /// Convenience constructor for an environment without subgoals.
    pub fn plain(
        width: usize,
        height: usize,
        start: Cell,
        goals: Vec<Cell>,
        blocked: impl IntoIterator<Item = Cell>,
    ) -> Self {
        GridEnvironment::new(
            width,
            height,
            start,
            goals,
            blocked.into_iter().collect(),
            BTreeMap::new(),
            DEFAULT_GOAL_REWARD,
        )
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked.contains(&cell)
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    /// Row-major scan over all grid cells.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let width = self.width;
        (0..self.height).flat_map(move |row| (0..width).map(move |col| Cell::new(row, col)))
    }

    /// 4-neighborhood of `cell`, clipped to the grid.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let deltas: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        deltas.into_iter().filter_map(move |(dr, dc)| {
            let row = cell.row.checked_add_signed(dr)?;
            let col = cell.col.checked_add_signed(dc)?;
            let next = Cell::new(row, col);
            self.in_bounds(next).then_some(next)
        })
    }

    /// Dense occupancy mask over `blocked` plus `extra`, indexed row-major.
    pub fn blocked_mask(&self, extra: &[Cell]) -> Vec<bool> {
        let mut mask = vec![false; self.cell_count()];
        for &cell in &self.blocked {
            mask[self.cell_index(cell)] = true;
        }
        for &cell in extra {
            mask[self.cell_index(cell)] = true;
        }
        mask
    }

    /// All goals except `goal`, used wherever other goals act as obstacles.
    pub fn other_goals(&self, goal: Cell) -> Vec<Cell> {
        self.goals.iter().copied().filter(|&g| g != goal).collect()
    }
}

/// One violated environment invariant, with the offending cell where that
/// makes sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    StartOutOfBounds(Cell),
    StartBlocked(Cell),
    TooFewGoals(usize),
    GoalOutOfBounds(Cell),
    GoalBlocked(Cell),
    GoalDuplicated(Cell),
    GoalEqualsStart(Cell),
    GoalUnreachable(Cell),
    BlockedOutOfBounds(Cell),
    SubgoalCellInvalid(Cell),
    SubgoalRewardOutOfRange(Cell),
    GoalRewardNotPositive,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartOutOfBounds(c) => write!(f, "start {c} out of bounds"),
            Violation::StartBlocked(c) => write!(f, "start {c} blocked"),
            Violation::TooFewGoals(n) => write!(f, "need at least 2 goals, found {n}"),
            Violation::GoalOutOfBounds(c) => write!(f, "goal {c} out of bounds"),
            Violation::GoalBlocked(c) => write!(f, "goal {c} blocked"),
            Violation::GoalDuplicated(c) => write!(f, "goal {c} duplicated"),
            Violation::GoalEqualsStart(c) => write!(f, "goal {c} equals start"),
            Violation::GoalUnreachable(c) => write!(f, "goal {c} unreachable"),
            Violation::BlockedOutOfBounds(c) => write!(f, "blocked cell {c} out of bounds"),
            Violation::SubgoalCellInvalid(c) => write!(f, "subgoal cell {c} invalid"),
            Violation::SubgoalRewardOutOfRange(c) => {
                write!(f, "subgoal reward at {c} out of range")
            }
            Violation::GoalRewardNotPositive => write!(f, "goal reward must be positive"),
        }
    }
}

/// Outcome of [`validate`]: reports, never fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid modification: {0}")]
    InvalidModification(String),
    #[error("environments differ in geometry, start, or goals")]
    GeometryMismatch,
    #[error("invalid generation config: {0}")]
    ConfigInvalid(String),
    #[error("generation exhausted after {0} rejected attempts")]
    GenerationExhausted(usize),
    #[error("malformed environment file: {0}")]
    Format(String),
}

/// Checks every [`GridEnvironment`] invariant and reports each violation.
///
/// Reachability of each goal is checked with all other goals treated as
/// blocked: goals are terminal, so a path toward one goal may not pass
/// through another.
pub fn validate(env: &GridEnvironment) -> ValidityReport {
    let mut violations = Vec::new();

    for &cell in &env.blocked {
        if !env.in_bounds(cell) {
            violations.push(Violation::BlockedOutOfBounds(cell));
        }
    }

    let start_ok = if !env.in_bounds(env.start) {
        violations.push(Violation::StartOutOfBounds(env.start));
        false
    } else if env.is_blocked(env.start) {
        violations.push(Violation::StartBlocked(env.start));
        false
    } else {
        true
    };

    if env.goals.len() < 2 {
        violations.push(Violation::TooFewGoals(env.goals.len()));
    }
    let mut seen = BTreeSet::new();
    for &goal in &env.goals {
        if !env.in_bounds(goal) {
            violations.push(Violation::GoalOutOfBounds(goal));
            continue;
        }
        if env.is_blocked(goal) {
            violations.push(Violation::GoalBlocked(goal));
        }
        if goal == env.start {
            violations.push(Violation::GoalEqualsStart(goal));
        }
        if !seen.insert(goal) {
            violations.push(Violation::GoalDuplicated(goal));
        }
    }

    if violations.is_empty() && start_ok {
        for &goal in &env.goals {
            let others = env.other_goals(goal);
            let reachable = bfs_reachable(env, env.start, &others);
            if !reachable[env.cell_index(goal)] {
                violations.push(Violation::GoalUnreachable(goal));
            }
        }
    }

    if env.goal_reward <= 0.0 {
        violations.push(Violation::GoalRewardNotPositive);
    }
    for (&cell, &reward) in &env.subgoal_rewards {
        let invalid = !env.in_bounds(cell)
            || env.is_blocked(cell)
            || cell == env.start
            || env.goals.contains(&cell);
        if invalid {
            violations.push(Violation::SubgoalCellInvalid(cell));
        }
        if !(0.0..=env.goal_reward / 10.0).contains(&reward) {
            violations.push(Violation::SubgoalRewardOutOfRange(cell));
        }
    }

    ValidityReport { ok: violations.is_empty(), violations }
}

fn bfs_reachable(env: &GridEnvironment, from: Cell, extra_blocked: &[Cell]) -> Vec<bool> {
    let mask = env.blocked_mask(extra_blocked);
    let mut visited = vec![false; env.cell_count()];
    let mut queue = std::collections::VecDeque::new();
    visited[env.cell_index(from)] = true;
    queue.push_back(from);
    while let Some(cell) = queue.pop_front() {
        for next in env.neighbors(cell) {
            let idx = env.cell_index(next);
            if !visited[idx] && !mask[idx] {
                visited[idx] = true;
                queue.push_back(next);
            }
        }
    }
    visited
}

/// Cells reachable from `from` by 4-neighbor moves avoiding
/// `blocked ∪ extra_blocked`. Always contains `from` on success.
pub fn reachable_set(
    env: &GridEnvironment,
    from: Cell,
    extra_blocked: &BTreeSet<Cell>,
) -> Result<BTreeSet<Cell>, EnvError> {
    if !env.in_bounds(from) {
        return Err(EnvError::Precondition(format!("cell {from} out of bounds")));
    }
    if env.is_blocked(from) || extra_blocked.contains(&from) {
        return Err(EnvError::Precondition(format!("cell {from} is blocked")));
    }
    let extra: Vec<Cell> = extra_blocked.iter().copied().collect();
    let visited = bfs_reachable(env, from, &extra);
    Ok(env
        .cells()
        .filter(|&c| visited[env.cell_index(c)])
        .collect())
}

/// Applies one modification, returning a new environment. The result may be
/// invalid; callers that need validity run [`validate`] on it.
pub fn apply(env: &GridEnvironment, m: &Modification) -> Result<GridEnvironment, EnvError> {
    if !env.in_bounds(m.cell) {
        return Err(EnvError::InvalidModification(format!("cell {} out of bounds", m.cell)));
    }
    if m.cell == env.start || env.goals.contains(&m.cell) {
        return Err(EnvError::InvalidModification(format!(
            "cell {} is the start or a goal",
            m.cell
        )));
    }
    let mut next = env.clone();
    match m.kind {
        ModKind::Block => {
            if env.is_blocked(m.cell) {
                return Err(EnvError::InvalidModification(format!(
                    "cell {} is already blocked",
                    m.cell
                )));
            }
            next.blocked.insert(m.cell);
        }
        ModKind::Unblock => {
            if !env.is_blocked(m.cell) {
                return Err(EnvError::InvalidModification(format!(
                    "cell {} is not blocked",
                    m.cell
                )));
            }
            next.blocked.remove(&m.cell);
        }
    }
    Ok(next)
}

/// Modification cost between two environments over the same geometry,
/// computed as blocked-set differences.
pub fn cost(original: &GridEnvironment, modified: &GridEnvironment) -> Result<CostVector, EnvError> {
    if original.width != modified.width
        || original.height != modified.height
        || original.start != modified.start
        || original.goals != modified.goals
    {
        return Err(EnvError::GeometryMismatch);
    }
    Ok(CostVector {
        blocks_added: modified.blocked.difference(&original.blocked).count(),
        blocks_removed: original.blocked.difference(&modified.blocked).count(),
    })
}

/// Parameters for [`random_environment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub width: usize,
    pub height: usize,
    /// Upper bound on the blocked-cell count; the count itself is drawn
    /// uniformly from `[0, max_blocked]`.
    pub max_blocked: usize,
    pub goal_count: usize,
    pub subgoal_count: usize,
    pub seed: u64,
}

impl GenerationConfig {
    /// Defaults: `max_blocked = 2 x width`, two goals, no subgoals.
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        GenerationConfig {
            width,
            height,
            max_blocked: 2 * width,
            goal_count: 2,
            subgoal_count: 0,
            seed,
        }
    }

    pub fn with_max_blocked(mut self, max_blocked: usize) -> Self {
        self.max_blocked = max_blocked;
        self
    }

    pub fn with_subgoals(mut self, subgoal_count: usize) -> Self {
        self.subgoal_count = subgoal_count;
        self
    }

    pub fn with_goal_count(mut self, goal_count: usize) -> Self {
        self.goal_count = goal_count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const MAX_GENERATION_ATTEMPTS: usize = 10_000;

/// Draws a random valid environment: start uniform in column 0, goals uniform
/// without replacement over the last two columns, blocked count uniform in
/// `[0, max_blocked]` with positions uniform over the remaining cells.
/// Placement is rejection-sampled until [`validate`] passes; the blocked
/// count is drawn once so its marginal distribution stays uniform.
pub fn random_environment(config: &GenerationConfig) -> Result<GridEnvironment, EnvError> {
    if config.width < 3 || config.height < 1 {
        return Err(EnvError::ConfigInvalid("grid must be at least 3 wide".into()));
    }
    if config.goal_count < 2 {
        return Err(EnvError::ConfigInvalid("need at least 2 goals".into()));
    }
    let capacity = config.width * config.height;
    if config.max_blocked > capacity.saturating_sub(1 + config.goal_count) {
        return Err(EnvError::ConfigInvalid(format!(
            "max_blocked {} exceeds grid capacity",
            config.max_blocked
        )));
    }
    if config.goal_count > 2 * config.height {
        return Err(EnvError::ConfigInvalid("too many goals for the last two columns".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let blocked_count = rng.gen_range(0..=config.max_blocked);

    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let start = Cell::new(rng.gen_range(0..config.height), 0);

        let mut goal_pool: Vec<Cell> = (0..config.height)
            .flat_map(|row| {
                [Cell::new(row, config.width - 2), Cell::new(row, config.width - 1)]
            })
            .filter(|&c| c != start)
            .collect();
        goal_pool.shuffle(&mut rng);
        let goals: Vec<Cell> = goal_pool.into_iter().take(config.goal_count).collect();

        let mut remaining: Vec<Cell> = (0..config.height)
            .flat_map(|row| (0..config.width).map(move |col| Cell::new(row, col)))
            .filter(|c| *c != start && !goals.contains(c))
            .collect();
        remaining.shuffle(&mut rng);
        let blocked: BTreeSet<Cell> = remaining.iter().copied().take(blocked_count).collect();

        let mut subgoal_rewards = BTreeMap::new();
        let mut goal_reward = DEFAULT_GOAL_REWARD;
        if config.subgoal_count > 0 {
            let free: Vec<Cell> = remaining
                .iter()
                .copied()
                .skip(blocked_count)
                .take(config.subgoal_count)
                .collect();
            if free.len() < config.subgoal_count {
                continue;
            }
            let mut max_reward: f64 = 0.0;
            for cell in free {
                let reward = rng.gen_range(SUBGOAL_REWARD_RANGE.0..=SUBGOAL_REWARD_RANGE.1);
                max_reward = max_reward.max(reward);
                subgoal_rewards.insert(cell, reward);
            }
            goal_reward = 10.0 * max_reward;
        }

        let env = GridEnvironment::new(
            config.width,
            config.height,
            start,
            goals,
            blocked,
            subgoal_rewards,
            goal_reward,
        );
        if validate(&env).ok {
            return Ok(env);
        }
    }
    Err(EnvError::GenerationExhausted(MAX_GENERATION_ATTEMPTS))
}

#[derive(Serialize, Deserialize)]
struct EnvJson {
    width: usize,
    height: usize,
    start: [usize; 2],
    goals: Vec<[usize; 2]>,
    blocked: Vec<[usize; 2]>,
    #[serde(default)]
    subgoal_rewards: Vec<(usize, usize, f64)>,
    goal_reward: f64,
}

impl GridEnvironment {
    pub fn to_json(&self) -> String {
        let repr = EnvJson {
            width: self.width,
            height: self.height,
            start: [self.start.row, self.start.col],
            goals: self.goals.iter().map(|g| [g.row, g.col]).collect(),
            blocked: self.blocked.iter().map(|b| [b.row, b.col]).collect(),
            subgoal_rewards: self
                .subgoal_rewards
                .iter()
                .map(|(c, &r)| (c.row, c.col, r))
                .collect(),
            goal_reward: self.goal_reward,
        };
        serde_json::to_string_pretty(&repr).expect("environment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let repr: EnvJson =
            serde_json::from_str(text).map_err(|e| EnvError::Format(e.to_string()))?;
        Ok(GridEnvironment::new(
            repr.width,
            repr.height,
            Cell::new(repr.start[0], repr.start[1]),
            repr.goals.iter().map(|g| Cell::new(g[0], g[1])).collect(),
            repr.blocked.iter().map(|b| Cell::new(b[0], b[1])).collect(),
            repr.subgoal_rewards
                .iter()
                .map(|&(r, c, v)| (Cell::new(r, c), v))
                .collect(),
            repr.goal_reward,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), EnvError> {
        std::fs::write(path, self.to_json()).map_err(|e| EnvError::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Format(e.to_string()))?;
        GridEnvironment::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_6x6() -> GridEnvironment {
        GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(5, 4), Cell::new(5, 5)],
            [],
        )
    }

    #[test]
    fn validate_empty_grid_ok() {
        assert!(validate(&empty_6x6()).ok);
    }

    #[test]
    fn validate_walled_in_goal() {
        let env = GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(5, 4), Cell::new(5, 5)],
            [Cell::new(4, 4), Cell::new(4, 5), Cell::new(5, 3)],
        );
        let report = validate(&env);
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::GoalUnreachable(_))));
    }

    #[test]
    fn validate_blocked_start() {
        let mut env = empty_6x6();
        env.blocked.insert(env.start);
        let report = validate(&env);
        assert!(!report.ok);
        assert!(report.violations.contains(&Violation::StartBlocked(Cell::new(0, 0))));
    }

    #[test]
    fn reachable_set_empty_grid() {
        let env = GridEnvironment::plain(
            3,
            3,
            Cell::new(1, 1),
            vec![Cell::new(0, 2), Cell::new(2, 2)],
            [],
        );
        let set = reachable_set(&env, Cell::new(1, 1), &BTreeSet::new()).unwrap();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn reachable_set_wall_split() {
        let env = GridEnvironment::plain(
            3,
            3,
            Cell::new(0, 0),
            vec![Cell::new(0, 2), Cell::new(2, 2)],
            [Cell::new(0, 1), Cell::new(1, 1), Cell::new(2, 1)],
        );
        let set = reachable_set(&env, Cell::new(0, 0), &BTreeSet::new()).unwrap();
        let expected: BTreeSet<Cell> =
            [Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)].into_iter().collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn reachable_set_blocked_from_rejected() {
        let env = GridEnvironment::plain(
            3,
            3,
            Cell::new(0, 0),
            vec![Cell::new(0, 2), Cell::new(2, 2)],
            [Cell::new(1, 1)],
        );
        assert!(reachable_set(&env, Cell::new(1, 1), &BTreeSet::new()).is_err());
        assert!(reachable_set(&env, Cell::new(9, 9), &BTreeSet::new()).is_err());
    }

    /// Independent recursive DFS used as the reachability oracle.
    fn dfs_reachable(env: &GridEnvironment, from: Cell) -> BTreeSet<Cell> {
        fn go(env: &GridEnvironment, cell: Cell, seen: &mut BTreeSet<Cell>) {
            if !seen.insert(cell) {
                return;
            }
            let candidates = [
                (cell.row.wrapping_sub(1), cell.col),
                (cell.row + 1, cell.col),
                (cell.row, cell.col.wrapping_sub(1)),
                (cell.row, cell.col + 1),
            ];
            for (row, col) in candidates {
                let next = Cell::new(row, col);
                if env.in_bounds(next) && !env.is_blocked(next) {
                    go(env, next, seen);
                }
            }
        }
        let mut seen = BTreeSet::new();
        go(env, from, &mut seen);
        seen
    }

    #[test]
    fn reachable_set_matches_dfs_oracle() {
        for seed in 0..200 {
            let env = random_environment(&GenerationConfig::new(6, 6, seed)).unwrap();
            let bfs = reachable_set(&env, env.start, &BTreeSet::new()).unwrap();
            assert_eq!(bfs, dfs_reachable(&env, env.start), "seed {seed}");
        }
    }

    #[test]
    fn apply_block_and_roundtrip() {
        let env = empty_6x6();
        let blocked = apply(&env, &Modification::block(Cell::new(2, 2))).unwrap();
        assert!(blocked.is_blocked(Cell::new(2, 2)));
        assert!(!env.is_blocked(Cell::new(2, 2)), "input untouched");

        let back = apply(&blocked, &Modification::unblock(Cell::new(2, 2))).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn apply_rejects_goal_and_double_block() {
        let env = empty_6x6();
        assert!(apply(&env, &Modification::block(Cell::new(5, 5))).is_err());
        assert!(apply(&env, &Modification::block(Cell::new(0, 0))).is_err());
        assert!(apply(&env, &Modification::unblock(Cell::new(2, 2))).is_err());
        let blocked = apply(&env, &Modification::block(Cell::new(2, 2))).unwrap();
        assert!(apply(&blocked, &Modification::block(Cell::new(2, 2))).is_err());
    }

    #[test]
    fn cost_counts_set_differences() {
        let env = GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(5, 4), Cell::new(5, 5)],
            [Cell::new(3, 3)],
        );
        assert_eq!(cost(&env, &env).unwrap(), CostVector::default());

        let one = apply(&env, &Modification::block(Cell::new(1, 1))).unwrap();
        assert_eq!(cost(&env, &one).unwrap(), CostVector { blocks_added: 1, blocks_removed: 0 });

        let two = apply(&one, &Modification::unblock(Cell::new(3, 3))).unwrap();
        assert_eq!(cost(&env, &two).unwrap(), CostVector { blocks_added: 1, blocks_removed: 1 });
    }

    #[test]
    fn cost_rejects_mismatched_geometry() {
        let a = empty_6x6();
        let b = GridEnvironment::plain(
            5,
            6,
            Cell::new(0, 0),
            vec![Cell::new(4, 3), Cell::new(4, 4)],
            [],
        );
        assert_eq!(cost(&a, &b), Err(EnvError::GeometryMismatch));
    }

    #[test]
    fn random_environment_respects_paper_range() {
        for seed in 0..50 {
            let config = GenerationConfig::new(6, 6, seed);
            let env = random_environment(&config).unwrap();
            assert!(env.blocked.len() <= 12);
            assert!(validate(&env).ok);
            assert_eq!(env.start.col, 0);
            for goal in &env.goals {
                assert!(goal.col >= 4);
            }
        }
    }

    #[test]
    fn random_environment_zero_blocked() {
        let config = GenerationConfig::new(6, 6, 7).with_max_blocked(0);
        let env = random_environment(&config).unwrap();
        assert!(env.blocked.is_empty());
        assert!(validate(&env).ok);
    }

    #[test]
    fn random_environment_deterministic() {
        let config = GenerationConfig::new(6, 6, 1234).with_subgoals(3);
        assert_eq!(random_environment(&config).unwrap(), random_environment(&config).unwrap());
    }

    #[test]
    fn random_environment_subgoal_invariants() {
        for seed in 0..30 {
            let config = GenerationConfig::new(6, 6, seed).with_subgoals(4);
            let env = random_environment(&config).unwrap();
            assert_eq!(env.subgoal_rewards.len(), 4);
            let max = env
                .subgoal_rewards
                .values()
                .fold(0.0_f64, |acc, &r| acc.max(r));
            assert!((env.goal_reward - 10.0 * max).abs() < 1e-12);
            assert!(validate(&env).ok);
        }
    }

    #[test]
    fn blocked_count_uniform_chi_square() {
        let max_blocked = 12;
        let draws = 10_000;
        let mut counts = vec![0usize; max_blocked + 1];
        for seed in 0..draws {
            let config = GenerationConfig::new(6, 6, 900_000 + seed as u64);
            let env = random_environment(&config).unwrap();
            counts[env.blocked.len()] += 1;
        }
        let expected = draws as f64 / (max_blocked + 1) as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // Chi-square critical value at p = 0.01 with 12 degrees of freedom.
        assert!(stat < 26.217, "chi-square statistic {stat:.2} rejects uniformity");
    }

    #[test]
    fn json_roundtrip() {
        let config = GenerationConfig::new(6, 6, 42).with_subgoals(2);
        let env = random_environment(&config).unwrap();
        let parsed = GridEnvironment::from_json(&env.to_json()).unwrap();
        assert_eq!(env, parsed);
    }
}
