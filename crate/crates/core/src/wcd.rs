//! Worst-case distinctiveness (wcd): the number of initial actions an agent
//! can take that stay consistent with more than one goal.
//!
//! Two notions coexist. [`wcd_deterministic`] plans one trajectory per goal
//! with the given behavior model and takes the longest pairwise common
//! action prefix; every experiment involving general agents uses it.
//! [`wcd_optimal_worstcase`] maximizes over *all* shortest-path choices of
//! the undiscounted agent via longest-path dynamic programming on the
//! intersection of shortest-path DAGs, matching the classical definition.
//! [`brute_force_wcd`] enumerates shortest paths outright and exists to
//! check the others.

use std::collections::HashSet;

use thiserror::Error;

use crate::agents::{plan_trajectory, Action, AgentModel, PlanError, Trajectory};
use crate::env::{Cell, GridEnvironment};

/// wcd value with a realizing trajectory pair.
#[derive(Debug, Clone)]
pub struct WcdResult {
    pub value: usize,
    pub witness: (Trajectory, Trajectory),
    pub goal_pair: (Cell, Cell),
}

impl WcdResult {
    fn checked(value: usize, witness: (Trajectory, Trajectory), goal_pair: (Cell, Cell)) -> Self {
        debug_assert!(value <= witness.0.len() && value <= witness.1.len());
        debug_assert!(witness
            .0
            .actions()
            .take(value)
            .eq(witness.1.actions().take(value)));
        WcdResult { value, witness, goal_pair }
    }
}

#[derive(Debug, Error)]
pub enum WcdError {
    #[error("trajectories start at different cells")]
    MismatchedStarts,
    #[error("goal {0} is unreachable")]
    Unreachable(Cell),
    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Which wcd.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcdNotion {
    /// Maximum over the optimal agent's shortest-path choices.
    OptimalWorstCase,
    /// One planned trajectory per goal under the supplied behavior model.
    PlanBased,
}

/// Length of the longest shared action prefix of two trajectories.
pub fn common_prefix_length(a: &Trajectory, b: &Trajectory) -> Result<usize, WcdError> {
    if a.start() != b.start() {
        return Err(WcdError::MismatchedStarts);
    }
    Ok(a.actions().zip(b.actions()).take_while(|(x, y)| x == y).count())
}

/// wcd of the committed plans of `agent`: one trajectory per goal, maximum
/// pairwise common prefix.
pub fn wcd_deterministic(
    env: &GridEnvironment,
    agent: &AgentModel,
) -> Result<WcdResult, WcdError> {
    let trajectories: Vec<Trajectory> = env
        .goals
        .iter()
        .map(|&goal| plan_trajectory(env, agent, goal))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(usize, usize, usize)> = None;
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            let p = common_prefix_length(&trajectories[i], &trajectories[j])?;
            if best.map_or(true, |(v, _, _)| p > v) {
                best = Some((p, i, j));
            }
        }
    }
    let (value, i, j) = best.expect("environments have at least two goals");
    Ok(WcdResult::checked(
        value,
        (trajectories[i].clone(), trajectories[j].clone()),
        (env.goals[i], env.goals[j]),
    ))
}

/// Distances and shortest-path DAG membership for one goal, with all other
/// goals blocked.
struct GoalDag {
    goal: Cell,
    from_start: Vec<Option<u32>>,
    to_goal: Vec<Option<u32>>,
    total: u32,
}

impl GoalDag {
    fn build(env: &GridEnvironment, goal: Cell) -> Result<Self, WcdError> {
        let blocked = env.blocked_mask(&env.other_goals(goal));
        let from_start = bfs(env, env.start, &blocked);
        let to_goal = bfs(env, goal, &blocked);
        let total = from_start[env.cell_index(goal)].ok_or(WcdError::Unreachable(goal))?;
        Ok(GoalDag { goal, from_start, to_goal, total })
    }

    fn on_dag(&self, idx: usize) -> bool {
        matches!(
            (self.from_start[idx], self.to_goal[idx]),
            (Some(ds), Some(dg)) if ds + dg == self.total
        )
    }

    /// True when `u -> v` lies on some shortest start-to-goal path.
    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.on_dag(u)
            && self.on_dag(v)
            && self.from_start[v] == self.from_start[u].map(|d| d + 1)
    }

    /// Extends a path ending at `cell` to the goal along the DAG, choosing
    /// the first viable action in the fixed order.
    fn extend_to_goal(&self, env: &GridEnvironment, mut cell: Cell, out: &mut Vec<Cell>) {
        while cell != self.goal {
            let here = env.cell_index(cell);
            let next = Action::ALL
                .iter()
                .filter_map(|a| a.step(cell, env.width, env.height))
                .find(|&n| self.has_edge(here, env.cell_index(n)))
                .expect("every DAG cell reaches the goal");
            out.push(next);
            cell = next;
        }
    }
}

fn bfs(env: &GridEnvironment, from: Cell, blocked: &[bool]) -> Vec<Option<u32>> {
    let mut dist = vec![None; env.cell_count()];
    if blocked[env.cell_index(from)] {
        return dist;
    }
    let mut queue = std::collections::VecDeque::new();
    dist[env.cell_index(from)] = Some(0);
    queue.push_back(from);
    while let Some(cell) = queue.pop_front() {
        let d = dist[env.cell_index(cell)].expect("queued cells have distances");
        for next in env.neighbors(cell) {
            let idx = env.cell_index(next);
            if dist[idx].is_none() && !blocked[idx] {
                dist[idx] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

fn cells_to_trajectory(env: &GridEnvironment, cells: &[Cell], goal: Cell) -> Trajectory {
    let mut steps = Vec::with_capacity(cells.len().saturating_sub(1));
    for window in cells.windows(2) {
        let (from, to) = (window[0], window[1]);
        let action = Action::ALL
            .into_iter()
            .find(|a| a.step(from, env.width, env.height) == Some(to))
            .expect("consecutive witness cells are adjacent");
        steps.push((from, action));
    }
    Trajectory { goal, steps, terminal: goal }
}

/// Classical wcd of the optimal shortest-path agent: the longest action
/// sequence from the start whose edges all lie simultaneously on shortest
/// paths toward two different goals. Exact via longest-path DP over the
/// intersection of the per-goal shortest-path DAGs, which is acyclic.
pub fn wcd_optimal_worstcase(env: &GridEnvironment) -> Result<WcdResult, WcdError> {
    let dags: Vec<GoalDag> = env
        .goals
        .iter()
        .map(|&goal| GoalDag::build(env, goal))
        .collect::<Result<_, _>>()?;

    let mut best: Option<(usize, usize, usize, Vec<Cell>)> = None;
    for i in 0..dags.len() {
        for j in i + 1..dags.len() {
            let (value, prefix) = longest_shared_prefix(env, &dags[i], &dags[j]);
            if best.as_ref().map_or(true, |&(v, _, _, _)| value > v) {
                best = Some((value, i, j, prefix));
            }
        }
    }
    let (value, i, j, prefix) = best.expect("environments have at least two goals");

    let mut cells_i = prefix.clone();
    dags[i].extend_to_goal(env, *cells_i.last().expect("prefix contains the start"), &mut cells_i);
    let mut cells_j = prefix;
    dags[j].extend_to_goal(env, *cells_j.last().expect("prefix contains the start"), &mut cells_j);

    Ok(WcdResult::checked(
        value,
        (
            cells_to_trajectory(env, &cells_i, dags[i].goal),
            cells_to_trajectory(env, &cells_j, dags[j].goal),
        ),
        (env.goals[i], env.goals[j]),
    ))
}

/// Longest path from the start in the intersection of two shortest-path
/// DAGs, plus the realizing cell sequence.
fn longest_shared_prefix(
    env: &GridEnvironment,
    a: &GoalDag,
    b: &GoalDag,
) -> (usize, Vec<Cell>) {
    let cells = env.cell_count();
    let start_idx = env.cell_index(env.start);
    if !a.on_dag(start_idx) || !b.on_dag(start_idx) {
        return (0, vec![env.start]);
    }

    // Edges of the intersection advance the start-distance of DAG `a` by
    // exactly one, so scanning nodes by that distance is a topological order.
    let mut order: Vec<usize> = (0..cells)
        .filter(|&idx| a.on_dag(idx) && b.on_dag(idx))
        .collect();
    order.sort_by_key(|&idx| (a.from_start[idx], idx));

    let mut len: Vec<Option<usize>> = vec![None; cells];
    let mut parent: Vec<Option<usize>> = vec![None; cells];
    len[start_idx] = Some(0);
    for &u in &order {
        let Some(here) = len[u] else { continue };
        let cell = Cell::new(u / env.width, u % env.width);
        for action in Action::ALL {
            let Some(next) = action.step(cell, env.width, env.height) else { continue };
            let v = env.cell_index(next);
            if a.has_edge(u, v) && b.has_edge(u, v) && len[v].map_or(true, |l| here + 1 > l) {
                len[v] = Some(here + 1);
                parent[v] = Some(u);
            }
        }
    }

    let (best_idx, best_len) = len
        .iter()
        .enumerate()
        .filter_map(|(idx, l)| l.map(|l| (idx, l)))
        .max_by_key(|&(idx, l)| (l, std::cmp::Reverse(idx)))
        .expect("start cell always has a length");

    let mut chain = vec![best_idx];
    let mut cur = best_idx;
    while let Some(p) = parent[cur] {
        chain.push(p);
        cur = p;
    }
    chain.reverse();
    let cells_path: Vec<Cell> = chain
        .into_iter()
        .map(|idx| Cell::new(idx / env.width, idx % env.width))
        .collect();
    (best_len, cells_path)
}

const BRUTE_MAX_SIDE: usize = 6;
const BRUTE_MAX_PATHS: u64 = 10_000;

/// Enumerates every shortest path to every goal and takes the exact maximum
/// pairwise common prefix. Guarded for test-oracle scale.
pub fn brute_force_wcd(env: &GridEnvironment) -> Result<WcdResult, WcdError> {
    if env.width > BRUTE_MAX_SIDE || env.height > BRUTE_MAX_SIDE {
        return Err(WcdError::TooLarge(format!(
            "{}x{} exceeds {BRUTE_MAX_SIDE}x{BRUTE_MAX_SIDE}",
            env.width, env.height
        )));
    }
    let dags: Vec<GoalDag> = env
        .goals
        .iter()
        .map(|&goal| GoalDag::build(env, goal))
        .collect::<Result<_, _>>()?;
    for dag in &dags {
        let count = count_shortest_paths(env, dag);
        if count > BRUTE_MAX_PATHS {
            return Err(WcdError::TooLarge(format!(
                "{count} shortest paths to {} exceed {BRUTE_MAX_PATHS}",
                dag.goal
            )));
        }
    }

    let all_paths: Vec<Vec<Vec<Action>>> =
        dags.iter().map(|dag| enumerate_shortest_paths(env, dag)).collect();

    let mut best: Option<(usize, usize, usize, Vec<Action>, Vec<Action>)> = None;
    for i in 0..dags.len() {
        for j in i + 1..dags.len() {
            let mut prefixes: HashSet<&[Action]> = HashSet::new();
            for path in &all_paths[i] {
                for end in 0..=path.len() {
                    prefixes.insert(&path[..end]);
                }
            }
            for q in &all_paths[j] {
                let mut matched = 0;
                while matched < q.len() && prefixes.contains(&q[..matched + 1]) {
                    matched += 1;
                }
                if best.as_ref().map_or(true, |&(v, _, _, _, _)| matched > v) {
                    let p = all_paths[i]
                        .iter()
                        .find(|p| p.len() >= matched && p[..matched] == q[..matched])
                        .expect("a path realizes every stored prefix");
                    best = Some((matched, i, j, p.clone(), q.clone()));
                }
            }
        }
    }

    let (value, i, j, path_i, path_j) = best.expect("environments have at least two goals");
    let to_traj = |actions: &[Action], goal: Cell| {
        let mut cells = vec![env.start];
        for action in actions {
            let next = action
                .step(*cells.last().expect("non-empty"), env.width, env.height)
                .expect("enumerated paths stay on the grid");
            cells.push(next);
        }
        cells_to_trajectory(env, &cells, goal)
    };
    Ok(WcdResult::checked(
        value,
        (to_traj(&path_i, env.goals[i]), to_traj(&path_j, env.goals[j])),
        (env.goals[i], env.goals[j]),
    ))
}

fn count_shortest_paths(env: &GridEnvironment, dag: &GoalDag) -> u64 {
    let cells = env.cell_count();
    let mut order: Vec<usize> = (0..cells).filter(|&idx| dag.on_dag(idx)).collect();
    order.sort_by_key(|&idx| dag.from_start[idx]);
    let mut count = vec![0u64; cells];
    count[env.cell_index(env.start)] = 1;
    for &u in &order {
        if count[u] == 0 {
            continue;
        }
        let cell = Cell::new(u / env.width, u % env.width);
        for next in env.neighbors(cell) {
            let v = env.cell_index(next);
            if dag.has_edge(u, v) {
                count[v] = count[v].saturating_add(count[u]);
            }
        }
    }
    count[env.cell_index(dag.goal)]
}

fn enumerate_shortest_paths(env: &GridEnvironment, dag: &GoalDag) -> Vec<Vec<Action>> {
    let mut paths = Vec::new();
    let mut current = Vec::new();
    fn go(
        env: &GridEnvironment,
        dag: &GoalDag,
        cell: Cell,
        current: &mut Vec<Action>,
        paths: &mut Vec<Vec<Action>>,
    ) {
        if cell == dag.goal {
            paths.push(current.clone());
            return;
        }
        let here = env.cell_index(cell);
        for action in Action::ALL {
            let Some(next) = action.step(cell, env.width, env.height) else { continue };
            if dag.has_edge(here, env.cell_index(next)) {
                current.push(action);
                go(env, dag, next, current, paths);
                current.pop();
            }
        }
    }
    go(env, dag, env.start, &mut current, &mut paths);
    paths
}

/// Cells lying on some shortest path toward some goal, excluding the start
/// and the goals themselves. Blocking any other cell leaves every
/// shortest-path DAG unchanged, which is what Pruned-Reduce exploits.
pub fn shortest_path_dag_cells(env: &GridEnvironment) -> Result<Vec<Cell>, WcdError> {
    let mut on_any = vec![false; env.cell_count()];
    for &goal in &env.goals {
        let dag = GoalDag::build(env, goal)?;
        for idx in 0..env.cell_count() {
            if dag.on_dag(idx) {
                on_any[idx] = true;
            }
        }
    }
    Ok(env
        .cells()
        .filter(|&c| on_any[env.cell_index(c)] && c != env.start && !env.goals.contains(&c))
        .collect())
}

/// Dispatches on the wcd notion. `PlanBased` uses the supplied agent;
/// `OptimalWorstCase` ignores it.
pub fn wcd(
    env: &GridEnvironment,
    agent: &AgentModel,
    notion: WcdNotion,
) -> Result<WcdResult, WcdError> {
    match notion {
        WcdNotion::OptimalWorstCase => wcd_optimal_worstcase(env),
        WcdNotion::PlanBased => wcd_deterministic(env, agent),
    }
}

/// The notion experiments default to: the classical worst case for the
/// undiscounted agent in subgoal-free environments, plan-based otherwise.
pub fn auto_notion(env: &GridEnvironment, agent: &AgentModel) -> WcdNotion {
    if agent.is_optimal_planner() && env.subgoal_rewards.is_empty() {
        WcdNotion::OptimalWorstCase
    } else {
        WcdNotion::PlanBased
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{random_environment, GenerationConfig};

    fn make_trajectory(start: Cell, actions: &[Action], goal: Cell) -> Trajectory {
        // For prefix tests only: geometry is not validated here.
        let mut steps = Vec::new();
        let mut cell = start;
        for &a in actions {
            steps.push((cell, a));
            cell = a.step(cell, 100, 100).expect("test actions stay positive");
        }
        Trajectory { goal, steps, terminal: goal }
    }

    #[test]
    fn common_prefix_counts() {
        use Action::*;
        let a = make_trajectory(Cell::new(5, 5), &[Right, Right, Up], Cell::new(4, 7));
        let b = make_trajectory(Cell::new(5, 5), &[Right, Right, Down], Cell::new(6, 7));
        assert_eq!(common_prefix_length(&a, &b).unwrap(), 2);

        let c = make_trajectory(Cell::new(5, 5), &[Up], Cell::new(4, 5));
        let d = make_trajectory(Cell::new(5, 5), &[Down], Cell::new(6, 5));
        assert_eq!(common_prefix_length(&c, &d).unwrap(), 0);

        let e = make_trajectory(Cell::new(5, 5), &[Right, Right], Cell::new(5, 7));
        assert_eq!(common_prefix_length(&e, &e.clone()).unwrap(), 2);

        let far = make_trajectory(Cell::new(0, 0), &[Right], Cell::new(0, 1));
        assert!(matches!(common_prefix_length(&a, &far), Err(WcdError::MismatchedStarts)));
    }

    #[test]
    fn diverging_paths_have_zero_wcd() {
        // Start in the middle row; the goals pull straight up and down.
        let env = GridEnvironment::plain(
            6,
            6,
            Cell::new(2, 0),
            vec![Cell::new(0, 0), Cell::new(4, 0)],
            [],
        );
        let agent = AgentModel::optimal_for(&env);
        assert_eq!(wcd_deterministic(&env, &agent).unwrap().value, 0);
        assert_eq!(wcd_optimal_worstcase(&env).unwrap().value, 0);
    }

    fn corridor_env() -> GridEnvironment {
        GridEnvironment::plain(
            6,
            6,
            Cell::new(2, 0),
            vec![Cell::new(0, 3), Cell::new(4, 3)],
            [
                Cell::new(1, 0),
                Cell::new(1, 1),
                Cell::new(1, 2),
                Cell::new(3, 0),
                Cell::new(3, 1),
                Cell::new(3, 2),
            ],
        )
    }

    #[test]
    fn corridor_wcd_is_three() {
        let env = corridor_env();
        let agent = AgentModel::optimal_for(&env);
        assert_eq!(wcd_deterministic(&env, &agent).unwrap().value, 3);
        assert_eq!(wcd_optimal_worstcase(&env).unwrap().value, 3);
        assert_eq!(brute_force_wcd(&env).unwrap().value, 3);
    }

    #[test]
    fn three_goals_take_pairwise_maximum() {
        let mut env = corridor_env();
        env.goals.push(Cell::new(2, 5));
        assert!(crate::env::validate(&env).ok);
        let agent = AgentModel::optimal_for(&env);
        let trajs: Vec<Trajectory> = env
            .goals
            .iter()
            .map(|&g| plan_trajectory(&env, &agent, g).unwrap())
            .collect();
        let mut expected = 0;
        for i in 0..trajs.len() {
            for j in i + 1..trajs.len() {
                expected = expected.max(common_prefix_length(&trajs[i], &trajs[j]).unwrap());
            }
        }
        let got = wcd_deterministic(&env, &agent).unwrap();
        assert_eq!(got.value, expected);

        let brute = brute_force_wcd(&env).unwrap();
        let worst = wcd_optimal_worstcase(&env).unwrap();
        assert_eq!(worst.value, brute.value);
    }

    #[test]
    fn tiny_grid_examples() {
        let env = GridEnvironment::plain(
            2,
            2,
            Cell::new(0, 0),
            vec![Cell::new(0, 1), Cell::new(1, 0)],
            [],
        );
        assert_eq!(brute_force_wcd(&env).unwrap().value, 0);

        let strip = GridEnvironment::plain(
            4,
            2,
            Cell::new(0, 0),
            vec![Cell::new(0, 3), Cell::new(1, 3)],
            [],
        );
        assert_eq!(brute_force_wcd(&strip).unwrap().value, 2);
    }

    #[test]
    fn optimal_worstcase_matches_brute_force_on_randoms() {
        for seed in 0..150 {
            let side = 4 + (seed % 3) as usize;
            let config = GenerationConfig::new(side, side, 10_000 + seed);
            let env = random_environment(&config).unwrap();
            let brute = brute_force_wcd(&env).unwrap();
            let fast = wcd_optimal_worstcase(&env).unwrap();
            assert_eq!(fast.value, brute.value, "seed {seed} env {}", env.to_json());
            for traj in [&fast.witness.0, &fast.witness.1] {
                traj.check(&env).unwrap();
            }
        }
    }

    #[test]
    fn worstcase_dominates_tie_broken_plan() {
        for seed in 0..100 {
            let env = random_environment(&GenerationConfig::new(6, 6, 20_000 + seed)).unwrap();
            let agent = AgentModel::optimal_for(&env);
            let det = wcd_deterministic(&env, &agent).unwrap().value;
            let worst = wcd_optimal_worstcase(&env).unwrap().value;
            assert!(worst >= det, "seed {seed}: worst {worst} < deterministic {det}");
            assert!(worst <= env.width * env.height - 1);
        }
    }

    #[test]
    fn goal_order_symmetry() {
        for seed in 0..50 {
            let env = random_environment(&GenerationConfig::new(5, 5, 30_000 + seed)).unwrap();
            let mut flipped = env.clone();
            flipped.goals.reverse();
            assert_eq!(
                wcd_optimal_worstcase(&env).unwrap().value,
                wcd_optimal_worstcase(&flipped).unwrap().value
            );
        }
    }

    #[test]
    fn brute_force_guards() {
        let env = GridEnvironment::plain(
            7,
            7,
            Cell::new(0, 0),
            vec![Cell::new(6, 5), Cell::new(6, 6)],
            [],
        );
        assert!(matches!(brute_force_wcd(&env), Err(WcdError::TooLarge(_))));
    }

    #[test]
    fn unreachable_goal_propagates() {
        let env = GridEnvironment::plain(
            6,
            6,
            Cell::new(0, 0),
            vec![Cell::new(0, 5), Cell::new(5, 5)],
            [Cell::new(0, 4), Cell::new(1, 4), Cell::new(1, 5)],
        );
        assert!(matches!(wcd_optimal_worstcase(&env), Err(WcdError::Unreachable(_))));
        let agent = AgentModel::optimal_for(&env);
        assert!(wcd_deterministic(&env, &agent).is_err());
    }
}
