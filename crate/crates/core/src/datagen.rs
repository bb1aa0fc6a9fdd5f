//! Simulation-driven dataset construction: tensor encodings of environments,
//! wcd labeling, and persistent JSONL dataset files.

use std::collections::BTreeSet;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{default_horizon, AgentModel, DiscountSpec};
use crate::env::{
    random_environment, Cell, EnvError, GenerationConfig, GridEnvironment, ModKind, Modification,
};
use crate::neural::Tensor;
use crate::stats::splitmix64;
use crate::wcd::{auto_notion, wcd, WcdError, WcdNotion};

/// Fixed channel order of the environment encoding. Changing this breaks
/// every stored dataset and checkpoint, so it is asserted in tests.
pub const CHANNEL_LAYOUT: &str = "blocked|start|goal[0..G]|agent_param|subgoal_reward";

/// Grid size and goal count an encoding is built for. Channel count is
/// `4 + goal_count`: blocked mask, start, one channel per goal slot, a
/// constant agent-parameter plane, and normalized subgoal rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub n: usize,
    pub goal_count: usize,
}

impl EncodingSpec {
    pub fn new(n: usize, goal_count: usize) -> Self {
        EncodingSpec { n, goal_count }
    }

    pub fn for_env(env: &GridEnvironment) -> Self {
        EncodingSpec { n: env.width, goal_count: env.goals.len() }
    }

    pub fn channels(&self) -> usize {
        4 + self.goal_count
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.channels(), self.n, self.n]
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("channel {0} is not the blocked channel and cannot be modified")]
    NotModifiable(usize),
    #[error("dataset must contain at least one sample")]
    EmptyDataset,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Wcd(#[from] WcdError),
    #[error("io error: {0}")]
    Io(String),
}

/// Raw channel data in [`CHANNEL_LAYOUT`] order. Subgoals in `collected` are
/// blanked from the reward plane (used by policy encodings that track
/// progress); pass an empty set for the plain environment encoding.
pub(crate) fn env_channel_data(
    env: &GridEnvironment,
    param: f64,
    collected: &BTreeSet<Cell>,
) -> Vec<f64> {
    let n = env.width;
    let plane = n * n;
    let goal_count = env.goals.len();
    let channels = 4 + goal_count;
    let mut data = vec![0.0; channels * plane];
    for &cell in &env.blocked {
        data[env.cell_index(cell)] = 1.0;
    }
    data[plane + env.cell_index(env.start)] = 1.0;
    for (slot, &goal) in env.goals.iter().enumerate() {
        data[(2 + slot) * plane + env.cell_index(goal)] = 1.0;
    }
    let param_offset = (2 + goal_count) * plane;
    data[param_offset..param_offset + plane].fill(param);
    let subgoal_offset = (3 + goal_count) * plane;
    for (&cell, &reward) in &env.subgoal_rewards {
        if !collected.contains(&cell) {
            data[subgoal_offset + env.cell_index(cell)] = reward / env.goal_reward;
        }
    }
    data
}

/// Encodes an environment and behavior model as a `k x N x N` tensor.
/// Deterministic, and invertible for the structure channels.
pub fn encode(env: &GridEnvironment, agent: &AgentModel) -> Result<Tensor, DatagenError> {
    if env.width != env.height {
        return Err(DatagenError::Shape(format!(
            "encoding needs a square grid, got {}x{}",
            env.width, env.height
        )));
    }
    let spec = EncodingSpec::for_env(env);
    let data = env_channel_data(env, agent.encoding_param(), &BTreeSet::new());
    Ok(Tensor::new(spec.shape(), data).map_err(|e| DatagenError::Shape(e.to_string()))?)
}

/// Rebuilds an environment from the structure channels of an encoding.
/// Subgoal rewards are rescaled by the supplied `goal_reward`.
pub fn decode_environment(x: &Tensor, goal_reward: f64) -> Result<GridEnvironment, DatagenError> {
    let shape = x.shape();
    if shape.len() != 3 || shape[1] != shape[2] || shape[0] < 5 {
        return Err(DatagenError::Shape(format!("not an encoding shape: {shape:?}")));
    }
    let n = shape[1];
    let plane = n * n;
    let goal_count = shape[0] - 4;
    let data = x.data();
    let cell_at = |idx: usize| Cell::new(idx / n, idx % n);

    let blocked: BTreeSet<Cell> =
        (0..plane).filter(|&i| data[i] > 0.5).map(cell_at).collect();
    let start = (0..plane)
        .find(|&i| data[plane + i] > 0.5)
        .map(cell_at)
        .ok_or_else(|| DatagenError::Shape("start channel has no cell".into()))?;
    let mut goals = Vec::with_capacity(goal_count);
    for slot in 0..goal_count {
        let offset = (2 + slot) * plane;
        let goal = (0..plane)
            .find(|&i| data[offset + i] > 0.5)
            .map(cell_at)
            .ok_or_else(|| DatagenError::Shape(format!("goal slot {slot} has no cell")))?;
        goals.push(goal);
    }
    let subgoal_offset = (3 + goal_count) * plane;
    let subgoal_rewards = (0..plane)
        .filter(|&i| data[subgoal_offset + i] > 0.0)
        .map(|i| (cell_at(i), data[subgoal_offset + i] * goal_reward))
        .collect();
    Ok(GridEnvironment::new(n, n, start, goals, blocked, subgoal_rewards, goal_reward))
}

/// Direction of a proposed encoding flip on a binary channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipDirection {
    ZeroToOne,
    OneToZero,
}

/// Blocked-mask channel index in [`CHANNEL_LAYOUT`].
pub const BLOCKED_CHANNEL: usize = 0;

/// Maps a proposed flip of one encoding element to the environment edit it
/// represents. Only the blocked channel is modifiable.
pub fn tensor_flip_to_modification(
    channel: usize,
    cell: Cell,
    direction: FlipDirection,
) -> Result<Modification, DatagenError> {
    if channel != BLOCKED_CHANNEL {
        return Err(DatagenError::NotModifiable(channel));
    }
    Ok(match direction {
        FlipDirection::ZeroToOne => Modification { kind: ModKind::Block, cell },
        FlipDirection::OneToZero => Modification { kind: ModKind::Unblock, cell },
    })
}

/// Behavior-model family tag stored alongside samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentVariant {
    Geometric,
    Hyperbolic,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentTag {
    pub variant: AgentVariant,
    pub param: f64,
}

impl AgentTag {
    pub fn of(agent: &AgentModel) -> Self {
        let variant = match agent {
            AgentModel::Planner { discount: DiscountSpec::Geometric { .. }, .. } => {
                AgentVariant::Geometric
            }
            AgentModel::Planner { discount: DiscountSpec::Hyperbolic { .. }, .. } => {
                AgentVariant::Hyperbolic
            }
            AgentModel::Learned { .. } => AgentVariant::Learned,
        };
        AgentTag { variant, param: agent.encoding_param() }
    }

    /// Rebuilds a planner with the given horizon; learned tags carry no
    /// weights and cannot be rebuilt.
    pub fn to_planner(&self, horizon: usize) -> Option<AgentModel> {
        match self.variant {
            AgentVariant::Geometric => Some(AgentModel::geometric(self.param, horizon)),
            AgentVariant::Hyperbolic => Some(AgentModel::hyperbolic(self.param, horizon)),
            AgentVariant::Learned => None,
        }
    }
}

/// One labeled training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Tensor,
    pub agent: AgentTag,
    pub y: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleJson {
    x: Vec<f64>,
    shape: Vec<usize>,
    agent: AgentTag,
    y: f64,
}

/// Draws the behavior model labeling each sample.
#[derive(Debug, Clone)]
pub enum AgentSampler {
    Fixed(AgentTag),
    GammaUniform { lo: f64, hi: f64 },
    KUniform { lo: f64, hi: f64 },
}

impl AgentSampler {
    pub fn optimal() -> Self {
        AgentSampler::Fixed(AgentTag { variant: AgentVariant::Geometric, param: 1.0 })
    }

    pub fn hyperbolic(k: f64) -> Self {
        AgentSampler::Fixed(AgentTag { variant: AgentVariant::Hyperbolic, param: k })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> AgentTag {
        match self {
            AgentSampler::Fixed(tag) => *tag,
            AgentSampler::GammaUniform { lo, hi } => AgentTag {
                variant: AgentVariant::Geometric,
                param: rng.gen_range(*lo..=*hi),
            },
            AgentSampler::KUniform { lo, hi } => AgentTag {
                variant: AgentVariant::Hyperbolic,
                param: rng.gen_range(*lo..=*hi),
            },
        }
    }
}

/// Which oracle labels the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Classical worst case for the undiscounted subgoal-free agent,
    /// plan-based otherwise.
    Auto,
    PlanBased,
    OptimalWorstCase,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub count: usize,
    pub mean_label: f64,
    pub min_label: f64,
    pub max_label: f64,
    /// Label histogram keyed by integer wcd value.
    pub histogram: std::collections::BTreeMap<u64, usize>,
}

fn summarize(samples: &[Sample]) -> DatasetSummary {
    let mut histogram = std::collections::BTreeMap::new();
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for s in samples {
        *histogram.entry(s.y as u64).or_insert(0) += 1;
        sum += s.y;
        min = min.min(s.y);
        max = max.max(s.y);
    }
    DatasetSummary {
        count: samples.len(),
        mean_label: sum / samples.len().max(1) as f64,
        min_label: min,
        max_label: max,
        histogram,
    }
}

/// Generates `count` labeled samples from seeded independent streams, in
/// parallel but with an output independent of the worker count.
pub fn generate_dataset(
    gen: &GenerationConfig,
    sampler: &AgentSampler,
    count: usize,
    seed: u64,
    label_mode: LabelMode,
) -> Result<(Vec<Sample>, DatasetSummary), DatagenError> {
    if count == 0 {
        return Err(DatagenError::EmptyDataset);
    }
    let samples: Vec<Sample> = (0..count)
        .into_par_iter()
        .map(|i| generate_sample(gen, sampler, seed, i as u64, label_mode))
        .collect::<Result<_, _>>()?;
    let summary = summarize(&samples);
    Ok((samples, summary))
}

fn generate_sample(
    gen: &GenerationConfig,
    sampler: &AgentSampler,
    seed: u64,
    index: u64,
    label_mode: LabelMode,
) -> Result<Sample, DatagenError> {
    let env_config = gen.clone().with_seed(splitmix64(seed, 2 * index));
    let env = random_environment(&env_config)?;
    let mut agent_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed, 2 * index + 1));
    let tag = sampler.sample(&mut agent_rng);
    let agent = tag
        .to_planner(default_horizon(env.width, env.height))
        .expect("samplers produce planner agents");
    let notion = match label_mode {
        LabelMode::Auto => auto_notion(&env, &agent),
        LabelMode::PlanBased => WcdNotion::PlanBased,
        LabelMode::OptimalWorstCase => WcdNotion::OptimalWorstCase,
    };
    let y = wcd(&env, &agent, notion)?.value as f64;
    let x = encode(&env, &agent)?;
    Ok(Sample { x, agent: tag, y })
}

pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<(), DatagenError> {
    let file = std::fs::File::create(path).map_err(|e| DatagenError::Io(e.to_string()))?;
    let mut out = BufWriter::new(file);
    for s in samples {
        let record = SampleJson {
            x: s.x.data().to_vec(),
            shape: s.x.shape().to_vec(),
            agent: s.agent,
            y: s.y,
        };
        let line = serde_json::to_string(&record).map_err(|e| DatagenError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| DatagenError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, DatagenError> {
    let file = std::fs::File::open(path).map_err(|e| DatagenError::Io(e.to_string()))?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| DatagenError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleJson =
            serde_json::from_str(&line).map_err(|e| DatagenError::Io(e.to_string()))?;
        let x = Tensor::new(record.shape, record.x)
            .map_err(|e| DatagenError::Shape(e.to_string()))?;
        samples.push(Sample { x, agent: record.agent, y: record.y });
    }
    if samples.is_empty() {
        return Err(DatagenError::EmptyDataset);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate;

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
    fn encode_empty_env() {
        let env = empty_env();
        let agent = AgentModel::optimal_for(&env);
        let x = encode(&env, &agent).unwrap();
        assert_eq!(x.shape(), &[6, 6, 6]);
        let plane = 36;
        assert!(x.data()[..plane].iter().all(|&v| v == 0.0), "blocked channel empty");
        assert_eq!(x.data()[plane..2 * plane].iter().sum::<f64>(), 1.0, "one start cell");
        assert_eq!(x.data()[plane], 1.0, "start at (0, 0)");
        // Agent-parameter plane holds gamma = 1 everywhere.
        assert!(x.data()[4 * plane..5 * plane].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let config = GenerationConfig::new(6, 6, 5).with_subgoals(3);
        let env = random_environment(&config).unwrap();
        let agent = AgentModel::hyperbolic(8.0, 48);
        let x = encode(&env, &agent).unwrap();
        let back = decode_environment(&x, env.goal_reward).unwrap();
        assert_eq!(back.blocked, env.blocked);
        assert_eq!(back.start, env.start);
        assert_eq!(back.goals, env.goals);
        for (cell, reward) in &env.subgoal_rewards {
            assert!((back.subgoal_rewards[cell] - reward).abs() < 1e-9);
        }
        assert!(validate(&back).ok);
    }

    #[test]
    fn hyperbolic_param_plane() {
        let env = empty_env();
        let agent = AgentModel::hyperbolic(8.0, 48);
        let x = encode(&env, &agent).unwrap();
        let plane = 36;
        assert!(x.data()[4 * plane..5 * plane].iter().all(|&v| v == 8.0));
        assert_eq!(AgentTag::of(&agent).variant, AgentVariant::Hyperbolic);
    }

    #[test]
    fn flip_mapping() {
        let cell = Cell::new(2, 3);
        assert_eq!(
            tensor_flip_to_modification(0, cell, FlipDirection::ZeroToOne).unwrap(),
            Modification::block(cell)
        );
        assert_eq!(
            tensor_flip_to_modification(0, cell, FlipDirection::OneToZero).unwrap(),
            Modification::unblock(cell)
        );
        assert!(matches!(
            tensor_flip_to_modification(1, cell, FlipDirection::ZeroToOne),
            Err(DatagenError::NotModifiable(1))
        ));
    }

    #[test]
    fn layout_hash_is_stable() {
        // FNV-1a over the documented channel order; a change here means every
        // stored dataset and checkpoint is invalidated.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in CHANNEL_LAYOUT.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
        assert_eq!(hash, 0xe6a4_c908_b1f8_8b63, "channel layout changed");
    }

    #[test]
    fn dataset_generation_deterministic_and_audited() {
        let gen = GenerationConfig::new(6, 6, 0);
        let (samples, summary) =
            generate_dataset(&gen, &AgentSampler::optimal(), 60, 77, LabelMode::Auto).unwrap();
        assert_eq!(summary.count, 60);
        let (again, _) =
            generate_dataset(&gen, &AgentSampler::optimal(), 60, 77, LabelMode::Auto).unwrap();
        assert_eq!(samples, again);

        // Audit a subset of labels against the brute-force oracle.
        for sample in samples.iter().step_by(4) {
            let env = decode_environment(&sample.x, crate::env::DEFAULT_GOAL_REWARD).unwrap();
            let brute = crate::wcd::brute_force_wcd(&env).unwrap();
            assert_eq!(sample.y, brute.value as f64);
        }
    }

    #[test]
    fn dataset_rejects_zero_count() {
        let gen = GenerationConfig::new(6, 6, 0);
        assert!(matches!(
            generate_dataset(&gen, &AgentSampler::optimal(), 0, 0, LabelMode::Auto),
            Err(DatagenError::EmptyDataset)
        ));
    }

    #[test]
    fn dataset_file_roundtrip_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let gen = GenerationConfig::new(5, 5, 0).with_subgoals(2);
        let (samples, _) = generate_dataset(
            &gen,
            &AgentSampler::hyperbolic(8.0),
            20,
            123,
            LabelMode::Auto,
        )
        .unwrap();
        let path_a = dir.path().join("a.jsonl");
        let path_b = dir.path().join("b.jsonl");
        write_dataset(&path_a, &samples).unwrap();
        write_dataset(&path_b, &samples).unwrap();
        assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());

        let loaded = read_dataset(&path_a).unwrap();
        assert_eq!(loaded, samples);
    }
}
