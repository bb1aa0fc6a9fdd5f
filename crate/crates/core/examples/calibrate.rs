//! Scratch calibration runs (not part of the deliverable pipeline).

use std::time::Instant;

use grd_core::agents::AgentModel;
use grd_core::datagen::{generate_dataset, AgentSampler, LabelMode};
use grd_core::design::{
    gradient_optimize, greedy, BudgetSpec, LagrangianConfig, NetSurrogate, TrueWcdScorer,
};
use grd_core::env::{random_environment, GenerationConfig};
use grd_core::neural::{train, LossKind, Network, NetworkSpec, Target, TrainConfig};
use grd_core::wcd::WcdNotion;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "train6".into());
    match mode.as_str() {
        "train6" => train6(),
        "time13" => time13(),
        "subopt" => subopt(),
        _ => eprintln!("unknown mode"),
    }
}

fn train6() {
    let t0 = Instant::now();
    let gen = GenerationConfig::new(6, 6, 0);
    let (samples, summary) =
        generate_dataset(&gen, &AgentSampler::optimal(), 10_000, 1, LabelMode::Auto).unwrap();
    println!("gen 10k: {:?}, label mean {:.3}, hist {:?}", t0.elapsed(), summary.mean_label, summary.histogram);

    let dataset: Vec<_> = samples
        .iter()
        .map(|s| (s.x.clone(), Target::Scalar(s.y)))
        .collect();
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let batch: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let mut net = Network::init(NetworkSpec::wcd_predictor(6, 6), 7).unwrap();
    println!("params: {}", net.param_count());
    let config = TrainConfig { epochs, batch_size: batch, ..TrainConfig::default() };
    let t1 = Instant::now();
    let report = train(&mut net, &dataset, LossKind::Mse, &config).unwrap();
    println!("train 30 epochs: {:?}", t1.elapsed());
    for (i, (tr, va)) in report.train_losses.iter().zip(&report.val_losses).enumerate() {
        println!("epoch {i:2} train {tr:.4} val {va:.4}");
    }
    println!("best epoch {} val {:.4}", report.best_epoch, report.best_val_loss);
}

fn time13() {
    let t0 = Instant::now();
    let gen = GenerationConfig::new(13, 13, 0);
    let (samples, summary) =
        generate_dataset(&gen, &AgentSampler::optimal(), 2_000, 2, LabelMode::Auto).unwrap();
    println!("gen 2k@13: {:?} mean {:.2}", t0.elapsed(), summary.mean_label);
    let dataset: Vec<_> = samples
        .iter()
        .map(|s| (s.x.clone(), Target::Scalar(s.y)))
        .collect();
    let mut net = Network::init(NetworkSpec::wcd_predictor(6, 13), 7).unwrap();
    let config = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let t1 = Instant::now();
    let report = train(&mut net, &dataset, LossKind::Mse, &config).unwrap();
    println!("train 10 epochs: {:?} best val {:.3}", t1.elapsed(), report.best_val_loss);

    // Timing: greedy with true wcd (plan-based) vs gradient with surrogate.
    let mut greedy_times = Vec::new();
    let mut grad_times = Vec::new();
    let mut greedy_red = Vec::new();
    let mut grad_red = Vec::new();
    let mut grad_steps = Vec::new();
    for seed in 100..115 {
        let env = random_environment(&GenerationConfig::new(13, 13, seed)).unwrap();
        let agent = AgentModel::optimal_for(&env);
        let notion = WcdNotion::PlanBased;
        let budget = BudgetSpec::BlockingOnly { budget: 20 };

        let scorer = TrueWcdScorer { agent: &agent, notion };
        let out = greedy(&env, &agent, notion, &budget, &scorer).unwrap();
        greedy_times.push(out.wall_time.as_secs_f64());
        greedy_red.push(out.reduction());

        let surrogate = NetSurrogate { net: &net, agent: &agent };
        let config = LagrangianConfig::default();
        let out = gradient_optimize(&env, &agent, notion, &surrogate, &budget, &[0.05], &config)
            .unwrap();
        grad_times.push(out.wall_time.as_secs_f64());
        grad_red.push(out.reduction());
        grad_steps.push(out.nodes_or_steps);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "greedy-true: mean {:.3}s reductions {:?}",
        mean(&greedy_times),
        greedy_red
    );
    println!(
        "gradient:    mean {:.3}s reductions {:?} steps {:?}",
        mean(&grad_times),
        grad_red,
        grad_steps
    );
    println!("ratio: {:.2}", mean(&greedy_times) / mean(&grad_times));
}

fn subopt() {
    let t0 = Instant::now();
    let gen = GenerationConfig::new(6, 6, 0).with_subgoals(8);
    let (samples, summary) = generate_dataset(
        &gen,
        &AgentSampler::hyperbolic(8.0),
        1_000,
        3,
        LabelMode::Auto,
    )
    .unwrap();
    println!("gen 1k subopt: {:?} mean {:.2}", t0.elapsed(), summary.mean_label);
    let dataset: Vec<_> = samples
        .iter()
        .map(|s| (s.x.clone(), Target::Scalar(s.y)))
        .collect();
    let mut net = Network::init(NetworkSpec::wcd_predictor(6, 6), 7).unwrap();
    let config = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let report = train(&mut net, &dataset, LossKind::Mse, &config).unwrap();
    println!("best val {:.3}", report.best_val_loss);

    let mut greedy_times = Vec::new();
    let mut grad_times = Vec::new();
    for seed in 50..58 {
        let env =
            random_environment(&GenerationConfig::new(6, 6, seed).with_subgoals(8)).unwrap();
        let agent = AgentModel::hyperbolic(8.0, 48);
        let notion = WcdNotion::PlanBased;
        let budget = BudgetSpec::BlockingOnly { budget: 5 };
        let scorer = TrueWcdScorer { agent: &agent, notion };
        let out = greedy(&env, &agent, notion, &budget, &scorer).unwrap();
        greedy_times.push(out.wall_time.as_secs_f64());
        let surrogate = NetSurrogate { net: &net, agent: &agent };
        let config = LagrangianConfig::default();
        let out = gradient_optimize(&env, &agent, notion, &surrogate, &budget, &[0.05], &config)
            .unwrap();
        grad_times.push(out.wall_time.as_secs_f64());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("greedy-true: mean {:.3}s", mean(&greedy_times));
    println!("gradient:    mean {:.3}s", mean(&grad_times));
    println!("ratio: {:.2}", mean(&greedy_times) / mean(&grad_times));
}
