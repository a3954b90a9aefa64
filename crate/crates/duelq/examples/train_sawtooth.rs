//! End-to-end training demo on a synthetic sawtooth series: train a small
//! FFDQN agent, then compare its greedy evaluation return against the
//! uniform-random baseline on a held-out slice.

use duelq::agent::{AgentConfig, EpsilonSchedule};
use duelq::env::EnvConfig;
use duelq::harness::{self, EvalOptions, Scenario, TrainOptions};
use duelq::market_data::split_series;
use duelq::neural::{ArchTag, NetSpec, OptimizerConfig, OptimizerKind};
use duelq::synth::sawtooth_series;

fn main() {
    let series = sawtooth_series(20_000, 8, 100.0, 2.0, 1000.0);
    let boundary = series.bars()[16_000].timestamp;
    let (train_series, eval_series) = split_series(&series, boundary);

    let env_cfg = EnvConfig {
        window_n: 8,
        commission_rate: 0.0,
        episode_len: 256,
        random_start: true,
        include_volume: false,
        reward_scale: 100.0,
    };
    let agent_cfg = AgentConfig {
        gamma: 0.9,
        batch_size: 32,
        sync_every: 500,
        replay_start: 2_000,
        replay_capacity: 20_000,
        schedule: EpsilonSchedule { eps_start: 1.0, eps_final: 0.05, decay_steps: 15_000 },
        optimizer: OptimizerConfig { kind: OptimizerKind::Adam, learning_rate: 1e-3 },
        huber_loss: false,
    };
    let net_spec = NetSpec { arch: ArchTag::Ffdqn, hidden: vec![64, 64], conv: vec![] };
    let opts = TrainOptions { total_steps: 30_000, seed: 7, ..TrainOptions::default() };

    println!("training ffdqn (batch 32) for {} steps...", opts.total_steps);
    let out = harness::train(&train_series, &env_cfg, &agent_cfg, &net_spec, &opts)
        .expect("training run");
    let last = out.metrics.last().expect("episodes completed");
    println!(
        "episodes: {}; last episode reward {:.2}% over {} trades (eps {:.3})",
        out.metrics.len(),
        last.cumulative_reward,
        last.trades,
        last.epsilon
    );

    let report = harness::evaluate(
        &out.checkpoint,
        &eval_series,
        &env_cfg,
        Scenario::NoCommission,
        agent_cfg.batch_size,
        &EvalOptions::default(),
    )
    .expect("evaluation");
    let baseline = harness::random_baseline(
        &eval_series,
        &{
            let mut c = env_cfg.clone();
            c.random_start = false;
            c.episode_len = eval_series.len() - c.window_n;
            c
        },
        11,
        20,
    )
    .expect("baseline");

    println!(
        "greedy eval return: {:.2}% over {} trade legs",
        report.final_return_pct, report.trades
    );
    println!(
        "random baseline:    {:.2}% +/- {:.2}% ({} episodes)",
        baseline.mean_return_pct, baseline.stddev_return_pct, baseline.episodes
    );
}
