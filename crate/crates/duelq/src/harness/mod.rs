//! Training, evaluation, baselines, and the commission experiment grid.
//!
//! One master seed drives everything through named RNG streams (`env`,
//! `agent`, `buffer`, `net-init`, `baseline`), so a (seed, config, data)
//! triple fully determines every emitted artifact.

pub mod artifacts;

pub use artifacts::{read_curve_csv, read_metrics_csv, write_curve_csv, write_metrics_csv,
    write_summary_csv};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{select_action, train_step, AgentConfig, AgentError};
use crate::env::{EnvConfig, EnvError, TradingEnv};
use crate::market_data::{MarketDataError, PriceSeries};
use crate::neural::{
    sync_target, ArchTag, Checkpoint, DuelingNet, InputLayout, NetSpec, NeuralError, Optimizer,
};
use crate::replay::{ReplayBuffer, Transition};
use crate::seeds::{stream_rng, stream_seed};

use artifacts::{CsvSink, METRICS_HEADER, STEP_LOG_HEADER, TRAIN_EVAL_HEADER};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config invalid at {field}: {problem}")]
    ConfigInvalid { field: String, problem: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Market(#[from] MarketDataError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-episode reward accounting and trade statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode_index: u64,
    /// Global step count when the episode finished.
    pub global_step: u64,
    /// Sum of step rewards (percent units at the default reward scale).
    pub cumulative_reward: f64,
    /// Trade legs (each open and each close counts one).
    pub trades: u64,
    pub steps: u64,
    /// Epsilon at episode end.
    pub epsilon: f64,
    /// Mean optimization loss over the episode's train steps (0 before
    /// training starts).
    pub mean_loss: f64,
}

/// Commission treatment during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    WithCommission,
    NoCommission,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::WithCommission => write!(f, "with_commission"),
            Scenario::NoCommission => write!(f, "no_commission"),
        }
    }
}

/// Result of one greedy evaluation pass over a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub scenario: Scenario,
    pub arch_tag: ArchTag,
    /// Training batch size, recorded for reporting.
    pub batch_size: usize,
    /// Running sum of step rewards, one point per step (1-based).
    pub cumulative_reward_curve: Vec<(u64, f64)>,
    pub final_return_pct: f64,
    /// Trade legs during the pass.
    pub trades: u64,
    pub baseline_random_return_pct: f64,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("report serializes"))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Mean and spread of the uniform-random policy's returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub mean_return_pct: f64,
    pub stddev_return_pct: f64,
    pub episodes: usize,
}

/// Run-level knobs for [`train`].
#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    pub total_steps: u64,
    pub seed: u64,
    /// Write a checkpoint every N steps (0 = final only).
    pub checkpoint_every: u64,
    /// Evaluate greedily on `eval_series` every N steps (0 = off).
    pub eval_every: u64,
    /// Append a (step, epsilon, loss) row every N train steps (0 = off).
    pub log_every: u64,
    /// Where artifacts (metrics.csv, checkpoints, eval curves) go; nothing
    /// is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Held-out series for mid-training evaluation.
    pub eval_series: Option<&'a PriceSeries>,
    /// Truncate the mid-training eval slice to this many bars (0 = all).
    pub eval_max_bars: usize,
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpisodeMetrics>,
}

fn layout_for(env_cfg: &EnvConfig) -> InputLayout {
    InputLayout {
        channels: env_cfg.channels(),
        window: env_cfg.window_n,
        extras: 2,
    }
}

fn validate_configs(env_cfg: &EnvConfig, agent_cfg: &AgentConfig, net_spec: &NetSpec)
    -> Result<(), HarnessError>
{
    env_cfg.validate().map_err(|problem| HarnessError::ConfigInvalid {
        field: "env".into(),
        problem,
    })?;
    agent_cfg.validate().map_err(|problem| HarnessError::ConfigInvalid {
        field: "agent".into(),
        problem,
    })?;
    net_spec.validate().map_err(|problem| HarnessError::ConfigInvalid {
        field: "net".into(),
        problem,
    })?;
    Ok(())
}

/// Runs the training loop: reset, epsilon-greedy action, environment step,
/// replay push, optimization once the buffer is warm, hard target sync every
/// `sync_every` steps. One metrics row per completed episode; the final
/// checkpoint is always returned and, with an output directory, written to
/// `checkpoint_final.json`.
pub fn train(
    series: &PriceSeries,
    env_cfg: &EnvConfig,
    agent_cfg: &AgentConfig,
    net_spec: &NetSpec,
    opts: &TrainOptions,
) -> Result<TrainOutput, HarnessError> {
    validate_configs(env_cfg, agent_cfg, net_spec)?;

    let mut init_rng = stream_rng(opts.seed, "net-init");
    let mut online = DuelingNet::build(net_spec, layout_for(env_cfg), &mut init_rng)?;
    let mut target = online.clone();
    let mut buffer = ReplayBuffer::new(agent_cfg.replay_capacity);
    let mut optimizer = Optimizer::new(agent_cfg.optimizer, online.param_count());

    let mut env_rng = stream_rng(opts.seed, "env");
    let mut action_rng = stream_rng(opts.seed, "agent");
    let mut buffer_rng = stream_rng(opts.seed, "buffer");

    let mut env = TradingEnv::new(series, env_cfg.clone());
    let warmup = agent_cfg.batch_size.max(agent_cfg.replay_start);

    let mut metrics_sink = None;
    let mut step_sink = None;
    let mut eval_sink = None;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        metrics_sink = Some(CsvSink::create(&dir.join("metrics.csv"), METRICS_HEADER)?);
        if opts.log_every > 0 {
            step_sink = Some(CsvSink::create(&dir.join("train_steps.csv"), STEP_LOG_HEADER)?);
        }
        if opts.eval_every > 0 && opts.eval_series.is_some() {
            eval_sink = Some(CsvSink::create(&dir.join("train_eval.csv"), TRAIN_EVAL_HEADER)?);
        }
    }
    let eval_slice = opts.eval_series.map(|s| {
        if opts.eval_max_bars > 0 {
            s.truncated(opts.eval_max_bars)
        } else {
            s.clone()
        }
    });

    let mut metrics = Vec::new();
    let mut global_step: u64 = 0;
    let mut episode_index: u64 = 0;

    'run: while global_step < opts.total_steps {
        let mut obs = env.reset(&mut env_rng)?;
        let mut ep_reward = 0.0;
        let mut ep_trades = 0u64;
        let mut ep_steps = 0u64;
        let mut loss_sum = 0.0;
        let mut loss_count = 0u64;
        let mut done = false;

        while !done {
            let epsilon = agent_cfg.schedule.epsilon_at(global_step);
            let action = select_action(&online, &obs, epsilon, &mut action_rng)?;
            let sr = env.step(action)?;
            buffer.push(Transition {
                state: obs,
                action,
                reward: sr.reward,
                next_state: sr.observation.clone(),
                done: sr.done,
            });
            obs = sr.observation;
            ep_reward += sr.reward;
            ep_trades += sr.info.trade_opened as u64 + sr.info.trade_closed as u64;
            ep_steps += 1;
            done = sr.done;

            if buffer.len() >= warmup {
                let loss = train_step(
                    &mut online,
                    &target,
                    &buffer,
                    agent_cfg,
                    &mut optimizer,
                    &mut buffer_rng,
                )?;
                loss_sum += loss;
                loss_count += 1;
                if let Some(sink) = &mut step_sink {
                    if (global_step + 1) % opts.log_every == 0 {
                        sink.row(format_args!("{},{epsilon},{loss}", global_step + 1))?;
                    }
                }
            }

            global_step += 1;
            if global_step % agent_cfg.sync_every == 0 {
                sync_target(&online, &mut target)?;
            }
            if opts.checkpoint_every > 0 && global_step % opts.checkpoint_every == 0 {
                if let Some(dir) = &opts.out_dir {
                    Checkpoint::from_net(&online, opts.seed, global_step)
                        .save(&dir.join(format!("checkpoint_{global_step}.json")))?;
                }
            }
            if opts.eval_every > 0 && global_step % opts.eval_every == 0 {
                if let (Some(slice), Some(sink)) = (&eval_slice, &mut eval_sink) {
                    let (ret, _, _) =
                        greedy_pass(&online, slice, env_cfg, env_cfg.commission_rate)?;
                    sink.row(format_args!("{global_step},{ret}"))?;
                }
            }
            if global_step >= opts.total_steps {
                if done {
                    break;
                }
                // Unfinished episode: not recorded.
                break 'run;
            }
        }

        let m = EpisodeMetrics {
            episode_index,
            global_step,
            cumulative_reward: ep_reward,
            trades: ep_trades,
            steps: ep_steps,
            epsilon: agent_cfg.schedule.epsilon_at(global_step),
            mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
        };
        if let Some(sink) = &mut metrics_sink {
            sink.row(format_args!("{}", artifacts::metrics_row(&m)))?;
        }
        metrics.push(m);
        episode_index += 1;
    }

    if let Some(sink) = &mut metrics_sink {
        sink.flush()?;
    }
    if let Some(sink) = &mut step_sink {
        sink.flush()?;
    }
    if let Some(sink) = &mut eval_sink {
        sink.flush()?;
    }

    let checkpoint = Checkpoint::from_net(&online, opts.seed, global_step);
    if let Some(dir) = &opts.out_dir {
        checkpoint.save(&dir.join("checkpoint_final.json"))?;
    }
    Ok(TrainOutput { checkpoint, metrics })
}

/// One greedy (epsilon = 0) pass over the whole series from its start.
/// Returns (final return, trade legs, cumulative curve).
fn greedy_pass(
    net: &DuelingNet,
    series: &PriceSeries,
    env_cfg: &EnvConfig,
    commission_rate: f64,
) -> Result<(f64, u64, Vec<(u64, f64)>), HarnessError> {
    let mut cfg = env_cfg.clone();
    cfg.random_start = false;
    cfg.commission_rate = commission_rate;
    cfg.episode_len = series.len().saturating_sub(cfg.window_n).max(1);
    let mut env = TradingEnv::new(series, cfg);
    // Unused at epsilon = 0; present only to satisfy the sampling interface.
    let mut rng = stream_rng(0, "greedy");
    let mut obs = env.reset(&mut rng)?;
    let mut total = 0.0;
    let mut legs = 0u64;
    let mut curve = Vec::new();
    let mut step = 0u64;
    loop {
        let action = select_action(net, &obs, 0.0, &mut rng)?;
        let sr = env.step(action)?;
        obs = sr.observation;
        total += sr.reward;
        legs += sr.info.trade_opened as u64 + sr.info.trade_closed as u64;
        step += 1;
        curve.push((step, total));
        if sr.done {
            break;
        }
    }
    Ok((total, legs, curve))
}

/// Extra knobs for [`evaluate`]; the embedded random baseline is seeded
/// deterministically so evaluation is idempotent.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub baseline_episodes: usize,
    pub baseline_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { baseline_episodes: 20, baseline_seed: 0 }
    }
}

/// Deterministic greedy evaluation of a checkpoint over a series.
/// The commission rate is the environment's under
/// [`Scenario::WithCommission`] and zero under [`Scenario::NoCommission`].
pub fn evaluate(
    checkpoint: &Checkpoint,
    series: &PriceSeries,
    env_cfg: &EnvConfig,
    scenario: Scenario,
    batch_size: usize,
    opts: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    checkpoint.validate_layout(layout_for(env_cfg))?;
    let net = checkpoint.to_net()?;
    evaluate_net(&net, series, env_cfg, scenario, batch_size, opts)
}

/// [`evaluate`] over an in-memory network.
pub fn evaluate_net(
    net: &DuelingNet,
    series: &PriceSeries,
    env_cfg: &EnvConfig,
    scenario: Scenario,
    batch_size: usize,
    opts: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    let commission = match scenario {
        Scenario::WithCommission => env_cfg.commission_rate,
        Scenario::NoCommission => 0.0,
    };
    let (final_return, trades, curve) = greedy_pass(net, series, env_cfg, commission)?;

    let mut baseline_cfg = env_cfg.clone();
    baseline_cfg.random_start = false;
    baseline_cfg.commission_rate = commission;
    baseline_cfg.episode_len = series.len().saturating_sub(env_cfg.window_n).max(1);
    let baseline = random_baseline(
        series,
        &baseline_cfg,
        opts.baseline_seed,
        opts.baseline_episodes,
    )?;

    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        scenario,
        arch_tag: net.arch(),
        batch_size,
        cumulative_reward_curve: curve,
        final_return_pct: final_return,
        trades,
        baseline_random_return_pct: baseline.mean_return_pct,
    })
}

/// Runs the uniform-random policy for `episodes` episodes and summarizes the
/// final returns (sample standard deviation).
pub fn random_baseline(
    series: &PriceSeries,
    env_cfg: &EnvConfig,
    seed: u64,
    episodes: usize,
) -> Result<BaselineSummary, HarnessError> {
    assert!(episodes >= 1, "need at least one baseline episode");
    let mut env_rng = stream_rng(seed, "baseline-env");
    let mut action_rng = stream_rng(seed, "baseline");
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut env = TradingEnv::new(series, env_cfg.clone());
        env.reset(&mut env_rng)?;
        let mut total = 0.0;
        loop {
            use rand::Rng;
            let action = crate::env::Action::from_index(action_rng.gen_range(0..3)).unwrap();
            let sr = env.step(action)?;
            total += sr.reward;
            if sr.done {
                break;
            }
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let stddev = if returns.len() > 1 {
        (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / (returns.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(BaselineSummary {
        mean_return_pct: mean,
        stddev_return_pct: stddev,
        episodes,
    })
}

/// The experiment grid: architectures x batch sizes, each evaluated under
/// the listed scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub archs: Vec<ArchTag>,
    pub batch_sizes: Vec<usize>,
    pub scenarios: Vec<Scenario>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            archs: vec![ArchTag::Ffdqn, ArchTag::Cnn],
            batch_sizes: vec![32, 128],
            scenarios: vec![Scenario::NoCommission, Scenario::WithCommission],
        }
    }
}

/// One line of the sweep summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub arch: ArchTag,
    pub batch_size: usize,
    pub return_no_commission_pct: Option<f64>,
    pub return_with_commission_pct: Option<f64>,
}

pub struct SweepOutput {
    pub reports: Vec<EvalReport>,
    pub summary: Vec<SummaryRow>,
}

/// Trains one agent per (arch, batch) cell and evaluates it under every
/// scenario in the grid. Cells run `jobs` at a time; each derives its own
/// seed from the master seed and the cell name, so the outcome does not
/// depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    train_series: &PriceSeries,
    eval_series: &PriceSeries,
    env_cfg: &EnvConfig,
    agent_cfg: &AgentConfig,
    net_spec: &NetSpec,
    opts: &TrainOptions,
    grid: &SweepGrid,
    jobs: usize,
) -> Result<SweepOutput, HarnessError> {
    let jobs = jobs.max(1);
    let cells: Vec<(ArchTag, usize)> = grid
        .archs
        .iter()
        .flat_map(|&a| grid.batch_sizes.iter().map(move |&b| (a, b)))
        .collect();

    let run_cell = |&(arch, batch): &(ArchTag, usize)| -> Result<Vec<EvalReport>, HarnessError> {
        let mut cell_agent = agent_cfg.clone();
        cell_agent.batch_size = batch;
        let mut cell_net = net_spec.clone();
        cell_net.arch = arch;
        let cell_name = format!("{arch}-b{batch}");
        let cell_opts = TrainOptions {
            total_steps: opts.total_steps,
            seed: stream_seed(opts.seed, &cell_name),
            checkpoint_every: opts.checkpoint_every,
            eval_every: opts.eval_every,
            log_every: opts.log_every,
            out_dir: opts.out_dir.as_ref().map(|d| d.join(format!("train-{cell_name}"))),
            eval_series: opts.eval_series,
            eval_max_bars: opts.eval_max_bars,
        };
        let trained = train(train_series, env_cfg, &cell_agent, &cell_net, &cell_opts)?;
        let mut reports = Vec::new();
        for &scenario in &grid.scenarios {
            let report = evaluate(
                &trained.checkpoint,
                eval_series,
                env_cfg,
                scenario,
                batch,
                &EvalOptions::default(),
            )?;
            if let Some(dir) = &opts.out_dir {
                report.save(&dir.join(format!("eval-{cell_name}-{scenario}.json")))?;
                artifacts::write_curve_csv(
                    &dir.join(format!("eval-{cell_name}-{scenario}-curve.csv")),
                    &report.cumulative_reward_curve,
                )?;
            }
            reports.push(report);
        }
        Ok(reports)
    };

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut per_cell: Vec<Option<Vec<EvalReport>>> = (0..cells.len()).map(|_| None).collect();
    if jobs == 1 {
        for (i, cell) in cells.iter().enumerate() {
            per_cell[i] = Some(run_cell(cell)?);
        }
    } else {
        let mut next = 0;
        for chunk in cells.chunks(jobs) {
            let results: Vec<Result<Vec<EvalReport>, HarnessError>> = std::thread::scope(|s| {
                let handles: Vec<_> =
                    chunk.iter().map(|cell| s.spawn(|| run_cell(cell))).collect();
                handles.into_iter().map(|h| h.join().expect("cell thread")).collect()
            });
            for r in results {
                per_cell[next] = Some(r?);
                next += 1;
            }
        }
    }

    let mut reports = Vec::new();
    let mut summary = Vec::new();
    for (i, (arch, batch)) in cells.iter().enumerate() {
        let cell_reports = per_cell[i].take().expect("cell finished");
        let mut row = SummaryRow {
            arch: *arch,
            batch_size: *batch,
            return_no_commission_pct: None,
            return_with_commission_pct: None,
        };
        for r in &cell_reports {
            match r.scenario {
                Scenario::NoCommission => row.return_no_commission_pct = Some(r.final_return_pct),
                Scenario::WithCommission => {
                    row.return_with_commission_pct = Some(r.final_return_pct)
                }
            }
        }
        summary.push(row);
        reports.extend(cell_reports);
    }
    if let Some(dir) = &opts.out_dir {
        artifacts::write_summary_csv(&dir.join("summary.csv"), &summary)?;
    }
    Ok(SweepOutput { reports, summary })
}
