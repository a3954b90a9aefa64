//! duelq — a Dueling Double-DQN trading framework over minute-bar market
//! data.
//!
//! The crate covers the full loop from raw OHLCV files to commission
//! experiments:
//!
//! - [`market_data`]: CSV ingestion, validation, and the percent-of-open
//!   relative encoding.
//! - [`env`]: a gym-style long-only trading environment with per-leg
//!   commissions and windowed observations.
//! - [`neural`]: a small f64 network core (dense + 1-D conv layers, dueling
//!   value/advantage heads, exact backprop, finite-difference gradient
//!   checking, JSON checkpoints).
//! - [`replay`]: fixed-capacity FIFO transition buffer with uniform
//!   sampling.
//! - [`agent`]: epsilon-greedy policy, linear epsilon decay, the
//!   double-DQN target, and one-step optimization.
//! - [`harness`]: the training loop, greedy evaluation, random baselines,
//!   and the architecture x batch-size x commission sweep.
//! - [`plot`]: static SVG charts for the emitted CSV artifacts.
//!
//! Every capability has a runnable demo under `examples/`:
//!
//! ```text
//! cargo run --example encode_bars        # parse + relative encoding
//! cargo run --example env_walkthrough    # scripted episode, reward accounting
//! cargo run --example dueling_heads      # value/advantage aggregation
//! cargo run --example gradient_check     # finite-difference verification
//! cargo run --example replay_sampling    # ring buffer + uniformity
//! cargo run --example train_sawtooth     # small end-to-end training run
//! cargo run --example evaluate_checkpoint
//! cargo run --example commission_sweep   # mini experiment grid
//! cargo run --example plot_svg           # chart a metrics CSV
//! ```
//!
//! The `duelq` binary wraps the same entry points behind subcommands
//! (`validate-data`, `train`, `eval`, `baseline`, `sweep`, `gradcheck`,
//! `plot`); see the README.

pub mod agent;
pub mod config;
pub mod env;
pub mod harness;
pub mod market_data;
pub mod neural;
pub mod plot;
pub mod replay;
pub mod seeds;
pub mod synth;

pub use agent::{
    ddqn_target, epsilon_at, select_action, td_loss_grads, train_step, AgentConfig, AgentError,
    EpsilonSchedule,
};
pub use config::{ConfigError, RunConfig};
pub use env::{
    observation_channels, observation_flat, Action, EnvConfig, EnvError, Observation, StepResult,
    TradingEnv,
};
pub use harness::{
    evaluate, random_baseline, sweep, train, BaselineSummary, EpisodeMetrics, EvalOptions,
    EvalReport, HarnessError, Scenario, SweepGrid, SweepOutput, SummaryRow, TrainOptions,
    TrainOutput,
};
pub use market_data::{
    encode_relative, parse_bars, split_series, volume_scale_of, write_bars, Bar, BarFormat,
    MarketDataError, PriceSeries, RelativeBar,
};
pub use neural::{
    dueling_aggregate, gradcheck, sync_target, ArchTag, Checkpoint, ConvSpec, DuelingNet,
    InputLayout, NetSpec, NeuralError, Optimizer, OptimizerConfig, OptimizerKind, Tensor,
};
pub use replay::{ReplayBuffer, ReplayError, Transition};
