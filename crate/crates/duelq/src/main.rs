//! Thin command-line front end over the duelq library.
//!
//! Exit codes: 0 success, 1 validation failure (bad data, bad config, a
//! failed check), 2 runtime error.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use duelq::harness::{self, EvalOptions, Scenario, SweepGrid, TrainOptions};
use duelq::market_data::{parse_bars, split_series, BarFormat, PriceSeries};
use duelq::neural::{
    gradcheck, ArchTag, Checkpoint, ConvSpec, DuelingNet, InputLayout, NetSpec, Tensor,
    WeightedSumLoss,
};
use duelq::seeds::stream_rng;
use duelq::RunConfig;

#[derive(Parser)]
#[command(name = "duelq", version, about = "Dueling Double-DQN trading framework")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Ffdqn,
    Cnn,
}

impl From<ArchArg> for ArchTag {
    fn from(a: ArchArg) -> ArchTag {
        match a {
            ArchArg::Ffdqn => ArchTag::Ffdqn,
            ArchArg::Cnn => ArchTag::Cnn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    WithCommission,
    NoCommission,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::WithCommission => Scenario::WithCommission,
            ScenarioArg::NoCommission => Scenario::NoCommission,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a bar CSV and report the first invariant violation, if any.
    ValidateData { csv: PathBuf },
    /// Train an agent per the config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on the held-out split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
    },
    /// Run the uniform-random baseline on the held-out split.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate the full architecture x batch-size grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Cells trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, value_enum, default_value = "ffdqn")]
        arch: ArchArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a metrics or curve CSV as an SVG chart.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    /// Bad input from the user: malformed data, invalid config, failed check.
    Validation(String),
    /// Everything else.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(msg) => eprintln!("error: {msg}"),
                CliError::Runtime(msg) => eprintln!("error: {msg}"),
            }
            e.code()
        }
    }
}

fn load_series(config: &RunConfig) -> Result<(PriceSeries, PriceSeries), CliError> {
    let file = File::open(&config.data.path).map_err(runtime)?;
    let bars = parse_bars(file, &config.data.format).map_err(validation)?;
    let source = config
        .data
        .path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    let series = PriceSeries::from_bars(bars, source).map_err(validation)?;
    if series.is_empty() {
        return Err(CliError::Validation("data file contains no bars".into()));
    }
    let boundary = config.data.split_boundary.unwrap_or_else(|| {
        let idx = (series.len() as f64 * 0.8) as usize;
        series.bars()[idx.min(series.len() - 1)].timestamp
    });
    Ok(split_series(&series, boundary))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::ValidateData { csv } => {
            let file = File::open(&csv).map_err(validation)?;
            let bars = parse_bars(file, &BarFormat::default()).map_err(validation)?;
            println!("{}: {} bars, all invariants hold", csv.display(), bars.len());
            Ok(())
        }
        Command::Train { config, seed } => {
            let config = RunConfig::load(&config).map_err(validation)?;
            let (train_series, eval_series) = load_series(&config)?;
            let opts = TrainOptions {
                total_steps: config.run.total_steps,
                seed: seed.unwrap_or(config.run.seed),
                checkpoint_every: config.run.checkpoint_every,
                eval_every: config.run.eval_every,
                log_every: config.run.log_every,
                out_dir: Some(config.run.out_dir.clone()),
                eval_series: Some(&eval_series),
                eval_max_bars: 0,
            };
            let out = harness::train(&train_series, &config.env, &config.agent, &config.net, &opts)
                .map_err(runtime)?;
            println!(
                "trained {} steps over {} episodes; artifacts in {}",
                config.run.total_steps,
                out.metrics.len(),
                config.run.out_dir.display()
            );
            Ok(())
        }
        Command::Eval { checkpoint, config, scenario } => {
            let config = RunConfig::load(&config).map_err(validation)?;
            let (_, eval_series) = load_series(&config)?;
            if eval_series.len() <= config.env.window_n {
                return Err(CliError::Validation(
                    "held-out split is too short to evaluate".into(),
                ));
            }
            let ckpt = Checkpoint::load(&checkpoint).map_err(validation)?;
            let scenario: Scenario = scenario.into();
            let report = harness::evaluate(
                &ckpt,
                &eval_series,
                &config.env,
                scenario,
                config.agent.batch_size,
                &EvalOptions::default(),
            )
            .map_err(runtime)?;
            std::fs::create_dir_all(&config.run.out_dir).map_err(runtime)?;
            let base = config.run.out_dir.join(format!("eval-{scenario}"));
            report
                .save(&base.with_extension("json"))
                .map_err(runtime)?;
            harness::write_curve_csv(
                &base.with_file_name(format!("eval-{scenario}-curve.csv")),
                &report.cumulative_reward_curve,
            )
            .map_err(runtime)?;
            println!(
                "{scenario}: return {:.4}% over {} trade legs (random baseline {:.4}%)",
                report.final_return_pct, report.trades, report.baseline_random_return_pct
            );
            Ok(())
        }
        Command::Baseline { config, episodes, seed } => {
            let config = RunConfig::load(&config).map_err(validation)?;
            let (_, eval_series) = load_series(&config)?;
            let mut env_cfg = config.env.clone();
            env_cfg.random_start = false;
            env_cfg.episode_len = eval_series.len().saturating_sub(env_cfg.window_n).max(1);
            let summary = harness::random_baseline(
                &eval_series,
                &env_cfg,
                seed.unwrap_or(config.run.seed),
                episodes,
            )
            .map_err(runtime)?;
            println!(
                "random baseline over {} episodes: {:.4}% +/- {:.4}%",
                summary.episodes, summary.mean_return_pct, summary.stddev_return_pct
            );
            Ok(())
        }
        Command::Sweep { config, jobs, seed } => {
            let config = RunConfig::load(&config).map_err(validation)?;
            let (train_series, eval_series) = load_series(&config)?;
            let opts = TrainOptions {
                total_steps: config.run.total_steps,
                seed: seed.unwrap_or(config.run.seed),
                checkpoint_every: config.run.checkpoint_every,
                eval_every: config.run.eval_every,
                log_every: config.run.log_every,
                out_dir: Some(config.run.out_dir.clone()),
                eval_series: Some(&eval_series),
                eval_max_bars: 0,
            };
            let grid = SweepGrid::default();
            let out = harness::sweep(
                &train_series,
                &eval_series,
                &config.env,
                &config.agent,
                &config.net,
                &opts,
                &grid,
                jobs,
            )
            .map_err(runtime)?;
            println!("arch,batch_size,return_no_commission_pct,return_with_commission_pct");
            for row in &out.summary {
                println!(
                    "{},{},{},{}",
                    row.arch,
                    row.batch_size,
                    row.return_no_commission_pct.map(|v| format!("{v:.4}")).unwrap_or_default(),
                    row.return_with_commission_pct.map(|v| format!("{v:.4}")).unwrap_or_default(),
                );
            }
            println!("artifacts in {}", config.run.out_dir.display());
            Ok(())
        }
        Command::Gradcheck { arch, seed } => {
            let arch: ArchTag = arch.into();
            let spec = match arch {
                ArchTag::Ffdqn => NetSpec { arch, hidden: vec![16, 16], conv: vec![] },
                ArchTag::Cnn => NetSpec {
                    arch,
                    hidden: vec![12],
                    conv: vec![ConvSpec { out_ch: 6, kernel: 3, stride: 1 }],
                },
            };
            let layout = InputLayout { channels: 3, window: 8, extras: 2 };
            let mut rng = stream_rng(seed, "gradcheck-init");
            let net = DuelingNet::build(&spec, layout, &mut rng).map_err(runtime)?;
            use rand::Rng;
            let mut input_rng = stream_rng(seed, "gradcheck-input");
            let input = Tensor::new(
                [2, net.input_dim()],
                (0..2 * net.input_dim()).map(|_| input_rng.gen_range(-1.0..1.0)).collect(),
            )
            .map_err(runtime)?;
            let mut loss_rng = stream_rng(seed, "gradcheck-loss");
            let loss = WeightedSumLoss {
                weights: Tensor::new(
                    [2, 3],
                    (0..6).map(|_| loss_rng.gen_range(-1.0..1.0)).collect(),
                )
                .map_err(runtime)?,
            };
            let err = gradcheck(&net, &input, &loss, 1e-5).map_err(runtime)?;
            println!("{err:e}");
            if err < 1e-4 {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "gradient check failed: max relative error {err:e} >= 1e-4"
                )))
            }
        }
        Command::Plot { metrics, out } => {
            let svg = duelq::plot::render_chart(&metrics).map_err(validation)?;
            std::fs::write(&out, svg).map_err(runtime)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
