use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use twd_core::augment::{fixed_drop_dataset, twd};
use twd_core::data_io::{dataset_digest, extract_scenes, parse_records, read_dataset, write_dataset, WindowSpec};
use twd_core::harness::{
    self, fixed_k_sweep, missing_waypoint_eval, render_summary, ExperimentConfig, RunOptions, Summary,
};
use twd_core::metrics::MetricsReport;
use twd_core::predictors::{train, Checkpoint};
use twd_core::synthetic::{generate, split};
use twd_core::{
    Config, CoreError, Dataset, DropConfig, EvalSpec, Forecaster, Hyper, KObjective, Metric, Network, Predictor,
    PredictorKind, RandomSource, Result, TwdMode,
};

#[derive(Parser, Debug)]
#[command(
    name = "twd",
    version,
    about = "Temporal waypoint dropping for trajectory forecasting"
)]
struct Cli {
    /// Flat `key = value` config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    /// Evaluation worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Directory holding train.twd, val.twd and test.twd (defaults to --out).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// `learned` (reads --model), `constant_velocity` or `linear_fit`.
    #[arg(long, default_value = "learned")]
    predictor: PredictorKind,
    /// Checkpoint path (defaults to <out>/model.json).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and split it.
    Generate {
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Convert `frame agent x y` records into split dataset containers.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// eth_ucy, nba or trajnet; window.* keys override.
        #[arg(long)]
        window: Option<String>,
    },
    /// Train the learned forecaster.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        twd: Option<TwdMode>,
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Evaluate on the test split, optionally with a test-time drop.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "off")]
        twd: TwdMode,
        /// Index dropped when --twd fixed.
        #[arg(long)]
        fixed_k: Option<usize>,
        #[arg(long)]
        drops: Option<usize>,
        /// Samples per scene.
        #[arg(long = "k")]
        k: Option<usize>,
    },
    /// Missing-waypoint evaluation of the model and both baselines.
    Robustness {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Draw the dropped index per scene instead of once.
        #[arg(long)]
        per_scene: bool,
    },
    /// Fixed-drop sweep on validation, then test-time comparison.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        fixed_k_objective: Option<KObjective>,
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Render a summary.json as text tables.
    Report {
        /// Defaults to <out>/summary.json.
        summary: Option<PathBuf>,
    },
    /// Full experiment: data, training grid, evaluation, sweep.
    Run,
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn data_dir(&self, args: &DataArgs) -> PathBuf {
        args.data.clone().unwrap_or_else(|| self.out.clone())
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_config(&self.cfg)
    }

    fn eval_spec(&self) -> Result<EvalSpec> {
        Ok(self.experiment()?.eval)
    }

    fn seed(&self) -> Result<u64> {
        self.cfg.get_or("seed", 0u64)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    fn model_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join("model.json"))
    }
}

fn load_split(dir: &Path, name: &str) -> Result<Dataset> {
    let path = dir.join(format!("{name}.twd"));
    read_dataset(&path).map_err(|e| match e {
        CoreError::Io(io) => CoreError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_predictor(ctx: &Ctx, args: &ModelArgs, data: &Dataset) -> Result<Predictor> {
    match args.predictor {
        PredictorKind::ConstantVelocity => Ok(Predictor::ConstantVelocity),
        PredictorKind::LinearFit => Ok(Predictor::LinearFit),
        PredictorKind::Learned => load_learned(&ctx.model_path(&args.model), data),
    }
}

fn load_learned(path: &Path, data: &Dataset) -> Result<Predictor> {
    let ckpt = Checkpoint::load(path)?;
    if (ckpt.n, ckpt.m) != (data.n_obs(), data.m_pred()) {
        return Err(CoreError::ShapeMismatch(format!(
            "checkpoint expects n={} m={}, data has n={} m={}",
            ckpt.n,
            ckpt.m,
            data.n_obs(),
            data.m_pred()
        )));
    }
    ckpt.into_predictor()
}

fn write_splits(ctx: &Ctx, full: &Dataset) -> Result<()> {
    let exp = ctx.experiment()?;
    let (tr, va, te) = split(full, exp.split, RandomSource::new(exp.seed).fork("split").seed())?;
    for (name, ds) in [("train", &tr), ("val", &va), ("test", &te)] {
        write_dataset(&ctx.out.join(format!("{name}.twd")), ds)?;
    }
    println!(
        "wrote {} scenes (n={} m={}): train {} / val {} / test {}",
        full.len(),
        full.n_obs(),
        full.m_pred(),
        tr.len(),
        va.len(),
        te.len()
    );
    Ok(())
}

fn report_row(label: &str, r: &MetricsReport) -> String {
    let mut line = format!("{label:<24} ADE {:.3}  FDE {:.3}", r.min_ade, r.min_fde);
    for h in &r.per_horizon {
        line.push_str(&format!("  @{}s {:.3}/{:.3}", h.horizon_s, h.min_ade, h.min_fde));
    }
    line
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    if let Some(t) = cli.threads {
        cfg.set("eval.threads", t.to_string());
    }
    match &cli.command {
        Command::Generate { scenes: Some(n) } => cfg.set("gen.scene_count", n.to_string()),
        Command::Train {
            twd,
            drops,
            iterations,
            learning_rate,
            batch_size,
            ..
        } => {
            if let Some(t) = twd {
                cfg.set("twd.mode", t.as_str());
            }
            if let Some(d) = drops {
                cfg.set("twd.drops", d.to_string());
            }
            if let Some(i) = iterations {
                cfg.set("train.iterations", i.to_string());
            }
            if let Some(l) = learning_rate {
                cfg.set("train.learning_rate", l.to_string());
            }
            if let Some(b) = batch_size {
                cfg.set("train.batch_size", b.to_string());
            }
        }
        Command::Eval { k: Some(k), .. } => cfg.set("eval.K", k.to_string()),
        Command::Sweep {
            fixed_k_objective,
            metric,
            ..
        } => {
            if let Some(o) = fixed_k_objective {
                cfg.set("twd.fixed_k_objective", o.to_string());
            }
            if let Some(m) = metric {
                cfg.set("twd.fixed_k_metric", m.to_string());
            }
        }
        _ => {}
    }
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    if !matches!(cli.command, Command::Report { .. } | Command::Run) {
        ctx.write("config.effective", &ctx.cfg.render())?;
    }

    match cli.command {
        Command::Generate { .. } => {
            let exp = ctx.experiment()?;
            let gen = match exp.source {
                harness::DataSource::Synthetic(g) => g,
                harness::DataSource::Records { .. } => {
                    return Err(CoreError::Config("generate needs data.source = synthetic".into()))
                }
            };
            ctx.progress(&format!("generating {} scenes", gen.scene_count));
            write_splits(&ctx, &generate(&gen)?)
        }
        Command::Ingest { input, window } => {
            let base = match window.as_deref() {
                None | Some("eth_ucy") => WindowSpec::ETH_UCY,
                Some("nba") => WindowSpec::NBA,
                Some("trajnet") => WindowSpec::TRAJNET,
                Some(other) => return Err(CoreError::Config(format!("unknown window preset `{other}`"))),
            };
            let spec = WindowSpec {
                n_obs: ctx.cfg.get_or("window.n_obs", base.n_obs)?,
                m_pred: ctx.cfg.get_or("window.m_pred", base.m_pred)?,
                stride: ctx.cfg.get_or("window.stride", base.stride)?,
                frame_interval: ctx.cfg.get_or("window.frame_interval", base.frame_interval)?,
            };
            ctx.progress(&format!("reading {}", input.display()));
            let records = parse_records(&std::fs::read_to_string(&input)?)?;
            write_splits(&ctx, &extract_scenes(&records, &spec)?)
        }
        Command::Train { data, .. } => {
            let dir = ctx.data_dir(&data);
            let train_set = load_split(&dir, "train")?;
            let val_set = load_split(&dir, "val").ok();
            let exp = ctx.experiment()?;
            let n = train_set.n_obs();
            let modes: Vec<TwdMode> = ctx.cfg.get_list("twd.mode", vec![TwdMode::Stochastic])?;
            let mode = if modes.len() == 1 {
                modes[0]
            } else {
                TwdMode::Stochastic
            };
            let drop = DropConfig::new(exp.drops[0]);
            drop.check(n)?;
            let tcfg = twd_core::TrainConfig {
                twd_mode: mode,
                drop,
                ..exp.train.clone()
            };
            let hyper = Hyper::new(n, train_set.m_pred(), exp.hidden, exp.heads)?;
            let init = Network::init(hyper, &mut RandomSource::new(exp.seed).fork("init"))?;
            ctx.progress(&format!(
                "training {} iterations, twd {} (D={}), {} scenes",
                tcfg.iterations,
                mode.as_str(),
                drop.drops,
                train_set.len()
            ));
            let trace = train(init, &train_set, val_set.as_ref(), &tcfg)?;
            ctx.write("trace.csv", &trace.to_csv())?;
            let predictor = Predictor::Learned(trace.network.clone());
            Checkpoint::from_predictor(&predictor, n, train_set.m_pred(), tcfg.seed)
                .save(&ctx.out.join("model.json"))?;
            println!(
                "loss {:.5} -> {:.5}{}",
                trace.losses[0],
                trace.losses.last().copied().unwrap_or(f64::NAN),
                trace
                    .validation_loss
                    .map(|v| format!(", validation {v:.5}"))
                    .unwrap_or_default()
            );
            Ok(())
        }
        Command::Eval {
            data,
            model,
            twd: mode,
            fixed_k,
            drops,
            ..
        } => {
            let test = load_split(&ctx.data_dir(&data), "test")?;
            let predictor = load_predictor(&ctx, &model, &test)?;
            let spec = ctx.eval_spec()?;
            let input = match mode {
                TwdMode::Off => test,
                TwdMode::Fixed => {
                    let k = fixed_k.ok_or_else(|| CoreError::Config("--twd fixed needs --fixed-k".into()))?;
                    fixed_drop_dataset(&test, k)?
                }
                TwdMode::Stochastic => {
                    let cfg = DropConfig::new(drops.unwrap_or(1));
                    let root = RandomSource::new(ctx.seed()?).fork("eval-stochastic");
                    let mut i = 0u64;
                    test.map_scenes(|s| {
                        let mut src = root.fork_indexed("scene", i);
                        i += 1;
                        Ok(twd(s, &mut src, cfg)?.0)
                    })?
                }
            };
            ctx.progress(&format!(
                "evaluating {} on {} scenes",
                model.predictor.as_str(),
                input.len()
            ));
            let report = harness::evaluate(&predictor as &dyn Forecaster, &input, &spec)?;
            let summary = json!({
                "predictor": model.predictor.as_str(),
                "test_time_twd": mode.as_str(),
                "fixed_k": fixed_k,
                "config_hash": ctx.cfg.digest(),
                "input_digest": dataset_digest(&input),
                "report": report,
            });
            ctx.write("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
            ctx.write("metrics.csv", &report.to_csv())?;
            println!("{}", report_row(model.predictor.as_str(), &report));
            Ok(())
        }
        Command::Robustness { data, model, per_scene } => {
            let test = load_split(&ctx.data_dir(&data), "test")?;
            let spec = ctx.eval_spec()?;
            let path = ctx.model_path(&model);
            let learned = if model.is_some() || path.exists() {
                Some(load_learned(&path, &test)?)
            } else {
                None
            };
            let mut preds: Vec<(&str, &dyn Forecaster)> = vec![
                ("constant_velocity", &Predictor::ConstantVelocity),
                ("linear_fit", &Predictor::LinearFit),
            ];
            if let Some(p) = &learned {
                preds.push(("learned", p));
            }
            ctx.progress("evaluating with a missing waypoint");
            let result = missing_waypoint_eval(&preds, &test, &spec, ctx.seed()?, per_scene)?;
            ctx.write("robustness.json", &(serde_json::to_string_pretty(&result)? + "\n"))?;
            match result.k {
                Some(k) => println!("dropped k={k} from every test scene"),
                None => println!("dropped index drawn per scene"),
            }
            for r in &result.reports {
                println!("{}", report_row(&r.label, &r.report));
            }
            Ok(())
        }
        Command::Sweep { data, model, .. } => {
            let dir = ctx.data_dir(&data);
            let val = load_split(&dir, "val")?;
            let test = load_split(&dir, "test")?;
            let predictor = load_predictor(&ctx, &model, &val)?;
            let exp = ctx.experiment()?;
            ctx.progress(&format!("sweeping k = 1..={}", val.n_obs()));
            let result = fixed_k_sweep(
                &predictor,
                &val,
                &test,
                &exp.eval,
                exp.fixed_k_metric,
                exp.fixed_k_objective,
                exp.seed,
            )?;
            ctx.write("sweep.csv", &result.to_csv())?;
            ctx.write("sweep.json", &(serde_json::to_string_pretty(&result)? + "\n"))?;
            for row in &result.table {
                println!("k={:<3} ADE {:.3}  FDE {:.3}", row.k, row.ade, row.fde);
            }
            println!("chosen k = {}", result.chosen_k);
            println!("{}", report_row("test, no drop", &result.test_no_drop));
            println!("{}", report_row("test, S_d", &result.test_stochastic));
            println!(
                "{}",
                report_row(&format!("test, F_d k={}", result.chosen_k), &result.test_fixed)
            );
            Ok(())
        }
        Command::Report { summary } => {
            let path = summary.unwrap_or_else(|| ctx.out.join("summary.json"));
            let text = std::fs::read_to_string(&path)?;
            match Summary::from_json(&text) {
                Ok(s) => print!("{}", render_summary(&s)),
                Err(_) => {
                    let value: serde_json::Value = serde_json::from_str(&text)?;
                    let report: MetricsReport = serde_json::from_value(value["report"].clone())?;
                    let label = value["predictor"].as_str().unwrap_or("model");
                    println!("{}", report_row(label, &report));
                }
            }
            Ok(())
        }
        Command::Run => {
            let summary = harness::run_experiment(&ctx.cfg, &ctx.out, RunOptions { quiet: ctx.quiet })?;
            print!("{}", render_summary(&summary));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
