//! Experiment orchestration: train with and without dropping, evaluate on
//! clean and corrupted test data, sweep fixed drops, and compare with RD%.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{fixed_drop_dataset, select_fixed_k_with, twd_single, DropConfig, KObjective, KScore};
use crate::config::Config;
use crate::data_io::{dataset_digest, extract_scenes, parse_records, WindowSpec};
use crate::error::{CoreError, Result};
use crate::metrics::{dataset_metrics, rd_percent, EvalSpec, Metric, MetricsReport, MinMode};
use crate::predictors::{
    train, Checkpoint, Forecaster, Hyper, Network, OptimizerConfig, Predictor, TrainConfig, TwdMode,
};
use crate::rng::RandomSource;
use crate::synthetic::{generate, split, GenConfig, MotionMix};
use crate::types::Dataset;

/// Clean-data evaluation.
pub fn evaluate(predictor: &dyn Forecaster, dataset: &Dataset, spec: &EvalSpec) -> Result<MetricsReport> {
    dataset_metrics(predictor, dataset, spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub label: String,
    /// SHA-256 of the exact input container this predictor was evaluated on.
    pub input_digest: String,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingWaypointResult {
    /// The shared dropped index, or `None` when drawn per scene.
    pub k: Option<usize>,
    pub per_scene: bool,
    pub reports: Vec<LabeledReport>,
}

/// Corrupts the test set once by dropping a random timestamp (front-padded)
/// and evaluates every predictor on that identical set.
pub fn missing_waypoint_eval(
    predictors: &[(&str, &dyn Forecaster)],
    dataset: &Dataset,
    spec: &EvalSpec,
    seed: u64,
    per_scene: bool,
) -> Result<MissingWaypointResult> {
    let root = RandomSource::new(seed).fork("missing-waypoint");
    let n = dataset.n_obs();
    let (k, corrupted) = if per_scene {
        let mut i = 0u64;
        let ds = dataset.map_scenes(|s| {
            let k = root.fork_indexed("scene", i).uniform_index(n)?;
            i += 1;
            crate::augment::apply_fixed_drop(s, k)
        })?;
        (None, ds)
    } else {
        let k = root.fork("k").uniform_index(n)?;
        (Some(k), fixed_drop_dataset(dataset, k)?)
    };
    let mut reports = Vec::with_capacity(predictors.len());
    for (label, p) in predictors {
        reports.push(LabeledReport {
            label: label.to_string(),
            input_digest: dataset_digest(&corrupted),
            report: dataset_metrics(*p, &corrupted, spec)?,
        });
    }
    Ok(MissingWaypointResult { k, per_scene, reports })
}

/// Validation sweep over fixed drops plus the three test-time variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: Metric,
    pub objective: KObjective,
    pub table: Vec<KScore>,
    pub chosen_k: usize,
    pub test_no_drop: MetricsReport,
    pub test_stochastic: MetricsReport,
    pub test_fixed: MetricsReport,
}

impl SweepResult {
    /// `k,ade,fde` with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,ade,fde\n");
        for row in &self.table {
            out.push_str(&format!("{},{},{}\n", row.k, row.ade, row.fde));
        }
        out
    }
}

pub fn fixed_k_sweep(
    predictor: &dyn Forecaster,
    validation: &Dataset,
    test: &Dataset,
    spec: &EvalSpec,
    metric: Metric,
    objective: KObjective,
    seed: u64,
) -> Result<SweepResult> {
    if validation.n_obs() < 2 {
        return Err(CoreError::invalid("sweep needs n >= 2"));
    }
    let selection = select_fixed_k_with(predictor, validation, metric, spec, objective)?;
    let test_fixed = dataset_metrics(predictor, &fixed_drop_dataset(test, selection.k)?, spec)?;
    let root = RandomSource::new(seed).fork("sweep-stochastic");
    let mut i = 0u64;
    let stochastic = test.map_scenes(|s| {
        let mut src = root.fork_indexed("scene", i);
        i += 1;
        Ok(twd_single(s, &mut src, DropConfig::single())?.0)
    })?;
    Ok(SweepResult {
        metric,
        objective,
        table: selection.scores,
        chosen_k: selection.k,
        test_no_drop: dataset_metrics(predictor, test, spec)?,
        test_stochastic: dataset_metrics(predictor, &stochastic, spec)?,
        test_fixed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdRow {
    /// `None` for the full horizon.
    pub horizon_s: Option<f64>,
    pub baseline_ade: f64,
    pub ours_ade: f64,
    pub ade_rd: f64,
    pub baseline_fde: f64,
    pub ours_fde: f64,
    pub fde_rd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdTable {
    pub baseline: String,
    pub ours: String,
    pub rows: Vec<RdRow>,
}

/// RD% per metric for the full horizon and every shared horizon.
pub fn compare(baseline: &MetricsReport, ours: &MetricsReport) -> Result<RdTable> {
    compare_labeled("baseline", baseline, "ours", ours)
}

pub fn compare_labeled(
    baseline_label: &str,
    baseline: &MetricsReport,
    ours_label: &str,
    ours: &MetricsReport,
) -> Result<RdTable> {
    let hb: Vec<u64> = baseline.per_horizon.iter().map(|h| h.horizon_s.to_bits()).collect();
    let ho: Vec<u64> = ours.per_horizon.iter().map(|h| h.horizon_s.to_bits()).collect();
    if hb != ho {
        return Err(CoreError::shape("reports cover different horizons"));
    }
    let row = |h: Option<f64>, ba: f64, oa: f64, bf: f64, of: f64| -> Result<RdRow> {
        Ok(RdRow {
            horizon_s: h,
            baseline_ade: ba,
            ours_ade: oa,
            ade_rd: rd_percent(ba, oa)?,
            baseline_fde: bf,
            ours_fde: of,
            fde_rd: rd_percent(bf, of)?,
        })
    };
    let mut rows = vec![row(
        None,
        baseline.min_ade,
        ours.min_ade,
        baseline.min_fde,
        ours.min_fde,
    )?];
    for (b, o) in baseline.per_horizon.iter().zip(&ours.per_horizon) {
        rows.push(row(Some(b.horizon_s), b.min_ade, o.min_ade, b.min_fde, o.min_fde)?);
    }
    Ok(RdTable {
        baseline: baseline_label.to_string(),
        ours: ours_label.to_string(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(GenConfig),
    Records { path: PathBuf, window: WindowSpec },
}

/// Everything a full run needs, read from a flat config.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub source: DataSource,
    pub split: (f64, f64, f64),
    pub hidden: usize,
    pub heads: usize,
    pub train: TrainConfig,
    pub twd_modes: Vec<TwdMode>,
    pub drops: Vec<usize>,
    pub fixed_k_metric: Metric,
    pub fixed_k_objective: KObjective,
    pub eval: EvalSpec,
    pub missing_per_scene: bool,
}

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let seed = cfg.get_or("seed", 0u64)?;
        let root = RandomSource::new(seed);
        let window = WindowSpec {
            n_obs: cfg.get_or("window.n_obs", 8usize)?,
            m_pred: cfg.get_or("window.m_pred", 12usize)?,
            stride: cfg.get_or("window.stride", 1usize)?,
            frame_interval: cfg.get_or("window.frame_interval", 0.4f64)?,
        };
        window.check()?;
        let source = match cfg.raw("data.source").unwrap_or("synthetic") {
            "synthetic" => DataSource::Synthetic(gen_config(cfg, &window, root.fork("generate").seed())?),
            path => DataSource::Records {
                path: PathBuf::from(path),
                window,
            },
        };
        let optimizer = match cfg.raw("train.optimizer").unwrap_or("adam") {
            "adam" => OptimizerConfig::Adam {
                beta1: cfg.get_or("train.beta1", 0.9)?,
                beta2: cfg.get_or("train.beta2", 0.999)?,
                eps: cfg.get_or("train.eps", 1e-8)?,
            },
            "sgd" => OptimizerConfig::Sgd,
            other => return Err(CoreError::Config(format!("unknown optimizer `{other}`"))),
        };
        let drops: Vec<usize> = cfg.get_list("twd.drops", vec![1])?;
        let twd_modes: Vec<TwdMode> = cfg.get_list("twd.mode", vec![TwdMode::Off, TwdMode::Stochastic])?;
        if twd_modes.is_empty() || drops.is_empty() {
            return Err(CoreError::Config("twd.mode and twd.drops must be nonempty".into()));
        }
        if twd_modes.contains(&TwdMode::Fixed) {
            return Err(CoreError::Config(
                "twd.mode fixed is a test-time setting; training grid takes off and stochastic".into(),
            ));
        }
        let train = TrainConfig {
            iterations: cfg.get_or("train.iterations", 2000usize)?,
            batch_size: cfg.get_or("train.batch_size", 32usize)?,
            learning_rate: cfg.get_or("train.learning_rate", 1e-3)?,
            twd_mode: TwdMode::Off,
            drop: DropConfig::new(drops[0]),
            seed: root.fork("train").seed(),
            optimizer,
        };
        let eval = EvalSpec {
            k: cfg.get_or("eval.K", 20usize)?,
            horizons: cfg.get_list("eval.horizons", vec![])?,
            min_mode: cfg.get_or("eval.min_mode", MinMode::PerScene)?,
            threads: cfg.get_or("eval.threads", 1usize)?.max(1),
        };
        Ok(ExperimentConfig {
            seed,
            source,
            split: (
                cfg.get_or("split.train", 0.8)?,
                cfg.get_or("split.val", 0.1)?,
                cfg.get_or("split.test", 0.1)?,
            ),
            hidden: cfg.get_or("train.hidden", 64usize)?,
            heads: cfg.get_or("train.heads", 20usize)?,
            train,
            twd_modes,
            drops,
            fixed_k_metric: cfg.get_or("twd.fixed_k_metric", Metric::Ade)?,
            fixed_k_objective: cfg.get_or("twd.fixed_k_objective", KObjective::MinError)?,
            eval,
            missing_per_scene: cfg.get_or("eval.per_scene", false)?,
        })
    }

    pub fn window(&self) -> (usize, usize) {
        match &self.source {
            DataSource::Synthetic(g) => (g.n_obs, g.m_pred),
            DataSource::Records { window, .. } => (window.n_obs, window.m_pred),
        }
    }

    /// The training grid: one variant without dropping and one per drop count.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for mode in &self.twd_modes {
            match mode {
                TwdMode::Off => out.push(Variant {
                    label: "w/o TWD".into(),
                    slug: "wo-twd".into(),
                    mode: TwdMode::Off,
                    drops: 0,
                }),
                _ => {
                    for &d in &self.drops {
                        let (label, slug) = if self.drops.len() == 1 {
                            ("w/ TWD".to_string(), "w-twd".to_string())
                        } else {
                            (format!("w/ TWD (D={d})"), format!("w-twd-d{d}"))
                        };
                        out.push(Variant {
                            label,
                            slug,
                            mode: TwdMode::Stochastic,
                            drops: d,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Reads `gen.*` keys for the synthetic source.
pub fn gen_config(cfg: &Config, window: &WindowSpec, seed: u64) -> Result<GenConfig> {
    let d = GenConfig::default();
    let mix = MotionMix {
        linear: cfg.get_or("gen.motion.linear", d.motion_mix.linear)?,
        turning: cfg.get_or("gen.motion.turning", d.motion_mix.turning)?,
        stop_and_go: cfg.get_or("gen.motion.stop_and_go", d.motion_mix.stop_and_go)?,
    };
    Ok(GenConfig {
        scene_count: cfg.get_or("gen.scene_count", 500usize)?,
        agents_min: cfg.get_or("gen.agents_min", d.agents_min)?,
        agents_max: cfg.get_or("gen.agents_max", d.agents_max)?,
        n_obs: window.n_obs,
        m_pred: window.m_pred,
        frame_interval: window.frame_interval,
        motion_mix: mix,
        noise_sigma: cfg.get_or("gen.noise_sigma", d.noise_sigma)?,
        speed_min: cfg.get_or("gen.speed_min", d.speed_min)?,
        speed_max: cfg.get_or("gen.speed_max", d.speed_max)?,
        corrupt_step: cfg.get_opt("gen.corrupt_step")?,
        corrupt_sigma: cfg.get_or("gen.corrupt_sigma", d.corrupt_sigma)?,
        seed: cfg.get_or("gen.seed", seed)?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub slug: String,
    pub mode: TwdMode,
    pub drops: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub validation_loss: Option<f64>,
    pub clean: MetricsReport,
    pub missing: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub label: String,
    pub clean: MetricsReport,
    pub missing: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub environment: String,
    pub table: RdTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub variant: String,
    pub result: SweepResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub n_obs: usize,
    pub m_pred: usize,
    pub train_scenes: usize,
    pub validation_scenes: usize,
    pub test_scenes: usize,
    pub variants: Vec<VariantSummary>,
    pub baselines: Vec<BaselineSummary>,
    pub missing_k: Option<usize>,
    pub missing_per_scene: bool,
    pub missing_input_digest: String,
    pub comparisons: Vec<Comparison>,
    pub sweep: Option<SweepSummary>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn variant(&self, label: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant.label == label)
    }
}

/// Loads and splits the experiment data.
pub fn load_splits(exp: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let full = match &exp.source {
        DataSource::Synthetic(g) => generate(g)?,
        DataSource::Records { path, window } => {
            extract_scenes(&parse_records(&std::fs::read_to_string(path)?)?, window)?
        }
    };
    split(&full, exp.split, RandomSource::new(exp.seed).fork("split").seed())
}

/// Options that affect progress reporting only, never outputs.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub quiet: bool,
}

fn note(opts: &RunOptions, msg: &str) {
    if !opts.quiet {
        eprintln!("{msg}");
    }
}

/// Runs the full grid and writes every artifact into `out_dir`.
pub fn run_experiment(cfg: &Config, out_dir: &Path, opts: RunOptions) -> Result<Summary> {
    let exp = ExperimentConfig::from_config(cfg).map_err(|e| e.in_stage("config"))?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.effective"), cfg.render())?;

    note(&opts, "loading data");
    let (train_set, val_set, test_set) = load_splits(&exp).map_err(|e| e.in_stage("data"))?;
    let (n, m) = (train_set.n_obs(), train_set.m_pred());
    let root = RandomSource::new(exp.seed);
    let hyper = Hyper::new(n, m, exp.hidden, exp.heads).map_err(|e| e.in_stage("train"))?;
    let initial = Network::init(hyper, &mut root.fork("init")).map_err(|e| e.in_stage("train"))?;

    let mut trained: Vec<(Variant, Predictor, f64, f64, Option<f64>)> = Vec::new();
    for variant in exp.variants() {
        note(&opts, &format!("training {}", variant.label));
        let tcfg = TrainConfig {
            twd_mode: variant.mode,
            drop: DropConfig::new(variant.drops.max(1)),
            ..exp.train.clone()
        };
        let trace = train(initial.clone(), &train_set, Some(&val_set), &tcfg).map_err(|e| e.in_stage("train"))?;
        std::fs::write(out_dir.join(format!("trace-{}.csv", variant.slug)), trace.to_csv())?;
        let predictor = Predictor::Learned(trace.network.clone());
        Checkpoint::from_predictor(&predictor, n, m, tcfg.seed)
            .save(&out_dir.join(format!("model-{}.json", variant.slug)))?;
        let first = trace.losses[0];
        let last = *trace.losses.last().expect("iterations >= 1");
        trained.push((variant, predictor, first, last, trace.validation_loss));
    }

    note(&opts, "evaluating");
    let baselines = [
        ("constant_velocity", Predictor::ConstantVelocity),
        ("linear_fit", Predictor::LinearFit),
    ];
    let mut labeled: Vec<(&str, &dyn Forecaster)> = baselines.iter().map(|(l, p)| (*l, p as &dyn Forecaster)).collect();
    for (v, p, ..) in &trained {
        labeled.push((v.label.as_str(), p as &dyn Forecaster));
    }
    let missing = missing_waypoint_eval(&labeled, &test_set, &exp.eval, exp.seed, exp.missing_per_scene)
        .map_err(|e| e.in_stage("robustness"))?;
    let clean: Vec<MetricsReport> = labeled
        .iter()
        .map(|(_, p)| evaluate(*p, &test_set, &exp.eval))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("eval"))?;

    let baseline_summaries = baselines
        .iter()
        .enumerate()
        .map(|(i, (label, _))| BaselineSummary {
            label: label.to_string(),
            clean: clean[i].clone(),
            missing: missing.reports[i].report.clone(),
        })
        .collect();
    let offset = baselines.len();
    let variants: Vec<VariantSummary> = trained
        .iter()
        .enumerate()
        .map(|(i, (v, _, first, last, val))| VariantSummary {
            variant: v.clone(),
            initial_loss: *first,
            final_loss: *last,
            validation_loss: *val,
            clean: clean[offset + i].clone(),
            missing: missing.reports[offset + i].report.clone(),
        })
        .collect();

    let mut comparisons = Vec::new();
    if let Some(base) = variants.iter().find(|v| v.variant.mode == TwdMode::Off) {
        for ours in variants.iter().filter(|v| v.variant.mode != TwdMode::Off) {
            for (env, b, o) in [
                ("clean", &base.clean, &ours.clean),
                ("missing waypoints", &base.missing, &ours.missing),
            ] {
                comparisons.push(Comparison {
                    environment: env.to_string(),
                    table: compare_labeled(&base.variant.label, b, &ours.variant.label, o)
                        .map_err(|e| e.in_stage("report"))?,
                });
            }
        }
    }

    let sweep_target = trained
        .iter()
        .find(|(v, ..)| v.mode == TwdMode::Stochastic)
        .or(trained.first());
    let sweep = match sweep_target {
        Some((v, p, ..)) => {
            note(&opts, &format!("sweeping fixed drops for {}", v.label));
            let result = fixed_k_sweep(
                p,
                &val_set,
                &test_set,
                &exp.eval,
                exp.fixed_k_metric,
                exp.fixed_k_objective,
                exp.seed,
            )
            .map_err(|e| e.in_stage("sweep"))?;
            std::fs::write(out_dir.join("sweep.csv"), result.to_csv())?;
            std::fs::write(
                out_dir.join("trace.csv"),
                std::fs::read_to_string(out_dir.join(format!("trace-{}.csv", v.slug)))?,
            )?;
            Some(SweepSummary {
                variant: v.label.clone(),
                result,
            })
        }
        None => None,
    };

    let summary = Summary {
        config_hash: cfg.digest(),
        seed: exp.seed,
        n_obs: n,
        m_pred: m,
        train_scenes: train_set.len(),
        validation_scenes: val_set.len(),
        test_scenes: test_set.len(),
        variants,
        baselines: baseline_summaries,
        missing_k: missing.k,
        missing_per_scene: missing.per_scene,
        missing_input_digest: missing.reports[0].input_digest.clone(),
        comparisons,
        sweep,
    };
    std::fs::write(out_dir.join("summary.json"), summary.to_json()?)?;
    Ok(summary)
}

fn metric_cells(r: &MetricsReport) -> Vec<String> {
    let mut cells = vec![format!("{:.3}", r.min_ade), format!("{:.3}", r.min_fde)];
    for h in &r.per_horizon {
        cells.push(format!("{:.3}/{:.3}", h.min_ade, h.min_fde));
    }
    cells
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in &rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(c.len());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths.get(i).copied().unwrap_or(0)))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn rd_cells(t: &RdTable) -> Vec<String> {
    let mut cells = Vec::new();
    for (i, r) in t.rows.iter().enumerate() {
        let tag = if i == 0 {
            String::new()
        } else {
            format!("@{}s ", r.horizon_s.unwrap_or_default())
        };
        cells.push(format!("{tag}{:.1}/{:.1}", r.ade_rd, r.fde_rd));
    }
    cells
}

/// Human-readable rendering of a summary, one table per environment.
pub fn render_summary(s: &Summary) -> String {
    let horizons: Vec<String> = s
        .variants
        .first()
        .map(|v| {
            v.clean
                .per_horizon
                .iter()
                .map(|h| format!("{}s", h.horizon_s))
                .collect()
        })
        .unwrap_or_default();
    let header = |first: &str| {
        let mut h = vec![first.to_string(), "ADE".into(), "FDE".into()];
        h.extend(horizons.iter().map(|x| format!("ADE/FDE {x}")));
        h
    };

    let mut out = format!(
        "seed {}  n={} m={}  scenes train/val/test {}/{}/{}\n\n",
        s.seed, s.n_obs, s.m_pred, s.train_scenes, s.validation_scenes, s.test_scenes
    );
    type Pick<T> = fn(&T) -> &MetricsReport;
    let envs: [(&str, Pick<BaselineSummary>, Pick<VariantSummary>); 2] = [
        ("clean", |b| &b.clean, |v| &v.clean),
        ("missing waypoints", |b| &b.missing, |v| &v.missing),
    ];
    for (env, base_get, var_get) in envs {
        let title = if env == "clean" {
            "Clean test set".to_string()
        } else {
            match s.missing_k {
                Some(k) => format!("Missing waypoints (k={k} dropped from every test scene)"),
                None => "Missing waypoints (k drawn per scene)".to_string(),
            }
        };
        out.push_str(&title);
        out.push('\n');
        let mut rows = Vec::new();
        for b in &s.baselines {
            let mut r = vec![b.label.clone()];
            r.extend(metric_cells(base_get(b)));
            rows.push(r);
        }
        for v in &s.variants {
            let mut r = vec![v.variant.label.clone()];
            r.extend(metric_cells(var_get(v)));
            rows.push(r);
        }
        for c in s.comparisons.iter().filter(|c| c.environment == env) {
            let mut r = vec![format!("RD(%) {} vs {}", c.table.ours, c.table.baseline)];
            r.extend(rd_cells(&c.table));
            rows.push(r);
        }
        out.push_str(&table(header("model"), rows));
        out.push('\n');
    }

    if let Some(sw) = &s.sweep {
        let r = &sw.result;
        out.push_str(&format!(
            "Fixed-drop sweep on validation ({}, metric {}, objective {}): chosen k = {}\n",
            sw.variant, r.metric, r.objective, r.chosen_k
        ));
        let rows = r
            .table
            .iter()
            .map(|row| vec![row.k.to_string(), format!("{:.3}", row.ade), format!("{:.3}", row.fde)])
            .collect();
        out.push_str(&table(vec!["k".into(), "ADE".into(), "FDE".into()], rows));
        out.push('\n');
        let mut rows = Vec::new();
        for (label, rep) in [
            ("no drop".to_string(), &r.test_no_drop),
            ("S_d".to_string(), &r.test_stochastic),
            (format!("F_d (k={})", r.chosen_k), &r.test_fixed),
        ] {
            let mut row = vec![label];
            row.extend(metric_cells(rep));
            rows.push(row);
        }
        out.push_str(&table(header("test-time drop"), rows));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HorizonMetrics;

    fn report(ade: f64, fde: f64) -> MetricsReport {
        MetricsReport {
            min_ade: ade,
            min_fde: fde,
            per_horizon: vec![],
            k: 1,
            scene_count: 1,
        }
    }

    fn round1(v: f64) -> f64 {
        (v * 10.0).round() / 10.0
    }

    #[test]
    fn compare_matches_reference_pairs() {
        let t = compare(&report(0.13, 0.24), &report(0.11, 0.19)).unwrap();
        assert_eq!((round1(t.rows[0].ade_rd), round1(t.rows[0].fde_rd)), (16.7, 23.3));
        let t = compare(&report(0.173, 0.269), &report(0.114, 0.192)).unwrap();
        assert_eq!(round1(t.rows[0].ade_rd), 41.1);
    }

    #[test]
    fn identical_reports_have_zero_rd() {
        let mut r = report(0.5, 0.9);
        r.per_horizon.push(HorizonMetrics {
            horizon_s: 2.0,
            steps: 5,
            min_ade: 0.2,
            min_fde: 0.4,
        });
        let t = compare(&r, &r).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|row| row.ade_rd == 0.0 && row.fde_rd == 0.0));
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let mut a = report(0.5, 0.9);
        a.per_horizon.push(HorizonMetrics {
            horizon_s: 2.0,
            steps: 5,
            min_ade: 0.2,
            min_fde: 0.4,
        });
        assert!(compare(&a, &report(0.5, 0.9)).is_err());
    }

    #[test]
    fn grid_labels() {
        let mut cfg = Config::parse("twd.mode = off, stochastic\ntwd.drops = 1, 2\n").unwrap();
        let exp = ExperimentConfig::from_config(&cfg).unwrap();
        let labels: Vec<String> = exp.variants().into_iter().map(|v| v.label).collect();
        assert_eq!(labels, ["w/o TWD", "w/ TWD (D=1)", "w/ TWD (D=2)"]);
        cfg.set("twd.drops", "1");
        let exp = ExperimentConfig::from_config(&cfg).unwrap();
        let labels: Vec<String> = exp.variants().into_iter().map(|v| v.label).collect();
        assert_eq!(labels, ["w/o TWD", "w/ TWD"]);
        cfg.set("twd.mode", "fixed");
        assert!(ExperimentConfig::from_config(&cfg).is_err());
    }
}
