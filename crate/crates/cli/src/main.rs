//! `lobpred` command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use lobpred_core::book_engine::replay_validate;
use lobpred_core::features::{self, FeatureSet};
use lobpred_core::metrics::{evaluate, TABLE_HEADER};
use lobpred_core::models::grid::{kfold_grid_search, SelectionMetric};
use lobpred_core::models::persist::ModelFile;
use lobpred_core::models::sweep::{smoothing_sweep, SweepOptions, SweepRow};
use lobpred_core::models::{train_test_split, ModelSpec};
use lobpred_core::resampling::{noise_dataset, smote_resample, LabeledDataset};
use lobpred_core::runner::{
    self, build_dataset, feature_battery, label_series, prepare_series, report_csv, write_outputs, ExperimentConfig,
    ResampleMethod,
};
use lobpred_core::synth::{generate, write_lobster_pair, SynthConfig};
use lobpred_core::Label;

#[derive(Parser)]
#[command(name = "lobpred", version, about = "Limit order book price-direction experiments")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated LOBSTER message/orderbook pair.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Replay events through the book engine and compare with the snapshots.
    ValidateReplay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-row labels (`NA` where undefined).
    Label {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a feature matrix.
    Features {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        feat: FeatureArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a labeled dataset after binarizing, SMOTE, or noise replacement.
    Resample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        /// binarize | smote | noise (uniform features with the same shape and class mix)
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model on the training split and save it; with `--grid`, run a
    /// K-fold grid search first and fit the selected setting.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Grid such as `n_estimators=50|100,min_samples_leaf=1|5`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// accuracy | f1w | f1mic
        #[arg(long, default_value = "f1mic")]
        metric: String,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score a saved model on the test split (or every row with `--all`).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        all: bool,
    },
    /// Train and evaluate across smoothing windows and sensitivities.
    SweepSmoothing {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated windows.
        #[arg(long = "S", default_value = "5,10,20")]
        windows: String,
        /// Comma list or `start:stop:step`.
        #[arg(long, default_value = "0.5:2.5:0.5")]
        alpha: String,
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment from a config file and flags.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several experiments: one per config file, or one per feature set
    /// of `--features` on top of a base config.
    Battery {
        /// Experiment config files.
        #[arg(long = "configs", num_args = 1..)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        label: LabelArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Data source and run-wide settings. Every flag maps to a config key and
/// overrides the config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    messages: Option<PathBuf>,
    #[arg(long)]
    book: Option<PathBuf>,
    /// Book depth (default 10).
    #[arg(long)]
    depth: Option<usize>,
    /// strict | warn | off
    #[arg(long)]
    validate: Option<String>,
    /// Use N simulated rows instead of files.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    /// Row count to sample, or `all`.
    #[arg(long)]
    sample: Option<String>,
    /// head | contiguous | uniform
    #[arg(long)]
    sample_policy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` config assignments, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Clone, Default)]
struct LabelArgs {
    /// raw | smoothed
    #[arg(long = "label", visible_alias = "mode")]
    mode: Option<String>,
    /// Smoothing window.
    #[arg(long = "S", visible_alias = "window")]
    window: Option<usize>,
    /// Smoothing sensitivity.
    #[arg(long)]
    alpha: Option<f64>,
    /// add | mul
    #[arg(long)]
    threshold: Option<String>,
}

#[derive(Args, Clone, Default)]
struct FeatureArgs {
    /// Feature sets separated by `;`, e.g. `LOB-10;IMB-1` or `Order-Time+LOB-10`.
    #[arg(long)]
    features: Option<String>,
    /// Arrival-rate window in seconds for sets without `@`.
    #[arg(long)]
    arrival_window: Option<f64>,
    #[arg(long)]
    one_hot_type: bool,
    #[arg(long)]
    imbalance_validity: bool,
}

#[derive(Args, Clone, Default)]
struct SplitArgs {
    /// chronological | shuffled
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// basepred | gnb | rf
    #[arg(long)]
    model: Option<String>,
    /// `k=v,...` model parameters.
    #[arg(long)]
    params: Option<String>,
    /// none | binarize | smote
    #[arg(long)]
    resample: Option<String>,
    #[command(flatten)]
    split: SplitArgs,
}

fn assign(cfg: &mut ExperimentConfig, key: &str, value: Option<String>) -> Result<()> {
    if let Some(v) = value {
        cfg.set(key, &v).with_context(|| format!("--{key}"))?;
    }
    Ok(())
}

struct ConfigBuilder<'a> {
    common: &'a Common,
    label: Option<&'a LabelArgs>,
    feat: Option<&'a FeatureArgs>,
    model: Option<&'a ModelArgs>,
    split: Option<&'a SplitArgs>,
}

impl ConfigBuilder<'_> {
    fn build(&self, file: Option<&Path>) -> Result<ExperimentConfig> {
        let c = self.common;
        let mut cfg = match file.or(c.config.as_deref()) {
            Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if c.messages.is_some() || c.book.is_some() {
            assign(&mut cfg, "data.source", Some("lobster".into()))?;
        }
        assign(&mut cfg, "data.messages", c.messages.as_ref().map(|p| p.display().to_string()))?;
        assign(&mut cfg, "data.book", c.book.as_ref().map(|p| p.display().to_string()))?;
        if let Some(n) = c.synthetic {
            assign(&mut cfg, "data.source", Some("synthetic".into()))?;
            assign(&mut cfg, "data.rows", Some(n.to_string()))?;
        }
        assign(&mut cfg, "depth", c.depth.map(|d| d.to_string()))?;
        assign(&mut cfg, "validate", c.validate.clone())?;
        assign(&mut cfg, "sample.size", c.sample.clone())?;
        assign(&mut cfg, "sample.policy", c.sample_policy.clone())?;
        assign(&mut cfg, "seed", c.seed.map(|s| s.to_string()))?;
        if let Some(l) = self.label {
            assign(&mut cfg, "label.mode", l.mode.clone())?;
            assign(&mut cfg, "label.S", l.window.map(|s| s.to_string()))?;
            assign(&mut cfg, "label.alpha", l.alpha.map(|a| a.to_string()))?;
            assign(&mut cfg, "label.threshold", l.threshold.clone())?;
        }
        if let Some(f) = self.feat {
            if let Some(list) = &f.features {
                cfg.feature_sets = list
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| FeatureSet::parse(s, f.arrival_window))
                    .collect::<lobpred_core::Result<_>>()?;
            }
            cfg.one_hot_type |= f.one_hot_type;
            cfg.imbalance_validity |= f.imbalance_validity;
        }
        let split = self.split.or(self.model.map(|m| &m.split));
        if let Some(m) = self.model {
            assign(&mut cfg, "model", m.model.clone())?;
            assign(&mut cfg, "model.params", m.params.clone())?;
            assign(&mut cfg, "resample", m.resample.clone())?;
        }
        if let Some(s) = split {
            assign(&mut cfg, "split", s.split.clone())?;
            assign(&mut cfg, "split.train_fraction", s.train_fraction.map(|f| f.to_string()))?;
        }
        cfg.apply_overrides(c.set.iter().map(String::as_str))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn builder(common: &Common) -> ConfigBuilder<'_> {
    ConfigBuilder {
        common,
        label: None,
        feat: None,
        model: None,
        split: None,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn single_feature_set(cfg: &ExperimentConfig) -> Result<&FeatureSet> {
    match cfg.feature_sets.as_slice() {
        [one] => Ok(one),
        _ => bail!("this command takes exactly one feature set (join sets with `+` to combine them)"),
    }
}

fn write_dataset(d: &LabeledDataset, out: &mut dyn Write) -> Result<()> {
    write!(out, "source_row,label")?;
    for c in &d.columns {
        write!(out, ",{c}")?;
    }
    writeln!(out)?;
    for (i, row) in d.x.rows().into_iter().enumerate() {
        match d.source_rows[i] {
            Some(r) => write!(out, "{r}")?,
            None => write!(out, "NA")?,
        }
        write!(out, ",{}", d.y[i])?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_alphas(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if let [start, stop, step] = parts.as_slice() {
        let (start, stop, step): (f64, f64, f64) = (start.parse()?, stop.parse()?, step.parse()?);
        if step <= 0.0 {
            bail!("alpha step must be positive");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // multiply rather than accumulate so 0.5:2.5:0.5 gives exact decimals
        return Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    s.split(',').map(|a| Ok(a.trim().parse()?)).collect()
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli.command) {
        let broken_pipe = e
            .chain()
            .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe));
        if broken_pipe {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { rows, seed, depth, out } => {
            std::fs::create_dir_all(&out)?;
            let series = generate(&SynthConfig {
                rows,
                seed,
                depth,
                ..SynthConfig::default()
            });
            let (m, b) = write_lobster_pair(&series, &out)?;
            println!("{}\n{}", m.display(), b.display());
        }
        Command::ValidateReplay { common, out } => {
            let cfg = builder(&common).build(None)?;
            let series = prepare_series(&cfg)?;
            let report = replay_validate(&series);
            let mut w = output(out.as_deref())?;
            writeln!(w, "{report}")?;
        }
        Command::Label { common, label, out } => {
            let cfg = ConfigBuilder {
                label: Some(&label),
                ..builder(&common)
            }
            .build(None)?;
            let series = prepare_series(&cfg)?;
            let mids = series.mid_quotes()?;
            let labels = label_series(&cfg, &series)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "row,time,mid,label")?;
            for (i, l) in labels.aligned().enumerate() {
                let l = l.map_or("NA".to_string(), |l| l.to_string());
                writeln!(w, "{i},{},{},{l}", series.events[i].time, mids[i])?;
            }
            let c = labels.counts();
            eprintln!(
                "labels: 0={} +1={} -1={} (delta_p_min {})",
                c[Label::Flat.index()],
                c[Label::Up.index()],
                c[Label::Down.index()],
                labels.delta_p_min.map_or("n/a".to_string(), |d| d.to_string())
            );
        }
        Command::Features { common, feat, out } => {
            let cfg = ConfigBuilder {
                feat: Some(&feat),
                ..builder(&common)
            }
            .build(None)?;
            let series = prepare_series(&cfg)?;
            let m = features::build(&series, single_feature_set(&cfg)?, cfg.feature_options())?;
            m.write_csv(output(out.as_deref())?)?;
        }
        Command::Resample {
            common,
            label,
            feat,
            method,
            k,
            out,
        } => {
            let mut cfg = ConfigBuilder {
                label: Some(&label),
                feat: Some(&feat),
                ..builder(&common)
            }
            .build(None)?;
            let noise = method == "noise";
            cfg.resample = match method.as_str() {
                "binarize" => ResampleMethod::Binarize,
                "smote" => ResampleMethod::Smote { k },
                "noise" => ResampleMethod::None,
                other => bail!("unknown method `{other}` (binarize | smote | noise)"),
            };
            let series = prepare_series(&cfg)?;
            let labels = label_series(&cfg, &series)?;
            let mut d = build_dataset(&cfg, &series, &labels, single_feature_set(&cfg)?)?;
            if let ResampleMethod::Smote { k } = cfg.resample {
                d = smote_resample(&d, k, cfg.seed)?;
            }
            if noise {
                let c = d.class_counts();
                let freqs: Vec<(Label, f64)> =
                    (0..3).map(|i| (Label::from_index(i), c[i] as f64 / d.len() as f64)).collect();
                d = noise_dataset(d.len(), d.columns.len(), &freqs, cfg.seed)?;
            }
            let c = d.class_counts();
            eprintln!("rows: {} (0={} +1={} -1={})", d.len(), c[1], c[2], c[0]);
            write_dataset(&d, &mut *output(out.as_deref())?)?;
        }
        Command::Train {
            common,
            label,
            feat,
            model,
            grid,
            folds,
            metric,
            model_out,
        } => {
            let cfg = ConfigBuilder {
                label: Some(&label),
                feat: Some(&feat),
                model: Some(&model),
                ..builder(&common)
            }
            .build(None)?;
            let series = prepare_series(&cfg)?;
            let labels = label_series(&cfg, &series)?;
            let d = build_dataset(&cfg, &series, &labels, single_feature_set(&cfg)?)?;
            let (train_idx, _) = train_test_split(d.len(), cfg.train_fraction, cfg.split, cfg.seed)?;
            let mut train = d.subset(&train_idx);
            if let ResampleMethod::Smote { k } = cfg.resample {
                train = smote_resample(&train, k, cfg.seed)?;
            }
            let spec = match grid {
                Some(g) => {
                    let specs = ModelSpec::parse_grid(cfg.model.kind(), &g)?;
                    let metric: SelectionMetric = metric.parse()?;
                    let result = kfold_grid_search(&train, &specs, folds, metric, cfg.seed)?;
                    println!("spec,mean_{metric},fold_scores");
                    for s in &result.scores {
                        let folds: Vec<String> = s.fold_scores.iter().map(|f| format!("{f:.2}")).collect();
                        println!("\"{}\",{:.2},{}", s.spec, s.mean, folds.join(" "));
                    }
                    println!("selected: {}", result.best().spec);
                    result.best().spec.clone()
                }
                None => cfg.model.clone(),
            };
            let fitted = spec.fit(train.x.view(), &train.y, cfg.seed)?;
            ModelFile::new(fitted, d.columns.clone()).save(&model_out)?;
            info!("wrote {}", model_out.display());
        }
        Command::Evaluate {
            common,
            label,
            feat,
            split,
            model_file,
            all,
        } => {
            let cfg = ConfigBuilder {
                label: Some(&label),
                feat: Some(&feat),
                split: Some(&split),
                ..builder(&common)
            }
            .build(None)?;
            let file = ModelFile::load(&model_file)?;
            let series = prepare_series(&cfg)?;
            let labels = label_series(&cfg, &series)?;
            let d = build_dataset(&cfg, &series, &labels, single_feature_set(&cfg)?)?;
            if d.columns != file.columns {
                bail!("feature columns differ from the ones the model was trained on");
            }
            let rows: Vec<usize> = if all {
                (0..d.len()).collect()
            } else {
                train_test_split(d.len(), cfg.train_fraction, cfg.split, cfg.seed)?.1
            };
            let test = d.subset(&rows);
            let report = evaluate(&test.y, &file.model.predict(test.x.view())?)?;
            println!("{TABLE_HEADER}\n{}", report.table_row());
        }
        Command::SweepSmoothing {
            common,
            feat,
            model,
            windows,
            alpha,
            threshold,
            out,
        } => {
            let cfg = ConfigBuilder {
                feat: Some(&feat),
                model: Some(&model),
                ..builder(&common)
            }
            .build(None)?;
            let windows: Vec<usize> = windows
                .split(',')
                .map(|w| w.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .context("--S")?;
            let alphas = parse_alphas(&alpha).context("--alpha")?;
            let series = prepare_series(&cfg)?;
            let feats = features::build(&series, single_feature_set(&cfg)?, cfg.feature_options())?;
            let mut options = SweepOptions {
                split: cfg.split,
                train_fraction: cfg.train_fraction,
                ..SweepOptions::default()
            };
            if let Some(t) = threshold {
                options.threshold = t.parse()?;
            }
            let rows = smoothing_sweep(&series.mid_quotes()?, &feats, &windows, &alphas, &cfg.model, &options, cfg.seed)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", SweepRow::CSV_HEADER)?;
            for r in rows {
                writeln!(w, "{}", r.to_csv_row())?;
            }
        }
        Command::Run {
            common,
            label,
            feat,
            model,
            out,
        } => {
            let mut cfg = ConfigBuilder {
                label: Some(&label),
                feat: Some(&feat),
                model: Some(&model),
                ..builder(&common)
            }
            .build(None)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            let log = runner::run_experiment(&cfg)?;
            print!("{}", log.report_csv());
        }
        Command::Battery {
            configs,
            common,
            label,
            feat,
            model,
            out,
        } => {
            let b = ConfigBuilder {
                label: Some(&label),
                feat: Some(&feat),
                model: Some(&model),
                ..builder(&common)
            };
            let mut runs = Vec::new();
            if configs.is_empty() {
                let base = b.build(None)?;
                runs = feature_battery(&base, &base.feature_sets);
            } else {
                for path in &configs {
                    let mut cfg = b.build(Some(path))?;
                    cfg.output_dir = None;
                    runs.push(cfg);
                }
            }
            let logs = runner::run_battery(&runs)?;
            if let Some(dir) = out {
                write_outputs(&logs, &dir)?;
            }
            print!("{}", report_csv(&logs));
        }
    }
    Ok(())
}
