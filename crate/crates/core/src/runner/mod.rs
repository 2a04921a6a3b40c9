//! Experiment orchestration: load, sample, label, build features, split,
//! resample, fit, predict and evaluate, with per-stage timings.
//!
//! Report files carry no timings, so identical configs produce identical
//! reports; timings go to the run log.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Axis;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, ResampleMethod, SamplePolicy};

use crate::error::{Error, Result};
use crate::features::{self, FeatureSet};
use crate::labeling::{label, LabelMode, LabelSeries};
use crate::lobster_io::{load_paired_dataset, EventBookSeries, LoadOptions, ParseOptions};
use crate::metrics::{evaluate, EvaluationReport, TABLE_HEADER};
use crate::models::train_test_split;
use crate::resampling::{binarize, noise_dataset, smote_resample, LabeledDataset, Provenance};
use crate::rng::substream;
use crate::synth::{generate, SynthConfig};

/// Picks `n` rows, keeping time order.
pub fn sample_rows(series: &EventBookSeries, n: usize, policy: SamplePolicy, seed: u64) -> Result<EventBookSeries> {
    let len = series.len();
    if n > len {
        return Err(Error::SeriesTooShort { needed: n, got: len });
    }
    if n == len {
        return Ok(series.clone());
    }
    let mut rng = substream(seed, "sample");
    Ok(match policy {
        SamplePolicy::Head => series.slice(0..n),
        SamplePolicy::ContiguousRandomStart => {
            let start = rng.random_range(0..=len - n);
            series.slice(start..start + n)
        }
        SamplePolicy::UniformRandom => {
            let mut idx = rand::seq::index::sample(&mut rng, len, n).into_vec();
            idx.sort_unstable();
            series.select(&idx)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub dataset: String,
    pub features: String,
    pub model: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub n_features: usize,
    pub report: EvaluationReport,
}

impl ResultRow {
    pub const CSV_HEADER_PREFIX: &'static str = "Experiment,Dataset,Features,Model,Train,Test";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.experiment,
            self.dataset,
            self.features,
            self.model,
            self.train_rows,
            self.test_rows,
            self.report.table_row()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    /// Canonical `key = value` listing of the config that ran.
    pub config: String,
    pub seed: u64,
    pub timings: Vec<StageTiming>,
    pub wall_seconds: f64,
    pub series_rows: Option<usize>,
    /// Label counts by class index over the labeled rows.
    pub label_counts: Option<[usize; 3]>,
    pub results: Vec<ResultRow>,
}

impl RunLog {
    pub fn report_csv(&self) -> String {
        report_csv(std::slice::from_ref(self))
    }
}

/// Report table over one or more runs.
pub fn report_csv(logs: &[RunLog]) -> String {
    let mut s = format!("{},{}\n", ResultRow::CSV_HEADER_PREFIX, TABLE_HEADER);
    for row in logs.iter().flat_map(|l| &l.results) {
        s.push_str(&row.to_csv_row());
        s.push('\n');
    }
    s
}

/// Accuracy against LOB depth and imbalance level, for plotting.
pub fn plot_data_csv(logs: &[RunLog]) -> Option<String> {
    let mut s = String::from("family,level,accuracy,f1_unweighted_mean\n");
    let mut any = false;
    for row in logs.iter().flat_map(|l| &l.results) {
        let (family, level) = match row.features.parse::<FeatureSet>() {
            Ok(FeatureSet::Lob { depth }) => ("lob", depth),
            Ok(FeatureSet::Imbalance { levels }) => ("imb", levels),
            _ => continue,
        };
        any = true;
        let _ = writeln!(s, "{family},{level},{:.2},{:.2}", row.report.accuracy, row.report.f1_unweighted_mean);
    }
    any.then_some(s)
}

/// Writes `report.csv`, `runlog.json` and, when the runs include LOB or
/// imbalance feature sets, `plot_data.csv`.
pub fn write_outputs(logs: &[RunLog], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), report_csv(logs))?;
    let json = serde_json::to_string_pretty(logs).map_err(|e| Error::ModelFormat(e.to_string()))?;
    fs::write(dir.join("runlog.json"), json)?;
    if let Some(plot) = plot_data_csv(logs) {
        fs::write(dir.join("plot_data.csv"), plot)?;
    }
    Ok(())
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(name));
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

fn load_series(cfg: &ExperimentConfig) -> Result<EventBookSeries> {
    match &cfg.data {
        DataSource::Lobster { messages, book } => load_paired_dataset(
            messages,
            book,
            LoadOptions {
                depth: cfg.depth,
                parse: ParseOptions {
                    validation: cfg.validation,
                    ..ParseOptions::default()
                },
            },
        ),
        DataSource::Synthetic { rows } => Ok(generate(&SynthConfig {
            rows: *rows,
            seed: cfg.seed,
            depth: cfg.depth,
            ..SynthConfig::default()
        })),
        DataSource::Noise { .. } => Err(Error::Config("the noise source has no event series".into())),
    }
}

/// Loads (or generates) the series and applies the configured sampling.
pub fn prepare_series(cfg: &ExperimentConfig) -> Result<EventBookSeries> {
    let series = load_series(cfg).map_err(|e| e.in_stage("load"))?;
    match cfg.sample_size {
        Some(n) => sample_rows(&series, n, cfg.sample_policy, cfg.seed).map_err(|e| e.in_stage("sample")),
        None => Ok(series),
    }
}

pub fn label_series(cfg: &ExperimentConfig, series: &EventBookSeries) -> Result<LabelSeries> {
    label(&series.mid_quotes()?, &cfg.label)
}

/// Features of `set` joined with `labels`, binarized when configured.
pub fn build_dataset(cfg: &ExperimentConfig, series: &EventBookSeries, labels: &LabelSeries, set: &FeatureSet) -> Result<LabeledDataset> {
    let matrix = features::build(series, set, cfg.feature_options())?;
    let provenance = match cfg.label.mode {
        LabelMode::Raw => Provenance::Base,
        LabelMode::Smoothed => Provenance::Smoothed,
    };
    let d = LabeledDataset::join(&matrix, labels, provenance)?;
    Ok(if cfg.resample == ResampleMethod::Binarize { binarize(&d) } else { d })
}

/// Split, resample, fit, predict and evaluate one labeled dataset.
fn fit_and_score(cfg: &ExperimentConfig, timer: &mut Timer, data: &LabeledDataset, features: String) -> Result<ResultRow> {
    let (train_idx, test_idx) = timer.stage("split", || train_test_split(data.len(), cfg.train_fraction, cfg.split, cfg.seed))?;
    let mut train = data.subset(&train_idx);
    if let ResampleMethod::Smote { k } = cfg.resample {
        train = timer.stage("resample", || smote_resample(&train, k, cfg.seed))?;
    }
    let model = timer.stage("fit", || cfg.model.fit(train.x.view(), &train.y, cfg.seed))?;
    let xt = data.x.select(Axis(0), &test_idx);
    let yt: Vec<_> = test_idx.iter().map(|&i| data.y[i]).collect();
    let pred = timer.stage("predict", || model.predict(xt.view()))?;
    let report = timer.stage("evaluate", || evaluate(&yt, &pred))?;
    Ok(ResultRow {
        experiment: cfg.name.clone(),
        dataset: match cfg.resample {
            ResampleMethod::Smote { .. } => Provenance::Smote.to_string(),
            _ => data.provenance.to_string(),
        },
        features,
        model: cfg.model.kind().to_string(),
        train_rows: train.len(),
        test_rows: test_idx.len(),
        n_features: data.x.ncols(),
        report,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunLog> {
    cfg.validate()?;
    let wall = Instant::now();
    let mut timer = Timer { timings: Vec::new() };
    let mut results = Vec::new();
    let mut series_rows = None;
    let label_counts;

    if let DataSource::Noise { rows, cols, freqs } = &cfg.data {
        let data = timer.stage("load", || noise_dataset(*rows, *cols, freqs, cfg.seed))?;
        label_counts = Some(data.class_counts());
        results.push(fit_and_score(cfg, &mut timer, &data, "Noise".into())?);
    } else {
        let series = timer.stage("load", || load_series(cfg))?;
        let series = match cfg.sample_size {
            Some(n) => timer.stage("sample", || sample_rows(&series, n, cfg.sample_policy, cfg.seed))?,
            None => series,
        };
        series_rows = Some(series.len());
        let labels = timer.stage("label", || label_series(cfg, &series))?;
        label_counts = Some(labels.counts());
        for set in &cfg.feature_sets {
            let data = timer.stage("features", || build_dataset(cfg, &series, &labels, set))?;
            results.push(fit_and_score(cfg, &mut timer, &data, set.to_string())?);
        }
    }

    let log = RunLog {
        config: cfg.to_text(),
        seed: cfg.seed,
        timings: timer.timings,
        wall_seconds: wall.elapsed().as_secs_f64(),
        series_rows,
        label_counts,
        results,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(std::slice::from_ref(&log), dir)?;
    }
    Ok(log)
}

/// Runs each config in turn; `output_dir` of the individual configs is
/// honoured, and the combined tables are returned alongside the logs.
pub fn run_battery(configs: &[ExperimentConfig]) -> Result<Vec<RunLog>> {
    configs.iter().map(run_experiment).collect()
}

/// One config per feature set, sharing everything else.
pub fn feature_battery(base: &ExperimentConfig, sets: &[FeatureSet]) -> Vec<ExperimentConfig> {
    sets.iter()
        .map(|s| ExperimentConfig {
            name: format!("{}:{s}", base.name),
            feature_sets: vec![s.clone()],
            output_dir: None,
            ..base.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::Label;
    use crate::models::{ModelSpec, RfParams};

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.apply_overrides([
            "data.source=synthetic",
            "data.rows=1200",
            "label.S=5",
            "features=LOB-2;IMB-1",
            "model=rf",
            "model.params=n_estimators=5",
            "seed=4",
        ])
        .unwrap();
        c
    }

    #[test]
    fn sampling_policies() {
        let s = generate(&SynthConfig { rows: 100, ..SynthConfig::default() });
        assert_eq!(sample_rows(&s, 100, SamplePolicy::UniformRandom, 1).unwrap(), s);
        let head = sample_rows(&s, 10, SamplePolicy::Head, 1).unwrap();
        assert_eq!(head.events, s.events[..10].to_vec());
        let a = sample_rows(&s, 10, SamplePolicy::ContiguousRandomStart, 7).unwrap();
        let b = sample_rows(&s, 10, SamplePolicy::ContiguousRandomStart, 7).unwrap();
        assert_eq!(a, b);
        let u = sample_rows(&s, 30, SamplePolicy::UniformRandom, 2).unwrap();
        assert_eq!(u.len(), 30);
        assert!(u.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(sample_rows(&s, 101, SamplePolicy::Head, 0).is_err());
    }

    #[test]
    fn end_to_end_rows_and_timings() {
        let log = run_experiment(&small()).unwrap();
        assert_eq!(log.results.len(), 2);
        assert_eq!(log.results[0].features, "LOB-2");
        assert_eq!(log.label_counts.unwrap().iter().sum::<usize>(), 1200 - 10);
        assert!(log.timings.iter().all(|t| t.seconds >= 0.0));
        assert!(log.timings.iter().map(|t| t.seconds).sum::<f64>() <= log.wall_seconds + 1e-9);
        let csv = log.report_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(plot_data_csv(&[log]).unwrap().contains("lob,2,"));
    }

    #[test]
    fn reports_are_reproducible() {
        let a = run_experiment(&small()).unwrap();
        let b = run_experiment(&small()).unwrap();
        assert_eq!(a.report_csv(), b.report_csv());
    }

    #[test]
    fn noise_basepred() {
        let mut c = ExperimentConfig::default();
        c.apply_overrides(["data.source=noise", "data.rows=20000", "model=basepred", "split=shuffled"])
            .unwrap();
        let log = run_experiment(&c).unwrap();
        let acc = log.results[0].report.accuracy;
        assert!((acc - 81.5).abs() < 2.0, "{acc}");
        assert_eq!(log.results[0].dataset, "Noise");
    }

    #[test]
    fn stage_tagged_errors() {
        let mut c = small();
        c.set("features", "LOB-50").unwrap();
        let err = run_experiment(&c).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "features", .. }), "{err}");

        let mut c = small();
        c.set("label.S", "700").unwrap();
        assert!(matches!(run_experiment(&c).unwrap_err(), Error::Stage { stage: "label", .. }));
    }

    #[test]
    fn smote_and_binarize_datasets() {
        let mut c = small();
        c.apply_overrides(["features=LOB-2", "resample=smote"]).unwrap();
        let log = run_experiment(&c).unwrap();
        assert_eq!(log.results[0].dataset, "SMOTE");
        c.set("resample", "binarize").unwrap();
        let log = run_experiment(&c).unwrap();
        assert_eq!(log.results[0].dataset, "Binarized");
        assert!(!log.results[0].report.class_counts.contains_key(&Label::Flat));
    }

    #[test]
    fn battery_one_config_per_set() {
        let base = ExperimentConfig {
            model: ModelSpec::Rf(RfParams { n_estimators: 3, ..RfParams::default() }),
            ..small()
        };
        let sets: Vec<FeatureSet> = ["LOB-1", "LOB-2", "IMB-1"].iter().map(|s| s.parse().unwrap()).collect();
        let logs = run_battery(&feature_battery(&base, &sets)).unwrap();
        assert_eq!(report_csv(&logs).lines().count(), 4);
    }
}
