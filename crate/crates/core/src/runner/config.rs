//! Experiment configuration: flat `key = value` text with dotted keys.
//!
//! Later assignments win, so applying defaults, then a file, then command
//! line overrides gives the usual precedence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureOptions, FeatureSet};
use crate::labeling::{Label, LabelMode, LabelParams, ThresholdForm};
use crate::lobster_io::{ValidationMode, DEFAULT_DEPTH};
use crate::models::split::DEFAULT_TRAIN_FRACTION;
use crate::models::{ModelKind, ModelSpec, SplitPolicy};
use crate::resampling::DEFAULT_K_NEIGHBORS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Lobster { messages: PathBuf, book: PathBuf },
    /// Event stream from the built-in order-flow simulator.
    Synthetic { rows: usize },
    /// Uniform random features with labels from a threshold partition.
    Noise { rows: usize, cols: usize, freqs: Vec<(Label, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplePolicy {
    #[default]
    Head,
    ContiguousRandomStart,
    UniformRandom,
}

impl FromStr for SamplePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(SamplePolicy::Head),
            "contiguous" | "contiguous-random-start" => Ok(SamplePolicy::ContiguousRandomStart),
            "uniform" | "uniform-random" => Ok(SamplePolicy::UniformRandom),
            other => Err(Error::Config(format!("unknown sample policy `{other}`"))),
        }
    }
}

impl SamplePolicy {
    pub fn name(self) -> &'static str {
        match self {
            SamplePolicy::Head => "head",
            SamplePolicy::ContiguousRandomStart => "contiguous-random-start",
            SamplePolicy::UniformRandom => "uniform-random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ResampleMethod {
    #[default]
    None,
    /// Drop flat rows before splitting.
    Binarize,
    /// SMOTE on the training split only.
    Smote { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub depth: usize,
    pub validation: ValidationMode,
    /// `None` keeps every row.
    pub sample_size: Option<usize>,
    pub sample_policy: SamplePolicy,
    pub label: LabelParams,
    /// One report row per entry.
    pub feature_sets: Vec<FeatureSet>,
    pub one_hot_type: bool,
    pub imbalance_validity: bool,
    pub resample: ResampleMethod,
    /// Neighbor count used whenever `resample` is SMOTE.
    pub smote_k: usize,
    pub model: ModelSpec,
    pub split: SplitPolicy,
    pub train_fraction: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_FEATURES: &str = "Orders-All+LOB-10";

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            data: DataSource::Synthetic { rows: 10_000 },
            depth: DEFAULT_DEPTH,
            validation: ValidationMode::Strict,
            sample_size: None,
            sample_policy: SamplePolicy::Head,
            label: LabelParams::smoothed(20, 1.0),
            feature_sets: vec![FeatureSet::parse(DEFAULT_FEATURES, None).expect("valid default")],
            one_hot_type: false,
            imbalance_validity: false,
            resample: ResampleMethod::None,
            smote_k: DEFAULT_K_NEIGHBORS,
            model: ModelSpec::Rf(Default::default()),
            split: SplitPolicy::Chronological,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: 0,
            output_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: `{value}`")))
}

/// `0:0.9,1:0.05,-1:0.05`.
fn parse_freqs(value: &str) -> Result<Vec<(Label, f64)>> {
    value
        .split(',')
        .map(|pair| {
            let (l, p) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("class frequency `{pair}` is not label:freq")))?;
            Ok((parse::<Label>("data.noise_freqs", l.trim())?, parse("data.noise_freqs", p.trim())?))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            one_hot_type: self.one_hot_type,
            imbalance_validity: self.imbalance_validity,
        }
    }

    /// Applies one assignment. Keys are listed in the README.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "name" => self.name = value.to_string(),
            "data.source" => {
                self.data = match value {
                    "lobster" => DataSource::Lobster {
                        messages: PathBuf::new(),
                        book: PathBuf::new(),
                    },
                    "synthetic" => DataSource::Synthetic { rows: 10_000 },
                    "noise" => DataSource::Noise {
                        rows: 50_000,
                        cols: 10,
                        freqs: vec![(Label::Flat, 0.9), (Label::Up, 0.05), (Label::Down, 0.05)],
                    },
                    other => return Err(Error::Config(format!("unknown data.source `{other}`"))),
                }
            }
            "data.messages" | "data.book" => {
                if !matches!(self.data, DataSource::Lobster { .. }) {
                    self.data = DataSource::Lobster {
                        messages: PathBuf::new(),
                        book: PathBuf::new(),
                    };
                }
                if let DataSource::Lobster { messages, book } = &mut self.data {
                    let target = if key == "data.messages" { messages } else { book };
                    *target = PathBuf::from(value);
                }
            }
            "data.rows" => match &mut self.data {
                DataSource::Synthetic { rows } | DataSource::Noise { rows, .. } => *rows = parse(key, value)?,
                DataSource::Lobster { .. } => return Err(Error::Config("data.rows needs a synthetic or noise source".into())),
            },
            "data.noise_cols" | "data.noise_freqs" => {
                let DataSource::Noise { cols, freqs, .. } = &mut self.data else {
                    return Err(Error::Config(format!("{key} needs data.source = noise")));
                };
                if key == "data.noise_cols" {
                    *cols = parse(key, value)?;
                } else {
                    *freqs = parse_freqs(value)?;
                }
            }
            "depth" => self.depth = parse(key, value)?,
            "validate" => self.validation = parse(key, value)?,
            "sample.size" => {
                self.sample_size = match value {
                    "all" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "sample.policy" => self.sample_policy = value.parse()?,
            "label.mode" => {
                self.label.mode = match value {
                    "raw" => LabelMode::Raw,
                    "smoothed" => LabelMode::Smoothed,
                    other => return Err(Error::Config(format!("unknown label.mode `{other}`"))),
                }
            }
            "label.S" => self.label.window = parse(key, value)?,
            "label.alpha" => self.label.alpha = parse(key, value)?,
            "label.threshold" => self.label.threshold = parse::<ThresholdForm>(key, value)?,
            "label.delta_p_min" => {
                self.label.delta_p_min = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "features" => {
                self.feature_sets = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| FeatureSet::parse(s, None))
                    .collect::<Result<_>>()?;
                if self.feature_sets.is_empty() {
                    return Err(Error::Config("features is empty".into()));
                }
            }
            "features.one_hot_type" => self.one_hot_type = parse(key, value)?,
            "features.imbalance_validity" => self.imbalance_validity = parse(key, value)?,
            "resample" => {
                self.resample = match value {
                    "none" => ResampleMethod::None,
                    "binarize" => ResampleMethod::Binarize,
                    "smote" => ResampleMethod::Smote { k: self.smote_k },
                    other => return Err(Error::Config(format!("unknown resample `{other}`"))),
                }
            }
            "resample.k" => {
                self.smote_k = parse(key, value)?;
                if let ResampleMethod::Smote { k } = &mut self.resample {
                    *k = self.smote_k;
                }
            }
            "model" => {
                let kind: ModelKind = value.parse()?;
                if kind != self.model.kind() {
                    self.model = ModelSpec::parse(kind, "")?;
                }
            }
            "model.params" => self.model = ModelSpec::parse(self.model.kind(), value)?,
            "split" => self.split = value.parse()?,
            "split.train_fraction" => self.train_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| {
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                Error::Config(format!("line {}: {msg}", i + 1))
            })?;
        }
        Ok(())
    }

    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{p}` is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Lobster { messages, book } = &self.data {
            if messages.as_os_str().is_empty() || book.as_os_str().is_empty() {
                return Err(Error::Config("lobster source needs data.messages and data.book".into()));
            }
        }
        if self.sample_size == Some(0) {
            return Err(Error::Config("sample.size must be positive".into()));
        }
        if self.feature_sets.is_empty() {
            return Err(Error::Config("no feature sets".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` listing; applying it to the defaults
    /// reproduces this config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        match &self.data {
            DataSource::Lobster { messages, book } => {
                kv("data.source", "lobster".into());
                kv("data.messages", messages.display().to_string());
                kv("data.book", book.display().to_string());
            }
            DataSource::Synthetic { rows } => {
                kv("data.source", "synthetic".into());
                kv("data.rows", rows.to_string());
            }
            DataSource::Noise { rows, cols, freqs } => {
                kv("data.source", "noise".into());
                kv("data.rows", rows.to_string());
                kv("data.noise_cols", cols.to_string());
                let f: Vec<String> = freqs.iter().map(|(l, p)| format!("{l}:{p}")).collect();
                kv("data.noise_freqs", f.join(","));
            }
        }
        kv("depth", self.depth.to_string());
        kv("validate", self.validation.to_string());
        kv("sample.size", self.sample_size.map_or("all".into(), |n| n.to_string()));
        kv("sample.policy", self.sample_policy.name().into());
        kv(
            "label.mode",
            match self.label.mode {
                LabelMode::Raw => "raw",
                LabelMode::Smoothed => "smoothed",
            }
            .into(),
        );
        kv("label.S", self.label.window.to_string());
        kv("label.alpha", self.label.alpha.to_string());
        kv(
            "label.threshold",
            match self.label.threshold {
                ThresholdForm::Additive => "add",
                ThresholdForm::Multiplicative => "mul",
            }
            .into(),
        );
        kv("label.delta_p_min", self.label.delta_p_min.map_or("auto".into(), |d| d.to_string()));
        let sets: Vec<String> = self.feature_sets.iter().map(|f| f.to_string()).collect();
        kv("features", sets.join(";"));
        kv("features.one_hot_type", self.one_hot_type.to_string());
        kv("features.imbalance_validity", self.imbalance_validity.to_string());
        match self.resample {
            ResampleMethod::None => kv("resample", "none".into()),
            ResampleMethod::Binarize => kv("resample", "binarize".into()),
            ResampleMethod::Smote { .. } => kv("resample", "smote".into()),
        }
        kv("resample.k", self.smote_k.to_string());
        kv("model", self.model.kind().to_string());
        if let ModelSpec::Rf(p) = &self.model {
            kv("model.params", p.to_string());
        }
        kv("split", self.split.to_string());
        kv("split.train_fraction", self.train_fraction.to_string());
        kv("seed", self.seed.to_string());
        if let Some(d) = &self.output_dir {
            kv("output.dir", d.display().to_string());
        }
        s
    }
}
