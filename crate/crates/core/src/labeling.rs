//! Mid-quote direction labels: raw next-event labels and smoothed trend
//! labels from backward/forward rolling means.
//!
//! Convention throughout: `Up` (+1) means the price rises.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(i8)]
pub enum Label {
    Down = -1,
    Flat = 0,
    Up = 1,
}

impl Label {
    /// Ordered by class value.
    pub const ALL: [Label; 3] = [Label::Down, Label::Flat, Label::Up];

    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Label::Down),
            0 => Some(Label::Flat),
            1 => Some(Label::Up),
            _ => None,
        }
    }

    /// Dense class index, ordered by value.
    pub fn index(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn from_index(i: usize) -> Self {
        Label::ALL[i]
    }

    /// `Acc0` / `Acc+1` / `Acc-1` style suffix.
    pub fn table_suffix(self) -> &'static str {
        match self {
            Label::Down => "-1",
            Label::Flat => "0",
            Label::Up => "+1",
        }
    }

    pub fn negate(self) -> Self {
        Label::from_value(-self.value()).expect("closed under negation")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let v: i8 = s
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("label `{s}`")))?;
        Label::from_value(v).ok_or_else(|| Error::InvalidParameter(format!("label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    Raw,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThresholdForm {
    /// `|m_next - m_prev| > alpha * dp_min`.
    #[default]
    Additive,
    /// `m_next > m_prev * (1 + alpha * dp_min)` / `m_next < m_prev * (1 - alpha * dp_min)`.
    Multiplicative,
}

impl FromStr for ThresholdForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" | "additive" => Ok(ThresholdForm::Additive),
            "mul" | "multiplicative" => Ok(ThresholdForm::Multiplicative),
            other => Err(Error::InvalidParameter(format!("threshold form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelParams {
    pub mode: LabelMode,
    /// Rolling window S, in events.
    pub window: usize,
    /// Sensitivity alpha.
    pub alpha: f64,
    pub threshold: ThresholdForm,
    /// Minimum price change in dollars; derived from the series when `None`.
    pub delta_p_min: Option<f64>,
}

impl LabelParams {
    pub fn raw() -> Self {
        LabelParams {
            mode: LabelMode::Raw,
            window: 1,
            alpha: 0.0,
            threshold: ThresholdForm::Additive,
            delta_p_min: None,
        }
    }

    pub fn smoothed(window: usize, alpha: f64) -> Self {
        LabelParams {
            mode: LabelMode::Smoothed,
            window,
            alpha,
            threshold: ThresholdForm::Additive,
            delta_p_min: None,
        }
    }

    pub fn with_threshold(mut self, threshold: ThresholdForm) -> Self {
        self.threshold = threshold;
        self
    }

    fn check(&self) -> Result<()> {
        if self.mode == LabelMode::Smoothed {
            if self.window == 0 {
                return Err(Error::InvalidParameter("window S must be at least 1".into()));
            }
            if !(self.alpha >= 0.0) {
                return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
            }
            if let Some(d) = self.delta_p_min {
                if !(d > 0.0) {
                    return Err(Error::InvalidParameter(format!("delta_p_min must be > 0, got {d}")));
                }
            }
        }
        Ok(())
    }
}

/// Labels over the valid row range of a price series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    labels: Vec<Label>,
    start: usize,
    total_rows: usize,
    pub params: LabelParams,
    /// Minimum price change actually used (smoothed mode).
    pub delta_p_min: Option<f64>,
}

impl LabelSeries {
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Rows of the input series that carry a label.
    pub fn valid_range(&self) -> Range<usize> {
        self.start..self.start + self.labels.len()
    }

    pub fn total_rows(&self) -> usize {
        self.total_rows
    }

    pub fn get(&self, row: usize) -> Option<Label> {
        row.checked_sub(self.start).and_then(|i| self.labels.get(i)).copied()
    }

    /// One entry per input row, `None` outside the valid range.
    pub fn aligned(&self) -> impl Iterator<Item = Option<Label>> + '_ {
        (0..self.total_rows).map(move |r| self.get(r))
    }

    /// Counts indexed by [`Label::index`].
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }
}

/// Next-event labels: `Up` if the next mid is higher, `Down` if lower.
pub fn raw_labels(mid: &[f64]) -> Result<LabelSeries> {
    if mid.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: mid.len(),
        });
    }
    let labels = mid
        .windows(2)
        .map(|w| match w[1].partial_cmp(&w[0]) {
            Some(std::cmp::Ordering::Greater) => Label::Up,
            Some(std::cmp::Ordering::Less) => Label::Down,
            _ => Label::Flat,
        })
        .collect();
    Ok(LabelSeries {
        labels,
        start: 0,
        total_rows: mid.len(),
        params: LabelParams::raw(),
        delta_p_min: None,
    })
}

/// Backward and forward means over `S + 1` prices each (current price
/// included), for rows `start..start + prev.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingMeans {
    pub start: usize,
    pub prev: Vec<f64>,
    pub next: Vec<f64>,
}

/// Recompute the running sum from scratch this often to bound drift.
const RESUM_INTERVAL: usize = 1024;

pub fn rolling_means(mid: &[f64], window: usize) -> Result<RollingMeans> {
    if window == 0 {
        return Err(Error::InvalidParameter("window S must be at least 1".into()));
    }
    let needed = 2 * window + 1;
    if mid.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            got: mid.len(),
        });
    }
    // block[j] = mean(mid[j..=j + S]); m_prev(t) = block[t - S], m_next(t) = block[t]
    let width = window + 1;
    let n_blocks = mid.len() - window;
    let mut block = Vec::with_capacity(n_blocks);
    let mut sum: f64 = mid[..width].iter().sum();
    block.push(sum / width as f64);
    for j in 1..n_blocks {
        if j % RESUM_INTERVAL == 0 {
            sum = mid[j..j + width].iter().sum();
        } else {
            sum += mid[j + window] - mid[j - 1];
        }
        block.push(sum / width as f64);
    }
    let valid = mid.len() - 2 * window;
    Ok(RollingMeans {
        start: window,
        prev: block[..valid].to_vec(),
        next: block[window..window + valid].to_vec(),
    })
}

/// Smallest non-zero absolute change between consecutive prices.
pub fn delta_p_min(mid: &[f64]) -> Result<f64> {
    mid.windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|d| *d > 0.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoPriceChange)
}

/// Differences below this fraction of the price level count as equality.
const RELATIVE_TOLERANCE: f64 = 1e-10;

pub fn smoothed_labels(mid: &[f64], params: &LabelParams) -> Result<LabelSeries> {
    params.check()?;
    let means = rolling_means(mid, params.window)?;
    let dp = match params.delta_p_min {
        Some(d) => d,
        // a constant series has no minimum change; every label is Flat
        None => match delta_p_min(mid) {
            Ok(d) => d,
            Err(Error::NoPriceChange) => f64::INFINITY,
            Err(e) => return Err(e),
        },
    };
    let k = params.alpha * dp;
    let labels = means
        .prev
        .iter()
        .zip(&means.next)
        .map(|(&prev, &next)| {
            let tol = RELATIVE_TOLERANCE * (prev.abs() + next.abs());
            let (up, down) = match params.threshold {
                ThresholdForm::Additive => {
                    let thr = if k.is_finite() { k } else { f64::INFINITY };
                    (next - prev > thr + tol, prev - next > thr + tol)
                }
                ThresholdForm::Multiplicative => {
                    let (hi, lo) = if k.is_finite() { (prev * (1.0 + k), prev * (1.0 - k)) } else { (f64::INFINITY, f64::NEG_INFINITY) };
                    (next > hi + tol, next < lo - tol)
                }
            };
            if up {
                Label::Up
            } else if down {
                Label::Down
            } else {
                Label::Flat
            }
        })
        .collect();
    Ok(LabelSeries {
        labels,
        start: means.start,
        total_rows: mid.len(),
        params: *params,
        delta_p_min: dp.is_finite().then_some(dp),
    })
}

/// Dispatches on `params.mode`.
pub fn label(mid: &[f64], params: &LabelParams) -> Result<LabelSeries> {
    match params.mode {
        LabelMode::Raw => raw_labels(mid),
        LabelMode::Smoothed => smoothed_labels(mid, params),
    }
}
