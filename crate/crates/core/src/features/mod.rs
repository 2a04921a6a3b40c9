//! Feature matrices built from an [`EventBookSeries`].
//!
//! Each family lives in its own submodule; [`build`] dispatches on a
//! [`FeatureSet`]. Every matrix keeps the series row index of each of its
//! rows so matrices from different families can be combined and joined
//! with labels.

mod arrival;
mod imbalance;
mod lob;
mod orders;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lobster_io::EventBookSeries;

pub use arrival::{arrival_rate_features, classify_event, ArrivalSums, ArrivalWindow, Contribution, FlowKind};
pub use imbalance::{imbalance, imbalance_features, imbalance_ratio};
pub use lob::lob_features;
pub use orders::order_features;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderVariant {
    All,
    Time,
    Type,
    Direction,
    Id,
    Details,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrivalVariant {
    /// Created, canceled and executed volume over all orders.
    All,
    /// Created/canceled volume of orders away from the best level.
    NonLevel1,
    /// Created/canceled volume of orders at the best level.
    Level1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Orders,
    Lob,
    Imbalance,
    ArrivalRate,
    Combined,
}

impl Family {
    pub fn prefix(self) -> &'static str {
        match self {
            Family::Orders => "orders",
            Family::Lob => "lob",
            Family::Imbalance => "imb",
            Family::ArrivalRate => "arrrt",
            Family::Combined => "combined",
        }
    }
}

/// A named feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureSet {
    Orders(OrderVariant),
    Lob { depth: usize },
    Imbalance { levels: usize },
    ArrivalRate { variant: ArrivalVariant, window_secs: f64 },
    Combined(Vec<FeatureSet>),
}

/// Arrival-rate window used when a name carries none.
pub const DEFAULT_ARRIVAL_WINDOW_SECS: f64 = 1.0;

impl FeatureSet {
    pub fn family(&self) -> Family {
        match self {
            FeatureSet::Orders(_) => Family::Orders,
            FeatureSet::Lob { .. } => Family::Lob,
            FeatureSet::Imbalance { .. } => Family::Imbalance,
            FeatureSet::ArrivalRate { .. } => Family::ArrivalRate,
            FeatureSet::Combined(_) => Family::Combined,
        }
    }

    /// Best set of each family: order time, full depth, first-level
    /// imbalance and 10 s arrival rates.
    pub fn best_of_each() -> Self {
        FeatureSet::Combined(vec![
            FeatureSet::Orders(OrderVariant::Time),
            FeatureSet::Lob { depth: 10 },
            FeatureSet::Imbalance { levels: 1 },
            FeatureSet::ArrivalRate {
                variant: ArrivalVariant::All,
                window_secs: 10.0,
            },
        ])
    }

    /// Parses a name such as `LOB-3`, `IMB-1`, `ArrRt-LOBOrds@0.1` or
    /// `LOB-1+IMB-1`. `window` applies to arrival sets without an `@`.
    pub fn parse(name: &str, window: Option<f64>) -> Result<Self> {
        let name = name.trim();
        if name.contains('+') {
            let parts = name
                .split('+')
                .map(|p| FeatureSet::parse(p, window))
                .collect::<Result<Vec<_>>>()?;
            return Ok(FeatureSet::Combined(parts));
        }
        if name.eq_ignore_ascii_case("combined") {
            return Ok(FeatureSet::best_of_each());
        }
        let unknown = || Error::UnknownFeatureSet(name.to_string());
        let (base, at) = match name.split_once('@') {
            Some((b, w)) => (b, Some(w.parse::<f64>().map_err(|_| unknown())?)),
            None => (name, None),
        };
        let order = |v| Ok(FeatureSet::Orders(v));
        match base {
            "Orders-All" => return order(OrderVariant::All),
            "Order-Time" => return order(OrderVariant::Time),
            "Order-Type" => return order(OrderVariant::Type),
            "Order-Dir" => return order(OrderVariant::Direction),
            "Order-ID" => return order(OrderVariant::Id),
            "Order-Details" => return order(OrderVariant::Details),
            _ => {}
        }
        let arrival = match base {
            "ArrRt" => Some(ArrivalVariant::All),
            "ArrRt-Ords" => Some(ArrivalVariant::NonLevel1),
            "ArrRt-LOBOrds" => Some(ArrivalVariant::Level1),
            _ => None,
        };
        if let Some(variant) = arrival {
            let window_secs = at.or(window).unwrap_or(DEFAULT_ARRIVAL_WINDOW_SECS);
            return Ok(FeatureSet::ArrivalRate { variant, window_secs });
        }
        if at.is_some() {
            return Err(unknown());
        }
        if let Some(k) = base.strip_prefix("LOB-") {
            let depth = k.parse().map_err(|_| unknown())?;
            return Ok(FeatureSet::Lob { depth });
        }
        if let Some(k) = base.strip_prefix("IMB-") {
            let levels = k.parse().map_err(|_| unknown())?;
            return Ok(FeatureSet::Imbalance { levels });
        }
        Err(unknown())
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSet::Orders(v) => f.write_str(match v {
                OrderVariant::All => "Orders-All",
                OrderVariant::Time => "Order-Time",
                OrderVariant::Type => "Order-Type",
                OrderVariant::Direction => "Order-Dir",
                OrderVariant::Id => "Order-ID",
                OrderVariant::Details => "Order-Details",
            }),
            FeatureSet::Lob { depth } => write!(f, "LOB-{depth}"),
            FeatureSet::Imbalance { levels } => write!(f, "IMB-{levels}"),
            FeatureSet::ArrivalRate { variant, window_secs } => {
                let base = match variant {
                    ArrivalVariant::All => "ArrRt",
                    ArrivalVariant::NonLevel1 => "ArrRt-Ords",
                    ArrivalVariant::Level1 => "ArrRt-LOBOrds",
                };
                write!(f, "{base}@{window_secs}")
            }
            FeatureSet::Combined(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::parse(s, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureOptions {
    /// Encode the event kind one-hot instead of as its integer code.
    pub one_hot_type: bool,
    /// Emit a 0/1 validity column after each imbalance column.
    pub imbalance_validity: bool,
}

/// Named numeric columns over a subset of series rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub data: Array2<f64>,
    pub spec: FeatureSet,
    /// Series row of each matrix row.
    pub rows: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, data: Array2<f64>, spec: FeatureSet, rows: Vec<usize>) -> Result<Self> {
        if data.ncols() != columns.len() {
            return Err(Error::Alignment(format!("{} columns named for {} data columns", columns.len(), data.ncols())));
        }
        if data.nrows() != rows.len() {
            return Err(Error::Alignment(format!("{} row indices for {} data rows", rows.len(), data.nrows())));
        }
        Ok(FeatureMatrix {
            columns,
            data,
            spec,
            rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    /// Rows at matrix positions `positions`.
    pub fn select_rows(&self, positions: &[usize]) -> Self {
        FeatureMatrix {
            columns: self.columns.clone(),
            data: self.data.select(Axis(0), positions),
            spec: self.spec.clone(),
            rows: positions.iter().map(|&p| self.rows[p]).collect(),
        }
    }

    /// Headered CSV; the first column is the series row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "row")?;
        for c in &self.columns {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for (r, row) in self.rows.iter().zip(self.data.rows()) {
            write!(out, "{r}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Builds the matrix for `set` over every row of `series`.
pub fn build(series: &EventBookSeries, set: &FeatureSet, options: FeatureOptions) -> Result<FeatureMatrix> {
    match set {
        FeatureSet::Orders(v) => order_features(series, *v, options),
        FeatureSet::Lob { depth } => lob_features(series, *depth),
        FeatureSet::Imbalance { levels } => imbalance_features(series, *levels, options),
        FeatureSet::ArrivalRate { variant, window_secs } => arrival_rate_features(series, *window_secs, *variant),
        FeatureSet::Combined(parts) => {
            let mats = parts
                .par_iter()
                .map(|p| build(series, p, options))
                .collect::<Result<Vec<_>>>()?;
            combine(&mats)
        }
    }
}

/// Column-wise concatenation of row-aligned matrices. Names that occur in
/// more than one input are prefixed with their family.
pub fn combine(matrices: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = matrices.first().ok_or(Error::Empty("no matrices to combine"))?;
    if matrices.len() == 1 {
        return Ok(first.clone());
    }
    for m in &matrices[1..] {
        if m.rows != first.rows {
            return Err(Error::Alignment(format!("{} and {} cover different rows", first.spec, m.spec)));
        }
    }
    let mut columns = Vec::new();
    for m in matrices {
        for c in &m.columns {
            let dup = matrices.iter().flat_map(|o| &o.columns).filter(|o| *o == c).count() > 1;
            let mut name = if dup { format!("{}:{c}", m.spec.family().prefix()) } else { c.clone() };
            if columns.contains(&name) {
                let base = name.clone();
                let mut k = 2;
                while columns.contains(&name) {
                    name = format!("{base}#{k}");
                    k += 1;
                }
            }
            columns.push(name);
        }
    }
    let views: Vec<_> = matrices.iter().map(|m| m.data.view()).collect();
    let data = concatenate(Axis(1), &views).map_err(|e| Error::Alignment(e.to_string()))?;
    FeatureMatrix::new(
        columns,
        data,
        FeatureSet::Combined(matrices.iter().map(|m| m.spec.clone()).collect()),
        first.rows.clone(),
    )
}
