//! Order arrival-rate features: volume created, canceled and executed in a
//! trailing time window, split by side and by best-level membership.
//!
//! The window for row `t` is `(time_t - dt, time_t]` over rows `<= t`.
//! An event is "at level 1" when its price equals the best price on its
//! own side in the snapshot of the previous row, i.e. before the event is
//! applied. Row 0 has no prior snapshot and is never at level 1.

use std::collections::VecDeque;

use ndarray::Array2;

use super::{ArrivalVariant, FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::lobster_io::{BookSnapshot, Direction, EventBookSeries, EventKind, OrderEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Created,
    Canceled,
    Executed,
}

/// One event's contribution to the window sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contribution {
    pub flow: FlowKind,
    pub side: Direction,
    pub level1: bool,
    pub size: u64,
}

/// Classifies an event against the book as it stood before the event.
/// Halts contribute nothing.
pub fn classify_event(event: &OrderEvent, prior: Option<&BookSnapshot>) -> Option<Contribution> {
    let flow = match event.kind {
        EventKind::Submit => FlowKind::Created,
        EventKind::PartialCancel | EventKind::Delete => FlowKind::Canceled,
        EventKind::ExecuteVisible | EventKind::ExecuteHidden => FlowKind::Executed,
        EventKind::Halt => return None,
    };
    let level1 = prior
        .and_then(|b| b.best_on_side(event.direction))
        .is_some_and(|l| l.price == event.price);
    Some(Contribution {
        flow,
        side: event.direction,
        level1,
        size: event.size,
    })
}

/// Running sums. `created[level1][side]`, side index 0 = buy, 1 = sell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ArrivalSums {
    pub created: [[u64; 2]; 2],
    pub canceled: [[u64; 2]; 2],
    pub executed: u64,
}

fn side_index(d: Direction) -> usize {
    match d {
        Direction::Buy => 0,
        Direction::Sell => 1,
    }
}

impl ArrivalSums {
    fn add(&mut self, c: &Contribution) {
        let (l, s) = (usize::from(c.level1), side_index(c.side));
        match c.flow {
            FlowKind::Created => self.created[l][s] += c.size,
            FlowKind::Canceled => self.canceled[l][s] += c.size,
            FlowKind::Executed => self.executed += c.size,
        }
    }

    fn remove(&mut self, c: &Contribution) {
        let (l, s) = (usize::from(c.level1), side_index(c.side));
        match c.flow {
            FlowKind::Created => self.created[l][s] -= c.size,
            FlowKind::Canceled => self.canceled[l][s] -= c.size,
            FlowKind::Executed => self.executed -= c.size,
        }
    }

    /// Buy, sell and buy-minus-sell for created then canceled volume,
    /// restricted to level-1 membership when `level1` is `Some`.
    fn created_canceled(&self, level1: Option<bool>) -> [f64; 6] {
        let pick = |m: &[[u64; 2]; 2], s: usize| -> f64 {
            match level1 {
                Some(l) => m[usize::from(l)][s] as f64,
                None => (m[0][s] + m[1][s]) as f64,
            }
        };
        let (cb, cs) = (pick(&self.created, 0), pick(&self.created, 1));
        let (xb, xs) = (pick(&self.canceled, 0), pick(&self.canceled, 1));
        [cb, cs, cb - cs, xb, xs, xb - xs]
    }

    pub fn row(&self, variant: ArrivalVariant) -> Vec<f64> {
        match variant {
            ArrivalVariant::All => {
                let mut v = self.created_canceled(None).to_vec();
                v.push(self.executed as f64);
                v
            }
            ArrivalVariant::NonLevel1 => self.created_canceled(Some(false)).to_vec(),
            ArrivalVariant::Level1 => self.created_canceled(Some(true)).to_vec(),
        }
    }
}

/// Sliding time window with O(1) amortized updates.
#[derive(Debug, Clone)]
pub struct ArrivalWindow {
    window_ns: u64,
    pending: VecDeque<(u64, Contribution)>,
    sums: ArrivalSums,
}

impl ArrivalWindow {
    pub fn new(window_secs: f64) -> Result<Self> {
        if !(window_secs > 0.0) || !window_secs.is_finite() {
            return Err(Error::InvalidParameter(format!("arrival window must be positive, got {window_secs}")));
        }
        Ok(ArrivalWindow {
            window_ns: (window_secs * 1e9).round().max(1.0) as u64,
            pending: VecDeque::new(),
            sums: ArrivalSums::default(),
        })
    }

    /// Adds an event at `time_ns` and expires everything at or before
    /// `time_ns - window`.
    pub fn push(&mut self, time_ns: u64, contribution: Option<Contribution>) {
        if let Some(c) = contribution {
            self.sums.add(&c);
            self.pending.push_back((time_ns, c));
        }
        while let Some(&(t, c)) = self.pending.front() {
            if t + self.window_ns <= time_ns {
                self.sums.remove(&c);
                self.pending.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn sums(&self) -> &ArrivalSums {
        &self.sums
    }
}

pub fn column_names(variant: ArrivalVariant) -> Vec<String> {
    let prefix = match variant {
        ArrivalVariant::All => "",
        ArrivalVariant::NonLevel1 => "nonlob1_",
        ArrivalVariant::Level1 => "lob1_",
    };
    let mut cols: Vec<String> = ["created_buy", "created_sell", "created_net", "canceled_buy", "canceled_sell", "canceled_net"]
        .iter()
        .map(|c| format!("{prefix}{c}"))
        .collect();
    if variant == ArrivalVariant::All {
        cols.push("executed".into());
    }
    cols
}

pub fn arrival_rate_features(series: &EventBookSeries, window_secs: f64, variant: ArrivalVariant) -> Result<FeatureMatrix> {
    let mut window = ArrivalWindow::new(window_secs)?;
    let columns = column_names(variant);
    let mut values = Vec::with_capacity(series.len() * columns.len());
    for (i, event) in series.events.iter().enumerate() {
        let prior = i.checked_sub(1).map(|p| &series.books[p]);
        window.push(event.time.nanos(), classify_event(event, prior));
        values.extend(window.sums().row(variant));
    }
    let data = Array2::from_shape_vec((series.len(), columns.len()), values).expect("shape matches");
    FeatureMatrix::new(
        columns,
        data,
        FeatureSet::ArrivalRate { variant, window_secs },
        (0..series.len()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_support::*;

    #[test]
    fn empty_window_row_is_zero() {
        // a halt contributes nothing
        let s = series_of(vec![event(0, EventKind::Halt, 0, -1, Direction::Sell)], 1);
        let m = arrival_rate_features(&s, 1.0, ArrivalVariant::All).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
        assert_eq!(m.n_cols(), 7);
    }

    #[test]
    fn two_buy_submits_in_window() {
        let s = series_of(
            vec![
                event(0, EventKind::Submit, 10, 999_000, Direction::Buy),
                event(100, EventKind::Submit, 20, 999_000, Direction::Buy),
            ],
            2,
        );
        let m = arrival_rate_features(&s, 1.0, ArrivalVariant::All).unwrap();
        assert_eq!(m.data.row(1).to_vec(), vec![30.0, 0.0, 30.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn expiry_is_half_open() {
        // events at 0 ms and 1000 ms with a 1 s window: the first expires exactly
        let s = series_of(
            vec![
                event(0, EventKind::Submit, 10, 999_000, Direction::Sell),
                event(1000, EventKind::ExecuteVisible, 5, 1_000_100, Direction::Sell),
                event(1999, EventKind::Delete, 7, 1_000_100, Direction::Sell),
            ],
            2,
        );
        let m = arrival_rate_features(&s, 1.0, ArrivalVariant::All).unwrap();
        assert_eq!(m.data.row(1).to_vec(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0]);
        assert_eq!(m.data.row(2).to_vec(), vec![0.0, 0.0, 0.0, 0.0, 7.0, -7.0, 5.0]);
    }

    #[test]
    fn level1_uses_prior_snapshot() {
        // flat_book best bid is 1_000_000, best ask 1_000_100
        let s = series_of(
            vec![
                event(0, EventKind::Submit, 10, 1_000_000, Direction::Buy),
                event(1, EventKind::Submit, 20, 1_000_000, Direction::Buy),
                event(2, EventKind::Submit, 40, 999_900, Direction::Buy),
                event(3, EventKind::Delete, 8, 1_000_100, Direction::Sell),
            ],
            2,
        );
        let lob1 = arrival_rate_features(&s, 10.0, ArrivalVariant::Level1).unwrap();
        let non = arrival_rate_features(&s, 10.0, ArrivalVariant::NonLevel1).unwrap();
        // row 0 has no prior book
        assert_eq!(lob1.data.row(3).to_vec(), vec![20.0, 0.0, 20.0, 0.0, 8.0, -8.0]);
        assert_eq!(non.data.row(3).to_vec(), vec![50.0, 0.0, 50.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_non_positive_window() {
        let s = series_of(vec![], 1);
        assert!(arrival_rate_features(&s, 0.0, ArrivalVariant::All).is_err());
        assert!(arrival_rate_features(&s, -1.0, ArrivalVariant::All).is_err());
    }
}
