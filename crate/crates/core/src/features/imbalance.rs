use ndarray::Array2;

use super::{FeatureMatrix, FeatureOptions, FeatureSet};
use crate::error::{Error, Result};
use crate::lobster_io::{BookSnapshot, EventBookSeries};

/// `(buy - sell) / (buy + sell)`; `None` when both volumes are zero.
pub fn imbalance_ratio(buy: u64, sell: u64) -> Option<f64> {
    let total = buy + sell;
    (total > 0).then(|| (buy as f64 - sell as f64) / total as f64)
}

/// Volume imbalance at `level` (1-based); bid volume is the buy side.
pub fn imbalance(snapshot: &BookSnapshot, level: usize) -> Result<f64> {
    let buy = snapshot.bid(level).map_or(0, |l| l.size);
    let sell = snapshot.ask(level).map_or(0, |l| l.size);
    if snapshot.bid(level).is_none() || snapshot.ask(level).is_none() {
        return Err(Error::UndefinedImbalance { level });
    }
    imbalance_ratio(buy, sell).ok_or(Error::UndefinedImbalance { level })
}

/// Imbalance at levels `1..=levels`. Undefined values are emitted as 0
/// (optionally followed by a 0/1 validity column).
pub fn imbalance_features(series: &EventBookSeries, levels: usize, options: FeatureOptions) -> Result<FeatureMatrix> {
    if levels == 0 {
        return Err(Error::InvalidParameter("imbalance level must be at least 1".into()));
    }
    if levels > series.depth {
        return Err(Error::DepthExceeded {
            requested: levels,
            available: series.depth,
        });
    }
    let mut columns = Vec::new();
    for l in 1..=levels {
        columns.push(format!("imb_{l}"));
        if options.imbalance_validity {
            columns.push(format!("imb_{l}_valid"));
        }
    }
    let mut values = Vec::with_capacity(series.len() * columns.len());
    for book in &series.books {
        for l in 1..=levels {
            let v = imbalance(book, l).ok();
            values.push(v.unwrap_or(0.0));
            if options.imbalance_validity {
                values.push(if v.is_some() { 1.0 } else { 0.0 });
            }
        }
    }
    let data = Array2::from_shape_vec((series.len(), columns.len()), values).expect("shape matches");
    FeatureMatrix::new(columns, data, FeatureSet::Imbalance { levels }, (0..series.len()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_support::*;
    use crate::lobster_io::{Direction, EventKind, Level};
    use proptest::prelude::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(imbalance_ratio(100, 100), Some(0.0));
        assert_eq!(imbalance_ratio(300, 100), Some(0.5));
        assert_eq!(imbalance_ratio(50, 0), Some(1.0));
        assert_eq!(imbalance_ratio(0, 0), None);
    }

    #[test]
    fn snapshot_imbalance() {
        let b = BookSnapshot::new(
            2,
            vec![Level { price: 110, size: 100 }],
            vec![Level { price: 100, size: 300 }, Level { price: 90, size: 10 }],
        )
        .unwrap();
        assert_eq!(imbalance(&b, 1).unwrap(), 0.5);
        assert!(matches!(imbalance(&b, 2), Err(Error::UndefinedImbalance { level: 2 })));
    }

    #[test]
    fn balanced_book_gives_zero_rows() {
        let s = series_of(vec![event(1, EventKind::Submit, 1, 1_000_000, Direction::Buy); 3], 10);
        let one = imbalance_features(&s, 1, FeatureOptions::default()).unwrap();
        assert_eq!(one.n_cols(), 1);
        let ten = imbalance_features(&s, 10, FeatureOptions::default()).unwrap();
        assert_eq!(ten.n_cols(), 10);
        assert!(ten.data.iter().all(|&v| v == 0.0));
        let with_flags = imbalance_features(&s, 2, FeatureOptions { imbalance_validity: true, ..Default::default() }).unwrap();
        assert_eq!(with_flags.columns, ["imb_1", "imb_1_valid", "imb_2", "imb_2_valid"]);
        assert_eq!(with_flags.data.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert!(imbalance_features(&s, 11, FeatureOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_antisymmetric(buy in 0u64..1_000_000, sell in 0u64..1_000_000) {
            if let Some(v) = imbalance_ratio(buy, sell) {
                prop_assert!((-1.0..=1.0).contains(&v));
                prop_assert_eq!(imbalance_ratio(sell, buy).unwrap(), -v);
            } else {
                prop_assert!(buy == 0 && sell == 0);
            }
        }
    }
}
