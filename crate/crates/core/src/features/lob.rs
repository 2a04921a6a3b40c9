use ndarray::Array2;

use super::{FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::lobster_io::{price_to_dollars, EventBookSeries, ASK_SENTINEL, BID_SENTINEL};

/// Ask/bid price (dollars) and volume for levels `1..=depth`, in orderbook
/// file column order. Absent levels carry the provider's sentinel price
/// and zero volume.
pub fn lob_features(series: &EventBookSeries, depth: usize) -> Result<FeatureMatrix> {
    if depth == 0 {
        return Err(Error::InvalidParameter("LOB depth must be at least 1".into()));
    }
    if depth > series.depth {
        return Err(Error::DepthExceeded {
            requested: depth,
            available: series.depth,
        });
    }
    let columns: Vec<String> = (1..=depth)
        .flat_map(|l| {
            [
                format!("ask_price_{l}"),
                format!("ask_size_{l}"),
                format!("bid_price_{l}"),
                format!("bid_size_{l}"),
            ]
        })
        .collect();
    let mut values = Vec::with_capacity(series.len() * columns.len());
    for book in &series.books {
        for l in 1..=depth {
            let (ap, asz) = book.ask(l).map_or((ASK_SENTINEL, 0), |x| (x.price, x.size));
            let (bp, bsz) = book.bid(l).map_or((BID_SENTINEL, 0), |x| (x.price, x.size));
            values.extend([price_to_dollars(ap), asz as f64, price_to_dollars(bp), bsz as f64]);
        }
    }
    let data = Array2::from_shape_vec((series.len(), columns.len()), values).expect("shape matches");
    FeatureMatrix::new(columns, data, FeatureSet::Lob { depth }, (0..series.len()).collect())
}
