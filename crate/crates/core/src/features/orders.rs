use ndarray::Array2;

use super::{FeatureMatrix, FeatureOptions, FeatureSet, OrderVariant};
use crate::error::Result;
use crate::lobster_io::{price_to_dollars, EventBookSeries, EventKind, OrderEvent};

#[derive(Clone, Copy)]
enum Field {
    Time,
    Type,
    Id,
    Size,
    Price,
    Direction,
}

fn fields(variant: OrderVariant) -> &'static [Field] {
    use Field::*;
    match variant {
        OrderVariant::All => &[Time, Type, Id, Size, Price, Direction],
        OrderVariant::Time => &[Time],
        OrderVariant::Type => &[Type],
        OrderVariant::Direction => &[Direction],
        OrderVariant::Id => &[Id],
        OrderVariant::Details => &[Size, Price, Direction],
    }
}

fn push_field(out: &mut Vec<f64>, e: &OrderEvent, field: Field, one_hot: bool) {
    match field {
        Field::Time => out.push(e.time.as_secs_f64()),
        Field::Type if one_hot => out.extend(EventKind::ALL.iter().map(|k| f64::from(u8::from(*k == e.kind)))),
        Field::Type => out.push(f64::from(e.kind.code())),
        Field::Id => out.push(e.order_id as f64),
        Field::Size => out.push(e.size as f64),
        Field::Price => out.push(price_to_dollars(e.price)),
        Field::Direction => out.push(f64::from(e.direction.sign())),
    }
}

/// Message-file columns: time in seconds, kind code (or one-hot), id,
/// size, price in dollars and direction as +1/-1.
pub fn order_features(series: &EventBookSeries, variant: OrderVariant, options: FeatureOptions) -> Result<FeatureMatrix> {
    let fields = fields(variant);
    let mut columns = Vec::new();
    for f in fields {
        match f {
            Field::Time => columns.push("time".to_string()),
            Field::Type if options.one_hot_type => {
                columns.extend(EventKind::ALL.iter().map(|k| format!("type_{}", k.code())))
            }
            Field::Type => columns.push("type".to_string()),
            Field::Id => columns.push("id".to_string()),
            Field::Size => columns.push("size".to_string()),
            Field::Price => columns.push("price".to_string()),
            Field::Direction => columns.push("direction".to_string()),
        }
    }
    let mut values = Vec::with_capacity(series.len() * columns.len());
    for e in &series.events {
        for &f in fields {
            push_field(&mut values, e, f, options.one_hot_type);
        }
    }
    let data = Array2::from_shape_vec((series.len(), columns.len()), values).expect("shape matches");
    FeatureMatrix::new(columns, data, FeatureSet::Orders(variant), (0..series.len()).collect())
}
