//! Mutable order book keyed by order id, event application and
//! replay validation against provided snapshots.
//!
//! A depth-limited LOBSTER file omits flow deeper than its last level, and
//! orders resting before the first row have unknown ids. Volume seeded from
//! a snapshot is therefore held as anonymous per-level volume; in lenient
//! mode, events that name an unknown id draw it down at the event price.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lobster_io::{
    BookSnapshot, Direction, EventBookSeries, EventKind, Level, OrderEvent, PRICE_SCALE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplayMode {
    /// Unknown ids, duplicate submits and over-cancels are errors.
    Strict,
    /// Unknown ids act on anonymous level volume; over-cancels are clamped.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RestingOrder {
    price: i64,
    size: u64,
    direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct PriceLevel {
    /// Known order ids in arrival order.
    queue: VecDeque<u64>,
    known_volume: u64,
    anonymous: u64,
}

impl PriceLevel {
    fn total(&self) -> u64 {
        self.known_volume + self.anonymous
    }

    fn is_empty(&self) -> bool {
        self.total() == 0 && self.queue.is_empty()
    }
}

/// Order book with per-order state and per-level aggregates.
#[derive(Debug, Clone, Default)]
pub struct LiveBook {
    orders: HashMap<u64, RestingOrder>,
    bids: BTreeMap<i64, PriceLevel>,
    asks: BTreeMap<i64, PriceLevel>,
    mode: ReplayMode,
}

impl LiveBook {
    pub fn new(mode: ReplayMode) -> Self {
        LiveBook {
            mode,
            ..LiveBook::default()
        }
    }

    /// Book whose levels hold the snapshot's volume as anonymous volume.
    pub fn from_snapshot(snapshot: &BookSnapshot, mode: ReplayMode) -> Self {
        let mut book = LiveBook::new(mode);
        book.reset_to(snapshot);
        book
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    /// Drops all state and reseeds from `snapshot`.
    pub fn reset_to(&mut self, snapshot: &BookSnapshot) {
        self.orders.clear();
        self.bids.clear();
        self.asks.clear();
        for l in snapshot.asks() {
            self.asks.entry(l.price).or_default().anonymous += l.size;
        }
        for l in snapshot.bids() {
            self.bids.entry(l.price).or_default().anonymous += l.size;
        }
    }

    fn side_mut(&mut self, direction: Direction) -> &mut BTreeMap<i64, PriceLevel> {
        match direction {
            Direction::Buy => &mut self.bids,
            Direction::Sell => &mut self.asks,
        }
    }

    pub fn order_count(&self) -> usize {
        self.orders.len()
    }

    /// Remaining visible size of a known order.
    pub fn order_size(&self, order_id: u64) -> Option<u64> {
        self.orders.get(&order_id).map(|o| o.size)
    }

    /// Known order ids at `price` on `direction`'s side, oldest first.
    pub fn queue_at(&self, direction: Direction, price: i64) -> Vec<u64> {
        let side = match direction {
            Direction::Buy => &self.bids,
            Direction::Sell => &self.asks,
        };
        side.get(&price).map(|l| l.queue.iter().copied().collect()).unwrap_or_default()
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.iter().next_back().map(|(&price, l)| Level {
            price,
            size: l.total(),
        })
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.iter().next().map(|(&price, l)| Level {
            price,
            size: l.total(),
        })
    }

    /// Number of populated levels on each side, `(asks, bids)`.
    pub fn level_counts(&self) -> (usize, usize) {
        (self.asks.len(), self.bids.len())
    }

    /// Top `depth` levels per side as a snapshot.
    pub fn depth_view(&self, depth: usize) -> BookSnapshot {
        let asks = self
            .asks
            .iter()
            .take(depth)
            .map(|(&price, l)| Level {
                price,
                size: l.total(),
            })
            .collect();
        let bids = self
            .bids
            .iter()
            .rev()
            .take(depth)
            .map(|(&price, l)| Level {
                price,
                size: l.total(),
            })
            .collect();
        BookSnapshot::new(depth, asks, bids).expect("levels truncated to depth")
    }

    pub fn apply_event(&mut self, event: &OrderEvent) -> Result<()> {
        match event.kind {
            EventKind::Submit => self.submit(event),
            EventKind::PartialCancel | EventKind::ExecuteVisible => self.reduce(event, false),
            EventKind::Delete => self.reduce(event, true),
            EventKind::ExecuteHidden | EventKind::Halt => Ok(()),
        }
    }

    fn submit(&mut self, event: &OrderEvent) -> Result<()> {
        if self.orders.contains_key(&event.order_id) {
            match self.mode {
                ReplayMode::Strict => {
                    return Err(Error::Book(format!("duplicate order id {}", event.order_id)))
                }
                ReplayMode::Lenient => self.remove_order(event.order_id),
            }
        }
        if event.size == 0 {
            return Ok(());
        }
        self.orders.insert(
            event.order_id,
            RestingOrder {
                price: event.price,
                size: event.size,
                direction: event.direction,
            },
        );
        let level = self.side_mut(event.direction).entry(event.price).or_default();
        level.queue.push_back(event.order_id);
        level.known_volume += event.size;
        Ok(())
    }

    fn remove_order(&mut self, order_id: u64) {
        if let Some(order) = self.orders.remove(&order_id) {
            let side = self.side_mut(order.direction);
            if let Some(level) = side.get_mut(&order.price) {
                if let Some(pos) = level.queue.iter().position(|&id| id == order_id) {
                    level.queue.remove(pos);
                }
                level.known_volume -= order.size;
                if level.is_empty() {
                    side.remove(&order.price);
                }
            }
        }
    }

    /// Partial cancel / visible execution (`delete == false`) or deletion.
    fn reduce(&mut self, event: &OrderEvent, delete: bool) -> Result<()> {
        let strict = self.mode == ReplayMode::Strict;
        let Some(order) = self.orders.get_mut(&event.order_id) else {
            if strict {
                return Err(Error::Book(format!("unknown order id {}", event.order_id)));
            }
            let side = self.side_mut(event.direction);
            if let Some(level) = side.get_mut(&event.price) {
                level.anonymous = level.anonymous.saturating_sub(event.size);
                if level.is_empty() {
                    side.remove(&event.price);
                }
            }
            return Ok(());
        };

        if event.size > order.size && strict {
            return Err(Error::Book(format!(
                "order {} has {} remaining, event removes {}",
                event.order_id, order.size, event.size
            )));
        }
        let removed = if delete { order.size } else { event.size.min(order.size) };
        if removed == order.size {
            self.remove_order(event.order_id);
        } else {
            order.size -= removed;
            let (price, direction) = (order.price, order.direction);
            let level = self
                .side_mut(direction)
                .get_mut(&price)
                .expect("resting order has a level");
            level.known_volume -= removed;
        }
        Ok(())
    }

    /// Recounts every level from its resting orders.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (side, levels, dir) in [("bid", &self.bids, Direction::Buy), ("ask", &self.asks, Direction::Sell)] {
            for (&price, level) in levels {
                let sum: u64 = level.queue.iter().map(|id| self.orders[id].size).sum();
                if sum != level.known_volume {
                    return Err(format!("{side} level {price}: aggregate {} != recount {sum}", level.known_volume));
                }
                if level.is_empty() {
                    return Err(format!("{side} level {price} is empty but present"));
                }
                if level.queue.iter().any(|id| self.orders[id].direction != dir || self.orders[id].price != price) {
                    return Err(format!("{side} level {price} holds a foreign order"));
                }
            }
        }
        let queued: usize = self.bids.values().chain(self.asks.values()).map(|l| l.queue.len()).sum();
        if queued != self.orders.len() {
            return Err(format!("{queued} queued ids vs {} orders", self.orders.len()));
        }
        Ok(())
    }
}

/// Outcome of replaying a series against its own snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_compared: usize,
    pub exact_matches: usize,
    pub mismatches: usize,
    pub resynchronizations: usize,
    /// 0-based series row of the first mismatch.
    pub first_divergence_row: Option<usize>,
}

impl ValidationReport {
    pub const CSV_HEADER: &'static str =
        "rows_compared,exact_matches,mismatches,resynchronizations,first_divergence_row";

    pub fn mismatch_rate(&self) -> f64 {
        if self.rows_compared == 0 {
            0.0
        } else {
            self.mismatches as f64 / self.rows_compared as f64
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.rows_compared,
            self.exact_matches,
            self.mismatches,
            self.resynchronizations,
            self.first_divergence_row.map(|r| r.to_string()).unwrap_or_default()
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n{}", Self::CSV_HEADER, self.to_csv_row())
    }
}

/// Seeds a lenient book from the first snapshot, applies each later event
/// and compares the depth view with that row's snapshot.
///
/// A diverged row is counted and the book is resynchronized from the
/// provided snapshot. The event-derived book is kept for one more row: if it
/// matches there while the resynchronized one does not, the diverged
/// snapshot was an isolated bad row and the event-derived book is restored.
pub fn replay_validate(series: &EventBookSeries) -> ValidationReport {
    let mut report = ValidationReport::default();
    let Some(first) = series.books.first() else {
        return report;
    };
    let depth = series.depth;
    let mut book = LiveBook::from_snapshot(first, ReplayMode::Lenient);
    let mut fallback: Option<LiveBook> = None;
    for (row, (event, expected)) in series.events.iter().zip(&series.books).enumerate().skip(1) {
        report.rows_compared += 1;
        let applied = book.apply_event(event);
        if applied.is_ok() && book.depth_view(depth) == *expected {
            report.exact_matches += 1;
            fallback = None;
            continue;
        }
        if let Some(mut shadow) = fallback.take() {
            if shadow.apply_event(event).is_ok() && shadow.depth_view(depth) == *expected {
                report.exact_matches += 1;
                book = shadow;
                continue;
            }
        }
        report.mismatches += 1;
        report.first_divergence_row.get_or_insert(row);
        if applied.is_ok() {
            fallback = Some(book.clone());
        }
        book.reset_to(expected);
        report.resynchronizations += 1;
    }
    report
}

/// Mid-quote in dollars.
pub fn mid_quote(snapshot: &BookSnapshot) -> Result<f64> {
    let (ask, bid) = top_of_book(snapshot)?;
    Ok((ask + bid) as f64 / (2 * PRICE_SCALE) as f64)
}

/// Best ask minus best bid, in price units.
pub fn spread(snapshot: &BookSnapshot) -> Result<i64> {
    let (ask, bid) = top_of_book(snapshot)?;
    Ok(ask - bid)
}

fn top_of_book(snapshot: &BookSnapshot) -> Result<(i64, i64)> {
    let ask = snapshot.best_ask().ok_or(Error::UndefinedMid("ask side empty"))?;
    let bid = snapshot.best_bid().ok_or(Error::UndefinedMid("bid side empty"))?;
    Ok((ask.price, bid.price))
}
