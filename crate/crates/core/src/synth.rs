//! Synthetic LOBSTER-format sessions generated by the book engine.
//!
//! Every emitted snapshot is the engine's own depth view after the row's
//! event, so replaying a generated series reproduces it exactly. The
//! generator warms up a book of at most `warmup_levels` levels per side
//! before the first emitted row; replay seeded from row 0 then knows every
//! resting share.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::book_engine::{LiveBook, ReplayMode};
use crate::error::Result;
use crate::lobster_io::{
    write_messages, write_orderbook, Direction, EventBookSeries, EventKind, OrderEvent, Timestamp,
};
use crate::rng::substream;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rows: usize,
    pub seed: u64,
    pub depth: usize,
    /// Tick size in price units.
    pub tick: i64,
    pub start_price: i64,
    pub start_time: Timestamp,
    /// Mean inter-event gap.
    pub mean_gap_ns: f64,
    pub warmup_levels: usize,
    /// Mean number of events between order-flow regime changes.
    pub regime_length: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 10_000,
            seed: 0,
            depth: 10,
            tick: 100,
            start_price: 2_230_000,
            start_time: Timestamp(34_200 * 1_000_000_000),
            mean_gap_ns: 50_000_000.0,
            warmup_levels: 5,
            regime_length: 300.0,
        }
    }
}

struct Generator<R> {
    rng: R,
    book: LiveBook,
    live_bids: Vec<u64>,
    live_asks: Vec<u64>,
    next_id: u64,
    tick: i64,
    /// Probability that directional flow is buy-initiated.
    buy_pressure: f64,
}

const MIN_ORDERS_PER_SIDE: usize = 4;

impl<R: Rng> Generator<R> {
    fn live(&mut self, side: Direction) -> &mut Vec<u64> {
        match side {
            Direction::Buy => &mut self.live_bids,
            Direction::Sell => &mut self.live_asks,
        }
    }

    fn random_side(&mut self) -> Direction {
        if self.rng.random_bool(0.5) {
            Direction::Buy
        } else {
            Direction::Sell
        }
    }

    fn submit(&mut self, side: Direction, improve: bool) -> OrderEvent {
        let bid = self.book.best_bid().map(|l| l.price);
        let ask = self.book.best_ask().map(|l| l.price);
        let offset = self.rng.random_range(0..8i64) * self.tick;
        let price = match (side, bid, ask) {
            (Direction::Buy, Some(b), Some(a)) if improve && b + self.tick < a => b + self.tick,
            (Direction::Sell, Some(b), Some(a)) if improve && a - self.tick > b => a - self.tick,
            (Direction::Buy, Some(b), _) => b - offset,
            (Direction::Sell, _, Some(a)) => a + offset,
            (Direction::Buy, None, Some(a)) => a - self.tick - offset,
            (Direction::Sell, Some(b), None) => b + self.tick + offset,
            _ => unreachable!("generator keeps both sides populated"),
        };
        let size = 100 * self.rng.random_range(1..=5u64) + if self.rng.random_bool(0.2) { self.rng.random_range(1..100) } else { 0 };
        let id = self.next_id;
        self.next_id += 1;
        self.live(side).push(id);
        OrderEvent {
            time: Timestamp(0),
            kind: EventKind::Submit,
            order_id: id,
            size,
            price,
            direction: side,
        }
    }

    fn reduce(&mut self, kind: EventKind, id: u64, side: Direction, size: u64, price: i64) -> OrderEvent {
        let remaining = self.book.order_size(id).expect("live order");
        let size = if kind == EventKind::Delete { remaining } else { size.min(remaining) };
        if size == remaining {
            self.live(side).retain(|&x| x != id);
        }
        OrderEvent {
            time: Timestamp(0),
            kind,
            order_id: id,
            size,
            price,
            direction: side,
        }
    }

    fn price_of(&self, id: u64, side: Direction) -> i64 {
        // queue lookup is linear; fine for a generator
        let best = match side {
            Direction::Buy => self.book.best_bid(),
            Direction::Sell => self.book.best_ask(),
        }
        .expect("side populated")
        .price;
        let step = match side {
            Direction::Buy => -self.tick,
            Direction::Sell => self.tick,
        };
        let mut p = best;
        loop {
            if self.book.queue_at(side, p).contains(&id) {
                return p;
            }
            p += step;
        }
    }

    fn step(&mut self) -> OrderEvent {
        let side = self.random_side();
        if self.live(side).len() < MIN_ORDERS_PER_SIDE {
            return self.submit(side, false);
        }
        let u: f64 = self.rng.random();
        let directional = if self.rng.random_bool(self.buy_pressure) {
            Direction::Buy
        } else {
            Direction::Sell
        };
        if u < 0.42 {
            let improve = self.rng.random_bool(0.15);
            let side = if improve { directional } else { side };
            self.submit(side, improve)
        } else if u < 0.82 {
            let n = self.live(side).len();
            let pick = self.rng.random_range(0..n);
            let id = self.live(side)[pick];
            let price = self.price_of(id, side);
            if self.rng.random_bool(0.2) {
                let size = self.rng.random_range(1..=100);
                self.reduce(EventKind::PartialCancel, id, side, size, price)
            } else {
                self.reduce(EventKind::Delete, id, side, 0, price)
            }
        } else if u < 0.97 {
            // aggressor `directional` consumes the opposite side's queue head
            let resting = directional.opposite();
            if self.live(resting).len() < MIN_ORDERS_PER_SIDE {
                return self.submit(resting, false);
            }
            let best = match resting {
                Direction::Buy => self.book.best_bid(),
                Direction::Sell => self.book.best_ask(),
            }
            .expect("side populated");
            let head = self.book.queue_at(resting, best.price)[0];
            let remaining = self.book.order_size(head).expect("live order");
            let size = if self.rng.random_bool(0.5) { remaining } else { self.rng.random_range(1..=remaining) };
            self.reduce(EventKind::ExecuteVisible, head, resting, size, best.price)
        } else {
            let price = match side {
                Direction::Buy => self.book.best_bid(),
                Direction::Sell => self.book.best_ask(),
            }
            .expect("side populated")
            .price;
            OrderEvent {
                time: Timestamp(0),
                kind: EventKind::ExecuteHidden,
                order_id: 0,
                size: self.rng.random_range(1..=200),
                price,
                direction: side,
            }
        }
    }
}

/// Generates a session of `config.rows` rows.
pub fn generate(config: &SynthConfig) -> EventBookSeries {
    let mut gen = Generator {
        rng: substream(config.seed, "synth"),
        book: LiveBook::new(ReplayMode::Strict),
        live_bids: Vec::new(),
        live_asks: Vec::new(),
        next_id: 10_000_000,
        tick: config.tick,
        buy_pressure: 0.5,
    };

    let warmup = config.warmup_levels.clamp(1, config.depth.saturating_sub(1).max(1));
    for level in 0..warmup as i64 {
        for side in [Direction::Buy, Direction::Sell] {
            let price = match side {
                Direction::Buy => config.start_price - config.tick * (level + 1),
                Direction::Sell => config.start_price + config.tick * (level + 1),
            };
            let id = gen.next_id;
            gen.next_id += 1;
            gen.live(side).push(id);
            let size = 100 * gen.rng.random_range(1..=5u64);
            gen.book
                .apply_event(&OrderEvent {
                    time: Timestamp(0),
                    kind: EventKind::Submit,
                    order_id: id,
                    size,
                    price,
                    direction: side,
                })
                .expect("fresh id");
        }
    }

    let gap = Exp::new(1.0 / config.mean_gap_ns.max(1.0)).expect("positive rate");
    let mut time = config.start_time.nanos();
    let mut events = Vec::with_capacity(config.rows);
    let mut books = Vec::with_capacity(config.rows);
    for _ in 0..config.rows {
        if gen.rng.random_bool((1.0 / config.regime_length.max(1.0)).min(1.0)) {
            gen.buy_pressure = gen.rng.random_range(0.15..0.85);
        }
        let mut event = gen.step();
        time += gap.sample(&mut gen.rng) as u64;
        event.time = Timestamp(time);
        gen.book.apply_event(&event).expect("generator emits consistent events");
        events.push(event);
        books.push(gen.book.depth_view(config.depth));
    }

    let mut series = EventBookSeries::new(events, books, config.depth).expect("aligned by construction");
    series.symbol = Some("SYNTH".into());
    series
}

/// Writes `series` as a LOBSTER-named message/orderbook pair in `dir`.
pub fn write_lobster_pair(series: &EventBookSeries, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let symbol = series.symbol.as_deref().unwrap_or("SYNTH");
    let date = series
        .session_date
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(2012, 6, 21).expect("valid date"));
    let start = series.events.first().map_or(0, |e| e.time.nanos() / 1_000_000);
    let end = series.events.last().map_or(0, |e| e.time.nanos() / 1_000_000 + 1);
    let stem = format!("{symbol}_{date}_{start}_{end}");
    let msg = dir.join(format!("{stem}_message_{}.csv", series.depth));
    let book = dir.join(format!("{stem}_orderbook_{}.csv", series.depth));
    write_messages(&series.events, BufWriter::new(File::create(&msg)?))?;
    write_orderbook(&series.books, BufWriter::new(File::create(&book)?))?;
    Ok((msg, book))
}
