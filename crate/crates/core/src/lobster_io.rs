//! LOBSTER message/orderbook file ingestion.
//!
//! Message files carry six comma-separated columns per row
//! (`time,kind,order_id,size,price,direction`); orderbook files carry
//! `4 * depth` columns ordered `ask_price_1,ask_size_1,bid_price_1,bid_size_1,...`.
//! Neither has a header. Prices are integers in 1/10000 dollar.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Price units per dollar.
pub const PRICE_SCALE: i64 = 10_000;
/// Price LOBSTER writes for an unpopulated ask level.
pub const ASK_SENTINEL: i64 = 9_999_999_999;
/// Price LOBSTER writes for an unpopulated bid level.
pub const BID_SENTINEL: i64 = -9_999_999_999;
pub const DEFAULT_DEPTH: usize = 10;

const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Converts integer price units to dollars.
pub fn price_to_dollars(units: i64) -> f64 {
    units as f64 / PRICE_SCALE as f64
}

/// Event time as nanoseconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_nanos(nanos: u64) -> Self {
        Timestamp(nanos)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * NANOS_PER_SEC as f64).round() as u64)
    }

    pub fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        (self.0 / NANOS_PER_SEC) as f64 + (self.0 % NANOS_PER_SEC) as f64 / NANOS_PER_SEC as f64
    }
}

impl FromStr for Timestamp {
    type Err = String;

    /// Parses decimal seconds exactly. Digits past nanoseconds are truncated.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        let bad = || format!("invalid time `{s}`");
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let secs: u64 = whole.parse().map_err(|_| bad())?;
        let mut nanos: u64 = 0;
        for (i, b) in frac.bytes().take(9).enumerate() {
            nanos += u64::from(b - b'0') * 10u64.pow(8 - i as u32);
        }
        secs.checked_mul(NANOS_PER_SEC)
            .and_then(|n| n.checked_add(nanos))
            .map(Timestamp)
            .ok_or_else(bad)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / NANOS_PER_SEC, self.0 % NANOS_PER_SEC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum EventKind {
    /// New limit order.
    Submit = 1,
    /// Partial cancellation of a resting order.
    PartialCancel = 2,
    /// Full deletion of a resting order.
    Delete = 3,
    /// Execution against a visible resting order.
    ExecuteVisible = 4,
    /// Execution against a hidden order; the visible book is untouched.
    ExecuteHidden = 5,
    /// Trading halt indicator.
    Halt = 7,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Submit,
        EventKind::PartialCancel,
        EventKind::Delete,
        EventKind::ExecuteVisible,
        EventKind::ExecuteHidden,
        EventKind::Halt,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(EventKind::Submit),
            2 => Some(EventKind::PartialCancel),
            3 => Some(EventKind::Delete),
            4 => Some(EventKind::ExecuteVisible),
            5 => Some(EventKind::ExecuteHidden),
            7 => Some(EventKind::Halt),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Kinds 1-5 reference a priced order; halts do not.
    pub fn is_priced(self) -> bool {
        self != EventKind::Halt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Buy,
    Sell,
}

impl Direction {
    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            1 => Some(Direction::Buy),
            -1 => Some(Direction::Sell),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Direction::Buy => 1,
            Direction::Sell => -1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Buy => Direction::Sell,
            Direction::Sell => Direction::Buy,
        }
    }
}

/// One message-file row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub time: Timestamp,
    pub kind: EventKind,
    pub order_id: u64,
    pub size: u64,
    pub price: i64,
    pub direction: Direction,
}

impl OrderEvent {
    pub fn parse_row(line: &str, row: usize) -> Result<Self> {
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields
                .next()
                .map(str::trim)
                .ok_or_else(|| Error::parse(row, format!("missing field `{name}`")))
        };
        let time_s = next("time")?;
        let kind_s = next("kind")?;
        let id_s = next("order_id")?;
        let size_s = next("size")?;
        let price_s = next("price")?;
        let dir_s = next("direction")?;
        if fields.next().is_some() {
            return Err(Error::parse(row, "expected 6 columns"));
        }

        let time = time_s.parse::<Timestamp>().map_err(|m| Error::parse(row, m))?;
        let code: u8 = kind_s
            .parse()
            .map_err(|_| Error::parse(row, format!("invalid event kind `{kind_s}`")))?;
        let kind = EventKind::from_code(code)
            .ok_or_else(|| Error::parse(row, format!("unknown event kind {code}")))?;
        let order_id = parse_field::<u64>(id_s, "order_id", row)?;
        let size = parse_field::<u64>(size_s, "size", row)?;
        let price = parse_field::<i64>(price_s, "price", row)?;
        let dir_code = parse_field::<i8>(dir_s, "direction", row)?;
        let direction = Direction::from_code(dir_code)
            .ok_or_else(|| Error::parse(row, format!("invalid direction {dir_code}")))?;

        Ok(OrderEvent {
            time,
            kind,
            order_id,
            size,
            price,
            direction,
        })
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.time,
            self.kind.code(),
            self.order_id,
            self.size,
            self.price,
            self.direction.sign()
        )
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.kind.is_priced() && self.price <= 0 {
            return Err(format!("non-positive price {} for kind {}", self.price, self.kind.code()));
        }
        Ok(())
    }
}

fn parse_field<T: FromStr>(s: &str, name: &str, row: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(row, format!("invalid {name} `{s}`")))
}

/// One populated price level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Level {
    pub price: i64,
    pub size: u64,
}

/// One orderbook-file row. Only populated levels are stored, best first;
/// levels past `asks.len()` / `bids.len()` are absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    depth: usize,
    asks: Vec<Level>,
    bids: Vec<Level>,
}

impl BookSnapshot {
    pub fn new(depth: usize, asks: Vec<Level>, bids: Vec<Level>) -> Result<Self> {
        if asks.len() > depth || bids.len() > depth {
            return Err(Error::Book(format!(
                "{} ask / {} bid levels exceed depth {depth}",
                asks.len(),
                bids.len()
            )));
        }
        Ok(BookSnapshot { depth, asks, bids })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn asks(&self) -> &[Level] {
        &self.asks
    }

    pub fn bids(&self) -> &[Level] {
        &self.bids
    }

    /// Ask level `level` (1-based), `None` when absent.
    pub fn ask(&self, level: usize) -> Option<Level> {
        level.checked_sub(1).and_then(|i| self.asks.get(i)).copied()
    }

    /// Bid level `level` (1-based), `None` when absent.
    pub fn bid(&self, level: usize) -> Option<Level> {
        level.checked_sub(1).and_then(|i| self.bids.get(i)).copied()
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }

    /// Best price on the side a resting order of `direction` would join.
    pub fn best_on_side(&self, direction: Direction) -> Option<Level> {
        match direction {
            Direction::Buy => self.best_bid(),
            Direction::Sell => self.best_ask(),
        }
    }

    /// Checks price monotonicity, positive sizes and a positive spread.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.asks.iter().chain(&self.bids).any(|l| l.size == 0) {
            return Err("zero size on a populated level".into());
        }
        if self.asks.windows(2).any(|w| w[0].price >= w[1].price) {
            return Err("ask prices not strictly increasing".into());
        }
        if self.bids.windows(2).any(|w| w[0].price <= w[1].price) {
            return Err("bid prices not strictly decreasing".into());
        }
        if let (Some(a), Some(b)) = (self.best_ask(), self.best_bid()) {
            if b.price >= a.price {
                return Err(format!("crossed book: bid {} >= ask {}", b.price, a.price));
            }
        }
        Ok(())
    }

    pub fn parse_row(line: &str, depth: usize, row: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 * depth {
            return Err(Error::parse(
                row,
                format!("expected {} columns for depth {depth}, got {}", 4 * depth, fields.len()),
            ));
        }
        let mut asks = Vec::with_capacity(depth);
        let mut bids = Vec::with_capacity(depth);
        let mut ask_gap = false;
        let mut bid_gap = false;
        for chunk in fields.chunks_exact(4) {
            let ask_price = parse_field::<i64>(chunk[0], "ask price", row)?;
            let ask_size = parse_field::<u64>(chunk[1], "ask size", row)?;
            let bid_price = parse_field::<i64>(chunk[2], "bid price", row)?;
            let bid_size = parse_field::<u64>(chunk[3], "bid size", row)?;
            if ask_price == ASK_SENTINEL {
                ask_gap = true;
            } else if ask_gap {
                return Err(Error::InvalidBook {
                    row,
                    message: "populated ask level after an absent one".into(),
                });
            } else {
                asks.push(Level {
                    price: ask_price,
                    size: ask_size,
                });
            }
            if bid_price == BID_SENTINEL {
                bid_gap = true;
            } else if bid_gap {
                return Err(Error::InvalidBook {
                    row,
                    message: "populated bid level after an absent one".into(),
                });
            } else {
                bids.push(Level {
                    price: bid_price,
                    size: bid_size,
                });
            }
        }
        Ok(BookSnapshot { depth, asks, bids })
    }

    pub fn to_csv_row(&self) -> String {
        let mut out = String::with_capacity(self.depth * 32);
        for level in 1..=self.depth {
            let (ap, asz) = self
                .ask(level)
                .map_or((ASK_SENTINEL, 0), |l| (l.price, l.size));
            let (bp, bsz) = self
                .bid(level)
                .map_or((BID_SENTINEL, 0), |l| (l.price, l.size));
            if level > 1 {
                out.push(',');
            }
            out.push_str(&format!("{ap},{asz},{bp},{bsz}"));
        }
        out
    }
}

/// How invariant violations are handled while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValidationMode {
    /// Violations are errors.
    #[default]
    Strict,
    /// Violations are logged and the row is kept.
    Warn,
    /// No invariant checks; malformed fields are still errors.
    Off,
}

impl FromStr for ValidationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(ValidationMode::Strict),
            "warn" => Ok(ValidationMode::Warn),
            "off" => Ok(ValidationMode::Off),
            other => Err(Error::InvalidParameter(format!("validation mode `{other}`"))),
        }
    }
}

impl fmt::Display for ValidationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationMode::Strict => "strict",
            ValidationMode::Warn => "warn",
            ValidationMode::Off => "off",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub validation: ValidationMode,
    /// Allowed backwards step in event time before a row is rejected.
    pub time_tolerance_ns: u64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            validation: ValidationMode::Strict,
            time_tolerance_ns: 0,
        }
    }
}

/// Reads the next non-blank line; returns its 1-based line number.
fn next_line<R: BufRead>(reader: &mut R, buf: &mut String, line_no: &mut usize) -> Result<bool> {
    loop {
        buf.clear();
        if reader.read_line(buf)? == 0 {
            return Ok(false);
        }
        *line_no += 1;
        let trimmed_len = buf.trim_end_matches(['\n', '\r']).len();
        buf.truncate(trimmed_len);
        if !buf.trim().is_empty() {
            return Ok(true);
        }
    }
}

fn report(mode: ValidationMode, err: Error) -> Result<()> {
    match mode {
        ValidationMode::Strict => Err(err),
        ValidationMode::Warn => {
            warn!("{err}");
            Ok(())
        }
        ValidationMode::Off => Ok(()),
    }
}

/// Streaming message-file parser. Holds one line in memory at a time.
pub struct MessageReader<R> {
    reader: R,
    buf: String,
    line_no: usize,
    last_time: Option<Timestamp>,
    options: ParseOptions,
    done: bool,
}

impl<R: BufRead> MessageReader<R> {
    pub fn new(reader: R, options: ParseOptions) -> Self {
        MessageReader {
            reader,
            buf: String::new(),
            line_no: 0,
            last_time: None,
            options,
            done: false,
        }
    }

    fn read_one(&mut self) -> Result<Option<OrderEvent>> {
        if !next_line(&mut self.reader, &mut self.buf, &mut self.line_no)? {
            return Ok(None);
        }
        let row = self.line_no;
        let event = OrderEvent::parse_row(&self.buf, row)?;
        if self.options.validation != ValidationMode::Off {
            if let Err(m) = event.check() {
                report(self.options.validation, Error::parse(row, m))?;
            }
            if let Some(prev) = self.last_time {
                if event.time.0 + self.options.time_tolerance_ns < prev.0 {
                    report(
                        self.options.validation,
                        Error::parse(row, format!("time regression: {} after {}", event.time, prev)),
                    )?;
                }
            }
        }
        self.last_time = Some(self.last_time.map_or(event.time, |t| t.max(event.time)));
        Ok(Some(event))
    }
}

impl<R: BufRead> Iterator for MessageReader<R> {
    type Item = Result<OrderEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_one() {
            Ok(Some(e)) => Some(Ok(e)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Streaming orderbook-file parser.
pub struct BookReader<R> {
    reader: R,
    buf: String,
    line_no: usize,
    depth: usize,
    validation: ValidationMode,
    done: bool,
}

impl<R: BufRead> BookReader<R> {
    pub fn new(reader: R, depth: usize, validation: ValidationMode) -> Self {
        BookReader {
            reader,
            buf: String::new(),
            line_no: 0,
            depth,
            validation,
            done: false,
        }
    }

    fn read_one(&mut self) -> Result<Option<BookSnapshot>> {
        if !next_line(&mut self.reader, &mut self.buf, &mut self.line_no)? {
            return Ok(None);
        }
        let row = self.line_no;
        let book = BookSnapshot::parse_row(&self.buf, self.depth, row)?;
        if self.validation != ValidationMode::Off {
            if let Err(message) = book.validate() {
                report(self.validation, Error::InvalidBook { row, message })?;
            }
        }
        Ok(Some(book))
    }
}

impl<R: BufRead> Iterator for BookReader<R> {
    type Item = Result<BookSnapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_one() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn parse_message_file<R: BufRead>(source: R, options: ParseOptions) -> Result<Vec<OrderEvent>> {
    MessageReader::new(source, options).collect()
}

pub fn parse_orderbook_file<R: BufRead>(
    source: R,
    depth: usize,
    validation: ValidationMode,
) -> Result<Vec<BookSnapshot>> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    BookReader::new(source, depth, validation).collect()
}

pub fn write_messages<W: Write>(events: &[OrderEvent], mut out: W) -> Result<()> {
    for e in events {
        writeln!(out, "{}", e.to_csv_row())?;
    }
    Ok(())
}

pub fn write_orderbook<W: Write>(books: &[BookSnapshot], mut out: W) -> Result<()> {
    for b in books {
        writeln!(out, "{}", b.to_csv_row())?;
    }
    Ok(())
}

/// Row-aligned events and snapshots for one symbol-day.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBookSeries {
    pub events: Vec<OrderEvent>,
    pub books: Vec<BookSnapshot>,
    pub symbol: Option<String>,
    pub session_date: Option<NaiveDate>,
    pub depth: usize,
}

impl EventBookSeries {
    pub fn new(events: Vec<OrderEvent>, books: Vec<BookSnapshot>, depth: usize) -> Result<Self> {
        if events.len() != books.len() {
            return Err(Error::RowCountMismatch {
                messages: events.len(),
                books: books.len(),
            });
        }
        Ok(EventBookSeries {
            events,
            books,
            symbol: None,
            session_date: None,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Rows `range`, keeping metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        EventBookSeries {
            events: self.events[range.clone()].to_vec(),
            books: self.books[range].to_vec(),
            symbol: self.symbol.clone(),
            session_date: self.session_date,
            depth: self.depth,
        }
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        EventBookSeries {
            events: indices.iter().map(|&i| self.events[i]).collect(),
            books: indices.iter().map(|&i| self.books[i].clone()).collect(),
            symbol: self.symbol.clone(),
            session_date: self.session_date,
            depth: self.depth,
        }
    }

    /// Mid-quote in dollars for every row; fails on the first one-sided book.
    pub fn mid_quotes(&self) -> Result<Vec<f64>> {
        self.books
            .iter()
            .enumerate()
            .map(|(i, b)| {
                crate::book_engine::mid_quote(b).map_err(|e| Error::Book(format!("row {}: {e}", i + 1)))
            })
            .collect()
    }
}

/// Symbol, date and depth encoded in a LOBSTER file name, e.g.
/// `AMZN_2012-06-21_34200000_57600000_message_10.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileMeta {
    pub symbol: String,
    pub date: NaiveDate,
    pub kind: String,
    pub depth: usize,
}

impl FileMeta {
    pub fn from_path(path: &Path) -> Option<Self> {
        let stem = path.file_stem()?.to_str()?;
        let parts: Vec<&str> = stem.split('_').collect();
        if parts.len() != 6 {
            return None;
        }
        Some(FileMeta {
            symbol: parts[0].to_string(),
            date: NaiveDate::parse_from_str(parts[1], "%Y-%m-%d").ok()?,
            kind: parts[4].to_string(),
            depth: parts[5].parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub depth: usize,
    pub parse: ParseOptions,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            depth: DEFAULT_DEPTH,
            parse: ParseOptions::default(),
        }
    }
}

/// Parses both files (in parallel) and aligns them row for row.
pub fn load_paired_dataset(
    messages: &Path,
    orderbook: &Path,
    options: LoadOptions,
) -> Result<EventBookSeries> {
    let msg_meta = FileMeta::from_path(messages);
    let book_meta = FileMeta::from_path(orderbook);
    if let (Some(m), Some(b)) = (&msg_meta, &book_meta) {
        if m.symbol != b.symbol || m.date != b.date {
            return Err(Error::Metadata(format!(
                "message file is {} {} but orderbook file is {} {}",
                m.symbol, m.date, b.symbol, b.date
            )));
        }
    }
    if let Some(b) = &book_meta {
        if b.depth != options.depth {
            return Err(Error::Metadata(format!(
                "orderbook file name says depth {} but depth {} was requested",
                b.depth, options.depth
            )));
        }
    }

    let (events, books) = rayon::join(
        || -> Result<Vec<OrderEvent>> {
            let f = BufReader::new(File::open(messages)?);
            parse_message_file(f, options.parse)
        },
        || -> Result<Vec<BookSnapshot>> {
            let f = BufReader::new(File::open(orderbook)?);
            parse_orderbook_file(f, options.depth, options.parse.validation)
        },
    );
    let mut series = EventBookSeries::new(events?, books?, options.depth)?;
    if let Some(m) = msg_meta.or(book_meta) {
        series.symbol = Some(m.symbol);
        series.session_date = Some(m.date);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_message_row() {
        let e = OrderEvent::parse_row("34200.189608,1,11885113,21,2238200,1", 1).unwrap();
        assert_eq!(e.time, Timestamp(34_200_189_608_000));
        assert_eq!(e.kind, EventKind::Submit);
        assert_eq!(e.order_id, 11885113);
        assert_eq!(e.size, 21);
        assert_eq!(e.price, 2238200);
        assert_eq!(e.direction, Direction::Buy);
        assert!((e.time.as_secs_f64() - 34200.189608).abs() < 1e-9);
    }

    #[test]
    fn unknown_kind_is_rejected_with_row_number() {
        let src = "34200.1,1,1,10,100,1\n34200.2,6,2,10,100,1\n";
        let err = parse_message_file(src.as_bytes(), ParseOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("unknown event kind"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_empty_sequence() {
        assert!(parse_message_file("".as_bytes(), ParseOptions::default()).unwrap().is_empty());
        assert!(parse_orderbook_file("".as_bytes(), 10, ValidationMode::Strict).unwrap().is_empty());
    }

    #[test]
    fn crlf_and_trailing_blank_lines() {
        let src = "34200.1,1,1,10,100,1\r\n34200.2,3,1,10,100,1\r\n\r\n";
        let v = parse_message_file(src.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].kind, EventKind::Delete);
    }

    #[test]
    fn malformed_fields() {
        for row in [
            "abc,1,1,10,100,1",
            "34200.1,1,1,-10,100,1",
            "34200.1,1,1,10,100,2",
            "34200.1,1,1,10,100",
            "34200.1,1,1,10,100,1,9",
        ] {
            assert!(OrderEvent::parse_row(row, 1).is_err(), "{row}");
        }
    }

    #[test]
    fn time_regression() {
        let src = "34200.2,1,1,10,100,1\n34200.1,1,2,10,100,1\n";
        let err = parse_message_file(src.as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
        let tolerant = ParseOptions {
            time_tolerance_ns: 200_000_000,
            ..ParseOptions::default()
        };
        assert_eq!(parse_message_file(src.as_bytes(), tolerant).unwrap().len(), 2);
        let warn = ParseOptions {
            validation: ValidationMode::Warn,
            ..ParseOptions::default()
        };
        assert_eq!(parse_message_file(src.as_bytes(), warn).unwrap().len(), 2);
    }

    #[test]
    fn halt_rows_may_carry_non_positive_price() {
        let e = parse_message_file("34200.1,7,0,0,-1,-1\n".as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(e[0].kind, EventKind::Halt);
        assert!(parse_message_file("34200.1,1,5,10,0,1\n".as_bytes(), ParseOptions::default()).is_err());
    }

    #[test]
    fn parses_depth_one_book() {
        let b = BookSnapshot::parse_row("2239500,100,2231800,100", 1, 1).unwrap();
        assert_eq!(b.best_ask(), Some(Level { price: 2239500, size: 100 }));
        assert_eq!(b.best_bid(), Some(Level { price: 2231800, size: 100 }));
        assert!(b.validate().is_ok());
    }

    #[test]
    fn crossed_book_is_rejected() {
        let err = parse_orderbook_file("2231800,100,2239500,100\n".as_bytes(), 1, ValidationMode::Strict)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidBook { row: 1, .. }));
        let ok = parse_orderbook_file("2231800,100,2239500,100\n".as_bytes(), 1, ValidationMode::Off);
        assert_eq!(ok.unwrap().len(), 1);
    }

    #[test]
    fn column_count_mismatch() {
        let err = parse_orderbook_file("1,2,3\n".as_bytes(), 1, ValidationMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn depth_ten_row() {
        let mut cols = Vec::new();
        for l in 0..10i64 {
            cols.extend([
                (2_240_000 + 100 * l).to_string(),
                "10".into(),
                (2_230_000 - 100 * l).to_string(),
                "20".into(),
            ]);
        }
        let b = BookSnapshot::parse_row(&cols.join(","), 10, 1).unwrap();
        assert_eq!(b.asks().len(), 10);
        assert_eq!(b.bids().len(), 10);
        assert_eq!(b.ask(10).unwrap().price, 2_240_900);
        assert!(b.ask(11).is_none());
    }

    #[test]
    fn sentinel_levels_are_absent() {
        let row = "2239500,100,2231800,100,9999999999,0,-9999999999,0";
        let b = BookSnapshot::parse_row(row, 2, 1).unwrap();
        assert_eq!(b.asks().len(), 1);
        assert!(b.ask(2).is_none());
        assert_eq!(b.to_csv_row(), row);
        let gap = "9999999999,0,2231800,100,2239500,100,-9999999999,0";
        assert!(BookSnapshot::parse_row(gap, 2, 1).is_err());
    }

    #[test]
    fn row_count_mismatch() {
        let e = OrderEvent::parse_row("34200.1,1,1,10,100,1", 1).unwrap();
        let b = BookSnapshot::parse_row("2239500,100,2231800,100", 1, 1).unwrap();
        let err = EventBookSeries::new(vec![e; 10], vec![b; 9], 1).unwrap_err();
        assert!(matches!(err, Error::RowCountMismatch { messages: 10, books: 9 }));
        assert!(EventBookSeries::new(vec![], vec![], 1).unwrap().is_empty());
    }

    #[test]
    fn file_meta_from_name() {
        let m = FileMeta::from_path(Path::new("/x/AMZN_2012-06-21_34200000_57600000_message_10.csv")).unwrap();
        assert_eq!(m.symbol, "AMZN");
        assert_eq!(m.kind, "message");
        assert_eq!(m.depth, 10);
        assert!(FileMeta::from_path(Path::new("messages.csv")).is_none());
    }

    #[test]
    fn paired_load_checks_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let msg = dir.path().join("AMZN_2012-06-21_34200000_57600000_message_1.csv");
        let book = dir.path().join("AAPL_2012-06-21_34200000_57600000_orderbook_1.csv");
        std::fs::write(&msg, "34200.1,1,1,10,2231800,1\n").unwrap();
        std::fs::write(&book, "2239500,100,2231800,100\n").unwrap();
        let opts = LoadOptions {
            depth: 1,
            ..LoadOptions::default()
        };
        assert!(matches!(load_paired_dataset(&msg, &book, opts), Err(Error::Metadata(_))));
        let book2 = dir.path().join("AMZN_2012-06-21_34200000_57600000_orderbook_1.csv");
        std::fs::write(&book2, "2239500,100,2231800,100\n").unwrap();
        let s = load_paired_dataset(&msg, &book2, opts).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.symbol.as_deref(), Some("AMZN"));
    }

    fn arb_event() -> impl Strategy<Value = OrderEvent> {
        (
            0u64..86_400_000_000_000,
            prop::sample::select(EventKind::ALL.to_vec()),
            any::<u64>(),
            0u64..1_000_000,
            1i64..100_000_000,
            any::<bool>(),
        )
            .prop_map(|(t, kind, order_id, size, price, buy)| OrderEvent {
                time: Timestamp(t),
                kind,
                order_id,
                size,
                price,
                direction: if buy { Direction::Buy } else { Direction::Sell },
            })
    }

    fn arb_book() -> impl Strategy<Value = BookSnapshot> {
        (1usize..12, 0usize..12, 0usize..12, 1_000_000i64..2_000_000, 1i64..50)
            .prop_flat_map(|(depth, na, nb, mid, gap)| {
                let na = na.min(depth);
                let nb = nb.min(depth);
                (
                    Just(depth),
                    Just(mid),
                    Just(gap),
                    prop::collection::vec((1i64..20, 1u64..5000), na),
                    prop::collection::vec((1i64..20, 1u64..5000), nb),
                )
            })
            .prop_map(|(depth, mid, gap, a, b)| {
                let mut p = mid + gap;
                let asks = a
                    .into_iter()
                    .map(|(step, size)| {
                        let l = Level { price: p, size };
                        p += step;
                        l
                    })
                    .collect();
                let mut p = mid;
                let bids = b
                    .into_iter()
                    .map(|(step, size)| {
                        let l = Level { price: p, size };
                        p -= step;
                        l
                    })
                    .collect();
                BookSnapshot::new(depth, asks, bids).unwrap()
            })
    }

    proptest! {
        #[test]
        fn event_round_trip(e in arb_event()) {
            let back = OrderEvent::parse_row(&e.to_csv_row(), 1).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn book_round_trip(b in arb_book()) {
            prop_assert!(b.validate().is_ok());
            let back = BookSnapshot::parse_row(&b.to_csv_row(), b.depth(), 1).unwrap();
            prop_assert_eq!(back, b);
        }
    }
}
