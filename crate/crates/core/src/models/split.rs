//! Train/test partitioning of time-ordered rows.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitPolicy {
    /// Train on the earliest rows, test on the rest.
    #[default]
    Chronological,
    /// Seeded random permutation, then the same cut.
    Shuffled,
}

impl FromStr for SplitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chronological" | "chrono" => Ok(SplitPolicy::Chronological),
            "shuffled" | "shuffle" => Ok(SplitPolicy::Shuffled),
            other => Err(Error::InvalidParameter(format!("unknown split policy `{other}`"))),
        }
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitPolicy::Chronological => "chronological",
            SplitPolicy::Shuffled => "shuffled",
        })
    }
}

/// Returns `(train, test)` positions. Both sides are non-empty; each is
/// sorted ascending so row order is preserved within a side.
pub fn train_test_split(n: usize, train_fraction: f64, policy: SplitPolicy, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    if n < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: n });
    }
    let cut = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    if policy == SplitPolicy::Shuffled {
        order.shuffle(&mut substream(seed, "split"));
    }
    let mut train = order[..cut].to_vec();
    let mut test = order[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
