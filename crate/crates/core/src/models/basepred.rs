//! Class-frequency baseline: predicts each label at random with its
//! training frequency, ignoring features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePredModel {
    /// Indexed by [`Label::index`].
    pub class_probs: [f64; 3],
    pub seed: u64,
}

impl BasePredModel {
    pub fn fit(y: &[Label], seed: u64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("training labels"));
        }
        let mut counts = [0usize; 3];
        for l in y {
            counts[l.index()] += 1;
        }
        let n = y.len() as f64;
        Ok(BasePredModel {
            class_probs: counts.map(|c| c as f64 / n),
            seed,
        })
    }

    pub fn probability(&self, label: Label) -> f64 {
        self.class_probs[label.index()]
    }

    /// Expected accuracy on data with the same label distribution.
    pub fn expected_accuracy(&self) -> f64 {
        self.class_probs.iter().map(|p| p * p).sum()
    }

    /// `n` independent draws from the stored distribution, using the
    /// model's seed.
    pub fn predict(&self, n: usize) -> Vec<Label> {
        self.predict_seeded(n, self.seed)
    }

    pub fn predict_seeded(&self, n: usize, seed: u64) -> Vec<Label> {
        let mut rng = substream(seed, "basepred");
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in self.class_probs.iter().enumerate() {
                    acc += p;
                    if u < acc && *p > 0.0 {
                        return Label::from_index(i);
                    }
                }
                // rounding left `u` past the last cumulative sum
                Label::from_index(self.class_probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            })
            .collect()
    }
}
