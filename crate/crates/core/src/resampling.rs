//! Class-imbalance treatments: dropping the flat class, SMOTE
//! over-sampling combined with majority under-sampling, and a random-noise
//! control dataset.

use std::fmt;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::labeling::{Label, LabelSeries};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Base,
    Binarized,
    Smote,
    Noise,
    Smoothed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Base => "Base",
            Provenance::Binarized => "Binarized",
            Provenance::Smote => "SMOTE",
            Provenance::Noise => "Noise",
            Provenance::Smoothed => "Smoothed",
        })
    }
}

/// Features with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub columns: Vec<String>,
    pub y: Vec<Label>,
    /// Series row of each sample; `None` for synthetic rows.
    pub source_rows: Vec<Option<usize>>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, columns: Vec<String>, y: Vec<Label>, provenance: Provenance) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch(x.nrows(), y.len()));
        }
        let n = y.len();
        Ok(LabeledDataset {
            x,
            columns,
            y,
            source_rows: (0..n).map(Some).collect(),
            provenance,
        })
    }

    /// Joins a feature matrix with labels on series row, keeping only rows
    /// inside the label series' valid range.
    pub fn join(features: &FeatureMatrix, labels: &LabelSeries, provenance: Provenance) -> Result<Self> {
        let mut positions = Vec::new();
        let mut y = Vec::new();
        for (pos, &row) in features.rows.iter().enumerate() {
            if let Some(l) = labels.get(row) {
                positions.push(pos);
                y.push(l);
            }
        }
        Ok(LabeledDataset {
            x: features.data.select(Axis(0), &positions),
            columns: features.columns.clone(),
            source_rows: positions.iter().map(|&p| Some(features.rows[p])).collect(),
            y,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Counts indexed by [`Label::index`].
    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.y {
            c[l.index()] += 1;
        }
        c
    }

    pub fn subset(&self, positions: &[usize]) -> Self {
        LabeledDataset {
            x: self.x.select(Axis(0), positions),
            columns: self.columns.clone(),
            y: positions.iter().map(|&p| self.y[p]).collect(),
            source_rows: positions.iter().map(|&p| self.source_rows[p]).collect(),
            provenance: self.provenance,
        }
    }
}

/// Drops every `Flat` row.
pub fn binarize(d: &LabeledDataset) -> LabeledDataset {
    let keep: Vec<usize> = (0..d.len()).filter(|&i| d.y[i] != Label::Flat).collect();
    if keep.is_empty() {
        warn!("binarize: every label is flat, result is empty");
    }
    LabeledDataset {
        provenance: Provenance::Binarized,
        ..d.subset(&keep)
    }
}

pub const DEFAULT_K_NEIGHBORS: usize = 5;

/// Per-class count after resampling: the midpoint between the majority
/// count and the largest minority count.
pub fn smote_target(counts: &[usize; 3]) -> usize {
    let mut present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    present.sort_unstable_by(|a, b| b.cmp(a));
    match present.as_slice() {
        [] => 0,
        [only] => *only,
        [majority, runner_up, ..] => (majority + runner_up) / 2,
    }
}

/// Per-column mean and standard deviation; zero deviations become 1.
fn column_scaling(x: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
    (mean, std)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the `k` nearest other members of each member.
/// Ties in distance go to the lower index.
fn nearest_neighbors(z: &Array2<f64>, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    use rayon::prelude::*;
    members
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &b)| (sq_dist(z.row(a), z.row(b)), j))
                .collect();
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, |p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
                d.truncate(k);
            }
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// SMOTE over-sampling of every class below [`smote_target`] and random
/// under-sampling of every class above it. Neighbors are searched on
/// z-scored features; synthetic rows are interpolated in the original
/// feature space. Output rows are grouped by class, originals first.
pub fn smote_resample(d: &LabeledDataset, k_neighbors: usize, seed: u64) -> Result<LabeledDataset> {
    if k_neighbors == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be at least 1".into()));
    }
    if d.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let counts = d.class_counts();
    let target = smote_target(&counts);
    for label in Label::ALL {
        let c = counts[label.index()];
        if c > 0 && c < target && c < k_neighbors + 1 {
            return Err(Error::ClassTooSmall {
                class: label.value(),
                count: c,
                needed: k_neighbors + 1,
            });
        }
    }

    let mut rng = substream(seed, "smote");
    let (mean, std) = column_scaling(&d.x);
    let z = (&d.x - &mean) / &std;

    let n_cols = d.x.ncols();
    let mut rows: Vec<f64> = Vec::with_capacity(target * 3 * n_cols);
    let mut y = Vec::new();
    let mut source_rows = Vec::new();
    for label in Label::ALL {
        let members: Vec<usize> = (0..d.len()).filter(|&i| d.y[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() >= target {
            let mut chosen = members.clone();
            chosen.shuffle(&mut rng);
            chosen.truncate(target);
            chosen.sort_unstable();
            for &i in &chosen {
                rows.extend(d.x.row(i).iter());
                y.push(label);
                source_rows.push(d.source_rows[i]);
            }
            continue;
        }
        for &i in &members {
            rows.extend(d.x.row(i).iter());
            y.push(label);
            source_rows.push(d.source_rows[i]);
        }
        let neighbors = nearest_neighbors(&z, &members, k_neighbors);
        for s in 0..target - members.len() {
            // cycle through members so each base point is used evenly
            let base = s % members.len();
            let nb = neighbors[base][rng.random_range(0..neighbors[base].len())];
            let gap: f64 = rng.random();
            let a = d.x.row(members[base]);
            let b = d.x.row(members[nb]);
            rows.extend(a.iter().zip(b).map(|(p, q)| p + gap * (q - p)));
            y.push(label);
            source_rows.push(None);
        }
    }
    let x = Array2::from_shape_vec((y.len(), n_cols), rows).expect("shape matches");
    Ok(LabeledDataset {
        x,
        columns: d.columns.clone(),
        y,
        source_rows,
        provenance: Provenance::Smote,
    })
}

/// I.i.d. uniform `[0, 1)` features; each label is a threshold partition of
/// the row's first feature at the cumulative class frequencies.
pub fn noise_dataset(n_rows: usize, n_cols: usize, class_freqs: &[(Label, f64)], seed: u64) -> Result<LabeledDataset> {
    if n_cols == 0 {
        return Err(Error::InvalidParameter("noise dataset needs at least one column".into()));
    }
    let total: f64 = class_freqs.iter().map(|(_, p)| p).sum();
    if class_freqs.is_empty() || (total - 1.0).abs() > 1e-9 || class_freqs.iter().any(|(_, p)| *p < 0.0) {
        return Err(Error::InvalidParameter(format!("class frequencies must be non-negative and sum to 1, got {total}")));
    }
    let mut rng = substream(seed, "noise");
    let x = Array2::from_shape_simple_fn((n_rows, n_cols), || rng.random::<f64>());
    let y = x
        .column(0)
        .iter()
        .map(|&u| {
            let mut acc = 0.0;
            for &(label, p) in class_freqs {
                acc += p;
                if u < acc {
                    return label;
                }
            }
            class_freqs.last().expect("non-empty").0
        })
        .collect();
    let columns = (0..n_cols).map(|i| format!("noise_{i}")).collect();
    LabeledDataset::new(x, columns, y, Provenance::Noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dataset(labels: &[i8]) -> LabeledDataset {
        let y: Vec<Label> = labels.iter().map(|&v| Label::from_value(v).unwrap()).collect();
        let x = Array2::from_shape_fn((y.len(), 2), |(i, j)| (i * 2 + j) as f64);
        LabeledDataset::new(x, vec!["a".into(), "b".into()], y, Provenance::Base).unwrap()
    }

    #[test]
    fn binarize_keeps_moves() {
        let d = dataset(&[0, 1, 0, -1]);
        let b = binarize(&d);
        assert_eq!(b.source_rows, vec![Some(1), Some(3)]);
        assert_eq!(b.x, array![[2.0, 3.0], [6.0, 7.0]]);
        assert_eq!(b.provenance, Provenance::Binarized);
        assert!(binarize(&dataset(&[0, 0])).is_empty());
    }

    #[test]
    fn target_rule() {
        assert_eq!(smote_target(&[50, 900, 50]), 475);
        assert_eq!(smote_target(&[0, 10, 4]), 7);
        assert_eq!(smote_target(&[0, 10, 0]), 10);
    }

    fn clustered(counts: [usize; 3], seed: u64) -> LabeledDataset {
        let mut rng = substream(seed, "test");
        let mut y = Vec::new();
        let mut v = Vec::new();
        for (ci, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                y.push(Label::from_index(ci));
                v.push(ci as f64 * 3.0 + rng.random::<f64>());
                v.push(1000.0 * rng.random::<f64>());
                v.push(rng.random::<f64>() - 0.5);
            }
        }
        LabeledDataset::new(Array2::from_shape_vec((y.len(), 3), v).unwrap(), vec!["a".into(), "b".into(), "c".into()], y, Provenance::Base).unwrap()
    }

    #[test]
    fn equal_counts_after_resampling() {
        let d = clustered([50, 900, 50], 1);
        let r = smote_resample(&d, 5, 7).unwrap();
        assert_eq!(r.class_counts(), [475, 475, 475]);
        // majority rows are an untouched subset of the input
        for (i, l) in r.y.iter().enumerate() {
            if *l == Label::Flat {
                let src = r.source_rows[i].unwrap();
                assert_eq!(r.x.row(i), d.x.row(src));
            }
        }
        assert_eq!(r, smote_resample(&d, 5, 7).unwrap());
        assert_ne!(r, smote_resample(&d, 5, 8).unwrap());
    }

    #[test]
    fn degenerate_segment() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0], [8.0, 5.0], [9.0, 5.0]];
        let y = vec![Label::Up, Label::Up, Label::Flat, Label::Flat, Label::Flat, Label::Flat, Label::Flat];
        let d = LabeledDataset::new(x, vec!["a".into(), "b".into()], y, Provenance::Base).unwrap();
        let r = smote_resample(&d, 1, 3).unwrap();
        assert_eq!(r.class_counts(), [0, 3, 3]);
        for (i, l) in r.y.iter().enumerate() {
            if *l == Label::Up {
                assert_eq!(r.x.row(i).to_vec(), vec![1.0, 2.0]);
            }
        }
    }

    #[test]
    fn small_class_is_rejected() {
        let d = clustered([3, 100, 20], 2);
        assert!(matches!(smote_resample(&d, 5, 0), Err(Error::ClassTooSmall { class: -1, count: 3, needed: 6 })));
    }

    #[test]
    fn noise_frequencies_and_determinism() {
        let freqs = [(Label::Flat, 0.9), (Label::Up, 0.05), (Label::Down, 0.05)];
        let d = noise_dataset(5000, 4, &freqs, 1).unwrap();
        // 3-sigma binomial bound at p = 0.05, n = 5000 is 0.0092; p = 0.9 gives 0.0127
        let c = d.class_counts();
        for (label, p) in freqs {
            let f = c[label.index()] as f64 / 5000.0;
            assert!((f - p).abs() <= 0.015, "{label}: {f}");
        }
        assert_eq!(d, noise_dataset(5000, 4, &freqs, 1).unwrap());
        assert!(d.x.iter().all(|v| (0.0..1.0).contains(v)));
        assert!(noise_dataset(10, 2, &[(Label::Flat, 0.5)], 1).is_err());
    }
}
