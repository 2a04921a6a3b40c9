//! Random forest of Gini-split decision trees.
//!
//! Split thresholds are the lower of the two adjacent distinct training
//! values and samples with `x <= threshold` go left, so predictions depend
//! only on the order of each feature's values.

use std::fmt;

use log::warn;
use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, check_features};
use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::rng::{indexed_substream, StageRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    /// Number of features examined per node, at least 1 and at most `d`.
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        k.clamp(1, d.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Count(k) => write!(f, "{k}"),
            MaxFeatures::Fraction(x) => write!(f, "{x:?}"),
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" | "none" => Ok(MaxFeatures::All),
            _ if s.contains('.') => match s.parse::<f64>() {
                Ok(f) if f > 0.0 && f <= 1.0 => Ok(MaxFeatures::Fraction(f)),
                _ => Err(Error::InvalidParameter(format!("max_features fraction `{s}`"))),
            },
            _ => match s.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(MaxFeatures::Count(k)),
                _ => Err(Error::InvalidParameter(format!("max_features `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_estimators: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl RfParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidParameter(format!("rf parameter {key}={value}"));
        match key {
            "n_estimators" => self.n_estimators = value.parse().map_err(|_| bad())?,
            "max_features" => self.max_features = value.parse()?,
            "min_samples_leaf" => self.min_samples_leaf = value.parse().map_err(|_| bad())?,
            "max_depth" => {
                self.max_depth = match value {
                    "none" | "None" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
            "bootstrap" => self.bootstrap = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::InvalidParameter(format!("unknown rf parameter `{key}`"))),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParameter("n_estimators must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for RfParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_estimators={},max_features={},min_samples_leaf={},max_depth={},bootstrap={}",
            self.n_estimators,
            self.max_features,
            self.min_samples_leaf,
            self.max_depth.map_or("none".to_string(), |d| d.to_string()),
            self.bootstrap
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Training-sample counts by [`Label::index`].
    Leaf { counts: [u32; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

/// Weighted Gini impurity `n * (1 - sum p^2)`.
fn weighted_gini(counts: &[u32; 3]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
    f64::from(n) - sq / f64::from(n)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Weighted child impurity; lower is better.
    impurity: f64,
    /// Number of samples going left after sorting by the feature.
    n_left: usize,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    params: &'a RfParams,
    n_try: usize,
    /// Reused sort buffer of `(value, class)`.
    buf: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u32; 3] {
        let mut c = [0u32; 3];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best split of `idx` over up to `n_try` non-constant features drawn
    /// in random order. Equal impurities keep the lower feature index, then
    /// the lower threshold.
    fn best_split(&mut self, idx: &[usize], parent: &[u32; 3], rng: &mut StageRng) -> Option<BestSplit> {
        let d = self.x.ncols();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        let min_leaf = self.params.min_samples_leaf;
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut examined = 0;
        for &f in &order {
            if examined == self.n_try {
                break;
            }
            let col = self.x.column(f);
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            examined += 1;
            let mut left = [0u32; 3];
            let mut right = *parent;
            for i in 0..n - 1 {
                let c = self.buf[i].1;
                left[c] += 1;
                right[c] -= 1;
                let n_left = i + 1;
                if self.buf[i].0 == self.buf[i + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let impurity = weighted_gini(&left) + weighted_gini(&right);
                let better = match &best {
                    None => true,
                    Some(b) => impurity < b.impurity || (impurity == b.impurity && f < b.feature),
                };
                if better {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: self.buf[i].0,
                        impurity,
                        n_left,
                    });
                }
            }
        }
        best
    }
}

impl DecisionTree {
    /// Grows a tree on the samples `idx` (repeats allowed). `y` holds class
    /// indices.
    pub fn fit(x: ArrayView2<f64>, y: &[usize], mut idx: Vec<usize>, params: &RfParams, rng: &mut StageRng) -> Self {
        let mut b = Builder {
            x,
            y,
            params,
            n_try: params.max_features.resolve(x.ncols()),
            buf: Vec::with_capacity(idx.len()),
        };
        let mut nodes = vec![Node::Leaf { counts: [0; 3] }];
        // (node, start, end, depth) over `idx`
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        while let Some((node, start, end, depth)) = stack.pop() {
            let slice = &idx[start..end];
            let counts = b.counts(slice);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
            let too_small = slice.len() < 2 * params.min_samples_leaf;
            let split = if pure || depth_capped || too_small {
                None
            } else {
                b.best_split(slice, &counts, rng)
            };
            let Some(split) = split else {
                nodes[node] = Node::Leaf { counts };
                continue;
            };
            let col = x.column(split.feature);
            let part = &mut idx[start..end];
            part.sort_by(|&a, &c| (col[a] > split.threshold).cmp(&(col[c] > split.threshold)));
            debug_assert_eq!(part.iter().filter(|&&i| col[i] <= split.threshold).count(), split.n_left);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { counts: [0; 3] });
            nodes.push(Node::Leaf { counts: [0; 3] });
            nodes[node] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            let mid = start + split.n_left;
            stack.push((right, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
        DecisionTree { nodes }
    }

    pub fn leaf_counts(&self, row: ArrayView1<f64>) -> &[u32; 3] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class index of the row's leaf; ties go to the lowest.
    pub fn predict_index(&self, row: ArrayView1<f64>) -> usize {
        argmax(self.leaf_counts(row))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<Label> {
        x.axis_iter(Axis(0)).map(|r| Label::from_index(self.predict_index(r))).collect()
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32; 3]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(counts),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: RfParams,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Tree `i` draws its bootstrap sample and feature subsets from its own
    /// stream, so the result does not depend on thread scheduling.
    pub fn fit(x: ArrayView2<f64>, y: &[Label], params: &RfParams, seed: u64) -> Result<Self> {
        params.check()?;
        if y.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch(x.nrows(), y.len()));
        }
        let classes: Vec<usize> = y.iter().map(|l| l.index()).collect();
        if classes.iter().all(|&c| c == classes[0]) {
            warn!("random forest: single-class training set, model is constant");
        }
        let n = y.len();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = indexed_substream(seed, "bootstrap", t as u64);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, &classes, idx, params, &mut rng)
            })
            .collect();
        Ok(ForestModel {
            params: params.clone(),
            seed,
            n_features: x.ncols(),
            trees,
        })
    }

    /// Vote counts per class index for one row.
    pub fn votes(&self, row: ArrayView1<f64>) -> [u32; 3] {
        let mut v = [0u32; 3];
        for t in &self.trees {
            v[t.predict_index(row)] += 1;
        }
        v
    }

    /// Plurality vote; ties go to the lowest class value.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        check_features(self.n_features, &x)?;
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| Label::from_index(argmax(&self.votes(x.row(i)))))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::rng::substream;

    fn random_data(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = substream(seed, "data");
        let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        // noisy function of the first two columns
        let y = (0..n)
            .map(|i| {
                let s = x[[i, 0]] + 0.5 * x[[i, 1 % d]] + 0.3 * rng.random::<f64>();
                if s < 0.6 {
                    Label::Down
                } else if s < 1.0 {
                    Label::Flat
                } else {
                    Label::Up
                }
            })
            .collect();
        (x, y)
    }

    fn accuracy(a: &[Label], b: &[Label]) -> f64 {
        a.iter().zip(b).filter(|(p, q)| p == q).count() as f64 / a.len() as f64
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(54), 7);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
        assert_eq!(MaxFeatures::Fraction(0.5).resolve(9), 4);
        assert_eq!(MaxFeatures::Count(40).resolve(9), 9);
        assert_eq!("0.25".parse::<MaxFeatures>().unwrap(), MaxFeatures::Fraction(0.25));
        assert!("0".parse::<MaxFeatures>().is_err());
    }

    #[test]
    fn sign_feature_single_tree_fits_exactly() {
        let mut rng = substream(1, "sign");
        let x = Array2::from_shape_fn((300, 1), |_| rng.random_range(-1.0..1.0));
        let y: Vec<Label> = x.column(0).iter().map(|&v| if v > 0.0 { Label::Up } else { Label::Down }).collect();
        // a bootstrap sample can miss the points nearest zero, so fit on all rows
        let p = RfParams {
            n_estimators: 1,
            bootstrap: false,
            ..RfParams::default()
        };
        let m = ForestModel::fit(x.view(), &y, &p, 4).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn separable_training_accuracy_is_total() {
        let (x, _) = random_data(400, 5, 2);
        let y: Vec<Label> = (0..400)
            .map(|i| Label::from_index(((x[[i, 2]] * 3.0) as usize).min(2)))
            .collect();
        let m = ForestModel::fit(x.view(), &y, &RfParams::default(), 5).unwrap();
        assert_eq!(accuracy(&m.predict(x.view()).unwrap(), &y), 1.0);
    }

    #[test]
    fn one_tree_without_bootstrap_is_a_decision_tree() {
        let (x, y) = random_data(300, 4, 3);
        let p = RfParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..RfParams::default()
        };
        let forest = ForestModel::fit(x.view(), &y, &p, 8).unwrap();
        let classes: Vec<usize> = y.iter().map(|l| l.index()).collect();
        let mut rng = indexed_substream(8, "bootstrap", 0);
        let tree = DecisionTree::fit(x.view(), &classes, (0..300).collect(), &p, &mut rng);
        assert_eq!(forest.trees[0], tree);
        assert_eq!(forest.predict(x.view()).unwrap(), tree.predict(x.view()));
    }

    #[test]
    fn leaves_respect_min_samples() {
        let (x, y) = random_data(500, 3, 4);
        let p = RfParams {
            n_estimators: 5,
            min_samples_leaf: 7,
            ..RfParams::default()
        };
        let m = ForestModel::fit(x.view(), &y, &p, 1).unwrap();
        for t in &m.trees {
            assert!(t.leaves().all(|c| c.iter().sum::<u32>() >= 7));
            // children partition parents: leaf totals add back up to the sample size
            assert_eq!(t.leaves().map(|c| c.iter().sum::<u32>()).sum::<u32>(), 500);
        }
    }

    #[test]
    fn depth_cap() {
        let (x, y) = random_data(500, 3, 5);
        let p = RfParams {
            n_estimators: 3,
            max_depth: Some(2),
            ..RfParams::default()
        };
        let m = ForestModel::fit(x.view(), &y, &p, 1).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = random_data(300, 4, 6);
        let p = RfParams {
            n_estimators: 10,
            ..RfParams::default()
        };
        let a = ForestModel::fit(x.view(), &y, &p, 77).unwrap();
        let b = ForestModel::fit(x.view(), &y, &p, 77).unwrap();
        let c = ForestModel::fit(x.view(), &y, &p, 78).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn single_class_is_constant() {
        let (x, _) = random_data(50, 2, 7);
        let y = vec![Label::Up; 50];
        let m = ForestModel::fit(x.view(), &y, &RfParams { n_estimators: 3, ..RfParams::default() }, 0).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(m.predict(x.view()).unwrap().iter().all(|&l| l == Label::Up));
    }

    #[test]
    fn errors() {
        let x = Array2::<f64>::zeros((0, 2));
        assert!(ForestModel::fit(x.view(), &[], &RfParams::default(), 0).is_err());
        let (x, y) = random_data(10, 2, 8);
        let bad = RfParams { n_estimators: 0, ..RfParams::default() };
        assert!(ForestModel::fit(x.view(), &y, &bad, 0).is_err());
        let bad = RfParams { min_samples_leaf: 0, ..RfParams::default() };
        assert!(ForestModel::fit(x.view(), &y, &bad, 0).is_err());
    }

    #[test]
    fn vote_ties_go_low() {
        let leaf = |c: usize| {
            let mut counts = [0; 3];
            counts[c] = 1;
            DecisionTree {
                nodes: vec![Node::Leaf { counts }],
            }
        };
        let m = ForestModel {
            params: RfParams::default(),
            seed: 0,
            n_features: 1,
            trees: vec![leaf(2), leaf(1), leaf(2), leaf(1)],
        };
        assert_eq!(m.predict(Array2::zeros((1, 1)).view()).unwrap(), vec![Label::Flat]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn increasing_transform_invariant(seed in 0u64..1000, col in 0usize..3, kind in 0usize..3) {
            let (x, y) = random_data(150, 3, seed);
            let (xt_test, _) = random_data(60, 3, seed + 1);
            let f = |v: f64| match kind {
                0 => v.exp(),
                1 => 5.0 * v * v * v - 2.0,
                _ => (v + 0.5).ln(),
            };
            let tr = |m: &Array2<f64>| {
                let mut m = m.clone();
                m.column_mut(col).mapv_inplace(f);
                m
            };
            let p = RfParams { n_estimators: 8, ..RfParams::default() };
            let a = ForestModel::fit(x.view(), &y, &p, seed).unwrap();
            let b = ForestModel::fit(tr(&x).view(), &y, &p, seed).unwrap();
            prop_assert_eq!(a.predict(xt_test.view()).unwrap(), b.predict(tr(&xt_test).view()).unwrap());
        }
    }
}
