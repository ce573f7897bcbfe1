//! Random forest of CART trees grown on bootstrap resamples with Gini
//! impurity. Leaves store the positive-class fraction of their samples and
//! the forest averages them.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use super::{log_loss, FitReport, ProbabilisticClassifier};
use crate::error::{domain, Error, Result};
use crate::rng::{self, Rng};
use crate::space::{Dimension, LabeledSet, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeaturesPerSplit {
    #[default]
    All,
    Sqrt,
    Count(usize),
}

impl FeaturesPerSplit {
    fn resolve(self, d: usize) -> usize {
        match self {
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Sqrt => (libm::sqrt(d as f64) as usize).max(1),
            FeaturesPerSplit::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub features_per_split: FeaturesPerSplit,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            features_per_split: FeaturesPerSplit::All,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(domain("forest needs at least one tree"));
        }
        if self.min_samples_split < 2 {
            return Err(domain("min_samples_split must be at least 2"));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(domain("features_per_split must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    /// Left when `x <= threshold`.
    Threshold(f64),
    /// Left when the category code is flagged.
    Subset(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        rule: Rule,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf(value)],
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(p) => return *p,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    let v = x[*feature];
                    let go_left = match rule {
                        Rule::Threshold(t) => v <= *t,
                        Rule::Subset(flags) => {
                            let code = libm::round(v);
                            code >= 0.0 && (code as usize) < flags.len() && flags[code as usize]
                        }
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Candidate {
    gain: f64,
    feature: usize,
    rule: Rule,
}

struct Grower<'a> {
    xs: &'a [Vec<f64>],
    zs: &'a [bool],
    kinds: &'a [Dimension],
    config: &'a ForestConfig,
    n_features: usize,
    rng: Rng,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, idx, 0usize)];
        tree.nodes.push(Node::Leaf(0.0));
        while let Some((slot, idx, depth)) = stack.pop() {
            let n = idx.len();
            let pos = idx.iter().filter(|&&i| self.zs[i]).count();
            let frac = pos as f64 / n as f64;
            let stop = n < self.config.min_samples_split
                || pos == 0
                || pos == n
                || self.config.max_depth.is_some_and(|d| depth >= d);
            let split = if stop { None } else { self.best_split(&idx, pos) };
            match split {
                None => tree.nodes[slot] = Node::Leaf(frac),
                Some(c) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
                        let v = self.xs[i][c.feature];
                        match &c.rule {
                            Rule::Threshold(t) => v <= *t,
                            Rule::Subset(flags) => flags[libm::round(v) as usize],
                        }
                    });
                    let left = tree.nodes.len();
                    tree.nodes.push(Node::Leaf(0.0));
                    let right = tree.nodes.len();
                    tree.nodes.push(Node::Leaf(0.0));
                    tree.nodes[slot] = Node::Split {
                        feature: c.feature,
                        rule: c.rule,
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        tree
    }

    fn feature_order(&mut self) -> Vec<usize> {
        let d = self.kinds.len();
        if self.n_features >= d {
            return (0..d).collect();
        }
        // sampled features first (in index order), the rest as fallback
        let mut chosen = index::sample(&mut self.rng, d, self.n_features).into_vec();
        chosen.sort_unstable();
        let rest: Vec<usize> = (0..d).filter(|f| !chosen.contains(f)).collect();
        chosen.extend(rest);
        chosen
    }

    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<Candidate> {
        let n = idx.len() as f64;
        let parent = gini(pos as f64, n);
        let order = self.feature_order();
        let mut best: Option<Candidate> = None;
        for (rank, &f) in order.iter().enumerate() {
            if rank >= self.n_features && best.is_some() {
                break;
            }
            let cand = match &self.kinds[f] {
                Dimension::Categorical { arity } => self.best_subset(idx, f, *arity, parent),
                _ => self.best_threshold(idx, f, parent),
            };
            if let Some(c) = cand {
                let better = match &best {
                    None => true,
                    Some(b) => c.gain > b.gain || (c.gain == b.gain && c.feature < b.feature),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&self, idx: &[usize], f: usize, parent: f64) -> Option<Candidate> {
        let mut pts: Vec<(f64, bool)> = idx.iter().map(|&i| (self.xs[i][f], self.zs[i])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len() as f64;
        let total_pos = pts.iter().filter(|p| p.1).count() as f64;
        let mut left_pos = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..pts.len() - 1 {
            if pts[k].1 {
                left_pos += 1.0;
            }
            if pts[k].0 == pts[k + 1].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let child = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
            let gain = parent - child;
            if best.is_none_or(|(g, _)| gain > g) {
                let mid = 0.5 * (pts[k].0 + pts[k + 1].0);
                // midpoint can round onto the upper value for adjacent floats
                let t = if mid < pts[k + 1].0 { mid } else { pts[k].0 };
                best = Some((gain, t));
            }
        }
        best.map(|(gain, t)| Candidate {
            gain,
            feature: f,
            rule: Rule::Threshold(t),
        })
    }

    /// Orders present categories by positive fraction and scans prefix
    /// subsets, which is optimal for binary Gini.
    fn best_subset(&self, idx: &[usize], f: usize, arity: usize, parent: f64) -> Option<Candidate> {
        let mut counts = vec![(0.0f64, 0.0f64); arity];
        for &i in idx {
            let c = libm::round(self.xs[i][f]) as usize;
            counts[c].0 += 1.0;
            if self.zs[i] {
                counts[c].1 += 1.0;
            }
        }
        let mut present: Vec<usize> = (0..arity).filter(|&c| counts[c].0 > 0.0).collect();
        if present.len() < 2 {
            return None;
        }
        present.sort_by(|&a, &b| {
            let fa = counts[a].1 / counts[a].0;
            let fb = counts[b].1 / counts[b].0;
            fa.total_cmp(&fb).then(a.cmp(&b))
        });
        let n = idx.len() as f64;
        let total_pos: f64 = counts.iter().map(|c| c.1).sum();
        let (mut nl, mut pl) = (0.0, 0.0);
        let mut best: Option<(f64, usize)> = None;
        for k in 0..present.len() - 1 {
            nl += counts[present[k]].0;
            pl += counts[present[k]].1;
            let nr = n - nl;
            let child = (nl * gini(pl, nl) + nr * gini(total_pos - pl, nr)) / n;
            let gain = parent - child;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, k));
            }
        }
        best.map(|(gain, k)| {
            let mut flags = vec![false; arity];
            for &c in &present[..=k] {
                flags[c] = true;
            }
            Candidate {
                gain,
                feature: f,
                rule: Rule::Subset(flags),
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    space: SearchSpace,
    config: ForestConfig,
    trees: Vec<Tree>,
    oob: Vec<f64>,
    fits: u64,
}

impl RandomForest {
    /// An untrained forest; predicts 0.5 until the first fit.
    pub fn new(space: &SearchSpace, config: ForestConfig) -> Result<Self> {
        config.validate()?;
        Ok(RandomForest {
            space: space.clone(),
            config,
            trees: vec![Tree::leaf(0.5)],
            oob: Vec::new(),
            fits: 0,
        })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Out-of-bag predictions for the last training set, falling back to the
    /// whole forest for points that were in every bootstrap sample.
    pub fn oob_predictions(&self) -> &[f64] {
        &self.oob
    }

    /// Per-tree predictions at `x`.
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.space.check_len(x)?;
        Ok(self.trees.iter().map(|t| t.predict(x)).collect())
    }
}

impl ProbabilisticClassifier for RandomForest {
    /// Regrows every tree from scratch. Each tree draws from its own seed
    /// derived from the forest seed, the fit counter and the tree index.
    fn fit(&mut self, data: &LabeledSet) -> Result<FitReport> {
        data.require_both_classes()?;
        for x in data.xs() {
            self.space.check_len(x)?;
        }
        for x in data.xs() {
            for (d, v) in self.space.dims().iter().zip(x) {
                if d.is_categorical() && !d.contains(*v) {
                    return Err(domain("categorical code out of range"));
                }
            }
        }
        let initial_loss = log_loss(self, data)?;
        let n = data.len();
        let fit_seed = rng::derive_seed(self.config.seed, self.fits);
        self.fits += 1;

        let mut trees = Vec::with_capacity(self.config.n_trees);
        let mut oob_sum = vec![0.0; n];
        let mut oob_cnt = vec![0usize; n];
        for t in 0..self.config.n_trees {
            let mut rng = rng::from_seed(rng::derive_seed(fit_seed, t as u64));
            let sample: Vec<usize> = if self.config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &i in &sample {
                in_bag[i] = true;
            }
            let mut grower = Grower {
                xs: data.xs(),
                zs: data.zs(),
                kinds: self.space.dims(),
                config: &self.config,
                n_features: self.config.features_per_split.resolve(self.space.len()),
                rng,
            };
            let tree = grower.grow(sample);
            for i in (0..n).filter(|&i| !in_bag[i]) {
                oob_sum[i] += tree.predict(&data.xs()[i]);
                oob_cnt[i] += 1;
            }
            trees.push(tree);
        }
        self.trees = trees;

        self.oob = (0..n)
            .map(|i| {
                if oob_cnt[i] > 0 {
                    Ok(oob_sum[i] / oob_cnt[i] as f64)
                } else {
                    self.predict(&data.xs()[i])
                }
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(FitReport {
            initial_loss,
            final_loss: log_loss(self, data)?,
        })
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.space.len() {
            return Err(Error::DimensionMismatch {
                expected: self.space.len(),
                found: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    fn calibration_scores(&self, data: &LabeledSet) -> Result<Vec<f64>> {
        if self.oob.len() == data.len() {
            Ok(self.oob.clone())
        } else {
            data.xs().iter().map(|x| self.predict(x)).collect()
        }
    }
}
