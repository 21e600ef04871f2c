//! Random forest of Gini classification trees.
//!
//! Each tree draws its own bootstrap sample and split features from a ChaCha
//! stream selected by its index, so training in parallel yields exactly the
//! same forest as training serially.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of candidate features tried at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtryRule {
    /// `floor(sqrt(p))`, at least 1.
    Sqrt,
    /// All `p` features (bagging).
    All,
    Fixed(usize),
}

impl MtryRule {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MtryRule::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MtryRule::All => n_features,
            MtryRule::Fixed(m) => m,
        };
        m.clamp(1, n_features.max(1))
    }
}

impl std::str::FromStr for MtryRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" | "sqrt" => Ok(MtryRule::Sqrt),
            "all" => Ok(MtryRule::All),
            n => n
                .parse::<usize>()
                .ok()
                .filter(|m| *m >= 1)
                .map(MtryRule::Fixed)
                .ok_or_else(|| format!("mtry must be auto, all or a positive integer, got `{n}`")),
        }
    }
}

impl std::fmt::Display for MtryRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MtryRule::Sqrt => f.write_str("auto"),
            MtryRule::All => f.write_str("all"),
            MtryRule::Fixed(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub mtry: MtryRule,
    pub seed: u64,
    pub min_leaf: usize,
    /// Draw bootstrap rows class-balanced instead of uniformly.
    pub balance_classes: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 500,
            mtry: MtryRule::Sqrt,
            seed: 0,
            min_leaf: 1,
            balance_classes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(c) => return *c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub positive: bool,
    /// Share of trees voting positive.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    mtry: usize,
    min_leaf: usize,
}

impl Grower<'_> {
    fn grow(&self, sample_rows: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let mut nodes = vec![Node::Leaf(false)];
        let mut stack = vec![(0usize, sample_rows)];
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = Vec::new();
        while let Some((slot, rows)) = stack.pop() {
            let n = rows.len();
            let pos = rows.iter().filter(|&&r| self.y[r]).count();
            let majority = 2 * pos > n;
            if pos == 0 || pos == n || n < 2 * self.min_leaf {
                nodes[slot] = Node::Leaf(majority);
                continue;
            }
            let parent = gini(pos, n);
            let mut best: Option<(f64, usize, f64)> = None;
            for f in sample(rng, n_features, self.mtry).into_iter() {
                order.clear();
                order.extend_from_slice(&rows);
                order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
                let mut left_pos = 0;
                for i in 0..n - 1 {
                    if self.y[order[i]] {
                        left_pos += 1;
                    }
                    let nl = i + 1;
                    let (lo, hi) = (self.x[order[i]][f], self.x[order[i + 1]][f]);
                    if lo == hi || nl < self.min_leaf || n - nl < self.min_leaf {
                        continue;
                    }
                    let nr = n - nl;
                    let impurity = (nl as f64 * gini(left_pos, nl)
                        + nr as f64 * gini(pos - left_pos, nr))
                        / n as f64;
                    if best.is_none_or(|(b, _, _)| impurity < b) {
                        best = Some((impurity, f, lo + (hi - lo) / 2.0));
                    }
                }
            }
            match best {
                Some((impurity, feature, threshold)) if impurity < parent - 1e-12 => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf(false));
                    nodes.push(Node::Leaf(false));
                    nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r));
                    stack.push((left, l));
                }
                _ => nodes[slot] = Node::Leaf(majority),
            }
        }
        DecisionTree { nodes }
    }
}

fn bootstrap(y: &[bool], balance: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = y.len();
    if balance {
        let pos: Vec<usize> = (0..n).filter(|&i| y[i]).collect();
        let neg: Vec<usize> = (0..n).filter(|&i| !y[i]).collect();
        if !pos.is_empty() && !neg.is_empty() {
            return (0..n)
                .map(|_| {
                    let class = if rng.random_bool(0.5) { &pos } else { &neg };
                    class[rng.random_range(0..class.len())]
                })
                .collect();
        }
    }
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

impl RandomForest {
    /// Fits a forest on row-major features `x` and binary labels `y`.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ForestParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::domain(
                "training data must be nonempty with one label per row",
            ));
        }
        let p = x[0].len();
        if p == 0 || x.iter().any(|r| r.len() != p) {
            return Err(Error::domain(
                "training rows need a common, nonzero feature count",
            ));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        if params.trees == 0 || params.min_leaf == 0 {
            return Err(Error::domain("trees and min_leaf must be positive"));
        }
        let grower = Grower {
            x,
            y,
            mtry: params.mtry.resolve(p),
            min_leaf: params.min_leaf,
        };
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let rows = bootstrap(y, params.balance_classes, &mut rng);
                grower.grow(rows, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            n_features: p,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Majority vote; an exact tie predicts the negative class.
    pub fn vote(&self, x: &[f64]) -> Vote {
        let yes = self.trees.iter().filter(|t| t.predict(x)).count();
        Vote {
            positive: 2 * yes > self.trees.len(),
            fraction: yes as f64 / self.trees.len() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mtry_rules() {
        assert_eq!(MtryRule::Sqrt.resolve(7), 2);
        assert_eq!(MtryRule::Sqrt.resolve(4), 2);
        assert_eq!(MtryRule::Sqrt.resolve(1), 1);
        assert_eq!(MtryRule::All.resolve(5), 5);
        assert_eq!(MtryRule::Fixed(9).resolve(5), 5);
        assert_eq!("auto".parse::<MtryRule>().unwrap(), MtryRule::Sqrt);
        assert_eq!("3".parse::<MtryRule>().unwrap(), MtryRule::Fixed(3));
        assert!("0".parse::<MtryRule>().is_err());
    }

    #[test]
    fn single_class_is_constant() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![true; 20];
        let f = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                trees: 25,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(f.trees().iter().all(|t| t.node_count() == 1));
        for v in [-5.0, 3.0, 100.0] {
            assert_eq!(
                f.vote(&[v, v]),
                Vote {
                    positive: true,
                    fraction: 1.0
                }
            );
        }
    }

    #[test]
    fn tie_is_negative() {
        let x = [vec![0.0], vec![1.0]];
        let forest = RandomForest {
            trees: vec![
                DecisionTree {
                    nodes: vec![Node::Leaf(true)],
                },
                DecisionTree {
                    nodes: vec![Node::Leaf(false)],
                },
            ],
            n_features: 1,
        };
        assert_eq!(
            forest.vote(&x[0]),
            Vote {
                positive: false,
                fraction: 0.5
            }
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RandomForest::fit(&[], &[], &ForestParams::default()).is_err());
        assert!(RandomForest::fit(&[vec![1.0]], &[true, false], &ForestParams::default()).is_err());
        assert!(RandomForest::fit(&[vec![f64::NAN]], &[true], &ForestParams::default()).is_err());
    }

    #[test]
    fn min_leaf_limits_depth() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let params = ForestParams {
            trees: 5,
            min_leaf: 5,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, &params).unwrap();
        assert!(f.trees().iter().all(|t| t.node_count() <= 3));
    }
}
