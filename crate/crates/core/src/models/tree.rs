use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, Targets, Task, TrainConfig};
use crate::error::{Error, Result};

/// A CART node. Rows with `x[feature] < threshold` go left, others right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
    },
    Leaf {
        value: Vec<f64>,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } | TreeNode::Leaf { n_samples, .. } => *n_samples,
        }
    }
}

/// Binary decision tree; node 0 is the root. Classification leaves hold
/// class frequencies, regression leaves hold the mean target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct TreeModel {
    pub task: Task,
    n_features: usize,
    n_outputs: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

#[derive(Deserialize)]
struct RawTree {
    task: Task,
    n_features: usize,
    n_outputs: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl TryFrom<RawTree> for TreeModel {
    type Error = Error;
    fn try_from(raw: RawTree) -> Result<Self> {
        TreeModel::new(raw.task, raw.n_features, raw.n_outputs, raw.max_depth, raw.nodes)
    }
}

impl TreeModel {
    pub fn new(
        task: Task,
        n_features: usize,
        n_outputs: usize,
        max_depth: usize,
        nodes: Vec<TreeNode>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        let mut reached = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        let mut depth = 0;
        while let Some((i, d)) = stack.pop() {
            if i >= nodes.len() || reached[i] {
                return Err(Error::Model(format!("tree node {i} is out of range or shared")));
            }
            reached[i] = true;
            depth = depth.max(d);
            match &nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() || *feature >= n_features {
                        return Err(Error::Model(format!("invalid split at node {i}")));
                    }
                    stack.push((*right, d + 1));
                    stack.push((*left, d + 1));
                }
                TreeNode::Leaf { value, .. } => {
                    if value.len() != n_outputs || value.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Model(format!("invalid leaf at node {i}")));
                    }
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(Error::Model("tree has unreachable nodes".into()));
        }
        if depth > max_depth {
            return Err(Error::Model(format!("tree depth {depth} exceeds max_depth {max_depth}")));
        }
        Ok(Self {
            task,
            n_features,
            n_outputs,
            max_depth,
            nodes,
        })
    }

    /// Single leaf predicting `class` with probability 1.
    pub fn constant_class(n_features: usize, n_classes: usize, class: usize) -> Self {
        let mut value = vec![0.0; n_classes];
        value[class] = 1.0;
        Self {
            task: Task::Classification,
            n_features,
            n_outputs: n_classes,
            max_depth: 0,
            nodes: vec![TreeNode::Leaf { value, n_samples: 0 }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Node indices visited from the root to the leaf for `x`.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut i = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = &self.nodes[i]
        {
            i = if x[*feature] < *threshold { *left } else { *right };
            path.push(i);
        }
        path
    }

    fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let leaf = *self.path(x).last().unwrap();
        match &self.nodes[leaf] {
            TreeNode::Leaf { value, .. } => value,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    /// Greedy CART: Gini impurity for classes, variance for real targets.
    pub fn fit(x: &[Vec<f64>], targets: &Targets, cfg: &TrainConfig) -> Self {
        let n_features = x[0].len();
        let (task, n_outputs, y): (Task, usize, Vec<f64>) = match targets {
            Targets::Classes { labels, names } => (
                Task::Classification,
                names.len().max(2),
                labels.iter().map(|&l| l as f64).collect(),
            ),
            Targets::Values(v) => (Task::Regression, 1, v.clone()),
        };
        let mut builder = Builder {
            x,
            y: &y,
            task,
            n_outputs,
            cfg,
            nodes: Vec::new(),
        };
        let all: Vec<usize> = (0..x.len()).collect();
        builder.grow(all, 0);
        Self {
            task,
            n_features,
            n_outputs,
            max_depth: cfg.max_depth,
            nodes: builder.nodes,
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    task: Task,
    n_outputs: usize,
    cfg: &'a TrainConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> Vec<f64> {
        let n = idx.len() as f64;
        match self.task {
            Task::Classification => {
                let mut v = vec![0.0; self.n_outputs];
                for &i in idx {
                    v[self.y[i] as usize] += 1.0;
                }
                v.iter_mut().for_each(|c| *c /= n);
                v
            }
            _ => vec![idx.iter().map(|&i| self.y[i]).sum::<f64>() / n],
        }
    }

    /// Sum over children of n * impurity, from sufficient statistics.
    fn impurity(&self, counts: &[f64], sum: f64, sum_sq: f64, n: f64) -> f64 {
        match self.task {
            Task::Classification => n - counts.iter().map(|c| c * c).sum::<f64>() / n,
            _ => sum_sq - sum * sum / n,
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = self.leaf_value(&idx);
        self.nodes.push(TreeNode::Leaf {
            value: value.clone(),
            n_samples: idx.len(),
        });
        let pure = match self.task {
            Task::Classification => value.contains(&1.0),
            _ => idx.iter().all(|&i| self.y[i] == self.y[idx[0]]),
        };
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split.max(2) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] < threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            n_samples: idx.len(),
        };
        id
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len() as f64;
        let k = self.n_outputs;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut total_counts = vec![0.0; k];
        let (mut total_sum, mut total_sq) = (0.0, 0.0);
        for &i in idx {
            if self.task == Task::Classification {
                total_counts[self.y[i] as usize] += 1.0;
            }
            total_sum += self.y[i];
            total_sq += self.y[i] * self.y[i];
        }
        for f in 0..self.x[0].len() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut lc = vec![0.0; k];
            let (mut ls, mut lsq) = (0.0, 0.0);
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                if self.task == Task::Classification {
                    lc[self.y[i] as usize] += 1.0;
                }
                ls += self.y[i];
                lsq += self.y[i] * self.y[i];
                let (a, b) = (self.x[i][f], self.x[order[pos + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                let rc: Vec<f64> = total_counts.iter().zip(&lc).map(|(t, l)| t - l).collect();
                let cost = self.impurity(&lc, ls, lsq, nl)
                    + self.impurity(&rc, total_sum - ls, total_sq - lsq, nr);
                let threshold = a + (b - a) / 2.0;
                if best.is_none_or(|(c, _, _)| cost < c - 1e-12) {
                    best = Some((cost, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl Model for TreeModel {
    fn n_inputs(&self) -> Option<usize> {
        Some(self.n_features)
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(x.iter().map(|r| self.leaf_value(r).to_vec()).collect())
    }

    fn as_tree(&self) -> Option<&TreeModel> {
        Some(self)
    }

    fn to_spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Tree(self.clone()))
    }
}
