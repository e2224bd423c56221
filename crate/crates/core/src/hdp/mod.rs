//! Hierarchical Dirichlet process over a feature tree.
//!
//! Each internal node's distribution is drawn from a Dirichlet process
//! centred on its parent's; the root is centred on a Dirichlet base. Only
//! nodes that carry observations are materialized.

pub mod crf;
pub mod iter;
pub mod likelihood;
pub mod sample;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crf::CrfState;
pub use iter::{bound_at_root, PathFilter, PathIterator, PathPrior, PathYield};
pub use likelihood::{collapsed_log_likelihood, log_sum_exp, Hist};
pub use sample::PosteriorSample;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HdpError {
    #[error("path {path:?} does not fit level sizes {sizes:?}")]
    BadPath { path: Vec<u32>, sizes: Vec<u32> },
    #[error("observation {value} is outside the vocabulary of size {vocab}")]
    BadValue { value: u32, vocab: usize },
    #[error("need {need} concentration parameters, got {got}")]
    BadAlpha { need: usize, got: usize },
    #[error("inconsistent sampler state: {0}")]
    Inconsistent(String),
    #[error("cell spans several distinct leaves")]
    NotALeaf,
    #[error("concentration and base parameters must be positive and finite")]
    NonPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<NodeId>,
    pub level: usize,
    pub key: u32,
    pub children: BTreeMap<u32, NodeId>,
    /// Observations at or below this node.
    pub n_obs: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdpTree {
    /// Number of values each feature level can take.
    pub level_sizes: Vec<u32>,
    /// Concentration per level, root first; one more entry than levels.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub nodes: Vec<TreeNode>,
}

impl HdpTree {
    pub fn new(level_sizes: Vec<u32>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<HdpTree, HdpError> {
        if alpha.len() != level_sizes.len() + 1 {
            return Err(HdpError::BadAlpha {
                need: level_sizes.len() + 1,
                got: alpha.len(),
            });
        }
        if alpha.iter().chain(&beta).any(|x| !(*x > 0.0 && x.is_finite())) || beta.is_empty() {
            return Err(HdpError::NonPositive);
        }
        Ok(HdpTree {
            level_sizes,
            alpha,
            beta,
            nodes: vec![TreeNode {
                parent: None,
                level: 0,
                key: 0,
                children: BTreeMap::new(),
                n_obs: 0,
            }],
        })
    }

    pub fn depth(&self) -> usize {
        self.level_sizes.len()
    }

    pub fn vocab(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.nodes[n].level == self.depth()
    }

    pub fn alpha_at(&self, n: NodeId) -> f64 {
        self.alpha[self.nodes[n].level]
    }

    pub fn check_path(&self, path: &[u32]) -> Result<(), HdpError> {
        if path.len() != self.depth() || path.iter().zip(&self.level_sizes).any(|(v, s)| v >= s) {
            return Err(HdpError::BadPath {
                path: path.to_vec(),
                sizes: self.level_sizes.clone(),
            });
        }
        Ok(())
    }

    /// Materializes the path and counts one observation along it.
    pub fn insert(&mut self, path: &[u32]) -> Result<NodeId, HdpError> {
        self.check_path(path)?;
        let mut n = 0;
        self.nodes[0].n_obs += 1;
        for (level, &v) in path.iter().enumerate() {
            n = match self.nodes[n].children.get(&v) {
                Some(&c) => c,
                None => {
                    let c = self.nodes.len();
                    self.nodes.push(TreeNode {
                        parent: Some(n),
                        level: level + 1,
                        key: v,
                        children: BTreeMap::new(),
                        n_obs: 0,
                    });
                    self.nodes[n].children.insert(v, c);
                    c
                }
            };
            self.nodes[n].n_obs += 1;
        }
        Ok(n)
    }

    /// Deepest materialized node on `path`.
    pub fn deepest(&self, path: &[u32]) -> NodeId {
        let mut n = 0;
        for v in path {
            match self.nodes[n].children.get(v) {
                Some(&c) => n = c,
                None => break,
            }
        }
        n
    }

    pub fn path_of(&self, mut n: NodeId) -> Vec<u32> {
        let mut out = Vec::new();
        while let Some(p) = self.nodes[n].parent {
            out.push(self.nodes[n].key);
            n = p;
        }
        out.reverse();
        out
    }

    /// Node that every leaf in `cell` shares, or an error if the cell covers
    /// leaves with different materialized ancestors.
    pub fn node_for_cell(&self, cell: &PathSet) -> Result<NodeId, HdpError> {
        let mut n = 0;
        for step in &cell.steps {
            if self.is_leaf(n) {
                break;
            }
            match step {
                Step::Is(v) => match self.nodes[n].children.get(v) {
                    Some(&c) => n = c,
                    None => return Ok(n),
                },
                Step::AnyExcept(ex) => {
                    if self.nodes[n].children.keys().any(|k| !ex.contains(k)) {
                        return Err(HdpError::NotALeaf);
                    }
                    return Ok(n);
                }
            }
        }
        if !self.is_leaf(n) && !self.nodes[n].children.is_empty() {
            return Err(HdpError::NotALeaf);
        }
        Ok(n)
    }
}

/// One level of a path set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Is(u32),
    AnyExcept(BTreeSet<u32>),
}

impl Step {
    pub fn contains(&self, v: u32) -> bool {
        match self {
            Step::Is(x) => *x == v,
            Step::AnyExcept(e) => !e.contains(&v),
        }
    }

    pub fn as_slot(&self) -> crate::semantics::IdSlot {
        match self {
            Step::Is(v) => crate::semantics::IdSlot::single(*v),
            Step::AnyExcept(e) => crate::semantics::IdSlot::AllExcept(e.clone()),
        }
    }
}

/// A product set of paths; levels past `steps.len()` are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSet {
    pub steps: Vec<Step>,
}

impl PathSet {
    pub fn exact(path: &[u32]) -> PathSet {
        PathSet {
            steps: path.iter().map(|&v| Step::Is(v)).collect(),
        }
    }

    pub fn contains(&self, path: &[u32]) -> bool {
        self.steps.iter().zip(path).all(|(s, &v)| s.contains(v))
    }

    pub fn child(&self, step: Step) -> PathSet {
        let mut steps = self.steps.clone();
        steps.push(step);
        PathSet { steps }
    }

    /// Every full-depth path in the set.
    pub fn leaves(&self, sizes: &[u32]) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for (level, &size) in sizes.iter().enumerate() {
            let vals: Vec<u32> = (0..size)
                .filter(|&v| self.steps.get(level).is_none_or(|s| s.contains(v)))
                .collect();
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 5,
            burn_in: 200,
            thin: 10,
        }
    }
}

/// A fitted HDP: tree, training data and posterior samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdpModel {
    pub tree: HdpTree,
    pub data: Vec<(Vec<u32>, u32)>,
    pub samples: Vec<PosteriorSample>,
    /// Joint log probability after each sweep.
    pub trace: Vec<f64>,
}

impl HdpModel {
    /// Unfitted model; predictions fall back to the base measure.
    pub fn empty(tree: HdpTree) -> HdpModel {
        let samples = vec![PosteriorSample::empty(&tree)];
        HdpModel {
            tree,
            data: Vec::new(),
            samples,
            trace: Vec::new(),
        }
    }

    pub fn fit<R: Rng>(
        tree: HdpTree,
        data: Vec<(Vec<u32>, u32)>,
        cfg: &SamplerConfig,
        rng: &mut R,
    ) -> Result<HdpModel, HdpError> {
        let mut tree = tree;
        let mut state = CrfState::initialize(&mut tree, &data, rng)?;
        let (samples, trace) = crf::sample_posterior(&tree, &mut state, cfg, rng)?;
        Ok(HdpModel {
            tree,
            data,
            samples,
            trace,
        })
    }

    /// Posterior predictive probability of `y` at the leaf `path`, averaged
    /// over samples.
    pub fn predictive(&self, path: &[u32], y: u32) -> f64 {
        sample::mean_predictive(&self.samples, &self.tree, self.tree.deepest(path), y)
    }

    pub fn log_predictive(&self, path: &[u32], y: u32) -> f64 {
        self.predictive(path, y).ln()
    }
}
