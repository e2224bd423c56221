//! Best-first enumeration of leaf paths by predictive probability.
//!
//! Yields cells of leaves with equal score in non-increasing order of
//! `log p(y | path) + log prior(path)`. A materialized leaf is its own cell;
//! the unmaterialized children of an expanded node form one wildcard cell.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::sample::PosteriorSample;
use super::{HdpTree, NodeId, PathSet, Step};

/// Upper bound on the log prior over a path set. Must not increase when the
/// set shrinks.
pub type PathPrior<'a> = Box<dyn Fn(&PathSet) -> f64 + 'a>;
/// Returns false for path sets that should not be explored.
pub type PathFilter<'a> = Box<dyn Fn(&PathSet) -> bool + 'a>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathYield {
    pub cell: PathSet,
    pub log_prob: f64,
    pub log_prior: f64,
}

impl PathYield {
    pub fn score(&self) -> f64 {
        self.log_prob + self.log_prior
    }
}

enum Entry {
    Node {
        node: NodeId,
        path: PathSet,
        v: Vec<f64>,
    },
    Done(PathYield),
}

struct Queued {
    key: f64,
    seq: u64,
    entry: Entry,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.total_cmp(&o.key).then_with(|| o.seq.cmp(&self.seq))
    }
}

pub struct PathIterator<'a> {
    samples: &'a [PosteriorSample],
    tree: &'a HdpTree,
    y: u32,
    prior: Option<PathPrior<'a>>,
    filter: Option<PathFilter<'a>>,
    heap: BinaryHeap<Queued>,
    seq: u64,
}

fn log_mean(xs: &[f64]) -> f64 {
    (xs.iter().sum::<f64>() / xs.len() as f64).ln()
}

impl<'a> PathIterator<'a> {
    pub fn new(
        samples: &'a [PosteriorSample],
        tree: &'a HdpTree,
        y: u32,
        prior: Option<PathPrior<'a>>,
        filter: Option<PathFilter<'a>>,
    ) -> PathIterator<'a> {
        assert!(!samples.is_empty(), "path iteration needs at least one sample");
        let mut it = PathIterator {
            samples,
            tree,
            y,
            prior,
            filter,
            heap: BinaryHeap::new(),
            seq: 0,
        };
        let root = PathSet::default();
        if it.allowed(&root) {
            let base = tree.beta[y as usize] / tree.beta_sum();
            let v = samples.iter().map(|s| s.mix(tree, 0, y, base)).collect();
            it.push_state(0, root, v);
        }
        it
    }

    fn allowed(&self, p: &PathSet) -> bool {
        self.filter.as_ref().is_none_or(|f| f(p))
    }

    fn prior_of(&self, p: &PathSet) -> f64 {
        self.prior.as_ref().map_or(0.0, |f| f(p))
    }

    fn push(&mut self, key: f64, entry: Entry) {
        self.seq += 1;
        self.heap.push(Queued {
            key,
            seq: self.seq,
            entry,
        });
    }

    fn push_done(&mut self, cell: PathSet, v: &[f64]) {
        let log_prior = self.prior_of(&cell);
        if log_prior == f64::NEG_INFINITY {
            return;
        }
        let log_prob = log_mean(v);
        self.push(
            log_prob + log_prior,
            Entry::Done(PathYield {
                cell,
                log_prob,
                log_prior,
            }),
        );
    }

    fn push_state(&mut self, node: NodeId, path: PathSet, v: Vec<f64>) {
        if self.tree.is_leaf(node) || self.tree.nodes[node].n_obs == 0 {
            self.push_done(path, &v);
            return;
        }
        let log_prior = self.prior_of(&path);
        if log_prior == f64::NEG_INFINITY {
            return;
        }
        let ub: Vec<f64> = self
            .samples
            .iter()
            .zip(&v)
            .map(|(s, &vi)| s.max_table_prob(self.tree, node, self.y).max(vi))
            .collect();
        self.push(log_mean(&ub) + log_prior, Entry::Node { node, path, v });
    }

    /// Score bound of the next yield, if any.
    pub fn peek_key(&self) -> Option<f64> {
        self.heap.peek().map(|q| q.key)
    }

    fn expand(&mut self, node: NodeId, path: PathSet, v: Vec<f64>) {
        let tree = self.tree;
        let children = &tree.nodes[node].children;
        for (&key, &child) in children {
            let p = path.child(Step::Is(key));
            if !self.allowed(&p) {
                continue;
            }
            let cv = self
                .samples
                .iter()
                .zip(&v)
                .map(|(s, &vi)| s.mix(tree, child, self.y, vi))
                .collect();
            self.push_state(child, p, cv);
        }
        let level_size = tree.level_sizes[tree.nodes[node].level];
        if (children.len() as u32) < level_size {
            let keys: BTreeSet<u32> = children.keys().copied().collect();
            let p = path.child(Step::AnyExcept(keys));
            if self.allowed(&p) {
                self.push_done(p, &v);
            }
        }
    }
}

impl Iterator for PathIterator<'_> {
    type Item = PathYield;

    fn next(&mut self) -> Option<PathYield> {
        while let Some(q) = self.heap.pop() {
            match q.entry {
                Entry::Done(y) => return Some(y),
                Entry::Node { node, path, v } => self.expand(node, path, v),
            }
        }
        None
    }
}

/// Upper bound on `log p(y | path)` over all leaves; exact when the root is
/// itself a leaf or carries no data.
pub fn bound_at_root(samples: &[PosteriorSample], tree: &HdpTree, y: u32) -> f64 {
    PathIterator::new(samples, tree, y, None, None)
        .peek_key()
        .unwrap_or(f64::NEG_INFINITY)
}
