//! Frozen posterior samples and the predictive they induce.

use serde::{Deserialize, Serialize};

use super::likelihood::Hist;
use super::{HdpTree, NodeId};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleNode {
    pub total: u32,
    /// `(customers, root cluster)` per table.
    pub tables: Vec<(u32, u32)>,
}

/// One seating arrangement, reduced to what prediction needs: table sizes,
/// each table's root cluster, and the cluster histograms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub nodes: Vec<SampleNode>,
    pub clusters: Vec<Hist>,
}

impl PosteriorSample {
    pub fn empty(tree: &HdpTree) -> PosteriorSample {
        PosteriorSample {
            nodes: vec![SampleNode::default(); tree.nodes.len()],
            clusters: Vec::new(),
        }
    }

    /// `p(y | cluster k)`, the cluster's posterior mean.
    pub fn cluster_prob(&self, tree: &HdpTree, k: u32, y: u32) -> f64 {
        let h = &self.clusters[k as usize];
        (tree.beta[y as usize] + h.get(y) as f64) / (tree.beta_sum() + h.total() as f64)
    }

    /// Mixes node `n`'s tables with the value inherited from its parent.
    pub fn mix(&self, tree: &HdpTree, n: NodeId, y: u32, parent_value: f64) -> f64 {
        let Some(node) = self.nodes.get(n) else {
            return parent_value;
        };
        if node.total == 0 {
            return parent_value;
        }
        let a = tree.alpha_at(n);
        let norm = node.total as f64 + a;
        let tables: f64 = node
            .tables
            .iter()
            .map(|&(c, k)| c as f64 * self.cluster_prob(tree, k, y))
            .sum();
        (tables + a * parent_value) / norm
    }

    /// Largest `p(y | table)` over the tables at `n`, or zero if none.
    pub fn max_table_prob(&self, tree: &HdpTree, n: NodeId, y: u32) -> f64 {
        self.nodes.get(n).map_or(0.0, |node| {
            node.tables
                .iter()
                .map(|&(_, k)| self.cluster_prob(tree, k, y))
                .fold(0.0, f64::max)
        })
    }

    /// Predictive probability of `y` at node `n`; unmaterialized descendants
    /// share this value.
    pub fn predictive(&self, tree: &HdpTree, n: NodeId, y: u32) -> f64 {
        let base = tree.beta[y as usize] / tree.beta_sum();
        let mut chain = vec![n];
        while let Some(p) = tree.nodes[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain
            .into_iter()
            .rev()
            .fold(base, |v, m| self.mix(tree, m, y, v))
    }
}

pub fn mean_predictive(samples: &[PosteriorSample], tree: &HdpTree, n: NodeId, y: u32) -> f64 {
    if samples.is_empty() {
        return tree.beta[y as usize] / tree.beta_sum();
    }
    samples.iter().map(|s| s.predictive(tree, n, y)).sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_predicts_base_measure() {
        let tree = HdpTree::new(vec![3], vec![1.0, 1.0], vec![0.1, 0.3]).unwrap();
        let s = PosteriorSample::empty(&tree);
        assert!((s.predictive(&tree, 0, 1) - 0.75).abs() < 1e-12);
        assert!((mean_predictive(&[], &tree, 0, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn predictive_sums_to_one() {
        let tree = {
            let mut t = HdpTree::new(vec![2], vec![0.5, 2.0], vec![0.1; 3]).unwrap();
            t.insert(&[1]).unwrap();
            t
        };
        let s = PosteriorSample {
            nodes: vec![
                SampleNode {
                    total: 2,
                    tables: vec![(1, 0), (1, 1)],
                },
                SampleNode {
                    total: 3,
                    tables: vec![(2, 0), (1, 1)],
                },
            ],
            clusters: vec![Hist::from_counts(&[2, 0, 0]), Hist::from_counts(&[0, 1, 0])],
        };
        for n in 0..2 {
            let total: f64 = (0..3).map(|y| s.predictive(&tree, n, y)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
