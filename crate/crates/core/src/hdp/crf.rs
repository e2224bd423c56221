//! Chinese-restaurant-franchise state and its collapsed Gibbs sampler.
//!
//! Customers at a leaf are observations; customers at an internal node are
//! the tables of its children. Every table records the histogram of all
//! observations routed through it, so a root table's histogram is the data of
//! its cluster.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{collapsed_log_likelihood, log_rising, log_sum_exp, Hist};
use super::sample::{PosteriorSample, SampleNode};
use super::{HdpError, HdpTree, NodeId, SamplerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Table {
    count: u32,
    parent: Option<usize>,
    hist: Hist,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct NodeTables {
    slots: Vec<Option<Table>>,
    free: Vec<usize>,
    customers: u32,
}

impl NodeTables {
    fn live(&self) -> impl Iterator<Item = (usize, &Table)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().map(|t| (i, t)))
    }

    fn insert(&mut self, t: Table) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(t);
                i
            }
            None => {
                self.slots.push(Some(t));
                self.slots.len() - 1
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Obs {
    leaf: NodeId,
    value: u32,
    table: usize,
}

/// A table's customer count and its (value, count) histogram.
pub type TableKey = (u32, Vec<(u32, u32)>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrfState {
    nodes: Vec<NodeTables>,
    obs: Vec<Obs>,
}

impl CrfState {
    /// Inserts the data into the tree and seats it one observation at a time
    /// from the sequential conditional.
    pub fn initialize<R: Rng>(
        tree: &mut HdpTree,
        data: &[(Vec<u32>, u32)],
        rng: &mut R,
    ) -> Result<CrfState, HdpError> {
        for (path, y) in data {
            tree.check_path(path)?;
            if *y as usize >= tree.vocab() {
                return Err(HdpError::BadValue {
                    value: *y,
                    vocab: tree.vocab(),
                });
            }
        }
        let mut state = CrfState {
            nodes: Vec::new(),
            obs: Vec::with_capacity(data.len()),
        };
        for (path, y) in data {
            let leaf = tree.insert(path)?;
            state.nodes.resize_with(tree.nodes.len(), NodeTables::default);
            let yh = Hist::single(*y);
            let t = state.seat(tree, leaf, &yh, rng);
            state.add_hist(tree, leaf, t, &yh);
            state.obs.push(Obs {
                leaf,
                value: *y,
                table: t,
            });
        }
        state.nodes.resize_with(tree.nodes.len(), NodeTables::default);
        Ok(state)
    }

    fn table(&self, n: NodeId, t: usize) -> &Table {
        self.nodes[n].slots[t].as_ref().expect("dead table")
    }

    fn table_mut(&mut self, n: NodeId, t: usize) -> &mut Table {
        self.nodes[n].slots[t].as_mut().expect("dead table")
    }

    fn root_hist(&self, tree: &HdpTree, mut n: NodeId, mut t: usize) -> &Hist {
        loop {
            let tab = self.table(n, t);
            match (tab.parent, tree.nodes[n].parent) {
                (Some(pt), Some(p)) => {
                    n = p;
                    t = pt;
                }
                _ => return &tab.hist,
            }
        }
    }

    fn add_hist(&mut self, tree: &HdpTree, mut n: NodeId, mut t: usize, y: &Hist) {
        loop {
            let tab = self.table_mut(n, t);
            tab.hist.add(y);
            match (tab.parent, tree.nodes[n].parent) {
                (Some(pt), Some(p)) => {
                    n = p;
                    t = pt;
                }
                _ => return,
            }
        }
    }

    fn sub_hist(&mut self, tree: &HdpTree, mut n: NodeId, mut t: usize, y: &Hist) {
        loop {
            let tab = self.table_mut(n, t);
            tab.hist.sub(y);
            match (tab.parent, tree.nodes[n].parent) {
                (Some(pt), Some(p)) => {
                    n = p;
                    t = pt;
                }
                _ => return,
            }
        }
    }

    /// Removes one customer from table `t`; an emptied table leaves its
    /// parent table in turn.
    fn decrement(&mut self, tree: &HdpTree, n: NodeId, t: usize) {
        self.nodes[n].customers -= 1;
        let tab = self.table_mut(n, t);
        tab.count -= 1;
        if tab.count > 0 {
            return;
        }
        debug_assert!(tab.hist.is_empty());
        let parent = tab.parent;
        self.nodes[n].slots[t] = None;
        self.nodes[n].free.push(t);
        if let (Some(pt), Some(p)) = (parent, tree.nodes[n].parent) {
            self.decrement(tree, p, pt);
        }
    }

    /// Log marginal of `y` under a fresh draw from node `n`'s distribution.
    fn log_new(&self, tree: &HdpTree, n: NodeId, y: &Hist) -> f64 {
        let bsum = tree.beta_sum();
        match tree.nodes[n].parent {
            None => collapsed_log_likelihood(y, &Hist::new(), &tree.beta, bsum),
            Some(p) => {
                let a = tree.alpha_at(p);
                let norm = (self.nodes[p].customers as f64 + a).ln();
                let mut terms: Vec<f64> = self.nodes[p]
                    .live()
                    .map(|(t, tab)| {
                        (tab.count as f64).ln() - norm
                            + collapsed_log_likelihood(y, self.root_hist(tree, p, t), &tree.beta, bsum)
                    })
                    .collect();
                terms.push(a.ln() - norm + self.log_new(tree, p, y));
                log_sum_exp(&terms)
            }
        }
    }

    /// Seats a customer carrying data `y` at node `n`, creating tables up the
    /// tree as needed. The caller adds `y` to the histograms.
    fn seat<R: Rng>(&mut self, tree: &HdpTree, n: NodeId, y: &Hist, rng: &mut R) -> usize {
        let bsum = tree.beta_sum();
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        for (t, tab) in self.nodes[n].live() {
            ids.push(Some(t));
            weights.push(
                (tab.count as f64).ln()
                    + collapsed_log_likelihood(y, self.root_hist(tree, n, t), &tree.beta, bsum),
            );
        }
        ids.push(None);
        weights.push(tree.alpha_at(n).ln() + self.log_new(tree, n, y));
        let pick = ids[sample_log_weights(&weights, rng)];
        self.nodes[n].customers += 1;
        match pick {
            Some(t) => {
                self.table_mut(n, t).count += 1;
                t
            }
            None => {
                let parent = tree.nodes[n].parent.map(|p| self.seat(tree, p, y, rng));
                self.nodes[n].insert(Table {
                    count: 1,
                    parent,
                    hist: Hist::new(),
                })
            }
        }
    }

    /// One pass over every observation, then every non-root table.
    pub fn gibbs_sweep<R: Rng>(&mut self, tree: &HdpTree, rng: &mut R) {
        for i in 0..self.obs.len() {
            let Obs { leaf, value, table } = self.obs[i];
            let y = Hist::single(value);
            self.sub_hist(tree, leaf, table, &y);
            self.decrement(tree, leaf, table);
            let t = self.seat(tree, leaf, &y, rng);
            self.add_hist(tree, leaf, t, &y);
            self.obs[i].table = t;
        }
        for n in 1..self.nodes.len() {
            let p = tree.nodes[n].parent.expect("non-root node has a parent");
            let ids: Vec<usize> = self.nodes[n].live().map(|(t, _)| t).collect();
            for t in ids {
                let (y, pt) = {
                    let tab = self.table(n, t);
                    (tab.hist.clone(), tab.parent.expect("non-root table has a parent"))
                };
                self.sub_hist(tree, p, pt, &y);
                self.decrement(tree, p, pt);
                let new_pt = self.seat(tree, p, &y, rng);
                self.add_hist(tree, p, new_pt, &y);
                self.table_mut(n, t).parent = Some(new_pt);
            }
        }
    }

    /// Log joint probability of the seating and the data.
    pub fn log_joint(&self, tree: &HdpTree) -> f64 {
        let bsum = tree.beta_sum();
        let mut lp = 0.0;
        for (n, nt) in self.nodes.iter().enumerate() {
            if nt.customers == 0 {
                continue;
            }
            let a = tree.alpha_at(n);
            for (_, tab) in nt.live() {
                lp += a.ln() + log_rising(1.0, tab.count - 1);
            }
            lp -= log_rising(a, nt.customers);
        }
        for (_, tab) in self.nodes[0].live() {
            lp += collapsed_log_likelihood(&tab.hist, &Hist::new(), &tree.beta, bsum);
        }
        lp
    }

    /// Recounts customers and histograms from scratch.
    pub fn check(&self, tree: &HdpTree) -> Result<(), HdpError> {
        let fail = |m: String| Err(HdpError::Inconsistent(m));
        if self.nodes.len() != tree.nodes.len() {
            return fail("node count mismatch".into());
        }
        let mut expect_count: Vec<Vec<u32>> =
            self.nodes.iter().map(|nt| vec![0; nt.slots.len()]).collect();
        let mut expect_hist: Vec<Vec<Hist>> = self
            .nodes
            .iter()
            .map(|nt| vec![Hist::new(); nt.slots.len()])
            .collect();
        for o in &self.obs {
            if self.nodes[o.leaf].slots.get(o.table).is_none_or(|t| t.is_none()) {
                return fail(format!("observation seated at dead table {}", o.table));
            }
            expect_count[o.leaf][o.table] += 1;
            expect_hist[o.leaf][o.table].add(&Hist::single(o.value));
        }
        // children before parents: node ids grow with depth along any path
        for n in (0..self.nodes.len()).rev() {
            for (t, tab) in self.nodes[n].live() {
                if tab.count != expect_count[n][t] {
                    return fail(format!("node {n} table {t}: count {} vs {}", tab.count, expect_count[n][t]));
                }
                if tab.hist != expect_hist[n][t] {
                    return fail(format!("node {n} table {t}: histogram mismatch"));
                }
                if tab.count == 0 {
                    return fail(format!("node {n} table {t} is empty"));
                }
                if let (Some(pt), Some(p)) = (tab.parent, tree.nodes[n].parent) {
                    if self.nodes[p].slots.get(pt).is_none_or(|x| x.is_none()) {
                        return fail(format!("node {n} table {t} points at dead parent table"));
                    }
                    expect_count[p][pt] += 1;
                    let h = tab.hist.clone();
                    expect_hist[p][pt].add(&h);
                }
            }
            let total: u32 = self.nodes[n].live().map(|(_, t)| t.count).sum();
            if total != self.nodes[n].customers {
                return fail(format!("node {n}: customers {} vs {total}", self.nodes[n].customers));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, tree: &HdpTree) -> PosteriorSample {
        let mut cluster_of = vec![usize::MAX; self.nodes.first().map_or(0, |n| n.slots.len())];
        let mut clusters = Vec::new();
        if let Some(root) = self.nodes.first() {
            for (t, tab) in root.live() {
                cluster_of[t] = clusters.len();
                clusters.push(tab.hist.clone());
            }
        }
        let nodes = (0..tree.nodes.len())
            .map(|n| {
                let Some(nt) = self.nodes.get(n) else {
                    return SampleNode::default();
                };
                let tables = nt
                    .live()
                    .map(|(t, tab)| {
                        let (mut m, mut s) = (n, t);
                        while let (Some(pt), Some(p)) = (self.table(m, s).parent, tree.nodes[m].parent) {
                            m = p;
                            s = pt;
                        }
                        (tab.count, cluster_of[s] as u32)
                    })
                    .collect();
                SampleNode {
                    total: nt.customers,
                    tables,
                }
            })
            .collect();
        PosteriorSample { nodes, clusters }
    }

    /// Canonical view of the seating: for each node, the sorted multiset of
    /// (count, cluster data) pairs. Two states with the same partition map
    /// to equal keys.
    pub fn seating_key(&self) -> Vec<Vec<TableKey>> {
        (0..self.nodes.len())
            .map(|n| {
                let mut v: Vec<TableKey> = self.nodes[n]
                    .live()
                    .map(|(_, tab)| (tab.count, tab.hist.iter().collect()))
                    .collect();
                v.sort();
                v
            })
            .collect()
    }

    /// Partition of the observations by the table they sit at, labelled in
    /// order of first appearance.
    pub fn table_partition(&self) -> Vec<usize> {
        let mut label = std::collections::HashMap::new();
        self.obs
            .iter()
            .map(|o| {
                let next = label.len();
                *label.entry((o.leaf, o.table)).or_insert(next)
            })
            .collect()
    }

    /// Partition of the observations induced by the root clusters.
    pub fn root_partition(&self, tree: &HdpTree) -> Vec<usize> {
        let mut label = std::collections::HashMap::new();
        self.obs
            .iter()
            .map(|o| {
                let (mut m, mut s) = (o.leaf, o.table);
                while let (Some(pt), Some(p)) = (self.table(m, s).parent, tree.nodes[m].parent) {
                    m = p;
                    s = pt;
                }
                let next = label.len();
                *label.entry(s).or_insert(next)
            })
            .collect()
    }
}

pub(crate) fn sample_log_weights<R: Rng>(w: &[f64], rng: &mut R) -> usize {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = w.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = p.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, x) in p.iter().enumerate() {
        if u < *x {
            return i;
        }
        u -= x;
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Runs burn-in, then collects `n_samples` states `thin` sweeps apart.
/// Also returns the joint log probability after every sweep.
pub fn sample_posterior<R: Rng>(
    tree: &HdpTree,
    state: &mut CrfState,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(Vec<PosteriorSample>, Vec<f64>), HdpError> {
    let mut trace = Vec::new();
    for _ in 0..cfg.burn_in {
        state.gibbs_sweep(tree, rng);
        trace.push(state.log_joint(tree));
    }
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thin.max(1) {
            state.gibbs_sweep(tree, rng);
            trace.push(state.log_joint(tree));
        }
        samples.push(state.snapshot(tree));
    }
    if cfg.n_samples == 0 {
        samples.push(state.snapshot(tree));
    }
    state.check(tree)?;
    Ok((samples, trace))
}
