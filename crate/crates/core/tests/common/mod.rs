//! Fixture loading and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::HashMap;

use semgram::grammar::{parse_grammar, read_corpus, Example, Grammar, Symbol, SyntaxTree, TrainConfig};
use semgram::hdp::{HdpTree, PosteriorSample};
use semgram::ontology::{prior_log_weight, KnowledgeBase, PriorConfig};
use semgram::parser::{parse_with, ParseConfig, ParseResult, Selector};
use semgram::semantics::Statement;

pub const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{DIR}/{name}")).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub struct Fixture {
    pub kb: KnowledgeBase,
    pub grammar: Grammar,
}

impl Fixture {
    pub fn load(kb: &str, grammar: &str) -> Fixture {
        let kb = KnowledgeBase::parse_text(&fixture(kb)).unwrap();
        let grammar = parse_grammar(&fixture(grammar), &kb).unwrap();
        Fixture { kb, grammar }
    }

    pub fn corpus(&self, name: &str) -> Vec<Example> {
        read_corpus(&fixture(name), &self.grammar, &self.kb).unwrap()
    }

    pub fn trained(&self, corpus: &str, seed: u64) -> Grammar {
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        self.grammar.train(&self.corpus(corpus), &cfg).unwrap()
    }
}

pub fn walkthrough() -> Fixture {
    Fixture::load("walkthrough.kb", "walkthrough.grammar")
}

pub fn roundtrip() -> Fixture {
    Fixture::load("roundtrip.kb", "roundtrip.grammar")
}

thread_local! {
    static WORST_INCREASE: RefCell<(f64, usize)> = const { RefCell::new((0.0, 0)) };
}

/// Parses and records the largest rise in popped priority; every parse in
/// the integration tests goes through here.
pub fn checked_parse(sentence: &str, g: &Grammar, kb: &KnowledgeBase, sel: &dyn Selector, cfg: &ParseConfig) -> ParseResult {
    let r = parse_with(sentence, g, kb, sel, cfg).unwrap();
    let inc = r.max_priority_increase();
    WORST_INCREASE.with(|w| {
        let mut w = w.borrow_mut();
        w.0 = w.0.max(inc);
        w.1 += 1;
    });
    assert!(inc <= 1e-12, "popped priority rose by {inc} while parsing {sentence:?}");
    r
}

/// Largest popped-priority rise seen on this thread and the parse count.
pub fn worst_increase() -> (f64, usize) {
    WORST_INCREASE.with(|w| *w.borrow())
}

// ---------------------------------------------------------------------------
// Dirichlet-multinomial by sequential prediction.

/// `log p(y_1..y_n | h)` drawn one at a time, each from the posterior mean
/// given everything before it.
pub fn sequential_log_likelihood(y: &[u32], h: &[u32], beta: &[f64]) -> f64 {
    let mut h = h.to_vec();
    let bsum: f64 = beta.iter().sum();
    let mut lp = 0.0;
    for (v, &c) in y.iter().enumerate() {
        for _ in 0..c {
            let tot: u32 = h.iter().sum();
            lp += ((beta[v] + h[v] as f64) / (bsum + tot as f64)).ln();
            h[v] += 1;
        }
    }
    lp
}

// ---------------------------------------------------------------------------
// Exact CRF seating distribution for a root with leaf children.

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    // restricted growth strings
    let mut out = Vec::new();
    fn rec(cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let next = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            cur.push(b);
            rec(cur, n, out);
            cur.pop();
        }
    }
    rec(&mut Vec::new(), n, &mut out);
    out
}

fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

fn ln_rising(a: f64, n: usize) -> f64 {
    (0..n).map(|i| (a + i as f64).ln()).sum()
}

fn crp_log(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    sizes.len() as f64 * alpha.ln() + sizes.iter().map(|&s| ln_fact(s - 1)).sum::<f64>() - ln_rising(alpha, n)
}

fn relabel(xs: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    xs.iter()
        .map(|x| {
            let next = map.len();
            *map.entry(*x).or_insert(next)
        })
        .collect()
}

/// (table partition, cluster partition) of the observations.
pub type Seating = (Vec<usize>, Vec<usize>);

/// Probability of every seating of `data` (leaf, value) in a two-level HDP,
/// keyed by (table partition, cluster partition) of the observations in
/// order, both labelled by first appearance.
pub fn exact_seatings(data: &[(usize, u32)], alpha_root: f64, alpha_leaf: f64, beta: &[f64]) -> HashMap<Seating, f64> {
    let n = data.len();
    let bsum: f64 = beta.iter().sum();
    let mut leaves: Vec<usize> = data.iter().map(|d| d.0).collect();
    leaves.sort();
    leaves.dedup();
    let by_leaf: Vec<Vec<usize>> = leaves
        .iter()
        .map(|l| (0..n).filter(|&i| data[i].0 == *l).collect())
        .collect();

    let mut weights: Vec<(Seating, f64)> = Vec::new();
    // choose a table partition per leaf
    let per_leaf: Vec<Vec<Vec<usize>>> = by_leaf.iter().map(|o| set_partitions(o.len())).collect();
    let mut choice = vec![0usize; leaves.len()];
    loop {
        let mut table_of = vec![0usize; n];
        let mut tables: Vec<Vec<usize>> = Vec::new();
        let mut lp = 0.0;
        for (li, obs) in by_leaf.iter().enumerate() {
            let part = &per_leaf[li][choice[li]];
            let k = part.iter().max().unwrap() + 1;
            let base = tables.len();
            tables.extend((0..k).map(|_| Vec::new()));
            for (pos, &o) in obs.iter().enumerate() {
                table_of[o] = base + part[pos];
                tables[base + part[pos]].push(o);
            }
            let sizes: Vec<usize> = tables[base..].iter().map(Vec::len).collect();
            lp += crp_log(&sizes, alpha_leaf);
        }
        for cp in set_partitions(tables.len()) {
            let k = cp.iter().max().unwrap() + 1;
            let mut sizes = vec![0usize; k];
            let mut hist = vec![vec![0u32; beta.len()]; k];
            for (t, &c) in cp.iter().enumerate() {
                sizes[c] += 1;
                for &o in &tables[t] {
                    hist[c][data[o].1 as usize] += 1;
                }
            }
            let mut w = lp + crp_log(&sizes, alpha_root);
            for h in &hist {
                let tot: u32 = h.iter().sum();
                w += h
                    .iter()
                    .enumerate()
                    .map(|(v, &c)| ln_rising(beta[v], c as usize))
                    .sum::<f64>()
                    - ln_rising(bsum, tot as usize);
            }
            let clusters: Vec<usize> = (0..n).map(|o| cp[table_of[o]]).collect();
            weights.push(((relabel(&table_of), relabel(&clusters)), w));
        }
        // next combination
        let mut i = 0;
        loop {
            if i == choice.len() {
                let m = weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = weights.iter().map(|w| (w.1 - m).exp()).sum();
                let mut out = HashMap::new();
                for (k, w) in weights {
                    *out.entry(k).or_insert(0.0) += (w - m).exp() / z;
                }
                return out;
            }
            choice[i] += 1;
            if choice[i] < per_leaf[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Posterior predictive at a leaf, read off the frozen samples.

/// `p(y | leaf path)` averaged over samples, walking materialized nodes from
/// the root and mixing each node's tables with its parent's value.
pub fn leaf_predictive(samples: &[PosteriorSample], tree: &HdpTree, path: &[u32], y: u32) -> f64 {
    let bsum: f64 = tree.beta.iter().sum();
    let base = tree.beta[y as usize] / bsum;
    let mut chain = vec![0usize];
    let mut node = 0usize;
    for v in path {
        match tree.nodes[node].children.get(v) {
            Some(&c) => {
                chain.push(c);
                node = c;
            }
            None => break,
        }
    }
    let mut total = 0.0;
    for s in samples {
        let mut value = base;
        for &n in &chain {
            let Some(sn) = s.nodes.get(n) else { continue };
            if sn.total == 0 {
                continue;
            }
            let a = tree.alpha[tree.nodes[n].level];
            let mut num = a * value;
            for &(count, k) in &sn.tables {
                let h = &s.clusters[k as usize];
                num += count as f64 * (tree.beta[y as usize] + h.get(y) as f64) / (bsum + h.total() as f64);
            }
            value = num / (sn.total as f64 + a);
        }
        total += value;
    }
    total / samples.len() as f64
}

pub fn all_leaves(sizes: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (0..s).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

// ---------------------------------------------------------------------------
// Exhaustive trees and scores.

/// Every syntax tree of `nt` over characters `[i, j)`.
pub fn all_trees(g: &Grammar, text: &[char], nt: usize, i: usize, j: usize) -> Vec<SyntaxTree> {
    let mut memo = HashMap::new();
    trees_memo(g, text, nt, i, j, &mut memo)
}

fn trees_memo(
    g: &Grammar,
    text: &[char],
    nt: usize,
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize, usize), Vec<SyntaxTree>>,
) -> Vec<SyntaxTree> {
    if let Some(v) = memo.get(&(nt, i, j)) {
        return v.clone();
    }
    let mut out = Vec::new();
    for r in &g.rules[nt] {
        // sequences of children covering [i, j)
        let mut partial: Vec<(usize, Vec<SyntaxTree>)> = vec![(i, Vec::new())];
        for item in &r.rhs {
            let mut next = Vec::new();
            for (pos, kids) in partial {
                match &item.symbol {
                    Symbol::Terminal(t) => {
                        let len = t.chars().count();
                        if pos + len <= j && text[pos..pos + len].iter().copied().eq(t.chars()) {
                            let mut k = kids.clone();
                            k.push(SyntaxTree::leaf(t, pos, item.implicit));
                            next.push((pos + len, k));
                        }
                    }
                    Symbol::Nonterminal(b) => {
                        for e in pos..=j {
                            if e == pos && !g.is_affix_nt(*b) {
                                continue;
                            }
                            for sub in trees_memo(g, text, *b, pos, e, memo) {
                                let mut k = kids.clone();
                                k.push(sub);
                                next.push((e, k));
                            }
                        }
                    }
                }
            }
            partial = next;
        }
        for (pos, kids) in partial {
            if pos == j {
                out.push(SyntaxTree {
                    label: g.nt_name(nt).to_string(),
                    rule: Some(r.id),
                    start: i,
                    end: j,
                    children: kids,
                    implicit: false,
                });
            }
        }
    }
    memo.insert((nt, i, j), out.clone());
    out
}

/// Every (statement, tree) pair of the sentence with its joint log score,
/// keeping finite scores only.
pub fn brute_force(sentence: &str, g: &Grammar, kb: &KnowledgeBase, prior: &PriorConfig) -> Vec<(Statement, SyntaxTree, f64)> {
    let text: Vec<char> = sentence.chars().collect();
    let trees = all_trees(g, &text, g.root, 0, text.len());
    let statements = g.nonterminals[g.root].domain.members();
    let mut out = Vec::new();
    for t in &trees {
        for s in &statements {
            let lp = g.derivation_log_prob(s, t).unwrap();
            if lp == f64::NEG_INFINITY {
                continue;
            }
            out.push((s.clone(), t.clone(), lp + prior_log_weight(s, kb, prior).unwrap()));
        }
    }
    out
}

/// Statement-level rank of `gold` in a result: one plus the number of
/// distinct statements whose best output scores strictly higher.
pub fn statement_rank(r: &ParseResult, gold: &Statement) -> Option<usize> {
    let gold_score = r.outputs.iter().find(|o| o.set.contains(gold))?.score;
    let mut above = std::collections::HashSet::new();
    for o in &r.outputs {
        if o.score > gold_score {
            for m in o.set.members() {
                above.insert(m);
            }
        }
    }
    Some(above.len() + 1)
}
