//! Syntactic upper bounds on inner log probabilities.

use std::collections::HashMap;

use super::select::Selector;
use crate::grammar::{Grammar, NtId, Symbol};

const NEG: f64 = f64::NEG_INFINITY;

/// `I[A, i, j]`: an upper bound on the inner log probability of any parse of
/// `A` over characters `[i, j)`, ignoring semantics. Terminals only need the
/// right length.
#[derive(Clone, Debug)]
pub struct InnerBounds {
    n: usize,
    values: Vec<f64>,
    /// Rule bounds, indexed `[nt][rule]`.
    pub rule_bounds: Vec<Vec<f64>>,
}

impl InnerBounds {
    pub fn compute(g: &Grammar, sel: &dyn Selector, n: usize) -> InnerBounds {
        let rule_bounds: Vec<Vec<f64>> = (0..g.nonterminals.len())
            .map(|nt| (0..g.rules[nt].len()).map(|r| sel.rule_bound(nt, r)).collect())
            .collect();
        let w = n + 1;
        let mut ib = InnerBounds {
            n,
            values: vec![NEG; g.nonterminals.len() * w * w],
            rule_bounds,
        };
        // rules made only of terminals have one possible length
        for (nt, rules) in g.rules.iter().enumerate() {
            for r in rules {
                let rb = ib.rule_bounds[nt][r.id];
                let Some(len) = terminal_len(&r.rhs) else { continue };
                for i in 0..w.saturating_sub(len) {
                    let v = ib.get_mut(nt, i, i + len);
                    *v = v.max(rb);
                }
            }
        }
        // values only rise; without unit or empty cycles this settles
        loop {
            let mut changed = false;
            for (nt, rules) in g.rules.iter().enumerate() {
                for r in rules {
                    let rb = ib.rule_bounds[nt][r.id];
                    if rb == NEG || terminal_len(&r.rhs).is_some() {
                        continue;
                    }
                    for i in 0..w {
                        let f = ib.forward(&r.rhs, i);
                        for (j, fj) in f.iter().enumerate().skip(i) {
                            let v = rb + fj;
                            if v > ib.get(nt, i, j) {
                                *ib.get_mut(nt, i, j) = v;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return ib;
            }
        }
    }

    pub fn get(&self, nt: NtId, i: usize, j: usize) -> f64 {
        let w = self.n + 1;
        self.values[(nt * w + i) * w + j]
    }

    fn get_mut(&mut self, nt: NtId, i: usize, j: usize) -> &mut f64 {
        let w = self.n + 1;
        &mut self.values[(nt * w + i) * w + j]
    }

    /// Best bound of `rhs` started at `i`, for every end position.
    #[allow(clippy::needless_range_loop)]
    fn forward(&self, rhs: &[crate::grammar::RhsItem], i: usize) -> Vec<f64> {
        let w = self.n + 1;
        let mut f = vec![NEG; w];
        f[i] = 0.0;
        for item in rhs {
            let mut g = vec![NEG; w];
            for m in i..w {
                if f[m] == NEG {
                    continue;
                }
                match &item.symbol {
                    Symbol::Terminal(t) => {
                        let e = m + t.chars().count();
                        if e < w {
                            g[e] = g[e].max(f[m]);
                        }
                    }
                    Symbol::Nonterminal(b) => {
                        for (e, ge) in g.iter_mut().enumerate().skip(m) {
                            let v = f[m] + self.get(*b, m, e);
                            if v > *ge {
                                *ge = v;
                            }
                        }
                    }
                }
            }
            f = g;
        }
        f
    }

    /// `out[k][m]`: best bound of `rhs[k..]` started at `m` and ending at
    /// `end`.
    #[allow(clippy::needless_range_loop)]
    pub fn suffix(&self, rhs: &[crate::grammar::RhsItem], end: usize) -> Vec<Vec<f64>> {
        let w = self.n + 1;
        let mut out = vec![vec![NEG; w]; rhs.len() + 1];
        out[rhs.len()][end] = 0.0;
        for k in (0..rhs.len()).rev() {
            let (head, tail) = out.split_at_mut(k + 1);
            let (cur, next) = (&mut head[k], &tail[0]);
            for m in 0..=end {
                cur[m] = match &rhs[k].symbol {
                    Symbol::Terminal(t) => {
                        let e = m + t.chars().count();
                        if e <= end {
                            next[e]
                        } else {
                            NEG
                        }
                    }
                    Symbol::Nonterminal(b) => (m..=end)
                        .map(|e| self.get(*b, m, e) + next[e])
                        .fold(NEG, f64::max),
                };
            }
        }
        out
    }
}

fn terminal_len(rhs: &[crate::grammar::RhsItem]) -> Option<usize> {
    rhs.iter()
        .map(|it| match &it.symbol {
            Symbol::Terminal(t) => Some(t.chars().count()),
            Symbol::Nonterminal(_) => None,
        })
        .sum()
}

/// Per-parse cache of suffix bounds keyed by `(nt, rule, end)`.
#[derive(Default)]
pub(crate) struct SuffixCache {
    map: HashMap<(NtId, usize, usize), Vec<Vec<f64>>>,
}

impl SuffixCache {
    pub(crate) fn get(&mut self, ib: &InnerBounds, g: &Grammar, nt: NtId, rule: usize, end: usize) -> &Vec<Vec<f64>> {
        self.map
            .entry((nt, rule, end))
            .or_insert_with(|| ib.suffix(&g.rules[nt][rule].rhs, end))
    }
}
