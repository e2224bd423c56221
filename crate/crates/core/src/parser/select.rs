//! Rule-selection backends seen by the parser: the trained grammar's HDPs,
//! or fixed per-cell tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::grammar::{Grammar, GrammarError, NtId};
use crate::hdp::{PathFilter, PathIterator, PathPrior, PathSet, Step};
use crate::ontology::KnowledgeBase;
use crate::semantics::{Feature, StatementSet, Tense, TenseMask};

/// Upper bound on the log prior of a statement set.
pub type SetPrior<'a> = Rc<dyn Fn(&StatementSet) -> f64 + 'a>;

/// A set of statements sharing one rule probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub set: StatementSet,
    pub log_prob: f64,
    pub log_prior: f64,
}

impl Cell {
    pub fn score(&self) -> f64 {
        self.log_prob + self.log_prior
    }
}

pub trait Selector {
    /// Upper bound on `log p(rule | x)` over every statement `x`.
    fn rule_bound(&self, nt: NtId, rule: usize) -> f64;

    /// Cells of `nt`'s statement space, each intersected with `sem` and
    /// nonempty, in non-increasing order of `log_prob + log_prior`.
    fn cells<'a>(
        &'a self,
        nt: NtId,
        rule: usize,
        sem: StatementSet,
        prior: Option<SetPrior<'a>>,
    ) -> Box<dyn Iterator<Item = Cell> + 'a>;
}

fn prior_of(prior: &Option<SetPrior<'_>>, set: &StatementSet) -> f64 {
    if set.is_empty() {
        return f64::NEG_INFINITY;
    }
    prior.as_ref().map_or(0.0, |p| p(set))
}

fn affix_cells<'a>(
    g: &'a Grammar,
    nt: NtId,
    rule: usize,
    sem: StatementSet,
    prior: Option<SetPrior<'a>>,
) -> Box<dyn Iterator<Item = Cell> + 'a> {
    let r = g.rule(nt, rule);
    let cells: Vec<Cell> = Tense::ALL
        .into_iter()
        .filter(|t| g.affix_applies(r, *t))
        .filter_map(|t| {
            let mut set = sem.clone();
            set.tenses = set.tenses.intersect(TenseMask::single(t));
            let log_prior = prior_of(&prior, &set);
            (!set.is_empty() && log_prior > f64::NEG_INFINITY).then_some(Cell {
                set,
                log_prob: 0.0,
                log_prior,
            })
        })
        .collect();
    Box::new(cells.into_iter())
}

impl Selector for Grammar {
    fn rule_bound(&self, nt: NtId, rule: usize) -> f64 {
        Grammar::rule_bound(self, nt, rule)
    }

    fn cells<'a>(
        &'a self,
        nt: NtId,
        rule: usize,
        sem: StatementSet,
        prior: Option<SetPrior<'a>>,
    ) -> Box<dyn Iterator<Item = Cell> + 'a> {
        if self.is_affix_nt(nt) {
            return affix_cells(self, nt, rule, sem, prior);
        }
        let m = self.model(nt).expect("non-affix nonterminal has a model");
        let sem = Rc::new(sem);
        let (s1, s2, s3) = (sem.clone(), sem.clone(), sem);
        let filter: PathFilter<'a> = Box::new(move |p: &PathSet| !self.cell_set(nt, p).intersect(&s1).is_empty());
        let path_prior: PathPrior<'a> = Box::new(move |p: &PathSet| prior_of(&prior, &self.cell_set(nt, p).intersect(&s2)));
        let it = PathIterator::new(&m.samples, &m.tree, rule as u32, Some(path_prior), Some(filter));
        Box::new(it.map(move |y| Cell {
            set: self.cell_set(nt, &y.cell).intersect(&s3),
            log_prob: y.log_prob,
            log_prior: y.log_prior,
        }))
    }
}

#[derive(Clone, Debug, Default)]
struct PinNode {
    /// Log probability for the node's unlisted children, or for the whole
    /// subtree when no child is listed.
    rest: Option<f64>,
    children: BTreeMap<u32, PinNode>,
}

impl PinNode {
    fn cells(&self, prefix: &PathSet, out: &mut Vec<(PathSet, f64)>) {
        for (&k, c) in &self.children {
            c.cells(&prefix.child(Step::Is(k)), out);
        }
        if let Some(lp) = self.rest {
            if self.children.is_empty() {
                out.push((prefix.clone(), lp));
            } else {
                let keys: BTreeSet<u32> = self.children.keys().copied().collect();
                out.push((prefix.child(Step::AnyExcept(keys)), lp));
            }
        }
    }
}

/// Rule probabilities fixed per cell, overriding the grammar's HDPs for the
/// rules they cover. Useful for reproducing hand-worked examples.
#[derive(Clone, Debug)]
pub struct PinnedSelect<'g> {
    grammar: &'g Grammar,
    tables: HashMap<(NtId, usize), PinNode>,
}

impl<'g> PinnedSelect<'g> {
    pub fn new(grammar: &'g Grammar) -> PinnedSelect<'g> {
        PinnedSelect {
            grammar,
            tables: HashMap::new(),
        }
    }

    /// Pins the cell at `prefix` (feature values from the first level). With
    /// `rest` set, the value covers the node's children not pinned
    /// separately; otherwise it covers the node's whole subtree.
    pub fn pin(&mut self, nt: NtId, rule: usize, prefix: &[u32], rest: bool, log_prob: f64) -> Result<(), GrammarError> {
        let depth = self.grammar.nonterminals[nt].features.len();
        if rule >= self.grammar.rules[nt].len() || prefix.len() > depth || rest && prefix.len() == depth {
            return Err(GrammarError::Invalid(format!(
                "bad pin for `{}` rule #{rule}",
                self.grammar.nt_name(nt)
            )));
        }
        let mut node = self.tables.entry((nt, rule)).or_default();
        for &v in prefix {
            node = node.children.entry(v).or_default();
        }
        if !rest && !node.children.is_empty() {
            return Err(GrammarError::Invalid("pinned cell overlaps a deeper pin".into()));
        }
        node.rest = Some(log_prob);
        Ok(())
    }

    /// Reads pins, one per line: `NT#rule value... logprob`, where each
    /// value names a feature value (relation, concept, `_` for an absent
    /// argument, or tense) and a final `*` stands for the remaining values
    /// at that level. Lines starting with `#` are comments.
    pub fn parse(grammar: &'g Grammar, kb: &KnowledgeBase, text: &str) -> Result<PinnedSelect<'g>, GrammarError> {
        let mut out = PinnedSelect::new(grammar);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let err = |msg: String| GrammarError::Parse { line, msg };
            let words: Vec<&str> = content.split_whitespace().collect();
            if words.len() < 2 {
                return Err(err("expected `NT#rule value... logprob`".into()));
            }
            let (name, id) = words[0]
                .split_once('#')
                .ok_or_else(|| err(format!("expected NT#rule, got `{}`", words[0])))?;
            let nt = grammar.nt(name).ok_or_else(|| err(format!("unknown nonterminal `{name}`")))?;
            let rule: usize = id.parse().map_err(|_| err(format!("bad rule id `{id}`")))?;
            let lp: f64 = words[words.len() - 1]
                .parse()
                .map_err(|_| err(format!("bad log probability `{}`", words[words.len() - 1])))?;
            let mut values = &words[1..words.len() - 1];
            let rest = values.last() == Some(&"*");
            if rest {
                values = &values[..values.len() - 1];
            }
            let features = &grammar.nonterminals[nt].features;
            if values.len() > features.len() {
                return Err(err("more values than features".into()));
            }
            let prefix = values
                .iter()
                .zip(features)
                .map(|(w, f)| feature_value(kb, *f, w).ok_or_else(|| err(format!("bad {f} value `{w}`"))))
                .collect::<Result<Vec<u32>, _>>()?;
            out.pin(nt, rule, &prefix, rest, lp).map_err(|e| err(e.to_string()))?;
        }
        Ok(out)
    }
}

fn feature_value(kb: &KnowledgeBase, f: Feature, w: &str) -> Option<u32> {
    match f {
        Feature::RelationIndex => kb.relation(w).ok(),
        Feature::Arg1Index | Feature::Arg2Index => {
            if w == "_" {
                Some(0)
            } else {
                kb.concept(w).ok().map(|c| c + 1)
            }
        }
        Feature::TenseIndex => Tense::parse(w).map(Tense::index),
    }
}

impl Selector for PinnedSelect<'_> {
    fn rule_bound(&self, nt: NtId, rule: usize) -> f64 {
        match self.tables.get(&(nt, rule)) {
            None => self.grammar.rule_bound(nt, rule),
            Some(t) => {
                let mut cells = Vec::new();
                t.cells(&PathSet::default(), &mut cells);
                cells.into_iter().map(|(_, lp)| lp).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    fn cells<'a>(
        &'a self,
        nt: NtId,
        rule: usize,
        sem: StatementSet,
        prior: Option<SetPrior<'a>>,
    ) -> Box<dyn Iterator<Item = Cell> + 'a> {
        let Some(t) = self.tables.get(&(nt, rule)) else {
            return Selector::cells(self.grammar, nt, rule, sem, prior);
        };
        let mut raw = Vec::new();
        t.cells(&PathSet::default(), &mut raw);
        let mut cells: Vec<Cell> = raw
            .into_iter()
            .filter(|(_, lp)| *lp > f64::NEG_INFINITY)
            .filter_map(|(p, log_prob)| {
                let set = self.grammar.cell_set(nt, &p).intersect(&sem);
                let log_prior = prior_of(&prior, &set);
                (log_prior > f64::NEG_INFINITY).then_some(Cell {
                    set,
                    log_prob,
                    log_prior,
                })
            })
            .collect();
        // stable: equal scores keep depth-first order
        cells.sort_by(|a, b| b.score().total_cmp(&a.score()));
        Box::new(cells.into_iter())
    }
}
