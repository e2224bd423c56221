//! Exact k-best joint semantic/syntactic parsing.
//!
//! An agenda of rule states is searched best-first. Priorities add the exact
//! inner log probability so far, syntactic bounds on the symbols still to be
//! parsed, a bound on the current rule's probability, and a bound on the
//! outer probability and prior. Because the popped priority never increases,
//! root parses leave the agenda in score order.

mod bounds;
mod output;
mod select;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, GrammarError, NtId, Symbol, SyntaxTree};
use crate::ontology::{partition_by_prior, set_prior_upper_bound, KnowledgeBase, PriorConfig};
use crate::semantics::{preimage_set, StatementSet};

pub use bounds::InnerBounds;
pub use output::{format_output, format_result, OutputFormat, OutputRecord};
pub use select::{Cell, PinnedSelect, Selector, SetPrior};

const NEG: f64 = f64::NEG_INFINITY;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseConfig {
    pub k: usize,
    pub prior: PriorConfig,
    /// Record a line per agenda operation in [`ParseResult::trace`].
    pub trace: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            k: 10,
            prior: PriorConfig::default(),
            trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOutput {
    pub set: StatementSet,
    pub tree: SyntaxTree,
    /// Log probability of each member plus its prior.
    pub score: f64,
    /// Share of the returned probability mass, counting every member.
    pub posterior: f64,
    /// Time from the start of the parse until this output was found.
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct ParseResult {
    pub outputs: Vec<ParseOutput>,
    /// True when the agenda ran dry before `k` outputs were found.
    pub exhausted: bool,
    /// Priority of every popped agenda item, in order.
    pub popped: Vec<f64>,
    pub trace: Vec<String>,
    /// Wall time of the whole parse.
    pub elapsed: Duration,
}

impl ParseResult {
    /// Largest increase between consecutive popped priorities.
    pub fn max_priority_increase(&self) -> f64 {
        self.popped
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
struct RuleState {
    nt: NtId,
    rule: usize,
    start: usize,
    end: usize,
    i: usize,
    k: usize,
    sem: StatementSet,
    children: Vec<SyntaxTree>,
    log_prob: f64,
}

#[derive(Clone, Debug)]
struct Structure {
    nt: NtId,
    start: usize,
    end: usize,
    sem: StatementSet,
    tree: SyntaxTree,
    log_prob: f64,
}

enum Item<'a> {
    Request { nt: NtId, i: usize, j: usize, outer: f64 },
    State(Rc<RuleState>),
    Complete {
        state: Rc<RuleState>,
        cell: Cell,
        rest: Box<dyn Iterator<Item = Cell> + 'a>,
    },
    Structure(Rc<Structure>),
    Output { set: StatementSet, tree: SyntaxTree },
}

struct Queued<'a> {
    key: f64,
    seq: u64,
    item: Item<'a>,
}

impl PartialEq for Queued<'_> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued<'_> {}
impl PartialOrd for Queued<'_> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued<'_> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.total_cmp(&o.key).then_with(|| o.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    g: &'a Grammar,
    kb: &'a KnowledgeBase,
    sel: &'a dyn Selector,
    cfg: ParseConfig,
    text: Vec<char>,
    ib: InnerBounds,
    suffix: bounds::SuffixCache,
    agenda: BinaryHeap<Queued<'a>>,
    seq: u64,
    expanded: HashSet<(NtId, usize, usize)>,
    outer: HashMap<(NtId, usize, usize), f64>,
    chart: HashMap<(NtId, usize), Vec<Rc<Structure>>>,
    waiting: HashMap<(NtId, usize), Vec<Rc<RuleState>>>,
    trace: Vec<String>,
}

/// Parses with the grammar's own HDP rule selection.
pub fn parse(sentence: &str, g: &Grammar, kb: &KnowledgeBase, cfg: &ParseConfig) -> Result<ParseResult, ParseError> {
    parse_with(sentence, g, kb, g, cfg)
}

/// Parses with any rule-selection backend over the grammar's rules.
pub fn parse_with(
    sentence: &str,
    g: &Grammar,
    kb: &KnowledgeBase,
    sel: &dyn Selector,
    cfg: &ParseConfig,
) -> Result<ParseResult, ParseError> {
    if sentence.is_empty() {
        return Err(ParseError::EmptySentence);
    }
    if cfg.k == 0 {
        return Err(ParseError::ZeroK);
    }
    let started = Instant::now();
    let text: Vec<char> = sentence.chars().collect();
    let n = text.len();
    let mut s = Search {
        g,
        kb,
        sel,
        cfg: *cfg,
        ib: InnerBounds::compute(g, sel, n),
        text,
        suffix: Default::default(),
        agenda: BinaryHeap::new(),
        seq: 0,
        expanded: HashSet::new(),
        outer: HashMap::new(),
        chart: HashMap::new(),
        waiting: HashMap::new(),
        trace: Vec::new(),
    };
    let root_outer = set_prior_upper_bound(&g.nonterminals[g.root].domain, kb, &cfg.prior).unwrap_or(NEG);
    let key = s.ib.get(g.root, 0, n) + root_outer;
    s.push(
        key,
        Item::Request {
            nt: g.root,
            i: 0,
            j: n,
            outer: root_outer,
        },
    );

    let mut result = ParseResult::default();
    let mut seen: HashSet<(StatementSet, SyntaxTree)> = HashSet::new();
    while let Some(q) = s.agenda.pop() {
        result.popped.push(q.key);
        match q.item {
            Item::Request { nt, i, j, outer } => s.expand(nt, i, j, outer),
            Item::State(st) => s.advance(st),
            Item::Complete { state, cell, rest } => s.iterate(state, cell, rest),
            Item::Structure(n) => s.attach(n),
            Item::Output { set, tree } => {
                if s.cfg.trace {
                    s.trace
                        .push(format!("output {} {:.6}", kb.set_text(&set), q.key));
                }
                if seen.insert((set.canonical(), tree.clone())) {
                    result.outputs.push(ParseOutput {
                        set,
                        tree,
                        score: q.key,
                        posterior: 0.0,
                        elapsed: started.elapsed(),
                    });
                    if result.outputs.len() == cfg.k {
                        break;
                    }
                }
            }
        }
    }
    result.exhausted = result.outputs.len() < cfg.k;
    fill_posteriors(&mut result.outputs);
    result.trace = s.trace;
    result.elapsed = started.elapsed();
    Ok(result)
}

/// Normalizes `|set| * exp(score)` over the returned outputs.
/// Sets each output's posterior to its share of the outputs' total mass,
/// counting every member of its statement set.
pub fn fill_posteriors(outputs: &mut [ParseOutput]) {
    let logs: Vec<f64> = outputs
        .iter()
        .map(|o| o.score + (o.set.len() as f64).ln())
        .collect();
    let z = crate::hdp::log_sum_exp(&logs);
    for (o, l) in outputs.iter_mut().zip(logs) {
        o.posterior = if z.is_finite() { (l - z).exp() } else { 0.0 };
    }
}

impl<'a> Search<'a> {
    fn push(&mut self, key: f64, item: Item<'a>) {
        if key == NEG || key.is_nan() {
            return;
        }
        self.seq += 1;
        self.agenda.push(Queued {
            key,
            seq: self.seq,
            item,
        });
    }

    fn is_root(&self, nt: NtId) -> bool {
        nt == self.g.root
    }

    /// Bound on the outer probability and prior of a state's nonterminal.
    fn outer_of(&self, st: &RuleState) -> f64 {
        if self.is_root(st.nt) {
            if st.sem.is_empty() {
                return NEG;
            }
            set_prior_upper_bound(&st.sem, self.kb, &self.cfg.prior).unwrap_or(NEG)
        } else {
            self.outer[&(st.nt, st.start, st.end)]
        }
    }

    /// Remaining-symbol bound for a state at rule position `k`, position `i`.
    fn future(&mut self, st: &RuleState, k: usize, i: usize) -> f64 {
        self.suffix.get(&self.ib, self.g, st.nt, st.rule, st.end)[k][i]
    }

    fn priority(&mut self, st: &RuleState) -> f64 {
        let f = self.future(st, st.k, st.i);
        st.log_prob + self.ib.rule_bounds[st.nt][st.rule] + f + self.outer_of(st)
    }

    fn label(&self, st: &RuleState) -> String {
        let r = self.g.rule(st.nt, st.rule);
        let mut out = format!("{} ->", self.g.nt_name(st.nt));
        for (k, item) in r.rhs.iter().enumerate() {
            if k == st.k {
                out += " *";
            }
            if item.implicit {
                continue;
            }
            match &item.symbol {
                Symbol::Terminal(t) => out += &format!(" {t:?}"),
                Symbol::Nonterminal(b) => out += &format!(" {}", self.g.nt_name(*b)),
            }
        }
        if st.k == r.rhs.len() {
            out += " *";
        }
        out
    }

    /// Scans terminals from the dot onward; `None` if the text disagrees or
    /// the rest of the rule cannot fit.
    fn scan(&mut self, mut st: RuleState) -> Option<RuleState> {
        let rhs = &self.g.rule(st.nt, st.rule).rhs;
        while st.k < rhs.len() {
            let Symbol::Terminal(t) = &rhs[st.k].symbol else { break };
            let len = t.chars().count();
            if st.i + len > st.end || !t.chars().eq(self.text[st.i..st.i + len].iter().copied()) {
                return None;
            }
            st.children.push(SyntaxTree::leaf(t, st.i, rhs[st.k].implicit));
            st.i += len;
            st.k += 1;
        }
        (self.future(&st, st.k, st.i) > NEG).then_some(st)
    }

    fn push_state(&mut self, st: RuleState) {
        if let Some(st) = self.scan(st) {
            let key = self.priority(&st);
            if self.cfg.trace {
                let line = format!(
                    "  push {} [{},{}) i={} log_prob={} priority={key:.6}",
                    self.label(&st),
                    st.start,
                    st.end,
                    st.i,
                    st.log_prob
                );
                self.trace.push(line);
            }
            self.push(key, Item::State(Rc::new(st)));
        }
    }

    fn expand(&mut self, nt: NtId, i: usize, j: usize, outer: f64) {
        if !self.expanded.insert((nt, i, j)) {
            return;
        }
        if self.cfg.trace {
            self.trace
                .push(format!("expand {} [{i},{j})", self.g.nt_name(nt)));
        }
        self.outer.insert((nt, i, j), outer);
        for rule in 0..self.g.rules[nt].len() {
            let st = RuleState {
                nt,
                rule,
                start: i,
                end: j,
                i,
                k: 0,
                sem: self.g.nonterminals[nt].domain.clone(),
                children: Vec::new(),
                log_prob: 0.0,
            };
            self.push_state(st);
        }
    }

    fn advance(&mut self, st: Rc<RuleState>) {
        let rhs = &self.g.rule(st.nt, st.rule).rhs;
        if st.k == rhs.len() {
            self.start_iteration(st);
            return;
        }
        let Symbol::Nonterminal(b) = rhs[st.k].symbol else {
            unreachable!("terminals are scanned before a state is queued")
        };
        if self.cfg.trace {
            self.trace
                .push(format!("pop {} [{},{}) i={}", self.label(&st), st.start, st.end, st.i));
        }
        let existing = self.chart.get(&(b, st.i)).cloned().unwrap_or_default();
        self.waiting.entry((b, st.i)).or_default().push(st.clone());
        for n in existing {
            self.complete(&st, &n);
        }
        let base = st.log_prob + self.ib.rule_bounds[st.nt][st.rule] + self.outer_of(&st);
        for j in st.i..=st.end {
            let ib = self.ib.get(b, st.i, j);
            if ib == NEG {
                continue;
            }
            let f = self.future(&st, st.k + 1, j);
            if f == NEG {
                continue;
            }
            let outer = base + f;
            self.push(ib + outer, Item::Request { nt: b, i: st.i, j, outer });
        }
    }

    fn complete(&mut self, st: &RuleState, n: &Structure) {
        if n.end > st.end {
            return;
        }
        let op = self.g.rule(st.nt, st.rule).rhs[st.k].op;
        let sem = st.sem.intersect(&preimage_set(op, &n.sem));
        if sem.is_empty() {
            return;
        }
        let mut children = st.children.clone();
        children.push(n.tree.clone());
        self.push_state(RuleState {
            sem,
            children,
            i: n.end,
            k: st.k + 1,
            log_prob: st.log_prob + n.log_prob,
            ..st.clone()
        });
    }

    fn start_iteration(&mut self, st: Rc<RuleState>) {
        let prior: Option<SetPrior<'a>> = if self.is_root(st.nt) {
            let (kb, pc) = (self.kb, self.cfg.prior);
            Some(Rc::new(move |set: &StatementSet| {
                set_prior_upper_bound(set, kb, &pc).unwrap_or(NEG)
            }))
        } else {
            None
        };
        if self.cfg.trace {
            self.trace
                .push(format!("complete {} [{},{})", self.label(&st), st.start, st.end));
        }
        let rest = self.sel.cells(st.nt, st.rule, st.sem.clone(), prior);
        self.queue_next(st, rest);
    }

    fn queue_next(&mut self, st: Rc<RuleState>, mut rest: Box<dyn Iterator<Item = Cell> + 'a>) {
        let Some(cell) = rest.next() else { return };
        let outer = if self.is_root(st.nt) {
            cell.log_prior
        } else {
            self.outer[&(st.nt, st.start, st.end)]
        };
        let key = st.log_prob + cell.log_prob + outer;
        self.push(key, Item::Complete { state: st, cell, rest });
    }

    fn iterate(&mut self, st: Rc<RuleState>, cell: Cell, rest: Box<dyn Iterator<Item = Cell> + 'a>) {
        let sem = cell.set.intersect(&st.sem);
        let log_prob = st.log_prob + cell.log_prob;
        if !sem.is_empty() {
            let tree = SyntaxTree {
                label: self.g.nt_name(st.nt).to_string(),
                rule: Some(st.rule),
                start: st.start,
                end: st.end,
                children: st.children.clone(),
                implicit: false,
            };
            if self.cfg.trace {
                let line = format!(
                    "iterate {} [{},{}) {} log_prob={}",
                    self.label(&st),
                    st.start,
                    st.end,
                    self.kb.set_text(&sem),
                    log_prob
                );
                self.trace.push(line);
            }
            if self.is_root(st.nt) {
                for (piece, w) in partition_by_prior(&sem, self.kb, &self.cfg.prior) {
                    self.push(
                        log_prob + w,
                        Item::Output {
                            set: piece,
                            tree: tree.clone(),
                        },
                    );
                }
            } else {
                let key = log_prob + self.outer[&(st.nt, st.start, st.end)];
                let n = Structure {
                    nt: st.nt,
                    start: st.start,
                    end: st.end,
                    sem,
                    tree,
                    log_prob,
                };
                self.push(key, Item::Structure(Rc::new(n)));
            }
        }
        self.queue_next(st, rest);
    }

    fn attach(&mut self, n: Rc<Structure>) {
        if self.cfg.trace {
            let line = format!(
                "pop {} [{},{}) {} log_prob={}",
                self.g.nt_name(n.nt),
                n.start,
                n.end,
                self.kb.set_text(&n.sem),
                n.log_prob
            );
            self.trace.push(line);
        }
        self.chart.entry((n.nt, n.start)).or_default().push(n.clone());
        let waiting = self.waiting.get(&(n.nt, n.start)).cloned().unwrap_or_default();
        for st in waiting {
            self.complete(&st, &n);
        }
    }
}
