//! Semantics-coupled context-free grammar.
//!
//! Every right-hand-side symbol carries a transformation op that maps the
//! parent's statement to the child's. Rule choice at a nonterminal is drawn
//! from an HDP indexed by features of the statement, except for the affix
//! nonterminal, whose rule is fixed by tense.
//!
//! Grammar files are line oriented:
//!
//! ```text
//! root S
//! tenses none
//! alpha 1.0
//! beta 0.1
//! nonterminal S features relation_index arg2_index
//! nonterminal N features arg1_index alpha 1.0 0.1
//! nonterminal V features relation_index
//! nonterminal Vroot features relation_index
//! nonterminal Vaffix affix
//! rule S -> N:select_arg1 VP:delete_arg1
//! rule V -> Vroot + Vaffix:select_tense
//! rule N -> "Chopin"
//! lexicon N
//! affix present 3sg "s"
//! ```
//!
//! Whitespace between symbols inserts a single-space terminal; `+` joins
//! symbols with nothing in between. `lexicon N` adds a rule for every phrase
//! in the knowledge base's refer table.

mod corpus;
pub mod generate;
pub mod train;
mod tree;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hdp::{HdpError, HdpModel, HdpTree, PathSet, Step};
use crate::ontology::{parse_quoted, strip_line_comment, KbError, KnowledgeBase};
use crate::semantics::{
    feature_path, image_set, Feature, SemanticsError, SetKind, Statement, StatementSet, Tense,
    TenseMask, TransformOp, Universe,
};

pub use corpus::{read_corpus, write_corpus, Example};
pub use train::TrainConfig;
pub use tree::{RawTree, SyntaxTree};

pub type NtId = usize;

/// Person that the affix table is consulted with.
pub const AFFIX_PERSON: &str = "3sg";

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Hdp(#[from] HdpError),
    #[error("tree: {0}")]
    Tree(String),
    #[error("corpus line {line}: {msg}")]
    Corpus { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(NtId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RhsItem {
    pub symbol: Symbol,
    pub op: TransformOp,
    /// A separator space inserted by the grammar reader.
    pub implicit: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Affix {
    pub tense: Tense,
    pub person: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRule {
    pub lhs: NtId,
    /// Dense per left-hand side; the HDP outcome for this rule.
    pub id: usize,
    pub rhs: Vec<RhsItem>,
    pub affix: Option<Affix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonterminal {
    pub name: String,
    pub features: Vec<Feature>,
    pub alpha: Option<Vec<f64>>,
    pub affix: bool,
    /// Statements this nonterminal can carry.
    pub domain: StatementSet,
}

#[derive(Clone, Debug)]
pub struct Grammar {
    pub nonterminals: Vec<Nonterminal>,
    pub rules: Vec<Vec<AugmentedRule>>,
    pub root: NtId,
    pub tenses: TenseMask,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub universe: Universe,
    pub source: String,
    pub warnings: Vec<String>,
    /// `None` for the affix nonterminal.
    pub models: Vec<Option<HdpModel>>,
    names: HashMap<String, NtId>,
}

struct NtDecl {
    line: usize,
    name: String,
    features: Vec<Feature>,
    alpha: Option<Vec<f64>>,
    affix: bool,
}

fn parse_floats(words: &[&str], line: usize) -> Result<Vec<f64>, GrammarError> {
    words
        .iter()
        .map(|w| {
            w.parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(|| GrammarError::Parse {
                    line,
                    msg: format!("expected a positive number, got `{w}`"),
                })
        })
        .collect()
}

enum RhsToken {
    Quoted(String),
    Plus,
    Word(String),
}

fn tokenize_rhs(mut s: &str, line: usize) -> Result<Vec<(RhsToken, bool)>, GrammarError> {
    // the flag records whether whitespace preceded the token
    let mut out = Vec::new();
    loop {
        let trimmed = s.trim_start();
        let spaced = trimmed.len() != s.len();
        s = trimmed;
        let Some(ch) = s.chars().next() else {
            return Ok(out);
        };
        if ch == '"' {
            let (q, rest) = parse_quoted(s).ok_or_else(|| GrammarError::Parse {
                line,
                msg: "unterminated string".into(),
            })?;
            out.push((RhsToken::Quoted(q), spaced));
            s = rest;
        } else if ch == '+' {
            out.push((RhsToken::Plus, spaced));
            s = &s[1..];
        } else {
            let end = s
                .find(|c: char| c.is_whitespace() || c == '+' || c == '"')
                .unwrap_or(s.len());
            out.push((RhsToken::Word(s[..end].to_string()), spaced));
            s = &s[end..];
        }
    }
}

impl Grammar {
    pub fn nt(&self, name: &str) -> Option<NtId> {
        self.names.get(name).copied()
    }

    pub fn nt_name(&self, nt: NtId) -> &str {
        &self.nonterminals[nt].name
    }

    pub fn rule(&self, nt: NtId, id: usize) -> &AugmentedRule {
        &self.rules[nt][id]
    }

    pub fn rule_count(&self) -> usize {
        self.rules.iter().map(Vec::len).sum()
    }

    /// Renders a rule in grammar-file syntax.
    pub fn rule_text(&self, r: &AugmentedRule) -> String {
        let mut out = format!("{} ->", self.nt_name(r.lhs));
        let mut glue = " ";
        for item in &r.rhs {
            if item.implicit {
                glue = " ";
                continue;
            }
            out += glue;
            match &item.symbol {
                Symbol::Terminal(t) => out += &format!("{t:?}"),
                Symbol::Nonterminal(b) => {
                    out += self.nt_name(*b);
                    if item.op != TransformOp::Identity {
                        out += &format!(":{}", item.op);
                    }
                }
            }
            glue = " + ";
        }
        out
    }

    /// Concentrations for a nonterminal's tree, one per level plus the root.
    pub fn alpha_for(&self, nt: NtId) -> Vec<f64> {
        let levels = self.nonterminals[nt].features.len() + 1;
        let a = self.nonterminals[nt].alpha.as_ref().unwrap_or(&self.alpha);
        (0..levels).map(|l| a[l.min(a.len() - 1)]).collect()
    }

    /// Fresh, unfitted feature tree for a nonterminal.
    pub fn build_hdp_tree(&self, nt: NtId) -> Result<HdpTree, GrammarError> {
        let def = &self.nonterminals[nt];
        let sizes = def.features.iter().map(|f| f.cardinality(self.universe)).collect();
        let vocab = self.rules[nt].len().max(1);
        Ok(HdpTree::new(sizes, self.alpha_for(nt), vec![self.beta; vocab])?)
    }

    /// Replaces the grammar-wide concentrations and base weight, which
    /// nonterminals without their own `alpha` use, and resets the models.
    pub fn with_hyperparameters(mut self, alpha: Option<Vec<f64>>, beta: Option<f64>) -> Result<Grammar, GrammarError> {
        let bad = |x: &f64| !(*x > 0.0 && x.is_finite());
        if let Some(a) = alpha {
            if a.is_empty() || a.iter().any(bad) {
                return Err(GrammarError::Invalid("alpha values must be positive".into()));
            }
            self.alpha = a;
        }
        if let Some(b) = beta {
            if bad(&b) {
                return Err(GrammarError::Invalid("beta must be positive".into()));
            }
            self.beta = b;
        }
        self.models = self.empty_models()?;
        Ok(self)
    }

    fn empty_models(&self) -> Result<Vec<Option<HdpModel>>, GrammarError> {
        (0..self.nonterminals.len())
            .map(|nt| {
                if self.nonterminals[nt].affix {
                    Ok(None)
                } else {
                    Ok(Some(HdpModel::empty(self.build_hdp_tree(nt)?)))
                }
            })
            .collect()
    }

    pub fn model(&self, nt: NtId) -> Option<&HdpModel> {
        self.models[nt].as_ref()
    }

    pub fn is_affix_nt(&self, nt: NtId) -> bool {
        self.nonterminals[nt].affix
    }

    /// Whether the affix rule fires for a tense.
    pub fn affix_applies(&self, rule: &AugmentedRule, tense: Tense) -> bool {
        rule.affix
            .as_ref()
            .is_some_and(|a| a.tense == tense && a.person == AFFIX_PERSON)
    }

    /// `log p(rule | statement)` at nonterminal `nt`.
    pub fn rule_log_prob(&self, nt: NtId, rule: usize, s: &Statement) -> Result<f64, GrammarError> {
        if self.is_affix_nt(nt) {
            return Ok(match s {
                Statement::Tense(t) if self.affix_applies(&self.rules[nt][rule], *t) => 0.0,
                _ => f64::NEG_INFINITY,
            });
        }
        let path = feature_path(&self.nonterminals[nt].features, s)?;
        let m = self.models[nt].as_ref().expect("non-affix nonterminal has a model");
        m.tree.check_path(&path)?;
        Ok(m.log_predictive(&path, rule as u32))
    }

    /// Sum of `log p(rule | statement)` over the interior nodes of `tree`,
    /// with node statements derived top-down from `s`.
    pub fn derivation_log_prob(&self, s: &Statement, tree: &SyntaxTree) -> Result<f64, GrammarError> {
        let nt = self.tree_nt(tree)?;
        let rule = tree
            .rule
            .and_then(|r| self.rules[nt].get(r))
            .ok_or_else(|| GrammarError::Tree(format!("`{}` node has no valid rule", tree.label)))?;
        if !self.nonterminals[nt].domain.contains(s) {
            return Ok(f64::NEG_INFINITY);
        }
        let mut total = self.rule_log_prob(nt, rule.id, s)?;
        if rule.rhs.len() != tree.children.len() {
            return Err(GrammarError::Tree(format!("`{}` node does not match its rule", tree.label)));
        }
        for (item, child) in rule.rhs.iter().zip(&tree.children) {
            if let Symbol::Nonterminal(_) = item.symbol {
                total += self.derivation_log_prob(&crate::semantics::apply(item.op, s)?, child)?;
            }
        }
        Ok(total)
    }

    /// `log p(rule | cell)` for a set whose members share one predictive.
    pub fn rule_log_prob_cell(&self, nt: NtId, rule: usize, set: &StatementSet) -> Result<f64, GrammarError> {
        if set.is_empty() {
            return Err(GrammarError::Invalid("empty cell".into()));
        }
        if self.is_affix_nt(nt) {
            let members = set.members();
            if members.len() != 1 {
                return Err(HdpError::NotALeaf.into());
            }
            return self.rule_log_prob(nt, rule, &members[0]);
        }
        let m = self.models[nt].as_ref().expect("non-affix nonterminal has a model");
        let node = self.node_for_set(nt, set)?;
        Ok(crate::hdp::sample::mean_predictive(&m.samples, &m.tree, node, rule as u32).ln())
    }

    /// The deepest tree node shared by every member of `set`.
    pub fn node_for_set(&self, nt: NtId, set: &StatementSet) -> Result<usize, GrammarError> {
        let m = self.models[nt].as_ref().expect("non-affix nonterminal has a model");
        let tree = &m.tree;
        let mut n = tree.root();
        for (level, f) in self.nonterminals[nt].features.iter().enumerate() {
            let slot = set.feature_values(*f).ok_or_else(|| SemanticsError::Feature {
                feature: *f,
                found: format!("{:?} set", set.kind),
            })?;
            let size = tree.level_sizes[level];
            let mat: Vec<usize> = tree.nodes[n]
                .children
                .iter()
                .filter(|(k, _)| slot.contains(**k))
                .map(|(_, &c)| c)
                .collect();
            let unmat = slot.len(size) as usize - mat.len();
            match (mat.len(), unmat) {
                (0, _) => return Ok(n),
                (1, 0) => n = mat[0],
                _ => return Err(HdpError::NotALeaf.into()),
            }
        }
        Ok(n)
    }

    /// Members of the nonterminal's domain inside a path set.
    pub fn cell_set(&self, nt: NtId, cell: &PathSet) -> StatementSet {
        let mut out = self.nonterminals[nt].domain.clone();
        for (f, step) in self.nonterminals[nt].features.iter().zip(&cell.steps) {
            out = out.restrict(*f, &step.as_slot());
        }
        out
    }

    /// Path set covering exactly the feature values of a product set.
    pub fn path_set_of(&self, nt: NtId, set: &StatementSet) -> Option<PathSet> {
        let mut steps = Vec::new();
        for f in &self.nonterminals[nt].features {
            let slot = set.feature_values(*f)?.normalized(f.cardinality(self.universe));
            steps.push(match slot {
                crate::semantics::IdSlot::Only(s) if s.len() == 1 => Step::Is(*s.iter().next()?),
                crate::semantics::IdSlot::AllExcept(e) => Step::AnyExcept(e),
                _ => return None,
            });
        }
        Some(PathSet { steps })
    }

    /// Upper bound on `log p(rule | x)` over every statement.
    pub fn rule_bound(&self, nt: NtId, rule: usize) -> f64 {
        if self.is_affix_nt(nt) {
            let r = &self.rules[nt][rule];
            return if r.affix.as_ref().is_some_and(|a| a.person == AFFIX_PERSON) {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        let m = self.models[nt].as_ref().expect("non-affix nonterminal has a model");
        crate::hdp::bound_at_root(&m.samples, &m.tree, rule as u32)
    }

    /// Serializable snapshot: grammar source, knowledge base and fitted models.
    pub fn to_model_file(&self, kb: &KnowledgeBase) -> ModelFile {
        ModelFile {
            grammar: self.source.clone(),
            kb: kb.to_file(),
            models: self.models.clone(),
        }
    }

    pub fn from_model_file(f: &ModelFile) -> Result<(Grammar, KnowledgeBase), GrammarError> {
        let kb = KnowledgeBase::from_file(&f.kb)?;
        let mut g = parse_grammar(&f.grammar, &kb)?;
        if f.models.len() != g.models.len() {
            return Err(GrammarError::Invalid("model file does not match its grammar".into()));
        }
        g.models = f.models.clone();
        Ok((g, kb))
    }

    pub fn train(&self, corpus: &[Example], cfg: &TrainConfig) -> Result<Grammar, GrammarError> {
        train::train(self, corpus, cfg)
    }

    /// Observations each nonterminal's HDP was fitted on.
    pub fn observation_counts(&self) -> Vec<(String, usize)> {
        self.nonterminals
            .iter()
            .zip(&self.models)
            .map(|(d, m)| (d.name.clone(), m.as_ref().map_or(0, |m| m.data.len())))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub grammar: String,
    pub kb: crate::ontology::KbFile,
    pub models: Vec<Option<HdpModel>>,
}

/// Reads a grammar file against a knowledge base.
pub fn parse_grammar(text: &str, kb: &KnowledgeBase) -> Result<Grammar, GrammarError> {
    let err = |line: usize, msg: String| GrammarError::Parse { line, msg };
    let mut decls: Vec<NtDecl> = Vec::new();
    let mut root_name: Option<(usize, String)> = None;
    let mut tenses = TenseMask::NONE_ONLY;
    let mut alpha = vec![1.0];
    let mut beta = 0.1;
    let lines: Vec<(usize, Vec<&str>, &str)> = text
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = strip_line_comment(raw).trim();
            if content.is_empty() {
                None
            } else {
                Some((i + 1, content.split_whitespace().collect(), content))
            }
        })
        .collect();

    for (line, words, _) in &lines {
        let line = *line;
        match words[0] {
            "root" => {
                if words.len() != 2 {
                    return Err(err(line, "`root` takes one nonterminal".into()));
                }
                root_name = Some((line, words[1].into()));
            }
            "tenses" => {
                let ts: Option<Vec<Tense>> = words[1..].iter().map(|w| Tense::parse(w)).collect();
                match ts {
                    Some(ts) if !ts.is_empty() => tenses = TenseMask::of(&ts),
                    _ => return Err(err(line, "`tenses` takes none|past|present|future values".into())),
                }
            }
            "alpha" => {
                alpha = parse_floats(&words[1..], line)?;
                if alpha.is_empty() {
                    return Err(err(line, "`alpha` needs a value".into()));
                }
            }
            "beta" => {
                let b = parse_floats(&words[1..], line)?;
                if b.len() != 1 {
                    return Err(err(line, "`beta` takes one value".into()));
                }
                beta = b[0];
            }
            "nonterminal" => {
                let name = words
                    .get(1)
                    .ok_or_else(|| err(line, "`nonterminal` needs a name".into()))?;
                if decls.iter().any(|d| d.name == *name) {
                    return Err(err(line, format!("nonterminal `{name}` declared twice")));
                }
                let mut d = NtDecl {
                    line,
                    name: name.to_string(),
                    features: Vec::new(),
                    alpha: None,
                    affix: false,
                };
                let mut mode = "";
                let mut alphas = Vec::new();
                for w in &words[2..] {
                    match *w {
                        "features" | "alpha" => mode = w,
                        "affix" => d.affix = true,
                        _ if mode == "features" => d.features.push(
                            Feature::parse(w).ok_or_else(|| err(line, format!("unknown feature `{w}`")))?,
                        ),
                        _ if mode == "alpha" => alphas.push(*w),
                        _ => return Err(err(line, format!("unexpected `{w}`"))),
                    }
                }
                if !alphas.is_empty() {
                    let a = parse_floats(&alphas, line)?;
                    if a.len() != 1 && a.len() != d.features.len() + 1 {
                        return Err(err(
                            line,
                            format!("`alpha` needs 1 or {} values", d.features.len() + 1),
                        ));
                    }
                    d.alpha = Some(a);
                }
                if d.affix && !d.features.is_empty() {
                    return Err(err(line, "affix nonterminals take no features".into()));
                }
                decls.push(d);
            }
            "rule" | "lexicon" | "affix" => {}
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }

    if decls.is_empty() {
        return Err(GrammarError::Invalid("grammar declares no nonterminals".into()));
    }
    let names: HashMap<String, NtId> = decls.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
    let root = match &root_name {
        Some((line, n)) => *names
            .get(n)
            .ok_or_else(|| err(*line, format!("undefined nonterminal `{n}`")))?,
        None => 0,
    };
    let affix_nt = decls.iter().position(|d| d.affix);

    let mut rules: Vec<Vec<AugmentedRule>> = vec![Vec::new(); decls.len()];
    let mut seen: Vec<HashSet<(Vec<RhsItem>, Option<Affix>)>> = vec![HashSet::new(); decls.len()];
    let mut warnings = Vec::new();
    let mut add_rule = |lhs: NtId, rhs: Vec<RhsItem>, affix: Option<Affix>| -> bool {
        if !seen[lhs].insert((rhs.clone(), affix.clone())) {
            return false;
        }
        let id = rules[lhs].len();
        rules[lhs].push(AugmentedRule { lhs, id, rhs, affix });
        true
    };
    let dup = |line: usize, nt: NtId| format!("line {line}: duplicate rule for `{}` ignored", decls[nt].name);

    for (line, words, content) in &lines {
        let line = *line;
        match words[0] {
            "rule" => {
                let body = content["rule".len()..].trim();
                let (lhs, rhs) = body
                    .split_once("->")
                    .ok_or_else(|| err(line, "expected `rule A -> ...`".into()))?;
                let lhs = lhs.trim();
                let lhs_id = *names
                    .get(lhs)
                    .ok_or_else(|| err(line, format!("undefined nonterminal `{lhs}`")))?;
                if decls[lhs_id].affix {
                    return Err(err(line, format!("rules for affix nonterminal `{lhs}` come from `affix` lines")));
                }
                let mut items = Vec::new();
                let mut joined = true;
                for (tok, spaced) in tokenize_rhs(rhs, line)? {
                    if let RhsToken::Plus = tok {
                        if items.is_empty() || joined {
                            return Err(err(line, "misplaced `+`".into()));
                        }
                        joined = true;
                        continue;
                    }
                    if !items.is_empty() && !joined {
                        debug_assert!(spaced);
                        items.push(RhsItem {
                            symbol: Symbol::Terminal(" ".into()),
                            op: TransformOp::Identity,
                            implicit: true,
                        });
                    }
                    joined = false;
                    match tok {
                        RhsToken::Quoted(q) => {
                            if q.is_empty() {
                                return Err(err(line, "empty terminal".into()));
                            }
                            items.push(RhsItem {
                                symbol: Symbol::Terminal(q),
                                op: TransformOp::Identity,
                                implicit: false,
                            });
                        }
                        RhsToken::Word(w) => {
                            let (name, op) = match w.split_once(':') {
                                Some((n, o)) => (
                                    n,
                                    TransformOp::parse(o)
                                        .ok_or_else(|| err(line, format!("unknown transform op `{o}`")))?,
                                ),
                                None => (w.as_str(), TransformOp::Identity),
                            };
                            let b = *names
                                .get(name)
                                .ok_or_else(|| err(line, format!("undefined nonterminal `{name}`")))?;
                            items.push(RhsItem {
                                symbol: Symbol::Nonterminal(b),
                                op,
                                implicit: false,
                            });
                        }
                        RhsToken::Plus => unreachable!(),
                    }
                }
                if items.is_empty() || joined && items.len() > 1 {
                    return Err(err(line, "rule needs a right-hand side".into()));
                }
                if !add_rule(lhs_id, items, None) {
                    warnings.push(dup(line, lhs_id));
                }
            }
            "lexicon" => {
                if words.len() != 2 {
                    return Err(err(line, "`lexicon` takes one nonterminal".into()));
                }
                let nt = *names
                    .get(words[1])
                    .ok_or_else(|| err(line, format!("undefined nonterminal `{}`", words[1])))?;
                let mut phrases: Vec<&str> = Vec::new();
                for (p, _) in &kb.refer {
                    if !phrases.contains(&p.as_str()) {
                        phrases.push(p);
                    }
                }
                for p in phrases {
                    let item = RhsItem {
                        symbol: Symbol::Terminal(p.to_string()),
                        op: TransformOp::Identity,
                        implicit: false,
                    };
                    // phrases already written as explicit rules are skipped quietly
                    add_rule(nt, vec![item], None);
                }
            }
            "affix" => {
                let nt = affix_nt.ok_or_else(|| err(line, "no nonterminal is declared `affix`".into()))?;
                if words.len() < 4 {
                    return Err(err(line, "expected `affix TENSE PERSON \"text\"`".into()));
                }
                let tense = Tense::parse(words[1]).ok_or_else(|| err(line, format!("unknown tense `{}`", words[1])))?;
                let person = words[2].to_string();
                if person != AFFIX_PERSON {
                    warnings.push(format!(
                        "line {line}: statements are {AFFIX_PERSON}, so a `{person}` affix is never used"
                    ));
                }
                let rest = content.splitn(4, char::is_whitespace).nth(3).unwrap_or("");
                let (text, tail) = parse_quoted(rest).ok_or_else(|| err(line, "expected a quoted affix".into()))?;
                if !tail.trim().is_empty() {
                    return Err(err(line, format!("unexpected `{}`", tail.trim())));
                }
                let rhs = if text.is_empty() {
                    Vec::new()
                } else {
                    vec![RhsItem {
                        symbol: Symbol::Terminal(text),
                        op: TransformOp::Identity,
                        implicit: false,
                    }]
                };
                if !add_rule(nt, rhs, Some(Affix { tense, person })) {
                    warnings.push(dup(line, nt));
                }
            }
            _ => {}
        }
    }

    for (i, d) in decls.iter().enumerate() {
        if rules[i].is_empty() {
            return Err(GrammarError::Invalid(format!(
                "nonterminal `{}` (line {}) has no rules",
                d.name, d.line
            )));
        }
    }
    check_cycles(&decls, &rules)?;
    let root_used = rules
        .iter()
        .flatten()
        .any(|r| r.rhs.iter().any(|it| it.symbol == Symbol::Nonterminal(root)));
    if root_used {
        return Err(GrammarError::Invalid(format!(
            "root `{}` may not appear on a right-hand side",
            decls[root].name
        )));
    }

    let universe = kb.universe();
    let domains = infer_domains(&decls, &rules, root, universe, tenses)?;
    let mut nonterminals = Vec::new();
    for (d, domain) in decls.into_iter().zip(domains) {
        for f in &d.features {
            if domain.feature_values(*f).is_none() {
                return Err(GrammarError::Invalid(format!(
                    "feature {f} is undefined on the statements of `{}`",
                    d.name
                )));
            }
        }
        if d.affix && domain.kind != SetKind::Tense {
            return Err(GrammarError::Invalid(format!(
                "affix nonterminal `{}` must be reached through select_tense",
                d.name
            )));
        }
        nonterminals.push(Nonterminal {
            name: d.name,
            features: d.features,
            alpha: d.alpha,
            affix: d.affix,
            domain,
        });
    }
    let mut g = Grammar {
        nonterminals,
        rules,
        root,
        tenses,
        alpha,
        beta,
        universe,
        source: text.to_string(),
        warnings,
        models: Vec::new(),
        names,
    };
    g.models = g.empty_models()?;
    Ok(g)
}

/// Rejects cycles of unit or nullable-padded productions.
fn check_cycles(decls: &[NtDecl], rules: &[Vec<AugmentedRule>]) -> Result<(), GrammarError> {
    let n = decls.len();
    let mut nullable = vec![false; n];
    loop {
        let mut changed = false;
        for (a, rs) in rules.iter().enumerate() {
            if nullable[a] {
                continue;
            }
            if rs.iter().any(|r| {
                r.rhs.iter().all(|it| match &it.symbol {
                    Symbol::Terminal(t) => t.is_empty(),
                    Symbol::Nonterminal(b) => nullable[*b],
                })
            }) {
                nullable[a] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut edges: Vec<Vec<NtId>> = vec![Vec::new(); n];
    for (a, rs) in rules.iter().enumerate() {
        for r in rs {
            for (k, it) in r.rhs.iter().enumerate() {
                if let Symbol::Nonterminal(b) = it.symbol {
                    let others_nullable = r.rhs.iter().enumerate().all(|(j, o)| {
                        j == k
                            || match &o.symbol {
                                Symbol::Terminal(t) => t.is_empty(),
                                Symbol::Nonterminal(c) => nullable[*c],
                            }
                    });
                    if others_nullable {
                        edges[a].push(b);
                    }
                }
            }
        }
    }
    // 0 unvisited, 1 on stack, 2 done
    let mut mark = vec![0u8; n];
    fn visit(v: NtId, edges: &[Vec<NtId>], mark: &mut [u8]) -> Option<NtId> {
        mark[v] = 1;
        for &w in &edges[v] {
            if mark[w] == 1 {
                return Some(w);
            }
            if mark[w] == 0 {
                if let Some(c) = visit(w, edges, mark) {
                    return Some(c);
                }
            }
        }
        mark[v] = 2;
        None
    }
    for v in 0..n {
        if mark[v] == 0 {
            if let Some(c) = visit(v, &edges, &mut mark) {
                return Err(GrammarError::Invalid(format!(
                    "unit or empty-production cycle through `{}`",
                    decls[c].name
                )));
            }
        }
    }
    Ok(())
}

fn infer_domains(
    decls: &[NtDecl],
    rules: &[Vec<AugmentedRule>],
    root: NtId,
    universe: Universe,
    tenses: TenseMask,
) -> Result<Vec<StatementSet>, GrammarError> {
    let mut dom: BTreeMap<NtId, StatementSet> = BTreeMap::new();
    dom.insert(root, StatementSet::relational(universe, tenses));
    let mut queue = vec![root];
    while let Some(a) = queue.pop() {
        let da = dom[&a].clone();
        for r in &rules[a] {
            for it in &r.rhs {
                let Symbol::Nonterminal(b) = it.symbol else { continue };
                let img = image_set(it.op, &da);
                if img.is_empty() {
                    return Err(GrammarError::Invalid(format!(
                        "{} cannot apply to the statements of `{}`",
                        it.op, decls[a].name
                    )));
                }
                match dom.get(&b) {
                    None => {
                        dom.insert(b, img);
                        queue.push(b);
                    }
                    Some(existing) if existing.canonical() != img.canonical() => {
                        return Err(GrammarError::Invalid(format!(
                            "nonterminal `{}` is reached with two different kinds of statement",
                            decls[b].name
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    (0..decls.len())
        .map(|i| {
            dom.remove(&i).ok_or_else(|| {
                GrammarError::Invalid(format!("nonterminal `{}` is unreachable from the root", decls[i].name))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn kb() -> KnowledgeBase {
        KnowledgeBase::parse_text(
            "category athlete\ncategory sport\ncategory musician\ncategory instrument\n\
             concept athlete:andre_agassi\nconcept sport:tennis\nconcept musician:chopin\nconcept instrument:piano\n\
             relation athlete_plays_sport athlete sport\nrelation musician_plays_inst musician instrument\n",
        )
        .unwrap()
    }

    const FIG2: &str = r#"
nonterminal S features relation_index arg2_index
nonterminal VP features relation_index arg2_index
nonterminal N features arg1_index
nonterminal V features relation_index arg2_index
rule S -> N:select_arg1 VP:delete_arg1
rule VP -> V:identity N:select_arg2
rule VP -> V:identity
rule N -> "Andre Agassi"
rule N -> "Chopin"
rule N -> "tennis"
rule V -> "plays"
rule V -> "plays" # repeated on purpose
rule N -> "piano"
"#;

    #[test]
    fn reads_the_small_grammar() {
        let g = parse_grammar(FIG2, &kb()).unwrap();
        let s_vp: usize = ["S", "VP"].iter().map(|n| g.rules[g.nt(n).unwrap()].len()).sum();
        let pre: usize = ["N", "V"].iter().map(|n| g.rules[g.nt(n).unwrap()].len()).sum();
        assert_eq!((s_vp, pre), (3, 5));
        assert_eq!(g.warnings.len(), 1);
        let s = &g.rules[g.root][0];
        assert_eq!(s.rhs.len(), 3);
        assert!(s.rhs[1].implicit);
        assert_eq!(g.rule_text(s), "S -> N:select_arg1 VP:delete_arg1");
    }

    #[test]
    fn warns_about_unusable_affix_person() {
        let text = "tenses present\nnonterminal V\nnonterminal A affix\nrule V -> \"go\" + A:select_tense\n\
                    affix present 3sg \"es\"\naffix present 1sg \"\"\n";
        let g = parse_grammar(text, &kb()).unwrap();
        assert_eq!(g.warnings, vec!["line 6: statements are 3sg, so a `1sg` affix is never used".to_string()]);
    }

    #[test]
    fn reports_unknown_names_with_line() {
        let k = kb();
        for (text, needle) in [
            ("nonterminal S\nrule S -> X", "line 2: undefined nonterminal `X`"),
            ("nonterminal S features color\n", "line 1: unknown feature `color`"),
            ("nonterminal S\nnonterminal N\nrule S -> N:pick\nrule N -> \"a\"", "line 3: unknown transform op `pick`"),
        ] {
            let e = parse_grammar(text, &k).unwrap_err().to_string();
            assert!(e.contains(needle), "{e}");
        }
    }

    #[test]
    fn root_without_rules_is_invalid() {
        let e = parse_grammar("nonterminal S\n", &kb()).unwrap_err();
        assert!(e.to_string().contains("has no rules"));
    }

    #[test]
    fn unit_cycles_are_rejected() {
        let text = "nonterminal S\nnonterminal A\nrule S -> A\nrule A -> S\nrule A -> \"a\"";
        assert!(parse_grammar(text, &kb()).unwrap_err().to_string().contains("cycle"));
    }

    #[test]
    fn feature_tree_shape() {
        let g = parse_grammar(FIG2, &kb()).unwrap();
        let t = g.build_hdp_tree(g.nt("VP").unwrap()).unwrap();
        assert_eq!(t.level_sizes, vec![2, 5]);
        let n = g.build_hdp_tree(g.nt("N").unwrap()).unwrap();
        assert_eq!(n.vocab(), 4);
        let root_only = parse_grammar("nonterminal S\nrule S -> \"x\"", &kb()).unwrap();
        assert_eq!(root_only.build_hdp_tree(0).unwrap().depth(), 0);
    }

    #[test]
    fn domains_follow_the_ops() {
        let g = parse_grammar(FIG2, &kb()).unwrap();
        assert_eq!(g.nonterminals[g.nt("N").unwrap()].domain.kind, SetKind::Concept);
        let vp = &g.nonterminals[g.nt("VP").unwrap()].domain;
        assert!(vp.arg1.contains(0) && !vp.arg1.contains(1));
    }
}
