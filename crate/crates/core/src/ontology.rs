//! Knowledge base: categories, concepts, typed relations, beliefs and the
//! phrase lexicon, plus the prior over statements.
//!
//! Text format, one declaration per line (`#` starts a comment):
//!
//! ```text
//! category musician
//! concept musician:chopin
//! relation musician_plays_inst musician instrument
//! belief musician_plays_inst musician:chopin instrument:piano
//! refer "Chopin" musician:chopin
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantics::{
    arg_from_index, ConceptId, IdSlot, RelationId, SetKind, Statement, StatementSet,
    Tense, TenseMask, Universe, ABSENT,
};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("relation id {0} out of range")]
    RelationOutOfRange(RelationId),
    #[error("statement is not relational")]
    NotRelational,
    #[error("empty statement set has no prior bound")]
    EmptySet,
    #[error("cannot parse `{0}`")]
    Syntax(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub category: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub domain: usize,
    pub range: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnowledgeBase {
    pub categories: Vec<String>,
    pub concepts: Vec<Concept>,
    pub relations: Vec<Relation>,
    beliefs: BTreeSet<(RelationId, ConceptId, ConceptId)>,
    /// Phrase to the concepts it may refer to, in declaration order.
    pub refer: Vec<(String, ConceptId)>,
    category_ids: HashMap<String, usize>,
    concept_ids: HashMap<String, ConceptId>,
    relation_ids: HashMap<String, RelationId>,
    members: Vec<BTreeSet<ConceptId>>,
    beliefs_by_rel: Vec<BTreeMap<ConceptId, BTreeSet<ConceptId>>>,
}

/// Serialized form of a knowledge base.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KbFile {
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub concepts: Vec<String>,
    #[serde(default)]
    pub relations: Vec<RelationDecl>,
    #[serde(default)]
    pub beliefs: Vec<[String; 3]>,
    #[serde(default)]
    pub refer: Vec<ReferDecl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationDecl {
    pub name: String,
    pub domain: String,
    pub range: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferDecl {
    pub phrase: String,
    pub concept: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KbFormat {
    Text,
    Json,
}

impl KnowledgeBase {
    pub fn new() -> KnowledgeBase {
        KnowledgeBase::default()
    }

    pub fn universe(&self) -> Universe {
        Universe {
            relations: self.relations.len() as u32,
            concepts: self.concepts.len() as u32,
        }
    }

    pub fn add_category(&mut self, name: &str) -> Result<usize, KbError> {
        if self.category_ids.contains_key(name) {
            return Err(KbError::Duplicate {
                what: "category",
                name: name.into(),
            });
        }
        let id = self.categories.len();
        self.categories.push(name.into());
        self.category_ids.insert(name.into(), id);
        self.members.push(BTreeSet::new());
        Ok(id)
    }

    /// Concept names carry their category as a `category:` prefix.
    pub fn add_concept(&mut self, name: &str) -> Result<ConceptId, KbError> {
        let (cat, _) = name
            .split_once(':')
            .ok_or_else(|| KbError::Syntax(format!("concept `{name}` lacks a category prefix")))?;
        let category = self.category(cat)?;
        if self.concept_ids.contains_key(name) {
            return Err(KbError::Duplicate {
                what: "concept",
                name: name.into(),
            });
        }
        let id = self.concepts.len() as ConceptId;
        self.concepts.push(Concept {
            name: name.into(),
            category,
        });
        self.concept_ids.insert(name.into(), id);
        self.members[category].insert(id);
        Ok(id)
    }

    pub fn add_relation(&mut self, name: &str, domain: &str, range: &str) -> Result<RelationId, KbError> {
        let domain = self.category(domain)?;
        let range = self.category(range)?;
        if self.relation_ids.contains_key(name) {
            return Err(KbError::Duplicate {
                what: "relation",
                name: name.into(),
            });
        }
        let id = self.relations.len() as RelationId;
        self.relations.push(Relation {
            name: name.into(),
            domain,
            range,
        });
        self.relation_ids.insert(name.into(), id);
        self.beliefs_by_rel.push(BTreeMap::new());
        Ok(id)
    }

    /// Duplicate beliefs are merged.
    pub fn add_belief(&mut self, rel: &str, a: &str, b: &str) -> Result<(), KbError> {
        let r = self.relation(rel)?;
        let a = self.concept(a)?;
        let b = self.concept(b)?;
        self.beliefs.insert((r, a, b));
        self.beliefs_by_rel[r as usize].entry(a).or_default().insert(b);
        Ok(())
    }

    pub fn add_refer(&mut self, phrase: &str, concept: &str) -> Result<(), KbError> {
        let c = self.concept(concept)?;
        if !self.refer.iter().any(|(p, x)| p == phrase && *x == c) {
            self.refer.push((phrase.into(), c));
        }
        Ok(())
    }

    pub fn category(&self, name: &str) -> Result<usize, KbError> {
        self.category_ids
            .get(name)
            .copied()
            .ok_or_else(|| KbError::UnknownCategory(name.into()))
    }

    pub fn concept(&self, name: &str) -> Result<ConceptId, KbError> {
        self.concept_ids
            .get(name)
            .copied()
            .ok_or_else(|| KbError::UnknownConcept(name.into()))
    }

    pub fn relation(&self, name: &str) -> Result<RelationId, KbError> {
        self.relation_ids
            .get(name)
            .copied()
            .ok_or_else(|| KbError::UnknownRelation(name.into()))
    }

    pub fn concept_name(&self, c: ConceptId) -> &str {
        &self.concepts[c as usize].name
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relations[r as usize].name
    }

    pub fn category_members(&self, cat: usize) -> &BTreeSet<ConceptId> {
        &self.members[cat]
    }

    pub fn beliefs(&self) -> impl Iterator<Item = (RelationId, ConceptId, ConceptId)> + '_ {
        self.beliefs.iter().copied()
    }

    pub fn is_belief(&self, r: RelationId, a: ConceptId, b: ConceptId) -> bool {
        self.beliefs.contains(&(r, a, b))
    }

    pub fn to_file(&self) -> KbFile {
        KbFile {
            categories: self.categories.clone(),
            concepts: self.concepts.iter().map(|c| c.name.clone()).collect(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationDecl {
                    name: r.name.clone(),
                    domain: self.categories[r.domain].clone(),
                    range: self.categories[r.range].clone(),
                })
                .collect(),
            beliefs: self
                .beliefs
                .iter()
                .map(|&(r, a, b)| {
                    [
                        self.relation_name(r).into(),
                        self.concept_name(a).into(),
                        self.concept_name(b).into(),
                    ]
                })
                .collect(),
            refer: self
                .refer
                .iter()
                .map(|(p, c)| ReferDecl {
                    phrase: p.clone(),
                    concept: self.concept_name(*c).into(),
                })
                .collect(),
        }
    }

    pub fn from_file(f: &KbFile) -> Result<KnowledgeBase, KbError> {
        let mut kb = KnowledgeBase::new();
        for c in &f.categories {
            kb.add_category(c)?;
        }
        for c in &f.concepts {
            kb.add_concept(c)?;
        }
        for r in &f.relations {
            kb.add_relation(&r.name, &r.domain, &r.range)?;
        }
        for [r, a, b] in &f.beliefs {
            kb.add_belief(r, a, b)?;
        }
        for r in &f.refer {
            kb.add_refer(&r.phrase, &r.concept)?;
        }
        Ok(kb)
    }

    pub fn parse_text(text: &str) -> Result<KnowledgeBase, KbError> {
        let mut kb = KnowledgeBase::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let at = |e: KbError| KbError::Parse {
                line,
                msg: e.to_string(),
            };
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (head, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            let rest = rest.trim();
            let words: Vec<&str> = rest.split_whitespace().collect();
            let arity = |n: usize| {
                if words.len() == n {
                    Ok(())
                } else {
                    Err(KbError::Parse {
                        line,
                        msg: format!("`{head}` takes {n} arguments"),
                    })
                }
            };
            match head {
                "category" => {
                    arity(1)?;
                    kb.add_category(words[0]).map_err(at)?;
                }
                "concept" => {
                    arity(1)?;
                    kb.add_concept(words[0]).map_err(at)?;
                }
                "relation" => {
                    arity(3)?;
                    kb.add_relation(words[0], words[1], words[2]).map_err(at)?;
                }
                "belief" => {
                    arity(3)?;
                    kb.add_belief(words[0], words[1], words[2]).map_err(at)?;
                }
                "refer" => {
                    let (phrase, tail) = parse_quoted(rest).ok_or_else(|| KbError::Parse {
                        line,
                        msg: "expected a quoted phrase".into(),
                    })?;
                    kb.add_refer(&phrase, tail.trim()).map_err(at)?;
                }
                other => {
                    return Err(KbError::Parse {
                        line,
                        msg: format!("unknown declaration `{other}`"),
                    })
                }
            }
        }
        Ok(kb)
    }

    pub fn to_text(&self) -> String {
        let f = self.to_file();
        let mut out = String::new();
        for c in &f.categories {
            out += &format!("category {c}\n");
        }
        for c in &f.concepts {
            out += &format!("concept {c}\n");
        }
        for r in &f.relations {
            out += &format!("relation {} {} {}\n", r.name, r.domain, r.range);
        }
        for [r, a, b] in &f.beliefs {
            out += &format!("belief {r} {a} {b}\n");
        }
        for r in &f.refer {
            out += &format!("refer {:?} {}\n", r.phrase, r.concept);
        }
        out
    }

    /// Renders `rel(arg1, arg2[, time:t])`, `category:name` or `time:t`.
    pub fn statement_text(&self, s: &Statement) -> String {
        match *s {
            Statement::Concept(c) => self.concept_name(c).into(),
            Statement::Tense(t) => format!("time:{}", t.name()),
            Statement::Relation {
                rel,
                arg1,
                arg2,
                tense,
            } => {
                let arg = |a: Option<ConceptId>| a.map_or("·".to_string(), |c| self.concept_name(c).into());
                let mut out = format!("{}({}, {}", self.relation_name(rel), arg(arg1), arg(arg2));
                if tense != Tense::None {
                    out += &format!(", time:{}", tense.name());
                }
                out + ")"
            }
        }
    }

    pub fn parse_statement(&self, text: &str) -> Result<Statement, KbError> {
        let t = text.trim();
        let bad = || KbError::Syntax(t.into());
        if let Some(tense) = t.strip_prefix("time:") {
            return Tense::parse(tense).map(Statement::Tense).ok_or_else(bad);
        }
        let Some(open) = t.find('(') else {
            return Ok(Statement::Concept(self.concept(t)?));
        };
        let inner = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let rel = self.relation(t[..open].trim())?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(bad());
        }
        let arg = |p: &str| -> Result<Option<ConceptId>, KbError> {
            if p == "·" || p == "." || p == "_" {
                Ok(None)
            } else {
                self.concept(p).map(Some)
            }
        };
        let tense = match parts.get(2) {
            None => Tense::None,
            Some(p) => p
                .strip_prefix("time:")
                .and_then(Tense::parse)
                .ok_or_else(bad)?,
        };
        Ok(Statement::Relation {
            rel,
            arg1: arg(parts[0])?,
            arg2: arg(parts[1])?,
            tense,
        })
    }

    fn slot_text(&self, slot: &IdSlot, size: u32, name: &dyn Fn(u32) -> String) -> String {
        let list = |s: &BTreeSet<u32>| {
            s.iter()
                .filter(|&&v| v < size)
                .map(|&v| name(v))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match slot.normalized(size) {
            IdSlot::Only(s) if s.len() == 1 => list(&s),
            IdSlot::Only(s) => format!("{{{}}}", list(&s)),
            IdSlot::AllExcept(e) if e.is_empty() => "*".into(),
            IdSlot::AllExcept(e) => format!("*-{{{}}}", list(&e)),
        }
    }

    /// Renders a set with `*` for wildcards, `*-{..}` for exclusions and
    /// `{..}` for explicit alternatives.
    pub fn set_text(&self, set: &StatementSet) -> String {
        if set.is_empty() {
            return "∅".into();
        }
        let u = set.universe;
        let arg_name = |v: u32| {
            arg_from_index(v).map_or("·".to_string(), |c| self.concept_name(c).to_string())
        };
        // `*` on an argument means any present concept; the absent marker is
        // shown only when it is a member.
        let arg_text = |slot: &IdSlot| {
            let present = slot.intersect(&IdSlot::except(ABSENT));
            let mut txt = match present.normalized(u.arg_size()) {
                IdSlot::AllExcept(e) => {
                    let e: BTreeSet<u32> = e.into_iter().filter(|&v| v != ABSENT).collect();
                    self.slot_text(&IdSlot::AllExcept(e), u.arg_size(), &arg_name)
                }
                only => self.slot_text(&only, u.arg_size(), &arg_name),
            };
            if slot.contains(ABSENT) {
                txt = if present.is_empty(u.arg_size()) {
                    "·".into()
                } else {
                    format!("{txt}|·")
                };
            }
            txt
        };
        let tense_text = |m: TenseMask| {
            let names: Vec<&str> = m.iter().map(|t| t.name()).collect();
            if names.len() == 1 {
                format!("time:{}", names[0])
            } else {
                format!("time:{{{}}}", names.join(", "))
            }
        };
        match set.kind {
            SetKind::Concept => arg_text(&set.arg1),
            SetKind::Tense => tense_text(set.tenses),
            SetKind::Relational => {
                let rel = self.slot_text(&set.relations, u.relations, &|r| {
                    self.relation_name(r).to_string()
                });
                let mut out = format!("{rel}({}, {}", arg_text(&set.arg1), arg_text(&set.arg2));
                if set.tenses != TenseMask::NONE_ONLY {
                    out += &format!(", {}", tense_text(set.tenses));
                }
                out + ")"
            }
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a leading double-quoted string with `\"` and `\\` escapes.
pub(crate) fn parse_quoted(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, ch) in chars {
        if escaped {
            out.push(ch);
            escaped = false;
        } else if ch == '\\' {
            escaped = true;
        } else if ch == '"' {
            return Some((out, &s[i + 1..]));
        } else {
            out.push(ch);
        }
    }
    None
}

pub(crate) fn strip_line_comment(line: &str) -> &str {
    strip_comment(line)
}

pub fn load_knowledge_base(path: &Path, format: Option<KbFormat>) -> Result<KnowledgeBase, KbError> {
    let text = fs::read_to_string(path)?;
    let format = format.unwrap_or_else(|| {
        let json_ext = path.extension().is_some_and(|e| e == "json");
        if json_ext || text.trim_start().starts_with('{') {
            KbFormat::Json
        } else {
            KbFormat::Text
        }
    });
    match format {
        KbFormat::Json => KnowledgeBase::from_file(&serde_json::from_str(&text)?),
        KbFormat::Text => KnowledgeBase::parse_text(&text),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    Uniform,
    #[serde(alias = "type_correct")]
    Type,
    Kb,
}

impl PriorMode {
    pub fn parse(s: &str) -> Option<PriorMode> {
        match s {
            "uniform" => Some(PriorMode::Uniform),
            "type" | "type_correct" => Some(PriorMode::Type),
            "kb" => Some(PriorMode::Kb),
            _ => None,
        }
    }
}

/// Unnormalized log prior: `kb_bonus` for beliefs, `type_bonus` for
/// type-correct statements, zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub mode: PriorMode,
    pub type_bonus: f64,
    pub kb_bonus: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mode: PriorMode::Uniform,
            type_bonus: 4.0,
            kb_bonus: 8.0,
        }
    }
}

impl PriorConfig {
    pub fn with_mode(mode: PriorMode) -> PriorConfig {
        PriorConfig {
            mode,
            ..PriorConfig::default()
        }
    }

    /// Requires `kb_bonus >= type_bonus >= 0`.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.type_bonus >= 0.0 && self.kb_bonus >= self.type_bonus && self.kb_bonus.is_finite()) {
            return Err(format!(
                "prior bonuses must satisfy kb_bonus >= type_bonus >= 0 (got {} and {})",
                self.kb_bonus, self.type_bonus
            ));
        }
        Ok(())
    }
}

pub fn is_type_correct(s: &Statement, kb: &KnowledgeBase) -> Result<bool, KbError> {
    let Statement::Relation { rel, arg1, arg2, .. } = *s else {
        return Err(KbError::NotRelational);
    };
    let r = kb
        .relations
        .get(rel as usize)
        .ok_or(KbError::RelationOutOfRange(rel))?;
    Ok(match (arg1, arg2) {
        (Some(a), Some(b)) => {
            let cat = |c: ConceptId| kb.concepts.get(c as usize).map(|c| c.category);
            cat(a) == Some(r.domain) && cat(b) == Some(r.range)
        }
        _ => false,
    })
}

pub fn prior_log_weight(s: &Statement, kb: &KnowledgeBase, cfg: &PriorConfig) -> Result<f64, KbError> {
    let tc = is_type_correct(s, kb)?;
    if cfg.mode == PriorMode::Uniform {
        return Ok(0.0);
    }
    if cfg.mode == PriorMode::Kb {
        if let Statement::Relation {
            rel,
            arg1: Some(a),
            arg2: Some(b),
            ..
        } = *s
        {
            if kb.is_belief(rel, a, b) {
                return Ok(cfg.kb_bonus);
            }
        }
    }
    Ok(if tc { cfg.type_bonus } else { 0.0 })
}

fn category_slot(kb: &KnowledgeBase, cat: usize) -> IdSlot {
    IdSlot::Only(kb.category_members(cat).iter().map(|&c| c + 1).collect())
}

/// Splits a relational set into disjoint product pieces of constant prior.
/// Non-relational sets come back whole with weight zero.
pub fn partition_by_prior(set: &StatementSet, kb: &KnowledgeBase, cfg: &PriorConfig) -> Vec<(StatementSet, f64)> {
    if set.is_empty() {
        return Vec::new();
    }
    if set.kind != SetKind::Relational || cfg.mode == PriorMode::Uniform {
        return vec![(set.clone(), 0.0)];
    }
    let mut out = Vec::new();
    let mut push = |s: StatementSet, w: f64| {
        let s = s.normalized();
        if !s.is_empty() {
            out.push((s, w));
        }
    };
    for rel in set.relations.members(set.universe.relations) {
        let mut xr = set.clone();
        xr.relations = IdSlot::single(rel);
        let r = &kb.relations[rel as usize];
        let dom = category_slot(kb, r.domain);
        let ran = category_slot(kb, r.range);
        let split_by_type = |x: StatementSet, push: &mut dyn FnMut(StatementSet, f64)| {
            let mut tc = x.clone();
            tc.arg1 = x.arg1.intersect(&dom);
            tc.arg2 = x.arg2.intersect(&ran);
            let mut bad1 = x.clone();
            bad1.arg1 = x.arg1.minus(&dom);
            let mut bad2 = x.clone();
            bad2.arg1 = x.arg1.intersect(&dom);
            bad2.arg2 = x.arg2.minus(&ran);
            push(tc, cfg.type_bonus);
            push(bad1, 0.0);
            push(bad2, 0.0);
        };
        if cfg.mode == PriorMode::Kb {
            let mut rest = xr.clone();
            for (&a, bs) in &kb.beliefs_by_rel[rel as usize] {
                let ai = a + 1;
                if !xr.arg1.contains(ai) {
                    continue;
                }
                let bslot = IdSlot::Only(bs.iter().map(|&b| b + 1).collect());
                let mut believed = xr.clone();
                believed.arg1 = IdSlot::single(ai);
                believed.arg2 = xr.arg2.intersect(&bslot);
                let mut other = believed.clone();
                other.arg2 = xr.arg2.minus(&bslot);
                push(believed, cfg.kb_bonus);
                split_by_type(other, &mut push);
                rest.arg1 = rest.arg1.minus(&IdSlot::single(ai));
            }
            split_by_type(rest, &mut push);
        } else {
            split_by_type(xr, &mut push);
        }
    }
    out
}

/// Largest prior log weight over members of a nonempty set.
pub fn set_prior_upper_bound(set: &StatementSet, kb: &KnowledgeBase, cfg: &PriorConfig) -> Result<f64, KbError> {
    if set.is_empty() {
        return Err(KbError::EmptySet);
    }
    if set.kind != SetKind::Relational {
        return Ok(0.0);
    }
    if cfg.mode == PriorMode::Uniform {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for rel in set.relations.members(set.universe.relations) {
        let r = &kb.relations[rel as usize];
        if cfg.mode == PriorMode::Kb {
            let believed = kb.beliefs_by_rel[rel as usize].iter().any(|(&a, bs)| {
                set.arg1.contains(a + 1) && bs.iter().any(|&b| set.arg2.contains(b + 1))
            });
            if believed {
                return Ok(cfg.kb_bonus.max(cfg.type_bonus).max(0.0));
            }
        }
        let dom = category_slot(kb, r.domain);
        let ran = category_slot(kb, r.range);
        let u = set.universe.arg_size();
        if !set.arg1.intersect(&dom).is_empty(u) && !set.arg2.intersect(&ran).is_empty(u) {
            best = best.max(cfg.type_bonus);
        }
    }
    Ok(best)
}

/// Statement for `rel(a, b)` by names, tenseless.
pub fn statement(kb: &KnowledgeBase, rel: &str, a: &str, b: &str) -> Result<Statement, KbError> {
    Ok(Statement::Relation {
        rel: kb.relation(rel)?,
        arg1: Some(kb.concept(a)?),
        arg2: Some(kb.concept(b)?),
        tense: Tense::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::parse_text(
            "category athlete\ncategory sport\ncategory musician\n\
             concept athlete:agassi\nconcept sport:tennis\nconcept musician:chopin\n\
             relation athlete_plays_sport athlete sport\n\
             belief athlete_plays_sport athlete:agassi sport:tennis # known\n\
             refer \"Andre Agassi\" athlete:agassi\n",
        )
        .unwrap()
    }

    #[test]
    fn type_correctness() {
        let kb = kb();
        let good = statement(&kb, "athlete_plays_sport", "athlete:agassi", "sport:tennis").unwrap();
        let bad = statement(&kb, "athlete_plays_sport", "musician:chopin", "sport:tennis").unwrap();
        assert!(is_type_correct(&good, &kb).unwrap());
        assert!(!is_type_correct(&bad, &kb).unwrap());
        let out_of_range = Statement::relation(7, 0, 1);
        assert!(is_type_correct(&out_of_range, &kb).is_err());
    }

    #[test]
    fn prior_weights() {
        let kb = kb();
        let belief = statement(&kb, "athlete_plays_sport", "athlete:agassi", "sport:tennis").unwrap();
        let bad = statement(&kb, "athlete_plays_sport", "musician:chopin", "sport:tennis").unwrap();
        for (mode, w_belief, w_bad) in [
            (PriorMode::Uniform, 0.0, 0.0),
            (PriorMode::Type, 4.0, 0.0),
            (PriorMode::Kb, 8.0, 0.0),
        ] {
            let cfg = PriorConfig::with_mode(mode);
            assert_eq!(prior_log_weight(&belief, &kb, &cfg).unwrap(), w_belief);
            assert_eq!(prior_log_weight(&bad, &kb, &cfg).unwrap(), w_bad);
        }
    }

    #[test]
    fn empty_set_has_no_bound() {
        let kb = kb();
        let empty = StatementSet::relational(kb.universe(), TenseMask::EMPTY);
        assert!(matches!(
            set_prior_upper_bound(&empty, &kb, &PriorConfig::default()),
            Err(KbError::EmptySet)
        ));
    }

    #[test]
    fn unknown_category_is_rejected_with_line() {
        let err = KnowledgeBase::parse_text("category a\nconcept b:x\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }

    #[test]
    fn text_and_json_round_trip() {
        let kb = kb();
        let again = KnowledgeBase::parse_text(&kb.to_text()).unwrap();
        assert_eq!(again, kb);
        let json = serde_json::to_string(&kb.to_file()).unwrap();
        let back = KnowledgeBase::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, kb);
    }

    #[test]
    fn statement_text_round_trip() {
        let kb = kb();
        let s = statement(&kb, "athlete_plays_sport", "athlete:agassi", "sport:tennis")
            .unwrap()
            .with_tense(Tense::Past);
        let txt = kb.statement_text(&s);
        assert_eq!(txt, "athlete_plays_sport(athlete:agassi, sport:tennis, time:past)");
        assert_eq!(kb.parse_statement(&txt).unwrap(), s);
    }
}
