//! Statements, statement sets, transformation operations and feature functions.
//!
//! Argument slots share one index space with the argument features: `0` is
//! the absent argument and `c + 1` is concept `c`. The relation slot uses raw
//! relation ids.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ConceptId = u32;
pub type RelationId = u32;

/// Argument index reserved for a deleted argument.
pub const ABSENT: u32 = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("operation {op} is not defined on {found}")]
    Domain { op: TransformOp, found: String },
    #[error("feature {feature} is not defined on {found}")]
    Feature { feature: Feature, found: String },
    #[error("path {path:?} is invalid for features {features:?}")]
    InvalidPath { path: Vec<u32>, features: Vec<Feature> },
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("cannot parse statement `{0}`")]
    Syntax(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    None,
    Past,
    Present,
    Future,
}

impl Tense {
    pub const ALL: [Tense; 4] = [Tense::None, Tense::Past, Tense::Present, Tense::Future];

    pub fn index(self) -> u32 {
        self as u32
    }

    pub fn from_index(i: u32) -> Option<Tense> {
        Tense::ALL.get(i as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tense::None => "none",
            Tense::Past => "past",
            Tense::Present => "present",
            Tense::Future => "future",
        }
    }

    pub fn parse(s: &str) -> Option<Tense> {
        Tense::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// Bit set over the four tense values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TenseMask(pub u8);

impl TenseMask {
    pub const ALL: TenseMask = TenseMask(0b1111);
    pub const NONE_ONLY: TenseMask = TenseMask(0b0001);
    pub const EMPTY: TenseMask = TenseMask(0);

    pub fn single(t: Tense) -> TenseMask {
        TenseMask(1 << t.index())
    }

    pub fn of(ts: &[Tense]) -> TenseMask {
        TenseMask(ts.iter().fold(0, |m, t| m | (1 << t.index())))
    }

    pub fn contains(self, t: Tense) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn intersect(self, o: TenseMask) -> TenseMask {
        TenseMask(self.0 & o.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 & 0b1111 == 0
    }

    pub fn len(self) -> u32 {
        (self.0 & 0b1111).count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = Tense> {
        Tense::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    fn as_slot(self) -> IdSlot {
        IdSlot::Only(self.iter().map(|t| t.index()).collect())
    }

    fn from_slot(slot: &IdSlot) -> TenseMask {
        TenseMask(
            (0..4)
                .filter(|&i| slot.contains(i))
                .fold(0, |m, i| m | (1 << i)),
        )
    }
}

/// A single ground meaning.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statement {
    Concept(ConceptId),
    Relation {
        rel: RelationId,
        arg1: Option<ConceptId>,
        arg2: Option<ConceptId>,
        tense: Tense,
    },
    Tense(Tense),
}

impl Statement {
    pub fn relation(rel: RelationId, arg1: ConceptId, arg2: ConceptId) -> Statement {
        Statement::Relation {
            rel,
            arg1: Some(arg1),
            arg2: Some(arg2),
            tense: Tense::None,
        }
    }

    pub fn with_tense(self, t: Tense) -> Statement {
        match self {
            Statement::Relation { rel, arg1, arg2, .. } => Statement::Relation {
                rel,
                arg1,
                arg2,
                tense: t,
            },
            other => other,
        }
    }

    fn describe(&self) -> String {
        match self {
            Statement::Concept(_) => "a concept statement".into(),
            Statement::Tense(_) => "a tense statement".into(),
            Statement::Relation { arg1, arg2, .. } => format!(
                "a relational statement (arg1 {}, arg2 {})",
                if arg1.is_some() { "present" } else { "absent" },
                if arg2.is_some() { "present" } else { "absent" }
            ),
        }
    }
}

pub fn arg_index(a: Option<ConceptId>) -> u32 {
    a.map_or(ABSENT, |c| c + 1)
}

pub fn arg_from_index(i: u32) -> Option<ConceptId> {
    i.checked_sub(1)
}

/// Either an explicit set of ids or everything in the universe except a set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdSlot {
    Only(BTreeSet<u32>),
    AllExcept(BTreeSet<u32>),
}

impl IdSlot {
    pub fn any() -> IdSlot {
        IdSlot::AllExcept(BTreeSet::new())
    }

    pub fn none() -> IdSlot {
        IdSlot::Only(BTreeSet::new())
    }

    pub fn single(v: u32) -> IdSlot {
        IdSlot::Only([v].into())
    }

    pub fn except(v: u32) -> IdSlot {
        IdSlot::AllExcept([v].into())
    }

    pub fn contains(&self, v: u32) -> bool {
        match self {
            IdSlot::Only(s) => s.contains(&v),
            IdSlot::AllExcept(e) => !e.contains(&v),
        }
    }

    pub fn intersect(&self, o: &IdSlot) -> IdSlot {
        use IdSlot::*;
        match (self, o) {
            (Only(a), Only(b)) => Only(a.intersection(b).copied().collect()),
            (Only(a), AllExcept(e)) | (AllExcept(e), Only(a)) => {
                Only(a.difference(e).copied().collect())
            }
            (AllExcept(a), AllExcept(b)) => AllExcept(a.union(b).copied().collect()),
        }
    }

    pub fn minus(&self, o: &IdSlot) -> IdSlot {
        self.intersect(&o.complement())
    }

    pub fn complement(&self) -> IdSlot {
        match self {
            IdSlot::Only(s) => IdSlot::AllExcept(s.clone()),
            IdSlot::AllExcept(e) => IdSlot::Only(e.clone()),
        }
    }

    /// Number of members within `0..size`.
    pub fn len(&self, size: u32) -> u64 {
        match self {
            IdSlot::Only(s) => s.iter().filter(|&&v| v < size).count() as u64,
            IdSlot::AllExcept(e) => {
                size as u64 - e.iter().filter(|&&v| v < size).count() as u64
            }
        }
    }

    pub fn is_empty(&self, size: u32) -> bool {
        self.len(size) == 0
    }

    pub fn members(&self, size: u32) -> Vec<u32> {
        (0..size).filter(|&v| self.contains(v)).collect()
    }

    pub fn single_value(&self, size: u32) -> Option<u32> {
        match self {
            IdSlot::Only(s) => {
                let mut it = s.iter().filter(|&&v| v < size);
                match (it.next(), it.next()) {
                    (Some(&v), None) => Some(v),
                    _ => None,
                }
            }
            IdSlot::AllExcept(_) if self.len(size) == 1 => self.members(size).first().copied(),
            IdSlot::AllExcept(_) => None,
        }
    }

    /// Drops out-of-universe ids and switches to the shorter encoding at the
    /// extremes (singletons and the full universe).
    pub fn normalized(&self, size: u32) -> IdSlot {
        let n = self.len(size);
        if n == size as u64 {
            return IdSlot::any();
        }
        if n <= 1 {
            return IdSlot::Only(self.members(size).into_iter().collect());
        }
        match self {
            IdSlot::Only(s) => IdSlot::Only(s.iter().copied().filter(|&v| v < size).collect()),
            IdSlot::AllExcept(e) => {
                IdSlot::AllExcept(e.iter().copied().filter(|&v| v < size).collect())
            }
        }
    }

    /// A representation that is equal for equal member sets.
    pub fn canonical(&self, size: u32) -> IdSlot {
        let members = self.members(size);
        if members.len() * 2 <= size as usize {
            IdSlot::Only(members.into_iter().collect())
        } else {
            IdSlot::AllExcept((0..size).filter(|&v| !self.contains(v)).collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Universe {
    pub relations: u32,
    pub concepts: u32,
}

impl Universe {
    /// Size of the argument index space (concepts plus the absent marker).
    pub fn arg_size(&self) -> u32 {
        self.concepts + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Concept,
    Relational,
    Tense,
}

/// A product-form set of statements of one kind.
///
/// Concept sets keep their members in `arg1`. Slots a kind does not use hold
/// fixed values (`{0}` for arguments, `{none}` for tense) so that feature
/// restriction works uniformly across kinds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatementSet {
    pub kind: SetKind,
    pub relations: IdSlot,
    pub arg1: IdSlot,
    pub arg2: IdSlot,
    pub tenses: TenseMask,
    pub universe: Universe,
}

impl StatementSet {
    /// Relational statements with both arguments present.
    pub fn relational(universe: Universe, tenses: TenseMask) -> StatementSet {
        StatementSet {
            kind: SetKind::Relational,
            relations: IdSlot::any(),
            arg1: IdSlot::except(ABSENT),
            arg2: IdSlot::except(ABSENT),
            tenses,
            universe,
        }
    }

    /// Every relational statement including ones with absent arguments.
    pub fn all_relational(universe: Universe) -> StatementSet {
        StatementSet {
            kind: SetKind::Relational,
            relations: IdSlot::any(),
            arg1: IdSlot::any(),
            arg2: IdSlot::any(),
            tenses: TenseMask::ALL,
            universe,
        }
    }

    pub fn concepts(universe: Universe, arg: IdSlot) -> StatementSet {
        StatementSet {
            kind: SetKind::Concept,
            relations: IdSlot::any(),
            arg1: arg.intersect(&IdSlot::except(ABSENT)),
            arg2: IdSlot::single(ABSENT),
            tenses: TenseMask::NONE_ONLY,
            universe,
        }
        .normalized()
    }

    pub fn tenses(universe: Universe, tenses: TenseMask) -> StatementSet {
        StatementSet {
            kind: SetKind::Tense,
            relations: IdSlot::any(),
            arg1: IdSlot::single(ABSENT),
            arg2: IdSlot::single(ABSENT),
            tenses,
            universe,
        }
    }

    pub fn singleton(universe: Universe, s: &Statement) -> StatementSet {
        match *s {
            Statement::Concept(c) => StatementSet::concepts(universe, IdSlot::single(c + 1)),
            Statement::Tense(t) => StatementSet::tenses(universe, TenseMask::single(t)),
            Statement::Relation {
                rel,
                arg1,
                arg2,
                tense,
            } => StatementSet {
                kind: SetKind::Relational,
                relations: IdSlot::single(rel),
                arg1: IdSlot::single(arg_index(arg1)),
                arg2: IdSlot::single(arg_index(arg2)),
                tenses: TenseMask::single(tense),
                universe,
            },
        }
    }

    pub fn empty_like(&self) -> StatementSet {
        StatementSet {
            relations: IdSlot::none(),
            ..self.clone()
        }
    }

    fn rel_size(&self) -> u32 {
        self.universe.relations
    }

    fn arg_size(&self) -> u32 {
        self.universe.arg_size()
    }

    pub fn normalized(mut self) -> StatementSet {
        match self.kind {
            SetKind::Relational => {
                self.relations = self.relations.normalized(self.rel_size());
                self.arg1 = self.arg1.normalized(self.arg_size());
                self.arg2 = self.arg2.normalized(self.arg_size());
            }
            SetKind::Concept => {
                self.arg1 = self.arg1.normalized(self.arg_size());
            }
            SetKind::Tense => {}
        }
        self.tenses = TenseMask(self.tenses.0 & 0b1111);
        self
    }

    pub fn is_empty(&self) -> bool {
        match self.kind {
            SetKind::Relational => {
                self.relations.is_empty(self.rel_size())
                    || self.arg1.is_empty(self.arg_size())
                    || self.arg2.is_empty(self.arg_size())
                    || self.tenses.is_empty()
            }
            SetKind::Concept => {
                self.arg1.intersect(&IdSlot::except(ABSENT)).is_empty(self.arg_size())
            }
            SetKind::Tense => self.tenses.is_empty(),
        }
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            return 0;
        }
        match self.kind {
            SetKind::Relational => {
                self.relations.len(self.rel_size())
                    * self.arg1.len(self.arg_size())
                    * self.arg2.len(self.arg_size())
                    * self.tenses.len() as u64
            }
            SetKind::Concept => self
                .arg1
                .intersect(&IdSlot::except(ABSENT))
                .len(self.arg_size()),
            SetKind::Tense => self.tenses.len() as u64,
        }
    }

    pub fn contains(&self, s: &Statement) -> bool {
        match (self.kind, s) {
            (SetKind::Concept, Statement::Concept(c)) => {
                c + 1 < self.arg_size() && self.arg1.contains(c + 1)
            }
            (SetKind::Tense, Statement::Tense(t)) => self.tenses.contains(*t),
            (
                SetKind::Relational,
                Statement::Relation {
                    rel,
                    arg1,
                    arg2,
                    tense,
                },
            ) => {
                *rel < self.rel_size()
                    && arg_index(*arg1) < self.arg_size()
                    && arg_index(*arg2) < self.arg_size()
                    && self.relations.contains(*rel)
                    && self.arg1.contains(arg_index(*arg1))
                    && self.arg2.contains(arg_index(*arg2))
                    && self.tenses.contains(*tense)
            }
            _ => false,
        }
    }

    pub fn intersect(&self, o: &StatementSet) -> StatementSet {
        if self.kind != o.kind {
            return self.empty_like().with_kind_emptied();
        }
        StatementSet {
            kind: self.kind,
            relations: self.relations.intersect(&o.relations),
            arg1: self.arg1.intersect(&o.arg1),
            arg2: self.arg2.intersect(&o.arg2),
            tenses: self.tenses.intersect(o.tenses),
            universe: self.universe,
        }
        .normalized()
    }

    fn with_kind_emptied(mut self) -> StatementSet {
        self.arg1 = IdSlot::none();
        self.tenses = TenseMask::EMPTY;
        self
    }

    /// All members, in relation/arg1/arg2/tense order.
    pub fn members(&self) -> Vec<Statement> {
        if self.is_empty() {
            return Vec::new();
        }
        match self.kind {
            SetKind::Concept => self
                .arg1
                .members(self.arg_size())
                .into_iter()
                .filter(|&a| a != ABSENT)
                .map(|a| Statement::Concept(a - 1))
                .collect(),
            SetKind::Tense => self.tenses.iter().map(Statement::Tense).collect(),
            SetKind::Relational => {
                let mut out = Vec::new();
                for rel in self.relations.members(self.rel_size()) {
                    for a1 in self.arg1.members(self.arg_size()) {
                        for a2 in self.arg2.members(self.arg_size()) {
                            for t in self.tenses.iter() {
                                out.push(Statement::Relation {
                                    rel,
                                    arg1: arg_from_index(a1),
                                    arg2: arg_from_index(a2),
                                    tense: t,
                                });
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.len() == 1
    }

    /// Equal for sets with the same members; used as a deduplication key.
    pub fn canonical(&self) -> StatementSet {
        if self.is_empty() {
            return StatementSet {
                kind: self.kind,
                relations: IdSlot::none(),
                arg1: IdSlot::none(),
                arg2: IdSlot::none(),
                tenses: TenseMask::EMPTY,
                universe: self.universe,
            };
        }
        StatementSet {
            kind: self.kind,
            relations: match self.kind {
                SetKind::Relational => self.relations.canonical(self.rel_size()),
                _ => IdSlot::any(),
            },
            arg1: self.arg1.canonical(self.arg_size()),
            arg2: self.arg2.canonical(self.arg_size()),
            tenses: self.tenses,
            universe: self.universe,
        }
    }

    fn slot(&self, f: Feature) -> IdSlot {
        match f {
            Feature::RelationIndex => self.relations.clone(),
            Feature::Arg1Index => self.arg1.clone(),
            Feature::Arg2Index => self.arg2.clone(),
            Feature::TenseIndex => self.tenses.as_slot(),
        }
    }

    /// Members whose feature value lies in `sel`.
    pub fn restrict(&self, f: Feature, sel: &IdSlot) -> StatementSet {
        if f == Feature::RelationIndex && self.kind != SetKind::Relational {
            return self.empty_like().with_kind_emptied();
        }
        let mut out = self.clone();
        match f {
            Feature::RelationIndex => out.relations = self.relations.intersect(sel),
            Feature::Arg1Index => out.arg1 = self.arg1.intersect(sel),
            Feature::Arg2Index => out.arg2 = self.arg2.intersect(sel),
            Feature::TenseIndex => {
                out.tenses = TenseMask::from_slot(&self.tenses.as_slot().intersect(sel))
            }
        }
        out.normalized()
    }

    /// The set of values `f` takes on members, or `None` when `f` is
    /// undefined on this kind.
    pub fn feature_values(&self, f: Feature) -> Option<IdSlot> {
        if f == Feature::RelationIndex && self.kind != SetKind::Relational {
            return None;
        }
        Some(self.slot(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformOp {
    Identity,
    SelectArg1,
    SelectArg2,
    DeleteArg1,
    DeleteArg2,
    SelectTense,
}

impl TransformOp {
    pub const ALL: [TransformOp; 6] = [
        TransformOp::Identity,
        TransformOp::SelectArg1,
        TransformOp::SelectArg2,
        TransformOp::DeleteArg1,
        TransformOp::DeleteArg2,
        TransformOp::SelectTense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformOp::Identity => "identity",
            TransformOp::SelectArg1 => "select_arg1",
            TransformOp::SelectArg2 => "select_arg2",
            TransformOp::DeleteArg1 => "delete_arg1",
            TransformOp::DeleteArg2 => "delete_arg2",
            TransformOp::SelectTense => "select_tense",
        }
    }

    pub fn parse(s: &str) -> Option<TransformOp> {
        TransformOp::ALL.into_iter().find(|o| o.name() == s)
    }
}

impl fmt::Display for TransformOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn apply(op: TransformOp, s: &Statement) -> Result<Statement, SemanticsError> {
    let err = || SemanticsError::Domain {
        op,
        found: s.describe(),
    };
    match (op, s) {
        (TransformOp::Identity, _) => Ok(s.clone()),
        (TransformOp::SelectArg1, Statement::Relation { arg1: Some(a), .. }) => {
            Ok(Statement::Concept(*a))
        }
        (TransformOp::SelectArg2, Statement::Relation { arg2: Some(a), .. }) => {
            Ok(Statement::Concept(*a))
        }
        (
            TransformOp::DeleteArg1,
            &Statement::Relation {
                rel,
                arg1: Some(_),
                arg2,
                tense,
            },
        ) => Ok(Statement::Relation {
            rel,
            arg1: None,
            arg2,
            tense,
        }),
        (
            TransformOp::DeleteArg2,
            &Statement::Relation {
                rel,
                arg1,
                arg2: Some(_),
                tense,
            },
        ) => Ok(Statement::Relation {
            rel,
            arg1,
            arg2: None,
            tense,
        }),
        (TransformOp::SelectTense, Statement::Relation { tense, .. }) => {
            Ok(Statement::Tense(*tense))
        }
        _ => Err(err()),
    }
}

/// All statements `y` with `apply(op, y)` in `set`.
pub fn preimage_set(op: TransformOp, set: &StatementSet) -> StatementSet {
    let u = set.universe;
    let empty = || StatementSet::all_relational(u).empty_like();
    match op {
        TransformOp::Identity => set.clone(),
        TransformOp::SelectArg1 | TransformOp::SelectArg2 => {
            if set.kind != SetKind::Concept {
                return empty();
            }
            let concepts = set.arg1.intersect(&IdSlot::except(ABSENT));
            let mut out = StatementSet::all_relational(u);
            if op == TransformOp::SelectArg1 {
                out.arg1 = concepts;
            } else {
                out.arg2 = concepts;
            }
            out.normalized()
        }
        TransformOp::DeleteArg1 | TransformOp::DeleteArg2 => {
            if set.kind != SetKind::Relational {
                return empty();
            }
            let slot = if op == TransformOp::DeleteArg1 {
                &set.arg1
            } else {
                &set.arg2
            };
            if !slot.contains(ABSENT) {
                return empty();
            }
            let mut out = set.clone();
            if op == TransformOp::DeleteArg1 {
                out.arg1 = IdSlot::except(ABSENT);
            } else {
                out.arg2 = IdSlot::except(ABSENT);
            }
            out.normalized()
        }
        TransformOp::SelectTense => {
            if set.kind != SetKind::Tense {
                return empty();
            }
            let mut out = StatementSet::all_relational(u);
            out.tenses = set.tenses;
            out
        }
    }
}

pub fn preimage(op: TransformOp, s: &Statement, universe: Universe) -> StatementSet {
    preimage_set(op, &StatementSet::singleton(universe, s))
}

/// `{apply(op, y) : y in set}`, ignoring members outside the domain of `op`.
pub fn image_set(op: TransformOp, set: &StatementSet) -> StatementSet {
    let u = set.universe;
    match op {
        TransformOp::Identity => set.clone(),
        _ if set.kind != SetKind::Relational || set.is_empty() => match op {
            TransformOp::SelectArg1 | TransformOp::SelectArg2 => {
                StatementSet::concepts(u, IdSlot::none())
            }
            TransformOp::SelectTense => StatementSet::tenses(u, TenseMask::EMPTY),
            _ => set.empty_like(),
        },
        TransformOp::SelectArg1 => StatementSet::concepts(u, set.arg1.clone()),
        TransformOp::SelectArg2 => StatementSet::concepts(u, set.arg2.clone()),
        TransformOp::DeleteArg1 | TransformOp::DeleteArg2 => {
            let slot = if op == TransformOp::DeleteArg1 {
                &set.arg1
            } else {
                &set.arg2
            };
            let mut out = set.clone();
            let v = if slot.intersect(&IdSlot::except(ABSENT)).is_empty(u.arg_size()) {
                IdSlot::none()
            } else {
                IdSlot::single(ABSENT)
            };
            if op == TransformOp::DeleteArg1 {
                out.arg1 = v;
            } else {
                out.arg2 = v;
            }
            out.normalized()
        }
        TransformOp::SelectTense => StatementSet::tenses(u, set.tenses),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    RelationIndex,
    Arg1Index,
    Arg2Index,
    TenseIndex,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::RelationIndex => "relation_index",
            Feature::Arg1Index => "arg1_index",
            Feature::Arg2Index => "arg2_index",
            Feature::TenseIndex => "tense_index",
        }
    }

    pub fn parse(s: &str) -> Option<Feature> {
        [
            Feature::RelationIndex,
            Feature::Arg1Index,
            Feature::Arg2Index,
            Feature::TenseIndex,
        ]
        .into_iter()
        .find(|f| f.name() == s)
    }

    /// Number of distinct values.
    pub fn cardinality(self, u: Universe) -> u32 {
        match self {
            Feature::RelationIndex => u.relations,
            Feature::Arg1Index | Feature::Arg2Index => u.arg_size(),
            Feature::TenseIndex => 4,
        }
    }

    pub fn value(self, s: &Statement) -> Result<u32, SemanticsError> {
        match (self, s) {
            (Feature::RelationIndex, Statement::Relation { rel, .. }) => Ok(*rel),
            (Feature::RelationIndex, _) => Err(SemanticsError::Feature {
                feature: self,
                found: s.describe(),
            }),
            (Feature::Arg1Index, Statement::Relation { arg1, .. }) => Ok(arg_index(*arg1)),
            (Feature::Arg1Index, Statement::Concept(c)) => Ok(c + 1),
            (Feature::Arg2Index, Statement::Relation { arg2, .. }) => Ok(arg_index(*arg2)),
            (Feature::TenseIndex, Statement::Relation { tense, .. })
            | (Feature::TenseIndex, Statement::Tense(tense)) => Ok(tense.index()),
            _ => Ok(0),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn feature_path(features: &[Feature], s: &Statement) -> Result<Vec<u32>, SemanticsError> {
    features.iter().map(|f| f.value(s)).collect()
}

/// Members of `domain` whose feature path equals `path`.
pub fn partition_cell(
    features: &[Feature],
    path: &[u32],
    domain: &StatementSet,
) -> Result<StatementSet, SemanticsError> {
    let bad = path.len() > features.len()
        || features
            .iter()
            .zip(path)
            .any(|(f, &v)| v >= f.cardinality(domain.universe));
    if bad {
        return Err(SemanticsError::InvalidPath {
            path: path.to_vec(),
            features: features.to_vec(),
        });
    }
    let mut out = domain.clone();
    for (f, &v) in features.iter().zip(path) {
        out = out.restrict(*f, &IdSlot::single(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: Universe = Universe {
        relations: 3,
        concepts: 5,
    };

    fn rel(r: u32, a: Option<u32>, b: Option<u32>) -> Statement {
        Statement::Relation {
            rel: r,
            arg1: a,
            arg2: b,
            tense: Tense::None,
        }
    }

    #[test]
    fn select_and_delete() {
        let s = rel(0, Some(2), Some(3));
        assert_eq!(apply(TransformOp::SelectArg1, &s).unwrap(), Statement::Concept(2));
        assert_eq!(apply(TransformOp::SelectArg2, &s).unwrap(), Statement::Concept(3));
        assert_eq!(
            apply(TransformOp::DeleteArg1, &s).unwrap(),
            rel(0, None, Some(3))
        );
        let d = apply(TransformOp::DeleteArg1, &s).unwrap();
        assert!(apply(TransformOp::SelectArg1, &d).is_err());
        assert!(apply(TransformOp::DeleteArg1, &d).is_err());
        assert!(apply(TransformOp::SelectArg1, &Statement::Concept(1)).is_err());
    }

    #[test]
    fn preimage_of_concept_covers_all_relations() {
        let pre = preimage(TransformOp::SelectArg1, &Statement::Concept(1), U);
        assert!(pre.contains(&rel(0, Some(1), Some(4))));
        assert!(pre.contains(&rel(2, Some(1), None)));
        assert!(!pre.contains(&rel(2, Some(0), None)));
        assert_eq!(pre.len(), 3 * 6 * 4);
    }

    #[test]
    fn delete_preimage_requires_absent() {
        let x = StatementSet::singleton(U, &rel(1, Some(0), Some(2)));
        assert!(preimage_set(TransformOp::DeleteArg1, &x).is_empty());
        let y = StatementSet::singleton(U, &rel(1, None, Some(2)));
        let pre = preimage_set(TransformOp::DeleteArg1, &y);
        assert_eq!(pre.len(), 5);
        assert!(pre.contains(&rel(1, Some(4), Some(2))));
    }

    #[test]
    fn features_of_the_walkthrough_statement() {
        // relation 0 plays the sport relation, concept 0 is tennis
        let s = rel(0, Some(3), Some(0));
        let path = feature_path(&[Feature::RelationIndex, Feature::Arg2Index], &s).unwrap();
        assert_eq!(path, vec![0, 1]);
        let d = apply(TransformOp::DeleteArg2, &s).unwrap();
        assert_eq!(Feature::Arg2Index.value(&d).unwrap(), 0);
        assert!(Feature::RelationIndex.value(&Statement::Concept(0)).is_err());
    }

    #[test]
    fn partition_cell_rejects_bad_paths() {
        let dom = StatementSet::all_relational(U);
        let f = [Feature::RelationIndex, Feature::Arg2Index];
        assert!(partition_cell(&f, &[3], &dom).is_err());
        assert!(partition_cell(&f, &[0, 6], &dom).is_err());
        let cell = partition_cell(&f, &[2, 0], &dom).unwrap();
        assert_eq!(cell.len(), 6 * 4);
    }

    #[test]
    fn slot_emptiness_needs_universe() {
        let s = IdSlot::AllExcept([0, 1, 2].into());
        assert!(s.is_empty(3));
        assert!(!s.is_empty(4));
        assert_eq!(s.canonical(4), IdSlot::Only([3].into()));
    }
}
