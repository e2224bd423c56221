//! Corpus synthesis, precision-recall scoring and AUC-versus-k sweeps.

use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Example, Grammar, GrammarError};
use crate::ontology::{prior_log_weight, KbError, KnowledgeBase, PriorConfig};
use crate::parser::{fill_posteriors, parse, ParseConfig, ParseError, ParseOutput, ParseResult};
use crate::semantics::{Statement, StatementSet, Tense, TenseMask};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sentence {0} has more than one prediction")]
    DuplicateId(usize),
    #[error("sentence {0} has no gold statement")]
    MissingGold(usize),
    #[error("confidence {0} is outside [0, 1]")]
    BadConfidence(f64),
    #[error("k values must be ascending and at least 1")]
    BadK,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// A parser's answer for one sentence: its top output and that output's
/// posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub sentence: usize,
    pub set: StatementSet,
    pub confidence: f64,
}

impl Prediction {
    /// Top output of a parse, or `None` when nothing parsed.
    pub fn from_outputs(sentence: usize, outputs: &[ParseOutput]) -> Option<Prediction> {
        outputs.first().map(|o| Prediction {
            sentence,
            set: o.set.clone(),
            confidence: o.posterior,
        })
    }

    pub fn is_ambiguous(&self) -> bool {
        !self.set.is_singleton()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguousPolicy {
    /// Only an exact singleton match counts; ambiguous outputs are non-parses.
    Strict,
    /// Correct when the gold statement is in the predicted set.
    Contains,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct confidence, highest threshold first.
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            out += &format!("{},{},{}\n", p.threshold, p.precision, p.recall);
        }
        out
    }
}

/// Sweeps the acceptance threshold down through the distinct confidences.
/// Predictions sharing a confidence enter together, so their order does not
/// matter. Recall is over every gold sentence. The area is the trapezoid
/// rule over the points, with the curve held flat from recall zero to the
/// first point.
pub fn score_predictions(
    preds: &[Prediction],
    gold: &BTreeMap<usize, Statement>,
    policy: AmbiguousPolicy,
) -> Result<PrCurve, EvalError> {
    let mut ids = HashSet::new();
    for p in preds {
        if !ids.insert(p.sentence) {
            return Err(EvalError::DuplicateId(p.sentence));
        }
        if !gold.contains_key(&p.sentence) {
            return Err(EvalError::MissingGold(p.sentence));
        }
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(EvalError::BadConfidence(p.confidence));
        }
    }
    let mut scored: Vec<(f64, usize, bool)> = preds
        .iter()
        .filter(|p| policy == AmbiguousPolicy::Contains || !p.is_ambiguous())
        .map(|p| (p.confidence, p.sentence, p.set.contains(&gold[&p.sentence])))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let total = gold.len() as f64;
    let mut curve = PrCurve::default();
    let (mut seen, mut correct) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            seen += 1;
            correct += scored[i].2 as usize;
            i += 1;
        }
        curve.points.push(PrPoint {
            threshold: t,
            precision: correct as f64 / seen as f64,
            recall: if total > 0.0 { correct as f64 / total } else { 0.0 },
        });
    }
    curve.auc = trapezoid(&curve.points);
    Ok(curve)
}

fn trapezoid(points: &[PrPoint]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let mut area = first.recall * first.precision;
    for w in points.windows(2) {
        area += (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0;
    }
    area
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TenseMode {
    PresentOnly,
    #[default]
    All,
}

/// Draws `n` statements from the prior over the root's fully specified
/// statements and generates a sentence and tree for each.
pub fn synthesize_corpus(
    g: &Grammar,
    kb: &KnowledgeBase,
    n: usize,
    seed: u64,
    tense_mode: TenseMode,
    prior: &PriorConfig,
) -> Result<Vec<Example>, EvalError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut domain = g.nonterminals[g.root].domain.clone();
    if tense_mode == TenseMode::PresentOnly {
        domain.tenses = domain.tenses.intersect(TenseMask::single(Tense::Present));
    }
    let candidates: Vec<Statement> = domain
        .members()
        .into_iter()
        .filter(|s| match s {
            Statement::Relation { arg1, arg2, .. } => arg1.is_some() && arg2.is_some(),
            _ => true,
        })
        .collect();
    if candidates.is_empty() {
        return Err(EvalError::Invalid(
            "the root nonterminal has no statements in the requested tenses".into(),
        ));
    }
    let weights = candidates
        .iter()
        .map(|s| prior_log_weight(s, kb, prior).map(f64::exp))
        .collect::<Result<Vec<f64>, _>>()?;
    let dist = WeightedIndex::new(&weights).map_err(|e| EvalError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = candidates[dist.sample(&mut rng)].clone();
            let (sentence, tree) = g.generate(&s, &mut rng)?;
            Ok(Example {
                sentence,
                statement: s,
                tree: Some(tree),
            })
        })
        .collect()
}

/// Parses every example and returns the results in input order.
pub fn parse_corpus(
    examples: &[Example],
    g: &Grammar,
    kb: &KnowledgeBase,
    cfg: &ParseConfig,
) -> Result<Vec<ParseResult>, EvalError> {
    examples
        .iter()
        .map(|ex| parse(&ex.sentence, g, kb, cfg).map_err(EvalError::from))
        .collect()
}

pub fn gold_map(examples: &[Example]) -> BTreeMap<usize, Statement> {
    examples.iter().enumerate().map(|(i, e)| (i, e.statement.clone())).collect()
}

/// Top-output predictions from the first `k` outputs of each result, with
/// posteriors renormalized over those `k`.
pub fn predictions_at(results: &[ParseResult], k: usize) -> Vec<Prediction> {
    results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let mut top: Vec<ParseOutput> = r.outputs.iter().take(k).cloned().collect();
            fill_posteriors(&mut top);
            Prediction::from_outputs(i, &top)
        })
        .collect()
}

/// Share of results whose first `k` outputs contain the gold statement.
pub fn containment_rate(results: &[ParseResult], examples: &[Example], k: usize) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits = results
        .iter()
        .zip(examples)
        .filter(|(r, ex)| r.outputs.iter().take(k).any(|o| o.set.contains(&ex.statement)))
        .count();
    hits as f64 / examples.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    pub strict_auc: f64,
    pub contains_auc: f64,
    /// Mean time until the k-th output, or the whole parse if fewer exist.
    pub mean_parse_time: Duration,
}

/// Parses once at the largest k; smaller k read a prefix of its outputs.
pub fn auc_vs_k(
    examples: &[Example],
    g: &Grammar,
    kb: &KnowledgeBase,
    k_values: &[usize],
    prior: &PriorConfig,
) -> Result<Vec<KRow>, EvalError> {
    if k_values.is_empty() || k_values[0] == 0 || k_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::BadK);
    }
    let cfg = ParseConfig {
        k: *k_values.last().unwrap(),
        prior: *prior,
        trace: false,
    };
    let results = parse_corpus(examples, g, kb, &cfg)?;
    auc_table(&results, examples, k_values)
}

/// [`auc_vs_k`] over results already parsed at the largest k.
pub fn auc_table(results: &[ParseResult], examples: &[Example], k_values: &[usize]) -> Result<Vec<KRow>, EvalError> {
    let gold = gold_map(examples);
    k_values
        .iter()
        .map(|&k| {
            let preds = predictions_at(results, k);
            let time: Duration = results
                .iter()
                .map(|r| r.outputs.get(k - 1).map_or(r.elapsed, |o| o.elapsed))
                .sum();
            Ok(KRow {
                k,
                strict_auc: score_predictions(&preds, &gold, AmbiguousPolicy::Strict)?.auc,
                contains_auc: score_predictions(&preds, &gold, AmbiguousPolicy::Contains)?.auc,
                mean_parse_time: time / results.len().max(1) as u32,
            })
        })
        .collect()
}
