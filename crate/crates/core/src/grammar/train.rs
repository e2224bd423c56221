//! Supervised fitting of the per-nonterminal HDPs from annotated trees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, Grammar, GrammarError, Symbol, SyntaxTree};
use crate::hdp::{HdpModel, SamplerConfig};
use crate::semantics::{apply, feature_path, Statement};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sampler: SamplerConfig,
    pub seed: u64,
}

type Observations = Vec<Vec<(Vec<u32>, u32)>>;

fn collect(g: &Grammar, node: &SyntaxTree, s: &Statement, out: &mut Observations) -> Result<(), GrammarError> {
    let nt = g.tree_nt(node)?;
    let rule_id = node
        .rule
        .ok_or_else(|| GrammarError::Tree(format!("`{}` node has no rule", node.label)))?;
    let rule = g
        .rules[nt]
        .get(rule_id)
        .ok_or_else(|| GrammarError::Tree(format!("`{}` has no rule #{rule_id}", node.label)))?;
    if !g.nonterminals[nt].domain.contains(s) {
        return Err(GrammarError::Tree(format!(
            "statement at `{}` lies outside its domain",
            node.label
        )));
    }
    if g.is_affix_nt(nt) {
        let ok = matches!(s, Statement::Tense(t) if g.affix_applies(rule, *t));
        if !ok {
            return Err(GrammarError::Tree(format!(
                "affix rule #{rule_id} does not match the statement's tense"
            )));
        }
    } else {
        let path = feature_path(&g.nonterminals[nt].features, s)?;
        out[nt].push((path, rule_id as u32));
    }
    if rule.rhs.len() != node.children.len() {
        return Err(GrammarError::Tree(format!(
            "`{}` node does not match rule #{rule_id}",
            node.label
        )));
    }
    for (item, child) in rule.rhs.iter().zip(&node.children) {
        match &item.symbol {
            Symbol::Nonterminal(b) => {
                if child.label != g.nt_name(*b) || child.is_terminal() {
                    return Err(GrammarError::Tree(format!(
                        "expected `{}` under `{}`",
                        g.nt_name(*b),
                        node.label
                    )));
                }
                collect(g, child, &apply(item.op, s)?, out)?;
            }
            Symbol::Terminal(t) => {
                if !child.is_terminal() || &child.label != t {
                    return Err(GrammarError::Tree(format!("expected terminal {t:?} under `{}`", node.label)));
                }
            }
        }
    }
    Ok(())
}

/// Per-nonterminal `(feature path, rule id)` observations of a corpus.
pub fn observations(g: &Grammar, corpus: &[Example]) -> Result<Observations, GrammarError> {
    let mut out = vec![Vec::new(); g.nonterminals.len()];
    for ex in corpus {
        let tree = ex
            .tree
            .as_ref()
            .ok_or_else(|| GrammarError::Tree(format!("`{}` has no tree", ex.sentence)))?;
        if g.tree_nt(tree)? != g.root {
            return Err(GrammarError::Tree("tree is not rooted at the root nonterminal".into()));
        }
        collect(g, tree, &ex.statement, &mut out)?;
    }
    Ok(out)
}

pub fn train(g: &Grammar, corpus: &[Example], cfg: &TrainConfig) -> Result<Grammar, GrammarError> {
    let data = observations(g, corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = g.clone();
    for (nt, obs) in data.into_iter().enumerate() {
        if g.is_affix_nt(nt) {
            out.models[nt] = None;
            continue;
        }
        let tree = g.build_hdp_tree(nt)?;
        out.models[nt] = Some(if obs.is_empty() {
            HdpModel::empty(tree)
        } else {
            HdpModel::fit(tree, obs, &cfg.sampler, &mut rng)?
        });
    }
    Ok(out)
}
