//! Top-down sampling of sentences from statements.

use rand::Rng;

use super::{Grammar, GrammarError, NtId, Symbol, SyntaxTree};
use crate::semantics::{apply, Statement};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    pub capitalize: bool,
    pub period: bool,
}

/// Optional surface clean-up applied after generation.
pub fn postprocess(sentence: &str, opts: GenerateOptions) -> String {
    let mut out = String::with_capacity(sentence.len() + 1);
    let mut chars = sentence.chars();
    if let Some(c) = chars.next() {
        if opts.capitalize {
            out.extend(c.to_uppercase());
        } else {
            out.push(c);
        }
    }
    out.extend(chars);
    if opts.period {
        out.push('.');
    }
    out
}

impl Grammar {
    /// Probability of each rule of `nt` given a statement.
    pub fn rule_distribution(&self, nt: NtId, s: &Statement) -> Result<Vec<f64>, GrammarError> {
        (0..self.rules[nt].len())
            .map(|r| self.rule_log_prob(nt, r, s).map(f64::exp))
            .collect()
    }

    pub fn generate<R: Rng>(&self, s: &Statement, rng: &mut R) -> Result<(String, SyntaxTree), GrammarError> {
        let mut pos = 0;
        let tree = self.expand(self.root, s, &mut pos, rng)?;
        Ok((tree.yield_text(), tree))
    }

    fn expand<R: Rng>(&self, nt: NtId, s: &Statement, pos: &mut usize, rng: &mut R) -> Result<SyntaxTree, GrammarError> {
        if !self.nonterminals[nt].domain.contains(s) {
            return Err(GrammarError::Invalid(format!(
                "statement cannot be expressed by `{}`",
                self.nt_name(nt)
            )));
        }
        let rule_id = if self.is_affix_nt(nt) {
            let Statement::Tense(t) = s else {
                return Err(GrammarError::Invalid("affix needs a tense statement".into()));
            };
            self.rules[nt]
                .iter()
                .position(|r| self.affix_applies(r, *t))
                .ok_or_else(|| GrammarError::Invalid(format!("no affix for tense {}", t.name())))?
        } else {
            let probs = self.rule_distribution(nt, s)?;
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                if u < *p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            pick
        };
        let start = *pos;
        let mut children = Vec::new();
        for item in &self.rules[nt][rule_id].rhs {
            match &item.symbol {
                Symbol::Terminal(t) => {
                    children.push(SyntaxTree::leaf(t, *pos, item.implicit));
                    *pos += t.chars().count();
                }
                Symbol::Nonterminal(b) => {
                    let child = apply(item.op, s)?;
                    children.push(self.expand(*b, &child, pos, rng)?);
                }
            }
        }
        Ok(SyntaxTree {
            label: self.nt_name(nt).to_string(),
            rule: Some(rule_id),
            start,
            end: *pos,
            children,
            implicit: false,
        })
    }
}
