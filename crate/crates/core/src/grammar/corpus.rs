//! Tab-separated corpora: `sentence<TAB>statement[<TAB>tree]` per line.

use serde::{Deserialize, Serialize};

use super::{Grammar, GrammarError, SyntaxTree};
use crate::ontology::KnowledgeBase;
use crate::semantics::Statement;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub sentence: String,
    pub statement: Statement,
    pub tree: Option<SyntaxTree>,
}

pub fn read_corpus(text: &str, grammar: &Grammar, kb: &KnowledgeBase) -> Result<Vec<Example>, GrammarError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |msg: String| GrammarError::Corpus { line, msg };
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(err(format!("expected 2 or 3 tab-separated columns, got {}", cols.len())));
        }
        let statement = kb.parse_statement(cols[1]).map_err(|e| err(e.to_string()))?;
        let tree = match cols.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => None,
            Some(t) => {
                let tree = grammar.parse_tree_text(t).map_err(|e| err(e.to_string()))?;
                if tree.yield_text() != cols[0] {
                    return Err(err(format!(
                        "tree yields `{}` but the sentence is `{}`",
                        tree.yield_text(),
                        cols[0]
                    )));
                }
                Some(tree)
            }
        };
        out.push(Example {
            sentence: cols[0].to_string(),
            statement,
            tree,
        });
    }
    Ok(out)
}

pub fn write_corpus(examples: &[Example], kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    for ex in examples {
        out += &ex.sentence;
        out.push('\t');
        out += &kb.statement_text(&ex.statement);
        if let Some(t) = &ex.tree {
            out.push('\t');
            out += &t.to_text(false);
        }
        out.push('\n');
    }
    out
}
