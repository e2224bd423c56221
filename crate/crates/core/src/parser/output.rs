//! Parse records as text or JSON lines.

use serde::{Deserialize, Serialize};

use super::{ParseOutput, ParseResult};
use crate::ontology::KnowledgeBase;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Structured,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<OutputFormat> {
        match s {
            "text" => Some(OutputFormat::Text),
            "structured" | "json" => Some(OutputFormat::Structured),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub sentence: usize,
    pub rank: usize,
    pub log_score: f64,
    pub posterior: f64,
    pub statements: String,
    pub tree: String,
}

impl OutputRecord {
    pub fn new(sentence: usize, rank: usize, o: &ParseOutput, kb: &KnowledgeBase) -> OutputRecord {
        OutputRecord {
            sentence,
            rank,
            log_score: o.score,
            posterior: o.posterior,
            statements: kb.set_text(&o.set),
            tree: o.tree.to_text(true),
        }
    }
}

/// One line per record; text fields are tab separated.
pub fn format_output(r: &OutputRecord, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            r.sentence, r.rank, r.log_score, r.posterior, r.statements, r.tree
        ),
        OutputFormat::Structured => serde_json::to_string(r).expect("records serialize"),
    }
}

pub fn format_result(sentence: usize, res: &ParseResult, kb: &KnowledgeBase, format: OutputFormat) -> String {
    let mut out = String::new();
    for (i, o) in res.outputs.iter().enumerate() {
        out += &format_output(&OutputRecord::new(sentence, i + 1, o, kb), format);
        out.push('\n');
    }
    out
}
