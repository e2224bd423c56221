//! Parses "Chopin plays" with rule probabilities pinned to hand-set values
//! and prints every agenda operation.

use semgram::grammar::parse_grammar;
use semgram::ontology::{KnowledgeBase, PriorConfig};
use semgram::parser::{parse_with, ParseConfig, PinnedSelect};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let kb = KnowledgeBase::parse_text(&std::fs::read_to_string(format!("{dir}/walkthrough.kb"))?)?;
    let g = parse_grammar(&std::fs::read_to_string(format!("{dir}/walkthrough.grammar"))?, &kb)?;
    let pins = PinnedSelect::parse(&g, &kb, &std::fs::read_to_string(format!("{dir}/walkthrough.pins"))?)?;
    let cfg = ParseConfig {
        k: 5,
        prior: PriorConfig::default(),
        trace: true,
    };
    let res = parse_with("Chopin plays", &g, &kb, &pins, &cfg)?;
    for line in &res.trace {
        println!("{line}");
    }
    println!();
    for (i, o) in res.outputs.iter().enumerate() {
        println!("{}\t{}\t{}\t{}", i + 1, o.score, kb.set_text(&o.set), o.tree.to_text(true));
    }
    Ok(())
}
