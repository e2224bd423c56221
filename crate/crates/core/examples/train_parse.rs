//! Train on the seed corpus, synthesize sentences from the trained grammar,
//! retrain on most of them and parse the rest.

use std::time::Instant;

use semgram::eval::{containment_rate, parse_corpus, synthesize_corpus, TenseMode};
use semgram::grammar::{parse_grammar, read_corpus, TrainConfig};
use semgram::ontology::{KnowledgeBase, PriorConfig, PriorMode};
use semgram::parser::ParseConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let kb = KnowledgeBase::parse_text(&std::fs::read_to_string(format!("{dir}/roundtrip.kb"))?)?;
    let g = parse_grammar(&std::fs::read_to_string(format!("{dir}/roundtrip.grammar"))?, &kb)?;
    let seed = read_corpus(&std::fs::read_to_string(format!("{dir}/roundtrip.seed.corpus"))?, &g, &kb)?;
    let cfg = TrainConfig::default();
    let teacher = g.train(&seed, &cfg)?;

    let prior = PriorConfig::with_mode(PriorMode::Type);
    let synth_seed = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let corpus = synthesize_corpus(&teacher, &kb, 500, synth_seed, TenseMode::All, &prior)?;
    let (train, test) = corpus.split_at(400);
    let t = Instant::now();
    let student = g.train(train, &cfg)?;
    println!("trained on {} sentences in {:.2?}", train.len(), t.elapsed());

    let t = Instant::now();
    let results = parse_corpus(test, &student, &kb, &ParseConfig::default())?;
    println!("parsed {} sentences in {:.2?}", test.len(), t.elapsed());
    println!("top-1 containment {:.3}", containment_rate(&results, test, 1));
    println!("top-10 containment {:.3}", containment_rate(&results, test, 10));
    for (ex, r) in test.iter().zip(&results).take(5) {
        let top = &r.outputs[0];
        println!("{:<32} {}  {:.3}", ex.sentence, kb.set_text(&top.set), top.score);
    }
    Ok(())
}
