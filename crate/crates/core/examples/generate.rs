//! Trains the round-trip grammar on its seed corpus and generates
//! sentences, first for fixed statements and then for prior draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semgram::eval::{synthesize_corpus, TenseMode};
use semgram::grammar::{parse_grammar, read_corpus, TrainConfig};
use semgram::ontology::{statement, KnowledgeBase, PriorConfig, PriorMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let kb = KnowledgeBase::parse_text(&std::fs::read_to_string(format!("{dir}/roundtrip.kb"))?)?;
    let g = parse_grammar(&std::fs::read_to_string(format!("{dir}/roundtrip.grammar"))?, &kb)?;
    let seed = read_corpus(&std::fs::read_to_string(format!("{dir}/roundtrip.seed.corpus"))?, &g, &kb)?;
    let g = g.train(&seed, &TrainConfig::default())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (rel, a, b) in [
        ("musician_plays_inst", "musician:chopin", "instrument:piano"),
        ("athlete_plays_sport", "athlete:serena_williams", "sport:tennis"),
        ("city_located_in_country", "city:rome", "country:italy"),
    ] {
        let s = statement(&kb, rel, a, b)?;
        for _ in 0..2 {
            let (text, tree) = g.generate(&s, &mut rng)?;
            println!("{:<28} {}", text, tree.to_text(false));
        }
    }

    println!();
    let prior = PriorConfig::with_mode(PriorMode::Type);
    for ex in synthesize_corpus(&g, &kb, 8, 7, TenseMode::All, &prior)? {
        println!("{:<28} {}", ex.sentence, kb.statement_text(&ex.statement));
    }
    Ok(())
}
