//! Root-plus-affix verbs against whole-word verbs. Both grammars see the
//! first four verbs only in the present tense during training, then parse
//! their past-tense forms.

use std::collections::BTreeMap;

use semgram::eval::{containment_rate, parse_corpus, predictions_at, score_predictions, AmbiguousPolicy};
use semgram::grammar::{parse_grammar, read_corpus, TrainConfig};
use semgram::ontology::KnowledgeBase;
use semgram::parser::ParseConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let read = |name: &str| std::fs::read_to_string(format!("{dir}/{name}"));
    let kb = KnowledgeBase::parse_text(&read("morph.kb")?)?;
    for name in ["morph", "nomorph"] {
        let g = parse_grammar(&read(&format!("{name}.grammar"))?, &kb)?;
        let train = read_corpus(&read(&format!("{name}.train.corpus"))?, &g, &kb)?;
        let test = read_corpus(&read("morph.test.corpus")?, &g, &kb)?;
        let trained = g.train(&train, &TrainConfig::default())?;
        let results = parse_corpus(&test, &trained, &kb, &ParseConfig::default())?;
        let gold: BTreeMap<_, _> = test.iter().enumerate().map(|(i, e)| (i, e.statement.clone())).collect();
        let strict = score_predictions(&predictions_at(&results, 10), &gold, AmbiguousPolicy::Strict)?;
        println!(
            "{name:<8} top-1 {:.3}  top-10 {:.3}  strict AUC {:.3}",
            containment_rate(&results, &test, 1),
            containment_rate(&results, &test, 10),
            strict.auc
        );
        let top = &results[0].outputs[0];
        println!("         {} -> {} ({:.3})", test[0].sentence, kb.set_text(&top.set), top.score);
    }
    Ok(())
}
