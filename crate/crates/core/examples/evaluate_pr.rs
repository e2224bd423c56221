//! Precision-recall curves for the whole-word morphology grammar under
//! both policies, and strict AUC as k grows.

use semgram::eval::{auc_table, gold_map, parse_corpus, predictions_at, score_predictions, AmbiguousPolicy};
use semgram::grammar::{parse_grammar, read_corpus, TrainConfig};
use semgram::ontology::KnowledgeBase;
use semgram::parser::ParseConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let read = |name: &str| std::fs::read_to_string(format!("{dir}/{name}"));
    let kb = KnowledgeBase::parse_text(&read("morph.kb")?)?;
    let g = parse_grammar(&read("nomorph.grammar")?, &kb)?;
    let train = read_corpus(&read("nomorph.train.corpus")?, &g, &kb)?;
    let test = read_corpus(&read("morph.test.corpus")?, &g, &kb)?;
    let g = g.train(&train, &TrainConfig::default())?;

    let results = parse_corpus(&test, &g, &kb, &ParseConfig { k: 20, ..Default::default() })?;
    let gold = gold_map(&test);
    for policy in [AmbiguousPolicy::Strict, AmbiguousPolicy::Contains] {
        let curve = score_predictions(&predictions_at(&results, 20), &gold, policy)?;
        println!("{policy:?}: AUC {:.4}", curve.auc);
        print!("{}", curve.to_csv());
    }
    println!();
    println!("k\tstrict\tcontains");
    for row in auc_table(&results, &test, &[1, 2, 5, 10, 20])? {
        println!("{}\t{:.4}\t{:.4}", row.k, row.strict_auc, row.contains_auc);
    }
    Ok(())
}
