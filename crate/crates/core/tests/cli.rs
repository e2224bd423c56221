mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::{leaf_predictive, DIR};
use semgram::cli::run;
use semgram::grammar::{Grammar, ModelFile};

fn fx(name: &str) -> String {
    format!("{DIR}/{name}")
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("semgram").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn walkthrough_args<'a>() -> Vec<&'a str> {
    vec!["--grammar", concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/walkthrough.grammar"), "--kb", concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/walkthrough.kb")]
}

fn train_walkthrough(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let model = dir.join(name);
    let corpus = fx("walkthrough.corpus");
    let mut args = walkthrough_args();
    args.extend(["--corpus", &corpus, "--seed", seed, "--burn-in", "50", "train", "--out", model.to_str().unwrap()]);
    let (code, out, err) = cli(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("sentences\t4\n"), "{out}");
    model
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_semgram");
    let bad_flag = Command::new(bin).args(["parse", "--no-such-flag"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(1));
    let missing = Command::new(bin)
        .args(walkthrough_args())
        .args(["--corpus", "/nonexistent/corpus.tsv", "train", "--out", "/tmp/unused.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["parse", "--k", "0", "--sentence", "x"]).0, 1);
    assert_eq!(cli(&["parse", "--prior", "strong", "--sentence", "x"]).0, 1);
    // no grammar or model anywhere
    assert_eq!(cli(&["parse", "--sentence", "Chopin plays"]).0, 1);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.grammar");
    std::fs::write(&bad, "root S\nrule S -> \n").unwrap();
    let kb = fx("walkthrough.kb");
    let (code, _, err) = cli(&["--grammar", bad.to_str().unwrap(), "--kb", &kb, "parse", "--sentence", "x"]);
    assert_eq!(code, 2, "{err}");
    let mut args = walkthrough_args();
    args.extend(["--corpus", "/nonexistent", "evaluate"]);
    assert_eq!(cli(&args).0, 2);
}

#[test]
fn training_is_reproducible_and_reloads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_walkthrough(dir.path(), "a.json", "3");
    let b = train_walkthrough(dir.path(), "b.json", "3");
    let c = train_walkthrough(dir.path(), "c.json", "4");
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_ne!(text, std::fs::read_to_string(&c).unwrap());

    let f: ModelFile = serde_json::from_str(&text).unwrap();
    let (g, kb) = Grammar::from_model_file(&f).unwrap();
    let again = serde_json::to_string(&g.to_model_file(&kb)).unwrap();
    assert_eq!(again, text);
}

#[test]
fn generation_is_seeded() {
    let mut args = walkthrough_args();
    args.extend(["--seed", "7", "generate", "--n", "5"]);
    let (code, first, _) = cli(&args);
    assert_eq!(code, 0);
    assert_eq!(first.lines().count(), 5);
    assert_eq!(cli(&args).1, first);
    for line in first.lines() {
        assert_eq!(line.split('\t').count(), 3, "{line}");
    }
}

#[test]
fn pinned_walkthrough_top_record() {
    let pins = fx("walkthrough.pins");
    let mut args = walkthrough_args();
    args.extend(["--k", "3", "--format", "structured", "parse", "--sentence", "Chopin plays", "--pins", &pins]);
    let (code, out, err) = cli(&args);
    assert_eq!(code, 0, "{err}");
    let top: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(top["rank"], 1);
    assert_eq!(top["log_score"], -8.0);
    assert_eq!(top["statements"], "musician_plays_inst(musician:chopin, *-{instrument:piano})");
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn empty_input_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.txt");
    std::fs::write(&input, "\n\n").unwrap();
    let mut args = walkthrough_args();
    args.extend(["parse", "--input", input.to_str().unwrap()]);
    let (code, out, _) = cli(&args);
    assert_eq!(code, 0);
    assert!(out.is_empty());
}

#[test]
fn smaller_k_prints_a_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_walkthrough(dir.path(), "m.json", "1");
    let lines = |k: &str| {
        let (code, out, _) = cli(&["--model", model.to_str().unwrap(), "--k", k, "parse", "--sentence", "Andre Agassi plays"]);
        assert_eq!(code, 0);
        // posteriors renormalize over the printed outputs; compare the rest
        out.lines()
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                [f[0], f[1], f[2], f[4], f[5]].join("\t")
            })
            .collect::<Vec<_>>()
    };
    let one = lines("1");
    let five = lines("5");
    assert_eq!(one.len(), 1);
    assert_eq!(five.len(), 5);
    assert_eq!(one[0], five[0]);
}

#[test]
fn evaluate_on_training_corpus_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("morph.json");
    let (grammar, kb, corpus) = (fx("morph.grammar"), fx("morph.kb"), fx("morph.train.corpus"));
    let base = ["--grammar", &grammar, "--kb", &kb, "--corpus", &corpus];
    let mut train = base.to_vec();
    train.extend(["train", "--out", model.to_str().unwrap()]);
    assert_eq!(cli(&train).0, 0);

    let csv = dir.path().join("pr.csv");
    let (code, out, err) = cli(&[
        "--model",
        model.to_str().unwrap(),
        "--corpus",
        &corpus,
        "--k",
        "5",
        "--format",
        "structured",
        "evaluate",
        "--k-values",
        "1,5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["sentences"], 216);
    assert_eq!(v["strict_auc"], 1.0);
    assert_eq!(v["gold_in_top_k"], 1.0);
    assert!(v["auc_vs_k"][0].get("mean_parse_ms").is_none());
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("threshold,precision,recall\n"));
}

#[test]
fn hdp_diag_yields_in_brute_force_order() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_walkthrough(dir.path(), "m.json", "2");
    let (code, out, err) = cli(&["--model", model.to_str().unwrap(), "--format", "structured", "hdp-diag", "--nt", "V", "--rule", "1", "--top", "100"]);
    assert_eq!(code, 0, "{err}");

    let f: ModelFile = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let (g, _) = Grammar::from_model_file(&f).unwrap();
    let m = g.model(g.nt("V").unwrap()).unwrap();
    let sizes = &m.tree.level_sizes;
    let mut brute: Vec<f64> = common::all_leaves(sizes)
        .iter()
        .map(|p| leaf_predictive(&m.samples, &m.tree, p, 1))
        .collect();
    brute.sort_by(|a, b| b.total_cmp(a));

    let mut traces = 0;
    let mut got = Vec::new();
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        match v["kind"].as_str().unwrap() {
            "trace" => traces += 1,
            "yield" => {
                let cell: semgram::hdp::PathSet = serde_json::from_value(v["cell"].clone()).unwrap();
                let lp = v["log_prob"].as_f64().unwrap();
                for leaf in cell.leaves(sizes) {
                    let want = leaf_predictive(&m.samples, &m.tree, &leaf, 1).ln();
                    assert!((lp - want).abs() < 1e-10, "{lp} vs {want}");
                    got.push(lp.exp());
                }
            }
            k => panic!("unexpected record {k}"),
        }
    }
    assert!(traces > 0);
    assert_eq!(got.len(), brute.len());
    for (a, b) in got.iter().zip(&brute) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn config_paths_resolve_and_flags_override() {
    let cfg = fx("roundtrip.config.json");
    // untrained grammar; the config's type prior breaks the tie between relations
    let (code, out, err) = cli(&["--config", &cfg, "--k", "1", "parse", "--sentence", "Liszt plays violin"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 1);
    let typed: Vec<&str> = out.split('\t').collect();
    assert!(typed[4].starts_with("musician_plays_inst("), "{out}");
    let (code, out, _) = cli(&["--config", &cfg, "--prior", "uniform", "parse", "--sentence", "Liszt plays violin"]);
    assert_eq!(code, 0);
    // without the prior nothing separates the statements
    let plain: Vec<&str> = out.split('\t').collect();
    assert_eq!(plain[4], "*(*, *)");
    let gap = typed[2].parse::<f64>().unwrap() - plain[2].parse::<f64>().unwrap();
    assert!((gap - 4.0).abs() < 1e-5, "{gap}");
}
