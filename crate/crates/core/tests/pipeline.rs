use std::fs;
use std::path::Path;

use lha::pipeline::{run_pipeline, PipelineConfig, DOC_PAIRS, GROUPS_JSONL, GROUPS_TSV, SUMMARY, TARGET_INDEX};
use lha::sent_align::read_groups_jsonl;
use lha::synthetic::write_toy_pipeline;

const FINAL: &[&str] = &[DOC_PAIRS, GROUPS_JSONL, GROUPS_TSV, SUMMARY, TARGET_INDEX];

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn toy_run_matches_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_pipeline(dir.path()).unwrap();
    let run = run_pipeline(&cfg).unwrap();
    assert!(run.stages.iter().all(|s| !s.cached));

    let pairs = String::from_utf8(read(&cfg.output_dir, DOC_PAIRS)).unwrap();
    let ids: Vec<(&str, &str)> = pairs
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0], f[1])
        })
        .collect();
    assert_eq!(ids, [("sA", "tA"), ("sB", "tB"), ("sC", "tA")]);

    let groups = read_groups_jsonl(&read(&cfg.output_dir, GROUPS_JSONL)[..]).unwrap();
    let texts: Vec<(&str, &str)> = groups
        .iter()
        .map(|g| (g.source_text.as_str(), g.target_text.as_str()))
        .collect();
    assert_eq!(
        texts,
        [
            ("The cat purred.", "The cat purred softly."),
            ("Heavy rain fell.", "Rain fell."),
            ("The bank paid money.", "Money in the bank."),
        ]
    );
    assert_eq!(groups[0].source_ids, ["sA#0"]);
    assert_eq!(groups[0].target_ids, ["tA#1"]);
    assert!(groups.iter().all(|g| (g.score - 1.0).abs() < 1e-6));

    let s = &run.summary;
    assert_eq!((s.source_documents, s.target_documents, s.doc_pairs), (3, 3, 3));
    assert_eq!(s.sentences.nn_pairs, 4);
    assert_eq!(s.sentences.merged_groups, 4);
    assert_eq!(s.sentences.filtered_groups, 3);
    assert_eq!(s.output.pairs, 3);
    assert!((s.output.mean_source_tokens - 10.0 / 3.0).abs() < 1e-12);
    assert!((s.output.mean_target_tokens - 10.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.output.multi_sentence_source_pct, 0.0);
}

#[test]
fn rerun_is_cached_and_outputs_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_pipeline(dir.path()).unwrap();
    run_pipeline(&cfg).unwrap();
    let first: Vec<Vec<u8>> = FINAL.iter().map(|f| read(&cfg.output_dir, f)).collect();
    let again = run_pipeline(&cfg).unwrap();
    assert!(again.stages.iter().all(|s| s.cached), "{:?}", again.stages);

    let other = PipelineConfig {
        output_dir: dir.path().join("second"),
        ..cfg.clone()
    };
    run_pipeline(&other).unwrap();
    for (f, bytes) in FINAL.iter().zip(&first) {
        assert_eq!(&read(&other.output_dir, f), bytes, "{f}");
    }
}

#[test]
fn deleted_intermediates_are_rebuilt_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_pipeline(dir.path()).unwrap();
    run_pipeline(&cfg).unwrap();
    for victim in ["source_docs.lhae", TARGET_INDEX, DOC_PAIRS, GROUPS_JSONL] {
        let before = read(&cfg.output_dir, victim);
        let all: Vec<Vec<u8>> = FINAL.iter().map(|f| read(&cfg.output_dir, f)).collect();
        fs::remove_file(cfg.output_dir.join(victim)).unwrap();
        let run = run_pipeline(&cfg).unwrap();
        assert!(run.stages.iter().any(|s| !s.cached));
        assert_eq!(read(&cfg.output_dir, victim), before, "{victim}");
        for (f, bytes) in FINAL.iter().zip(&all) {
            assert_eq!(&read(&cfg.output_dir, f), bytes, "{f} after deleting {victim}");
        }
    }
}

#[test]
fn parameter_change_reruns_downstream_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_pipeline(dir.path()).unwrap();
    run_pipeline(&cfg).unwrap();
    let changed = PipelineConfig { theta_s: 0.9, ..cfg };
    let run = run_pipeline(&changed).unwrap();
    let rerun: Vec<&str> = run
        .stages
        .iter()
        .filter(|s| !s.cached)
        .map(|s| s.name.as_str())
        .collect();
    assert_eq!(rerun, ["align_sents"]);
}

#[test]
fn invalid_config_and_stage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_pipeline(dir.path()).unwrap();
    let bad = PipelineConfig { k_doc: 0, ..cfg.clone() };
    assert!(matches!(run_pipeline(&bad), Err(lha::Error::Config(_))));
    fs::write(&cfg.target, "{not json}\n").unwrap();
    match run_pipeline(&cfg) {
        Err(lha::Error::Stage { stage, .. }) => assert_eq!(stage, "embed_target"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(cfg.output_dir.join("manifest.json").is_file());
}
