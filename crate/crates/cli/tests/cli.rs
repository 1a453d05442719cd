use std::path::Path;
use std::process::{Command, Output};

fn doxwatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doxwatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn rules_redacts_by_default() {
    let out = stdout(&doxwatch(&["rules", "your ssn is 212-45-6789"]));
    assert!(out.contains("\"label\":\"POSITIVE\""));
    let masked = stdout(&doxwatch(&["rules", "dox 212-45-6789 at 203.0.113.7"]));
    assert!(!masked.contains("203.0.113.7"));
    let plain = stdout(&doxwatch(&[
        "--no-redact",
        "rules",
        "fail2ban log 203.0.113.7",
    ]));
    assert!(plain.contains("\"label\":\"NEGATIVE\""));
}

#[test]
fn rules_list_reports_hash_and_features() {
    let out = stdout(&doxwatch(&["rules", "--list"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["feature_count"], 53);
    assert_eq!(v["version_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn evaluate_is_deterministic_and_writes_out() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = doxwatch(&[
            "evaluate",
            "--config",
            "1-HotEH",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let first = std::fs::read_to_string(&a).unwrap();
    assert_eq!(first, std::fs::read_to_string(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["feature_dim"], 67);
    assert_eq!(v["folds"].as_array().unwrap().len(), 10);
}

#[test]
fn missing_embeddings_are_named() {
    let out = doxwatch(&["evaluate", "--config", "DP_FlairFW_GloVe_Wiki"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("flair_forward"), "{err}");
    assert!(err.contains("--word-vectors glove_wiki=PATH"), "{err}");
}

#[test]
fn word_vector_override_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("glove.txt");
    std::fs::write(
        &vectors,
        "ip 0.1 0.2 0.3\nssn -0.1 0.0 0.5\nyour 0.3 0.3 0.3\n",
    )
    .unwrap();
    let arg = format!("glove_wiki={}", vectors.display());
    let out = stdout(&doxwatch(&[
        "evaluate",
        "--config",
        "DP_GloVe_Wiki",
        "--k",
        "3",
        "--word-vectors",
        &arg,
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["feature_dim"], 3);
}

#[test]
fn compare_table_lists_every_config() {
    let out = stdout(&doxwatch(&[
        "compare",
        "--pseudo-embeddings",
        "--table",
        "--k",
        "3",
    ]));
    for name in ["Heuristics", "1-HotEH_Heuristics", "DP_FlairFW_GloVe_Wiki"] {
        assert!(out.contains(&format!("| {name} |")), "{out}");
    }
}

#[test]
fn filter_train_and_featurize() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    std::fs::write(
        &corpus,
        concat!(
            "{\"id\":\"1\",\"text\":\"your ip address is 203.0.113.7\",\"category\":\"IP\",\"label\":\"POSITIVE\"}\n",
            "{\"id\":\"2\",\"text\":\"no address at all\",\"category\":\"IP\",\"label\":\"NEGATIVE\"}\n",
            "{\"id\":\"3\",\"text\":\"my server 198.51.100.2\",\"category\":\"IP\",\"label\":\"NEGATIVE\"}\n",
        ),
    )
    .unwrap();
    let c = corpus.to_str().unwrap();
    let kept = stdout(&doxwatch(&["--no-redact", "filter", "--corpus", c]));
    assert_eq!(kept.lines().count(), 2);
    assert!(!kept.contains("\"id\":\"2\""));

    let model = stdout(&doxwatch(&["train", "--config", "1-HotEH", "--corpus", c]));
    assert!(model.starts_with("doxwatch-linear-model v1"));
    let matrix = stdout(&doxwatch(&[
        "featurize",
        "--config",
        "1-HotEH",
        "--corpus",
        c,
    ]));
    assert!(matrix.starts_with("dim=67 rows=2 scheme=ONE_HOT"));
}

#[test]
fn kappa_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let ratings = write("r.txt", "3 0\n0 3\n");
    let out = stdout(&doxwatch(&["kappa", "fleiss", ratings.to_str().unwrap()]));
    assert_eq!(out.trim(), "1");
    let a = write("a.txt", "POSITIVE\nPOSITIVE\nNEGATIVE\nNEGATIVE\n");
    let b = write("b.txt", "POSITIVE\nNEGATIVE\nPOSITIVE\nNEGATIVE\n");
    let out = stdout(&doxwatch(&[
        "kappa",
        "cohen",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ]));
    assert_eq!(out.trim(), "0");
    let ragged = write("bad.txt", "2 0\n1 0\n");
    assert!(!doxwatch(&["kappa", "fleiss", ragged.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn sample_annotation_and_user_stats() {
    let ids = stdout(&doxwatch(&["sample-annotation", "--n", "3"]));
    assert_eq!(ids.lines().count(), 6);
    let stats = stdout(&doxwatch(&["user-stats"]));
    assert!(stats.contains("Created since 2019"));
}

#[test]
fn synth_matches_bundled_corpus() {
    let out = stdout(&doxwatch(&["synth"]));
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_corpus.jsonl");
    assert_eq!(out, std::fs::read_to_string(shipped).unwrap());
}
