use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> String {
    root().join("tests/fixtures").join(name).display().to_string()
}

fn typdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typdiv"))
        .args(args)
        .env("TYPDIV_DATA_DIR", root().join("data"))
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn mpd_footnote_pair() {
    let out = typdiv(&[
        "mpd",
        "--sample",
        &fixture("samples/nordic.txt"),
        "--distances",
        &fixture("syn_distances.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["value"], 0.22);
}

#[test]
fn single_language_exits_3() {
    let out = typdiv(&[
        "mpsd",
        "--sample",
        &fixture("samples/one_lang.txt"),
        "--vectors",
        &fixture("syntax.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("need at least 2 usable languages"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(typdiv(&["mpsd", "--bogus"]).status.code(), Some(1));
    assert_eq!(typdiv(&["nonsense"]).status.code(), Some(1));
    let out = typdiv(&[
        "audit",
        "--scores",
        &fixture("xnli.csv"),
        "--grouping",
        &fixture("xnli_26a.csv"),
        "--na-policy",
        "maybe",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_subcommand_has_help() {
    for cmd in ["mpsd", "mpd", "fvi", "summary", "pca", "audit", "scan", "stats", "map"] {
        let out = typdiv(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(stdout(&out).contains("Usage"), "{cmd}");
    }
}

#[test]
fn missing_file_is_data_error() {
    let out = typdiv(&[
        "mpd",
        "--sample",
        &fixture("samples/nordic.txt"),
        "--distances",
        "/nonexistent/d.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_rejects_macrolanguage() {
    let args = [
        "mpd",
        "--sample",
        &fixture("samples/nordic.txt"),
        "--distances",
        &fixture("syn_distances.csv"),
    ];
    let mut strict = args.to_vec();
    strict.push("--strict");
    let out = typdiv(&strict);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("macrolanguage"));
}

#[test]
fn audit_table_row() {
    let out = typdiv(&[
        "audit",
        "--scores",
        &fixture("xnli.csv"),
        "--grouping",
        &fixture("xnli_26a.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("| xnli | 79.24 (15) | 76.54 (15) | -2.70 |"),
        "{}",
        stdout(&out)
    );

    let out = typdiv(&[
        "audit",
        "--scores",
        &fixture("udpos.csv"),
        "--grouping",
        &fixture("udpos_26a.csv"),
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["by_feature_mean"].as_f64().unwrap() - 71.12).abs() <= 0.01);
    assert_eq!(v["na_policy"], "group");
}

#[test]
fn audit_from_cldf_feature() {
    let out = typdiv(&[
        "audit",
        "--scores",
        &fixture("xnli.csv"),
        "--grambank",
        &fixture("mini_wals"),
        "--feature",
        "26A",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.last().unwrap()["value"], "not_available");
    assert_eq!(v["overall_count"], 15);
}

#[test]
fn summary_json_report() {
    let out = typdiv(&[
        "summary",
        "--sample",
        &fixture("samples/europe_plus.txt"),
        "--grambank",
        &fixture("mini_grambank"),
        "--vectors",
        &fixture("syntax.tsv"),
        "--dataset-version",
        "grambank=fixture",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["dataset_versions"]["grambank"], "fixture");
    assert_eq!(v["n_languages"], 6);
    assert_eq!(v["fvi"]["status"], "computed");
    let sources: Vec<&str> = v["mpd"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["source"].as_str().unwrap())
        .collect();
    assert_eq!(sources, ["syntactic", "genetic", "geographic"]);
    // German is given as a variant code and normalized.
    assert!(v["sample"].as_array().unwrap().iter().any(|s| s == "deu"));
}

#[test]
fn summary_batch_with_figures() {
    let dir = tempfile::tempdir().unwrap();
    let figs = dir.path().join("figs");
    let out = typdiv(&[
        "summary",
        "--papers",
        &fixture("papers.csv"),
        "--grambank",
        &fixture("mini_grambank"),
        "--vectors",
        &fixture("syntax.tsv"),
        "--format",
        "csv",
        "--figures",
        figs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.starts_with("sample,n_languages,mpsd,fvi"));
    assert!(csv.lines().any(|l| l.starts_with("p01,6,")));
    for f in [
        "fvi_distribution.svg",
        "fvi_by_size.svg",
        "mpsd_distribution.svg",
        "mpsd_by_size.svg",
    ] {
        assert!(figs.join(f).is_file(), "{f}");
    }
}

#[test]
fn scan_and_stats() {
    let out = typdiv(&["scan", "--papers", &fixture("papers.csv"), "--matched-only"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ids: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["p01", "p02", "p03", "p04"]);

    let out = typdiv(&["stats", "--papers", &fixture("papers.csv")]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["sample_sizes"]["n"], 6);
    assert_eq!(v["usage"][0]["language"], "eng");
    assert_eq!(v["usage"][0]["papers"], 4);

    let out = typdiv(&[
        "stats",
        "--kappa",
        &fixture("kappa_a.txt"),
        &fixture("kappa_b.txt"),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("items,kappa\n10,"));
}

#[test]
fn pca_and_map_figures() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("pca.svg");
    let out = typdiv(&[
        "pca",
        "--grambank",
        &fixture("mini_grambank"),
        "--highlight",
        &fixture("samples/europe_plus.txt"),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains("id=\"highlight\""));

    let map = dir.path().join("map.svg");
    let out = typdiv(&["map", "--papers", &fixture("papers.csv"), "-o", map.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(std::fs::read_to_string(&map)
        .unwrap()
        .contains("<circle class=\"marker\""));
}

#[test]
fn data_dir_resolves_relative_paths() {
    let out = Command::new(env!("CARGO_BIN_EXE_typdiv"))
        .args([
            "mpd",
            "--sample",
            "samples/nordic.txt",
            "--distances",
            "syn_distances.csv",
        ])
        .env("TYPDIV_DATA_DIR", root().join("tests/fixtures"))
        .current_dir(Path::new("/"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
