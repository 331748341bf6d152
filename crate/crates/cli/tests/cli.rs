use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curio_core::causality::GrangerEdge;
use curio_core::codes::CodeRegistry;
use curio_core::pattern::PatternRecord;
use curio_core::simulate::{GroundTruth, MANIFEST_FILE};
use curio_core::synthesis::{Relation, SignatureKey};

fn curio(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curio"))
        .args(args)
        .env("CURIO_OUT", out)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn demo() -> String {
    format!("{}/../../scenarios/demo.toml", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn no_arguments_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = curio(&[], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(curio(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(curio(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn bad_option_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = curio(&["pipeline", "--in", ".", "--format", "pdf"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mine_threshold_defaults_to_35() {
    let dir = tempfile::tempdir().unwrap();
    let help = String::from_utf8(curio(&["mine", "--help"], dir.path()).stdout).unwrap();
    let line = help.lines().find(|l| l.contains("--min-utility")).unwrap();
    let rest = help.split("--min-utility").nth(1).unwrap();
    assert!(rest.contains("[default: 35]"), "{line}");
}

#[test]
fn missing_or_malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = curio(&["granger", "--annotations", "nope.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "group_id,member_id,slice_index,behavior_code\ng1,m1,0,levitation\ng1,m2,0,joy\n",
    )
    .unwrap();
    let out = curio(
        &["granger", "--annotations", bad.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levitation"));
}

#[test]
fn too_short_series_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    fs::write(
        &short,
        "group_id,member_id,slice_index,behavior_code\n\
         g1,m1,0,joy\ng1,m1,2,joy\ng1,m2,1,joy\ng1,m2,2,joy\n",
    )
    .unwrap();
    let out = curio(
        &["granger", "--annotations", short.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_reports_every_planted_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = (dir.path().join("data"), dir.path().join("out"));
    assert!(curio(&["simulate", "--config", &demo()], &data)
        .status
        .success());
    let run = curio(&["pipeline", "--in", data.to_str().unwrap()], &out);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );

    let truth: GroundTruth =
        serde_json::from_str(&fs::read_to_string(data.join(MANIFEST_FILE)).unwrap()).unwrap();
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    let registry = CodeRegistry::builtin();
    assert!(!truth.couplings.is_empty());
    for c in &truth.couplings {
        let key = SignatureKey {
            source_behavior: c.src_behavior.clone(),
            target_behavior: c.tgt_behavior.clone(),
            relation: if c.src_member == c.tgt_member {
                Relation::Intrapersonal
            } else {
                Relation::Interpersonal
            },
            mediator: None,
        };
        let row = key.render(&registry);
        assert!(report.contains(&row), "missing `{row}` in\n{report}");
    }

    let patterns: Vec<PatternRecord> =
        serde_json::from_str(&fs::read_to_string(out.join("patterns.json")).unwrap()).unwrap();
    assert!(!patterns.is_empty());
    assert!(patterns.iter().all(|p| p.overall_utility >= 35));
    let edges: Vec<GrangerEdge> =
        curio_core::causality::read_edges_csv(fs::File::open(out.join("edges.csv")).unwrap())
            .unwrap();
    assert!(edges
        .iter()
        .filter(|e| e.mediator.is_none())
        .all(|e| e.p_value < 0.001));
    for name in ["gold.csv", "reliability.json", "signatures.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (data, out) = (dir.path().join("data"), dir.path().join("out"));
    assert!(
        curio(&["simulate", "--config", &demo(), "--seed", "7"], &data)
            .status
            .success()
    );
    let d = |n: &str| data.join(n).to_str().unwrap().to_owned();
    let o = |n: &str| out.join(n).to_str().unwrap().to_owned();
    for args in [
        vec!["rate", "--judgments", &d("judgments.csv")],
        vec![
            "mine",
            "--annotations",
            &d("annotations.csv"),
            "--gold",
            &o("gold.csv"),
        ],
        vec!["granger", "--annotations", &d("annotations.csv")],
        vec!["synth", "--edges", &o("edges.csv")],
        vec![
            "report",
            "--patterns",
            &o("patterns.json"),
            "--signatures",
            &o("signatures.json"),
            "--format",
            "json",
        ],
    ] {
        let run = curio(&args, &out);
        assert!(
            run.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for field in ["patterns", "direct", "mediated", "census"] {
        assert!(report.get(field).is_some(), "{field}");
    }
}
