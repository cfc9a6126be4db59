use std::path::Path;
use std::process::{Command, Output};

fn irn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gradcheck_passes() {
    let o = irn(&["gradcheck", "--cases", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(irn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(irn(&["train", "--kb"]).status.code(), Some(1));
    assert_eq!(irn(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_are_data_errors() {
    let o = irn(&[
        "answer",
        "--model",
        "/nonexistent/model.json",
        "--question",
        "hi",
        "--subject",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.tsv");
    let data = dir.path().join("2h.jsonl");
    let model = dir.path().join("model.json");
    let history = dir.path().join("history.csv");
    let report = dir.path().join("report.json");
    let heatmap = dir.path().join("gates.csv");
    let eval_report = dir.path().join("eval.json");

    let o = irn(&[
        "synth-kb",
        "--out",
        s(&kb),
        "--people",
        "150",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = irn(&[
        "gen-data",
        "--kb",
        s(&kb),
        "--hops",
        "2",
        "--out",
        s(&data),
        "--max",
        "150",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = irn(&[
        "train",
        "--kb",
        s(&kb),
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--dim",
        "10",
        "--max-rounds",
        "3",
        "--patience",
        "3",
        "--history",
        s(&history),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("manifest {"));
    assert_eq!(
        std::fs::read_to_string(&history).unwrap().lines().count(),
        4
    );
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["accuracy"].as_f64().is_some());

    let o = irn(&[
        "eval",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--per-hop",
        "--kb",
        s(&kb),
        "--report",
        s(&eval_report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&eval_report).unwrap()).unwrap();
    assert!(r["per_hop"]["path-2H"]["branch_tolerant"].is_array());

    let first = std::fs::read_to_string(&data).unwrap();
    let rec: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let question = rec["question"].as_str().unwrap();
    let subject = rec["subjects"][0].as_str().unwrap();

    let o = irn(&[
        "answer",
        "--model",
        s(&model),
        "--question",
        question,
        "--subject",
        subject,
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let pred: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(pred["answer"].is_string());

    let o = irn(&[
        "trace",
        "--model",
        s(&model),
        "--question",
        question,
        "--subject",
        subject,
        "--heatmap",
        s(&heatmap),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let gates = std::fs::read_to_string(&heatmap).unwrap();
    assert!(gates.lines().next().unwrap().starts_with("hop,"));
    assert!(gates.lines().next().unwrap().ends_with(",Terminal"));

    let o = irn(&["override-eval", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = irn(&[
        "rel-words",
        "--model",
        s(&model),
        "--relation",
        "Children",
        "-k",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));

    let o = irn(&[
        "answer",
        "--model",
        s(&model),
        "--question",
        question,
        "--subject",
        "nobody_at_all",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("unknown entity"), "{}", text(&o));
    let o = irn(&["rel-words", "--model", s(&model), "--relation", "Shoe_Size"]);
    assert_eq!(o.status.code(), Some(2));
}
