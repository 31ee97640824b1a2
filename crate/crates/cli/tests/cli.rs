use std::path::Path;
use std::process::{Command, Output};

fn seqstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqstat"))
        .args(args)
        .output()
        .expect("spawn seqstat")
}

fn ok(args: &[&str]) -> String {
    let out = seqstat(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn instrument_json_reingests_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for model in [
        vec!["--model", "amp_damp", "--lambda", "0.37", "--phi", "2.1"],
        vec!["--model", "xx_chain", "--sites", "2", "--h", "0.3"],
        vec![
            "--model",
            "periodic_chain",
            "--sites",
            "3",
            "--tau",
            "0.05",
            "--parity",
            "odd",
        ],
    ] {
        let mut args = vec!["instrument", "emit", "--out", path(&a)];
        args.extend(&model);
        ok(&args);
        ok(&[
            "instrument",
            "emit",
            "--instrument",
            path(&a),
            "--out",
            path(&b),
        ]);
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{model:?}"
        );

        // Quantities computed from the re-ingested file match the built-in model.
        let direct = {
            let mut args = vec!["markov-info", "--L", "1,2", "--k", "1"];
            args.extend(&model);
            ok(&args)
        };
        let loaded = ok(&[
            "markov-info",
            "--L",
            "1,2",
            "--k",
            "1",
            "--instrument",
            path(&a),
        ]);
        assert_eq!(direct, loaded);
    }
}

#[test]
fn sampling_is_reproducible() {
    let args = [
        "sample",
        "--model",
        "amp_damp",
        "--lambda",
        "0.8",
        "--phi",
        "1.0471975512",
        "--N",
        "1000",
        "--runs",
        "2000",
        "--format",
        "csv",
    ];
    let run = |seed: &str| {
        let mut a = args.to_vec();
        a.extend(["--seed", seed]);
        ok(&a)
    };
    let first = run("42");
    assert_eq!(first, run("42"));
    assert_ne!(first, run("43"));
    assert!(first.starts_with("sequence,mean,cov_0,cov_1\n"), "{first}");
}

#[test]
fn exit_codes() {
    assert_eq!(
        seqstat(&["steady", "--model", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(
        seqstat(&["sample", "--model", "amp_damp", "--N", "10", "--runs", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        seqstat(&["steady", "--model", "amp_damp", "--lambda", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        seqstat(&["steady", "--model", "amp_damp", "--sites", "3"])
            .status
            .code(),
        Some(2)
    );
    // The full periodic chain conserves excitation parity: two steady states.
    let degenerate = seqstat(&["steady", "--model", "periodic_chain"]);
    assert_eq!(degenerate.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&degenerate.stderr).contains("degenerate"));
    assert_eq!(
        seqstat(&["steady", "--model", "periodic_chain", "--parity", "even"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn reproduce_fig5_table() {
    let csv = ok(&["reproduce", "fig5"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("L,k,I_L_k,reason"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().filter(|r| r.contains(",inf,")).count() == 3);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"task": "markov-info", "model": {"name": "amp_damp", "lambda": 0.8, "phi": 1.0471975512}, "L": [1, 2], "k": [0, 1]}"#,
    )
    .unwrap();
    let from_file = ok(&["run", "--config", path(&cfg)]);
    assert_eq!(from_file.lines().count(), 5);
    let overridden = ok(&["markov-info", "--config", path(&cfg), "--k", "1"]);
    assert_eq!(overridden.lines().count(), 3);
    assert_eq!(
        seqstat(&["fisher", "--config", path(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn constraints_on_a_digit_string() {
    let out = ok(&[
        "constraints",
        "--string",
        "0110100110",
        "--L",
        "2",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["N"], 10);
    let q: Vec<f64> = v["q"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
