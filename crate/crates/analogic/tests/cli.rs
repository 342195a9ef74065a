//! End-to-end checks of the `analogic` binary: flag parsing, the documented
//! exit codes, and the files each subcommand leaves behind. Everything value-
//! level lives in the library tests; here we only care that the process
//! boundary behaves.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use analogic::manifest::{load_manifest, Split};
use analogic::runner::MetricsLine;
use analogic_core::objectives::LossBreakdown;

fn analogic<'a>(args: impl IntoIterator<Item = &'a str>) -> Output {
    Command::new(env!("CARGO_BIN_EXE_analogic"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process was killed, not exited")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small dataset that keeps train-involving tests under a second.
fn gen_tiny(dir: &Path) {
    let out = analogic([
        "gen-data",
        "--out",
        dir.to_str().unwrap(),
        "--source-pairs",
        "6",
        "--target",
        "6",
        "--heldout",
        "4",
        "--seed",
        "3",
        "--size",
        "32x16",
    ]);
    assert_eq!(code(&out), 0, "gen-data: {}", stderr(&out));
}

fn train_tiny<'a>(
    data: &'a Path,
    out_dir: &'a Path,
    extra: impl IntoIterator<Item = &'a str>,
) -> Output {
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--steps",
        "4",
        "--width",
        "4",
        "--disc-width",
        "4",
        "--res-blocks",
        "1",
        "--batch-size",
        "2",
        "--size",
        "32x16",
    ];
    args.extend(extra);
    analogic(args.iter().copied())
}

#[test]
fn worked_example_dataset_has_documented_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    let out = analogic([
        "gen-data",
        "--out",
        dir.to_str().unwrap(),
        "--source-pairs",
        "256",
        "--target",
        "256",
        "--heldout",
        "64",
        "--seed",
        "7",
        "--size",
        "64x32",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("256 source pairs, 256 target frames, 64 held-out oracles"),
        "unexpected summary line: {stdout}"
    );
    let lm = load_manifest(&dir.join("manifest.json")).unwrap();
    assert_eq!(lm.manifest.count(Split::Source), 256);
    assert_eq!(lm.manifest.count(Split::TargetTrain), 256);
    assert_eq!(lm.manifest.count(Split::HeldoutOracle), 64);
    assert!(dir.join("config.resolved.json").is_file());
}

#[test]
fn off_grid_size_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analogic([
        "gen-data",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
        "--source-pairs",
        "2",
        "--target",
        "2",
        "--heldout",
        "1",
        "--size",
        "63x32",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("divisible"), "{}", stderr(&out));
}

#[test]
fn gen_data_reruns_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_tiny(&a);
    gen_tiny(&b);
    let mut names: Vec<_> = walkdir(&a);
    names.sort();
    assert!(!names.is_empty());
    for rel in names {
        assert_eq!(
            fs::read(a.join(&rel)).unwrap(),
            fs::read(b.join(&rel)).unwrap(),
            "{rel} differs between identical invocations"
        );
    }
}

fn walkdir(root: &Path) -> Vec<String> {
    fn go(dir: &Path, root: &Path, out: &mut Vec<String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                go(&p, root, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_str().unwrap().to_owned());
            }
        }
    }
    let mut out = Vec::new();
    go(root, root, &mut out);
    out
}

#[test]
fn train_then_translate_leaves_named_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_tiny(&data);
    let run = tmp.path().join("run");
    let out = train_tiny(&data, &run, []);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ckpt = run.join("ckpt_4.analogic");
    assert!(ckpt.is_file(), "final checkpoint missing");

    let lm = load_manifest(&data.join("manifest.json")).unwrap();
    let inputs: Vec<String> = lm
        .manifest
        .split(Split::TargetTrain)
        .take(2)
        .map(|e| lm.resolve(&e.clear_path).to_str().unwrap().to_owned())
        .collect();
    let tdir = tmp.path().join("translated");
    let out = analogic([
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        tdir.to_str().unwrap(),
        "--z",
        "0.9",
        "--input",
        &inputs[0],
        &inputs[1],
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for input in &inputs {
        let stem = Path::new(input).file_stem().unwrap().to_str().unwrap();
        assert!(tdir.join(format!("{stem}_translated.png")).is_file());
    }
    assert!(tdir.join("config.resolved.json").is_file());

    // Domainness comes from a flag, so out-of-range is a config error.
    let out = analogic([
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        tdir.to_str().unwrap(),
        "--z",
        "1.5",
        "--input",
        &inputs[0],
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn ablation_flags_zero_the_named_terms() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_tiny(&data);
    let run = tmp.path().join("run");
    let out = train_tiny(&data, &run, ["--ablate", "dep,percep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let text = fs::read_to_string(run.join("metrics.ndjson")).unwrap();
    let lines: Vec<MetricsLine> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    for line in &lines {
        assert_eq!(line.losses.dep, 0.0);
        assert_eq!(line.losses.percep, 0.0);
        assert!(
            line.losses.sup > 0.0,
            "supervised term should still be live"
        );
    }
}

#[test]
fn hygiene_audit_flags_a_leaked_id_with_exit_5() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_tiny(&data);
    let run = tmp.path().join("run");
    let out = train_tiny(&data, &run, []);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let lm = load_manifest(&data.join("manifest.json")).unwrap();
    let held_id = lm
        .manifest
        .split(Split::HeldoutOracle)
        .next()
        .unwrap()
        .id
        .clone();
    let forged = MetricsLine {
        step: 4,
        wall_ms: 1.0,
        losses: LossBreakdown::default(),
        grad_norm_gen: 0.0,
        grad_norm_disc: 0.0,
        source_ids: vec![held_id.clone()],
        target_ids: vec![],
    };
    let log = run.join("metrics.ndjson");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str(&serde_json::to_string(&forged).unwrap());
    text.push('\n');
    fs::write(&log, text).unwrap();

    let out = analogic([
        "evaluate",
        "--checkpoint",
        run.join("ckpt_4.analogic").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--metrics",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(stderr(&out).contains(&held_id), "{}", stderr(&out));
}

#[test]
fn gradcheck_accepts_one_loss_and_rejects_unknown_names() {
    let out = analogic(["gradcheck", "--loss", "sup"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("sup") && stdout.contains("pass"),
        "{stdout}"
    );

    let out = analogic(["gradcheck", "--loss", "supp"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("supp"), "{}", stderr(&out));
}

#[test]
fn missing_paths_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analogic([
        "train",
        "--data",
        "/nonexistent/data",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let out = analogic([
        "translate",
        "--checkpoint",
        "/nonexistent/ckpt.analogic",
        "--out",
        tmp.path().join("t").to_str().unwrap(),
        "--input",
        "/nonexistent/x.png",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"train": {"stepz": 7}}"#).unwrap();
    let out = analogic([
        "gen-data",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("stepz"), "{}", stderr(&out));
}
