use std::path::Path;
use std::process::{Command, Output};

use wavcraft_core::dsp::{read_wav, write_wav};
use wavcraft_core::eval::pool::fixture_inputs;

fn wavcraft(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavcraft"))
        .args(args)
        .current_dir(dir)
        .env_remove("WAVCRAFT_LLM_BASE_URL")
        .env("WAVCRAFT_WORKSPACE", dir.join("ws"))
        .output()
        .unwrap()
}

fn setup(responses: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.wav"), write_wav(&fixture_inputs(1, 8)[0])).unwrap();
    std::fs::write(dir.path().join("llm.json"), serde_json::to_vec(responses).unwrap()).unwrap();
    dir
}

#[test]
fn edit_writes_the_output() {
    let dir = setup(&["OUTPUT_WAV = ADJUST_VOL(INPUT_WAV0, volume=-6)"]);
    let out = wavcraft(
        dir.path(),
        &[
            "edit",
            "--input",
            "in.wav",
            "--instruction",
            "Make it quieter",
            "--out",
            "out.wav",
            "--llm",
            "scripted:llm.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let wav = read_wav(&std::fs::read(dir.path().join("out.wav")).unwrap()).unwrap();
    assert_eq!(wav.len(), 160000);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ADJUST_VOL"));
}

#[test]
fn exit_codes_separate_user_and_internal_errors() {
    let dir = setup(&["no code", "none", "still none"]);
    let args = ["edit", "--input", "in.wav", "--instruction", "x", "--out", "out.wav", "--llm", "scripted:llm.json"];
    assert_eq!(wavcraft(dir.path(), &args).status.code(), Some(1));
    assert!(!dir.path().join("out.wav").exists());

    let missing =
        ["edit", "--input", "nope.wav", "--instruction", "x", "--out", "out.wav", "--llm", "scripted:llm.json"];
    assert_eq!(wavcraft(dir.path(), &missing).status.code(), Some(1));

    std::fs::write(dir.path().join("llm.json"), b"[]").unwrap();
    assert_eq!(wavcraft(dir.path(), &args).status.code(), Some(2));

    let unconfigured = ["edit", "--input", "in.wav", "--instruction", "x", "--out", "out.wav"];
    assert_ne!(wavcraft(dir.path(), &unconfigured).status.code(), Some(0));
}

#[test]
fn eval_and_fsck() {
    let dir = setup(&[]);
    let out =
        wavcraft(dir.path(), &["eval", "--tasks", "2", "--kind", "add,sr", "--seed", "3", "--report", "report.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tasks"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("report.csv").exists());

    let fsck = wavcraft(dir.path(), &["fsck"]);
    assert!(fsck.status.success(), "{}", String::from_utf8_lossy(&fsck.stderr));
}
