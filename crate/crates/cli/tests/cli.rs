use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ccnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccnn"))
        .args(args)
        .env_remove("CCNN_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parses a binary PGM written by the tool into (width, height, pixels).
fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = fs::read(path).unwrap();
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        fields.push(String::from_utf8(bytes[start..i].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    let (w, h): (usize, usize) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    let pixels = bytes[i + 1..].to_vec();
    assert_eq!(pixels.len(), w * h);
    (w, h, pixels)
}

fn trace(dir: &Path, extra: &[&str]) -> (Output, Vec<u8>, serde_json::Value) {
    let out = dir.join("trace.pgm");
    let mut args = vec!["trace", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = ccnn(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, _, pixels) = read_pgm(&out);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, json);
    (o, pixels, json)
}

#[test]
fn lattice_trace_hits_every_row_and_column_once() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pixels, json) = trace(dir.path(), &["--size", "32", "--seq", "lattice", "--steps", "5"]);
    let white: Vec<(usize, usize)> = (0..32 * 32)
        .filter(|&i| pixels[i] == 255)
        .map(|i| (i / 32, i % 32))
        .collect();
    assert_eq!(white.len(), 32);
    assert!(pixels.iter().all(|&p| p == 0 || p == 255));
    for k in 0..32 {
        assert_eq!(white.iter().filter(|&&(r, _)| r == k).count(), 1);
        assert_eq!(white.iter().filter(|&&(_, c)| c == k).count(), 1);
    }
    assert_eq!(json["samples"], 32);
    assert_eq!(json["rows_covered"], 32);
    assert_eq!(json["cols_covered"], 32);
}

#[test]
fn fixed_trace_keeps_sample_count_law() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pixels, json) = trace(dir.path(), &["--size", "16", "--seq", "fixed", "--steps", "3"]);
    // 16*16 / 2^3
    assert_eq!(pixels.iter().filter(|&&p| p == 255).count(), 32);
    assert_eq!(json["samples"], 32);
}

#[test]
fn zero_steps_is_all_white() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pixels, _) = trace(dir.path(), &["--size", "8", "--steps", "0"]);
    assert!(pixels.iter().all(|&p| p == 255));
}

#[test]
fn random_trace_is_reproducible_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--size", "32", "--seq", "random", "--steps", "6", "--seed", "7"];
    let (_, a, _) = trace(dir.path(), &args);
    let (_, b, _) = trace(dir.path(), &args);
    assert_eq!(a, b);
    // submaps may land on a shared pixel, so 32*32/2^6 is only an upper bound
    let white = a.iter().filter(|&&p| p == 255).count();
    assert!(white > 0 && white <= 16, "{white}");
}

#[test]
fn color_flag_writes_ppm() {
    let dir = tempfile::tempdir().unwrap();
    trace(dir.path(), &["--size", "16", "--steps", "2", "--color"]);
    let ppm = fs::read(dir.path().join("trace.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n16 16\n255\n"));
    assert_eq!(ppm.len(), b"P6\n16 16\n255\n".len() + 16 * 16 * 3);
}

#[test]
fn sequence_file_drives_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.txt");
    fs::write(&seq, "0\n1 0\n").unwrap();
    let (_, pixels, _) = trace(dir.path(), &["--size", "8", "--seq-file", seq.to_str().unwrap()]);
    assert_eq!(pixels.iter().filter(|&&p| p == 255).count(), 16);
}

#[test]
fn malformed_sequence_file_is_a_usage_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.txt");
    fs::write(&seq, "0\n0 7\n").unwrap();
    let out = dir.path().join("t.pgm");
    let o = ccnn(&["trace", "--size", "8", "--seq-file", seq.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step 2"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("t.pgm");
    let o = ccnn(&["trace", "--size", "8", "--steps", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.pgm");
    let out = out.to_str().unwrap();
    for args in [
        vec!["trace", "--size", "8", "--steps", "1", "--k", "5", "--out", out],
        vec!["trace", "--size", "8", "--out", out],
        vec!["trace", "--size", "8", "--steps", "11", "--out", out],
        vec!["verify", "--suite", "nonsense"],
    ] {
        let o = ccnn(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn verify_coverage_passes_with_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("summary.json");
    let o = ccnn(&["verify", "--suite", "coverage", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("PASS"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn complexity_prints_checkered_row() {
    let o = ccnn(&["complexity", "--max-steps", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text
        .lines()
        .find(|l| l.trim_start().starts_with("3  Checkered"))
        .expect("checkered row at s=3");
    let cols: Vec<&str> = row.split_whitespace().collect();
    // doubled channels: memory 1, compute 8, counted values agree
    assert_eq!(cols[2..6], ["1", "8", "1", "8"]);
}

#[test]
fn short_training_run_reports_both_models() {
    let o = ccnn(&["train", "--epochs", "1", "--train-size", "32", "--test-size", "16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["cnn_params"], v["ccnn_params"]);
    assert_eq!(v["cnn"]["epochs"].as_array().unwrap().len(), 1);
    assert_eq!(v["ccnn"]["epochs"].as_array().unwrap().len(), 1);
}
