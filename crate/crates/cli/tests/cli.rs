use std::path::Path;
use std::process::{Command, Output};

fn mwt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwt"))
        .args(args)
        .output()
        .expect("spawn mwt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn study_dry_run_lists_the_grid_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let o = mwt(&["study", "--dry-run", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let labels: Vec<&str> = text.lines().filter(|l| l.starts_with('N')).collect();
    assert_eq!(labels.len(), 36);
    assert_eq!(labels[0], "N96_snr23_healthy");
    assert!(text.contains("24 injured cells, 12 healthy baselines"));
    assert!(!out.exists());
}

#[test]
fn noise_check_reports_nominal_sigma() {
    let o = mwt(&["noise-check", "--samples", "20000", "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("sigma 0.070795"), "{text}");
    assert!(text.contains("deterministic true"));
}

#[test]
fn bad_arguments_fail_with_a_message() {
    let o = mwt(&["forward", "--snr", "loud"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad SNR"));

    let o = mwt(&["forward", "--solver", "direct", "--n-sub", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("oras"));

    let o = mwt(&["report", "/nonexistent/study"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[io]"), "{}", stderr(&o));
}

#[test]
fn forward_then_invert() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let common = ["--variant", "partial", "--antennas", "8", "--n-lambda", "4"];
    let mut args = vec!["forward", "--out", data.to_str().unwrap()];
    args.extend(common);
    let o = mwt(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("N=8"));
    for f in [
        "s_empty.txt",
        "s_syn.txt",
        "config.toml",
        "manifest.txt",
        "field_tx0_abs.pgm",
    ] {
        assert!(data.join(f).exists(), "{f}");
    }

    let inv = dir.path().join("inv");
    let mut args = vec![
        "invert",
        "--data",
        data.to_str().unwrap(),
        "--out",
        inv.to_str().unwrap(),
        "--iters",
        "2",
    ];
    args.extend(common);
    let o = mwt(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(Path::new(&inv.join("metrics.txt")).exists());
    assert!(stdout(&o).contains("err total"));

    // The data were taken with 8 antennas.
    let o = mwt(&[
        "invert",
        "--data",
        data.to_str().unwrap(),
        "--out",
        dir.path().join("bad").to_str().unwrap(),
        "--antennas",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[config]"), "{}", stderr(&o));
}
