use std::fs;
use std::path::Path;
use std::process::Command;

fn wpnn(args: &[&str], cwd: &Path) -> std::process::Output {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fashion-mnist");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wpnn"));
    cmd.args(args).current_dir(cwd);
    if std::env::var_os("WPNN_DATA_DIR").is_none() {
        cmd.env("WPNN_DATA_DIR", data);
    }
    cmd.output().unwrap()
}

fn have_data() -> bool {
    let dir = std::env::var_os("WPNN_DATA_DIR").map(Into::into).unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fashion-mnist"));
    dir.join("train-images-idx3-ubyte").exists() || dir.join("train-images-idx3-ubyte.gz").exists()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wpnn(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(wpnn(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn bad_config_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"fig3_relay\"\nnot_a_key = 1\n").unwrap();
    let out = wpnn(&["--config", cfg.to_str().unwrap(), "noise-sweep"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn noise_sweep_writes_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, "[noise_sweep]\nmax_depth = 3\ntrials = 500\n").unwrap();
    let out = wpnn(&["--config", cfg.to_str().unwrap(), "--out", "res", "noise-sweep"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("res/noise_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3, "{csv}");
}

#[test]
fn gradcheck_passes_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = wpnn(&["gradcheck", "--instances", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tiny_fig3_reproduction() {
    if !have_data() {
        eprintln!("Fashion-MNIST not found, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig3.toml");
    fs::write(
        &cfg,
        "[data]\nsubset_size = 1000\ntest_limit = 300\n\n[architecture]\nrelays = [1]\nschemes = [\"linear_pa\", \"nonlinear_pa\"]\n\n[training.pat]\nepochs = 1\n",
    )
    .unwrap();
    let out = wpnn(&["--config", cfg.to_str().unwrap(), "--subset", "--seed", "7", "--out", "res", "reproduce", "fig3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("res/fig3.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("accuracy"));
    assert_eq!(lines.count(), 2, "{csv}");
}
