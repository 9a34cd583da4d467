use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[generator]
num_requests = 3000

[controller]
window_size = 500

[calibration]
requests = 500

[run]
strategies = ["wpo", "hca2e"]
beam_sizes = [1, 3]

[sweep]
alphas = [0.5, 1.0]
strategies = ["wpo", "hca2e"]
beam_sizes = [3]
"#;

fn hca2e(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hca2e"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn small_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = small_dir();
    let o = hca2e(dir.path(), &["generate", "--config", "small.toml", "--set", "generator.bogus=1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("generator.bogus"));
}

#[test]
fn invalid_distribution_parameter_names_the_key() {
    let dir = small_dir();
    let o = hca2e(dir.path(), &["generate", "--config", "small.toml", "--set", "generator.ad_bid.sigma=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("ad_bid"), "{}", stderr(&o));
}

#[test]
fn unparsable_arguments_exit_2() {
    let dir = small_dir();
    assert_eq!(hca2e(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(hca2e(dir.path(), &["run", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn run_without_log_exits_3() {
    let dir = small_dir();
    let o = hca2e(dir.path(), &["run", "--config", "small.toml", "--out", "empty"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn report_on_empty_directory_exits_3() {
    let dir = small_dir();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let o = hca2e(dir.path(), &["report", "--out", "empty"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn corrupt_log_reports_line_number() {
    let dir = small_dir();
    let out = dir.path().join("bad");
    fs::create_dir(&out).unwrap();
    let g = hca2e(dir.path(), &["generate", "--config", "small.toml", "--out", "bad"]);
    assert!(g.status.success(), "{}", stderr(&g));
    let log = out.join("requests.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&log).unwrap().lines().map(String::from).collect();
    lines[4] = "{\"schema_version\": 1}".to_string();
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    let o = hca2e(dir.path(), &["run", "--config", "small.toml", "--out", "bad"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains('5'), "{}", stderr(&o));
}

#[test]
fn generate_run_sweep_report_pipeline() {
    let dir = small_dir();
    let args = |cmd: &'static str| ["--config", "small.toml", "--out", "out"].iter().fold(vec![cmd], |mut v, a| {
        v.push(a);
        v
    });
    for cmd in ["generate", "run", "sweep", "report"] {
        let o = hca2e(dir.path(), &args(cmd));
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    let out = dir.path().join("out");
    assert_eq!(fs::read_to_string(out.join("requests.jsonl")).unwrap().lines().count(), 3000);
    // wpo, hca2e B=1, hca2e B=3
    assert_eq!(csv_rows(&out.join("metrics.csv")), 3);
    // 2 alphas x (wpo, hca2e B=3)
    assert_eq!(csv_rows(&out.join("sweep.csv")), 4);
    assert!(csv_rows(&out.join("windows.csv")) > 0);
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("hca2e"));

    let cells = fs::read_dir(out.join("cells")).unwrap().count();
    let before = fs::read(out.join("sweep.csv")).unwrap();
    let again = hca2e(dir.path(), &args("sweep"));
    assert!(again.status.success());
    assert!(!stderr(&again).contains("alpha="), "cached cells were recomputed");
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), cells);
    assert_eq!(fs::read(out.join("sweep.csv")).unwrap(), before);
}

#[test]
fn seed_flag_changes_the_log() {
    let dir = small_dir();
    let a = hca2e(dir.path(), &["generate", "--config", "small.toml", "--out", "a", "--seed", "1"]);
    let b = hca2e(dir.path(), &["generate", "--config", "small.toml", "--out", "b", "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    let read = |d: &str| fs::read(dir.path().join(d).join("requests.jsonl")).unwrap();
    assert_ne!(read("a"), read("b"));
}
