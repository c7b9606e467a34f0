//! End-to-end checks of the `lzc` binary: exit codes, diagnostics, and
//! byte-identical CSV output.

use std::path::Path;
use std::process::{Command, Output};

fn lzc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lzc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn empty_band_exits_1_with_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.lzc", "beta = 1.0\nk =\ng =\n");
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("field `k`"), "stderr: {stderr}");
}

#[test]
fn unknown_field_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.lzc",
        "beta = 1.0\nk = 1\ng = 1\nbogus = 3\n",
    );
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":4:"), "stderr: {stderr}");
    assert!(stderr.contains("bogus"), "stderr: {stderr}");
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\nmode = analytic\n\
         sweep = g[0], 0, 2, 9, linear\ncsv = out.csv\n",
    );
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(dir.path().join("out.csv")).unwrap();
    let header = String::from_utf8_lossy(&first);
    assert!(
        header.starts_with("sweep_value,p00_analytic,p10,p20\n"),
        "{header}"
    );
    assert_eq!(header.lines().count(), 10);
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let second = std::fs::read(dir.path().join("out.csv")).unwrap();
    assert_eq!(first, second, "CSV output must be deterministic");
}

#[test]
fn validate_subcommand_passes_and_set_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "one.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\nbt_horizon = 800\ncsv = v.csv\n",
    );
    let out = lzc(&["validate", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("validation: PASS"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert!(csv.starts_with(
        "sweep_value,p00_analytic,p00_numeric,p10,p20,p10_numeric,p20_numeric,err_estimate\n"
    ));

    // numeric-mode override shrinks the column set
    let out = lzc(
        &["run", &cfg, "--set", "mode=numeric", "--set", "csv=n.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert!(
        csv.starts_with("sweep_value,p00_numeric,err_estimate\n"),
        "{csv}"
    );
}

#[test]
fn validation_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // a horizon far too short: the numeric estimate cannot reach the
    // asymptotic p00, so validate must fail with exit code 2
    let cfg = write(
        dir.path(),
        "short.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\nmode = validate\nbt_horizon = 30\n",
    );
    let out = lzc(&["run", &cfg], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let stderr = String::from_utf8_lossy(&out.stderr);
    // either an honest validation failure (2) or a refused convergence (1)
    let code = out.status.code();
    assert!(
        code == Some(2) && stdout.contains("validation: FAIL")
            || code == Some(1) && stderr.contains("not converged"),
        "code {code:?}, stdout {stdout}, stderr {stderr}"
    );
}

#[test]
fn unknown_preset_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = lzc(&["preset", "fig4", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn thread_cap_respected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\nsweep = g[0], 0, 1, 5, linear\ncsv = t.csv\n",
    );
    let out = Command::new(env!("CARGO_BIN_EXE_lzc"))
        .args(["run", &cfg])
        .env("LZC_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stdout_csv_when_no_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "plain.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\n",
    );
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.starts_with("sweep_value,p00_analytic,p10,p20\n"),
        "{stdout}"
    );
}

#[test]
fn svg_emitted_with_axes_and_legend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.lzc",
        "beta = 1.0\nk = 0.3, 1.1\ng = 0.8, 0.5\nsweep = g[0], 0, 2, 5, linear\nsvg = plot.svg\n",
    );
    let out = lzc(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.contains("<polyline"));
    assert!(svg.contains("p00_analytic"));
    assert!(svg.contains("g[0]"));
}
