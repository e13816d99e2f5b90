//! End-to-end runs of the binary on small, fast configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "[model]\nJ = 0.5\n\n[numerics]\nt_max = 20.0\nphonon_cutoff = 2\n\n[filter]\nn_points = 41\n";

fn omtc(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omtc"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn spectrum_to(dir: &Path, cfg: &Path, name: &str, flags: &[&str]) -> String {
    let out = dir.join(name);
    let mut args = vec!["spectrum"];
    args.extend_from_slice(flags);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omtc"));
    let o = cmd.args(&args).arg("--config").arg(cfg).arg("--output").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn spectrum_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let text = spectrum_to(dir.path(), &cfg, "s.csv", &[]);
    assert_eq!(text.lines().next(), Some("# delta,intensity,integrated_counts"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 41);
    let deltas: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(deltas[0], -8.0);
    assert_eq!(deltas[40], 8.0);
    for r in &rows {
        let cols: Vec<f64> = r.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[1] >= 0.0 && cols[2] >= 0.0);
    }
    for key in ["# [config]", "# [run]", "# schema_version = 1", "# model.J = 0.5", "# horizon = "] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn footer_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let first = spectrum_to(dir.path(), &cfg, "a.csv", &[]);
    let echo = omtc::cli::config_from_footer(&first).unwrap();
    let again = dir.path().join("again.toml");
    std::fs::write(&again, echo).unwrap();
    let second = spectrum_to(dir.path(), &again, "b.csv", &[]);
    assert_eq!(first, second);
}

#[test]
fn dumped_grid_resweeps_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let dump = dir.path().join("grid.bin");
    let dump_s = dump.to_str().unwrap();
    let fresh = spectrum_to(dir.path(), &cfg, "fresh.csv", &["--dump-correlation", dump_s]);
    let loaded = spectrum_to(dir.path(), &cfg, "loaded.csv", &["--load-correlation", dump_s]);
    assert_eq!(data_rows(&fresh), data_rows(&loaded));
    assert!(loaded.contains("grid_source = \"loaded\""));

    let other = dir.path().join("other.toml");
    std::fs::write(&other, SMALL.replace("J = 0.5", "J = 0.25")).unwrap();
    let o = omtc(&["spectrum", "--load-correlation", dump_s, "--config"], &[&other]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different model"));
}

#[test]
fn correlation_subcommand_writes_dump_and_photon_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let dump = dir.path().join("g.bin");
    let out = dir.path().join("n.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_omtc"))
        .args(["correlation", "--config"])
        .arg(&cfg)
        .arg("--dump-correlation")
        .arg(&dump)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(std::fs::metadata(&dump).unwrap().len() > 24);
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some("# t,photon_number"));
    let first: Vec<&str> = data_rows(&text)[0].split(',').collect();
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.0);

    let o = omtc(&["correlation", "--config"], &[&cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_members_summary_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[sweep]\nparameter = \"J\"\nvalues = [0.0, 0.5]\n");
    let cfg = write_config(dir.path(), &body);
    let base = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    let o = Command::new(env!("CARGO_BIN_EXE_omtc"))
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&base)
        .arg("--svg")
        .arg(&svg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["sweep_J0.csv", "sweep_J0.5.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(data_rows(&text).len(), 41);
        assert!(text.contains("grid_reused = false"));
    }
    let summary = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert!(summary.starts_with("# J,peak_separation"));
    assert_eq!(data_rows(&summary).len(), 2);
    let plot = std::fs::read_to_string(svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), 2);
}

#[test]
fn dressed_lines_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[numerics]\nphonon_cutoff = 4\n");
    let o = omtc(&["dressed", "--config"], &[&cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("# branch,m,position,weight"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    assert!(rows[0].starts_with("-,0,") && rows[5].starts_with("+,0,"));
    assert!(text.contains("# splitting = 6.93"));
}

#[test]
fn invalid_input_exits_with_config_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let cases = [
        "[model]\nJJ = 1.0\n",
        "[model]\nkappa = -0.2\n",
        "[numerics]\ndt = 0.5\n",
        "[filter]\nn_points = 1\n",
        "[model]\ngamma_a_coop = 0.2\n",
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let o = omtc(&["spectrum", "--config"], &[&cfg, Path::new("--output"), &out]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(!out.exists());
    }
    let cfg = write_config(dir.path(), SMALL);
    let o = omtc(&["spectrum", "--threads", "0", "--config"], &[&cfg]);
    assert_eq!(o.status.code(), Some(2));
    let o = omtc(&["spectrum", "--config"], &[&dir.path().join("missing.toml")]);
    assert_eq!(o.status.code(), Some(2));
}
