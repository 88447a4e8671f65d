//! Command-line contract: outputs, manifests, overrides and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dcma(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dcma"));
    cmd.args(args).env_remove("DCMA_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or("").to_string()
}

#[test]
fn bep_vs_snr_writes_csv_manifest_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dcma(&["bep-vs-snr", "--out", out, "--gnuplot"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("bep-vs-snr");
    assert_eq!(header(&run.join("bep_vs_snr.csv")), "snr_db,n,sir,sinr,bep");
    assert!(run.join("plot.gp").exists());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["library_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["experiment"], "bep-vs-snr");
    assert!(manifest["seed"].is_u64());
}

#[test]
fn manifest_config_reproduces_outputs_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = dcma(&["mai-dist", "--out", a.to_str().unwrap(), "--seed", "21", "--trials", "100"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(a.join("mai-dist/manifest.json")).unwrap()).unwrap();
    let cfg = write_config(dir.path(), "replay.json", &manifest["config"].to_string());
    let o = dcma(&["mai-dist", "--config", &cfg, "--out", b.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["histogram.csv", "stats.json"] {
        assert_eq!(fs::read(a.join("mai-dist").join(f)).unwrap(), fs::read(b.join("mai-dist").join(f)).unwrap(), "{f}");
    }
    assert_eq!(
        header(&a.join("mai-dist/histogram.csv")),
        "bin_low,bin_high,center,count,density,gaussian_pdf"
    );
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = dcma(&["demo-2x2", "--out", out.to_str().unwrap(), "--seed", seed], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        fs::read(out.join("demo-2x2/traces.csv")).unwrap()
    };
    assert_ne!(run("1", "s1"), run("2", "s2"));
}

#[test]
fn env_var_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcma(&["bep-vs-snr"], &[("DCMA_OUT_DIR", dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("bep-vs-snr/bep_vs_snr.csv").exists());
}

#[test]
fn waveforms_and_demo_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(dcma(&["waveforms", "--out", out], &[]).status.code(), Some(0));
    assert_eq!(dcma(&["demo-2x2", "--out", out], &[]).status.code(), Some(0));
    assert_eq!(
        header(&dir.path().join("waveforms/delays.csv")),
        "set,rx,tx,rx_code,tx_code,frequency_hz,delay_s,offset_norm"
    );
    assert_eq!(
        header(&dir.path().join("waveforms/envelopes.csv")),
        "set,rx,time_s,s_abs,x_abs,x_rss,z_abs"
    );
    assert_eq!(
        header(&dir.path().join("demo-2x2/traces.csv")),
        "time_s,nrz_0,nrz_1,encoded_0,encoded_1,received,decoded_0,decoded_1,mai_0,mai_1"
    );
}

#[test]
fn bep_vs_n_analytic_only_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"n_values": [2, 4, 6], "delta_tau_values": [1e-9]}"#);
    let o = dcma(&["bep-vs-n", "--config", &cfg, "--trials", "0", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("bep-vs-n/bep_vs_n.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn zero_interferer_control_warns_and_writes_empty_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"codes": [3]}"#);
    let o = dcma(&["mai-dist", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let text = fs::read_to_string(dir.path().join("mai-dist/histogram.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases = [
        r#"{"trails": 10}"#,
        r#"{"system": {"delta_f": -1}}"#,
        r#"{"experiment": "waveforms"}"#,
        "not json",
        r#"{"codes": [3, 3]}"#,
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), body);
        let o = dcma(&["mai-dist", "--config", &cfg, "--out", out], &[]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = dir.path().join("missing.json");
    let o = dcma(&["mai-dist", "--config", missing.to_str().unwrap(), "--out", out], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(dcma(&["no-such-command"], &[]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dcma(&["mai-dist", "--trials", "10", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn default_config_round_trips_through_the_runner() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcma(&["default-config", "bep-vs-snr"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = write_config(dir.path(), "d.json", &String::from_utf8(o.stdout).unwrap());
    let o = dcma(&["bep-vs-snr", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
}
