//! End-to-end checks of the `gscm` binary: subcommands, exit codes and
//! artifact emission for the shipped example configs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gscm"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gscm-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_config_accepts_all_shipped_examples() {
    for name in ["fig3.cfg", "fig5.cfg", "fig6.cfg", "tutorial.cfg"] {
        let out = bin()
            .args(["validate-config", "-c"])
            .arg(config(name))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        // The canonical form round-trips through the validator.
        let canonical = String::from_utf8(out.stdout).unwrap();
        assert!(canonical.contains("scenario = "));
    }
}

#[test]
fn invalid_config_exits_with_code_2_naming_the_field() {
    let dir = temp_dir("badcfg");
    let bad = dir.join("bad.cfg");
    // RMa is only validated up to 7 GHz.
    std::fs::write(
        &bad,
        "scenario = rma\ncarrier_hz = 28e9\n[bs]\nposition = 0 0 35\n[ut]\nposition = 100 0 1.5\n",
    )
    .unwrap();
    let out = bin().args(["validate-config", "-c"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("carrier_hz"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_config_exits_with_code_2() {
    let out = bin()
        .args(["run", "-c", "/nonexistent/path.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_subcommand_writes_the_sweep_csv() {
    let dir = temp_dir("sweep");
    let out = bin()
        .args(["sweep-pathloss", "-c"])
        .arg(config("fig3.cfg"))
        .arg("-o")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("pathloss_sweep.csv")).unwrap();
    assert!(csv.starts_with("scenario,distance_2d_m"));
    // fig3 runs at 6.5 GHz: all five scenarios present.
    for name in ["UMi", "UMa", "RMa", "InMO", "InOO"] {
        assert!(csv.contains(name), "{name} missing from sweep");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tutorial_example_runs_to_completion_with_all_artifacts() {
    let dir = temp_dir("tutorial");
    let out = bin()
        .args(["run", "-c"])
        .arg(config("tutorial.cfg"))
        .arg("-o")
        .arg(&dir)
        .args(["--seed", "11"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "sinr_time_freq.csv",
        "sinr_wideband.csv",
        "cluster_power.csv",
        "pathloss_sweep.csv",
        "manifest.txt",
        "plot_pathloss.py",
        "plot_sinr.py",
        "plot_clusters.py",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    // Two UTs in the tutorial: both report SINR at every tick.
    let wb = std::fs::read_to_string(dir.join("sinr_wideband.csv")).unwrap();
    let uts: std::collections::HashSet<&str> = wb
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(uts.len(), 2);
    // Seed override shows up in the manifest.
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 11"));
    std::fs::remove_dir_all(&dir).ok();
}
