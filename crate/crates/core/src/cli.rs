//! Batch harness: config ingestion, simulation driving and trace emission.
//!
//! `run` executes the time-stepped simulation and writes, under the output
//! directory: a pathloss sweep CSV, SINR time-frequency and wideband CSVs,
//! a cluster power-fraction CSV, a run manifest (config hash, seed,
//! versions) and plot scripts that render each CSV with matplotlib. The
//! same config and seed produce byte-identical CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::SimConfig;
use crate::link_engine::Engine;
use crate::propagation::{
    o2i_model_for, o2i_penetration_deterministic, pathloss, shadow_sigma_db, ShadowingState,
};
use crate::params::Condition;
use crate::rng::{stream, Feature};
use crate::scenario::{BuildingType, Scenario, ScenarioParams};
use crate::{Error, Result};

/// Exit codes of the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// 64-bit FNV-1a, used for the config hash in the manifest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Load and parse a config file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        field: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    SimConfig::parse(&text)
}

/// Validate a config, returning the canonical serialization on success.
pub fn validate_config(path: &Path) -> Result<String> {
    let cfg = load_config(path)?;
    cfg.validate()?;
    Ok(cfg.serialize())
}

/// The five scenarios the pathloss sweep covers (those whose frequency
/// range admits the configured carrier).
fn sweep_scenarios(fc_hz: f64) -> Vec<Scenario> {
    [
        Scenario::UMi,
        Scenario::UMa,
        Scenario::RMa,
        Scenario::InMO,
        Scenario::InOO,
    ]
    .into_iter()
    .filter(|s| {
        let p: ScenarioParams<f64> = ScenarioParams::new(*s);
        p.check_frequency(fc_hz).is_ok()
    })
    .collect()
}

/// Pathloss sweep CSV (Fig.-3 shape): log-spaced distances from the
/// scenario minimum to 1 km outdoor / 100 m indoor, with LOS, NLOS and
/// NLOS+O2I columns, with and without shadowing.
pub fn sweep_pathloss_csv(cfg: &SimConfig) -> Result<String> {
    let mut out = String::new();
    out.push_str(
        "scenario,distance_2d_m,distance_3d_m,los_db,los_shadowed_db,nlos_db,nlos_shadowed_db,nlos_o2i_db\n",
    );
    let fc = cfg.carrier_hz;
    let points = cfg.sweep_points.max(2);
    for scenario in sweep_scenarios(fc) {
        let params: ScenarioParams<f64> = ScenarioParams::new(scenario);
        let h_bs = params.h_bs_default;
        let h_ut = if scenario.is_indoor() { 1.0 } else { 1.5 };
        let dz = h_bs - h_ut;
        // Indoor sweeps run over the 3D distance (the indoor pathloss
        // validity is expressed in d3D), outdoor over the 2D distance.
        let (lo, hi) = if scenario.is_indoor() {
            (dz.abs().max(1.0), 100.0)
        } else {
            (10.0, 1000.0)
        };
        // One shadowing filter per condition, advanced along the sweep so
        // the dashed curves wiggle with the right spatial correlation.
        let table = crate::params::LspTable::<f64>::load(scenario, Condition::Los)?;
        let ntable = crate::params::LspTable::<f64>::load(scenario, Condition::Nlos)?;
        let mut rng = stream(cfg.seed, 0, 1, Feature::Shadowing);
        let mut sh_los = ShadowingState::init(
            crate::geom::Vec3::new(lo, 0.0, h_ut),
            shadow_sigma_db(scenario, Condition::Los, fc, lo, h_bs, h_ut, cfg.optional_nlos),
            table.corr_dist.sf,
            &mut rng,
        );
        let mut sh_nlos = ShadowingState::init(
            crate::geom::Vec3::new(lo, 0.0, h_ut),
            shadow_sigma_db(scenario, Condition::Nlos, fc, lo, h_bs, h_ut, cfg.optional_nlos),
            ntable.corr_dist.sf,
            &mut rng,
        );
        let o2i_model = o2i_model_for(scenario, BuildingType::Residential);
        for i in 0..points {
            let frac = i as f64 / (points - 1) as f64;
            let d = lo * (hi / lo).powf(frac);
            let (d2d, d3d) = if scenario.is_indoor() {
                // d is the 3D distance; recover the horizontal part.
                let d2d = (d * d - dz * dz).max(0.0).sqrt();
                (d2d, d)
            } else {
                (d, (d * d + dz * dz).sqrt())
            };
            let los = pathloss(scenario, true, fc, d2d, d3d, h_bs, h_ut, cfg.optional_nlos)?;
            let nlos = pathloss(scenario, false, fc, d2d, d3d, h_bs, h_ut, cfg.optional_nlos)?;
            let pos = crate::geom::Vec3::new(d, 0.0, h_ut);
            let (los_sh, nlos_sh) = if cfg.shadowing {
                sh_los.sigma_db =
                    shadow_sigma_db(scenario, Condition::Los, fc, d2d, h_bs, h_ut, cfg.optional_nlos);
                sh_nlos.sigma_db = shadow_sigma_db(
                    scenario,
                    Condition::Nlos,
                    fc,
                    d2d,
                    h_bs,
                    h_ut,
                    cfg.optional_nlos,
                );
                (
                    los + sh_los.update(pos, &mut rng),
                    nlos + sh_nlos.update(pos, &mut rng),
                )
            } else {
                (los, nlos)
            };
            let o2i = if scenario.is_indoor() {
                f64::NAN
            } else {
                nlos + o2i_penetration_deterministic(o2i_model, fc, 0.0)
            };
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.9},{:.9},{:.9},{:.9},{:.9}",
                scenario.name(),
                d2d,
                d3d,
                los,
                los_sh,
                nlos,
                nlos_sh,
                o2i
            );
        }
    }
    Ok(out)
}

/// Outputs of a full run, as in-memory CSV strings.
pub struct RunArtifacts {
    pub sinr_time_freq: String,
    pub sinr_wideband: String,
    pub cluster_power: String,
    pub pathloss_sweep: String,
    pub manifest: String,
    /// Serving-link channel dump of UT 0 after the first tick, when asked.
    pub channel_dump: Option<String>,
}

/// Execute the simulation described by `cfg` and produce every artifact.
pub fn run_simulation(cfg: &SimConfig, dump_channel: bool) -> Result<RunArtifacts> {
    cfg.validate()?;
    let world = cfg.build_world()?;
    let mut engine = Engine::new(world)?;

    let offsets = cfg.grid().offsets();
    let mut tf = String::from("t_s,ut,f_hz,sinr_db\n");
    let mut wb = String::from("t_s,ut,sinr_db\n");
    let mut cp = String::from("t_s,ut,cluster,power_fraction\n");
    let mut dump = None;

    let ticks = (cfg.duration_s / cfg.tick_s).round() as usize;
    for k in 0..=ticks {
        let t = k as f64 * cfg.tick_s;
        if t > cfg.duration_s + 1e-12 {
            break;
        }
        let samples = engine.tick(t)?;
        for s in &samples {
            for (i, &f_off) in offsets.iter().enumerate() {
                let _ = writeln!(
                    tf,
                    "{:.6},{},{:.3},{:.6}",
                    t,
                    s.ut,
                    cfg.carrier_hz + f_off,
                    s.per_subcarrier_db[i]
                );
            }
            let _ = writeln!(wb, "{:.6},{},{:.6}", t, s.ut, s.wideband_db);
            if let Some(real) = engine.serving_realization(s.ut) {
                for n in 0..real.num_clusters() {
                    let _ = writeln!(
                        cp,
                        "{:.6},{},{},{:.9e}",
                        t,
                        s.ut,
                        n,
                        real.effective_power(n)
                    );
                }
            }
        }
        if k == 0 && dump_channel {
            if let Some(real) = engine.serving_realization(0) {
                let mut buf = Vec::new();
                real.write_debug_dump(&mut buf)?;
                dump = Some(String::from_utf8_lossy(&buf).into_owned());
            }
        }
    }

    let canonical = cfg.serialize();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "config_hash = {:016x}", fnv1a64(canonical.as_bytes()));
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    let _ = writeln!(manifest, "crate_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "data_version = 1");

    Ok(RunArtifacts {
        sinr_time_freq: tf,
        sinr_wideband: wb,
        cluster_power: cp,
        pathloss_sweep: sweep_pathloss_csv(cfg)?,
        manifest,
        channel_dump: dump,
    })
}

/// Write the artifacts plus the plot scripts under `out_dir`.
pub fn write_artifacts(artifacts: &RunArtifacts, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("sinr_time_freq.csv"), &artifacts.sinr_time_freq)?;
    fs::write(out_dir.join("sinr_wideband.csv"), &artifacts.sinr_wideband)?;
    fs::write(out_dir.join("cluster_power.csv"), &artifacts.cluster_power)?;
    fs::write(out_dir.join("pathloss_sweep.csv"), &artifacts.pathloss_sweep)?;
    fs::write(out_dir.join("manifest.txt"), &artifacts.manifest)?;
    if let Some(dump) = &artifacts.channel_dump {
        fs::write(out_dir.join("channel_dump.txt"), dump)?;
    }
    write_plot_scripts(out_dir)?;
    Ok(())
}

/// The `run` entry point: config in, artifacts + plots out.
pub fn run(config_path: &Path, out_dir: &Path, seed_override: Option<u64>, dump_channel: bool) -> Result<()> {
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let artifacts = run_simulation(&cfg, dump_channel)?;
    write_artifacts(&artifacts, out_dir)
}

/// The `sweep-pathloss` entry point.
pub fn run_sweep(config_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("pathloss_sweep.csv"), sweep_pathloss_csv(&cfg)?)?;
    write_plot_scripts(out_dir)?;
    Ok(())
}

fn write_plot_scripts(out_dir: &Path) -> Result<()> {
    fs::write(out_dir.join("plot_pathloss.py"), PLOT_PATHLOSS)?;
    fs::write(out_dir.join("plot_sinr.py"), PLOT_SINR)?;
    fs::write(out_dir.join("plot_clusters.py"), PLOT_CLUSTERS)?;
    Ok(())
}

const PLOT_PATHLOSS: &str = r#"#!/usr/bin/env python3
"""Pathloss over distance per scenario, solid without / dashed with shadowing."""
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

rows = defaultdict(list)
with open("pathloss_sweep.csv") as f:
    for r in csv.DictReader(f):
        rows[r["scenario"]].append(r)

fig, ax = plt.subplots(figsize=(8, 5))
for scenario, data in rows.items():
    d = [float(r["distance_3d_m"]) for r in data]
    for col, style in [("los_db", "-"), ("nlos_db", "-"), ("los_shadowed_db", "--"),
                       ("nlos_shadowed_db", "--"), ("nlos_o2i_db", ":")]:
        y = [float(r[col]) for r in data]
        if all(v != v for v in y):  # all-NaN column (indoor O2I)
            continue
        ax.semilogx(d, y, style, label=f"{scenario} {col.replace('_db','')}")
ax.set_xlabel("3D distance [m]")
ax.set_ylabel("pathloss [dB]")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=6, ncol=3)
fig.tight_layout()
fig.savefig("pathloss.png", dpi=150)
print("wrote pathloss.png")
"#;

const PLOT_SINR: &str = r#"#!/usr/bin/env python3
"""SINR over time and frequency (one heatmap per UT) plus wideband traces."""
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

per_ut = defaultdict(lambda: defaultdict(dict))
with open("sinr_time_freq.csv") as f:
    for r in csv.DictReader(f):
        per_ut[int(r["ut"])][float(r["t_s"])][float(r["f_hz"])] = float(r["sinr_db"])

wideband = defaultdict(list)
with open("sinr_wideband.csv") as f:
    for r in csv.DictReader(f):
        wideband[int(r["ut"])].append((float(r["t_s"]), float(r["sinr_db"])))

for ut, grid in per_ut.items():
    ts = sorted(grid)
    fs = sorted(grid[ts[0]])
    z = [[grid[t][f] for t in ts] for f in fs]
    fig, (a, b) = plt.subplots(2, 1, figsize=(8, 7), height_ratios=[2, 1])
    im = a.imshow(z, aspect="auto", origin="lower",
                  extent=[ts[0], ts[-1], fs[0] / 1e9, fs[-1] / 1e9])
    a.set_xlabel("time [s]")
    a.set_ylabel("frequency [GHz]")
    fig.colorbar(im, ax=a, label="SINR [dB]")
    tw = wideband[ut]
    b.plot([t for t, _ in tw], [s for _, s in tw])
    b.set_xlabel("time [s]")
    b.set_ylabel("wideband SINR [dB]")
    b.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(f"sinr_ut{ut}.png", dpi=150)
    print(f"wrote sinr_ut{ut}.png")
"#;

const PLOT_CLUSTERS: &str = r#"#!/usr/bin/env python3
"""Cluster power fraction over time (one panel per UT)."""
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

per_ut = defaultdict(lambda: defaultdict(list))
with open("cluster_power.csv") as f:
    for r in csv.DictReader(f):
        per_ut[int(r["ut"])][int(r["cluster"])].append(
            (float(r["t_s"]), float(r["power_fraction"])))

for ut, clusters in per_ut.items():
    fig, ax = plt.subplots(figsize=(8, 5))
    for c, series in sorted(clusters.items()):
        ax.semilogy([t for t, _ in series], [p for _, p in series], label=f"cluster {c}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("power fraction")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(f"clusters_ut{ut}.png", dpi=150)
    print(f"wrote clusters_ut{ut}.png")
"#;
