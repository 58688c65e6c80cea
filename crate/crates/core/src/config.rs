//! Simulation configuration: a flat key-value file with repeated node and
//! building blocks, chosen for diff-friendliness.
//!
//! ```text
//! scenario = rma
//! carrier_hz = 7e9
//! duration_s = 60
//!
//! [bs]
//! position = 0 0 35
//! panel_rows = 8
//! panel_cols = 8
//!
//! [ut]
//! position = 100 0 1.5
//! velocity = 0 1 0
//! ```
//!
//! Parse -> serialize -> parse is the identity; the serializer writes every
//! key in canonical order so two runs of the same config are diffable.

use std::fmt::Write as _;

use crate::antenna::{AntennaPanel, PatternMode};
use crate::dynamics::{Orientation, UpdateConfig};
use crate::geom::Vec3;
use crate::link_engine::{AttachPolicy, BeamformingMethod, SubcarrierGrid, UpdatePolicy, World};
use crate::propagation::LosMode;
use crate::scenario::{
    Building, BuildingType, MobilityTrace, NodeState, Role, Scenario, ScenarioParams,
};
use crate::{Error, Result};

/// Antenna panel block of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_h: f64,
    pub spacing_v: f64,
    pub bearing_deg: f64,
    pub fov_deg: f64,
    pub pattern: PatternMode,
}

impl PanelConfig {
    fn default_for(role: Role) -> Self {
        match role {
            Role::Bs => Self {
                rows: 8,
                cols: 8,
                spacing_h: 0.5,
                spacing_v: 0.5,
                bearing_deg: 45.0,
                fov_deg: 180.0,
                pattern: PatternMode::Isotropic,
            },
            Role::Ut => Self {
                rows: 4,
                cols: 4,
                spacing_h: 0.5,
                spacing_v: 0.5,
                bearing_deg: 45.0,
                fov_deg: 180.0,
                pattern: PatternMode::Isotropic,
            },
        }
    }

    pub fn build(&self) -> AntennaPanel<f64> {
        let mut p = AntennaPanel::new(self.rows, self.cols);
        p.d_h = self.spacing_h;
        p.d_v = self.spacing_v;
        p.bearing = self.bearing_deg.to_radians();
        p.fov = self.fov_deg.to_radians();
        p.pattern = self.pattern;
        p
    }
}

/// One BS or UT block.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub role: Role,
    pub position: [f64; 3],
    /// Constant velocity over the run (UTs only).
    pub velocity: Option<[f64; 3]>,
    /// Explicit waypoints (t, x, y, z); overrides `velocity`.
    pub waypoints: Vec<(f64, [f64; 3])>,
    pub indoor: bool,
    pub panel: PanelConfig,
}

/// One building block.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub building_type: BuildingType,
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub subcarriers: usize,
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub los_mode: LosMode,
    pub shadowing: bool,
    pub optional_nlos: bool,
    pub permissive: bool,
    pub spatial_consistency: bool,
    pub blockage: bool,
    pub redraw_phases: bool,
    pub blockage_k: usize,
    pub orientation: Orientation,
    pub update_period_s: f64,
    pub beamforming: BeamformingMethod,
    pub bf_update: UpdatePolicy,
    pub attach: AttachPolicy,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub sweep_points: usize,
    pub bs: Vec<NodeConfig>,
    pub ut: Vec<NodeConfig>,
    pub buildings: Vec<BuildingConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::UMa,
            carrier_hz: 28e9,
            subcarrier_spacing_hz: 1e6,
            subcarriers: 100,
            duration_s: 10.0,
            tick_s: 0.1,
            seed: 1,
            los_mode: LosMode::Statistical,
            shadowing: true,
            optional_nlos: false,
            permissive: false,
            spatial_consistency: true,
            blockage: false,
            redraw_phases: false,
            blockage_k: 4,
            orientation: Orientation::Portrait,
            update_period_s: 0.1,
            beamforming: BeamformingMethod::PowerMethod,
            bf_update: UpdatePolicy::OnChange,
            attach: AttachPolicy::Nearest,
            tx_power_dbm: 30.0,
            noise_figure_db: 5.0,
            sweep_points: 200,
            bs: Vec::new(),
            ut: Vec::new(),
            buildings: Vec::new(),
        }
    }
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_f64(field: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| cfg_err(field, format!("expected a number, got `{v}`")))
}

fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| cfg_err(field, format!("expected an integer, got `{v}`")))
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(cfg_err(field, format!("expected true/false, got `{v}`"))),
    }
}

fn parse_vec3(field: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(cfg_err(field, format!("expected three numbers, got `{v}`")));
    }
    Ok([
        parse_f64(field, parts[0])?,
        parse_f64(field, parts[1])?,
        parse_f64(field, parts[2])?,
    ])
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        enum Section {
            Global,
            Bs(usize),
            Ut(usize),
            Building(usize),
        }
        let mut cfg = SimConfig::default();
        let mut section = Section::Global;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[bs]" => {
                    cfg.bs.push(NodeConfig {
                        role: Role::Bs,
                        position: [0.0; 3],
                        velocity: None,
                        waypoints: Vec::new(),
                        indoor: false,
                        panel: PanelConfig::default_for(Role::Bs),
                    });
                    section = Section::Bs(cfg.bs.len() - 1);
                    continue;
                }
                "[ut]" => {
                    cfg.ut.push(NodeConfig {
                        role: Role::Ut,
                        position: [0.0; 3],
                        velocity: None,
                        waypoints: Vec::new(),
                        indoor: false,
                        panel: PanelConfig::default_for(Role::Ut),
                    });
                    section = Section::Ut(cfg.ut.len() - 1);
                    continue;
                }
                "[building]" => {
                    cfg.buildings.push(BuildingConfig {
                        min: [0.0; 3],
                        max: [1.0; 3],
                        building_type: BuildingType::Residential,
                    });
                    section = Section::Building(cfg.buildings.len() - 1);
                    continue;
                }
                _ => {}
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                cfg_err(
                    "config",
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            match &section {
                Section::Global => cfg.set_global(key, value)?,
                Section::Bs(i) => {
                    let node = &mut cfg.bs[*i];
                    Self::set_node(node, key, value)?;
                }
                Section::Ut(i) => {
                    let node = &mut cfg.ut[*i];
                    Self::set_node(node, key, value)?;
                }
                Section::Building(i) => {
                    let b = &mut cfg.buildings[*i];
                    match key {
                        "min" => b.min = parse_vec3("building.min", value)?,
                        "max" => b.max = parse_vec3("building.max", value)?,
                        "type" => {
                            b.building_type = match value {
                                "residential" => BuildingType::Residential,
                                "commercial" => BuildingType::Commercial,
                                "office" => BuildingType::Office,
                                _ => {
                                    return Err(cfg_err(
                                        "building.type",
                                        format!("unknown building type `{value}`"),
                                    ))
                                }
                            }
                        }
                        _ => {
                            return Err(cfg_err(
                                "building",
                                format!("unknown building key `{key}`"),
                            ))
                        }
                    }
                }
            }
        }
        Ok(cfg)
    }

    fn set_global(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => {
                self.scenario = match value {
                    "umi" => Scenario::UMi,
                    "uma" => Scenario::UMa,
                    "rma" => Scenario::RMa,
                    "inmo" => Scenario::InMO,
                    "inoo" => Scenario::InOO,
                    _ => return Err(cfg_err("scenario", format!("unknown scenario `{value}`"))),
                }
            }
            "carrier_hz" => self.carrier_hz = parse_f64(key, value)?,
            "subcarrier_spacing_hz" => self.subcarrier_spacing_hz = parse_f64(key, value)?,
            "subcarriers" => self.subcarriers = parse_usize(key, value)?,
            "duration_s" => self.duration_s = parse_f64(key, value)?,
            "tick_s" => self.tick_s = parse_f64(key, value)?,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| cfg_err("seed", format!("expected an integer, got `{value}`")))?
            }
            "los_mode" => {
                self.los_mode = match value {
                    "los" => LosMode::ForceLos,
                    "nlos" => LosMode::ForceNlos,
                    "statistical" => LosMode::Statistical,
                    "geometric" => LosMode::Geometric,
                    _ => return Err(cfg_err("los_mode", format!("unknown LOS mode `{value}`"))),
                }
            }
            "shadowing" => self.shadowing = parse_bool(key, value)?,
            "optional_nlos" => self.optional_nlos = parse_bool(key, value)?,
            "permissive" => self.permissive = parse_bool(key, value)?,
            "spatial_consistency" => self.spatial_consistency = parse_bool(key, value)?,
            "blockage" => self.blockage = parse_bool(key, value)?,
            "redraw_phases" => self.redraw_phases = parse_bool(key, value)?,
            "blockage_k" => self.blockage_k = parse_usize(key, value)?,
            "orientation" => {
                self.orientation = match value {
                    "portrait" => Orientation::Portrait,
                    "landscape" => Orientation::Landscape,
                    _ => {
                        return Err(cfg_err(
                            "orientation",
                            format!("expected portrait/landscape, got `{value}`"),
                        ))
                    }
                }
            }
            "update_period_s" => self.update_period_s = parse_f64(key, value)?,
            "beamforming" => {
                self.beamforming = match value {
                    "power" => BeamformingMethod::PowerMethod,
                    "cell_scan" => BeamformingMethod::CellScan,
                    _ => {
                        return Err(cfg_err(
                            "beamforming",
                            format!("expected power/cell_scan, got `{value}`"),
                        ))
                    }
                }
            }
            "bf_update" => {
                self.bf_update = match value {
                    "on_change" => UpdatePolicy::OnChange,
                    "frozen" => UpdatePolicy::Frozen,
                    _ => {
                        return Err(cfg_err(
                            "bf_update",
                            format!("expected on_change/frozen, got `{value}`"),
                        ))
                    }
                }
            }
            "attach" => {
                self.attach = match value {
                    "nearest" => AttachPolicy::Nearest,
                    "max_rsrp" => AttachPolicy::MaxRsrp,
                    _ => {
                        return Err(cfg_err(
                            "attach",
                            format!("expected nearest/max_rsrp, got `{value}`"),
                        ))
                    }
                }
            }
            "tx_power_dbm" => self.tx_power_dbm = parse_f64(key, value)?,
            "noise_figure_db" => self.noise_figure_db = parse_f64(key, value)?,
            "sweep_points" => self.sweep_points = parse_usize(key, value)?,
            _ => return Err(cfg_err("config", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn set_node(node: &mut NodeConfig, key: &str, value: &str) -> Result<()> {
        let section = match node.role {
            Role::Bs => "bs",
            Role::Ut => "ut",
        };
        match key {
            "position" => node.position = parse_vec3(&format!("{section}.position"), value)?,
            "velocity" => node.velocity = Some(parse_vec3(&format!("{section}.velocity"), value)?),
            "waypoint" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(cfg_err(
                        &format!("{section}.waypoint"),
                        "expected `t x y z`",
                    ));
                }
                let t = parse_f64("waypoint.t", parts[0])?;
                node.waypoints.push((
                    t,
                    [
                        parse_f64("waypoint.x", parts[1])?,
                        parse_f64("waypoint.y", parts[2])?,
                        parse_f64("waypoint.z", parts[3])?,
                    ],
                ));
            }
            "indoor" => node.indoor = parse_bool(&format!("{section}.indoor"), value)?,
            "panel_rows" => node.panel.rows = parse_usize(&format!("{section}.panel_rows"), value)?,
            "panel_cols" => node.panel.cols = parse_usize(&format!("{section}.panel_cols"), value)?,
            "spacing_h" => node.panel.spacing_h = parse_f64(&format!("{section}.spacing_h"), value)?,
            "spacing_v" => node.panel.spacing_v = parse_f64(&format!("{section}.spacing_v"), value)?,
            "bearing_deg" => {
                node.panel.bearing_deg = parse_f64(&format!("{section}.bearing_deg"), value)?
            }
            "fov_deg" => node.panel.fov_deg = parse_f64(&format!("{section}.fov_deg"), value)?,
            "pattern" => {
                node.panel.pattern = match value {
                    "isotropic" => PatternMode::Isotropic,
                    "element_3gpp" => PatternMode::Element3gpp,
                    _ => {
                        return Err(cfg_err(
                            &format!("{section}.pattern"),
                            format!("expected isotropic/element_3gpp, got `{value}`"),
                        ))
                    }
                }
            }
            _ => {
                return Err(cfg_err(
                    section,
                    format!("unknown {section} key `{key}`"),
                ))
            }
        }
        Ok(())
    }

    /// Canonical serialization: every key, fixed order.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let scenario = match self.scenario {
            Scenario::UMi => "umi",
            Scenario::UMa => "uma",
            Scenario::RMa => "rma",
            Scenario::InMO => "inmo",
            Scenario::InOO => "inoo",
        };
        let los = match self.los_mode {
            LosMode::ForceLos => "los",
            LosMode::ForceNlos => "nlos",
            LosMode::Statistical => "statistical",
            LosMode::Geometric => "geometric",
        };
        let orientation = match self.orientation {
            Orientation::Portrait => "portrait",
            Orientation::Landscape => "landscape",
        };
        let bf = match self.beamforming {
            BeamformingMethod::PowerMethod => "power",
            BeamformingMethod::CellScan => "cell_scan",
        };
        let bfu = match self.bf_update {
            UpdatePolicy::OnChange => "on_change",
            UpdatePolicy::Frozen => "frozen",
        };
        let attach = match self.attach {
            AttachPolicy::Nearest => "nearest",
            AttachPolicy::MaxRsrp => "max_rsrp",
        };
        let _ = writeln!(s, "scenario = {scenario}");
        let _ = writeln!(s, "carrier_hz = {}", self.carrier_hz);
        let _ = writeln!(s, "subcarrier_spacing_hz = {}", self.subcarrier_spacing_hz);
        let _ = writeln!(s, "subcarriers = {}", self.subcarriers);
        let _ = writeln!(s, "duration_s = {}", self.duration_s);
        let _ = writeln!(s, "tick_s = {}", self.tick_s);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "los_mode = {los}");
        let _ = writeln!(s, "shadowing = {}", self.shadowing);
        let _ = writeln!(s, "optional_nlos = {}", self.optional_nlos);
        let _ = writeln!(s, "permissive = {}", self.permissive);
        let _ = writeln!(s, "spatial_consistency = {}", self.spatial_consistency);
        let _ = writeln!(s, "blockage = {}", self.blockage);
        let _ = writeln!(s, "redraw_phases = {}", self.redraw_phases);
        let _ = writeln!(s, "blockage_k = {}", self.blockage_k);
        let _ = writeln!(s, "orientation = {orientation}");
        let _ = writeln!(s, "update_period_s = {}", self.update_period_s);
        let _ = writeln!(s, "beamforming = {bf}");
        let _ = writeln!(s, "bf_update = {bfu}");
        let _ = writeln!(s, "attach = {attach}");
        let _ = writeln!(s, "tx_power_dbm = {}", self.tx_power_dbm);
        let _ = writeln!(s, "noise_figure_db = {}", self.noise_figure_db);
        let _ = writeln!(s, "sweep_points = {}", self.sweep_points);
        for node in self.bs.iter().chain(self.ut.iter()) {
            let header = match node.role {
                Role::Bs => "[bs]",
                Role::Ut => "[ut]",
            };
            let _ = writeln!(s, "\n{header}");
            let _ = writeln!(
                s,
                "position = {} {} {}",
                node.position[0], node.position[1], node.position[2]
            );
            if let Some(v) = node.velocity {
                let _ = writeln!(s, "velocity = {} {} {}", v[0], v[1], v[2]);
            }
            for (t, p) in &node.waypoints {
                let _ = writeln!(s, "waypoint = {} {} {} {}", t, p[0], p[1], p[2]);
            }
            let _ = writeln!(s, "indoor = {}", node.indoor);
            let _ = writeln!(s, "panel_rows = {}", node.panel.rows);
            let _ = writeln!(s, "panel_cols = {}", node.panel.cols);
            let _ = writeln!(s, "spacing_h = {}", node.panel.spacing_h);
            let _ = writeln!(s, "spacing_v = {}", node.panel.spacing_v);
            let _ = writeln!(s, "bearing_deg = {}", node.panel.bearing_deg);
            let _ = writeln!(s, "fov_deg = {}", node.panel.fov_deg);
            let pattern = match node.panel.pattern {
                PatternMode::Isotropic => "isotropic",
                PatternMode::Element3gpp => "element_3gpp",
            };
            let _ = writeln!(s, "pattern = {pattern}");
        }
        for b in &self.buildings {
            let _ = writeln!(s, "\n[building]");
            let _ = writeln!(s, "min = {} {} {}", b.min[0], b.min[1], b.min[2]);
            let _ = writeln!(s, "max = {} {} {}", b.max[0], b.max[1], b.max[2]);
            let _ = writeln!(s, "type = {}", b.building_type.name());
        }
        s
    }

    /// Check the config against the scenario validity ranges; errors name
    /// the offending field.
    pub fn validate(&self) -> Result<()> {
        let params: ScenarioParams<f64> = ScenarioParams::new(self.scenario);
        params
            .check_frequency(self.carrier_hz)
            .map_err(|e| cfg_err("carrier_hz", e.to_string()))?;
        self.grid().validate()?;
        if self.bs.is_empty() {
            return Err(cfg_err("bs", "at least one BS block required"));
        }
        if self.ut.is_empty() {
            return Err(cfg_err("ut", "at least one UT block required"));
        }
        if self.duration_s <= 0.0 {
            return Err(cfg_err("duration_s", "must be positive"));
        }
        if self.tick_s <= 0.0 {
            return Err(cfg_err("tick_s", "must be positive"));
        }
        if self.update_period_s <= 0.0 && self.spatial_consistency {
            return Err(cfg_err(
                "update_period_s",
                "must be positive when spatial consistency is enabled",
            ));
        }
        for (i, ut) in self.ut.iter().enumerate() {
            params
                .check_ut_height(ut.position[2])
                .map_err(|e| cfg_err(&format!("ut[{i}].position"), e.to_string()))?;
        }
        for (i, b) in self.buildings.iter().enumerate() {
            Building::new(
                Vec3::new(b.min[0], b.min[1], b.min[2]),
                Vec3::new(b.max[0], b.max[1], b.max[2]),
                b.building_type,
            )
            .map_err(|e| cfg_err(&format!("building[{i}]"), e.to_string()))?;
        }
        if self.los_mode == LosMode::Geometric && self.buildings.is_empty() {
            return Err(cfg_err(
                "los_mode",
                "geometric LOS mode requires building blocks",
            ));
        }
        // The engine enforces the remaining structural constraints; run it
        // against the fully built world to surface them here.
        let _ = self.build_world()?;
        Ok(())
    }

    pub fn grid(&self) -> SubcarrierGrid<f64> {
        SubcarrierGrid {
            fc_hz: self.carrier_hz,
            spacing_hz: self.subcarrier_spacing_hz,
            count: self.subcarriers,
        }
    }

    fn trace_for(&self, node: &NodeConfig) -> Result<MobilityTrace<f64>> {
        let start = Vec3::new(node.position[0], node.position[1], node.position[2]);
        if !node.waypoints.is_empty() {
            let pts = node
                .waypoints
                .iter()
                .map(|(t, p)| (*t, Vec3::new(p[0], p[1], p[2])))
                .collect();
            return MobilityTrace::new(pts);
        }
        if let Some(v) = node.velocity {
            return Ok(MobilityTrace::constant_velocity(
                start,
                Vec3::new(v[0], v[1], v[2]),
                self.duration_s,
            ));
        }
        Ok(MobilityTrace::fixed(start))
    }

    /// Build the engine world from this config.
    pub fn build_world(&self) -> Result<World<f64>> {
        let mut buildings = Vec::with_capacity(self.buildings.len());
        for b in &self.buildings {
            buildings.push(Building::new(
                Vec3::new(b.min[0], b.min[1], b.min[2]),
                Vec3::new(b.max[0], b.max[1], b.max[2]),
                b.building_type,
            )?);
        }
        let bs: Vec<NodeState<f64>> = self
            .bs
            .iter()
            .map(|n| NodeState {
                position: Vec3::new(n.position[0], n.position[1], n.position[2]),
                velocity: Vec3::zero(),
                indoor: false,
                role: Role::Bs,
                panel: n.panel.build(),
            })
            .collect();
        let mut ut = Vec::with_capacity(self.ut.len());
        let mut traces = Vec::with_capacity(self.ut.len());
        for n in &self.ut {
            let trace = self.trace_for(n)?;
            let (start, _) = trace.span();
            let v = trace.velocity_at(start)?;
            ut.push(NodeState {
                position: Vec3::new(n.position[0], n.position[1], n.position[2]),
                velocity: v,
                indoor: n.indoor,
                role: Role::Ut,
                panel: n.panel.build(),
            });
            traces.push(trace);
        }
        Ok(World {
            params: ScenarioParams::new(self.scenario),
            grid: self.grid(),
            buildings,
            bs,
            ut,
            ut_traces: traces,
            los_mode: self.los_mode,
            shadowing: self.shadowing,
            optional_nlos: self.optional_nlos,
            permissive: self.permissive,
            update: UpdateConfig {
                t_per: self.update_period_s,
                spatial_consistency: self.spatial_consistency,
                blockage: self.blockage,
                redraw_phases: self.redraw_phases,
            },
            blockage_k: self.blockage_k,
            orientation: self.orientation,
            bf_method: self.beamforming,
            bf_update: self.bf_update,
            attach: self.attach,
            tx_power_dbm: self.tx_power_dbm,
            noise_figure_db: self.noise_figure_db,
            master_seed: self.seed,
            table_override: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# sample config
scenario = rma
carrier_hz = 7e9
subcarriers = 50
duration_s = 60
seed = 9
los_mode = los
shadowing = true

[bs]
position = 0 0 35
panel_rows = 8
panel_cols = 8
bearing_deg = 0

[ut]
position = 100 0 1.5
velocity = 0 1 0
panel_rows = 4
panel_cols = 4
bearing_deg = 180

[building]
min = 30 -10 0
max = 50 10 20
type = office
"#;

    #[test]
    fn parse_reads_sections_and_defaults() {
        let cfg = SimConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.scenario, Scenario::RMa);
        assert_eq!(cfg.carrier_hz, 7e9);
        assert_eq!(cfg.subcarriers, 50);
        assert_eq!(cfg.bs.len(), 1);
        assert_eq!(cfg.ut.len(), 1);
        assert_eq!(cfg.buildings.len(), 1);
        assert_eq!(cfg.bs[0].panel.rows, 8);
        assert_eq!(cfg.ut[0].velocity, Some([0.0, 1.0, 0.0]));
        // Untouched keys keep their defaults.
        assert_eq!(cfg.tick_s, 0.1);
        assert_eq!(cfg.noise_figure_db, 5.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = SimConfig::parse(SAMPLE).unwrap();
        let text = cfg.serialize();
        let cfg2 = SimConfig::parse(&text).unwrap();
        assert_eq!(cfg, cfg2);
        // And a second round trip produces identical bytes.
        assert_eq!(text, cfg2.serialize());
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_field_name() {
        let err = SimConfig::parse("carrier_hz = 28e9\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn frequency_validation_names_the_field() {
        let mut cfg = SimConfig::parse(SAMPLE).unwrap();
        cfg.carrier_hz = 28e9; // invalid for RMa
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("carrier_hz"), "{err}");
    }

    #[test]
    fn ut_height_validation_names_the_node() {
        let mut cfg = SimConfig::parse(SAMPLE).unwrap();
        cfg.ut[0].position[2] = 50.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("ut[0]"), "{err}");
    }

    #[test]
    fn valid_sample_builds_a_world() {
        let cfg = SimConfig::parse(SAMPLE).unwrap();
        cfg.validate().unwrap();
        let world = cfg.build_world().unwrap();
        assert_eq!(world.bs.len(), 1);
        assert_eq!(world.ut_traces.len(), 1);
        let (t0, t1) = world.ut_traces[0].span();
        assert_eq!(t0, 0.0);
        assert_eq!(t1, 60.0);
    }

    #[test]
    fn waypoints_override_velocity() {
        let text = "scenario = uma\ncarrier_hz = 28e9\n[bs]\nposition = 0 0 25\n[ut]\nposition = 0 0 1.5\nvelocity = 1 0 0\nwaypoint = 0 0 0 1.5\nwaypoint = 10 5 5 1.5\n";
        let cfg = SimConfig::parse(text).unwrap();
        let trace = cfg.trace_for(&cfg.ut[0]).unwrap();
        assert_eq!(trace.waypoints().len(), 2);
        assert_eq!(
            trace.position_at(10.0).unwrap(),
            Vec3::new(5.0, 5.0, 1.5)
        );
    }
}
