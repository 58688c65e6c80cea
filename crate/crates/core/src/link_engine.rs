//! Per-tick link evaluation: geometry, LOS, pathloss and shadowing,
//! channel generation/update, beamforming and SINR for serving and
//! interfering links.
//!
//! Interference links reuse the interferer's serving-link transmit vector
//! and the victim's receive vector, so interfering beams are whatever the
//! interferer chose for its own user. Channel realizations for
//! interferer-victim pairs are generated once and updated on the same
//! cadence as serving links.

use ndarray::Array2;
use num_complex::Complex;
use rand_chacha::ChaCha12Rng;

use crate::antenna::BeamformingVector;
use crate::beamforming::{
    cell_scan, collapse_channel, gain, power_method, set_beamforming, POWER_METHOD_MAX_ITER,
    POWER_METHOD_THRESHOLD,
};
use crate::dynamics::{generate_blockers, tick_update, BlockageState, Orientation, UpdateConfig};
use crate::geom::Vec3;
use crate::large_scale::{generate_lsps, LspGeometry, LspSet};
use crate::num::{db_to_lin, lin_to_db, Float};
use crate::params::{factor_from_matrix, Condition, LspTable};
use crate::propagation::{
    assign_los, o2i_model_for, o2i_penetration, pathloss, pathloss_clamped, shadow_sigma_db,
    LosCondition, LosMode, LosSource, PathlossResult, ShadowingState,
};
use crate::rng::{stream, Feature};
use crate::scenario::{
    link_geometry, point_in_buildings, Building, BuildingType, MobilityTrace, NodeState,
    ScenarioParams,
};
use crate::small_scale::{generate_channel, ChannelRealization, FadingInputs, LosAngles};
use crate::{Error, Result, BOLTZMANN, SPEED_OF_LIGHT};

/// OFDM subcarrier grid centered on the carrier.
#[derive(Debug, Clone, Copy)]
pub struct SubcarrierGrid<T> {
    pub fc_hz: T,
    pub spacing_hz: T,
    pub count: usize,
}

impl<T: Float> SubcarrierGrid<T> {
    pub fn bandwidth_hz(&self) -> T {
        self.spacing_hz * T::of(self.count as f64)
    }

    /// Subcarrier offsets from the carrier, symmetric around 0.
    pub fn offsets(&self) -> Vec<T> {
        let mid = T::of((self.count as f64 - 1.0) / 2.0);
        (0..self.count)
            .map(|k| (T::of(k as f64) - mid) * self.spacing_hz)
            .collect()
    }

    /// The model is applicable for bandwidths up to 10% of the carrier,
    /// capped at 2 GHz.
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.spacing_hz <= T::zero() {
            return Err(Error::Config {
                field: "grid".into(),
                message: "subcarrier count and spacing must be positive".into(),
            });
        }
        let bw = self.bandwidth_hz();
        let limit = (self.fc_hz * T::of(0.1)).min(T::of(2e9));
        if bw > limit {
            return Err(Error::Config {
                field: "grid".into(),
                message: format!(
                    "bandwidth {} Hz exceeds min(0.1*fc, 2 GHz) = {} Hz",
                    bw.to_f64().unwrap_or(f64::NAN),
                    limit.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
        Ok(())
    }
}

/// Thermal noise PSD in W/Hz for a noise figure in dB (290 K reference).
pub fn thermal_noise_psd<T: Float>(noise_figure_db: T) -> T {
    T::of(BOLTZMANN) * T::of(290.0) * db_to_lin(noise_figure_db)
}

/// Serving-BS selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachPolicy {
    /// Smallest 3D distance; ties go to the lowest BS id.
    Nearest,
    /// Smallest deterministic link loss (pathloss plus deterministic O2I),
    /// i.e. largest shadowing-averaged received power with omni weights.
    MaxRsrp,
}

/// Beamforming vector computation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformingMethod {
    PowerMethod,
    CellScan,
}

/// When beamforming vectors are recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    /// At every channel generation or update (default).
    OnChange,
    /// Only when the channel is first generated.
    Frozen,
}

/// Full simulation world handed to the engine.
#[derive(Debug, Clone)]
pub struct World<T> {
    pub params: ScenarioParams<T>,
    pub grid: SubcarrierGrid<T>,
    pub buildings: Vec<Building<T>>,
    pub bs: Vec<NodeState<T>>,
    pub ut: Vec<NodeState<T>>,
    pub ut_traces: Vec<MobilityTrace<T>>,
    pub los_mode: LosMode,
    pub shadowing: bool,
    pub optional_nlos: bool,
    /// Clamp out-of-validity distances with a warning instead of failing.
    pub permissive: bool,
    pub update: UpdateConfig<T>,
    pub blockage_k: usize,
    pub orientation: Orientation,
    pub bf_method: BeamformingMethod,
    pub bf_update: UpdatePolicy,
    pub attach: AttachPolicy,
    pub tx_power_dbm: T,
    pub noise_figure_db: T,
    pub master_seed: u64,
    /// Test/calibration hook: replaces the embedded LSP table for every
    /// link condition.
    pub table_override: Option<LspTable<T>>,
}

/// One SINR observation for a UT.
#[derive(Debug, Clone)]
pub struct SinrSample<T> {
    pub t: T,
    pub ut: usize,
    pub per_subcarrier_db: Vec<T>,
    /// Ratio of summed signal power to summed noise+interference power
    /// across the grid (not the mean of per-subcarrier dB).
    pub wideband_db: T,
}

/// State of one directed BS -> UT link.
struct Link<T> {
    ut: usize,
    los: LosCondition,
    condition: Condition,
    shadow: ShadowingState<T>,
    shadow_rng: ChaCha12Rng,
    fading_rng: ChaCha12Rng,
    blockage_rng: ChaCha12Rng,
    /// Frozen random O2I penetration for indoor UTs, dB.
    o2i_db: T,
    lsps: Option<LspSet<T>>,
    realization: Option<ChannelRealization<T>>,
    blockers: Option<BlockageState<T>>,
    last_update_t: T,
    /// Loss composition of the latest tick.
    last_loss: Option<PathlossResult<T>>,
}

/// Simulation engine: owns the link states and advances them tick by tick.
pub struct Engine<T: Float> {
    world: World<T>,
    /// links[ut][bs]
    links: Vec<Vec<Link<T>>>,
    serving: Vec<usize>,
    ut_pos: Vec<Vec3<T>>,
    ut_vel: Vec<Vec3<T>>,
    last_t: Option<T>,
}

impl<T: Float> Engine<T> {
    pub fn new(world: World<T>) -> Result<Self> {
        if world.bs.is_empty() {
            return Err(Error::NoBaseStation);
        }
        world.params.check_frequency(world.grid.fc_hz)?;
        world.grid.validate()?;
        if world.los_mode == LosMode::Geometric && world.buildings.is_empty() {
            return Err(Error::MissingBuildings);
        }
        for (i, bs) in world.bs.iter().enumerate() {
            if !world.buildings.is_empty() && point_in_buildings(bs.position, &world.buildings) {
                return Err(Error::Config {
                    field: format!("bs[{i}]"),
                    message: "BSs must be placed outside of buildings".into(),
                });
            }
        }
        if world.ut.len() != world.ut_traces.len() {
            return Err(Error::Config {
                field: "ut_traces".into(),
                message: "one mobility trace per UT required".into(),
            });
        }

        let mut ut_pos = Vec::with_capacity(world.ut.len());
        let mut ut_vel = Vec::with_capacity(world.ut.len());
        for (u, trace) in world.ut_traces.iter().enumerate() {
            let (start, _) = trace.span();
            let p = trace.position_at(start)?;
            world.params.check_ut_height(p.z)?;
            ut_pos.push(p);
            ut_vel.push(trace.velocity_at(start)?);
            let _ = u;
        }

        let mut engine = Engine {
            links: Vec::new(),
            serving: Vec::new(),
            ut_pos,
            ut_vel,
            last_t: None,
            world,
        };
        engine.init_links()?;
        engine.attach_all()?;
        Ok(engine)
    }

    /// Stream node id: BSs first, then UTs.
    fn node_id(&self, bs: Option<usize>, ut: Option<usize>) -> usize {
        match (bs, ut) {
            (Some(b), None) => b,
            (None, Some(u)) => self.world.bs.len() + u,
            _ => unreachable!(),
        }
    }

    fn ut_indoor(&self, ut: usize) -> bool {
        if self.world.buildings.is_empty() {
            self.world.ut[ut].indoor
        } else {
            point_in_buildings(self.ut_pos[ut], &self.world.buildings)
        }
    }

    fn containing_building_type(&self, ut: usize) -> BuildingType {
        self.world
            .buildings
            .iter()
            .find(|b| b.contains(self.ut_pos[ut]))
            .map(|b| b.building_type)
            .unwrap_or(BuildingType::Residential)
    }

    fn init_links(&mut self) -> Result<()> {
        let n_bs = self.world.bs.len();
        let n_ut = self.world.ut.len();
        let mut links = Vec::with_capacity(n_ut);
        for ut in 0..n_ut {
            let mut row = Vec::with_capacity(n_bs);
            for bs in 0..n_bs {
                row.push(self.init_link(bs, ut)?);
            }
            links.push(row);
        }
        self.links = links;
        Ok(())
    }

    fn init_link(&self, bs: usize, ut: usize) -> Result<Link<T>> {
        let w = &self.world;
        let bs_id = self.node_id(Some(bs), None);
        let ut_id = self.node_id(None, Some(ut));
        let seed = w.master_seed;

        let mut los_rng = stream(seed, bs_id, ut_id, Feature::LosDraw);
        let ut_pos = self.ut_pos[ut];
        let indoor = self.ut_indoor(ut);
        let los = assign_los(
            w.los_mode,
            w.params.kind,
            w.bs[bs].position,
            ut_pos,
            ut_pos.z,
            if w.buildings.is_empty() {
                None
            } else {
                Some(&w.buildings)
            },
            &mut los_rng,
        )?;
        let condition = if indoor {
            Condition::O2i
        } else if los.los {
            Condition::Los
        } else {
            Condition::Nlos
        };

        let geo = link_geometry(&w.bs[bs], &w.ut[ut])?;
        let sigma = shadow_sigma_db(
            w.params.kind,
            condition,
            w.grid.fc_hz,
            geo.d2d,
            w.bs[bs].position.z,
            ut_pos.z,
            w.optional_nlos,
        );
        let table = self.table_for(condition)?;
        let d_cor = table.corr_dist.sf;
        let mut shadow_rng = stream(seed, bs_id, ut_id, Feature::Shadowing);
        let shadow = ShadowingState::init(ut_pos, sigma, d_cor, &mut shadow_rng);

        let mut o2i_db = T::zero();
        if indoor {
            let mut o2i_rng = stream(seed, bs_id, ut_id, Feature::O2i);
            let model = o2i_model_for(w.params.kind, self.containing_building_type(ut));
            let max_depth = match w.params.kind {
                crate::scenario::Scenario::RMa => T::of(10.0),
                _ => T::of(25.0),
            };
            let depth = T::uniform_01(&mut o2i_rng) * max_depth.min(geo.d2d);
            o2i_db = o2i_penetration(model, w.grid.fc_hz, depth, &mut o2i_rng);
        }

        Ok(Link {
            ut,
            los,
            condition,
            shadow,
            shadow_rng,
            fading_rng: stream(seed, bs_id, ut_id, Feature::Fading),
            blockage_rng: stream(seed, bs_id, ut_id, Feature::Blockage),
            o2i_db,
            lsps: None,
            realization: None,
            blockers: None,
            last_update_t: T::zero(),
            last_loss: None,
        })
    }

    fn table_for(&self, condition: Condition) -> Result<LspTable<T>> {
        if let Some(t) = &self.world.table_override {
            return Ok(t.clone());
        }
        LspTable::load(self.world.params.kind, condition)
    }

    fn attach_all(&mut self) -> Result<()> {
        let n_ut = self.world.ut.len();
        let mut serving = Vec::with_capacity(n_ut);
        for ut in 0..n_ut {
            serving.push(self.attach(ut)?);
        }
        self.serving = serving;
        Ok(())
    }

    /// Pick the serving BS for a UT under the configured policy.
    pub fn attach(&self, ut: usize) -> Result<usize> {
        let w = &self.world;
        if w.bs.is_empty() {
            return Err(Error::NoBaseStation);
        }
        match w.attach {
            AttachPolicy::Nearest => {
                let mut best = 0usize;
                let mut best_d = T::infinity();
                for (b, bs) in w.bs.iter().enumerate() {
                    let d = (self.ut_pos[ut] - bs.position).norm();
                    if d < best_d {
                        best_d = d;
                        best = b;
                    }
                }
                Ok(best)
            }
            AttachPolicy::MaxRsrp => {
                let mut best = 0usize;
                let mut best_loss = T::infinity();
                for (b, bs) in w.bs.iter().enumerate() {
                    let link = &self.links[ut][b];
                    let geo = link_geometry(bs, &w.ut[ut])?;
                    let pl = self.pathloss_for(link, geo.d2d, geo.d3d, bs.position.z)?;
                    let loss = pl + link.o2i_db;
                    if loss < best_loss {
                        best_loss = loss;
                        best = b;
                    }
                }
                Ok(best)
            }
        }
    }

    fn pathloss_for(&self, link: &Link<T>, d2d: T, d3d: T, h_bs: T) -> Result<T> {
        let w = &self.world;
        let h_ut = self.ut_pos[link.ut].z;
        if w.permissive {
            Ok(pathloss_clamped(
                w.params.kind,
                link.los.los,
                w.grid.fc_hz,
                d2d,
                d3d,
                h_bs,
                h_ut,
                w.optional_nlos,
            ))
        } else {
            pathloss(
                w.params.kind,
                link.los.los,
                w.grid.fc_hz,
                d2d,
                d3d,
                h_bs,
                h_ut,
                w.optional_nlos,
            )
        }
    }

    pub fn serving_bs(&self, ut: usize) -> usize {
        self.serving[ut]
    }

    /// Latest realization of the serving link (present after a tick).
    pub fn serving_realization(&self, ut: usize) -> Option<&ChannelRealization<T>> {
        self.links[ut][self.serving[ut]].realization.as_ref()
    }

    /// Loss composition of the serving link from the latest tick.
    pub fn serving_loss(&self, ut: usize) -> Option<&PathlossResult<T>> {
        self.links[ut][self.serving[ut]].last_loss.as_ref()
    }

    /// Advance the world to time `t` and return one SINR sample per UT.
    pub fn tick(&mut self, t: T) -> Result<Vec<SinrSample<T>>> {
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(Error::Config {
                    field: "tick".into(),
                    message: "tick times must advance monotonically".into(),
                });
            }
        }
        self.last_t = Some(t);

        // Mobility.
        for (u, trace) in self.world.ut_traces.iter().enumerate() {
            self.ut_pos[u] = trace.position_at(t)?;
            self.ut_vel[u] = trace.velocity_at(t)?;
        }

        // Serving links first: they own the beamforming vectors.
        let n_ut = self.world.ut.len();
        let n_bs = self.world.bs.len();
        for ut in 0..n_ut {
            let bs = self.serving[ut];
            self.advance_link(ut, bs, t, true)?;
        }
        // Interference links reuse the serving vectors.
        for ut in 0..n_ut {
            for bs in 0..n_bs {
                if bs != self.serving[ut] {
                    self.advance_link(ut, bs, t, false)?;
                }
            }
        }

        // Interference vector assignment: the interferer's tx vector for
        // its own user, the victim's rx vector.
        for ut in 0..n_ut {
            for bs in 0..n_bs {
                if bs == self.serving[ut] {
                    continue;
                }
                let victim_ut = ut;
                // The UT (if any) this BS is serving.
                let served_ut = (0..n_ut).find(|&u| self.serving[u] == bs);
                let w_tx: Option<BeamformingVector<T>> = served_ut.and_then(|u| {
                    self.links[u][bs]
                        .realization
                        .as_ref()
                        .and_then(|r| r.tx_bf.clone())
                });
                let w_rx: Option<BeamformingVector<T>> = self.links[victim_ut]
                    [self.serving[victim_ut]]
                .realization
                .as_ref()
                .and_then(|r| r.rx_bf.clone());
                if let (Some(w_tx), Some(w_rx)) = (w_tx, w_rx) {
                    let link = &mut self.links[ut][bs];
                    if let Some(real) = link.realization.as_mut() {
                        set_beamforming(real, w_tx, w_rx)?;
                    }
                }
            }
        }

        // SINR per UT.
        let offsets = self.world.grid.offsets();
        let noise_psd = thermal_noise_psd(self.world.noise_figure_db);
        let tx_psd =
            db_to_lin(self.world.tx_power_dbm - T::of(30.0)) / self.world.grid.bandwidth_hz();
        let mut samples = Vec::with_capacity(n_ut);
        for ut in 0..n_ut {
            let mut signal = vec![T::zero(); offsets.len()];
            let mut interference = vec![T::zero(); offsets.len()];
            for bs in 0..n_bs {
                let link = &self.links[ut][bs];
                let (Some(real), Some(loss)) = (&link.realization, &link.last_loss) else {
                    continue;
                };
                if real.long_term.is_none() {
                    // Interferer without an active serving beam: silent.
                    continue;
                }
                let lin_loss = db_to_lin(-loss.total);
                let v = self.ut_vel[ut];
                let lambda0 = T::of(SPEED_OF_LIGHT) / self.world.grid.fc_hz;
                let elapsed = t - real.generated_at;
                for (k, &f) in offsets.iter().enumerate() {
                    let g = gain(real, elapsed, f, v, lambda0).norm_sqr();
                    let p = tx_psd * g * lin_loss;
                    if bs == self.serving[ut] {
                        signal[k] = p;
                    } else {
                        interference[k] += p;
                    }
                }
            }
            let mut per_sc = Vec::with_capacity(offsets.len());
            let mut sig_sum = T::zero();
            let mut den_sum = T::zero();
            for k in 0..offsets.len() {
                let den = noise_psd + interference[k];
                per_sc.push(lin_to_db(signal[k] / den));
                sig_sum += signal[k];
                den_sum += den;
            }
            samples.push(SinrSample {
                t,
                ut,
                per_subcarrier_db: per_sc,
                wideband_db: lin_to_db(sig_sum / den_sum),
            });
        }
        Ok(samples)
    }

    /// Update one link's propagation state and channel at time `t`.
    fn advance_link(&mut self, ut: usize, bs: usize, t: T, serving: bool) -> Result<()> {
        let ut_pos = self.ut_pos[ut];
        let ut_vel = self.ut_vel[ut];
        let bs_pos = self.world.bs[bs].position;
        let indoor = self.ut_indoor(ut);

        // Current geometry.
        let mut ut_node = self.world.ut[ut].clone();
        ut_node.position = ut_pos;
        let geo = link_geometry(&self.world.bs[bs], &ut_node)?;

        // Geometric LOS re-derives every query; a state flip regenerates
        // the channel and resets the shadowing filter.
        if self.world.los_mode == LosMode::Geometric {
            let now_los =
                !crate::scenario::segment_intersects_buildings(bs_pos, ut_pos, &self.world.buildings);
            let link = &self.links[ut][bs];
            if now_los != link.los.los {
                let condition = if indoor {
                    Condition::O2i
                } else if now_los {
                    Condition::Los
                } else {
                    Condition::Nlos
                };
                let sigma = shadow_sigma_db(
                    self.world.params.kind,
                    condition,
                    self.world.grid.fc_hz,
                    geo.d2d,
                    bs_pos.z,
                    ut_pos.z,
                    self.world.optional_nlos,
                );
                let table = self.table_for(condition)?;
                let link = &mut self.links[ut][bs];
                link.los = LosCondition {
                    los: now_los,
                    source: LosSource::Geometric,
                };
                link.condition = condition;
                link.shadow =
                    ShadowingState::init(ut_pos, sigma, table.corr_dist.sf, &mut link.shadow_rng);
                link.lsps = None;
                link.realization = None;
            }
        }

        // Pathloss + shadowing + O2I.
        let pl = self.pathloss_for(&self.links[ut][bs], geo.d2d, geo.d3d, bs_pos.z)?;
        let link = &mut self.links[ut][bs];
        let shadow_db = if self.world.shadowing {
            let rng = &mut link.shadow_rng;
            link.shadow.update(ut_pos, rng)
        } else {
            T::zero()
        };
        link.last_loss = Some(PathlossResult::new(pl, shadow_db, link.o2i_db));

        // Channel generation / update.
        let table = self.table_for(self.links[ut][bs].condition)?;
        let fc = self.world.grid.fc_hz;
        let needs_generation = self.links[ut][bs].realization.is_none();
        let tx_panel = self.world.bs[bs].panel.clone();
        let rx_panel = self.world.ut[ut].panel.clone();

        let dep = ut_pos - bs_pos;
        let los_angles = LosAngles {
            aod: dep.azimuth(),
            zod: dep.zenith(),
            aoa: (-dep).azimuth(),
            zoa: (-dep).zenith(),
        };

        let mut channel_changed = false;
        // The rebuild inside an update invalidates the cached vectors;
        // remember them for the frozen-beam policy.
        let saved_bf = {
            let link = &self.links[ut][bs];
            link.realization
                .as_ref()
                .and_then(|r| r.tx_bf.clone().zip(r.rx_bf.clone()))
        };
        if needs_generation {
            let condition = self.links[ut][bs].condition;
            let factor = factor_from_matrix(&table.cross_corr);
            let g = LspGeometry {
                fc_hz: fc,
                d2d_m: geo.d2d,
                h_ut_m: ut_pos.z,
                h_bs_m: bs_pos.z,
            };
            let link = &mut self.links[ut][bs];
            let mut lsp_rng = stream(
                self.world.master_seed,
                bs,
                self.world.bs.len() + ut,
                Feature::Lsp,
            );
            let lsps = generate_lsps(
                self.world.params.kind,
                condition,
                g,
                &table,
                &factor,
                &mut lsp_rng,
            );
            let fading_los = link.los.los && !indoor;
            let inputs = FadingInputs {
                los: fading_los,
                indoor_ut: indoor,
                lsps: &lsps,
                table: &table,
                fc_hz: fc,
                tx_panel: &tx_panel,
                rx_panel: &rx_panel,
                los_angles,
                d3d_m: geo.d3d,
                t,
            };
            let mut real = generate_channel(&inputs, &mut link.fading_rng)?;
            if self.world.update.blockage {
                let blockers = generate_blockers(
                    self.world.params.kind,
                    self.world.orientation,
                    self.world.blockage_k,
                    &mut link.blockage_rng,
                );
                real.blockage_db = crate::dynamics::apply_blockage(&real, &blockers);
                real.rebuild_coefficients(&tx_panel, &rx_panel);
                link.blockers = Some(blockers);
            }
            link.lsps = Some(lsps);
            link.realization = Some(real);
            link.last_update_t = t;
            channel_changed = true;
        } else {
            // Periodic update for mobile UTs.
            let link = &mut self.links[ut][bs];
            let elapsed = t - link.last_update_t;
            let mobile = ut_vel.dot(ut_vel) > T::zero();
            let due = elapsed >= self.world.update.t_per - T::of(1e-9);
            let features_on = self.world.update.spatial_consistency || self.world.update.blockage;
            if mobile && due && features_on {
                let real = link.realization.as_mut().expect("checked above");
                tick_update(
                    real,
                    &self.world.update,
                    elapsed,
                    ut_vel,
                    &tx_panel,
                    &rx_panel,
                    link.blockers.as_mut(),
                    &mut link.blockage_rng,
                );
                if self.world.update.redraw_phases {
                    let (phases, los_phase) = crate::small_scale::initial_phases(
                        real.num_clusters(),
                        real.ctx.rays_per_cluster,
                        &mut link.fading_rng,
                    );
                    real.phases = phases;
                    real.los_phase = los_phase;
                    real.rebuild_coefficients(&tx_panel, &rx_panel);
                }
                link.last_update_t = t;
                channel_changed = true;
            }
        }

        // Beamforming for serving links.
        if serving {
            let recompute = match self.world.bf_update {
                UpdatePolicy::OnChange => channel_changed,
                UpdatePolicy::Frozen => needs_generation,
            };
            if recompute {
                let link = &mut self.links[ut][bs];
                let real = link.realization.as_mut().expect("generated above");
                let (w_tx, w_rx) = match self.world.bf_method {
                    BeamformingMethod::PowerMethod => {
                        let h = collapse_channel(&real.tensor);
                        power_method(
                            &h,
                            T::of(POWER_METHOD_THRESHOLD),
                            POWER_METHOD_MAX_ITER,
                            &mut link.fading_rng,
                        )?
                    }
                    BeamformingMethod::CellScan => {
                        let scan = cell_scan(real, &tx_panel, &rx_panel)?;
                        (scan.w_tx, scan.w_rx)
                    }
                };
                set_beamforming(real, w_tx, w_rx)?;
            } else if channel_changed {
                // Frozen policy: re-attach the pre-update vectors to the
                // updated channel so the long-term cache stays consistent.
                if let Some((w_tx, w_rx)) = saved_bf {
                    let link = &mut self.links[ut][bs];
                    let real = link.realization.as_mut().expect("generated above");
                    set_beamforming(real, w_tx, w_rx)?;
                }
            }
        }
        Ok(())
    }

    /// Collapsed serving channel, for diagnostics.
    pub fn serving_collapsed(&self, ut: usize) -> Option<Array2<Complex<T>>> {
        self.serving_realization(ut)
            .map(|r| collapse_channel(&r.tensor))
    }

    pub fn world(&self) -> &World<T> {
        &self.world
    }
}
