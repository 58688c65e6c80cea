//! Channel evolution over time: spatial-consistency updates (Procedure A)
//! and blockage model A.
//!
//! Procedure A drifts the cluster delays and the four angle sets
//! deterministically with the UT motion, using each cluster's absolute
//! delay as the geometric lever arm; powers are recomputed from the
//! drifted delays with the carried per-cluster shadowing, and the ray
//! phases and couplings are carried forward. Each update chains from the
//! previous realization, not the initial one.
//!
//! Blockage model A attenuates clusters whose arrival direction falls
//! inside one self-blocking region (fixed per device orientation, 30 dB)
//! or inside one of K non-self regions (knife-edge attenuation, centers
//! time-correlated with UT displacement). When both features run in one
//! tick, the blockage update precedes the coefficient recomputation.

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use crate::antenna::AntennaPanel;
use crate::geom::{reflect_zenith, wrap_to_pi, wrap_to_two_pi, Vec3};
use crate::num::Float;
use crate::scenario::Scenario;
use crate::small_scale::{apply_ricean_split, raw_power_profile, ChannelRealization};
use crate::SPEED_OF_LIGHT;

/// Per-link channel update configuration.
#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig<T> {
    /// Update period in seconds (100 ms default).
    pub t_per: T,
    pub spatial_consistency: bool,
    pub blockage: bool,
    /// Escape hatch: redraw the per-ray initial phases at every update
    /// instead of carrying them (off by default, which is the spatially
    /// consistent behavior).
    pub redraw_phases: bool,
}

impl<T: Float> Default for UpdateConfig<T> {
    fn default() -> Self {
        Self {
            t_per: T::of(0.1),
            spatial_consistency: true,
            blockage: false,
            redraw_phases: false,
        }
    }
}

/// UT device orientation, selecting the self-blocking region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Portrait,
    Landscape,
}

/// Angular box over (azimuth, zenith), all radians.
#[derive(Debug, Clone, Copy)]
pub struct AngularRegion<T> {
    pub az_center: T,
    pub az_width: T,
    pub zen_center: T,
    pub zen_width: T,
}

impl<T: Float> AngularRegion<T> {
    pub fn contains(&self, azimuth: T, zenith: T) -> bool {
        let two = T::of(2.0);
        wrap_to_pi(azimuth - self.az_center).abs() <= self.az_width / two
            && (zenith - self.zen_center).abs() <= self.zen_width / two
    }
}

/// One non-self blocking region with its blocker distance.
#[derive(Debug, Clone, Copy)]
pub struct NonSelfRegion<T> {
    pub region: AngularRegion<T>,
    /// Blocker distance in meters (10 m outdoor, 2 m indoor).
    pub r_m: T,
}

/// Self-blocking attenuation in dB.
pub const SELF_BLOCKING_DB: f64 = 30.0;

/// K + 1 angular blocking regions with time-correlated non-self centers.
#[derive(Debug, Clone)]
pub struct BlockageState<T> {
    pub self_region: AngularRegion<T>,
    pub nonself: Vec<NonSelfRegion<T>>,
    /// Correlation distance of the non-self center motion, meters.
    pub d_corr_m: T,
    pub orientation: Orientation,
}

/// Self-blocking region per orientation (azimuth center/width, zenith
/// center/width in degrees).
fn self_region<T: Float>(orientation: Orientation) -> AngularRegion<T> {
    let deg = |v: f64| T::of(v).to_radians();
    match orientation {
        Orientation::Portrait => AngularRegion {
            az_center: deg(260.0),
            az_width: deg(120.0),
            zen_center: deg(100.0),
            zen_width: deg(80.0),
        },
        Orientation::Landscape => AngularRegion {
            az_center: deg(40.0),
            az_width: deg(160.0),
            zen_center: deg(110.0),
            zen_width: deg(75.0),
        },
    }
}

/// Draw the self region plus K non-self regions.
///
/// Non-self centers are uniform in azimuth at a fixed 90-degree zenith;
/// widths are scenario-dependent, with zenith extents capped at 10 degrees
/// outdoor and 30 degrees indoor. The regions are drawn sequentially, so
/// the first K regions of a larger-K draw from the same stream coincide.
pub fn generate_blockers<T: Float, R: Rng + ?Sized>(
    scenario: Scenario,
    orientation: Orientation,
    k: usize,
    rng: &mut R,
) -> BlockageState<T> {
    let indoor = scenario.is_indoor();
    let deg = |v: T| v.to_radians();
    let nonself = (0..k)
        .map(|_| {
            let az_center = T::uniform_01(rng) * T::of(360.0);
            let az_width = if indoor {
                T::of(15.0) + T::of(30.0) * T::uniform_01(rng)
            } else {
                T::of(5.0) + T::of(10.0) * T::uniform_01(rng)
            };
            let zen_width = if indoor {
                T::of(15.0) + T::of(15.0) * T::uniform_01(rng)
            } else {
                T::of(10.0)
            };
            NonSelfRegion {
                region: AngularRegion {
                    az_center: deg(az_center),
                    az_width: deg(az_width),
                    zen_center: T::FRAC_PI_2(),
                    zen_width: deg(zen_width),
                },
                r_m: if indoor { T::of(2.0) } else { T::of(10.0) },
            }
        })
        .collect();
    BlockageState {
        self_region: self_region(orientation),
        nonself,
        d_corr_m: if indoor { T::of(5.0) } else { T::of(10.0) },
        orientation,
    }
}

/// Move the non-self region centers for a UT displacement: a wrapped
/// random walk in azimuth with step scale `sqrt(1 - R^2) * pi`,
/// `R = exp(-dd/d_corr)`, mirroring the shadowing filter. Zenith centers
/// stay fixed; the self region does not move.
pub fn evolve_blockers<T: Float, R: Rng + ?Sized>(
    state: &mut BlockageState<T>,
    delta_d2d: T,
    rng: &mut R,
) {
    if delta_d2d <= T::zero() {
        return;
    }
    let r = (-delta_d2d / state.d_corr_m).exp();
    let step_scale = (T::one() - r * r).sqrt() * T::PI();
    for ns in state.nonself.iter_mut() {
        let z = T::standard_normal(rng);
        ns.region.az_center = wrap_to_two_pi(ns.region.az_center + step_scale * z);
    }
}

/// Knife-edge attenuation of a cluster inside one non-self region, dB.
fn knife_edge_db<T: Float>(
    azimuth: T,
    zenith: T,
    region: &AngularRegion<T>,
    r_m: T,
    lambda_m: T,
) -> T {
    let two = T::of(2.0);
    let edge_term = |x: T| -> T {
        // atan((pi/2) * sqrt(pi/lambda * r * (1/cos(x) - 1))) / pi
        let c = x.cos();
        if c <= T::of(1e-9) {
            return T::of(0.5);
        }
        let arg = (T::PI() / lambda_m * r_m * (T::one() / c - T::one())).max(T::zero());
        ((T::PI() / two) * arg.sqrt()).atan() / T::PI()
    };
    let a1 = wrap_to_pi(azimuth - (region.az_center + region.az_width / two));
    let a2 = wrap_to_pi(azimuth - (region.az_center - region.az_width / two));
    let z1 = zenith - (region.zen_center + region.zen_width / two);
    let z2 = zenith - (region.zen_center - region.zen_width / two);
    let f = (edge_term(a1) + edge_term(a2)) * (edge_term(z1) + edge_term(z2));
    let arg = (T::one() - f).max(T::of(1e-10));
    (-T::of(20.0) * arg.log10()).max(T::zero())
}

/// Per-cluster attenuation in dB from the current blocker state.
///
/// A cluster inside the self region loses a flat 30 dB; one inside a
/// non-self region takes the knife-edge loss; attenuations from multiple
/// regions add in dB. Never negative.
pub fn apply_blockage<T: Float>(
    realization: &ChannelRealization<T>,
    state: &BlockageState<T>,
) -> Vec<T> {
    (0..realization.num_clusters())
        .map(|n| {
            let az = realization.angles.aoa[n];
            let zen = realization.angles.zoa[n];
            let mut att = T::zero();
            if state.self_region.contains(az, zen) {
                att += T::of(SELF_BLOCKING_DB);
            }
            for ns in &state.nonself {
                if ns.region.contains(az, zen) {
                    att += knife_edge_db(az, zen, &ns.region, ns.r_m, realization.ctx.lambda_m);
                }
            }
            att
        })
        .collect()
}

/// Procedure A drift of delays, angles and powers (no tensor rebuild).
fn procedure_a_drift<T: Float>(real: &mut ChannelRealization<T>, delta_t: T, v: Vec3<T>) {
    if v.dot(v) == T::zero() {
        // Zero displacement is an exact identity on delays, angles and
        // powers; re-normalizing the delays would cost low bits.
        real.generated_at += delta_t;
        return;
    }
    let c = T::of(SPEED_OF_LIGHT);
    let n = real.num_clusters();

    // Absolute delays are the drift state; the stored delays re-normalize
    // to a zero first arrival afterwards.
    let mut abs: Vec<T> = real
        .delays
        .iter()
        .map(|&d| d + real.abs_delay_offset)
        .collect();
    for (i, a) in abs.iter_mut().enumerate() {
        let r_rx = Vec3::from_spherical(real.angles.zoa[i], real.angles.aoa[i]);
        *a -= r_rx.dot(v) * delta_t / c;
    }
    let min = abs.iter().cloned().fold(T::infinity(), T::min);
    for (i, a) in abs.iter().enumerate() {
        real.delays[i] = *a - min;
    }
    real.abs_delay_offset = min;

    // Angle drift, using the updated absolute delay as the lever arm.
    for i in 0..n {
        let lever = (c * abs[i]).max(T::of(1e-3));
        let aoa = real.angles.aoa[i];
        let zoa = real.angles.zoa[i];
        let aod = real.angles.aod[i];
        let zod = real.angles.zod[i];
        let sin_zoa = zoa.sin().max(T::of(1e-6));
        let sin_zod = zod.sin().max(T::of(1e-6));

        let d_aoa =
            v.dot(Vec3::new(aoa.sin(), -aoa.cos(), T::zero())) * delta_t / (lever * sin_zoa);
        let d_aod =
            v.dot(Vec3::new(-aod.sin(), aod.cos(), T::zero())) * delta_t / (lever * sin_zod);
        let d_zoa = -v.dot(Vec3::new(
            zoa.cos() * aoa.cos(),
            zoa.cos() * aoa.sin(),
            -zoa.sin(),
        )) * delta_t
            / lever;
        let d_zod = v.dot(Vec3::new(
            zod.cos() * aod.cos(),
            zod.cos() * aod.sin(),
            -zod.sin(),
        )) * delta_t
            / lever;

        real.angles.aoa[i] = wrap_to_two_pi(aoa + d_aoa);
        real.angles.aod[i] = wrap_to_two_pi(aod + d_aod);
        real.angles.zoa[i] = reflect_zenith(zoa + d_zoa);
        real.angles.zod[i] = reflect_zenith(zod + d_zod);
    }

    // Step-6 powers from the drifted delays with the carried shadowing.
    let raw = raw_power_profile(
        &real.delays,
        real.ctx.ds_s,
        real.ctx.r_tau,
        &real.cluster_shadow_db,
    );
    real.powers = apply_ricean_split(&raw, real.k_r);
    real.generated_at += delta_t;
}

/// Spatial-consistency update: drift the realization by `delta_t` under
/// velocity `v` and rebuild the coefficient tensor with the carried
/// phases and couplings. A zero velocity is an exact identity.
pub fn update_channel<T: Float>(
    real: &mut ChannelRealization<T>,
    delta_t: T,
    v: Vec3<T>,
    tx_panel: &AntennaPanel<T>,
    rx_panel: &AntennaPanel<T>,
) {
    procedure_a_drift(real, delta_t, v);
    real.rebuild_coefficients(tx_panel, rx_panel);
}

/// One synchronized update tick: blockage first (region motion, then
/// per-cluster attenuation from the pre-drift arrival angles), then the
/// Procedure A drift, then a single coefficient rebuild reflecting both.
/// Returns the ordered list of stages that ran, for trace assertions.
#[allow(clippy::too_many_arguments)]
pub fn tick_update<T: Float, R: Rng + ?Sized>(
    real: &mut ChannelRealization<T>,
    cfg: &UpdateConfig<T>,
    delta_t: T,
    v: Vec3<T>,
    tx_panel: &AntennaPanel<T>,
    rx_panel: &AntennaPanel<T>,
    blockers: Option<&mut BlockageState<T>>,
    rng: &mut R,
) -> Vec<&'static str> {
    let mut order = Vec::new();
    if cfg.blockage {
        if let Some(state) = blockers {
            let delta_d2d = v.norm_2d() * delta_t;
            evolve_blockers(state, delta_d2d, rng);
            real.blockage_db = apply_blockage(real, state);
            order.push("blockage");
        }
    }
    if cfg.spatial_consistency {
        procedure_a_drift(real, delta_t, v);
        order.push("procedure_a");
    }
    real.rebuild_coefficients(tx_panel, rx_panel);
    order.push("coefficients");
    order
}
