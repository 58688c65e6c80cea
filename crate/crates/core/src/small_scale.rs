//! Cluster-level fading: steps 5-11 of the TR 38.900 procedure.
//!
//! Produces the channel coefficient tensor `H_hat` of size U x S x N_v
//! (rx antennas x tx antennas x valid clusters) together with the cluster
//! delays, powers, angles and per-ray phases. The Doppler phasor is *not*
//! baked into the tensor: it is applied at gain time from the stored
//! per-cluster central arrival angles, which allows the long-term terms of
//! the beamforming gain to be cached.
//!
//! The two strongest stochastic clusters expand into three sub-clusters
//! each, with fixed delay offsets `{0, 1.28, 2.56} * c_DS` and the fixed
//! 10/6/4 ray partition. In LOS the first cluster is the deterministic
//! Ricean ray carrying exactly `K_R/(K_R+1)` of the power, and the
//! remaining clusters share `1/(K_R+1)`.

use std::io::Write;

use ndarray::Array3;
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::antenna::AntennaPanel;
use crate::geom::{reflect_zenith, wrap_to_two_pi, Vec3};
use crate::large_scale::LspSet;
use crate::num::{db_to_lin, uniform_phase, Float};
use crate::params::LspTable;
use crate::{Result, SPEED_OF_LIGHT};

/// Ray offset angles alpha_m (TR 38.900 Table 7.5-3), unit RMS, for M = 20.
pub const RAY_OFFSETS: [f64; 20] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797,
    -0.6797, 0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

/// Sub-cluster ray partition of the two strongest clusters (TR Table
/// 7.5-5), zero-based ray indices; delay offsets 0 / 1.28 / 2.56 * c_DS.
pub const SUBCLUSTER_RAYS: [&[usize]; 3] = [
    &[0, 1, 2, 3, 4, 5, 6, 7, 18, 19],
    &[8, 9, 10, 11, 16, 17],
    &[12, 13, 14, 15],
];

/// Sub-cluster delay offsets in units of c_DS.
pub const SUBCLUSTER_DELAY_SCALE: [f64; 3] = [0.0, 1.28, 2.56];

/// Cluster pruning window: clusters more than 25 dB below the strongest
/// are dropped.
pub const PRUNE_WINDOW_DB: f64 = 25.0;

/// Interpolate a (N, value) table at `n`, clamping outside the tabulated
/// range. The TR only lists specific cluster counts; custom tables with
/// other N get the interpolated factor.
fn interp_by_n<T: Float>(table: &[(usize, f64)], n: usize) -> T {
    if let Some(&(_, v)) = table.iter().find(|&&(k, _)| k == n) {
        return T::of(v);
    }
    if n <= table[0].0 {
        return T::of(table[0].1);
    }
    if n >= table[table.len() - 1].0 {
        return T::of(table[table.len() - 1].1);
    }
    let hi = table.iter().position(|&(k, _)| k > n).expect("inside range");
    let (n0, v0) = table[hi - 1];
    let (n1, v1) = table[hi];
    let frac = (n - n0) as f64 / (n1 - n0) as f64;
    T::of(v0 + frac * (v1 - v0))
}

/// Azimuth angle scaling factor C_phi (TR Table 7.5-2). For LOS the
/// NLOS value is scaled by the K-dependent polynomial (K in dB).
pub fn azimuth_scaling_factor<T: Float>(n_clusters: usize, k_db: Option<T>) -> T {
    const TABLE: [(usize, f64); 12] = [
        (4, 0.779),
        (5, 0.860),
        (8, 1.018),
        (10, 1.090),
        (11, 1.123),
        (12, 1.146),
        (14, 1.190),
        (15, 1.211),
        (16, 1.226),
        (19, 1.273),
        (20, 1.289),
        (25, 1.358),
    ];
    let base: T = interp_by_n(&TABLE, n_clusters);
    match k_db {
        Some(k) => {
            base * (T::of(1.1035) - T::of(0.028) * k - T::of(0.002) * k * k
                + T::of(0.0001) * k * k * k)
        }
        None => base,
    }
}

/// Zenith angle scaling factor C_theta (TR Table 7.5-4).
pub fn zenith_scaling_factor<T: Float>(n_clusters: usize, k_db: Option<T>) -> T {
    const TABLE: [(usize, f64); 8] = [
        (8, 0.889),
        (10, 0.957),
        (11, 1.031),
        (12, 1.104),
        (15, 1.1088),
        (19, 1.184),
        (20, 1.178),
        (25, 1.282),
    ];
    let base: T = interp_by_n(&TABLE, n_clusters);
    match k_db {
        Some(k) => {
            base * (T::of(1.3086) + T::of(0.0339) * k - T::of(0.0077) * k * k
                + T::of(0.0002) * k * k * k)
        }
        None => base,
    }
}

/// LOS delay spread compensation factor C_tau (K in dB).
pub fn los_delay_scaling<T: Float>(k_db: T) -> T {
    T::of(0.7705) - T::of(0.0433) * k_db + T::of(0.0002) * k_db * k_db
        + T::of(0.000017) * k_db * k_db * k_db
}

/// Step 5 output: normalized cluster delays.
#[derive(Debug, Clone)]
pub struct ClusterDelays<T> {
    /// Sorted ascending, first element 0; these are the delays stored in
    /// the realization and used for the coefficient phases.
    pub delays: Vec<T>,
    /// LOS spread-compensated variant `delays / C_tau` (equal to `delays`
    /// for NLOS); used only where the compensated spread matters.
    pub los_scaled: Vec<T>,
}

/// Step 5: draw exponential delays scaled by `r_tau * DS`, subtract the
/// minimum and sort.
pub fn cluster_delays<T: Float, R: Rng + ?Sized>(
    ds_s: T,
    r_tau: T,
    n_clusters: usize,
    k_r: Option<T>,
    rng: &mut R,
) -> ClusterDelays<T> {
    let mut delays: Vec<T> = (0..n_clusters)
        .map(|_| {
            // U(0,1) can return exactly 0; nudge to keep ln finite.
            let u = T::uniform_01(rng).max(T::of(1e-300));
            -r_tau * ds_s * u.ln()
        })
        .collect();
    let min = delays.iter().cloned().fold(T::infinity(), T::min);
    for d in delays.iter_mut() {
        *d -= min;
    }
    delays.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    let los_scaled = match k_r {
        Some(k) => {
            let k_db = T::of(10.0) * k.log10();
            let c_tau = los_delay_scaling(k_db);
            delays.iter().map(|&d| d / c_tau).collect()
        }
        None => delays.clone(),
    };
    ClusterDelays { delays, los_scaled }
}

/// Step 6 output.
#[derive(Debug, Clone)]
pub struct ClusterPowers<T> {
    /// Final powers (unit sum before pruning; LOS re-weighted).
    pub powers: Vec<T>,
    /// Pruning mask: true for clusters within 25 dB of the strongest.
    pub kept: Vec<bool>,
    /// Per-cluster shadowing draws in dB, carried for later power updates.
    pub shadow_db: Vec<T>,
}

/// Step 6: exponential power-delay profile with per-cluster lognormal
/// shadowing, normalized to unit sum. In LOS the first cluster carries
/// `K_R/(K_R+1)` and the remaining clusters share `1/(K_R+1)`
/// proportionally. Clusters more than 25 dB below the strongest are pruned.
pub fn cluster_powers<T: Float, R: Rng + ?Sized>(
    delays: &[T],
    ds_s: T,
    r_tau: T,
    zeta_db: T,
    k_r: Option<T>,
    rng: &mut R,
) -> ClusterPowers<T> {
    let shadow_db: Vec<T> = delays.iter().map(|_| zeta_db * T::standard_normal(rng)).collect();
    let raw = raw_power_profile(delays, ds_s, r_tau, &shadow_db);
    let powers = apply_ricean_split(&raw, k_r);
    let kept = prune_mask(&powers, T::of(PRUNE_WINDOW_DB));
    assert!(
        kept.iter().any(|&k| k),
        "pruning removed every cluster; the strongest always survives"
    );
    ClusterPowers {
        powers,
        kept,
        shadow_db,
    }
}

/// Exponential power-delay profile with fixed shadowing draws (shared by
/// generation and the spatial-consistency power recomputation).
pub fn raw_power_profile<T: Float>(delays: &[T], ds_s: T, r_tau: T, shadow_db: &[T]) -> Vec<T> {
    delays
        .iter()
        .zip(shadow_db.iter())
        .map(|(&d, &z)| {
            (-d * (r_tau - T::one()) / (r_tau * ds_s)).exp() * db_to_lin(-z)
        })
        .collect()
}

/// Normalize a raw profile to unit sum and apply the LOS Ricean split.
pub fn apply_ricean_split<T: Float>(raw: &[T], k_r: Option<T>) -> Vec<T> {
    let total: T = raw.iter().cloned().sum();
    match k_r {
        None => raw.iter().map(|&p| p / total).collect(),
        Some(k) => {
            let first = k / (k + T::one());
            if raw.len() == 1 {
                // No other clusters to share the stochastic fraction.
                return vec![T::one()];
            }
            let rest: T = raw[1..].iter().cloned().sum();
            let scale = (T::one() / (k + T::one())) / rest;
            let mut out = Vec::with_capacity(raw.len());
            out.push(first);
            out.extend(raw[1..].iter().map(|&p| p * scale));
            out
        }
    }
}

/// Keep clusters whose power is within `window_db` of the strongest.
pub fn prune_mask<T: Float>(powers: &[T], window_db: T) -> Vec<bool> {
    let max = powers.iter().cloned().fold(T::zero(), T::max);
    let floor = max * db_to_lin(-window_db);
    powers.iter().map(|&p| p >= floor).collect()
}

/// Central and ray angles of the kept clusters, all in radians.
/// Azimuths live in [0, 2pi), zeniths in [0, pi].
#[derive(Debug, Clone)]
pub struct ClusterAngles<T> {
    pub aoa: Vec<T>,
    pub zoa: Vec<T>,
    pub aod: Vec<T>,
    pub zod: Vec<T>,
    /// Per-cluster ray coupling: the tx azimuth of ray m is built from
    /// offset index `aod_perm[n][m]`.
    pub aod_perm: Vec<Vec<usize>>,
    pub zod_perm: Vec<Vec<usize>>,
}

/// Geometric LOS pointing angles of the link, radians.
#[derive(Debug, Clone, Copy)]
pub struct LosAngles<T> {
    pub aod: T,
    pub zod: T,
    pub aoa: T,
    pub zoa: T,
}

/// Steps 7-8: per-cluster central angles from the inverse mappings of the
/// TR, random sign/dither, LOS re-centering so cluster 1 aligns with the
/// geometric direction, and random ray coupling.
#[allow(clippy::too_many_arguments)]
pub fn ray_angles<T: Float, R: Rng + ?Sized>(
    lsps: &LspSet<T>,
    powers: &[T],
    k_r: Option<T>,
    los: LosAngles<T>,
    indoor_ut: bool,
    table_clusters: usize,
    rays_per_cluster: usize,
    rng: &mut R,
) -> ClusterAngles<T> {
    let n = powers.len();
    let k_db = k_r.map(|k| T::of(10.0) * k.log10());
    let c_phi = azimuth_scaling_factor(table_clusters, k_db);
    let c_theta = zenith_scaling_factor(table_clusters, k_db);
    let p_max = powers.iter().cloned().fold(T::zero(), T::max);
    let los_flag = k_r.is_some();

    // Relative power term; the LOS specular cluster has ln(1) = 0.
    let ratio = |p: T| (p / p_max).max(T::of(1e-30));

    let draw_signs_dither = |rng: &mut R, spread_deg: T| -> (Vec<T>, Vec<T>) {
        let signs = (0..n)
            .map(|_| {
                if T::uniform_01(rng) < T::of(0.5) {
                    -T::one()
                } else {
                    T::one()
                }
            })
            .collect();
        let dither = (0..n)
            .map(|_| spread_deg / T::of(7.0) * T::standard_normal(rng))
            .collect();
        (signs, dither)
    };

    // Azimuth generation in degrees, recentering in the LOS case.
    let azimuths = |rng: &mut R, spread_deg: T, center_deg: T| -> Vec<T> {
        let (signs, dither) = draw_signs_dither(rng, spread_deg);
        let primed: Vec<T> = powers
            .iter()
            .map(|&p| T::of(2.0) * (spread_deg / T::of(1.4)) * (-(ratio(p).ln())).sqrt() / c_phi)
            .collect();
        let correction = if los_flag {
            signs[0] * primed[0] + dither[0] - center_deg
        } else {
            T::zero()
        };
        (0..n)
            .map(|i| {
                let raw = signs[i] * primed[i] + dither[i];
                if los_flag {
                    raw - correction
                } else {
                    raw + center_deg
                }
            })
            .collect()
    };

    let zeniths = |rng: &mut R, spread_deg: T, center_deg: T, offset_deg: T| -> Vec<T> {
        let (signs, dither) = draw_signs_dither(rng, spread_deg);
        let primed: Vec<T> = powers
            .iter()
            .map(|&p| -(spread_deg * ratio(p).ln()) / c_theta)
            .collect();
        let correction = if los_flag {
            signs[0] * primed[0] + dither[0] - center_deg
        } else {
            T::zero()
        };
        (0..n)
            .map(|i| {
                let raw = signs[i] * primed[i] + dither[i];
                if los_flag {
                    raw - correction + offset_deg
                } else {
                    raw + center_deg + offset_deg
                }
            })
            .collect()
    };

    let aoa_deg = azimuths(rng, lsps.asa_deg, los.aoa.to_degrees());
    let aod_deg = azimuths(rng, lsps.asd_deg, los.aod.to_degrees());
    // Indoor UTs take the 90-degree arrival zenith mean of the TR.
    let zoa_center = if indoor_ut {
        T::of(90.0)
    } else {
        los.zoa.to_degrees()
    };
    let zoa_deg = zeniths(rng, lsps.zsa_deg, zoa_center, T::zero());
    let zod_deg = zeniths(rng, lsps.zsd_deg, los.zod.to_degrees(), lsps.zod_offset_deg);

    let mut perm: Vec<usize> = (0..rays_per_cluster).collect();
    let mut aod_perm = Vec::with_capacity(n);
    let mut zod_perm = Vec::with_capacity(n);
    for _ in 0..n {
        perm.shuffle(rng);
        aod_perm.push(perm.clone());
        perm.shuffle(rng);
        zod_perm.push(perm.clone());
    }

    ClusterAngles {
        aoa: aoa_deg.iter().map(|&d| wrap_to_two_pi(d.to_radians())).collect(),
        zoa: zoa_deg.iter().map(|&d| reflect_zenith(d.to_radians())).collect(),
        aod: aod_deg.iter().map(|&d| wrap_to_two_pi(d.to_radians())).collect(),
        zod: zod_deg.iter().map(|&d| reflect_zenith(d.to_radians())).collect(),
        aod_perm,
        zod_perm,
    }
}

/// Step 10: iid U(-pi, pi] initial phases per ray plus the LOS phase
/// (vertical polarization only; step 9 is skipped).
pub fn initial_phases<T: Float, R: Rng + ?Sized>(
    n_clusters: usize,
    rays: usize,
    rng: &mut R,
) -> (Vec<Vec<T>>, T) {
    let phases = (0..n_clusters)
        .map(|_| (0..rays).map(|_| uniform_phase(rng)).collect())
        .collect();
    (phases, uniform_phase(rng))
}

/// Table-derived constants the coefficient rebuild needs; kept in the
/// realization so spatial-consistency updates can rebuild the tensor.
#[derive(Debug, Clone, Copy)]
pub struct FadingContext<T> {
    pub ds_s: T,
    pub r_tau: T,
    pub rays_per_cluster: usize,
    pub c_asa_deg: T,
    pub c_asd_deg: T,
    pub c_zsa_deg: T,
    /// ZOD ray spread: (3/8) * 10^mu_lgZSD degrees.
    pub zod_ray_spread_deg: T,
    pub c_ds_s: T,
    pub lambda_m: T,
}

/// Full output of the fading procedure for one link.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    pub los: bool,
    pub k_r: Option<T>,
    /// Kept-cluster delays, sorted, first = 0 (normalization re-applied
    /// after pruning).
    pub delays: Vec<T>,
    /// Kept-cluster powers before blockage, unit sum pre-pruning.
    pub powers: Vec<T>,
    /// Current blockage attenuation per cluster in dB (0 = unblocked).
    pub blockage_db: Vec<T>,
    /// Central angles per kept cluster.
    pub angles: ClusterAngles<T>,
    /// Per-ray initial phases, kept clusters.
    pub phases: Vec<Vec<T>>,
    pub los_phase: T,
    /// Per-cluster shadowing draws carried for power recomputation.
    pub cluster_shadow_db: Vec<T>,
    /// Indices (into the kept-cluster vectors) of the clusters expanded
    /// into sub-clusters; fixed at generation.
    pub split: Vec<usize>,
    pub ctx: FadingContext<T>,
    /// Absolute first-arrival delay (propagation included) used as the
    /// anchor by spatial-consistency updates.
    pub abs_delay_offset: T,
    pub generated_at: T,
    /// Expanded cluster delays (sub-cluster offsets applied).
    pub exp_delays: Vec<T>,
    /// Expanded cluster powers (blockage applied, ray-partition fractions).
    pub exp_powers: Vec<T>,
    /// Parent kept-cluster index per expanded cluster.
    pub exp_parent: Vec<usize>,
    /// Channel coefficient tensor, U x S x N_expanded.
    pub tensor: Array3<Complex<T>>,
    /// Beamforming state, filled in by the beamforming module. The long
    /// term vector is kept consistent with (tensor, tx_bf, rx_bf).
    pub tx_bf: Option<crate::antenna::BeamformingVector<T>>,
    pub rx_bf: Option<crate::antenna::BeamformingVector<T>>,
    pub long_term: Option<Vec<Complex<T>>>,
}

/// Everything `generate_channel` needs to know about the link.
pub struct FadingInputs<'a, T> {
    /// Whether the link is LOS *for fading purposes* (outdoor LOS state;
    /// indoor UTs use the O2I table without a Ricean component).
    pub los: bool,
    pub indoor_ut: bool,
    pub lsps: &'a LspSet<T>,
    pub table: &'a LspTable<T>,
    pub fc_hz: T,
    pub tx_panel: &'a AntennaPanel<T>,
    pub rx_panel: &'a AntennaPanel<T>,
    pub los_angles: LosAngles<T>,
    pub d3d_m: T,
    pub t: T,
}

/// Run steps 5-11 and assemble the realization.
pub fn generate_channel<T: Float, R: Rng + ?Sized>(
    inputs: &FadingInputs<'_, T>,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    let table = inputs.table;
    let lsps = inputs.lsps;
    let k_r = if inputs.los { lsps.k_r } else { None };

    let delays = cluster_delays(lsps.ds_s, table.r_tau, table.num_clusters, k_r, rng);
    let powers = cluster_powers(
        &delays.delays,
        lsps.ds_s,
        table.r_tau,
        table.zeta_db,
        k_r,
        rng,
    );

    // Restrict to the kept clusters, re-normalizing delays to start at 0.
    let kept_idx: Vec<usize> = (0..powers.powers.len())
        .filter(|&i| powers.kept[i])
        .collect();
    let mut kept_delays: Vec<T> = kept_idx.iter().map(|&i| delays.delays[i]).collect();
    let delay_shift = kept_delays.iter().cloned().fold(T::infinity(), T::min);
    for d in kept_delays.iter_mut() {
        *d -= delay_shift;
    }
    let kept_powers: Vec<T> = kept_idx.iter().map(|&i| powers.powers[i]).collect();
    let kept_shadow: Vec<T> = kept_idx.iter().map(|&i| powers.shadow_db[i]).collect();

    let angles = ray_angles(
        lsps,
        &kept_powers,
        k_r,
        inputs.los_angles,
        inputs.indoor_ut,
        table.num_clusters,
        table.rays_per_cluster,
        rng,
    );
    let (phases, los_phase) = initial_phases(kept_powers.len(), table.rays_per_cluster, rng);

    let lambda = T::of(SPEED_OF_LIGHT) / inputs.fc_hz;
    let fc_ghz = inputs.fc_hz / T::of(1e9);
    let ctx = FadingContext {
        ds_s: lsps.ds_s,
        r_tau: table.r_tau,
        rays_per_cluster: table.rays_per_cluster,
        c_asa_deg: table.c_asa_deg,
        c_asd_deg: table.c_asd_deg,
        c_zsa_deg: table.c_zsa_deg,
        zod_ray_spread_deg: T::of(3.0 / 8.0) * T::of(10.0).powf(lsps.zsd_log_mu),
        c_ds_s: table.c_ds_ns.eval(fc_ghz) * T::of(1e-9),
        lambda_m: lambda,
    };

    let split = pick_split_clusters(&kept_powers, k_r.is_some(), table.rays_per_cluster);

    let mut real = ChannelRealization {
        los: inputs.los,
        k_r,
        delays: kept_delays,
        powers: kept_powers,
        blockage_db: vec![T::zero(); kept_idx.len()],
        angles,
        phases,
        los_phase,
        cluster_shadow_db: kept_shadow,
        split,
        ctx,
        abs_delay_offset: inputs.d3d_m / T::of(SPEED_OF_LIGHT) + delay_shift,
        generated_at: inputs.t,
        exp_delays: Vec::new(),
        exp_powers: Vec::new(),
        exp_parent: Vec::new(),
        tensor: Array3::zeros((0, 0, 0)),
        tx_bf: None,
        rx_bf: None,
        long_term: None,
    };
    real.rebuild_coefficients(inputs.tx_panel, inputs.rx_panel);
    Ok(real)
}

/// The two strongest stochastic clusters (the LOS specular cluster has no
/// rays to partition and is never split). Splitting needs the canonical
/// 20-ray layout.
fn pick_split_clusters<T: Float>(powers: &[T], los: bool, rays: usize) -> Vec<usize> {
    if rays != 20 {
        return Vec::new();
    }
    let start = usize::from(los);
    let mut idx: Vec<usize> = (start..powers.len()).collect();
    idx.sort_by(|&a, &b| powers[b].partial_cmp(&powers[a]).expect("finite powers"));
    let mut split: Vec<usize> = idx.into_iter().take(2).collect();
    split.sort_unstable();
    split
}

impl<T: Float> ChannelRealization<T> {
    /// Number of kept (unexpanded) clusters.
    pub fn num_clusters(&self) -> usize {
        self.powers.len()
    }

    /// Number of expanded clusters (tensor third dimension).
    pub fn num_expanded(&self) -> usize {
        self.exp_parent.len()
    }

    /// Cluster power with the current blockage attenuation applied.
    pub fn effective_power(&self, cluster: usize) -> T {
        self.powers[cluster] * db_to_lin(-self.blockage_db[cluster])
    }

    /// Receiver spherical unit vector of an expanded cluster's central
    /// arrival direction (the Doppler anchor).
    pub fn doppler_direction(&self, exp_idx: usize) -> Vec3<T> {
        let parent = self.exp_parent[exp_idx];
        Vec3::from_spherical(self.angles.zoa[parent], self.angles.aoa[parent])
    }

    /// Ray-level angles of one cluster, rebuilt from the central angles,
    /// the canonical per-ray offsets and the stored coupling.
    /// Returns (aoa, zoa, aod, zod) per ray, radians.
    pub fn ray_angle_tuples(&self, cluster: usize) -> Vec<(T, T, T, T)> {
        let m = self.ctx.rays_per_cluster;
        (0..m)
            .map(|ray| {
                let off = |i: usize| T::of(RAY_OFFSETS[i % RAY_OFFSETS.len()]);
                let aoa = wrap_to_two_pi(
                    self.angles.aoa[cluster]
                        + (self.ctx.c_asa_deg * off(ray)).to_radians(),
                );
                let zoa = reflect_zenith(
                    self.angles.zoa[cluster]
                        + (self.ctx.c_zsa_deg * off(ray)).to_radians(),
                );
                let aod = wrap_to_two_pi(
                    self.angles.aod[cluster]
                        + (self.ctx.c_asd_deg * off(self.angles.aod_perm[cluster][ray]))
                            .to_radians(),
                );
                let zod = reflect_zenith(
                    self.angles.zod[cluster]
                        + (self.ctx.zod_ray_spread_deg
                            * off(self.angles.zod_perm[cluster][ray]))
                        .to_radians(),
                );
                (aoa, zoa, aod, zod)
            })
            .collect()
    }

    /// Step 11: rebuild the expanded cluster list and the coefficient
    /// tensor from the current delays/powers/angles/phases. Invalidate
    /// any cached beamforming state.
    pub fn rebuild_coefficients(&mut self, tx_panel: &AntennaPanel<T>, rx_panel: &AntennaPanel<T>) {
        let u = rx_panel.elements();
        let s = tx_panel.elements();
        let lambda = self.ctx.lambda_m;
        let m = self.ctx.rays_per_cluster;

        // Expanded cluster layout.
        let mut exp_delays = Vec::new();
        let mut exp_powers = Vec::new();
        let mut exp_parent = Vec::new();
        let mut exp_rays: Vec<Option<&[usize]>> = Vec::new();
        for n in 0..self.num_clusters() {
            if self.split.contains(&n) {
                for (sub, rays) in SUBCLUSTER_RAYS.iter().enumerate() {
                    exp_delays.push(
                        self.delays[n]
                            + T::of(SUBCLUSTER_DELAY_SCALE[sub]) * self.ctx.c_ds_s,
                    );
                    exp_powers.push(
                        self.effective_power(n) * T::of(rays.len() as f64) / T::of(m as f64),
                    );
                    exp_parent.push(n);
                    exp_rays.push(Some(rays));
                }
            } else {
                exp_delays.push(self.delays[n]);
                exp_powers.push(self.effective_power(n));
                exp_parent.push(n);
                exp_rays.push(None);
            }
        }

        let mut tensor = Array3::<Complex<T>>::zeros((u, s, exp_parent.len()));
        let two_pi = T::of(2.0) * T::PI();

        let rx_locations: Vec<Vec3<T>> = (0..u)
            .map(|i| rx_panel.element_location(i, lambda).expect("element index"))
            .collect();
        let tx_locations: Vec<Vec3<T>> = (0..s)
            .map(|i| tx_panel.element_location(i, lambda).expect("element index"))
            .collect();

        for (e, parent) in exp_parent.iter().copied().enumerate() {
            if self.los && parent == 0 {
                // Deterministic Ricean ray: the whole first-cluster power.
                let aoa = self.angles.aoa[0];
                let zoa = self.angles.zoa[0];
                let aod = self.angles.aod[0];
                let zod = self.angles.zod[0];
                let rx_dir = Vec3::from_spherical(zoa, aoa);
                let tx_dir = Vec3::from_spherical(zod, aod);
                let amp = self.effective_power(0).sqrt()
                    * rx_panel.radiation_pattern(zoa, aoa)
                    * tx_panel.radiation_pattern(zod, aod);
                for (ui, du) in rx_locations.iter().enumerate() {
                    for (si, ds) in tx_locations.iter().enumerate() {
                        let phase = self.los_phase
                            + two_pi * rx_dir.dot(*du) / lambda
                            + two_pi * tx_dir.dot(*ds) / lambda;
                        tensor[[ui, si, e]] = Complex::from_polar(amp, phase);
                    }
                }
                continue;
            }

            let tuples = self.ray_angle_tuples(parent);
            let rays: Vec<usize> = match exp_rays[e] {
                Some(subset) => subset.to_vec(),
                None => (0..m).collect(),
            };
            let weight = (self.effective_power(parent) / T::of(m as f64)).sqrt();

            // Per-ray element phasors; the tensor entry is a sum of
            // separable rank-1 terms.
            let mut ray_amp = Vec::with_capacity(rays.len());
            let mut rx_phasors = Vec::with_capacity(rays.len());
            let mut tx_phasors = Vec::with_capacity(rays.len());
            for &ray in &rays {
                let (aoa, zoa, aod, zod) = tuples[ray];
                let rx_dir = Vec3::from_spherical(zoa, aoa);
                let tx_dir = Vec3::from_spherical(zod, aod);
                let amp = rx_panel.radiation_pattern(zoa, aoa)
                    * tx_panel.radiation_pattern(zod, aod);
                ray_amp.push(
                    Complex::from_polar(amp, self.phases[parent][ray]),
                );
                rx_phasors.push(
                    rx_locations
                        .iter()
                        .map(|d| Complex::from_polar(T::one(), two_pi * rx_dir.dot(*d) / lambda))
                        .collect::<Vec<_>>(),
                );
                tx_phasors.push(
                    tx_locations
                        .iter()
                        .map(|d| Complex::from_polar(T::one(), two_pi * tx_dir.dot(*d) / lambda))
                        .collect::<Vec<_>>(),
                );
            }
            for ui in 0..u {
                for si in 0..s {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for r in 0..rays.len() {
                        acc += ray_amp[r] * rx_phasors[r][ui] * tx_phasors[r][si];
                    }
                    tensor[[ui, si, e]] = acc * weight;
                }
            }
        }

        self.exp_delays = exp_delays;
        self.exp_powers = exp_powers;
        self.exp_parent = exp_parent;
        self.tensor = tensor;
        self.tx_bf = None;
        self.rx_bf = None;
        self.long_term = None;
    }

    /// Frobenius norm squared of the tensor.
    pub fn frobenius_sq(&self) -> T {
        self.tensor.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Self-describing text dump for cross-implementation diffing:
    /// dimensions first, then flattened complex values as real/imag pairs.
    pub fn write_debug_dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let (u, s, n) = self.tensor.dim();
        writeln!(w, "channel_tensor {u} {s} {n}")?;
        for c in self.tensor.iter() {
            writeln!(
                w,
                "{:e} {:e}",
                c.re.to_f64().unwrap_or(f64::NAN),
                c.im.to_f64().unwrap_or(f64::NAN)
            )?;
        }
        writeln!(w, "delays {}", self.exp_delays.len())?;
        for d in &self.exp_delays {
            writeln!(w, "{:e}", d.to_f64().unwrap_or(f64::NAN))?;
        }
        writeln!(w, "powers {}", self.exp_powers.len())?;
        for p in &self.exp_powers {
            writeln!(w, "{:e}", p.to_f64().unwrap_or(f64::NAN))?;
        }
        writeln!(w, "angles 4 {}", self.num_clusters())?;
        for n in 0..self.num_clusters() {
            writeln!(
                w,
                "{:e} {:e} {:e} {:e}",
                self.angles.aoa[n].to_f64().unwrap_or(f64::NAN),
                self.angles.zoa[n].to_f64().unwrap_or(f64::NAN),
                self.angles.aod[n].to_f64().unwrap_or(f64::NAN),
                self.angles.zod[n].to_f64().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}
