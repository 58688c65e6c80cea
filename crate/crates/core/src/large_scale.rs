//! Cross-correlated large-scale parameter generation (steps 1-4 of the
//! fading procedure).
//!
//! Seven parameters [SF, K, DS, ASD, ASA, ZSD, ZSA] are drawn jointly: iid
//! N(0,1) variates are colored with the square root of the scenario's
//! cross-correlation matrix and mapped through the per-parameter
//! lognormal/normal transforms of Table 7.5-6. ZSD statistics and the ZOD
//! offset depend on link distance and heights (Tables 7.5-7..7.5-10) and
//! are evaluated per link at generation time.

use rand::Rng;

use crate::num::Float;
use crate::params::{
    Condition, CorrelationSqrt, LspTable, LSP_ASA, LSP_ASD, LSP_DS, LSP_K, LSP_SF, LSP_ZSA,
    LSP_ZSD,
};
use crate::scenario::Scenario;

/// Azimuth spread cap in degrees (TR convention).
pub const AZIMUTH_SPREAD_CAP_DEG: f64 = 104.0;
/// Zenith spread cap in degrees.
pub const ZENITH_SPREAD_CAP_DEG: f64 = 52.0;

/// One correlated draw of the large-scale parameters for a link.
#[derive(Debug, Clone, Copy)]
pub struct LspSet<T> {
    /// Delay spread in seconds.
    pub ds_s: T,
    /// Azimuth spread of departure, degrees.
    pub asd_deg: T,
    /// Azimuth spread of arrival, degrees.
    pub asa_deg: T,
    /// Zenith spread of departure, degrees.
    pub zsd_deg: T,
    /// Zenith spread of arrival, degrees.
    pub zsa_deg: T,
    /// Ricean factor as a linear power ratio; present for LOS tables only.
    pub k_r: Option<T>,
    /// Shadow fading draw in dB (correlated member of the joint vector; the
    /// propagation module tracks the running filter separately).
    pub sf_db: T,
    /// Median log10-ZSD used for the ZOD ray spread in step 7.
    pub zsd_log_mu: T,
    /// ZOD offset in degrees added to the departure zenith angles.
    pub zod_offset_deg: T,
}

/// Geometry the distance/height-conditioned parameters depend on.
#[derive(Debug, Clone, Copy)]
pub struct LspGeometry<T> {
    pub fc_hz: T,
    pub d2d_m: T,
    pub h_ut_m: T,
    pub h_bs_m: T,
}

/// ZSD lognormal (mu, sigma) per Tables 7.5-7 (UMa), 7.5-8 (UMi),
/// 7.5-9 (RMa) and 7.5-10 (indoor office). O2I links use the NLOS column.
pub fn zsd_log_params<T: Float>(
    scenario: Scenario,
    condition: Condition,
    g: LspGeometry<T>,
) -> (T, T) {
    let of = T::of;
    let los = condition == Condition::Los;
    let km = g.d2d_m / of(1000.0);
    match scenario {
        Scenario::UMi => {
            if los {
                let mu = (of(-14.8) * km + of(0.01) * (g.h_ut_m - g.h_bs_m).abs() + of(0.83))
                    .max(of(-0.21));
                (mu, of(0.35))
            } else {
                let mu = (of(-3.1) * km + of(0.01) * (g.h_ut_m - g.h_bs_m).max(T::zero())
                    + of(0.2))
                .max(of(-0.5));
                (mu, of(0.35))
            }
        }
        Scenario::UMa => {
            if los {
                let mu =
                    (of(-2.1) * km - of(0.01) * (g.h_ut_m - of(1.5)) + of(0.75)).max(of(-0.5));
                (mu, of(0.40))
            } else {
                let mu =
                    (of(-2.1) * km - of(0.01) * (g.h_ut_m - of(1.5)) + of(0.9)).max(of(-0.5));
                (mu, of(0.49))
            }
        }
        Scenario::RMa => {
            if los {
                let mu =
                    (of(-0.17) * km - of(0.01) * (g.h_ut_m - of(1.5)) + of(0.22)).max(of(-1.0));
                (mu, of(0.34))
            } else {
                let mu =
                    (of(-0.19) * km - of(0.01) * (g.h_ut_m - of(1.5)) + of(0.28)).max(of(-1.0));
                (mu, of(0.30))
            }
        }
        Scenario::InMO | Scenario::InOO => {
            let fc_ghz = g.fc_hz / of(1e9);
            if los {
                let mu = of(-1.43) * (T::one() + fc_ghz).log10() + of(2.228);
                let sigma = of(0.13) * (T::one() + fc_ghz).log10() + of(0.30);
                (mu, sigma)
            } else {
                (of(1.08), of(0.36))
            }
        }
    }
}

/// ZOD offset in degrees (zero for LOS and for the indoor office).
pub fn zod_offset_deg<T: Float>(scenario: Scenario, condition: Condition, g: LspGeometry<T>) -> T {
    let of = T::of;
    if condition == Condition::Los {
        return T::zero();
    }
    match scenario {
        Scenario::UMi => {
            let d = g.d2d_m.max(of(10.0));
            -(of(10.0).powf(of(-1.5) * d.log10() + of(3.3)))
        }
        Scenario::UMa => {
            let fc_ghz = g.fc_hz / of(1e9);
            let lgfc = fc_ghz.log10();
            let d = g.d2d_m.max(of(25.0));
            let e = (of(0.208) * lgfc - of(0.782)) * d.log10() - of(0.13) * lgfc + of(2.03)
                - of(0.07) * (g.h_ut_m - of(1.5));
            of(7.66) * lgfc - of(5.96) - of(10.0).powf(e)
        }
        Scenario::RMa => {
            let a = ((of(35.0) - of(3.5)) / g.d2d_m).atan();
            let b = ((of(35.0) - of(1.5)) / g.d2d_m).atan();
            (a - b).to_degrees()
        }
        Scenario::InMO | Scenario::InOO => T::zero(),
    }
}

/// Draw the correlated LSP set for a link.
///
/// Seven iid N(0,1) variates (drawn in the [SF, K, DS, ASD, ASA, ZSD, ZSA]
/// order) are colored by the correlation factor and transformed. Angular
/// spreads are capped at 104/52 degrees.
pub fn generate_lsps<T: Float, R: Rng + ?Sized>(
    scenario: Scenario,
    condition: Condition,
    g: LspGeometry<T>,
    table: &LspTable<T>,
    factor: &CorrelationSqrt<T>,
    rng: &mut R,
) -> LspSet<T> {
    let mut z = [T::zero(); 7];
    for zi in z.iter_mut() {
        *zi = T::standard_normal(rng);
    }
    let q = factor.apply(&z);
    let fc_ghz = g.fc_hz / T::of(1e9);
    let pow10 = |x: T| T::of(10.0).powf(x);

    let sf_db = table.sf_sigma_db.eval(fc_ghz) * q[LSP_SF];
    let k_r = match (&table.k_mu_db, &table.k_sigma_db) {
        (Some(mu), Some(sigma)) => {
            let k_db = mu.eval(fc_ghz) + sigma.eval(fc_ghz) * q[LSP_K];
            Some(pow10(k_db / T::of(10.0)))
        }
        _ => None,
    };
    let ds_s = pow10(table.ds_log_mu.eval(fc_ghz) + table.ds_log_sigma.eval(fc_ghz) * q[LSP_DS]);
    let asd_deg =
        pow10(table.asd_log_mu.eval(fc_ghz) + table.asd_log_sigma.eval(fc_ghz) * q[LSP_ASD])
            .min(T::of(AZIMUTH_SPREAD_CAP_DEG));
    let asa_deg =
        pow10(table.asa_log_mu.eval(fc_ghz) + table.asa_log_sigma.eval(fc_ghz) * q[LSP_ASA])
            .min(T::of(AZIMUTH_SPREAD_CAP_DEG));
    let (zsd_mu, zsd_sigma) = zsd_log_params(scenario, condition, g);
    let zsd_deg = pow10(zsd_mu + zsd_sigma * q[LSP_ZSD]).min(T::of(ZENITH_SPREAD_CAP_DEG));
    let zsa_deg =
        pow10(table.zsa_log_mu.eval(fc_ghz) + table.zsa_log_sigma.eval(fc_ghz) * q[LSP_ZSA])
            .min(T::of(ZENITH_SPREAD_CAP_DEG));

    LspSet {
        ds_s,
        asd_deg,
        asa_deg,
        zsd_deg,
        zsa_deg,
        k_r,
        sf_db,
        zsd_log_mu: zsd_mu,
        zod_offset_deg: zod_offset_deg(scenario, condition, g),
    }
}
