//! Analog beamforming: vector computation (power method, sector cell scan)
//! and the time/frequency beamforming gain.
//!
//! The gain of a realization factorizes into long-term terms
//! `L_n = w_rx^H H_n w_tx` per expanded cluster and the per-transmission
//! phasors `F_n(t, f_s) = exp(j*2*pi*(r_rx,n . v)*t/lambda0) *
//! exp(j*2*pi*d_n*f_s)`. `L_n` is cached on the realization and recomputed
//! whenever the channel or either beamforming vector changes.
//!
//! Transmit weights that point a beam at a departure direction are the
//! conjugate of the steering vector for that direction; the receive side
//! conjugates implicitly through the `w^H` in the gain expression.

#![allow(clippy::needless_range_loop)]

use ndarray::{Array2, Array3};
use num_complex::Complex;
use rand::Rng;

use crate::antenna::{AntennaPanel, BeamformingVector};
use crate::geom::Vec3;
use crate::num::{db_to_lin, Float};
use crate::small_scale::ChannelRealization;
use crate::{Error, Result};

/// Transmit/receive spatial correlation matrices of a collapsed channel.
#[derive(Debug, Clone)]
pub struct SpatialCorrelation<T> {
    /// `H^H H`, S x S.
    pub q_tx: Array2<Complex<T>>,
    /// `H H^H`, U x U.
    pub q_rx: Array2<Complex<T>>,
}

/// Sum the cluster slices of the tensor into the U x S narrowband channel.
pub fn collapse_channel<T: Float>(tensor: &Array3<Complex<T>>) -> Array2<Complex<T>> {
    let (u, s, n) = tensor.dim();
    let mut h = Array2::zeros((u, s));
    for e in 0..n {
        for ui in 0..u {
            for si in 0..s {
                h[[ui, si]] += tensor[[ui, si, e]];
            }
        }
    }
    h
}

/// Build `Q_tx = H^H H` and `Q_rx = H H^H` from one collapsed realization.
pub fn spatial_correlation<T: Float>(h: &Array2<Complex<T>>) -> SpatialCorrelation<T> {
    let (u, s) = h.dim();
    let mut q_tx = Array2::zeros((s, s));
    for i in 0..s {
        for j in 0..s {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..u {
                acc += h[[k, i]].conj() * h[[k, j]];
            }
            q_tx[[i, j]] = acc;
        }
    }
    let mut q_rx = Array2::zeros((u, u));
    for i in 0..u {
        for j in 0..u {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..s {
                acc += h[[i, k]] * h[[j, k]].conj();
            }
            q_rx[[i, j]] = acc;
        }
    }
    SpatialCorrelation { q_tx, q_rx }
}

/// Default power-method stopping threshold on the successive-vector norm.
pub const POWER_METHOD_THRESHOLD: f64 = 1e-10;
/// Default power-method iteration cap.
pub const POWER_METHOD_MAX_ITER: usize = 1000;

fn mat_vec<T: Float>(m: &Array2<Complex<T>>, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let (rows, cols) = m.dim();
    let mut out = vec![Complex::new(T::zero(), T::zero()); rows];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for j in 0..cols {
            acc += m[[i, j]] * v[j];
        }
        *o = acc;
    }
    out
}

fn normalize<T: Float>(v: &mut [Complex<T>]) -> T {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    if norm > T::zero() {
        for c in v.iter_mut() {
            *c /= norm;
        }
    }
    norm
}

/// Fix the eigenvector phase ambiguity: rotate so the first
/// non-negligible entry is real and positive.
fn fix_phase<T: Float>(v: &mut [Complex<T>]) {
    let max = v.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    if let Some(lead) = v.iter().find(|c| c.norm() > max * T::of(1e-9)) {
        let rot = Complex::from_polar(T::one(), -lead.arg());
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
}

/// Dominant eigenvector of a Hermitian PSD matrix by power iteration.
fn dominant_eigenvector<T: Float, R: Rng + ?Sized>(
    q: &Array2<Complex<T>>,
    threshold: T,
    max_iter: usize,
    rng: &mut R,
) -> Vec<Complex<T>> {
    let n = q.dim().0;
    let mut v: Vec<Complex<T>> = (0..n)
        .map(|_| Complex::new(T::standard_normal(rng), T::standard_normal(rng)))
        .collect();
    normalize(&mut v);
    for _ in 0..max_iter {
        let mut next = mat_vec(q, &v);
        if normalize(&mut next) == T::zero() {
            break;
        }
        let diff = v
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<T>()
            .sqrt();
        v = next;
        if diff < threshold {
            break;
        }
    }
    fix_phase(&mut v);
    v
}

/// Power method: optimal tx/rx beamforming vectors of a collapsed channel,
/// the dominant eigenvectors of `Q_tx = H^H H` and `Q_rx = H H^H`.
pub fn power_method<T: Float, R: Rng + ?Sized>(
    h: &Array2<Complex<T>>,
    threshold: T,
    max_iter: usize,
    rng: &mut R,
) -> Result<(BeamformingVector<T>, BeamformingVector<T>)> {
    if h.iter().all(|c| c.norm_sqr() == T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let corr = spatial_correlation(h);
    let w_tx = dominant_eigenvector(&corr.q_tx, threshold, max_iter, rng);
    let w_rx = dominant_eigenvector(&corr.q_rx, threshold, max_iter, rng);
    Ok((
        BeamformingVector { weights: w_tx },
        BeamformingVector { weights: w_rx },
    ))
}

/// `w_rx^H H w_tx`.
pub fn apply_vectors<T: Float>(
    w_rx: &BeamformingVector<T>,
    h: &Array2<Complex<T>>,
    w_tx: &BeamformingVector<T>,
) -> Complex<T> {
    let (u, s) = h.dim();
    debug_assert_eq!(u, w_rx.len());
    debug_assert_eq!(s, w_tx.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for ui in 0..u {
        let wr = w_rx.weights[ui].conj();
        for si in 0..s {
            acc += wr * h[[ui, si]] * w_tx.weights[si];
        }
    }
    acc
}

/// Exhaustive sector scan result.
#[derive(Debug, Clone)]
pub struct CellScanResult<T> {
    pub tx_sector: usize,
    pub rx_sector: usize,
    pub w_tx: BeamformingVector<T>,
    pub w_rx: BeamformingVector<T>,
    /// `|w_rx^H H w_tx|^2` of the winning pair, linear.
    pub gain: T,
}

/// Brute-force cell scan: try every BS-UT sector pair and keep the one
/// with the largest received power. Ties go to the lexicographically
/// lowest (tx, rx) pair.
pub fn cell_scan<T: Float>(
    realization: &ChannelRealization<T>,
    tx_panel: &AntennaPanel<T>,
    rx_panel: &AntennaPanel<T>,
) -> Result<CellScanResult<T>> {
    let h = collapse_channel(&realization.tensor);
    let lambda = realization.ctx.lambda_m;
    let mut best: Option<CellScanResult<T>> = None;
    for xi_tx in 1..=tx_panel.sectors() {
        // Transmit weights are the conjugate steering vector.
        let w_tx = tx_panel.sector_vector(xi_tx, lambda)?.conj();
        for xi_rx in 1..=rx_panel.sectors() {
            let w_rx = rx_panel.sector_vector(xi_rx, lambda)?;
            let gain = apply_vectors(&w_rx, &h, &w_tx).norm_sqr();
            let better = match &best {
                Some(b) => gain > b.gain,
                None => true,
            };
            if better {
                best = Some(CellScanResult {
                    tx_sector: xi_tx,
                    rx_sector: xi_rx,
                    w_tx: w_tx.clone(),
                    w_rx,
                    gain,
                });
            }
        }
    }
    Ok(best.expect("panels have at least one sector"))
}

/// Long-term fading terms `L_n = w_rx^H H_n w_tx` per expanded cluster.
pub fn long_term<T: Float>(
    realization: &ChannelRealization<T>,
    w_tx: &BeamformingVector<T>,
    w_rx: &BeamformingVector<T>,
) -> Result<Vec<Complex<T>>> {
    let (u, s, n) = realization.tensor.dim();
    if w_rx.len() != u || w_tx.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "beamforming vectors ({}, {}) vs tensor ({u}, {s})",
            w_rx.len(),
            w_tx.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for e in 0..n {
        let mut acc = Complex::new(T::zero(), T::zero());
        for ui in 0..u {
            let wr = w_rx.weights[ui].conj();
            for si in 0..s {
                acc += wr * realization.tensor[[ui, si, e]] * w_tx.weights[si];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Attach beamforming vectors to a realization, eagerly recomputing the
/// cached long-term terms so cache and channel never disagree.
pub fn set_beamforming<T: Float>(
    realization: &mut ChannelRealization<T>,
    w_tx: BeamformingVector<T>,
    w_rx: BeamformingVector<T>,
) -> Result<()> {
    let lt = long_term(realization, &w_tx, &w_rx)?;
    realization.tx_bf = Some(w_tx);
    realization.rx_bf = Some(w_rx);
    realization.long_term = Some(lt);
    Ok(())
}

/// One gain evaluation at a (time, subcarrier) point.
#[derive(Debug, Clone, Copy)]
pub struct GainSample<T> {
    pub t: T,
    pub f_s: T,
    pub gain: Complex<T>,
}

/// Evaluate the gain and wrap it with its sampling point.
pub fn gain_sample<T: Float>(
    realization: &ChannelRealization<T>,
    t: T,
    f_s: T,
    v: Vec3<T>,
    lambda0: T,
) -> GainSample<T> {
    GainSample {
        t,
        f_s,
        gain: gain(realization, t, f_s, v, lambda0),
    }
}

/// Beamforming gain `G(t, f_s)` from the cached long-term terms.
///
/// `f_s` is the subcarrier offset from the carrier, so the delay phasor is
/// exactly 1 at the carrier. `v` is the relative UT velocity and `lambda0`
/// the carrier wavelength. Panics if no long-term cache is attached.
pub fn gain<T: Float>(
    realization: &ChannelRealization<T>,
    t: T,
    f_s: T,
    v: Vec3<T>,
    lambda0: T,
) -> Complex<T> {
    let lt = realization
        .long_term
        .as_ref()
        .expect("long-term terms cached before gain evaluation");
    let g = gain_from_terms(realization, lt, t, f_s, v, lambda0);
    #[cfg(debug_assertions)]
    {
        let bound: T = lt.iter().map(|l| l.norm()).sum();
        debug_assert!(
            g.norm_sqr() <= bound * bound * (T::one() + T::of(1e-9)) + T::of(1e-30),
            "gain exceeds the triangle-inequality bound"
        );
    }
    g
}

/// Reference path for the factorization check: evaluates the full double
/// sum `sum_n (w_rx^H H_n w_tx) F_n(t, f_s)` without touching the cache.
pub fn gain_direct<T: Float>(
    realization: &ChannelRealization<T>,
    w_tx: &BeamformingVector<T>,
    w_rx: &BeamformingVector<T>,
    t: T,
    f_s: T,
    v: Vec3<T>,
    lambda0: T,
) -> Result<Complex<T>> {
    let lt = long_term(realization, w_tx, w_rx)?;
    Ok(gain_from_terms(realization, &lt, t, f_s, v, lambda0))
}

fn gain_from_terms<T: Float>(
    realization: &ChannelRealization<T>,
    lt: &[Complex<T>],
    t: T,
    f_s: T,
    v: Vec3<T>,
    lambda0: T,
) -> Complex<T> {
    let two_pi = T::of(2.0) * T::PI();
    let mut g = Complex::new(T::zero(), T::zero());
    for (e, l) in lt.iter().enumerate() {
        let doppler = two_pi * realization.doppler_direction(e).dot(v) * t / lambda0;
        let delay = two_pi * realization.exp_delays[e] * f_s;
        g += l * Complex::from_polar(T::one(), doppler + delay);
    }
    g
}

/// Scale a per-subcarrier transmit PSD through the channel:
/// `rx[k] = tx[k] * |G(t, f_k)|^2 * 10^(-total_loss/10)`.
///
/// `offsets` are the subcarrier frequencies relative to the carrier and
/// must match the tx vector length.
#[allow(clippy::too_many_arguments)]
pub fn psd_apply<T: Float>(
    tx_psd: &[T],
    realization: &ChannelRealization<T>,
    total_loss_db: T,
    t: T,
    v: Vec3<T>,
    lambda0: T,
    offsets: &[T],
) -> Result<Vec<T>> {
    if tx_psd.len() != offsets.len() {
        return Err(Error::DimensionMismatch(format!(
            "tx PSD has {} entries, subcarrier grid {}",
            tx_psd.len(),
            offsets.len()
        )));
    }
    let loss = db_to_lin(-total_loss_db);
    Ok(tx_psd
        .iter()
        .zip(offsets.iter())
        .map(|(&p, &f)| {
            if p == T::zero() {
                T::zero()
            } else {
                p * gain(realization, t, f, v, lambda0).norm_sqr() * loss
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::large_scale::LspSet;
    use crate::params::LspTable;
    use crate::rng::{stream, Feature};
    use crate::small_scale::{generate_channel, FadingInputs, LosAngles};
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn collapse_single_slice_is_identity() {
        let mut t = Array3::zeros((2, 2, 1));
        t[[0, 0, 0]] = c(1.0, 2.0);
        t[[1, 1, 0]] = c(-3.0, 0.5);
        let h = collapse_channel(&t);
        assert_eq!(h[[0, 0]], c(1.0, 2.0));
        assert_eq!(h[[1, 1]], c(-3.0, 0.5));
    }

    #[test]
    fn collapse_cancels_opposite_slices() {
        let mut t = Array3::zeros((2, 3, 2));
        for u in 0..2 {
            for s in 0..3 {
                let v = c(0.3 * u as f64 + 0.1, s as f64 - 1.0);
                t[[u, s, 0]] = v;
                t[[u, s, 1]] = -v;
            }
        }
        let h = collapse_channel(&t);
        for x in h.iter() {
            assert!(x.norm() < 1e-15);
        }
    }

    #[test]
    fn collapse_matches_direct_sum() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut t = Array3::zeros((2, 2, 3));
        for x in t.iter_mut() {
            *x = c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng));
        }
        let h = collapse_channel(&t);
        for u in 0..2 {
            for s in 0..2 {
                let want = t[[u, s, 0]] + t[[u, s, 1]] + t[[u, s, 2]];
                assert!((h[[u, s]] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn spatial_correlation_is_hermitian_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut h = Array2::zeros((3, 5));
        for x in h.iter_mut() {
            *x = c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng));
        }
        let corr = spatial_correlation(&h);
        for (q, n) in [(&corr.q_tx, 5usize), (&corr.q_rx, 3usize)] {
            for i in 0..n {
                for j in 0..n {
                    assert!((q[[i, j]] - q[[j, i]].conj()).norm() < 1e-12);
                }
            }
            // v^H Q v >= 0 for random vectors.
            for _ in 0..20 {
                let v: Vec<Complex<f64>> = (0..n)
                    .map(|_| c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
                    .collect();
                let qv = mat_vec(q, &v);
                let quad: Complex<f64> =
                    v.iter().zip(qv.iter()).map(|(a, b)| a.conj() * b).sum();
                assert!(quad.re >= -1e-9);
                assert!(quad.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn power_method_rank_one_recovers_the_pair() {
        // H = a b^T: w_rx ~ a (up to phase), w_tx ~ conj(b).
        let a = [c(1.0, 0.5), c(-0.3, 0.2)];
        let b = [c(0.8, -0.1), c(0.2, 0.9), c(-0.5, 0.4)];
        let mut h = Array2::zeros((2, 3));
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                h[[i, j]] = ai * bj;
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (w_tx, w_rx) = power_method(&h, 1e-12, 1000, &mut rng).unwrap();
        let g = apply_vectors(&w_rx, &h, &w_tx).norm_sqr();
        let sigma_sq: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>()
            * b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        assert!((g - sigma_sq).abs() / sigma_sq < 1e-10);
        assert!((w_tx.norm() - 1.0).abs() < 1e-12);
        assert!((w_rx.norm() - 1.0).abs() < 1e-12);
        // Phase convention: leading entries real positive.
        assert!(w_tx.weights[0].im.abs() < 1e-9);
        assert!(w_tx.weights[0].re > 0.0);
    }

    #[test]
    fn power_method_diagonal_channel_picks_largest_entry() {
        let h = arr2(&[
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(3.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        ]);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (w_tx, w_rx) = power_method(&h, 1e-12, 2000, &mut rng).unwrap();
        assert!((w_tx.weights[1].norm() - 1.0).abs() < 1e-6);
        assert!((w_rx.weights[1].norm() - 1.0).abs() < 1e-6);
        let g = apply_vectors(&w_rx, &h, &w_tx).norm_sqr();
        assert!((g - 9.0).abs() < 1e-6);
    }

    #[test]
    fn power_method_matches_dense_eigensolver() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (u, s) = (4, 6);
            let mut h = Array2::zeros((u, s));
            for x in h.iter_mut() {
                *x = c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng));
            }
            let (w_tx, w_rx) = power_method(&h, 1e-12, 5000, &mut rng).unwrap();
            let got = apply_vectors(&w_rx, &h, &w_tx).norm_sqr();
            // Independent oracle: nalgebra SVD of H.
            let mut na = nalgebra::DMatrix::<Complex<f64>>::zeros(u, s);
            for i in 0..u {
                for j in 0..s {
                    na[(i, j)] = h[[i, j]];
                }
            }
            let sv = na.svd(false, false).singular_values;
            let sigma_max_sq = sv[0] * sv[0];
            assert!(
                (got - sigma_max_sq).abs() / sigma_max_sq < 1e-9,
                "{got} vs {sigma_max_sq}"
            );
        }
    }

    #[test]
    fn power_method_rejects_zero_channel() {
        let h: Array2<Complex<f64>> = Array2::zeros((2, 2));
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        assert!(matches!(
            power_method(&h, 1e-10, 100, &mut rng),
            Err(Error::ZeroMatrix)
        ));
    }

    /// Pure-LOS realization with the ray aligned to explicit angles.
    fn aligned_realization(
        tx_panel: &AntennaPanel<f64>,
        rx_panel: &AntennaPanel<f64>,
        aod_deg: f64,
        aoa_deg: f64,
    ) -> crate::small_scale::ChannelRealization<f64> {
        let table: LspTable<f64> = LspTable::degenerate(-7.0, 0.7, 60.0, 2, 20);
        let lsps = LspSet {
            ds_s: 1e-7,
            asd_deg: 5.0,
            asa_deg: 5.0,
            zsd_deg: 2.0,
            zsa_deg: 2.0,
            k_r: Some(1e6),
            sf_db: 0.0,
            zsd_log_mu: 2.0f64.log10(),
            zod_offset_deg: 0.0,
        };
        let inputs = FadingInputs {
            los: true,
            indoor_ut: false,
            lsps: &lsps,
            table: &table,
            fc_hz: 28e9,
            tx_panel,
            rx_panel,
            los_angles: LosAngles {
                aod: aod_deg.to_radians(),
                zod: std::f64::consts::FRAC_PI_2,
                aoa: aoa_deg.to_radians(),
                zoa: std::f64::consts::FRAC_PI_2,
            },
            d3d_m: 100.0,
            t: 0.0,
        };
        let mut rng = stream(42, 0, 1, Feature::Fading);
        generate_channel(&inputs, &mut rng).unwrap()
    }

    #[test]
    fn cell_scan_aligned_geometry_reaches_30_db() {
        // BS 8x8, sector 3 boresight at 90 deg; UT 4x4, sector 2 boresight
        // at 270 deg; LOS ray down both boresights, zenith 90.
        let tx: AntennaPanel<f64> = AntennaPanel::default_bs();
        let rx = {
            let mut p = AntennaPanel::default_ut();
            p.bearing = 225.0f64.to_radians();
            p
        };
        assert!((tx.sector_azimuth(3).unwrap().to_degrees() - 90.0).abs() < 1e-9);
        assert!((rx.sector_azimuth(2).unwrap().to_degrees() - 270.0).abs() < 1e-9);
        let real = aligned_realization(&tx, &rx, 90.0, 270.0);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        let gain_db = 10.0 * scan.gain.log10();
        assert_eq!(scan.tx_sector, 3);
        assert_eq!(scan.rx_sector, 2);
        assert!(gain_db >= 29.0, "aligned scan gain {gain_db} dB");
        assert!(gain_db <= 10.0 * (64.0f64 * 16.0).log10() + 0.1);
    }

    #[test]
    fn cell_scan_sector_edge_ties_and_loses() {
        // Departure on the boundary between BS sectors 1 and 2; the UT is
        // center-aligned. A planar array's beams are uniform in the sine of
        // azimuth, so the equal-gain boundary between adjacent beams is the
        // beam-space midpoint, not the angular one. Both edge sectors must
        // tie, and the scan loses >= 9 dB against the aligned 30 dB case.
        let tx: AntennaPanel<f64> = AntennaPanel::default_bs();
        let rx = {
            let mut p = AntennaPanel::default_ut();
            p.bearing = 225.0f64.to_radians();
            p
        };
        let b1 = tx.sector_azimuth(1).unwrap();
        let b2 = tx.sector_azimuth(2).unwrap();
        let edge_sin = ((b1 - tx.bearing).sin() + (b2 - tx.bearing).sin()) / 2.0;
        let aod = tx.bearing + edge_sin.asin();
        let real = aligned_realization(&tx, &rx, aod.to_degrees(), 270.0);
        let h = collapse_channel(&real.tensor);
        let lambda = real.ctx.lambda_m;
        let w_rx = rx.sector_vector(2, lambda).unwrap();
        let g1 = apply_vectors(&w_rx, &h, &tx.sector_vector(1, lambda).unwrap().conj()).norm_sqr();
        let g2 = apply_vectors(&w_rx, &h, &tx.sector_vector(2, lambda).unwrap().conj()).norm_sqr();
        assert!(
            (g1 - g2).abs() < 1e-9 * g1,
            "edge sectors should tie: {g1} vs {g2}"
        );
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        // The winner is one of the two tied edge sectors (exact float ties
        // resolve to the lexicographically lowest pair).
        assert!(scan.tx_sector == 1 || scan.tx_sector == 2);
        assert_eq!(scan.rx_sector, 2);
        let best_db = 10.0 * scan.gain.log10();
        let aligned_db = 10.0 * (64.0f64 * 16.0).log10();
        assert!(
            best_db <= aligned_db - 9.0,
            "edge loss too small: {best_db} vs {aligned_db}"
        );
        println!("sector-edge scan gain: {best_db:.2} dB (aligned {aligned_db:.2} dB)");
    }

    #[test]
    fn single_sector_codebooks_return_first_pair() {
        let tx = AntennaPanel::new(2, 1);
        let rx = AntennaPanel::new(2, 1);
        let real = aligned_realization(&tx, &rx, 10.0, 190.0);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        assert_eq!((scan.tx_sector, scan.rx_sector), (1, 1));
    }

    #[test]
    fn power_method_never_below_cell_scan() {
        for seed in 0..10 {
            let real = random_realization(seed);
            let tx = AntennaPanel::new(4, 4);
            let rx = AntennaPanel::new(2, 2);
            let scan = cell_scan(&real, &tx, &rx).unwrap();
            let h = collapse_channel(&real.tensor);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let (w_tx, w_rx) = power_method(&h, 1e-12, 5000, &mut rng).unwrap();
            let pm = apply_vectors(&w_rx, &h, &w_tx).norm_sqr();
            assert!(
                pm >= scan.gain * (1.0 - 1e-9),
                "power method {pm} below scan {}",
                scan.gain
            );
        }
    }

    fn random_realization(seed: u64) -> crate::small_scale::ChannelRealization<f64> {
        use crate::large_scale::{generate_lsps, LspGeometry};
        use crate::params::{factor_from_matrix, Condition};
        use crate::scenario::Scenario;
        let table: LspTable<f64> = LspTable::load(Scenario::UMi, Condition::Nlos).unwrap();
        let factor = factor_from_matrix(&table.cross_corr);
        let g = LspGeometry {
            fc_hz: 28e9,
            d2d_m: 60.0,
            h_ut_m: 1.5,
            h_bs_m: 10.0,
        };
        let mut lsp_rng = stream(seed, 0, 1, Feature::Lsp);
        let lsps = generate_lsps(Scenario::UMi, Condition::Nlos, g, &table, &factor, &mut lsp_rng);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let inputs = FadingInputs {
            los: false,
            indoor_ut: false,
            lsps: &lsps,
            table: &table,
            fc_hz: 28e9,
            tx_panel: &tx,
            rx_panel: &rx,
            los_angles: LosAngles {
                aod: 0.3,
                zod: 1.6,
                aoa: 3.3,
                zoa: 1.5,
            },
            d3d_m: 61.0,
            t: 0.0,
        };
        let mut rng = stream(seed, 0, 1, Feature::Fading);
        generate_channel(&inputs, &mut rng).unwrap()
    }

    #[test]
    fn long_term_is_linear_and_annihilates_orthogonal_vectors() {
        let real = random_realization(1);
        let (u, s, _) = real.tensor.dim();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let w_tx = BeamformingVector::new_normalized(
            (0..s)
                .map(|_| c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
                .collect(),
        )
        .unwrap();
        let w_rx = BeamformingVector::new_normalized(
            (0..u)
                .map(|_| c(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
                .collect(),
        )
        .unwrap();
        let lt = long_term(&real, &w_tx, &w_rx).unwrap();
        assert_eq!(lt.len(), real.num_expanded());

        // Scaling the tensor scales every long-term term.
        let mut scaled = real.clone();
        let factor = c(0.3, -1.1);
        for x in scaled.tensor.iter_mut() {
            *x *= factor;
        }
        let lt2 = long_term(&scaled, &w_tx, &w_rx).unwrap();
        for (a, b) in lt.iter().zip(lt2.iter()) {
            assert!((a * factor - b).norm() < 1e-12 * (1.0 + b.norm()));
        }

        // An rx vector orthogonal to the column space of a single-column
        // channel yields zero.
        let mut t = Array3::zeros((2, 1, 1));
        t[[0, 0, 0]] = c(1.0, 0.0);
        let mut single = real.clone();
        single.tensor = t;
        single.exp_delays = vec![0.0];
        single.exp_powers = vec![1.0];
        single.exp_parent = vec![0];
        let w_tx1 = BeamformingVector {
            weights: vec![c(1.0, 0.0)],
        };
        let w_rx_orth = BeamformingVector {
            weights: vec![c(0.0, 0.0), c(1.0, 0.0)],
        };
        let lt3 = long_term(&single, &w_tx1, &w_rx_orth).unwrap();
        assert!(lt3[0].norm() < 1e-15);
    }

    #[test]
    fn long_term_dimension_mismatch_is_an_error() {
        let real = random_realization(2);
        let w_bad = BeamformingVector {
            weights: vec![c(1.0, 0.0); 3],
        };
        assert!(long_term(&real, &w_bad, &w_bad).is_err());
    }

    #[test]
    fn gain_reduces_to_long_term_sum_at_rest() {
        let mut real = random_realization(3);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let g = gain(&real, 12.5, 0.0, Vec3::zero(), 0.0107);
        let want: Complex<f64> = real.long_term.as_ref().unwrap().iter().sum();
        assert!((g - want).norm() < 1e-12);
    }

    #[test]
    fn single_cluster_gain_magnitude_is_time_frequency_invariant() {
        let mut real = random_realization(4);
        // Collapse to a single expanded cluster.
        let t = real.tensor.slice(ndarray::s![.., .., 0..1]).to_owned();
        real.tensor = t;
        real.exp_delays.truncate(1);
        real.exp_powers.truncate(1);
        real.exp_parent.truncate(1);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let l1 = real.long_term.as_ref().unwrap()[0].norm();
        for (t, f) in [(0.0, 0.0), (1.0, 5e6), (2.5, -20e6), (100.0, 50e6)] {
            let g = gain(&real, t, f, Vec3::new(1.0, -0.5, 0.0), 0.0107);
            assert!((g.norm() - l1).abs() < 1e-12 * (1.0 + l1));
        }
    }

    #[test]
    fn two_path_gain_is_periodic_in_frequency() {
        // Delays 0 and 100 ns: |G|^2 over f_s has period 10 MHz.
        let mut real = random_realization(5);
        let keep = real.tensor.slice(ndarray::s![.., .., 0..2]).to_owned();
        real.tensor = keep;
        real.exp_delays = vec![0.0, 100e-9];
        real.exp_powers.truncate(2);
        real.exp_parent.truncate(2);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        for f in [-7e6, 0.0, 3e6, 12.5e6] {
            let a = gain(&real, 0.0, f, Vec3::zero(), 0.0107).norm_sqr();
            let b = gain(&real, 0.0, f + 10e6, Vec3::zero(), 0.0107).norm_sqr();
            assert!((a - b).abs() < 1e-9 * (1.0 + a), "f={f}: {a} vs {b}");
        }
    }

    #[test]
    fn doppler_phasor_is_periodic_for_single_cluster() {
        let mut real = random_realization(6);
        let t = real.tensor.slice(ndarray::s![.., .., 0..1]).to_owned();
        real.tensor = t;
        real.exp_delays.truncate(1);
        real.exp_powers.truncate(1);
        real.exp_parent.truncate(1);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let v = Vec3::new(1.0, 0.0, 0.0);
        let lambda0 = 0.0107;
        let r_dot_v = real.doppler_direction(0).dot(v);
        let period = lambda0 / r_dot_v;
        let a = gain(&real, 0.3, 1e6, v, lambda0);
        let b = gain(&real, 0.3 + period, 1e6, v, lambda0);
        assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn factorized_and_direct_gain_agree() {
        let mut real = random_realization(7);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        let (w_tx, w_rx) = (scan.w_tx.clone(), scan.w_rx.clone());
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let v = Vec3::new(0.7, -1.3, 0.1);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            let t = 10.0 * f64::uniform_01(&mut rng);
            let f = 100e6 * (f64::uniform_01(&mut rng) - 0.5);
            let a = gain(&real, t, f, v, 0.0107);
            let b = gain_direct(&real, &w_tx, &w_rx, t, f, v, 0.0107).unwrap();
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-30));
        }
    }

    #[test]
    fn scan_choice_invariant_under_positive_scaling() {
        let real = random_realization(8);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let base = cell_scan(&real, &tx, &rx).unwrap();
        let mut scaled = real.clone();
        for x in scaled.tensor.iter_mut() {
            *x *= c(17.0, 0.0);
        }
        let scan2 = cell_scan(&scaled, &tx, &rx).unwrap();
        assert_eq!(
            (base.tx_sector, base.rx_sector),
            (scan2.tx_sector, scan2.rx_sector)
        );
        // Power method vectors match up to the phase convention.
        let h1 = collapse_channel(&real.tensor);
        let h2 = collapse_channel(&scaled.tensor);
        let mut r1 = ChaCha12Rng::seed_from_u64(11);
        let mut r2 = ChaCha12Rng::seed_from_u64(11);
        let (a_tx, a_rx) = power_method(&h1, 1e-12, 5000, &mut r1).unwrap();
        let (b_tx, b_rx) = power_method(&h2, 1e-12, 5000, &mut r2).unwrap();
        for (a, b) in [(&a_tx, &b_tx), (&a_rx, &b_rx)] {
            for (x, y) in a.weights.iter().zip(b.weights.iter()) {
                assert!((x - y).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn gain_respects_the_array_gain_bound() {
        // |G|^2 <= U*S*sum(P_n) for isotropic elements, whatever the
        // vectors and the sampling point.
        let mut real = random_realization(12);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let (u, s, _) = real.tensor.dim();
        let total_power: f64 = (0..real.num_clusters()).map(|n| real.effective_power(n)).sum();
        let bound = (u * s) as f64 * total_power;
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let sample = gain_sample(
                &real,
                10.0 * f64::uniform_01(&mut rng),
                80e6 * (f64::uniform_01(&mut rng) - 0.5),
                Vec3::new(1.0, 0.3, 0.0),
                0.0428,
            );
            assert!(sample.gain.norm_sqr() <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn psd_apply_scales_and_rejects_mismatch() {
        let mut real = random_realization(9);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let offsets: Vec<f64> = (0..8).map(|k| (k as f64 - 3.5) * 1e6).collect();
        let tx_psd = vec![2e-9; 8];

        let zero = psd_apply(&[0.0; 8], &real, 100.0, 0.0, Vec3::zero(), 0.0107, &offsets)
            .unwrap();
        assert!(zero.iter().all(|&p| p == 0.0));

        let rx1 = psd_apply(&tx_psd, &real, 100.0, 0.0, Vec3::zero(), 0.0107, &offsets).unwrap();
        let rx2 = psd_apply(&tx_psd, &real, 103.0, 0.0, Vec3::zero(), 0.0107, &offsets).unwrap();
        for (a, b) in rx1.iter().zip(rx2.iter()) {
            // +3 dB loss halves the PSD (within the dB arithmetic).
            let ratio = b / a;
            assert!((ratio - 10f64.powf(-0.3)).abs() < 1e-12);
        }
        assert!(psd_apply(&tx_psd, &real, 100.0, 0.0, Vec3::zero(), 0.0107, &offsets[..4]).is_err());
    }

    #[test]
    fn flat_channel_gives_flat_rx_psd() {
        let mut real = random_realization(10);
        let t = real.tensor.slice(ndarray::s![.., .., 0..1]).to_owned();
        real.tensor = t;
        real.exp_delays.truncate(1);
        real.exp_powers.truncate(1);
        real.exp_parent.truncate(1);
        let tx = AntennaPanel::new(4, 4);
        let rx = AntennaPanel::new(2, 2);
        let scan = cell_scan(&real, &tx, &rx).unwrap();
        set_beamforming(&mut real, scan.w_tx, scan.w_rx).unwrap();
        let l1 = real.long_term.as_ref().unwrap()[0].norm_sqr();
        let offsets: Vec<f64> = (0..16).map(|k| (k as f64 - 7.5) * 2e6).collect();
        let rx_psd =
            psd_apply(&[1.0; 16], &real, 50.0, 0.0, Vec3::zero(), 0.0107, &offsets).unwrap();
        let expect = l1 * 10f64.powf(-5.0);
        for p in rx_psd {
            assert!((p - expect).abs() < 1e-12 * expect);
        }
    }
}
