//! Uniform planar array: element placement, radiation pattern, steering
//! vectors and the sector codebook used by cell scanning.
//!
//! The panel is a rectangular R x C grid. With zero bearing it lies in the
//! y-z plane with boresight along +x and the left bottom element at
//! (0,0,0); the i-th element sits at `(0, d_H*(i mod C), d_V*floor(i/C))`
//! in wavelengths. A nonzero bearing rotates the panel about the vertical
//! axis. One panel per node; sectors sweep azimuth only, with the
//! elevation pinned to 90 degrees.

use num_complex::Complex;

use crate::geom::{wrap_to_pi, Vec3};
use crate::num::Float;
use crate::{Error, Result};

/// Element radiation pattern mode.
///
/// Isotropic is the default so array-gain figures depend only on geometry;
/// the parabolic-in-dB element pattern is available as an opt-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternMode {
    Isotropic,
    Element3gpp,
}

/// Uniform planar array.
#[derive(Debug, Clone)]
pub struct AntennaPanel<T> {
    /// Rows (vertical element count).
    pub rows: usize,
    /// Columns (horizontal element count); also the sector count.
    pub cols: usize,
    /// Horizontal spacing in wavelengths.
    pub d_h: T,
    /// Vertical spacing in wavelengths.
    pub d_v: T,
    /// Panel bearing: azimuth of the boresight and of the first sector.
    /// Defaults to northeast (45 degrees).
    pub bearing: T,
    /// Azimuth field of view covered by the sector codebook.
    pub fov: T,
    pub pattern: PatternMode,
}

impl<T: Float> AntennaPanel<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "panel needs at least one element");
        Self {
            rows,
            cols,
            d_h: T::of(0.5),
            d_v: T::of(0.5),
            bearing: T::of(45.0).to_radians(),
            fov: T::PI(),
            pattern: PatternMode::Isotropic,
        }
    }

    /// Default BS panel: 8x8 = 64 elements at half-wavelength spacing.
    pub fn default_bs() -> Self {
        Self::new(8, 8)
    }

    /// Default UT panel: 4x4 = 16 elements at half-wavelength spacing.
    pub fn default_ut() -> Self {
        Self::new(4, 4)
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn sectors(&self) -> usize {
        self.cols
    }

    /// Global-frame offset of element `i` from the node position, in meters.
    pub fn element_location(&self, i: usize, lambda: T) -> Result<Vec3<T>> {
        if i >= self.elements() {
            return Err(Error::ElementOutOfRange {
                index: i,
                count: self.elements(),
            });
        }
        let col = T::of((i % self.cols) as f64);
        let row = T::of((i / self.cols) as f64);
        let local = Vec3::new(T::zero(), self.d_h * col * lambda, self.d_v * row * lambda);
        Ok(local.rotate_z(self.bearing))
    }

    /// Field gain (linear amplitude) towards zenith `theta`, azimuth `phi`
    /// (global frame; the element pattern is evaluated relative to the
    /// panel boresight).
    pub fn radiation_pattern(&self, theta: T, phi: T) -> T {
        radiation_pattern(theta, wrap_to_pi(phi - self.bearing), self.pattern)
    }

    /// Steering vector towards the given direction: element k gets weight
    /// `exp(j*2*pi*<unit direction, element_location(k)>/lambda)/sqrt(R*C)`.
    pub fn steering_vector(&self, azimuth: T, zenith: T, lambda: T) -> BeamformingVector<T> {
        let dir = Vec3::from_spherical(zenith, azimuth);
        let amp = T::one() / T::of(self.elements() as f64).sqrt();
        let two_pi = T::of(2.0) * T::PI();
        let weights = (0..self.elements())
            .map(|k| {
                let d = self.element_location(k, lambda).expect("index in range");
                let phase = two_pi * dir.dot(d) / lambda;
                Complex::from_polar(amp, phase)
            })
            .collect();
        BeamformingVector { weights }
    }

    /// Boresight azimuth of sector `xi` (1-based): the first sector points
    /// at the panel bearing, subsequent ones step by `fov / cols`.
    pub fn sector_azimuth(&self, xi: usize) -> Result<T> {
        if xi < 1 || xi > self.sectors() {
            return Err(Error::SectorOutOfRange {
                sector: xi,
                count: self.sectors(),
            });
        }
        Ok(self.bearing + T::of((xi - 1) as f64) * self.fov / T::of(self.cols as f64))
    }

    /// Codebook entry for sector `xi`: progressive-phase steering vector at
    /// the sector boresight with elevation fixed at 90 degrees.
    pub fn sector_vector(&self, xi: usize, lambda: T) -> Result<BeamformingVector<T>> {
        let az = self.sector_azimuth(xi)?;
        Ok(self.steering_vector(az, T::FRAC_PI_2(), lambda))
    }
}

/// Field gain (linear amplitude) of a single element.
///
/// `phi` is relative to the element boresight. The 3GPP element pattern is
/// the parabolic-in-dB shape `-min(12*((theta-90)/65)^2 + 12*(phi/65)^2, 30)`
/// with 65-degree 3 dB widths and a 30 dB floor.
pub fn radiation_pattern<T: Float>(theta: T, phi: T, mode: PatternMode) -> T {
    match mode {
        PatternMode::Isotropic => T::one(),
        PatternMode::Element3gpp => {
            let theta_deg = theta.to_degrees();
            let phi_deg = phi.to_degrees();
            let w = T::of(65.0);
            let v = T::of(12.0) * ((theta_deg - T::of(90.0)) / w).powi(2);
            let h = T::of(12.0) * (phi_deg / w).powi(2);
            let a_db = -(v + h).min(T::of(30.0));
            T::of(10.0).powf(a_db / T::of(20.0))
        }
    }
}

/// Unit-norm complex antenna weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingVector<T> {
    pub weights: Vec<Complex<T>>,
}

impl<T: Float> BeamformingVector<T> {
    /// Build from raw weights, normalising to unit Euclidean norm.
    pub fn new_normalized(weights: Vec<Complex<T>>) -> Result<Self> {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() || !norm.is_finite() {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / norm).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> T {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<T>().sqrt()
    }

    /// Elementwise conjugate. Transmit weights that point a beam at a
    /// departure direction are the conjugate of the steering vector for it.
    pub fn conj(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w.conj()).collect(),
        }
    }
}
