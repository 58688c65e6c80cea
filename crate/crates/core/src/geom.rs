//! Small 3D vector type shared by the geometry, antenna and fading modules.

use std::ops::{Add, Mul, Neg, Sub};

use crate::num::Float;

/// 3D vector in the global frame (meters, or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Float> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Norm of the horizontal (x, y) projection.
    pub fn norm_2d(self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the vertical axis by `angle` (right-handed, radians).
    pub fn rotate_z(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(self.x * c - self.y * s, self.x * s + self.y * c, self.z)
    }

    /// Spherical unit vector for zenith angle `theta` and azimuth `phi`.
    ///
    /// `theta = 0` points straight up, `theta = pi/2` is the horizon;
    /// azimuth is measured from the x axis towards y.
    pub fn from_spherical(theta: T, phi: T) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::new(st * cp, st * sp, ct)
    }

    /// Azimuth of this vector in `(-pi, pi]`.
    pub fn azimuth(self) -> T {
        self.y.atan2(self.x)
    }

    /// Zenith angle of this vector in `[0, pi]`.
    pub fn zenith(self) -> T {
        let d = self.norm();
        if d == T::zero() {
            return T::zero();
        }
        (self.z / d).acos()
    }
}

impl<T: Float> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Float> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Float> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<T: Float> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Wrap an angle to `[0, 2*pi)`.
pub fn wrap_to_two_pi<T: Float>(a: T) -> T {
    let two_pi = T::of(2.0) * T::PI();
    let mut r = a % two_pi;
    if r < T::zero() {
        r += two_pi;
    }
    // `%` can return exactly two_pi after the correction when a is a tiny
    // negative number; fold it back.
    if r >= two_pi {
        r -= two_pi;
    }
    r
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_to_pi<T: Float>(a: T) -> T {
    let two_pi = T::of(2.0) * T::PI();
    let mut r = a % two_pi;
    if r > T::PI() {
        r -= two_pi;
    } else if r <= -T::PI() {
        r += two_pi;
    }
    r
}

/// Reflect a zenith angle into `[0, pi]` (mirror at both poles).
pub fn reflect_zenith<T: Float>(a: T) -> T {
    let mut r = wrap_to_two_pi(a);
    if r > T::PI() {
        r = T::of(2.0) * T::PI() - r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_round_trip() {
        let v: Vec3<f64> = Vec3::from_spherical(1.1, -2.3);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert!((v.zenith() - 1.1).abs() < 1e-14);
        assert!((v.azimuth() + 2.3).abs() < 1e-14);
    }

    #[test]
    fn wrap_and_reflect() {
        assert!((wrap_to_two_pi(-0.1_f64) - (2.0 * std::f64::consts::PI - 0.1)).abs() < 1e-12);
        assert!((wrap_to_pi(3.5_f64) - (3.5 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
        // 190 degrees reflects to 170.
        let a = 190.0_f64.to_radians();
        assert!((reflect_zenith(a) - 170.0_f64.to_radians()).abs() < 1e-12);
        // -10 degrees reflects to 10.
        let b = (-10.0_f64).to_radians();
        assert!((reflect_zenith(b) - 10.0_f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn rotate_z_quarter_turn() {
        let v = Vec3::new(1.0_f64, 0.0, 3.0).rotate_z(std::f64::consts::FRAC_PI_2);
        assert!(v.x.abs() < 1e-15);
        assert!((v.y - 1.0).abs() < 1e-15);
        assert_eq!(v.z, 3.0);
    }
}
