//! Deployment scenarios, node placement, buildings and mobility.
//!
//! Scenario constants follow TR 38.900 Table 7.2-1 as condensed in the
//! model's main parameter table: UMi (ISD 200 m, BS at 10 m), UMa (500 m,
//! 25 m), RMa (1732-5000 m, 35 m), indoor office (20 m, 3 m). The pathloss
//! equations accept links down to d2D = 10 m for the outdoor scenarios.

use crate::geom::{wrap_to_pi, Vec3};
use crate::num::Float;
use crate::{antenna::AntennaPanel, Error, Result};

/// Deployment scenario kind.
///
/// The two indoor variants share pathloss and fading tables but use
/// different LOS probability curves (mixed vs open office).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Urban microcell, street canyon.
    UMi,
    /// Urban macrocell.
    UMa,
    /// Rural macrocell. Validated for 6-7 GHz only.
    RMa,
    /// Indoor mixed office.
    InMO,
    /// Indoor open office.
    InOO,
}

impl Scenario {
    pub fn is_indoor(self) -> bool {
        matches!(self, Scenario::InMO | Scenario::InOO)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::UMi => "UMi",
            Scenario::UMa => "UMa",
            Scenario::RMa => "RMa",
            Scenario::InMO => "InMO",
            Scenario::InOO => "InOO",
        }
    }
}

/// Per-scenario deployment constants.
#[derive(Debug, Clone)]
pub struct ScenarioParams<T> {
    pub kind: Scenario,
    /// Inter-site distance in meters (RMa default is the low end of its
    /// 1732-5000 m range).
    pub isd: T,
    /// Default BS antenna height in meters.
    pub h_bs_default: T,
    /// Valid UT height range in meters.
    pub h_ut_range: (T, T),
    /// Minimum usable 2D distance in meters (pathloss validity).
    pub d2d_min: T,
    /// Supported carrier frequency range in Hz.
    pub fc_range: (T, T),
}

impl<T: Float> ScenarioParams<T> {
    pub fn new(kind: Scenario) -> Self {
        let of = T::of;
        match kind {
            Scenario::UMi => Self {
                kind,
                isd: of(200.0),
                h_bs_default: of(10.0),
                h_ut_range: (of(1.5), of(22.5)),
                d2d_min: of(10.0),
                fc_range: (of(6e9), of(100e9)),
            },
            Scenario::UMa => Self {
                kind,
                isd: of(500.0),
                h_bs_default: of(25.0),
                h_ut_range: (of(1.5), of(22.5)),
                d2d_min: of(10.0),
                fc_range: (of(6e9), of(100e9)),
            },
            Scenario::RMa => Self {
                kind,
                isd: of(1732.0),
                h_bs_default: of(35.0),
                h_ut_range: (of(1.0), of(10.0)),
                d2d_min: of(10.0),
                fc_range: (of(6e9), of(7e9)),
            },
            Scenario::InMO | Scenario::InOO => Self {
                kind,
                isd: of(20.0),
                h_bs_default: of(3.0),
                h_ut_range: (of(1.0), of(2.5)),
                d2d_min: of(0.0),
                fc_range: (of(6e9), of(100e9)),
            },
        }
    }

    pub fn check_frequency(&self, fc_hz: T) -> Result<()> {
        if fc_hz < self.fc_range.0 || fc_hz > self.fc_range.1 {
            return Err(Error::OutOfValidityRange {
                quantity: "carrier frequency (Hz)",
                value: fc_hz.to_f64().unwrap_or(f64::NAN),
                min: self.fc_range.0.to_f64().unwrap_or(f64::NAN),
                max: self.fc_range.1.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn check_ut_height(&self, h_ut: T) -> Result<()> {
        if h_ut < self.h_ut_range.0 || h_ut > self.h_ut_range.1 {
            return Err(Error::OutOfValidityRange {
                quantity: "UT height (m)",
                value: h_ut.to_f64().unwrap_or(f64::NAN),
                min: self.h_ut_range.0.to_f64().unwrap_or(f64::NAN),
                max: self.h_ut_range.1.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// Node role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Bs,
    Ut,
}

/// A node with its kinematic state and attached antenna panel.
///
/// When buildings are present the indoor state of a UT is derived
/// geometrically (point-in-box); otherwise the flag set here is used.
/// BSs must be outdoor whenever buildings are deployed.
#[derive(Debug, Clone)]
pub struct NodeState<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub indoor: bool,
    pub role: Role,
    pub panel: AntennaPanel<T>,
}

/// Building type, selecting the O2I penetration model for UMa/UMi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildingType {
    Residential,
    Commercial,
    Office,
}

impl BuildingType {
    pub fn name(self) -> &'static str {
        match self {
            BuildingType::Residential => "residential",
            BuildingType::Commercial => "commercial",
            BuildingType::Office => "office",
        }
    }
}

/// Axis-aligned building box, treated as a closed set for intersection.
#[derive(Debug, Clone)]
pub struct Building<T> {
    min: Vec3<T>,
    max: Vec3<T>,
    pub building_type: BuildingType,
}

impl<T: Float> Building<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>, building_type: BuildingType) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::Config {
                field: "building".into(),
                message: "min corner must be strictly below max corner in all axes".into(),
            });
        }
        Ok(Self {
            min,
            max,
            building_type,
        })
    }

    pub fn min(&self) -> Vec3<T> {
        self.min
    }

    pub fn max(&self) -> Vec3<T> {
        self.max
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Geometry of one directed link.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeometry<T> {
    /// Horizontal-plane distance in meters.
    pub d2d: T,
    /// 3D distance in meters.
    pub d3d: T,
    /// Azimuth of the ray from a to b, global frame, `(-pi, pi]`.
    pub azimuth: T,
    /// Elevation of the ray from a to b (above horizon positive).
    pub elevation: T,
}

impl<T: Float> LinkGeometry<T> {
    /// Zenith angle of the ray from a to b.
    pub fn zenith(&self) -> T {
        T::FRAC_PI_2() - self.elevation
    }
}

/// Distances and pointing angles for the line of sight from `a` to `b`.
pub fn link_geometry<T: Float>(a: &NodeState<T>, b: &NodeState<T>) -> Result<LinkGeometry<T>> {
    if !a.position.is_finite() || !b.position.is_finite() {
        return Err(Error::DegenerateLink);
    }
    let d = b.position - a.position;
    let d2d = d.norm_2d();
    let d3d = d.norm();
    if d3d == T::zero() {
        return Err(Error::DegenerateLink);
    }
    Ok(LinkGeometry {
        d2d,
        d3d,
        azimuth: d.azimuth(),
        elevation: d.z.atan2(d2d),
    })
}

/// True iff the closed segment p1-p2 intersects any building box.
///
/// Slab method specialised to a segment: intersect the parameter interval
/// [0, 1] with the three per-axis slabs. Boxes are closed, so a grazing
/// segment that only touches a face still reports an intersection.
pub fn segment_intersects_buildings<T: Float>(
    p1: Vec3<T>,
    p2: Vec3<T>,
    buildings: &[Building<T>],
) -> bool {
    buildings.iter().any(|b| segment_intersects_box(p1, p2, b))
}

fn segment_intersects_box<T: Float>(p1: Vec3<T>, p2: Vec3<T>, b: &Building<T>) -> bool {
    let dir = p2 - p1;
    let mut t_min = T::zero();
    let mut t_max = T::one();
    for (o, d, lo, hi) in [
        (p1.x, dir.x, b.min.x, b.max.x),
        (p1.y, dir.y, b.min.y, b.max.y),
        (p1.z, dir.z, b.min.z, b.max.z),
    ] {
        if d == T::zero() {
            if o < lo || o > hi {
                return false;
            }
            // Parallel to and within the slab: no constraint from this axis.
            continue;
        }
        let inv = T::one() / d;
        let (t0, t1) = {
            let a = (lo - o) * inv;
            let b = (hi - o) * inv;
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        t_min = t_min.max(t0);
        t_max = t_max.min(t1);
        if t_min > t_max {
            return false;
        }
    }
    true
}

/// True iff the point lies inside (or on) any building box.
pub fn point_in_buildings<T: Float>(p: Vec3<T>, buildings: &[Building<T>]) -> bool {
    buildings.iter().any(|b| b.contains(p))
}

/// Piecewise-linear mobility trace.
#[derive(Debug, Clone)]
pub struct MobilityTrace<T> {
    /// Waypoints as (time, position), strictly increasing in time.
    waypoints: Vec<(T, Vec3<T>)>,
}

impl<T: Float> MobilityTrace<T> {
    pub fn new(waypoints: Vec<(T, Vec3<T>)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for w in waypoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config {
                    field: "waypoint".into(),
                    message: "waypoint times must be strictly increasing".into(),
                });
            }
        }
        Ok(Self { waypoints })
    }

    /// Stationary trace.
    pub fn fixed(position: Vec3<T>) -> Self {
        Self {
            waypoints: vec![(T::zero(), position)],
        }
    }

    /// Constant-velocity trace from `start` over `duration` seconds.
    pub fn constant_velocity(start: Vec3<T>, velocity: Vec3<T>, duration: T) -> Self {
        if velocity.norm() == T::zero() || duration <= T::zero() {
            return Self::fixed(start);
        }
        Self {
            waypoints: vec![(T::zero(), start), (duration, start + velocity * duration)],
        }
    }

    pub fn span(&self) -> (T, T) {
        (
            self.waypoints[0].0,
            self.waypoints[self.waypoints.len() - 1].0,
        )
    }

    /// Position at time `t` (piecewise-linear interpolation).
    pub fn position_at(&self, t: T) -> Result<Vec3<T>> {
        let (start, end) = self.span();
        if self.waypoints.len() == 1 {
            return Ok(self.waypoints[0].1);
        }
        if t < start || t > end {
            return Err(Error::TimeOutsideTrace {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: start.to_f64().unwrap_or(f64::NAN),
                end: end.to_f64().unwrap_or(f64::NAN),
            });
        }
        let idx = self
            .waypoints
            .windows(2)
            .position(|w| t >= w[0].0 && t <= w[1].0)
            .expect("t within span");
        let (t0, p0) = self.waypoints[idx];
        let (t1, p1) = self.waypoints[idx + 1];
        let frac = (t - t0) / (t1 - t0);
        Ok(p0 + (p1 - p0) * frac)
    }

    /// Velocity at time `t` (segment slope; zero for a single waypoint).
    pub fn velocity_at(&self, t: T) -> Result<Vec3<T>> {
        if self.waypoints.len() == 1 {
            return Ok(Vec3::zero());
        }
        let (start, end) = self.span();
        if t < start || t > end {
            return Err(Error::TimeOutsideTrace {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: start.to_f64().unwrap_or(f64::NAN),
                end: end.to_f64().unwrap_or(f64::NAN),
            });
        }
        let idx = self
            .waypoints
            .windows(2)
            .position(|w| t >= w[0].0 && t <= w[1].0)
            .expect("t within span");
        let (t0, p0) = self.waypoints[idx];
        let (t1, p1) = self.waypoints[idx + 1];
        Ok((p1 - p0) * (T::one() / (t1 - t0)))
    }

    pub fn waypoints(&self) -> &[(T, Vec3<T>)] {
        &self.waypoints
    }
}

/// Antisymmetry helper used by tests: difference of the two directed
/// azimuths modulo 2*pi (should be pi for a valid pair).
pub fn azimuth_antisymmetry_defect<T: Float>(az_ab: T, az_ba: T) -> T {
    wrap_to_pi(az_ab - az_ba - T::PI()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::AntennaPanel;
    use proptest::prelude::*;

    fn node(pos: [f64; 3]) -> NodeState<f64> {
        NodeState {
            position: Vec3::new(pos[0], pos[1], pos[2]),
            velocity: Vec3::zero(),
            indoor: false,
            role: Role::Ut,
            panel: AntennaPanel::default_ut(),
        }
    }

    #[test]
    fn table_defaults() {
        let umi: ScenarioParams<f64> = ScenarioParams::new(Scenario::UMi);
        assert_eq!(umi.isd, 200.0);
        assert_eq!(umi.h_bs_default, 10.0);
        let uma: ScenarioParams<f64> = ScenarioParams::new(Scenario::UMa);
        assert_eq!(uma.isd, 500.0);
        assert_eq!(uma.h_bs_default, 25.0);
        let rma: ScenarioParams<f64> = ScenarioParams::new(Scenario::RMa);
        assert_eq!(rma.isd, 1732.0);
        assert_eq!(rma.h_bs_default, 35.0);
        let ino: ScenarioParams<f64> = ScenarioParams::new(Scenario::InOO);
        assert_eq!(ino.isd, 20.0);
        assert_eq!(ino.h_bs_default, 3.0);
        // Pathloss-usable minimum distance for the outdoor scenarios.
        for p in [umi, uma, rma] {
            assert_eq!(p.d2d_min, 10.0);
        }
    }

    #[test]
    fn rma_frequency_limit() {
        let rma: ScenarioParams<f64> = ScenarioParams::new(Scenario::RMa);
        assert!(rma.check_frequency(6.5e9).is_ok());
        assert!(rma.check_frequency(28e9).is_err());
        let umi: ScenarioParams<f64> = ScenarioParams::new(Scenario::UMi);
        assert!(umi.check_frequency(28e9).is_ok());
    }

    #[test]
    fn geometry_bs_ut_example() {
        // BS (0,0,35), UT (100,0,1.5): d2D = 100, d3D = sqrt(100^2 + 33.5^2).
        let g = link_geometry(&node([0.0, 0.0, 35.0]), &node([100.0, 0.0, 1.5])).unwrap();
        assert!((g.d2d - 100.0).abs() < 1e-12);
        assert!((g.d3d - (100.0_f64.powi(2) + 33.5_f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((g.d3d - 105.46).abs() < 0.01);
    }

    #[test]
    fn geometry_vertical_link() {
        let g = link_geometry(&node([3.0, 4.0, 10.0]), &node([3.0, 4.0, 1.5])).unwrap();
        assert_eq!(g.d2d, 0.0);
        assert!((g.d3d - 8.5).abs() < 1e-12);
    }

    #[test]
    fn geometry_horizontal_link() {
        let g = link_geometry(&node([0.0, 0.0, 7.0]), &node([50.0, 0.0, 7.0])).unwrap();
        assert_eq!(g.elevation, 0.0);
        assert_eq!(g.d2d, g.d3d);
        assert_eq!(g.d3d, 50.0);
    }

    #[test]
    fn degenerate_link_is_an_error() {
        assert!(matches!(
            link_geometry(&node([1.0, 2.0, 3.0]), &node([1.0, 2.0, 3.0])),
            Err(Error::DegenerateLink)
        ));
    }

    fn test_box() -> Building<f64> {
        Building::new(
            Vec3::new(10.0, -5.0, 0.0),
            Vec3::new(20.0, 5.0, 15.0),
            BuildingType::Residential,
        )
        .unwrap()
    }

    #[test]
    fn segment_above_buildings_is_clear() {
        let b = vec![test_box()];
        assert!(!segment_intersects_buildings(
            Vec3::new(0.0, 0.0, 20.0),
            Vec3::new(30.0, 0.0, 20.0),
            &b
        ));
    }

    #[test]
    fn segment_from_inside_hits() {
        let b = vec![test_box()];
        assert!(segment_intersects_buildings(
            Vec3::new(15.0, 0.0, 5.0),
            Vec3::new(40.0, 0.0, 5.0),
            &b
        ));
    }

    #[test]
    fn grazing_segment_touching_one_face_hits() {
        // Runs along the z = 15 top face: closed-box convention counts it.
        let b = vec![test_box()];
        assert!(segment_intersects_buildings(
            Vec3::new(0.0, 0.0, 15.0),
            Vec3::new(30.0, 0.0, 15.0),
            &b
        ));
    }

    #[test]
    fn mobility_single_waypoint() {
        let tr = MobilityTrace::fixed(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(tr.position_at(123.0).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(tr.velocity_at(123.0).unwrap(), Vec3::zero());
    }

    #[test]
    fn mobility_linear_interpolation() {
        let tr = MobilityTrace::new(vec![
            (0.0, Vec3::new(0.0, 0.0, 1.5)),
            (10.0, Vec3::new(0.0, 10.0, 1.5)),
        ])
        .unwrap();
        assert_eq!(tr.position_at(5.0).unwrap(), Vec3::new(0.0, 5.0, 1.5));
    }

    #[test]
    fn mobility_moving_ut_trace() {
        // Start (100,0,1.5), 1 m/s along y: at t=20 the UT is at (100,20,1.5).
        let tr =
            MobilityTrace::constant_velocity(Vec3::new(100.0, 0.0, 1.5), Vec3::new(0.0, 1.0, 0.0), 60.0);
        assert_eq!(tr.position_at(20.0).unwrap(), Vec3::new(100.0, 20.0, 1.5));
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            MobilityTrace::<f64>::new(vec![]),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn velocity_consistency() {
        let tr = MobilityTrace::new(vec![
            (0.0, Vec3::new(0.0, 0.0, 1.5)),
            (10.0, Vec3::new(20.0, -10.0, 1.5)),
            (30.0, Vec3::new(20.0, 30.0, 1.5)),
        ])
        .unwrap();
        for &t in &[2.0, 8.0, 12.0, 25.0] {
            let h = 1e-6;
            let v = tr.velocity_at(t).unwrap();
            let fd = (tr.position_at(t + h).unwrap() - tr.position_at(t - h).unwrap())
                * (1.0 / (2.0 * h));
            assert!((fd - v).norm() < 1e-6 * (1.0 + v.norm()));
        }
    }

    proptest! {
        #[test]
        fn link_geometry_symmetry(
            ax in -500.0..500.0f64, ay in -500.0..500.0f64, az in 1.0..50.0f64,
            bx in -500.0..500.0f64, by in -500.0..500.0f64, bz in 1.0..50.0f64,
        ) {
            prop_assume!((ax - bx).abs() > 1e-6 || (ay - by).abs() > 1e-6);
            let a = node([ax, ay, az]);
            let b = node([bx, by, bz]);
            let gab = link_geometry(&a, &b).unwrap();
            let gba = link_geometry(&b, &a).unwrap();
            prop_assert!((gab.d2d - gba.d2d).abs() < 1e-9);
            prop_assert!((gab.d3d - gba.d3d).abs() < 1e-9);
            prop_assert!(gab.d3d >= gab.d2d);
            prop_assert!(azimuth_antisymmetry_defect(gab.azimuth, gba.azimuth) < 1e-9);
        }

        #[test]
        fn slab_test_agrees_with_dense_sampling(
            seg in prop::array::uniform2(prop::array::uniform3(-30.0..60.0f64)),
            bmin in prop::array::uniform3(0.0..20.0f64),
            ext in prop::array::uniform3(1.0..15.0f64),
        ) {
            let b = Building::new(
                Vec3::new(bmin[0], bmin[1], bmin[2]),
                Vec3::new(bmin[0] + ext[0], bmin[1] + ext[1], bmin[2] + ext[2]),
                BuildingType::Office,
            ).unwrap();
            let p1 = Vec3::new(seg[0][0], seg[0][1], seg[0][2]);
            let p2 = Vec3::new(seg[1][0], seg[1][1], seg[1][2]);
            let exact = segment_intersects_box(p1, p2, &b);
            let n = 10_000;
            let sampled = (0..=n).any(|i| {
                let t = i as f64 / n as f64;
                b.contains(p1 + (p2 - p1) * t)
            });
            // Dense sampling can only miss thin grazing slices; it must never
            // find a hit the slab method misses.
            if sampled {
                prop_assert!(exact);
            }
            if exact && !sampled {
                // Measure-zero grazing case: the segment clips a sliver
                // thinner than the sampling step. Verify it really is thin by
                // checking the clipped parameter interval length.
                prop_assert!(clipped_interval_len(p1, p2, &b) < 2.0 / n as f64);
            }
        }
    }

    // Length of the [0,1] parameter interval the slab method retains.
    fn clipped_interval_len(p1: Vec3<f64>, p2: Vec3<f64>, b: &Building<f64>) -> f64 {
        let dir = p2 - p1;
        let mut t_min: f64 = 0.0;
        let mut t_max: f64 = 1.0;
        for (o, d, lo, hi) in [
            (p1.x, dir.x, b.min().x, b.max().x),
            (p1.y, dir.y, b.min().y, b.max().y),
            (p1.z, dir.z, b.min().z, b.max().z),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return 0.0;
                }
                continue;
            }
            let (t0, t1) = {
                let a = (lo - o) / d;
                let bb = (hi - o) / d;
                if a <= bb {
                    (a, bb)
                } else {
                    (bb, a)
                }
            };
            t_min = t_min.max(t0);
            t_max = t_max.min(t1);
        }
        (t_max - t_min).max(0.0)
    }
}
