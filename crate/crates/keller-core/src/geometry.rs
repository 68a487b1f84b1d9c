//! Vector geometry, Keller-cone membership, conic signatures, and bisector
//! steering.
//!
//! Coordinate convention: the receiver grid lies in the plane `y = 0` with the
//! scene at `y > 0`. Inside the lattice designer the transmitter sits at the
//! origin instead; the functions here are frame-agnostic.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::{Error, Result};

/// Tolerance for unit-norm and orthogonality checks on constructed types.
pub const UNIT_TOL: f64 = 1e-9;

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A free vector in meters (difference of two points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A direction with Euclidean norm 1 (within [`UNIT_TOL`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Vector from `other` to `self`.
    pub fn sub(&self, other: &Point3) -> Vec3 {
        Vec3 {
            x: self.x - other.x,
            y: self.y - other.y,
            z: self.z - other.z,
        }
    }

    pub fn add(&self, v: &Vec3) -> Point3 {
        Point3::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.sub(other).norm()
    }
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    /// Normalizes to a unit vector; errors on (near-)zero norm.
    pub fn normalize(&self) -> Result<UnitVec3> {
        let n = self.norm();
        if n < UNIT_TOL {
            return Err(Error::DegenerateVector("cannot normalize near-zero vector"));
        }
        Ok(UnitVec3 {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        })
    }
}

impl UnitVec3 {
    /// Builds a unit vector, verifying the norm is 1 within [`UNIT_TOL`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = libm::sqrt(x * x + y * y + z * z);
        if libm::fabs(n - 1.0) > UNIT_TOL {
            return Err(Error::DegenerateVector("norm differs from 1"));
        }
        Ok(UnitVec3 { x, y, z })
    }

    pub const fn x(&self) -> f64 {
        self.x
    }
    pub const fn y(&self) -> f64 {
        self.y
    }
    pub const fn z(&self) -> f64 {
        self.z
    }

    /// The vertical "idle" direction `[0, 0, 1]`.
    pub const UP: UnitVec3 = UnitVec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot_vec(&self, v: &Vec3) -> f64 {
        self.x * v.x + self.y * v.y + self.z * v.z
    }
}

/// A straight edge segment, the diffracting primitive of this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSegment {
    pub midpoint: Point3,
    pub direction: UnitVec3,
    pub half_length: f64,
    /// Set when the edge lies in a plane parallel to the receiver grid; the
    /// direction is then `[cos phi, 0, sin phi]` with `phi` in `[0, pi)`.
    pub in_plane_angle: Option<f64>,
}

impl EdgeSegment {
    pub fn new(midpoint: Point3, direction: UnitVec3, half_length: f64) -> Result<Self> {
        if half_length <= 0.0 {
            return Err(Error::NonPositive("edge half_length"));
        }
        Ok(EdgeSegment {
            midpoint,
            direction,
            half_length,
            in_plane_angle: None,
        })
    }

    /// An edge parallel to the receiver-grid plane, described by the single
    /// angle it makes with the positive x-axis.
    pub fn in_plane(midpoint: Point3, phi: f64, half_length: f64) -> Result<Self> {
        if !(0.0..PI).contains(&phi) {
            return Err(Error::AngleOutOfRange("in-plane angle must lie in [0, pi)"));
        }
        let mut edge = EdgeSegment::new(
            midpoint,
            Vec3::new(libm::cos(phi), 0.0, libm::sin(phi)).normalize()?,
            half_length,
        )?;
        edge.in_plane_angle = Some(phi);
        Ok(edge)
    }
}

/// A planar rectangular grid of receiver (or evaluation) positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarGrid {
    pub origin: Point3,
    pub axis_u: UnitVec3,
    pub axis_v: UnitVec3,
    pub n_u: usize,
    pub n_v: usize,
    pub pitch_u: f64,
    pub pitch_v: f64,
}

impl PlanarGrid {
    pub fn new(
        origin: Point3,
        axis_u: UnitVec3,
        axis_v: UnitVec3,
        n_u: usize,
        n_v: usize,
        pitch_u: f64,
        pitch_v: f64,
    ) -> Result<Self> {
        if libm::fabs(axis_u.as_vec().dot(&axis_v.as_vec())) > UNIT_TOL {
            return Err(Error::DegenerateVector("grid axes are not orthogonal"));
        }
        if n_u == 0 || n_v == 0 {
            return Err(Error::NonPositive("grid point counts"));
        }
        if pitch_u <= 0.0 || pitch_v <= 0.0 {
            return Err(Error::NonPositive("grid pitches"));
        }
        Ok(PlanarGrid {
            origin,
            axis_u,
            axis_v,
            n_u,
            n_v,
            pitch_u,
            pitch_v,
        })
    }

    pub fn point(&self, u: usize, v: usize) -> Point3 {
        let du = self.axis_u.as_vec().scale(self.pitch_u * u as f64);
        let dv = self.axis_v.as_vec().scale(self.pitch_v * v as f64);
        self.origin.add(&du).add(&dv)
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diagonal of one grid cell, the length scale of the membership band.
    pub fn pitch_diag(&self) -> f64 {
        libm::sqrt(self.pitch_u * self.pitch_u + self.pitch_v * self.pitch_v)
    }

    /// Iterates `(u, v, position)` in row-major order (`u` outer).
    pub fn iter_points(&self) -> impl Iterator<Item = (usize, usize, Point3)> + '_ {
        (0..self.n_u).flat_map(move |u| (0..self.n_v).map(move |v| (u, v, self.point(u, v))))
    }
}

/// How a receiver point qualifies as lying on a Keller cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipTol {
    /// Distance-adaptive band one grid cell wide: a point `p_r` is a member
    /// iff `|residual| <= (pitch_diag / 2) / ||p_r - p_e||`.
    GridBand,
    /// Fixed residual threshold, used when testing point targets.
    Fixed(f64),
}

impl MembershipTol {
    pub fn threshold(&self, grid_pitch_diag: f64, dist_to_edge: f64) -> f64 {
        match self {
            MembershipTol::GridBand => 0.5 * grid_pitch_diag / dist_to_edge,
            MembershipTol::Fixed(t) => *t,
        }
    }
}

/// The set of grid points where a Keller cone crosses the aperture, with the
/// residual of each member.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSignature {
    /// `(u, v)` indices of member points, row-major order.
    pub members: Vec<(usize, usize)>,
    /// Cone residual at each member, parallel to `members`.
    pub residuals: Vec<f64>,
}

impl ConicSignature {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Cone residual of Keller's law of edge diffraction.
///
/// Returns the inner product of `unit(p_r - p_e) + unit(p_t - p_e)` with the
/// edge direction; the value is zero exactly when a diffracted ray from the
/// edge point `p_e` reaches `p_r`.
pub fn keller_residual(p_t: &Point3, p_e: &Point3, e_hat: &UnitVec3, p_r: &Point3) -> Result<f64> {
    let to_rx = p_r.sub(p_e);
    let to_tx = p_t.sub(p_e);
    let n_rx = to_rx.norm();
    let n_tx = to_tx.norm();
    if n_rx < UNIT_TOL {
        return Err(Error::CoincidentPoints("receiver coincides with edge point"));
    }
    if n_tx < UNIT_TOL {
        return Err(Error::CoincidentPoints(
            "transmitter coincides with edge point",
        ));
    }
    let sum = to_rx.scale(1.0 / n_rx).add(&to_tx.scale(1.0 / n_tx));
    Ok(e_hat.dot_vec(&sum))
}

/// Extracts the conic signature of an edge on a planar grid: exactly the grid
/// points whose residual passes the membership tolerance. The cone missing the
/// aperture yields an empty signature, not an error.
pub fn conic_signature(
    p_t: &Point3,
    edge: &EdgeSegment,
    grid: &PlanarGrid,
    tol: MembershipTol,
) -> Result<ConicSignature> {
    let diag = grid.pitch_diag();
    let mut members = Vec::new();
    let mut residuals = Vec::new();
    for (u, v, p_r) in grid.iter_points() {
        let res = keller_residual(p_t, &edge.midpoint, &edge.direction, &p_r)?;
        let dist = p_r.distance(&edge.midpoint);
        if libm::fabs(res) <= tol.threshold(diag, dist) {
            members.push((u, v));
            residuals.push(res);
        }
    }
    Ok(ConicSignature { members, residuals })
}

/// Free-space propagation phase `exp(-j 2 pi / lambda * ||p_a - p_b||)`.
pub fn green(p_a: &Point3, p_b: &Point3, lambda: f64) -> Result<Complex64> {
    if lambda <= 0.0 {
        return Err(Error::NonPositive("wavelength"));
    }
    let d = p_a.distance(p_b);
    if d < UNIT_TOL {
        return Err(Error::CoincidentPoints("green function endpoints"));
    }
    Ok(Complex64::from_polar(1.0, -TAU * d / lambda))
}

/// Orients an edge element at `p_elem` (transmitter at the origin) so that its
/// Keller cone passes through `p_target`: the normalized sum of the outgoing
/// direction toward the target and the incident direction from the source.
pub fn bisector_orientation(p_elem: &Point3, p_target: &Point3) -> Result<UnitVec3> {
    let incident = p_elem.sub(&Point3::ORIGIN);
    let n_inc = incident.norm();
    if n_inc < UNIT_TOL {
        return Err(Error::CoincidentPoints("element at the source origin"));
    }
    let out = p_target.sub(p_elem);
    let n_out = out.norm();
    if n_out < UNIT_TOL {
        return Err(Error::CoincidentPoints("target coincides with element"));
    }
    let sum = out.scale(1.0 / n_out).add(&incident.scale(1.0 / n_inc));
    sum.normalize().map_err(|_| Error::DegenerateOrientation)
}

/// Decomposes a unit vector into `(theta, phi)` of the parameterization
/// `e = [cos phi sin theta, cos phi cos theta, sin phi]`.
///
/// The vertical (idle) direction has an unconstrained azimuth; it is returned
/// as `theta = 0` by convention.
pub fn orientation_to_angles(e: &UnitVec3) -> (f64, f64) {
    let phi = libm::asin(e.z().clamp(-1.0, 1.0));
    let c = libm::cos(phi);
    if c < UNIT_TOL {
        return (0.0, phi);
    }
    let mut theta = libm::atan2(e.x(), e.y());
    if theta < 0.0 {
        theta += TAU;
    }
    (theta, phi)
}

/// Inverse of [`orientation_to_angles`]; `theta` in `[0, 2 pi)`, `phi` in
/// `[-pi/2, pi/2]`.
pub fn angles_to_orientation(theta: f64, phi: f64) -> Result<UnitVec3> {
    if !(0.0..TAU).contains(&theta) {
        return Err(Error::AngleOutOfRange("theta must lie in [0, 2 pi)"));
    }
    if !(-PI / 2.0..=PI / 2.0).contains(&phi) {
        return Err(Error::AngleOutOfRange("phi must lie in [-pi/2, pi/2]"));
    }
    let (sp, cp) = (libm::sin(phi), libm::cos(phi));
    let (st, ct) = (libm::sin(theta), libm::cos(theta));
    // Renormalize to absorb rounding in the trig products.
    Vec3::new(cp * st, cp * ct, sp).normalize()
}
