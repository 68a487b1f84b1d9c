//! Inversion of background-subtracted receiver power into an edge image.
//!
//! For every hypothesized in-plane edge location and orientation, the
//! background-subtracted power is summed coherently over the receivers lying
//! on the corresponding Keller conic signature. The orientation maximizing
//! the summed intensity is kept per location, intensities from multiple
//! transmitter views are fused, and locations below a fraction of the global
//! maximum are masked out.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::forward::PowerGrid;
use crate::geometry::{keller_residual, EdgeSegment, MembershipTol, PlanarGrid, Point3};
use crate::{Error, Result};

/// The discrete set of uniformly spaced edge orientations tested at each
/// location, in `[0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationSet {
    angles: Vec<f64>,
}

impl OrientationSet {
    /// `n` uniformly spaced angles `k * pi / n`, `k = 0..n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonPositive("orientation count"));
        }
        Ok(OrientationSet {
            angles: (0..n).map(|k| k as f64 * PI / n as f64).collect(),
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Per-transmitter intensities over the hypothesis space, plus the derived
/// orientation map and edge mask.
#[derive(Debug, Clone)]
pub struct ImagingVolume {
    pub plane: PlanarGrid,
    pub orientations: OrientationSet,
    /// One entry per transmitter view, each `plane.len() * orientations.len()`
    /// intensities, location-major.
    pub views: Vec<ViewIntensities>,
    /// Per-location fused intensity (mean of per-view max-normalized bests).
    pub fused: Vec<f64>,
    /// Estimated orientation where the mask is set.
    pub orientation_map: Vec<Option<f64>>,
    pub mask: Vec<bool>,
    /// Set when every view was identically zero; the mask is then empty.
    pub all_zero_input: bool,
}

#[derive(Debug, Clone)]
pub struct ViewIntensities {
    pub tx: Point3,
    pub intensities: Vec<f64>,
}

impl ViewIntensities {
    pub fn intensity(&self, point_idx: usize, phi_idx: usize, n_phi: usize) -> f64 {
        self.intensities[point_idx * n_phi + phi_idx]
    }
}

/// The phase-compensating, conic-gated imaging kernel: zero when `p_r` is not
/// on the signature of the hypothesized edge, a unit-magnitude phase product
/// otherwise.
pub fn imaging_kernel(
    p_m: &Point3,
    p_r: &Point3,
    p_t: &Point3,
    phi: f64,
    grid: &PlanarGrid,
    lambda: f64,
) -> Result<Complex64> {
    let edge = EdgeSegment::in_plane(*p_m, phi, 1.0)?;
    let res = keller_residual(p_t, p_m, &edge.direction, p_r)?;
    let d_mr = p_m.distance(p_r);
    if libm::fabs(res) > MembershipTol::GridBand.threshold(grid.pitch_diag(), d_mr) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let d_tr = p_t.distance(p_r);
    Ok(Complex64::from_polar(1.0, -TAU * (d_tr - d_mr) / lambda))
}

/// Coherent intensity of the edge hypothesis `(p_m, phi)` for one transmitter
/// view. An empty signature yields 0. With `normalize_by_signature` the sum
/// is divided by the signature cardinality.
pub fn intensity(
    s_bar: &PowerGrid,
    p_m: &Point3,
    phi: f64,
    p_t: &Point3,
    lambda: f64,
    normalize_by_signature: bool,
) -> Result<f64> {
    let grid = &s_bar.grid;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for (i, (_, _, p_r)) in grid.iter_points().enumerate() {
        let k = imaging_kernel(p_m, &p_r, p_t, phi, grid, lambda)?;
        if k != Complex64::new(0.0, 0.0) {
            acc += s_bar.samples[i] * k;
            count += 1;
        }
    }
    let mut val = acc.norm();
    if normalize_by_signature && count > 0 {
        val /= count as f64;
    }
    Ok(val)
}

/// Maximizing orientation and its intensity; ties break toward the lowest
/// index of the orientation set.
pub fn orientation_argmax(
    s_bar: &PowerGrid,
    p_m: &Point3,
    phi_set: &OrientationSet,
    p_t: &Point3,
    lambda: f64,
    normalize_by_signature: bool,
) -> Result<(f64, f64)> {
    let mut best = (phi_set.angles[0], f64::NEG_INFINITY);
    for &phi in phi_set.angles() {
        let i = intensity(s_bar, p_m, phi, p_t, lambda, normalize_by_signature)?;
        if i > best.1 {
            best = (phi, i);
        }
    }
    Ok(best)
}

/// Evaluates all `(location, orientation)` hypotheses of one view in a single
/// pass over the receiver grid. Agrees with [`intensity`] call-by-call; the
/// per-receiver geometry is shared across orientations.
pub fn intensity_sweep(
    s_bar: &PowerGrid,
    plane: &PlanarGrid,
    phi_set: &OrientationSet,
    p_t: &Point3,
    lambda: f64,
    normalize_by_signature: bool,
) -> Result<ViewIntensities> {
    let grid = &s_bar.grid;
    let diag = grid.pitch_diag();
    let n_phi = phi_set.len();
    let trig: Vec<(f64, f64)> = phi_set
        .angles()
        .iter()
        .map(|&p| (libm::cos(p), libm::sin(p)))
        .collect();

    // Receiver-side quantities independent of the hypothesis.
    let receivers: Vec<(Point3, f64, f64)> = grid
        .iter_points()
        .enumerate()
        .map(|(i, (_, _, p_r))| (p_r, p_t.distance(&p_r), s_bar.samples[i]))
        .collect();

    let mut intensities = vec![0.0f64; plane.len() * n_phi];
    let mut acc = vec![Complex64::new(0.0, 0.0); n_phi];
    let mut counts = vec![0usize; n_phi];

    for (m_idx, (_, _, p_m)) in plane.iter_points().enumerate() {
        let to_tx = p_t.sub(&p_m);
        let n_tx = to_tx.norm();
        if n_tx < crate::geometry::UNIT_TOL {
            return Err(Error::CoincidentPoints("transmitter on the imaging plane"));
        }
        let u_tx = to_tx.scale(1.0 / n_tx);
        acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        counts.iter_mut().for_each(|c| *c = 0);

        for &(p_r, d_tr, s) in &receivers {
            let w = p_r.sub(&p_m);
            let d_mr = w.norm();
            if d_mr < crate::geometry::UNIT_TOL {
                continue;
            }
            // Unit-vector sum of Keller's law; the in-plane edge direction
            // only picks out its x and z components.
            let vx = w.x / d_mr + u_tx.x;
            let vz = w.z / d_mr + u_tx.z;
            let tol = 0.5 * diag / d_mr;
            let mut weighted: Option<Complex64> = None;
            for (pi, &(c, sn)) in trig.iter().enumerate() {
                let res = vx * c + vz * sn;
                if libm::fabs(res) <= tol {
                    let w = *weighted.get_or_insert_with(|| {
                        s * Complex64::from_polar(1.0, -TAU * (d_tr - d_mr) / lambda)
                    });
                    acc[pi] += w;
                    counts[pi] += 1;
                }
            }
        }
        for pi in 0..n_phi {
            let mut val = acc[pi].norm();
            if normalize_by_signature && counts[pi] > 0 {
                val /= counts[pi] as f64;
            }
            intensities[m_idx * n_phi + pi] = val;
        }
    }
    Ok(ViewIntensities {
        tx: *p_t,
        intensities,
    })
}

/// Builds the edge image from one or more transmitter views.
///
/// Per location the best orientation of each view is found, views are fused
/// by max-normalizing each view and averaging, the orientation is taken from
/// the view with the largest raw intensity at that location, and the mask
/// keeps locations whose fused intensity reaches `threshold_frac` of the
/// global maximum.
pub fn edge_image(
    s_bars: &[(PowerGrid, Point3)],
    plane: &PlanarGrid,
    phi_set: &OrientationSet,
    threshold_frac: f64,
    lambda: f64,
    normalize_by_signature: bool,
) -> Result<ImagingVolume> {
    if s_bars.is_empty() {
        return Err(Error::InvalidScene(
            alloc::string::String::from("edge_image requires at least one transmitter view"),
        ));
    }
    if !(threshold_frac > 0.0 && threshold_frac <= 1.0) {
        return Err(Error::AngleOutOfRange("threshold fraction must lie in (0, 1]"));
    }
    let dims = (s_bars[0].0.grid.n_u, s_bars[0].0.grid.n_v);
    for (g, _) in s_bars.iter().skip(1) {
        if (g.grid.n_u, g.grid.n_v) != dims {
            return Err(Error::GridMismatch {
                expected: dims,
                got: (g.grid.n_u, g.grid.n_v),
            });
        }
    }

    let n_phi = phi_set.len();
    let views: Vec<ViewIntensities> = s_bars
        .iter()
        .map(|(s_bar, tx)| {
            intensity_sweep(s_bar, plane, phi_set, tx, lambda, normalize_by_signature)
        })
        .collect::<Result<_>>()?;

    // Per view: best orientation per location and the view-global maximum.
    let mut per_view_best: Vec<Vec<(usize, f64)>> = Vec::with_capacity(views.len());
    let mut view_max: Vec<f64> = Vec::with_capacity(views.len());
    for view in &views {
        let mut best = Vec::with_capacity(plane.len());
        let mut vmax = 0.0f64;
        for m in 0..plane.len() {
            let row = &view.intensities[m * n_phi..(m + 1) * n_phi];
            let (mut bi, mut bv) = (0usize, row[0]);
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > bv {
                    bi = i;
                    bv = v;
                }
            }
            vmax = vmax.max(bv);
            best.push((bi, bv));
        }
        per_view_best.push(best);
        view_max.push(vmax);
    }

    let all_zero = view_max.iter().all(|&m| m == 0.0);
    let mut fused = vec![0.0f64; plane.len()];
    let mut phi_star_idx = vec![0usize; plane.len()];
    if !all_zero {
        for m in 0..plane.len() {
            let mut sum = 0.0;
            let mut best_raw = f64::NEG_INFINITY;
            for (vi, best) in per_view_best.iter().enumerate() {
                let (pi, raw) = best[m];
                if view_max[vi] > 0.0 {
                    sum += raw / view_max[vi];
                }
                if raw > best_raw {
                    best_raw = raw;
                    phi_star_idx[m] = pi;
                }
            }
            fused[m] = sum / views.len() as f64;
        }
    }

    let gmax = fused.iter().cloned().fold(0.0f64, f64::max);
    let mut mask = vec![false; plane.len()];
    let mut orientation_map = vec![None; plane.len()];
    if !all_zero && gmax > 0.0 {
        for m in 0..plane.len() {
            if fused[m] >= threshold_frac * gmax {
                mask[m] = true;
                orientation_map[m] = Some(phi_set.angles[phi_star_idx[m]]);
            }
        }
    }

    Ok(ImagingVolume {
        plane: plane.clone(),
        orientations: phi_set.clone(),
        views,
        fused,
        orientation_map,
        mask,
        all_zero_input: all_zero,
    })
}
