//! Forward synthesis of complex received signals and power on a receiver
//! grid, including background subtraction.
//!
//! The received signal at each grid point is the linear superposition of the
//! direct transmitter path, background point scatterers, and (optionally) the
//! in-region objects: specular point scatterers plus diffracting edges. An
//! edge contributes at most one ray per transmitter/receiver pair, taken from
//! the discretized edge point where the cone residual is stationary.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::geometry::{EdgeSegment, MembershipTol, PlanarGrid, Point3, UnitVec3};
use crate::{Error, Result};

/// Which spreading law a scattered path follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Edge diffraction: the diffracted leg decays as `1/sqrt(r)`.
    Edge,
    /// Point (tip-like) scattering: the scattered leg decays as `1/r`.
    Point,
}

/// A transmitter with complex source amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub position: Point3,
    pub amplitude: Complex64,
}

/// A diffracting edge with a real reflectivity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScatterer {
    pub segment: EdgeSegment,
    pub weight: f64,
}

/// A specular point scatterer with complex reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScatterer {
    pub position: Point3,
    pub amplitude: Complex64,
}

/// Axis-aligned box bounding the imaged region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Point3,
    pub max: Point3,
}

impl Region {
    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// A scene: wavelength, transmitters, diffracting edges, in-region point
/// scatterers, and out-of-region background scatterers.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub lambda: f64,
    pub transmitters: Vec<Transmitter>,
    pub edges: Vec<EdgeScatterer>,
    pub object_points: Vec<PointScatterer>,
    pub background_points: Vec<PointScatterer>,
    pub region: Region,
}

impl Scene {
    /// Checks the structural invariants: positive wavelength, objects and
    /// edges inside the region, background scatterers outside it.
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::NonPositive("scene wavelength"));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if !self.region.contains(&e.segment.midpoint) {
                return Err(Error::InvalidScene(format!("edge {i} lies outside the region")));
            }
        }
        for (i, o) in self.object_points.iter().enumerate() {
            if !self.region.contains(&o.position) {
                return Err(Error::InvalidScene(format!(
                    "object point {i} lies outside the region"
                )));
            }
        }
        for (i, b) in self.background_points.iter().enumerate() {
            if self.region.contains(&b.position) {
                return Err(Error::InvalidScene(format!(
                    "background point {i} lies inside the region"
                )));
            }
        }
        Ok(())
    }
}

/// Complex field samples on a planar grid, row-major in `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub grid: PlanarGrid,
    pub samples: Vec<Complex64>,
}

/// Real power samples on a planar grid, row-major in `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub grid: PlanarGrid,
    pub samples: Vec<f64>,
}

impl PowerGrid {
    pub fn sample(&self, u: usize, v: usize) -> f64 {
        self.samples[u * self.grid.n_v + v]
    }
}

/// Amplitude attenuation of a `p_t -> p_o -> p_r` scattered path with source
/// amplitude `c`: the first leg spreads spherically, the second per the path
/// kind's decay law.
pub fn path_amplitude(
    p_t: &Point3,
    p_o: &Point3,
    p_r: &Point3,
    kind: PathKind,
    c: f64,
) -> Result<f64> {
    let d_in = p_t.distance(p_o);
    let d_out = p_o.distance(p_r);
    if d_in < crate::geometry::UNIT_TOL || d_out < crate::geometry::UNIT_TOL {
        return Err(Error::CoincidentPoints("scattered path legs"));
    }
    Ok(match kind {
        PathKind::Edge => c / (d_in * libm::sqrt(d_out)),
        PathKind::Point => c / (d_in * d_out),
    })
}

fn phase(lambda: f64, dist: f64) -> Complex64 {
    Complex64::from_polar(1.0, -core::f64::consts::TAU * dist / lambda)
}

fn point_contribution(
    lambda: f64,
    tx: &Transmitter,
    s: &PointScatterer,
    p_r: &Point3,
    what: &dyn Fn() -> String,
) -> Result<Complex64> {
    let amp = path_amplitude(&tx.position, &s.position, p_r, PathKind::Point, 1.0)
        .map_err(|_| Error::InvalidScene(what()))?;
    let d_in = tx.position.distance(&s.position);
    let d_out = s.position.distance(p_r);
    Ok(tx.amplitude * s.amplitude * amp * phase(lambda, d_in + d_out))
}

struct EdgeSamples {
    midpoint: Point3,
    direction: UnitVec3,
    half_length: f64,
    tx: Point3,
    /// Arc offsets of the coarse scan samples from the midpoint.
    offsets: Vec<f64>,
    /// Spacing between consecutive scan samples.
    seg: f64,
}

impl EdgeSamples {
    fn build(edge: &EdgeSegment, tx: &Point3, step: f64) -> Result<Self> {
        let n = libm::ceil(2.0 * edge.half_length / step).max(1.0) as usize;
        let seg = 2.0 * edge.half_length / n as f64;
        let dir = edge.direction.as_vec();
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let s = -edge.half_length + (i as f64 + 0.5) * seg;
            let p = edge.midpoint.add(&dir.scale(s));
            if tx.distance(&p) < crate::geometry::UNIT_TOL {
                return Err(Error::CoincidentPoints("transmitter on the edge"));
            }
            offsets.push(s);
        }
        Ok(EdgeSamples {
            midpoint: edge.midpoint,
            direction: edge.direction,
            half_length: edge.half_length,
            tx: *tx,
            offsets,
            seg,
        })
    }

    /// Cone residual, `tx` distance, and `p_r` distance at arc offset `s`.
    fn residual_at(&self, s: f64, p_r: &Point3) -> (f64, f64, f64) {
        let p = self.midpoint.add(&self.direction.as_vec().scale(s));
        let to_tx = self.tx.sub(&p);
        let to_rx = p_r.sub(&p);
        let d_in = to_tx.norm();
        let d_out = to_rx.norm();
        let res = self.direction.dot_vec(&to_tx.scale(1.0 / d_in.max(f64::MIN_POSITIVE)))
            + self.direction.dot_vec(&to_rx.scale(1.0 / d_out.max(f64::MIN_POSITIVE)));
        (res, d_in, d_out)
    }

    /// Contribution of this edge at `p_r`: the stationary point of the cone
    /// residual along the edge, gated by the grid membership band. A coarse
    /// scan brackets the sign change, bisection pins it down, so the result
    /// depends on the scan step only through second order terms.
    fn contribution(
        &self,
        lambda: f64,
        weight: f64,
        tx_amplitude: Complex64,
        p_r: &Point3,
        pitch_diag: f64,
    ) -> Complex64 {
        let mut best: Option<(f64, f64)> = None; // (|res|, s)
        for &s in &self.offsets {
            let (res, _, d_out) = self.residual_at(s, p_r);
            if d_out < crate::geometry::UNIT_TOL {
                continue;
            }
            let abs = libm::fabs(res);
            if best.map_or(true, |(b, _)| abs < b) {
                best = Some((abs, s));
            }
        }
        let Some((_, s_best)) = best else {
            return Complex64::new(0.0, 0.0);
        };

        let mut lo = (s_best - self.seg).max(-self.half_length);
        let mut hi = (s_best + self.seg).min(self.half_length);
        let (mut f_lo, _, _) = self.residual_at(lo, p_r);
        let (f_hi, _, _) = self.residual_at(hi, p_r);
        let s_star = if f_lo == 0.0 {
            lo
        } else if f_hi == 0.0 {
            hi
        } else if f_lo * f_hi < 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (f_mid, _, _) = self.residual_at(mid, p_r);
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if f_lo * f_mid < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    f_lo = f_mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            // The residual is monotone along the edge, so when no sign
            // change falls inside the bracket the minimizer sits at an
            // exact edge endpoint.
            let (f_neg, _, _) = self.residual_at(-self.half_length, p_r);
            let (f_pos, _, _) = self.residual_at(self.half_length, p_r);
            if libm::fabs(f_neg) <= libm::fabs(f_pos) {
                -self.half_length
            } else {
                self.half_length
            }
        };

        let (res, d_in, d_out) = self.residual_at(s_star, p_r);
        if d_out < crate::geometry::UNIT_TOL {
            return Complex64::new(0.0, 0.0);
        }
        if libm::fabs(res) <= MembershipTol::GridBand.threshold(pitch_diag, d_out) {
            let amp = weight / (d_in * libm::sqrt(d_out));
            tx_amplitude * amp * phase(lambda, d_in + d_out)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// Synthesizes the complex received field on `grid`, with or without the
/// in-region objects (the background and direct paths are always present).
pub fn simulate_field(scene: &Scene, grid: &PlanarGrid, with_objects: bool) -> Result<FieldGrid> {
    simulate_field_with_step(scene, grid, with_objects, scene.lambda / 10.0)
}

/// Like [`simulate_field`] with an explicit edge discretization step.
pub fn simulate_field_with_step(
    scene: &Scene,
    grid: &PlanarGrid,
    with_objects: bool,
    edge_step: f64,
) -> Result<FieldGrid> {
    scene.validate()?;
    if edge_step <= 0.0 {
        return Err(Error::NonPositive("edge discretization step"));
    }
    let diag = grid.pitch_diag();

    // Per-transmitter edge sample caches.
    let mut edge_samples: Vec<Vec<EdgeSamples>> = Vec::with_capacity(scene.transmitters.len());
    if with_objects {
        for tx in &scene.transmitters {
            let mut per_tx = Vec::with_capacity(scene.edges.len());
            for (i, e) in scene.edges.iter().enumerate() {
                per_tx.push(
                    EdgeSamples::build(&e.segment, &tx.position, edge_step)
                        .map_err(|_| Error::InvalidScene(format!("edge {i} touches a transmitter")))?,
                );
            }
            edge_samples.push(per_tx);
        }
    }

    let mut samples = Vec::with_capacity(grid.len());
    for (_, _, p_r) in grid.iter_points() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (ti, tx) in scene.transmitters.iter().enumerate() {
            let d_direct = tx.position.distance(&p_r);
            if d_direct < crate::geometry::UNIT_TOL {
                return Err(Error::InvalidScene(format!(
                    "transmitter {ti} coincides with a grid point"
                )));
            }
            acc += tx.amplitude / d_direct * phase(scene.lambda, d_direct);

            for (bi, b) in scene.background_points.iter().enumerate() {
                acc += point_contribution(scene.lambda, tx, b, &p_r, &|| {
                    format!("background point {bi} coincides with a transmitter or grid point")
                })?;
            }
            if with_objects {
                for (oi, o) in scene.object_points.iter().enumerate() {
                    acc += point_contribution(scene.lambda, tx, o, &p_r, &|| {
                        format!("object point {oi} coincides with a transmitter or grid point")
                    })?;
                }
                for (ei, e) in scene.edges.iter().enumerate() {
                    acc += edge_samples[ti][ei].contribution(
                        scene.lambda,
                        e.weight,
                        tx.amplitude,
                        &p_r,
                        diag,
                    );
                }
            }
        }
        samples.push(acc);
    }
    Ok(FieldGrid {
        grid: grid.clone(),
        samples,
    })
}

/// Pointwise squared magnitude of the received field.
pub fn power(field: &FieldGrid) -> PowerGrid {
    PowerGrid {
        grid: field.grid.clone(),
        samples: field.samples.iter().map(|s| s.norm_sqr()).collect(),
    }
}

/// Pointwise background subtraction; samples may go negative.
pub fn background_subtract(p_with: &PowerGrid, p_bg: &PowerGrid) -> Result<PowerGrid> {
    if p_with.grid != p_bg.grid {
        return Err(Error::GridMismatch {
            expected: (p_with.grid.n_u, p_with.grid.n_v),
            got: (p_bg.grid.n_u, p_bg.grid.n_v),
        });
    }
    Ok(PowerGrid {
        grid: p_with.grid.clone(),
        samples: p_with
            .samples
            .iter()
            .zip(&p_bg.samples)
            .map(|(a, b)| a - b)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{conic_signature, Vec3};
    use alloc::vec;

    fn test_grid() -> PlanarGrid {
        PlanarGrid::new(
            Point3::new(-0.679, 0.0, -0.615),
            Vec3::new(1.0, 0.0, 0.0).normalize().unwrap(),
            Vec3::new(0.0, 0.0, 1.0).normalize().unwrap(),
            98,
            42,
            0.014,
            0.03,
        )
        .unwrap()
    }

    fn bare_scene(lambda: f64) -> Scene {
        Scene {
            lambda,
            transmitters: vec![Transmitter {
                position: Point3::new(3.0, 0.0, 0.0),
                amplitude: Complex64::new(1.0, 0.0),
            }],
            edges: vec![],
            object_points: vec![],
            background_points: vec![],
            region: Region {
                min: Point3::new(-0.7, 0.8, -0.7),
                max: Point3::new(0.7, 1.6, 0.7),
            },
        }
    }

    #[test]
    fn path_amplitude_decay_laws() {
        let t = Point3::ORIGIN;
        let o = Point3::new(1.0, 0.0, 0.0);
        let r = Point3::new(1.0, 4.0, 0.0);
        assert!(
            (path_amplitude(&t, &o, &r, PathKind::Edge, 1.0).unwrap() - 0.5).abs() < 1e-15
        );
        let o2 = Point3::new(2.0, 0.0, 0.0);
        let r2 = Point3::new(2.0, 2.0, 0.0);
        assert!(
            (path_amplitude(&t, &o2, &r2, PathKind::Point, 1.0).unwrap() - 0.25).abs() < 1e-15
        );
    }

    #[test]
    fn edge_amplitude_sqrt_ratio() {
        let t = Point3::ORIGIN;
        let o = Point3::new(1.0, 0.0, 0.0);
        let near = path_amplitude(&t, &o, &Point3::new(1.0, 1.0, 0.0), PathKind::Edge, 1.0)
            .unwrap();
        let far = path_amplitude(&t, &o, &Point3::new(1.0, 2.0, 0.0), PathKind::Edge, 1.0)
            .unwrap();
        assert!((far / near - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn direct_path_only_magnitude() {
        let scene = bare_scene(0.0563);
        let grid = test_grid();
        let field = simulate_field(&scene, &grid, true).unwrap();
        for ((_, _, p_r), s) in grid.iter_points().zip(&field.samples) {
            let expected = 1.0 / scene.transmitters[0].position.distance(&p_r);
            assert!((s.norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn short_edge_support_equals_conic_signature() {
        let mut scene = bare_scene(0.0563);
        // Far shorter than the discretization step: the stationary point
        // stays within microns of the midpoint, so the support must equal
        // the midpoint conic signature.
        let edge = EdgeSegment::in_plane(Point3::new(0.0, 1.2, 0.0), 1.2, 1e-5).unwrap();
        scene.edges.push(EdgeScatterer {
            segment: edge,
            weight: 1.0,
        });
        let grid = test_grid();
        let with = simulate_field(&scene, &grid, true).unwrap();
        let without = simulate_field(&scene, &grid, false).unwrap();
        let sig = conic_signature(
            &scene.transmitters[0].position,
            &edge,
            &grid,
            MembershipTol::GridBand,
        )
        .unwrap();
        let mut support = vec![];
        for (i, (u, v, _)) in grid.iter_points().enumerate() {
            if (with.samples[i] - without.samples[i]).norm() > 1e-14 {
                support.push((u, v));
            }
        }
        assert!(!sig.is_empty());
        assert_eq!(support, sig.members);
    }

    #[test]
    fn object_fields_superpose() {
        let grid = test_grid();
        let o1 = PointScatterer {
            position: Point3::new(0.1, 1.2, 0.2),
            amplitude: Complex64::new(0.3, 0.1),
        };
        let o2 = PointScatterer {
            position: Point3::new(-0.2, 1.4, -0.1),
            amplitude: Complex64::new(-0.2, 0.4),
        };
        let mut a = bare_scene(0.0563);
        a.object_points = vec![o1];
        let mut b = bare_scene(0.0563);
        b.object_points = vec![o2];
        let mut both = bare_scene(0.0563);
        both.object_points = vec![o1, o2];

        let base = simulate_field(&a, &grid, false).unwrap();
        let fa = simulate_field(&a, &grid, true).unwrap();
        let fb = simulate_field(&b, &grid, true).unwrap();
        let fboth = simulate_field(&both, &grid, true).unwrap();
        for i in 0..grid.len() {
            let sum = (fa.samples[i] - base.samples[i]) + (fb.samples[i] - base.samples[i]);
            let got = fboth.samples[i] - base.samples[i];
            assert!((sum - got).norm() < 1e-12);
        }
    }

    #[test]
    fn power_is_squared_magnitude() {
        let grid = PlanarGrid::new(
            Point3::ORIGIN,
            Vec3::new(1.0, 0.0, 0.0).normalize().unwrap(),
            Vec3::new(0.0, 0.0, 1.0).normalize().unwrap(),
            1,
            2,
            1.0,
            1.0,
        )
        .unwrap();
        let field = FieldGrid {
            grid,
            samples: vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 4.0)],
        };
        let p = power(&field);
        assert_eq!(p.samples, vec![1.0, 25.0]);
    }

    #[test]
    fn background_subtract_identity_and_sign() {
        let grid = test_grid();
        let scene = {
            let mut s = bare_scene(0.0563);
            s.object_points = vec![
                PointScatterer {
                    position: Point3::new(0.1, 1.2, 0.2),
                    amplitude: Complex64::new(0.5, 0.0),
                },
                PointScatterer {
                    position: Point3::new(-0.15, 1.3, -0.1),
                    amplitude: Complex64::new(0.5, 0.0),
                },
            ];
            s
        };
        let p_bg = power(&simulate_field(&scene, &grid, false).unwrap());
        let zero = background_subtract(&p_bg, &p_bg).unwrap();
        assert!(zero.samples.iter().all(|&s| s == 0.0));

        let p = power(&simulate_field(&scene, &grid, true).unwrap());
        let sbar = background_subtract(&p, &p_bg).unwrap();
        assert!(
            sbar.samples.iter().any(|&s| s < 0.0),
            "interference must drive some samples negative"
        );
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g1 = test_grid();
        let mut g2 = test_grid();
        g2.n_u = 10;
        let a = PowerGrid {
            grid: g1,
            samples: vec![0.0; 98 * 42],
        };
        let b = PowerGrid {
            grid: g2,
            samples: vec![0.0; 10 * 42],
        };
        assert!(matches!(
            background_subtract(&a, &b),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn edge_refinement_stability() {
        // Halving the discretization step perturbs the field by < 1% in l2
        // on a single-edge scene. The edge is long enough that every grid
        // point on the cone maps to an interior stationary point, where the
        // path length error is second order in the step.
        let mut scene = bare_scene(0.0563);
        scene.edges.push(EdgeScatterer {
            segment: EdgeSegment::in_plane(Point3::new(0.05, 1.25, -0.1), 1.4, 0.3).unwrap(),
            weight: 1.0,
        });
        let grid = test_grid();
        let base = simulate_field(&scene, &grid, false).unwrap();
        let coarse =
            simulate_field_with_step(&scene, &grid, true, scene.lambda / 10.0).unwrap();
        let fine = simulate_field_with_step(&scene, &grid, true, scene.lambda / 20.0).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.len() {
            let c = coarse.samples[i] - base.samples[i];
            let f = fine.samples[i] - base.samples[i];
            num += (c - f).norm_sqr();
            den += f.norm_sqr();
        }
        assert!(den > 0.0);
        assert!(
            (num / den).sqrt() < 0.01,
            "relative l2 change {}",
            (num / den).sqrt()
        );
    }
}
