//! Edge-element metasurface synthesis.
//!
//! Each element of a planar lattice is a thin plate whose dominant scattering
//! is edge diffraction. Steering an element's edge direction to the bisector
//! of the incident and exit rays sends its Keller cone through a chosen focal
//! point; elements whose diffracted field would interfere destructively with
//! the direct path go idle (vertical). For multiple targets the elements are
//! partitioned by a Metropolis random walk over a border-crossing plus
//! size-imbalance objective, then steered per partition.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    angles_to_orientation, bisector_orientation, keller_residual, orientation_to_angles,
    PlanarGrid, Point3, UnitVec3,
};
use crate::forward::PowerGrid;
use crate::{Error, Result};

/// Residual tolerance when testing cone membership at a point target.
pub const FOCAL_TOL: f64 = 1e-9;

/// Geometry of the element lattice; the transmitter sits at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub origin: Point3,
    pub axis_row: UnitVec3,
    pub axis_col: UnitVec3,
    pub pitch_row: f64,
    pub pitch_col: f64,
    /// Physical plate dimensions in meters (length, width); geometric
    /// metadata carried through to fabrication outputs.
    pub element_size: (f64, f64),
    pub lambda: f64,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows * self.cols == 0 {
            return Err(Error::NonPositive("lattice element counts"));
        }
        if self.pitch_row <= 0.0 || self.pitch_col <= 0.0 {
            return Err(Error::NonPositive("lattice element spacing"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::NonPositive("lattice wavelength"));
        }
        Ok(())
    }

    pub fn position(&self, i: usize, j: usize) -> Point3 {
        self.origin
            .add(&self.axis_row.as_vec().scale(self.pitch_row * i as f64))
            .add(&self.axis_col.as_vec().scale(self.pitch_col * j as f64))
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The focal points the metasurface should serve.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalSet {
    pub targets: Vec<Point3>,
}

impl FocalSet {
    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::NonPositive("focal target count"));
        }
        for (a, t) in self.targets.iter().enumerate() {
            if t.distance(&Point3::ORIGIN) < crate::geometry::UNIT_TOL {
                return Err(Error::InvalidScene(format!("target {a} sits at the source")));
            }
            for b in a + 1..self.targets.len() {
                if t.distance(&self.targets[b]) < crate::geometry::UNIT_TOL {
                    return Err(Error::InvalidScene(format!("targets {a} and {b} coincide")));
                }
            }
            for i in 0..spec.rows {
                for j in 0..spec.cols {
                    if t.distance(&spec.position(i, j)) < crate::geometry::UNIT_TOL {
                        return Err(Error::InvalidScene(format!(
                            "target {a} coincides with element ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-element target assignment; `None` is the idle partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub rows: usize,
    pub cols: usize,
    /// Row-major; `Some(k)` assigns the element to target `k` (0-based).
    pub targets: Vec<Option<usize>>,
}

impl Assignment {
    pub fn get(&self, i: usize, j: usize) -> Option<usize> {
        self.targets[i * self.cols + j]
    }

    /// Sizes of the K non-idle partitions.
    pub fn partition_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0usize; k];
        for t in self.targets.iter().flatten() {
            sizes[*t] += 1;
        }
        sizes
    }

    pub fn validate(&self, eligibility: &[Vec<usize>]) -> Result<()> {
        if self.targets.len() != self.rows * self.cols {
            return Err(Error::InvalidAssignment(format!(
                "expected {} entries, got {}",
                self.rows * self.cols,
                self.targets.len()
            )));
        }
        for (idx, t) in self.targets.iter().enumerate() {
            if let Some(t) = t {
                if !eligibility[idx].contains(t) {
                    return Err(Error::InvalidAssignment(format!(
                        "element {idx} assigned to ineligible target {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Geometric cooling schedule for the Metropolis walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Initial temperature; defaults to the initial objective value.
    pub initial_temp: Option<f64>,
    pub cooling: f64,
    pub iterations: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            initial_temp: None,
            cooling: 0.999,
            iterations: 10_000,
        }
    }
}

/// Result of the partition walk: the best assignment visited, its objective,
/// and the best-so-far trace (nonincreasing by construction).
#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub assignment: Assignment,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// A fully designed lattice: assignment plus per-element `(theta, phi)`
/// orientation angles; idle elements are vertical (`theta = 0, phi = pi/2`).
#[derive(Debug, Clone)]
pub struct DesignedLattice {
    pub spec: LatticeSpec,
    pub assignment: Assignment,
    /// Row-major `(theta, phi)` per element.
    pub orientations: Vec<(f64, f64)>,
    pub objective: f64,
    pub seed: u64,
}

fn phase(lambda: f64, dist: f64) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * dist / lambda)
}

/// Diffracted and direct-path field contributions at `p` for one element.
///
/// `F_src` is the free-space direct path from the source at the origin;
/// `F_cone` is nonzero only when `p` lies on the element's Keller cone within
/// `tol`, with edge-diffraction decay along the source -> element -> `p` path.
pub fn field_contributions(
    lambda: f64,
    p_elem: &Point3,
    e: &UnitVec3,
    p: &Point3,
    tol: f64,
) -> Result<(Complex64, Complex64)> {
    let d_p = p.distance(&Point3::ORIGIN);
    if d_p < crate::geometry::UNIT_TOL {
        return Err(Error::CoincidentPoints("evaluation point at the source"));
    }
    let f_src = phase(lambda, d_p) / d_p;

    let d_elem = p_elem.distance(&Point3::ORIGIN);
    let d_out = p.distance(p_elem);
    if d_elem < crate::geometry::UNIT_TOL || d_out < crate::geometry::UNIT_TOL {
        return Err(Error::CoincidentPoints("element against source or target"));
    }
    let res = keller_residual(&Point3::ORIGIN, p_elem, e, p)?;
    let f_cone = if libm::fabs(res) <= tol {
        phase(lambda, d_elem + d_out) / (d_elem * libm::sqrt(d_out))
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok((f_cone, f_src))
}

/// True iff the element's diffracted field aligns positively with the direct
/// path at `p` (strict positivity; a vanished cone contribution fails).
pub fn constructive_gate(
    lambda: f64,
    p_elem: &Point3,
    e: &UnitVec3,
    p: &Point3,
    tol: f64,
) -> Result<bool> {
    let (f_cone, f_src) = field_contributions(lambda, p_elem, e, p, tol)?;
    Ok((f_cone.conj() * f_src).re > 0.0)
}

/// Targets the element at `(i, j)` can constructively serve under bisector
/// steering; indices are 0-based into `focal.targets`.
pub fn eligible_targets(spec: &LatticeSpec, i: usize, j: usize, focal: &FocalSet) -> Vec<usize> {
    let p_elem = spec.position(i, j);
    let mut out = Vec::new();
    for (k, target) in focal.targets.iter().enumerate() {
        let e = match bisector_orientation(&p_elem, target) {
            Ok(e) => e,
            Err(_) => continue,
        };
        match constructive_gate(spec.lambda, &p_elem, &e, target, FOCAL_TOL) {
            Ok(true) => out.push(k),
            _ => {}
        }
    }
    out
}

/// Eligibility sets for every element, row-major.
pub fn eligibility(spec: &LatticeSpec, focal: &FocalSet) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    focal.validate(spec)?;
    let mut out = Vec::with_capacity(spec.len());
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            out.push(eligible_targets(spec, i, j, focal));
        }
    }
    Ok(out)
}

/// Border-crossing plus imbalance objective over a 4-connected lattice.
///
/// Idle elements contribute neither border crossings nor balance terms.
pub fn partition_objective(assignment: &Assignment, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::NonPositive("target count"));
    }
    let (rows, cols) = (assignment.rows, assignment.cols);
    if assignment.targets.len() != rows * cols {
        return Err(Error::InvalidAssignment(format!(
            "expected {} entries, got {}",
            rows * cols,
            assignment.targets.len()
        )));
    }
    for t in assignment.targets.iter().flatten() {
        if *t >= k {
            return Err(Error::InvalidAssignment(format!("target index {t} out of range")));
        }
    }
    let mut crossings = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            let Some(a) = assignment.get(i, j) else {
                continue;
            };
            let mut neighbors = [(0usize, 0usize); 4];
            let mut n = 0;
            if i > 0 {
                neighbors[n] = (i - 1, j);
                n += 1;
            }
            if i + 1 < rows {
                neighbors[n] = (i + 1, j);
                n += 1;
            }
            if j > 0 {
                neighbors[n] = (i, j - 1);
                n += 1;
            }
            if j + 1 < cols {
                neighbors[n] = (i, j + 1);
                n += 1;
            }
            for &(ni, nj) in &neighbors[..n] {
                if let Some(b) = assignment.get(ni, nj) {
                    if b != a {
                        crossings += 1;
                    }
                }
            }
        }
    }
    let sizes = assignment.partition_sizes(k);
    let spread = (sizes.iter().max().unwrap() - sizes.iter().min().unwrap()) as f64;
    Ok(0.5 * crossings as f64 + spread)
}

/// Metropolis walk given precomputed eligibility sets.
///
/// Elements with an empty set stay idle; elements with a single option are
/// pinned. Moves reassign one free element to a uniformly random alternative,
/// accepted with probability `min(1, exp(-dE / T))` under geometric cooling.
/// Deterministic for a fixed seed; returns the best assignment visited.
pub fn metropolis_partition_eligible(
    rows: usize,
    cols: usize,
    eligibility: &[Vec<usize>],
    k: usize,
    seed: u64,
    schedule: &Schedule,
) -> Result<PartitionResult> {
    if eligibility.len() != rows * cols {
        return Err(Error::InvalidAssignment(format!(
            "expected {} eligibility sets, got {}",
            rows * cols,
            eligibility.len()
        )));
    }
    let mut unreachable: Vec<usize> = (0..k)
        .filter(|t| !eligibility.iter().any(|e| e.contains(t)))
        .collect();
    if !unreachable.is_empty() {
        unreachable.sort_unstable();
        return Err(Error::UnreachableTargets(unreachable));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Single target: every eligible element serves it, no walk needed.
    if k == 1 {
        let targets: Vec<Option<usize>> = eligibility
            .iter()
            .map(|e| if e.is_empty() { None } else { Some(0) })
            .collect();
        let assignment = Assignment { rows, cols, targets };
        let objective = partition_objective(&assignment, k)?;
        return Ok(PartitionResult {
            assignment,
            objective,
            trace: vec![objective],
        });
    }

    let targets: Vec<Option<usize>> = eligibility
        .iter()
        .map(|e| {
            if e.is_empty() {
                None
            } else {
                Some(e[rng.gen_range(0..e.len())])
            }
        })
        .collect();
    let mut current = Assignment { rows, cols, targets };
    let free: Vec<usize> = (0..eligibility.len())
        .filter(|&i| eligibility[i].len() > 1)
        .collect();

    let mut energy = partition_objective(&current, k)?;
    let mut best = current.clone();
    let mut best_energy = energy;
    let mut trace = Vec::with_capacity(schedule.iterations);

    if free.is_empty() {
        return Ok(PartitionResult {
            assignment: best,
            objective: best_energy,
            trace: vec![best_energy],
        });
    }

    let t0 = schedule
        .initial_temp
        .unwrap_or(if energy > 0.0 { energy } else { 1.0 });
    let mut temp = t0;
    for _ in 0..schedule.iterations {
        let idx = free[rng.gen_range(0..free.len())];
        let options = &eligibility[idx];
        let old = current.targets[idx].expect("free elements are assigned");
        let alternatives: Vec<usize> = options.iter().copied().filter(|&t| t != old).collect();
        let new = alternatives[rng.gen_range(0..alternatives.len())];
        current.targets[idx] = Some(new);
        let candidate = partition_objective(&current, k)?;
        let delta = candidate - energy;
        let accept = delta <= 0.0 || rng.gen::<f64>() < libm::exp(-delta / temp);
        if accept {
            energy = candidate;
            debug_assert!(current.validate(eligibility).is_ok());
            if energy < best_energy {
                best_energy = energy;
                best = current.clone();
            }
        } else {
            current.targets[idx] = Some(old);
        }
        trace.push(best_energy);
        temp *= schedule.cooling;
    }

    Ok(PartitionResult {
        assignment: best,
        objective: best_energy,
        trace,
    })
}

/// Partitions the lattice among the focal targets.
pub fn metropolis_partition(
    spec: &LatticeSpec,
    focal: &FocalSet,
    seed: u64,
    schedule: &Schedule,
) -> Result<PartitionResult> {
    let elig = eligibility(spec, focal)?;
    metropolis_partition_eligible(
        spec.rows,
        spec.cols,
        &elig,
        focal.targets.len(),
        seed,
        schedule,
    )
}

/// Full design pipeline: eligibility, partition, then bisector steering of
/// every assigned element; idle elements point vertically upward.
pub fn design(
    spec: &LatticeSpec,
    focal: &FocalSet,
    seed: u64,
    schedule: &Schedule,
) -> Result<DesignedLattice> {
    let partition = metropolis_partition(spec, focal, seed, schedule)?;
    let mut orientations = Vec::with_capacity(spec.len());
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            match partition.assignment.get(i, j) {
                Some(t) => {
                    let e = bisector_orientation(&spec.position(i, j), &focal.targets[t])?;
                    orientations.push(orientation_to_angles(&e));
                }
                None => orientations.push((0.0, FRAC_PI_2)),
            }
        }
    }
    Ok(DesignedLattice {
        spec: spec.clone(),
        assignment: partition.assignment,
        orientations,
        objective: partition.objective,
        seed,
    })
}

fn element_states(designed: &DesignedLattice) -> Result<Vec<(Point3, UnitVec3, f64)>> {
    let mut out = Vec::new();
    for i in 0..designed.spec.rows {
        for j in 0..designed.spec.cols {
            if designed.assignment.get(i, j).is_none() {
                continue;
            }
            let (theta, phi) = designed.orientations[i * designed.spec.cols + j];
            let e = angles_to_orientation(theta, phi)?;
            let p = designed.spec.position(i, j);
            out.push((p, e, p.distance(&Point3::ORIGIN)));
        }
    }
    Ok(out)
}

/// Complex field of the designed lattice at a point target, using the exact
/// point-membership tolerance.
pub fn field_at_target(designed: &DesignedLattice, p: &Point3) -> Result<Complex64> {
    let d_p = p.distance(&Point3::ORIGIN);
    if d_p < crate::geometry::UNIT_TOL {
        return Err(Error::CoincidentPoints("evaluation point at the source"));
    }
    let mut acc = phase(designed.spec.lambda, d_p) / d_p;
    for (p_elem, e, _) in element_states(designed)? {
        let (f_cone, _) = field_contributions(designed.spec.lambda, &p_elem, &e, p, FOCAL_TOL)?;
        acc += f_cone;
    }
    Ok(acc)
}

/// Received power of the designed lattice over an evaluation grid, with the
/// distance-adaptive cone band of the grid.
pub fn evaluate_field(designed: &DesignedLattice, eval_grid: &PlanarGrid) -> Result<PowerGrid> {
    let lambda = designed.spec.lambda;
    let elements = element_states(designed)?;
    let diag = eval_grid.pitch_diag();
    let mut samples = Vec::with_capacity(eval_grid.len());
    for (_, _, p) in eval_grid.iter_points() {
        let d_p = p.distance(&Point3::ORIGIN);
        if d_p < crate::geometry::UNIT_TOL {
            return Err(Error::CoincidentPoints("evaluation grid touches the source"));
        }
        let mut acc = phase(lambda, d_p) / d_p;
        for (p_elem, e, d_elem) in &elements {
            let to_p = p.sub(p_elem);
            let d_out = to_p.norm();
            if d_out < crate::geometry::UNIT_TOL {
                return Err(Error::CoincidentPoints("evaluation grid touches an element"));
            }
            let to_src = Point3::ORIGIN.sub(p_elem);
            let res = e.dot_vec(&to_p.scale(1.0 / d_out))
                + e.dot_vec(&to_src.scale(1.0 / d_elem));
            if libm::fabs(res) <= 0.5 * diag / d_out {
                acc += phase(lambda, d_elem + d_out) / (d_elem * libm::sqrt(d_out));
            }
        }
        samples.push(acc.norm_sqr());
    }
    Ok(PowerGrid {
        grid: eval_grid.clone(),
        samples,
    })
}

/// Direct-path-only power over a grid: the all-idle baseline.
pub fn baseline_field(lambda: f64, eval_grid: &PlanarGrid) -> Result<PowerGrid> {
    let mut samples = Vec::with_capacity(eval_grid.len());
    for (_, _, p) in eval_grid.iter_points() {
        let d = p.distance(&Point3::ORIGIN);
        if d < crate::geometry::UNIT_TOL {
            return Err(Error::CoincidentPoints("evaluation grid touches the source"));
        }
        samples.push(1.0 / (d * d));
    }
    let _ = lambda;
    Ok(PowerGrid {
        grid: eval_grid.clone(),
        samples,
    })
}
