//! Desk-scale experimental presets: the three-transmitter imaging geometry
//! with its 42 x 98 receiver aperture, and the 20 x 20 / 22 x 22 edge-lattice
//! configurations.

use alloc::vec;

use crate::geometry::{PlanarGrid, Point3, UnitVec3, Vec3};
use crate::lattice::{FocalSet, LatticeSpec};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// Imaging carrier: 5.32 GHz.
pub fn imaging_lambda() -> f64 {
    C0 / 5.32e9
}

/// Lattice carrier: 5.18 GHz.
pub fn lattice_lambda() -> f64 {
    C0 / 5.18e9
}

fn x_axis() -> UnitVec3 {
    Vec3::new(1.0, 0.0, 0.0).normalize().unwrap()
}

fn z_axis() -> UnitVec3 {
    Vec3::new(0.0, 0.0, 1.0).normalize().unwrap()
}

/// The 42 x 98 receiver aperture in the plane y = 0, centered at the origin:
/// 98 columns at 1.4 cm horizontally, 42 rows at 3 cm vertically.
pub fn imaging_grid() -> PlanarGrid {
    let half_x = 97.0 * 0.014 / 2.0;
    let half_z = 41.0 * 0.03 / 2.0;
    PlanarGrid::new(
        Point3::new(-half_x, 0.0, -half_z),
        x_axis(),
        z_axis(),
        98,
        42,
        0.014,
        0.03,
    )
    .unwrap()
}

/// The three transmitter vantage points flanking and above the aperture.
pub fn imaging_tx_positions() -> [Point3; 3] {
    [
        Point3::new(3.0, 0.0, 0.0),
        Point3::new(0.0, 1.3, 1.2),
        Point3::new(-3.0, 0.0, 0.0),
    ]
}

/// The 1.4 m x 1.4 m imaging plane at y = 1.2 m, 2 cm pitch (71 x 71 cells).
pub fn imaging_plane() -> PlanarGrid {
    PlanarGrid::new(
        Point3::new(-0.7, 1.2, -0.7),
        x_axis(),
        z_axis(),
        71,
        71,
        0.02,
        0.02,
    )
    .unwrap()
}

fn lattice_spec(rows: usize, cols: usize) -> LatticeSpec {
    let pitch = 0.035;
    let half_x = (cols - 1) as f64 * pitch / 2.0;
    let half_z = (rows - 1) as f64 * pitch / 2.0;
    LatticeSpec {
        rows,
        cols,
        origin: Point3::new(-half_x, 0.5, -half_z),
        axis_row: z_axis(),
        axis_col: x_axis(),
        pitch_row: pitch,
        pitch_col: pitch,
        element_size: (0.03, 0.015),
        lambda: lattice_lambda(),
    }
}

/// 20 x 20 lattice half a meter in front of the source, one focal point.
pub fn lattice_single_target() -> (LatticeSpec, FocalSet) {
    (
        lattice_spec(20, 20),
        FocalSet {
            targets: vec![Point3::new(0.5, 3.0, 0.3)],
        },
    )
}

/// 22 x 22 lattice, four focal points spread across the far plane.
pub fn lattice_four_target() -> (LatticeSpec, FocalSet) {
    (
        lattice_spec(22, 22),
        FocalSet {
            targets: vec![
                Point3::new(1.0, 3.0, 0.6),
                Point3::new(-1.0, 3.0, 0.6),
                Point3::new(1.0, 3.0, -0.6),
                Point3::new(-1.0, 3.0, -0.6),
            ],
        },
    )
}

/// Evaluation aperture in the focal plane (the y of the first target),
/// 4 m x 2.4 m at 5 cm pitch.
pub fn lattice_eval_grid(focal: &FocalSet) -> PlanarGrid {
    let y = focal.targets[0].y;
    PlanarGrid::new(
        Point3::new(-2.0, y, -1.2),
        x_axis(),
        z_axis(),
        81,
        49,
        0.05,
        0.05,
    )
    .unwrap()
}
