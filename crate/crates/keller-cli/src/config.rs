//! JSON input schemas and their conversion into library types.
//!
//! Files carry positions in meters and angles in degrees; everything is
//! converted to radians internally. Presets can stand in for a file or be
//! partially overridden by one.

use anyhow::Context;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use keller_core::forward::{EdgeScatterer, PointScatterer, Region, Scene, Transmitter};
use keller_core::geometry::{EdgeSegment, PlanarGrid, Point3, Vec3};
use keller_core::lattice::{FocalSet, LatticeSpec};
use keller_core::presets;

use crate::CliError;

fn point(p: [f64; 3]) -> Point3 {
    Point3::new(p[0], p[1], p[2])
}

fn complex(c: [f64; 2]) -> Complex64 {
    Complex64::new(c[0], c[1])
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterFile {
    pub position: [f64; 3],
    #[serde(default = "unit_amplitude")]
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub midpoint: [f64; 3],
    /// In-plane orientation, degrees in `[0, 180)`.
    pub phi_deg: f64,
    pub half_length_m: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub position: [f64; 3],
    #[serde(default = "unit_amplitude")]
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionFile {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub origin: [f64; 3],
    pub axis_u: [f64; 3],
    pub axis_v: [f64; 3],
    pub n_u: usize,
    pub n_v: usize,
    pub pitch_u_m: f64,
    pub pitch_v_m: f64,
}

impl GridFile {
    pub fn to_grid(&self) -> Result<PlanarGrid, CliError> {
        let au = Vec3::new(self.axis_u[0], self.axis_u[1], self.axis_u[2])
            .normalize()
            .map_err(CliError::geometry)?;
        let av = Vec3::new(self.axis_v[0], self.axis_v[1], self.axis_v[2])
            .normalize()
            .map_err(CliError::geometry)?;
        PlanarGrid::new(
            point(self.origin),
            au,
            av,
            self.n_u,
            self.n_v,
            self.pitch_u_m,
            self.pitch_v_m,
        )
        .map_err(CliError::geometry)
    }
}

/// On-disk scene description. Every field is optional so a preset can supply
/// the missing parts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub lambda_m: Option<f64>,
    #[serde(default)]
    pub transmitters: Vec<TransmitterFile>,
    #[serde(default)]
    pub edges: Vec<EdgeFile>,
    #[serde(default)]
    pub object_points: Vec<PointFile>,
    #[serde(default)]
    pub background_points: Vec<PointFile>,
    pub region: Option<RegionFile>,
    pub receiver_grid: Option<GridFile>,
    pub imaging_plane: Option<GridFile>,
}

/// A fully resolved scene plus the grids the commands need.
pub struct ResolvedScene {
    pub scene: Scene,
    pub receiver_grid: PlanarGrid,
    pub imaging_plane: PlanarGrid,
}

fn grid_file_of(grid: &PlanarGrid) -> GridFile {
    GridFile {
        origin: [grid.origin.x, grid.origin.y, grid.origin.z],
        axis_u: [grid.axis_u.x(), grid.axis_u.y(), grid.axis_u.z()],
        axis_v: [grid.axis_v.x(), grid.axis_v.y(), grid.axis_v.z()],
        n_u: grid.n_u,
        n_v: grid.n_v,
        pitch_u_m: grid.pitch_u,
        pitch_v_m: grid.pitch_v,
    }
}

/// The three-transmitter imaging preset as a scene file skeleton.
pub fn imaging_preset() -> SceneFile {
    SceneFile {
        lambda_m: Some(presets::imaging_lambda()),
        transmitters: presets::imaging_tx_positions()
            .iter()
            .map(|p| TransmitterFile {
                position: [p.x, p.y, p.z],
                amplitude: unit_amplitude(),
            })
            .collect(),
        edges: vec![],
        object_points: vec![],
        background_points: vec![],
        region: Some(RegionFile {
            min: [-0.7, 0.9, -0.7],
            max: [0.7, 1.5, 0.7],
        }),
        receiver_grid: Some(grid_file_of(&presets::imaging_grid())),
        imaging_plane: Some(grid_file_of(&presets::imaging_plane())),
    }
}

/// Overlays `file` on top of `base`: scalar fields override when present,
/// scatterer lists from the file are appended.
pub fn merge_scene(base: SceneFile, file: SceneFile) -> SceneFile {
    let mut out = base;
    if file.lambda_m.is_some() {
        out.lambda_m = file.lambda_m;
    }
    if !file.transmitters.is_empty() {
        out.transmitters = file.transmitters;
    }
    out.edges.extend(file.edges);
    out.object_points.extend(file.object_points);
    out.background_points.extend(file.background_points);
    if file.region.is_some() {
        out.region = file.region;
    }
    if file.receiver_grid.is_some() {
        out.receiver_grid = file.receiver_grid;
    }
    if file.imaging_plane.is_some() {
        out.imaging_plane = file.imaging_plane;
    }
    out
}

pub fn resolve_scene(file: SceneFile) -> Result<ResolvedScene, CliError> {
    let lambda = file
        .lambda_m
        .ok_or_else(|| CliError::parse_msg("scene is missing lambda_m (or use --preset)"))?;
    if file.transmitters.is_empty() {
        return Err(CliError::parse_msg("scene has no transmitters"));
    }
    let region = file
        .region
        .ok_or_else(|| CliError::parse_msg("scene is missing region"))?;
    let receiver_grid = file
        .receiver_grid
        .ok_or_else(|| CliError::parse_msg("scene is missing receiver_grid"))?
        .to_grid()?;
    let imaging_plane = file
        .imaging_plane
        .ok_or_else(|| CliError::parse_msg("scene is missing imaging_plane"))?
        .to_grid()?;

    let mut edges = Vec::with_capacity(file.edges.len());
    for (i, e) in file.edges.iter().enumerate() {
        if !(0.0..180.0).contains(&e.phi_deg) {
            return Err(CliError::geometry_msg(format!(
                "edge {i}: phi_deg {} outside [0, 180)",
                e.phi_deg
            )));
        }
        let segment = EdgeSegment::in_plane(point(e.midpoint), e.phi_deg.to_radians(), e.half_length_m)
            .map_err(CliError::geometry)?;
        edges.push(EdgeScatterer {
            segment,
            weight: e.weight,
        });
    }

    let scene = Scene {
        lambda,
        transmitters: file
            .transmitters
            .iter()
            .map(|t| Transmitter {
                position: point(t.position),
                amplitude: complex(t.amplitude),
            })
            .collect(),
        edges,
        object_points: file
            .object_points
            .iter()
            .map(|p| PointScatterer {
                position: point(p.position),
                amplitude: complex(p.amplitude),
            })
            .collect(),
        background_points: file
            .background_points
            .iter()
            .map(|p| PointScatterer {
                position: point(p.position),
                amplitude: complex(p.amplitude),
            })
            .collect(),
        region: Region {
            min: point(region.min),
            max: point(region.max),
        },
    };
    scene.validate().map_err(CliError::geometry)?;
    Ok(ResolvedScene {
        scene,
        receiver_grid,
        imaging_plane,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub rows: usize,
    pub cols: usize,
    pub origin: [f64; 3],
    pub axis_row: [f64; 3],
    pub axis_col: [f64; 3],
    pub pitch_row_m: f64,
    pub pitch_col_m: f64,
    pub element_size_m: [f64; 2],
    pub lambda_m: f64,
}

impl LatticeFile {
    pub fn to_spec(&self) -> Result<LatticeSpec, CliError> {
        let ar = Vec3::new(self.axis_row[0], self.axis_row[1], self.axis_row[2])
            .normalize()
            .map_err(CliError::geometry)?;
        let ac = Vec3::new(self.axis_col[0], self.axis_col[1], self.axis_col[2])
            .normalize()
            .map_err(CliError::geometry)?;
        let spec = LatticeSpec {
            rows: self.rows,
            cols: self.cols,
            origin: point(self.origin),
            axis_row: ar,
            axis_col: ac,
            pitch_row: self.pitch_row_m,
            pitch_col: self.pitch_col_m,
            element_size: (self.element_size_m[0], self.element_size_m[1]),
            lambda: self.lambda_m,
        };
        spec.validate().map_err(CliError::geometry)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalFile {
    pub targets: Vec<[f64; 3]>,
}

impl FocalFile {
    pub fn to_focal(&self) -> FocalSet {
        FocalSet {
            targets: self.targets.iter().map(|t| point(*t)).collect(),
        }
    }
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::io)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::parse_msg(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}
