//! The four batch commands. Each computes every output in memory first, then
//! writes the files atomically and finishes with a checksummed manifest, so a
//! failed run leaves no partial outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use sha2::{Digest, Sha256};

use keller_core::forward::{background_subtract, power, simulate_field, PowerGrid, Scene};
use keller_core::geometry::{PlanarGrid, Point3};
use keller_core::imaging::{edge_image, OrientationSet};
use keller_core::lattice::{
    design, eligibility, evaluate_field, field_at_target, partition_objective, Assignment,
    DesignedLattice, FocalSet, LatticeSpec, Schedule,
};
use keller_core::presets;

use crate::config::{
    imaging_preset, load_json, merge_scene, resolve_scene, FocalFile, LatticeFile, ResolvedScene,
    SceneFile,
};
use crate::gridio::{
    bool_grid_csv, complex_grid_csv, heatmap_pgm, optional_grid_csv, read_real_grid_csv,
    real_grid_csv, write_atomic,
};
use crate::{CliError, DesignArgs, EvaluateArgs, ImageArgs, SimulateArgs};

/// Output files staged in memory before anything touches the disk.
struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn new() -> Self {
        Staged { files: Vec::new() }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.add(name, text.into_bytes());
    }

    /// Writes every staged file plus a manifest embedding the resolved
    /// configuration and per-file checksums.
    fn commit(self, out_dir: &Path, command: &str, config: serde_json::Value) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::io_msg(format!("creating {}: {e}", out_dir.display())))?;
        let mut checksums = BTreeMap::new();
        for (name, bytes) in &self.files {
            let mut hasher = Sha256::new();
            hasher.update(bytes);
            checksums.insert(name.clone(), format!("{:x}", hasher.finalize()));
            write_atomic(&out_dir.join(name), bytes)?;
        }
        let manifest = serde_json::to_string_pretty(&json!({
            "command": command,
            "config": config,
            "outputs": checksums,
        }))
        .expect("manifest serialization");
        write_atomic(&out_dir.join("manifest.json"), manifest.as_bytes())?;
        Ok(())
    }
}

fn scene_from_args(
    scene_path: &Option<PathBuf>,
    preset: &Option<String>,
) -> Result<ResolvedScene, CliError> {
    let base = match preset.as_deref() {
        None => SceneFile::default(),
        Some("paper-imaging") => imaging_preset(),
        Some(other) => {
            return Err(CliError::parse_msg(format!(
                "unknown scene preset {other:?} (expected \"paper-imaging\")"
            )))
        }
    };
    let merged = match scene_path {
        Some(p) => merge_scene(base, load_json::<SceneFile>(p)?),
        None => base,
    };
    resolve_scene(merged)
}

fn lattice_from_args(
    lattice_path: &Option<PathBuf>,
    focal_path: &Option<PathBuf>,
    preset: &Option<String>,
) -> Result<(LatticeSpec, FocalSet), CliError> {
    match preset.as_deref() {
        Some("paper-lattice-1pt") => Ok(presets::lattice_single_target()),
        Some("paper-lattice-4pt") => Ok(presets::lattice_four_target()),
        Some(other) => Err(CliError::parse_msg(format!(
            "unknown lattice preset {other:?} (expected \"paper-lattice-1pt\" or \"paper-lattice-4pt\")"
        ))),
        None => {
            let lp = lattice_path.as_ref().ok_or_else(|| {
                CliError::parse_msg("either --preset or --lattice and --focal are required")
            })?;
            let fp = focal_path.as_ref().ok_or_else(|| {
                CliError::parse_msg("either --preset or --lattice and --focal are required")
            })?;
            let spec = load_json::<LatticeFile>(lp)?.to_spec()?;
            let focal = load_json::<FocalFile>(fp)?.to_focal();
            focal.validate(&spec).map_err(CliError::geometry)?;
            Ok((spec, focal))
        }
    }
}

/// File suffix distinguishing transmitter views; empty for a single view.
fn view_suffix(k: usize, n: usize) -> String {
    if n == 1 {
        String::new()
    } else {
        format!("_tx{k}")
    }
}

fn single_tx_scene(scene: &Scene, k: usize) -> Scene {
    let mut s = scene.clone();
    s.transmitters = vec![scene.transmitters[k]];
    s
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let resolved = scene_from_args(&args.scene, &args.preset)?;
    let n_tx = resolved.scene.transmitters.len();
    let mut staged = Staged::new();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    for k in 0..n_tx {
        let view = single_tx_scene(&resolved.scene, k);
        let with = simulate_field(&view, &resolved.receiver_grid, true)
            .map_err(CliError::geometry)?;
        let without = simulate_field(&view, &resolved.receiver_grid, false)
            .map_err(CliError::geometry)?;
        let p_with = power(&with);
        let p_bg = power(&without);
        let mut sbar = background_subtract(&p_with, &p_bg).map_err(CliError::geometry)?;

        if let Some(db) = args.noise_db {
            let peak = sbar
                .samples
                .iter()
                .fold(0.0f64, |m, &x| m.max(x.abs()));
            let sigma = peak * 10f64.powf(-db / 10.0);
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| CliError::parse_msg(format!("noise level: {e}")))?;
                for s in &mut sbar.samples {
                    *s += normal.sample(&mut rng);
                }
            }
        }

        let sfx = view_suffix(k, n_tx);
        staged.add_text(
            &format!("field{sfx}.csv"),
            complex_grid_csv(&with.grid, &with.samples),
        );
        staged.add_text(
            &format!("power{sfx}.csv"),
            real_grid_csv(&p_with.grid, &p_with.samples),
        );
        staged.add_text(
            &format!("power_bg{sfx}.csv"),
            real_grid_csv(&p_bg.grid, &p_bg.samples),
        );
        staged.add_text(
            &format!("sbar{sfx}.csv"),
            real_grid_csv(&sbar.grid, &sbar.samples),
        );
    }

    staged.commit(
        &args.out,
        "simulate",
        json!({
            "scene": args.scene.as_ref().map(|p| p.display().to_string()),
            "preset": args.preset,
            "seed": args.seed,
            "noise_db": args.noise_db,
            "transmitters": n_tx,
        }),
    )
}

pub fn cmd_image(args: &ImageArgs) -> Result<(), CliError> {
    let resolved = scene_from_args(&args.scene, &args.preset)?;
    let n_tx = resolved.scene.transmitters.len();

    let pitch = args.phi_pitch_deg;
    if !(pitch > 0.0) || (180.0 / pitch).fract().abs() > 1e-9 {
        return Err(CliError::parse_msg(format!(
            "--phi-pitch-deg {pitch} must evenly divide 180"
        )));
    }
    let n_phi = (180.0 / pitch).round() as usize;
    let phi_set = OrientationSet::uniform(n_phi).map_err(CliError::geometry)?;

    let mut s_bars: Vec<(PowerGrid, Point3)> = Vec::with_capacity(n_tx);
    for k in 0..n_tx {
        let sfx = view_suffix(k, n_tx);
        let path = args.input.join(format!("sbar{sfx}.csv"));
        let grid = read_real_grid_csv(&path, &resolved.receiver_grid)?;
        s_bars.push((grid, resolved.scene.transmitters[k].position));
    }

    let volume = edge_image(
        &s_bars,
        &resolved.imaging_plane,
        &phi_set,
        args.threshold_frac,
        resolved.scene.lambda,
        args.normalize_by_signature,
    )
    .map_err(CliError::geometry)?;
    if volume.all_zero_input {
        eprintln!("warning: every transmitter view is identically zero; the mask is empty");
    }

    let plane = &volume.plane;
    let n = phi_set.len();
    let mut staged = Staged::new();
    for (k, view) in volume.views.iter().enumerate() {
        let best: Vec<f64> = (0..plane.len())
            .map(|m| {
                view.intensities[m * n..(m + 1) * n]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let sfx = view_suffix(k, n_tx);
        staged.add_text(&format!("intensity{sfx}.csv"), real_grid_csv(plane, &best));
    }
    let orientation_deg: Vec<Option<f64>> = volume
        .orientation_map
        .iter()
        .map(|o| o.map(|r| r.to_degrees()))
        .collect();
    staged.add_text(
        "orientation_map.csv",
        optional_grid_csv(plane, &orientation_deg),
    );
    staged.add_text("mask.csv", bool_grid_csv(plane, &volume.mask));
    staged.add("heatmap.pgm", heatmap_pgm(plane, &volume.fused));

    staged.commit(
        &args.out,
        "image",
        json!({
            "scene": args.scene.as_ref().map(|p| p.display().to_string()),
            "preset": args.preset,
            "input": args.input.display().to_string(),
            "phi_pitch_deg": pitch,
            "threshold_frac": args.threshold_frac,
            "normalize_by_signature": args.normalize_by_signature,
            "transmitters": n_tx,
        }),
    )
}

fn lattice_csv(designed: &DesignedLattice) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("i,j,theta_deg,phi_deg,target\n");
    for i in 0..designed.spec.rows {
        for j in 0..designed.spec.cols {
            let (theta, phi) = designed.orientations[i * designed.spec.cols + j];
            let _ = write!(
                s,
                "{i},{j},{:.17e},{:.17e},",
                theta.to_degrees(),
                phi.to_degrees()
            );
            if let Some(t) = designed.assignment.get(i, j) {
                let _ = write!(s, "{t}");
            }
            s.push('\n');
        }
    }
    s
}

fn gain_report(designed: &DesignedLattice, focal: &FocalSet) -> Result<String, CliError> {
    use std::fmt::Write as _;
    let mut s = String::new();
    for (k, t) in focal.targets.iter().enumerate() {
        let with = field_at_target(designed, t)
            .map_err(CliError::geometry)?
            .norm_sqr();
        let d = t.distance(&Point3::ORIGIN);
        let baseline = 1.0 / (d * d);
        let gain_db = 10.0 * (with / baseline).log10();
        let _ = writeln!(s, "target {k}: {gain_db:.6} dB");
    }
    Ok(s)
}

fn stage_evaluation(
    staged: &mut Staged,
    designed: &DesignedLattice,
    focal: &FocalSet,
    eval_grid: &PlanarGrid,
) -> Result<(), CliError> {
    let field = evaluate_field(designed, eval_grid).map_err(CliError::geometry)?;
    staged.add_text("field.csv", real_grid_csv(&field.grid, &field.samples));
    staged.add_text("gain_db.txt", gain_report(designed, focal)?);
    Ok(())
}

pub fn cmd_design(args: &DesignArgs) -> Result<(), CliError> {
    let (spec, focal) = lattice_from_args(&args.lattice, &args.focal, &args.preset)?;
    let mut schedule = Schedule::default();
    if let Some(iters) = args.iters {
        schedule.iterations = iters;
    }
    if let Some(cooling) = args.cooling {
        if !(0.0 < cooling && cooling <= 1.0) {
            return Err(CliError::parse_msg(format!(
                "--cooling {cooling} must lie in (0, 1]"
            )));
        }
        schedule.cooling = cooling;
    }
    let designed = design(&spec, &focal, args.seed, &schedule).map_err(CliError::from_core)?;

    let eval_grid = presets::lattice_eval_grid(&focal);
    let mut staged = Staged::new();
    staged.add_text("lattice.csv", lattice_csv(&designed));
    staged.add_text("objective.txt", format!("{:.17e}\n", designed.objective));
    stage_evaluation(&mut staged, &designed, &focal, &eval_grid)?;

    staged.commit(
        &args.out,
        "design",
        json!({
            "lattice": args.lattice.as_ref().map(|p| p.display().to_string()),
            "focal": args.focal.as_ref().map(|p| p.display().to_string()),
            "preset": args.preset,
            "seed": args.seed,
            "iterations": schedule.iterations,
            "cooling": schedule.cooling,
            "targets": focal.targets.len(),
        }),
    )
}

/// Rebuilds a designed lattice from a `lattice.csv` produced by `design`.
fn parse_lattice_csv(
    path: &Path,
    spec: &LatticeSpec,
    focal: &FocalSet,
) -> Result<DesignedLattice, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io_msg(format!("reading {}: {e}", path.display())))?;
    let mut orientations = vec![(0.0f64, 0.0f64); spec.len()];
    let mut targets = vec![None; spec.len()];
    let mut seen = vec![false; spec.len()];
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| {
            CliError::parse_msg(format!("{}: line {}: {what}", path.display(), ln + 1))
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let i: usize = fields[0].trim().parse().map_err(|_| bad("bad row index"))?;
        let j: usize = fields[1].trim().parse().map_err(|_| bad("bad column index"))?;
        if i >= spec.rows || j >= spec.cols {
            return Err(CliError::geometry_msg(format!(
                "{}: element ({i}, {j}) outside the {}x{} lattice",
                path.display(),
                spec.rows,
                spec.cols
            )));
        }
        let theta: f64 = fields[2].trim().parse().map_err(|_| bad("bad theta"))?;
        let phi: f64 = fields[3].trim().parse().map_err(|_| bad("bad phi"))?;
        let target = match fields[4].trim() {
            "" => None,
            t => {
                let t: usize = t.parse().map_err(|_| bad("bad target index"))?;
                if t >= focal.targets.len() {
                    return Err(CliError::geometry_msg(format!(
                        "{}: target {t} outside the focal set",
                        path.display()
                    )));
                }
                Some(t)
            }
        };
        let idx = i * spec.cols + j;
        orientations[idx] = (theta.to_radians(), phi.to_radians());
        targets[idx] = target;
        seen[idx] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(CliError::parse_msg(format!(
            "{}: not every lattice element is listed",
            path.display()
        )));
    }
    let assignment = Assignment {
        rows: spec.rows,
        cols: spec.cols,
        targets,
    };
    let elig = eligibility(spec, focal).map_err(CliError::from_core)?;
    assignment.validate(&elig).map_err(CliError::geometry)?;
    let objective =
        partition_objective(&assignment, focal.targets.len()).map_err(CliError::geometry)?;
    Ok(DesignedLattice {
        spec: spec.clone(),
        assignment,
        orientations,
        objective,
        seed: 0,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (spec, focal) = lattice_from_args(&args.lattice, &args.focal, &args.preset)?;
    let designed = parse_lattice_csv(&args.design, &spec, &focal)?;
    let eval_grid = presets::lattice_eval_grid(&focal);
    let baseline = keller_core::lattice::baseline_field(spec.lambda, &eval_grid)
        .map_err(CliError::geometry)?;

    let mut staged = Staged::new();
    stage_evaluation(&mut staged, &designed, &focal, &eval_grid)?;
    staged.add_text(
        "baseline.csv",
        real_grid_csv(&baseline.grid, &baseline.samples),
    );

    staged.commit(
        &args.out,
        "evaluate",
        json!({
            "lattice": args.lattice.as_ref().map(|p| p.display().to_string()),
            "focal": args.focal.as_ref().map(|p| p.display().to_string()),
            "preset": args.preset,
            "design": args.design.display().to_string(),
            "targets": focal.targets.len(),
        }),
    )
}
