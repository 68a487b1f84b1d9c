//! Acceptance gate: one test per criterion, each printing a single pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines as they complete.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use keller_core::forward::{
    background_subtract, power, simulate_field, EdgeScatterer, PointScatterer, PowerGrid, Region,
    Scene, Transmitter,
};
use keller_core::geometry::{
    bisector_orientation, conic_signature, keller_residual, EdgeSegment, MembershipTol,
    PlanarGrid, Point3, Vec3,
};
use keller_core::imaging::{edge_image, OrientationSet};
use keller_core::lattice::{
    design, evaluate_field, field_at_target, metropolis_partition_eligible, partition_objective,
    Assignment, Schedule,
};
use keller_core::presets;

fn report(n: usize, name: &str, ok: bool) {
    println!("criterion {n} ({name}): {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({name}) failed");
}

fn random_unit(rng: &mut ChaCha8Rng) -> keller_core::geometry::UnitVec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if let Ok(u) = v.normalize() {
            return u;
        }
    }
}

#[test]
fn criterion_01_conic_oracle_equivalence() {
    let start = Instant::now();
    let grid = presets::imaging_grid();
    let diag = grid.pitch_diag();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut ok = true;
    for _ in 0..100 {
        let p_t = Point3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.3..3.0),
            rng.gen_range(-1.5..1.5),
        );
        let midpoint = Point3::new(
            rng.gen_range(-0.6..0.6),
            rng.gen_range(0.9..1.5),
            rng.gen_range(-0.6..0.6),
        );
        let edge = EdgeSegment::new(midpoint, random_unit(&mut rng), 0.05).unwrap();
        let sig = conic_signature(&p_t, &edge, &grid, MembershipTol::GridBand).unwrap();

        let mut oracle = Vec::new();
        for (u, v, p_r) in grid.iter_points() {
            let res = keller_residual(&p_t, &edge.midpoint, &edge.direction, &p_r).unwrap();
            let tol = MembershipTol::GridBand.threshold(diag, midpoint.distance(&p_r));
            if res.abs() <= tol {
                oracle.push((u, v));
            }
        }
        if sig.members != oracle {
            ok = false;
            break;
        }
    }
    let within_budget = start.elapsed() < Duration::from_secs(10);
    report(1, "conic oracle equivalence", ok && within_budget);
}

#[test]
fn criterion_02_bisector_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p_elem = Point3::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.2..0.8),
            rng.gen_range(-0.5..0.5),
        );
        let target = Point3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(1.5..4.0),
            rng.gen_range(-1.5..1.5),
        );
        let e = bisector_orientation(&p_elem, &target).unwrap();
        let res = keller_residual(&Point3::ORIGIN, &p_elem, &e, &target).unwrap();
        worst = worst.max(res.abs());
    }
    let within_budget = start.elapsed() < Duration::from_secs(1);
    report(2, "theorem 2 steering exactness", worst < 1e-12 && within_budget);
}

fn random_scene(rng: &mut ChaCha8Rng, scattered_scale: f64) -> Scene {
    let region = Region {
        min: Point3::new(-0.7, 0.9, -0.7),
        max: Point3::new(0.7, 1.5, 0.7),
    };
    let n_obj = rng.gen_range(1..4usize);
    let n_bg = rng.gen_range(1..3usize);
    let mut object_points = Vec::new();
    for _ in 0..n_obj {
        object_points.push(PointScatterer {
            position: Point3::new(
                rng.gen_range(-0.6..0.6),
                rng.gen_range(1.0..1.4),
                rng.gen_range(-0.6..0.6),
            ),
            amplitude: Complex64::from_polar(scattered_scale, rng.gen_range(0.0..6.28)),
        });
    }
    let mut background_points = Vec::new();
    for _ in 0..n_bg {
        background_points.push(PointScatterer {
            position: Point3::new(
                rng.gen_range(-0.6..0.6),
                rng.gen_range(1.8..2.4),
                rng.gen_range(-0.6..0.6),
            ),
            amplitude: Complex64::from_polar(scattered_scale, rng.gen_range(0.0..6.28)),
        });
    }
    Scene {
        lambda: presets::imaging_lambda(),
        transmitters: vec![Transmitter {
            position: Point3::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.2..1.0), 0.0),
            amplitude: Complex64::new(1.0, 0.0),
        }],
        edges: vec![],
        object_points,
        background_points,
        region,
    }
}

fn small_grid() -> PlanarGrid {
    PlanarGrid::new(
        Point3::new(-0.33, 0.0, -0.45),
        Vec3::new(1.0, 0.0, 0.0).normalize().unwrap(),
        Vec3::new(0.0, 0.0, 1.0).normalize().unwrap(),
        24,
        16,
        0.028,
        0.06,
    )
    .unwrap()
}

#[test]
fn criterion_03_appendix_a_identity_and_eq3() {
    let grid = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    // Exact identity on 20 random scenes: P - P_bg = |O|^2 + 2 Re{O (D+B)*}.
    let mut identity_ok = true;
    for _ in 0..20 {
        let scene = random_scene(&mut rng, 0.3);
        let with = simulate_field(&scene, &grid, true).unwrap();
        let without = simulate_field(&scene, &grid, false).unwrap();
        let s_bar = background_subtract(&power(&with), &power(&without)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.len() {
            let o = with.samples[i] - without.samples[i];
            let rhs = o.norm_sqr() + 2.0 * (o * without.samples[i].conj()).re;
            num += (s_bar.samples[i] - rhs) * (s_bar.samples[i] - rhs);
            den += rhs * rhs;
        }
        if (num / den).sqrt() > 1e-10 {
            identity_ok = false;
        }
    }

    // Eq. 3 drops |O|^2 and the object-background cross term; its error must
    // be < 5% at 30 dB direct-path dominance and shrink as dominance grows.
    let mut errors = Vec::new();
    for db in [20.0f64, 30.0, 40.0] {
        let scale = 10f64.powf(-db / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let scene = random_scene(&mut rng, scale);
        let with = simulate_field(&scene, &grid, true).unwrap();
        let without = simulate_field(&scene, &grid, false).unwrap();
        let s_bar = background_subtract(&power(&with), &power(&without)).unwrap();
        let tx = &scene.transmitters[0];
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (_, _, p_r)) in grid.iter_points().enumerate() {
            let o = with.samples[i] - without.samples[i];
            let d = tx.amplitude
                * keller_core::geometry::green(&tx.position, &p_r, scene.lambda).unwrap()
                / tx.position.distance(&p_r);
            let approx = 2.0 * (o * d.conj()).re;
            num += (s_bar.samples[i] - approx) * (s_bar.samples[i] - approx);
            den += s_bar.samples[i] * s_bar.samples[i];
        }
        errors.push((num / den).sqrt());
    }
    let eq3_ok = errors[1] < 0.05 && errors[0] > errors[1] && errors[1] > errors[2];

    report(3, "appendix A identity and eq. 3 error", identity_ok && eq3_ok);
}

fn sbar_views(phi: f64, midpoint: Point3, half_length: f64) -> Vec<(PowerGrid, Point3)> {
    let lambda = presets::imaging_lambda();
    let grid = presets::imaging_grid();
    let mut out = vec![];
    for tx in presets::imaging_tx_positions() {
        let scene = Scene {
            lambda,
            transmitters: vec![Transmitter {
                position: tx,
                amplitude: Complex64::new(1.0, 0.0),
            }],
            edges: vec![EdgeScatterer {
                segment: EdgeSegment::in_plane(midpoint, phi, half_length).unwrap(),
                weight: 1.0,
            }],
            object_points: vec![],
            background_points: vec![],
            region: Region {
                min: Point3::new(-0.7, 0.9, -0.7),
                max: Point3::new(0.7, 1.5, 0.7),
            },
        };
        let with = simulate_field(&scene, &grid, true).unwrap();
        let without = simulate_field(&scene, &grid, false).unwrap();
        out.push((
            background_subtract(&power(&with), &power(&without)).unwrap(),
            tx,
        ));
    }
    out
}

/// Draws an edge placement whose cone reaches the aperture from at least two
/// vantage points; localization is ill-posed without aperture coverage.
fn draw_visible_placement(rng: &mut ChaCha8Rng, phi_set: &OrientationSet, hl: f64) -> (f64, Point3) {
    let grid = presets::imaging_grid();
    loop {
        let phi = phi_set.angles()[rng.gen_range(0..phi_set.len())];
        let midpoint = Point3::new(rng.gen_range(-0.4..0.4), 1.2, rng.gen_range(-0.4..0.4));
        let edge = EdgeSegment::in_plane(midpoint, phi, hl).unwrap();
        let covered = presets::imaging_tx_positions()
            .iter()
            .filter(|tx| {
                conic_signature(tx, &edge, &grid, MembershipTol::GridBand)
                    .map(|s| s.members.len() >= 30)
                    .unwrap_or(false)
            })
            .count();
        if covered >= 2 {
            return (phi, midpoint);
        }
    }
}

/// Chebyshev distance in plane cells from the argmax to the nearest cell the
/// edge segment passes through.
fn cells_off(plane: &PlanarGrid, argmax: usize, midpoint: &Point3, phi: f64, hl: f64) -> usize {
    let (au, av) = (argmax / plane.n_v, argmax % plane.n_v);
    let dir = EdgeSegment::in_plane(*midpoint, phi, hl).unwrap().direction;
    let mut best = usize::MAX;
    let nsteps = 50;
    for k in 0..=nsteps {
        let t = -hl + 2.0 * hl * (k as f64) / (nsteps as f64);
        let q = midpoint.add(&dir.as_vec().scale(t));
        let tu = ((q.x - plane.origin.x) / plane.pitch_u).round() as i64;
        let tv = ((q.z - plane.origin.z) / plane.pitch_v).round() as i64;
        let d = (au as i64 - tu).abs().max((av as i64 - tv).abs()) as usize;
        best = best.min(d);
    }
    best
}

fn localization_trials(noise_db: Option<f64>) -> usize {
    let lambda = presets::imaging_lambda();
    let plane = presets::imaging_plane();
    let phi_set = OrientationSet::uniform(18).unwrap();
    let hl = 0.025;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    for _ in 0..20 {
        let (phi, midpoint) = draw_visible_placement(&mut rng, &phi_set, hl);
        let mut s_bars = sbar_views(phi, midpoint, hl);
        if let Some(db) = noise_db {
            for (g, _) in &mut s_bars {
                let peak = g.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                let normal = rand_distr::Normal::new(0.0, peak * 10f64.powf(-db / 10.0)).unwrap();
                for x in &mut g.samples {
                    *x += normal.sample(&mut rng);
                }
            }
        }
        let vol = edge_image(&s_bars, &plane, &phi_set, 0.5, lambda, false).unwrap();
        let am = (0..plane.len())
            .max_by(|&a, &b| vol.fused[a].partial_cmp(&vol.fused[b]).unwrap())
            .unwrap();
        let loc_ok = cells_off(&plane, am, &midpoint, phi, hl) <= 1;
        let phi_ok = vol.orientation_map[am].map_or(false, |x| (x - phi).abs() < 1e-9);
        if loc_ok && phi_ok {
            hits += 1;
        }
    }
    hits
}

#[test]
fn criterion_04_imaging_localization() {
    let start = Instant::now();
    let hits = localization_trials(None);
    let within_budget = start.elapsed() < Duration::from_secs(120);
    report(4, "noise-free imaging localization", hits >= 19 && within_budget);
}

#[test]
fn criterion_05_imaging_noise_robustness() {
    let hits = localization_trials(Some(20.0));
    report(5, "imaging robustness at 20 dB noise", hits >= 16);
}

#[test]
fn criterion_06_partition_oracle() {
    let start = Instant::now();
    let elig = vec![vec![0usize, 1]; 9];
    let mut best = f64::INFINITY;
    for mask in 0u32..512 {
        let targets: Vec<Option<usize>> = (0..9)
            .map(|i| Some(((mask >> i) & 1) as usize))
            .collect();
        let a = Assignment {
            rows: 3,
            cols: 3,
            targets,
        };
        best = best.min(partition_objective(&a, 2).unwrap());
    }
    let schedule = Schedule::default();
    let mut wins = 0;
    for seed in 0..100u64 {
        let r = metropolis_partition_eligible(3, 3, &elig, 2, seed, &schedule).unwrap();
        if (r.objective - best).abs() < 1e-12 {
            wins += 1;
        }
    }
    let within_budget = start.elapsed() < Duration::from_secs(30);
    report(6, "3x3 metropolis equals brute force", wins >= 95 && within_budget);
}

#[test]
fn criterion_07_hand_objective_values() {
    let checkerboard = Assignment {
        rows: 2,
        cols: 2,
        targets: vec![Some(0), Some(1), Some(1), Some(0)],
    };
    let split = Assignment {
        rows: 2,
        cols: 2,
        targets: vec![Some(0), Some(1), Some(0), Some(1)],
    };
    let ok = partition_objective(&checkerboard, 2).unwrap() == 4.0
        && partition_objective(&split, 2).unwrap() == 2.0;
    report(7, "hand-computed eq. 7 values", ok);
}

#[test]
fn criterion_08_single_target_gain() {
    let (spec, focal) = presets::lattice_single_target();
    let designed = design(&spec, &focal, 1, &Schedule::default()).unwrap();
    let target = focal.targets[0];
    let with = field_at_target(&designed, &target).unwrap().norm_sqr();
    let d = target.distance(&Point3::ORIGIN);
    let gain_db = 10.0 * (with * d * d).log10();

    let eval_grid = presets::lattice_eval_grid(&focal);
    let field = evaluate_field(&designed, &eval_grid).unwrap();
    let am = (0..eval_grid.len())
        .max_by(|&a, &b| field.samples[a].partial_cmp(&field.samples[b]).unwrap())
        .unwrap();
    let (au, av) = (am / eval_grid.n_v, am % eval_grid.n_v);
    let tu = ((target.x - eval_grid.origin.x) / eval_grid.pitch_u).round() as i64;
    let tv = ((target.z - eval_grid.origin.z) / eval_grid.pitch_v).round() as i64;
    let cheb = (au as i64 - tu).abs().max((av as i64 - tv).abs());

    report(
        8,
        "single-target gain and peak placement",
        gain_db >= 3.0 && cheb <= 2,
    );
}

#[test]
fn criterion_09_four_target_balance() {
    let (spec, focal) = presets::lattice_four_target();
    let designed = design(&spec, &focal, 1, &Schedule::default()).unwrap();
    let sizes = designed.assignment.partition_sizes(4);
    let nonempty = sizes.iter().all(|&s| s > 0);
    let mean = sizes.iter().sum::<usize>() as f64 / 4.0;
    let spread = (*sizes.iter().max().unwrap() - *sizes.iter().min().unwrap()) as f64;
    let balanced = spread <= 0.1 * mean;

    let mut gains_positive = true;
    for t in &focal.targets {
        let with = field_at_target(&designed, t).unwrap().norm_sqr();
        let d = t.distance(&Point3::ORIGIN);
        if 10.0 * (with * d * d).log10() <= 0.0 {
            gains_positive = false;
        }
    }
    report(
        9,
        "four-target balance and gain",
        nonempty && balanced && gains_positive,
    );
}

#[test]
fn criterion_10_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_keller");
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let scene = r#"{
        "lambda_m": 0.0563,
        "transmitters": [{"position": [3.0, 0.0, 0.0]}],
        "edges": [{"midpoint": [0.06, 1.2, -0.1], "phi_deg": 80.0, "half_length_m": 0.1}],
        "region": {"min": [-0.7, 0.9, -0.7], "max": [0.7, 1.5, 0.7]},
        "receiver_grid": {
            "origin": [-0.33, 0.0, -0.45], "axis_u": [1, 0, 0], "axis_v": [0, 0, 1],
            "n_u": 24, "n_v": 16, "pitch_u_m": 0.028, "pitch_v_m": 0.06
        },
        "imaging_plane": {
            "origin": [-0.4, 1.2, -0.5], "axis_u": [1, 0, 0], "axis_v": [0, 0, 1],
            "n_u": 21, "n_v": 21, "pitch_u_m": 0.04, "pitch_v_m": 0.04
        }
    }"#;
    let scene_path = root.join("scene.json");
    std::fs::write(&scene_path, scene).unwrap();

    let lattice = r#"{
        "rows": 6, "cols": 6, "origin": [-0.0875, 0.5, -0.0875],
        "axis_row": [0, 0, 1], "axis_col": [1, 0, 0],
        "pitch_row_m": 0.035, "pitch_col_m": 0.035,
        "element_size_m": [0.03, 0.015], "lambda_m": 0.0579
    }"#;
    let focal = r#"{"targets": [[0.5, 3.0, 0.3], [-0.5, 3.0, -0.3]]}"#;
    let lattice_path = root.join("lattice.json");
    let focal_path = root.join("focal.json");
    std::fs::write(&lattice_path, lattice).unwrap();
    std::fs::write(&focal_path, focal).unwrap();

    let run = |args: &[&str]| {
        let status = std::process::Command::new(bin).args(args).status().unwrap();
        assert!(status.success(), "command failed: {args:?}");
    };
    let dir_bytes = |d: &std::path::Path| {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };

    let scene_arg = scene_path.to_str().unwrap().to_string();
    let mut ok = true;
    for (a, b) in [("sim1", "sim2"), ("img1", "img2"), ("des1", "des2")] {
        let (da, db) = (root.join(a), root.join(b));
        match a {
            "sim1" => {
                for d in [&da, &db] {
                    run(&["simulate", "--scene", &scene_arg, "--out", d.to_str().unwrap()]);
                }
            }
            "img1" => {
                let sim = root.join("sim1");
                for d in [&da, &db] {
                    run(&[
                        "image",
                        "--scene",
                        &scene_arg,
                        "--input",
                        sim.to_str().unwrap(),
                        "--out",
                        d.to_str().unwrap(),
                    ]);
                }
            }
            _ => {
                for d in [&da, &db] {
                    run(&[
                        "design",
                        "--lattice",
                        lattice_path.to_str().unwrap(),
                        "--focal",
                        focal_path.to_str().unwrap(),
                        "--seed",
                        "9",
                        "--out",
                        d.to_str().unwrap(),
                    ]);
                }
            }
        }
        if dir_bytes(&da) != dir_bytes(&db) {
            ok = false;
        }
    }
    report(10, "byte-identical repeated runs", ok);
}
