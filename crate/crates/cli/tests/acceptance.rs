//! End-to-end acceptance checks on the quad fixture robot. Runs without the libtest
//! harness so the criteria execute one after another (timing checks need a quiet
//! machine) and each prints a single PASS/FAIL line.
//!
//! `cargo test --test acceptance -- 4 5` runs only criteria 4 and 5.

// `ensure!(a <= tol)` must also fail on NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::Translation3;
use oracles::{brute_force_sphere, solid_distance, Body, TestRng, P};
use serde_json::{json, Value};
use skipset::assets::RobotAssets;
use skipset::bench::{bench_ratio, classify_with_oracle, collision_oracle};
use skipset::geometry::{bounding_sphere, convex_hull, oriented_bounding_box, LinkShapes, ShapeType};
use skipset::matrix::{ExportFormat, SkipMatrix, SkipReason};
use skipset::model::{Configuration, JointType, RigidTransform, RobotModel};
use skipset::proximity::{
    distance, intersects, pose_shapes, query_all_pairs, shape_layout, PairDistance, PosedSet,
    QueryMode, QueryOutcome,
};
use skipset_cli::{
    cmd_import_moveit, cmd_infer, cmd_preprocess, ImportArgs, InferArgs, PreprocessArgs, RobotDir,
    SamplingArgs, SourceArgs,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/quad")
}

const INFER_SEED: u64 = 0;
const ORACLE_SEED: u64 = 0x0dd5_eed5;

fn source() -> SourceArgs {
    SourceArgs {
        urdf: Some(fixture_dir().join("quad.urdf")),
        mesh_root: None,
        max_parts: skipset::geometry::DecompositionParams::default().max_parts,
        concavity_tol: skipset::geometry::DecompositionParams::default().concavity_tol,
    }
}

fn infer_args(dir: &Path, threads: Option<usize>) -> InferArgs {
    InferArgs {
        dir: RobotDir {
            robot_dir: dir.to_path_buf(),
        },
        sampling: SamplingArgs {
            samples: skipset::sampling::DEFAULT_SAMPLES,
            seed: INFER_SEED,
            always_fraction: skipset::matrix::InferenceThresholds::default().always_fraction,
            never_margin: skipset::matrix::InferenceThresholds::default().never_margin,
            threads,
        },
        source: source(),
    }
}

/// The quad robot preprocessed and inferred with the command-line defaults.
struct Fixture {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
    model: RobotModel,
    shapes: Vec<LinkShapes>,
}

impl Fixture {
    fn new() -> Fixture {
        let tmp = tempfile::tempdir().expect("temp dir");
        let dir = tmp.path().join("quad");
        cmd_infer(&infer_args(&dir, None)).expect("inference on the fixture robot");
        let assets = RobotAssets::new(&dir);
        Fixture {
            model: assets.load_model().unwrap(),
            shapes: assets.load_shapes().unwrap(),
            _tmp: tmp,
            dir,
        }
    }

    fn assets(&self) -> RobotAssets {
        RobotAssets::new(&self.dir)
    }

    fn matrix(&self, t: ShapeType) -> SkipMatrix {
        self.assets().load_matrix(t).unwrap()
    }

    /// A private copy of the asset directory for criteria that write to it.
    fn copy(&self, into: &Path) -> PathBuf {
        let target = into.join("quad");
        copy_tree(&self.dir, &target);
        target
    }
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let path = entry.path();
        if path.is_dir() {
            copy_tree(&path, &to.join(entry.file_name()));
        } else {
            std::fs::copy(&path, to.join(entry.file_name())).unwrap();
        }
    }
}

fn cross_link_pairs(layout: &[skipset::proximity::ShapeSlot]) -> usize {
    let mut n = 0;
    for (k, a) in layout.iter().enumerate() {
        n += layout[k + 1..]
            .iter()
            .filter(|b| b.link_index != a.link_index)
            .count();
    }
    n
}

// 1 -------------------------------------------------------------------------------

fn geometry_oracles(_: &Fixture) -> Outcome {
    let start = Instant::now();
    let mut rng = TestRng::new(101);
    let mut worst = 0.0f64;
    for set in 0..200 {
        let scale = rng.uniform(0.01, 10.0);
        let offset = rng.vector(5.0);
        let points: Vec<P> = (0..30)
            .map(|_| rng.point(scale) + offset)
            .collect();

        let sphere = bounding_sphere(&points).map_err(|e| format!("set {set}: {e}"))?;
        let (_, radius) = brute_force_sphere(&points);
        let err = (sphere.radius - radius).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "set {set}: radius {} vs exhaustive {radius}", sphere.radius);

        let hull = convex_hull(&points).map_err(|e| format!("set {set}: {e}"))?;
        let plane_tol = 1e-9 * hull.scale();
        for (k, p) in points.iter().enumerate() {
            ensure!(
                hull.signed_distance_bound(p) <= plane_tol,
                "set {set}: point {k} lies {} outside the hull",
                hull.signed_distance_bound(p)
            );
        }

        let obb = oriented_bounding_box(&points).map_err(|e| format!("set {set}: {e}"))?;
        for (k, p) in points.iter().enumerate() {
            ensure!(obb.contains(p, 1e-9 * scale), "set {set}: point {k} outside the OBB");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("200 sets, worst radius error {worst:.1e}, {:.1}s", elapsed.as_secs_f64()))
}

// 2 -------------------------------------------------------------------------------

fn gjk_correctness(_: &Fixture) -> Outcome {
    let mut rng = TestRng::new(202);
    let identity = RigidTransform::identity();
    let (mut analytic, mut polytope) = (0, 0);
    let (mut worst_analytic, mut worst_polytope, mut worst_invariance) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..10_000 {
        let a = Body::random(&mut rng, k % 4, 0.2);
        let b = Body::random(&mut rng, (k / 4) % 4, 0.9);
        let (pa, pb) = (a.posed(&identity), b.posed(&identity));
        let got = distance(&pa, &pb).distance;
        match a.analytic_distance(&b) {
            Some(expected) => {
                analytic += 1;
                worst_analytic = worst_analytic.max((got - expected).abs());
                ensure!((got - expected).abs() <= 1e-9, "pair {k}: {got} vs analytic {expected}");
            }
            None => {
                polytope += 1;
                let expected = solid_distance(&a.solid(), &b.solid());
                worst_polytope = worst_polytope.max((got - expected).abs());
                ensure!((got - expected).abs() <= 1e-5, "pair {k}: {got} vs reference {expected}");
            }
        }
        let swapped = distance(&pb, &pa).distance;
        let shift = RigidTransform::from_parts(Translation3::from(rng.vector(10.0)), rng.rotation());
        let moved = distance(&pa.moved(&shift), &pb.moved(&shift)).distance;
        let drift = (got - swapped).abs().max((got - moved).abs());
        worst_invariance = worst_invariance.max(drift);
        ensure!(drift <= 1e-9, "pair {k}: {got}, swapped {swapped}, moved {moved}");
    }
    Ok(format!(
        "{analytic} analytic (worst {worst_analytic:.1e}), {polytope} polytope (worst {worst_polytope:.1e}), invariance worst {worst_invariance:.1e}"
    ))
}

// 3 -------------------------------------------------------------------------------

/// Intersecting (link, part) pairs, lower link first.
fn contacts(set: &PosedSet) -> BTreeSet<((usize, usize), (usize, usize))> {
    let mut out = BTreeSet::new();
    for (i, a) in set.shapes.iter().enumerate() {
        for b in &set.shapes[i + 1..] {
            if a.owner_link() != b.owner_link() && intersects(a, b) {
                let x = (a.owner_link(), a.owner_part().unwrap_or(0));
                let y = (b.owner_link(), b.owner_part().unwrap_or(0));
                out.insert((x.min(y), x.max(y)));
            }
        }
    }
    out
}

fn conservativeness(f: &Fixture) -> Outcome {
    let configs = f.model.configuration_sequence(303, 0, 1000);
    let (mut hull_hits, mut part_hits) = (0, 0);
    for (k, config) in configs.iter().enumerate() {
        let found: BTreeMap<ShapeType, _> = ShapeType::ALL
            .iter()
            .map(|&t| (t, contacts(&pose_shapes(&f.model, &f.shapes, t, config).unwrap())))
            .collect();
        for pair in &found[&ShapeType::HullLink] {
            hull_hits += 1;
            for t in [ShapeType::SphereLink, ShapeType::ObbLink] {
                ensure!(found[&t].contains(pair), "config {k}: hull pair {pair:?} missed by {t}");
            }
        }
        for pair in &found[&ShapeType::HullDecomp] {
            part_hits += 1;
            for t in [ShapeType::SphereDecomp, ShapeType::ObbDecomp] {
                ensure!(found[&t].contains(pair), "config {k}: part pair {pair:?} missed by {t}");
            }
            let links = ((pair.0 .0, 0), (pair.1 .0, 0));
            ensure!(
                found[&ShapeType::HullLink].contains(&links),
                "config {k}: part pair {pair:?} missed by the link hulls"
            );
        }
    }
    ensure!(hull_hits > 0, "no hull intersections in 1000 configurations");
    Ok(format!("{hull_hits} hull and {part_hits} part intersections, 0 violations"))
}

// 4 -------------------------------------------------------------------------------

/// Joints from the root down to `link`, root first.
fn chain(model: &RobotModel, link: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut at = link;
    while let Some(k) = model.joints.iter().position(|j| j.child == at) {
        out.push(k);
        at = model.joints[k].parent;
    }
    out.reverse();
    out
}

/// For every actuated joint, how far a point of `link`'s hull can move per unit of
/// joint motion. The bound depends only on link lengths, not on the configuration.
fn reach(model: &RobotModel, shapes: &[LinkShapes], link: usize) -> Vec<f64> {
    let path = chain(model, link);
    let extent = shapes
        .iter()
        .find(|s| s.link_index == link)
        .map(|s| s.hull.vertices.iter().map(|v| v.coords.norm()).fold(0.0, f64::max))
        .unwrap_or(0.0);
    model
        .active_joints
        .iter()
        .map(|k| match path.iter().position(|p| p == k) {
            None => 0.0,
            Some(_) if model.joints[*k].joint_type == JointType::Prismatic => 1.0,
            Some(at) => {
                let links: f64 = path[at + 1..]
                    .iter()
                    .map(|m| model.joints[*m].origin.translation.vector.norm())
                    .sum();
                links + extent
            }
        })
        .collect()
}

/// Certified lower bound on the distance between shapes `i` and `j` over the whole
/// joint box: grid minimum minus a Lipschitz bound on what moving to the nearest grid
/// node can change. Joints upstream of both links move the pair rigidly and are held.
fn certified_clearance(f: &Fixture, t: ShapeType, i: usize, j: usize) -> f64 {
    let layout = shape_layout(&f.model, &f.shapes, t).unwrap();
    let (la, lb) = (layout[i].link_index, layout[j].link_index);
    let (ra, rb) = (reach(&f.model, &f.shapes, la), reach(&f.model, &f.shapes, lb));
    let lipschitz: Vec<f64> = ra
        .iter()
        .zip(&rb)
        .map(|(&a, &b)| if a > 0.0 && b > 0.0 { 0.0 } else { a + b })
        .collect();
    let ranges = f.model.active_ranges();
    let budget = 0.04 / ranges.len() as f64;
    let mut axes = Vec::new();
    let mut slack = 0.0;
    for ((lo, hi), l) in ranges.iter().zip(&lipschitz) {
        let span = hi - lo;
        if *l == 0.0 || span == 0.0 {
            axes.push(vec![0.5 * (lo + hi)]);
            continue;
        }
        let n = ((span * l / (2.0 * budget)).ceil() as usize).max(1) + 1;
        let h = span / (n - 1) as f64;
        slack += l * h / 2.0;
        axes.push((0..n).map(|k| lo + h * k as f64).collect());
    }

    let mut best = f64::INFINITY;
    let mut index = vec![0usize; axes.len()];
    loop {
        let values = index.iter().zip(&axes).map(|(&k, a)| a[k]).collect();
        let set = pose_shapes(&f.model, &f.shapes, t, &Configuration::new(values)).unwrap();
        best = best.min(distance(&set.shapes[i], &set.shapes[j]).distance);
        let mut d = 0;
        while d < axes.len() {
            index[d] += 1;
            if index[d] < axes[d].len() {
                break;
            }
            index[d] = 0;
            d += 1;
        }
        if d == axes.len() {
            break;
        }
    }
    // Distances themselves carry the GJK tolerance.
    best - slack - 1e-5
}

fn inference_soundness(f: &Fixture) -> Outcome {
    let mut proofs = Vec::new();
    for t in [ShapeType::HullLink, ShapeType::HullDecomp] {
        for s in f.matrix(t).skips.iter().filter(|s| s.reason == SkipReason::NeverInCollision) {
            let bound = certified_clearance(f, t, s.i, s.j);
            ensure!(bound >= 0.1, "{t} never pair ({}, {}) only certified to {bound:.4} m", s.i, s.j);
            proofs.push(bound);
        }
    }
    ensure!(!proofs.is_empty(), "no never-colliding pairs were inferred");

    let oracle = collision_oracle(&f.model, &f.shapes, 1_000_000, ORACLE_SEED).unwrap();
    let colliding = oracle
        .link_pairs
        .iter()
        .filter(|p| !oracle.adjacent.contains(p))
        .count();
    ensure!(colliding > 0, "the oracle saw no colliding non-adjacent pair");

    let mut score = BTreeMap::new();
    for t in ShapeType::ALL {
        let layout = shape_layout(&f.model, &f.shapes, t).unwrap();
        score.insert(t, classify_with_oracle(&f.matrix(t), &layout, &oracle));
    }
    for t in [ShapeType::HullLink, ShapeType::HullDecomp] {
        let r = &score[&t];
        ensure!(r.correct == r.total && r.total > 0, "{t}: {}/{}", r.correct, r.total);
    }
    let (sphere, hull) = (&score[&ShapeType::SphereLink], &score[&ShapeType::HullLink]);
    ensure!(
        sphere.accuracy() < hull.accuracy(),
        "sphere_link {}/{} is not below hull_link {}/{}",
        sphere.correct,
        sphere.total,
        hull.correct,
        hull.total
    );
    let table: Vec<String> = score
        .iter()
        .map(|(t, r)| format!("{t} {}/{}", r.correct, r.total))
        .collect();
    let tightest = proofs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{}; {} never pairs certified >= {tightest:.3} m",
        table.join(", "),
        proofs.len()
    ))
}

// 5 -------------------------------------------------------------------------------

fn speed_ratio(f: &Fixture) -> Outcome {
    const CONFIGS: usize = 2000;
    const REPEATS: usize = 21;
    let mut parts = Vec::new();
    let mut self_band = (f64::INFINITY, f64::NEG_INFINITY);
    for t in ShapeType::ALL {
        let matrix = f.matrix(t);
        let layout = shape_layout(&f.model, &f.shapes, t).unwrap();
        let share = matrix.skips.len() as f64 / cross_link_pairs(&layout) as f64;
        ensure!(share >= 0.3, "{t}: only {:.0}% of pairs skipped", 100.0 * share);
        let empty = SkipMatrix::empty(&f.model.name, t, &layout);
        for mode in [QueryMode::Collision, QueryMode::Proximity] {
            let r = bench_ratio(&f.model, &f.shapes, &matrix, mode, CONFIGS, 505, REPEATS).unwrap();
            ensure!(r.ratio_mean < 0.9, "{t} {mode:?}: ratio {:.3}", r.ratio_mean);
            let own = bench_ratio(&f.model, &f.shapes, &empty, mode, CONFIGS, 505, REPEATS).unwrap();
            ensure!(
                (0.95..=1.05).contains(&own.ratio_mean),
                "{t} {mode:?}: empty-matrix self ratio {:.3}",
                own.ratio_mean
            );
            self_band = (self_band.0.min(own.ratio_mean), self_band.1.max(own.ratio_mean));
            parts.push(format!("{t}/{mode:?} {:.2}", r.ratio_mean).to_lowercase());
        }
    }
    Ok(format!(
        "{}; self ratios in [{:.3}, {:.3}]",
        parts.join(", "),
        self_band.0,
        self_band.1
    ))
}

// 6 -------------------------------------------------------------------------------

fn output_files(dir: &Path) -> Vec<PathBuf> {
    let assets = RobotAssets::new(dir);
    let mut files = Vec::new();
    for t in ShapeType::ALL {
        files.push(assets.stats_path(t));
        for format in ExportFormat::ALL {
            files.push(assets.matrix_path(t, format));
        }
    }
    files
}

fn determinism(f: &Fixture) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs = [Some(1), Some(4)];
    let dirs: Vec<PathBuf> = runs
        .iter()
        .enumerate()
        .map(|(k, threads)| {
            let dir = tmp.path().join(format!("run{k}"));
            cmd_infer(&infer_args(&dir, *threads)).unwrap();
            dir
        })
        .collect();
    let reference = output_files(&f.dir);
    ensure!(reference.len() == 18, "expected 18 output files");
    for dir in &dirs {
        for (want, got) in reference.iter().zip(output_files(dir)) {
            let (a, b) = (std::fs::read(want).unwrap(), std::fs::read(&got).unwrap());
            ensure!(a == b, "{} differs from {}", got.display(), want.display());
        }
    }
    Ok("12 matrix and 6 stats files identical across 1, 4 and all-core runs".into())
}

// 7 -------------------------------------------------------------------------------

fn serialization(f: &Fixture) -> Outcome {
    let assets = f.assets();
    for t in ShapeType::ALL {
        let layout = shape_layout(&f.model, &f.shapes, t).unwrap();
        let last = layout.len() - 1;
        let inferred = f.matrix(t);
        let edited = inferred.clone().set_skip(0, last, true).unwrap();
        for matrix in [inferred, edited] {
            let json = matrix.export(ExportFormat::Json);
            let yaml = matrix.export(ExportFormat::Yaml);
            let from_yaml = SkipMatrix::import(&yaml, ExportFormat::Yaml).map_err(|e| format!("{t}: {e}"))?;
            let from_json = SkipMatrix::import(&json, ExportFormat::Json).map_err(|e| format!("{t}: {e}"))?;
            ensure!(from_yaml == matrix && from_json == matrix, "{t}: round trip changed the matrix");
            ensure!(from_yaml.export(ExportFormat::Json) == json, "{t}: YAML -> JSON not canonical");
            ensure!(from_json.export(ExportFormat::Yaml) == yaml, "{t}: JSON -> YAML not canonical");
            ensure!(from_json.export(ExportFormat::Json) == json, "{t}: JSON re-export unstable");
        }
        for format in ExportFormat::ALL {
            let on_disk = std::fs::read_to_string(assets.matrix_path(t, format)).unwrap();
            let again = SkipMatrix::import(&on_disk, format).unwrap().export(format);
            ensure!(again == on_disk, "{t}: {format:?} file not bytewise stable");
        }
    }

    let base = f.matrix(ShapeType::HullLink);
    let n = base.num_shapes;
    let mut value: Value = serde_json::from_str(&base.export(ExportFormat::Json)).unwrap();
    let first = value["skips"][0].clone();
    let cases = [
        ("duplicate", json!([first.clone(), first.clone()])),
        ("out of range", json!([{"i": 0, "j": n, "reason": "user_marked"}])),
        ("degenerate", json!([{"i": 1, "j": 1, "reason": "user_marked"}])),
    ];
    let mut diagnostics = Vec::new();
    for (what, skips) in cases {
        value["skips"] = skips;
        let texts = [
            (ExportFormat::Json, serde_json::to_string(&value).unwrap()),
            (ExportFormat::Yaml, serde_yaml::to_string(&value).unwrap()),
        ];
        for (format, text) in texts {
            match SkipMatrix::import(&text, format) {
                Ok(_) => return Err(format!("{what} {format:?} matrix was accepted")),
                Err(e) => {
                    ensure!(e.to_string().contains(what), "{what}: unhelpful diagnostic `{e}`");
                    diagnostics.push(e.to_string());
                }
            }
        }
    }
    ensure!(SkipMatrix::import("skips: [", ExportFormat::Yaml).is_err(), "broken YAML accepted");
    Ok(format!("12 round trips canonical; rejected with e.g. `{}`", diagnostics[0]))
}

// 8 -------------------------------------------------------------------------------

fn moveit_import(f: &Fixture) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let srdf = fixture_dir().join("quad.srdf");
    let expected: BTreeSet<(usize, usize)> = [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)].into();

    // Fresh robot: the imported entries are the whole matrix.
    let fresh = tmp.path().join("fresh");
    cmd_preprocess(&PreprocessArgs {
        dir: RobotDir {
            robot_dir: fresh.clone(),
        },
        source: source(),
    })
    .unwrap();
    let report = cmd_import_moveit(&ImportArgs {
        dir: RobotDir {
            robot_dir: fresh.clone(),
        },
        srdf: srdf.clone(),
    })
    .map_err(|e| format!("{e:#}"))?;
    ensure!(report.imported == 5, "{} imported skips", report.imported);
    ensure!(
        report.warnings.len() == 1 && report.warnings[0].contains("gripper"),
        "warnings {:?}",
        report.warnings
    );
    let matrix = RobotAssets::new(&fresh).load_matrix(ShapeType::HullLink).unwrap();
    let pairs: BTreeSet<_> = matrix.skips.iter().map(|s| (s.i, s.j)).collect();
    ensure!(pairs == expected, "imported pairs {pairs:?}");
    ensure!(
        matrix.skips.iter().all(|s| s.reason == SkipReason::Imported),
        "non-imported entries in a fresh import"
    );

    // Inferred robot: imports take over those pairs, nothing else is touched.
    let inferred = f.copy(tmp.path());
    let before = f.matrix(ShapeType::HullLink);
    let report = cmd_import_moveit(&ImportArgs {
        dir: RobotDir {
            robot_dir: inferred.clone(),
        },
        srdf,
    })
    .map_err(|e| format!("{e:#}"))?;
    let after = RobotAssets::new(&inferred).load_matrix(ShapeType::HullLink).unwrap();
    ensure!(report.imported == 5, "{} imported skips over the inferred matrix", report.imported);
    for s in &after.skips {
        let imported = s.reason == SkipReason::Imported;
        ensure!(imported == expected.contains(&(s.i, s.j)), "entry {s:?}");
    }
    for s in &before.skips {
        ensure!(after.is_skipped(s.i, s.j), "inferred skip ({}, {}) lost", s.i, s.j);
    }
    Ok("5 imported skips, 1 warning (unknown link `gripper`)".into())
}

// 9 -------------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Kind {
    Str,
    Num,
    Int,
    Bool,
    Arr,
    Obj,
    NumOrNull,
    IntPairOrNull,
}

fn conforms(v: &Value, kind: Kind) -> bool {
    match kind {
        Kind::Str => v.is_string(),
        Kind::Num => v.is_number(),
        Kind::Int => v.is_u64(),
        Kind::Bool => v.is_boolean(),
        Kind::Arr => v.is_array(),
        Kind::Obj => v.is_object(),
        Kind::NumOrNull => v.is_null() || v.is_number(),
        Kind::IntPairOrNull => {
            v.is_null() || v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(Value::is_u64))
        }
    }
}

fn schema(what: &str, v: &Value, fields: &[(&str, Kind)]) -> Result<(), String> {
    for (name, kind) in fields {
        let field = v.get(*name).ok_or_else(|| format!("{what}: missing `{name}` in {v}"))?;
        ensure!(conforms(field, *kind), "{what}: `{name}` has the wrong type: {field}");
    }
    Ok(())
}

fn point(v: &Value) -> Result<P, String> {
    let a: Vec<f64> = serde_json::from_value(v.clone()).map_err(|e| format!("point {v}: {e}"))?;
    ensure!(a.len() == 3, "point {v}");
    Ok(P::new(a[0], a[1], a[2]))
}

fn pairs_schema(v: &Value, dof: usize) -> Result<Vec<PairDistance>, String> {
    schema(
        "pairs",
        v,
        &[
            ("shape_type", Kind::Str),
            ("config", Kind::Arr),
            ("link_poses", Kind::Arr),
            ("pairs", Kind::Arr),
            ("skipped_pairs", Kind::Arr),
        ],
    )?;
    ensure!(v["config"].as_array().unwrap().len() == dof, "config length");
    for pose in v["link_poses"].as_array().unwrap() {
        schema("link pose", pose, &[("link", Kind::Str), ("translation", Kind::Arr), ("rotation", Kind::Arr)])?;
        let q: Vec<f64> = serde_json::from_value(pose["rotation"].clone()).map_err(|e| e.to_string())?;
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        ensure!(q.len() == 4 && (norm - 1.0).abs() < 1e-9, "rotation {q:?}");
    }
    for (list, skipped) in [("pairs", false), ("skipped_pairs", true)] {
        for p in v[list].as_array().unwrap() {
            schema(
                list,
                p,
                &[
                    ("i", Kind::Int),
                    ("j", Kind::Int),
                    ("d", Kind::Num),
                    ("d_normalized", Kind::NumOrNull),
                    ("skipped", Kind::Bool),
                    ("closest_segment", Kind::Arr),
                ],
            )?;
            ensure!(p["i"].as_u64() < p["j"].as_u64(), "{list}: i >= j in {p}");
            ensure!(p["skipped"] == skipped, "{list}: skip flag in {p}");
            point(&p["closest_segment"][0])?;
            point(&p["closest_segment"][1])?;
        }
    }
    let pairs: Vec<PairDistance> = serde_json::from_value(v["pairs"].clone()).map_err(|e| e.to_string())?;
    ensure!(pairs.windows(2).all(|w| w[0].d <= w[1].d), "pair list not ascending");
    Ok(pairs)
}

fn skip_schema(v: &Value) -> Result<(), String> {
    schema(
        "skip summary",
        v,
        &[
            ("shape_type", Kind::Str),
            ("counts", Kind::Obj),
            ("total_skipped", Kind::Int),
            ("num_pairs", Kind::Int),
            ("dirty", Kind::Bool),
        ],
    )?;
    let sum: u64 = v["counts"].as_object().unwrap().values().filter_map(Value::as_u64).sum();
    ensure!(sum == v["total_skipped"].as_u64().unwrap(), "counts do not add up: {v}");
    Ok(())
}

struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    async fn call(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Result<Value, String> {
        let mut request = self.http.request(method, format!("{}{path}", self.base));
        if let Some(body) = body {
            request = request.json(&body);
        }
        let response = request.send().await.map_err(|e| format!("{path}: {e}"))?;
        let status = response.status();
        let value: Value = response.json().await.map_err(|e| format!("{path}: {e}"))?;
        ensure!(status.is_success(), "{path}: {status} {value}");
        Ok(value)
    }

    async fn get(&self, path: &str) -> Result<Value, String> {
        self.call(reqwest::Method::GET, path, None).await
    }

    async fn post(&self, path: &str, body: Value) -> Result<Value, String> {
        self.call(reqwest::Method::POST, path, Some(body)).await
    }
}

async fn scripted_session(f: &Fixture, dir: &Path) -> Outcome {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = skipset_service::app(&skipset_service::ServiceOptions::default()).map_err(|e| e.to_string())?;
    tokio::spawn(skipset_service::serve(listener, app));
    let client = Client {
        base,
        http: reqwest::Client::new(),
    };

    let robot = client.post("/load", json!({ "robot_dir": dir })).await?;
    schema(
        "robot",
        &robot,
        &[
            ("name", Kind::Str),
            ("dof", Kind::Int),
            ("links", Kind::Arr),
            ("joints", Kind::Arr),
            ("active_shape_type", Kind::Str),
            ("current_config", Kind::Arr),
            ("selected_pair", Kind::IntPairOrNull),
            ("dirty", Kind::Bool),
        ],
    )?;
    for joint in robot["joints"].as_array().unwrap() {
        schema(
            "joint",
            joint,
            &[
                ("name", Kind::Str),
                ("type", Kind::Str),
                ("parent", Kind::Str),
                ("child", Kind::Str),
                ("lower", Kind::NumOrNull),
                ("upper", Kind::NumOrNull),
            ],
        )?;
    }
    let dof = robot["dof"].as_u64().unwrap() as usize;
    ensure!(dof == f.model.dof, "dof {dof}");
    ensure!(robot["active_shape_type"] == "hull_link", "active type {}", robot["active_shape_type"]);

    // Set a configuration and compare against a direct query.
    let t = ShapeType::HullLink;
    let assets = RobotAssets::new(dir);
    let stats = assets.load_stats(t).unwrap();
    let direct = |values: &[f64], matrix: &SkipMatrix| -> Result<Vec<PairDistance>, String> {
        let set = pose_shapes(&f.model, &f.shapes, t, &Configuration::new(values.to_vec())).unwrap();
        match query_all_pairs(&set, matrix, Some(&stats), QueryMode::Proximity).unwrap() {
            QueryOutcome::Proximity(pairs) => Ok(pairs),
            QueryOutcome::Collision { .. } => Err("proximity query returned a collision outcome".into()),
        }
    };
    let values = [0.4, -0.9, 1.7];
    let response = client.post("/config", json!({ "values": values })).await?;
    let pairs = pairs_schema(&response, dof)?;
    ensure!(pairs == direct(&values, &assets.load_matrix(t).unwrap())?, "service pairs differ from query_all_pairs");

    // Open every pair so the list has something to sort, then pose again.
    let skipped: Vec<PairDistance> =
        serde_json::from_value(response["skipped_pairs"].clone()).map_err(|e| e.to_string())?;
    for p in &skipped {
        client.post("/skip", json!({ "i": p.i, "j": p.j, "on": false })).await?;
    }
    let values = [-2.2, 0.35, -1.3];
    let pairs = pairs_schema(&client.post("/config", json!({ "values": values })).await?, dof)?;
    let layout = shape_layout(&f.model, &f.shapes, t).unwrap();
    let open = SkipMatrix::empty(&f.model.name, t, &layout);
    ensure!(pairs == direct(&values, &open)?, "service pairs differ from query_all_pairs");
    ensure!(pairs.len() == cross_link_pairs(&layout), "{} live pairs", pairs.len());
    let fetched = pairs_schema(&client.get("/pairs").await?, dof)?;
    ensure!(fetched == pairs, "GET /pairs disagrees with POST /config");
    let random = client.post("/config", json!("random")).await?;
    pairs_schema(&random, dof)?;
    let values: Vec<f64> = serde_json::from_value(random["config"].clone()).map_err(|e| e.to_string())?;
    let pairs = pairs_schema(&random, dof)?;
    ensure!(pairs == direct(&values, &open)?, "random pose: service pairs differ from query_all_pairs");

    // Select every pair in turn.
    for p in &pairs {
        let s = client.post("/select", json!({ "i": p.i, "j": p.j })).await?;
        schema(
            "selection",
            &s,
            &[
                ("i", Kind::Int),
                ("j", Kind::Int),
                ("d", Kind::Num),
                ("intersecting", Kind::Bool),
                ("point_a", Kind::Arr),
                ("point_b", Kind::Arr),
                ("skipped", Kind::Bool),
            ],
        )?;
        let d = s["d"].as_f64().unwrap();
        let gap = (point(&s["point_b"])? - point(&s["point_a"])?).norm();
        ensure!((gap - d).abs() <= 1e-7, "selected ({}, {}): |a-b| {gap} vs d {d}", p.i, p.j);
        ensure!((d - p.d).abs() <= 1e-12, "selected ({}, {}): d {d} vs listed {}", p.i, p.j, p.d);
    }

    // Toggle a skip on and off, then on again.
    let initial = client.get("/skips").await?;
    skip_schema(&initial)?;
    let total = initial["total_skipped"].as_u64().unwrap();
    let target = &pairs[0];
    let on = client.post("/skip", json!({ "i": target.i, "j": target.j, "on": true })).await?;
    skip_schema(&on)?;
    ensure!(on["total_skipped"] == total + 1, "skip on: {on}");
    ensure!(on["counts"]["user_marked"] == 1 && on["dirty"] == true, "skip on: {on}");
    let off = client.post("/skip", json!({ "i": target.i, "j": target.j, "on": false })).await?;
    ensure!(off["total_skipped"] == total, "skip off: {off}");
    client.post("/skip", json!({ "i": target.i, "j": target.j, "on": true })).await?;
    let now = pairs_schema(&client.get("/pairs").await?, dof)?;
    ensure!(!now.iter().any(|p| (p.i, p.j) == (target.i, target.j)), "skipped pair still listed");

    // Bulk raw threshold: everything closer than the farthest live pair goes.
    let threshold = now.last().map_or(0.0, |p| p.d);
    let below = now.iter().filter(|p| p.d < threshold).count() as u64;
    let bulk = client.post("/skip/bulk", json!({ "mode": "raw", "threshold": threshold })).await?;
    skip_schema(&bulk)?;
    ensure!(bulk["total_skipped"] == total + 1 + below, "bulk: {bulk}");
    let rest = pairs_schema(&client.get("/pairs").await?, dof)?;
    ensure!(rest.iter().all(|p| p.d >= threshold), "bulk left closer pairs active");

    // Export.
    let exported = client.post("/export", json!({ "format": "both" })).await?;
    schema("export", &exported, &[("written", Kind::Arr), ("dirty", Kind::Bool)])?;
    let written = exported["written"].as_array().unwrap();
    ensure!(written.len() == 12, "{} files written", written.len());
    for path in written {
        ensure!(Path::new(path.as_str().unwrap()).exists(), "missing export {path}");
    }
    ensure!(exported["dirty"] == false, "still dirty after export");
    let saved = assets.load_matrix(t).unwrap();
    ensure!(
        saved.get(target.i, target.j).map(|e| e.reason) == Some(SkipReason::UserMarked),
        "exported matrix lacks the manual skip"
    );
    Ok(format!("{} live pairs checked, bulk skipped {below}, 12 files exported", pairs.len()))
}

fn service_contract(f: &Fixture) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = f.copy(tmp.path());
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
        .block_on(scripted_session(f, &dir))
}

// ---------------------------------------------------------------------------------

type Criterion = (&'static str, fn(&Fixture) -> Outcome);

const CRITERIA: [Criterion; 9] = [
    ("geometry oracles", geometry_oracles),
    ("GJK correctness", gjk_correctness),
    ("conservativeness", conservativeness),
    ("inference soundness", inference_soundness),
    ("speed ratio direction", speed_ratio),
    ("determinism", determinism),
    ("serialization", serialization),
    ("MoveIt import", moveit_import),
    ("service contract", service_contract),
];

fn main() {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    // libtest-style listing, so `cargo test -- --list` keeps working.
    if std::env::args().any(|a| a == "--list") {
        for (k, (name, _)) in CRITERIA.iter().enumerate() {
            println!("criterion {}: {name}: test", k + 1);
        }
        return;
    }

    let setup = Instant::now();
    let fixture = Fixture::new();
    println!("fixture robot inferred in {:.1}s", setup.elapsed().as_secs_f64());

    let mut failed = 0;
    for (k, (name, check)) in CRITERIA.iter().enumerate() {
        let number = k + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&fixture)))
            .unwrap_or_else(|panic| {
                let message = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {message}"))
            });
        let seconds = start.elapsed().as_secs_f64();
        let (status, detail) = match &outcome {
            Ok(detail) => ("PASS", detail),
            Err(detail) => ("FAIL", detail),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {number} {status} {name} ({seconds:.1}s): {detail}");
        std::io::stdout().flush().ok();
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
