//! Evaluation protocol: runtime ratio with and without a matrix, and classification
//! accuracy of a matrix against a dense collision oracle.

use std::collections::BTreeSet;
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{LinkShapes, ShapeType};
use crate::matrix::{SkipMatrix, SkipReason};
use crate::model::{batch_seed, ConfigSampler, RobotModel, BATCH_SIZE};
use crate::proximity::{
    intersects, pose_shapes, pose_with_transforms, PosedSet, ProximityError, QueryMode, QueryPlan,
    ShapeSlot,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub shape_type: ShapeType,
    pub mode: QueryMode,
    /// Median over repeats of the per-batch ratio `time_with / time_without`.
    pub ratio_mean: f64,
    /// Standard deviation of the per-repeat ratios.
    pub ratio_std: f64,
    pub n_configs: usize,
    /// Median over repeats of one pass over the configurations, seconds.
    pub wall_time_with: f64,
    pub wall_time_without: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub shape_type: ShapeType,
    pub correct: usize,
    pub total: usize,
}

impl AccuracyReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Shortest timed run; shorter ones are dominated by timer and scheduler noise.
const MIN_RUN_SECONDS: f64 = 0.01;

fn time_queries(
    plan: &QueryPlan,
    sets: &[PosedSet],
    mode: QueryMode,
    sweeps: usize,
) -> Result<f64, ProximityError> {
    let start = Instant::now();
    for _ in 0..sweeps {
        for set in sets {
            black_box(plan.run(black_box(set), None, mode)?);
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Time the pair query over `n_configs` seeded configurations with `matrix` and with no
/// skips. Shapes are posed up front so forward kinematics stays out of the timing; the
/// two variants alternate order between repeats and run on the calling thread. Each
/// timed run sweeps the configurations often enough to last at least 10 ms.
pub fn bench_ratio(
    model: &RobotModel,
    shapes: &[LinkShapes],
    matrix: &SkipMatrix,
    mode: QueryMode,
    n_configs: usize,
    seed: u64,
    repeats: usize,
) -> Result<BenchReport, ProximityError> {
    let configs = model.configuration_sequence(seed, 0, n_configs.max(1));
    let sets = configs
        .iter()
        .map(|c| pose_shapes(model, shapes, matrix.shape_type, c))
        .collect::<Result<Vec<_>, _>>()?;
    let with = QueryPlan::new(&sets[0], matrix)?;
    let without = QueryPlan::unfiltered(&sets[0]);

    // Warm caches and branch predictors once for each plan, then size the runs.
    time_queries(&with, &sets, mode, 1)?;
    let single = time_queries(&without, &sets, mode, 1)?;
    let sweeps = (MIN_RUN_SECONDS / single.max(1e-9)).ceil().clamp(1.0, 10_000.0) as usize;

    let repeats = repeats.max(1);
    let mut times_with = Vec::with_capacity(repeats);
    let mut times_without = Vec::with_capacity(repeats);
    for r in 0..repeats {
        if r % 2 == 0 {
            times_with.push(time_queries(&with, &sets, mode, sweeps)?);
            times_without.push(time_queries(&without, &sets, mode, sweeps)?);
        } else {
            times_without.push(time_queries(&without, &sets, mode, sweeps)?);
            times_with.push(time_queries(&with, &sets, mode, sweeps)?);
        }
    }
    let ratios: Vec<f64> = times_with
        .iter()
        .zip(&times_without)
        .map(|(w, wo)| w / wo.max(f64::MIN_POSITIVE))
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let ratio_std = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let wall_time_with = median(&times_with) / sweeps as f64;
    let wall_time_without = median(&times_without) / sweeps as f64;
    Ok(BenchReport {
        shape_type: matrix.shape_type,
        mode,
        // Back-to-back batches share the machine's noise regime, so the median of their
        // ratios is far steadier than a ratio of separately aggregated times.
        ratio_mean: median(&ratios),
        ratio_std,
        n_configs: sets.len(),
        wall_time_with,
        wall_time_without,
    })
}

/// Which pieces of the robot were ever seen in contact, judged on the finest geometry
/// (convex decomposition parts).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionOracle {
    pub samples: usize,
    pub seed: u64,
    /// Link pairs `(a, b)`, `a < b`, with at least one colliding part pair.
    pub link_pairs: BTreeSet<(usize, usize)>,
    /// Colliding part pairs `((link, part), (link, part))`, lower link first.
    pub part_pairs: BTreeSet<((usize, usize), (usize, usize))>,
    /// Kinematically adjacent link pairs; never scored.
    pub adjacent: BTreeSet<(usize, usize)>,
}

impl CollisionOracle {
    /// Did the oracle ever see shapes `a` and `b` of one index space collide?
    pub fn collided(&self, a: &ShapeSlot, b: &ShapeSlot) -> bool {
        match (a.part, b.part) {
            (Some(pa), Some(pb)) => {
                let (x, y) = ((a.link_index, pa), (b.link_index, pb));
                self.part_pairs.contains(&(x.min(y), x.max(y)))
            }
            _ => {
                let (x, y) = (a.link_index, b.link_index);
                self.link_pairs.contains(&(x.min(y), x.max(y)))
            }
        }
    }
}

/// Dense sampling oracle over `samples` configurations of the stream seeded with `seed`.
pub fn collision_oracle(
    model: &RobotModel,
    shapes: &[LinkShapes],
    samples: usize,
    seed: u64,
) -> Result<CollisionOracle, ProximityError> {
    let zero = model.forward_kinematics(&model.zero_configuration())?;
    let plan = QueryPlan::unfiltered(&pose_with_transforms(shapes, ShapeType::HullDecomp, &zero)?);
    let batches = samples.div_ceil(BATCH_SIZE);
    let found = (0..batches)
        .into_par_iter()
        .map(|batch| -> Result<BTreeSet<(usize, usize)>, ProximityError> {
            let mut sampler = ConfigSampler::new(batch_seed(seed, batch));
            let mut hits = BTreeSet::new();
            for _ in 0..BATCH_SIZE.min(samples - batch * BATCH_SIZE) {
                let poses = model.forward_kinematics(&sampler.sample(model))?;
                let set = pose_with_transforms(shapes, ShapeType::HullDecomp, &poses)?;
                for &(i, j) in plan.pairs() {
                    if !hits.contains(&(i, j)) && intersects(&set.shapes[i], &set.shapes[j]) {
                        hits.insert((i, j));
                    }
                }
            }
            Ok(hits)
        })
        .try_reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            Ok(a)
        })?;

    let set = pose_with_transforms(shapes, ShapeType::HullDecomp, &zero)?;
    let mut oracle = CollisionOracle {
        samples,
        seed,
        adjacent: model.adjacent_link_pairs(),
        ..Default::default()
    };
    for (i, j) in found {
        let (a, b) = (&set.shapes[i], &set.shapes[j]);
        let x = (a.owner_link(), a.owner_part().unwrap_or(0));
        let y = (b.owner_link(), b.owner_part().unwrap_or(0));
        oracle.part_pairs.insert((x.min(y), x.max(y)));
        oracle
            .link_pairs
            .insert((x.0.min(y.0), x.0.max(y.0)));
    }
    Ok(oracle)
}

/// Score `matrix` against an oracle. A skip that claims the pair cannot collide
/// (never in collision, user marked, imported) is correct iff the oracle saw no
/// collision; an active pair is correct iff the oracle saw one. Pairs of adjacent
/// links and always-colliding skips are not scored.
pub fn classify_with_oracle(
    matrix: &SkipMatrix,
    layout: &[ShapeSlot],
    oracle: &CollisionOracle,
) -> AccuracyReport {
    let mut report = AccuracyReport {
        shape_type: matrix.shape_type,
        correct: 0,
        total: 0,
    };
    for (i, a) in layout.iter().enumerate() {
        for (j, b) in layout.iter().enumerate().skip(i + 1) {
            let links = (a.link_index.min(b.link_index), a.link_index.max(b.link_index));
            if links.0 == links.1 || oracle.adjacent.contains(&links) {
                continue;
            }
            let collided = oracle.collided(a, b);
            let correct = match matrix.get(i, j).map(|e| e.reason) {
                Some(SkipReason::Adjacent | SkipReason::AlwaysInCollision) => continue,
                Some(_) => !collided,
                None => collided,
            };
            report.total += 1;
            report.correct += usize::from(correct);
        }
    }
    report
}

pub fn classify_accuracy(
    matrix: &SkipMatrix,
    shapes: &[LinkShapes],
    model: &RobotModel,
    oracle_samples: usize,
    seed: u64,
) -> Result<AccuracyReport, ProximityError> {
    let layout = crate::proximity::shape_layout(model, shapes, matrix.shape_type)?;
    let oracle = collision_oracle(model, shapes, oracle_samples, seed)?;
    Ok(classify_with_oracle(matrix, &layout, &oracle))
}
