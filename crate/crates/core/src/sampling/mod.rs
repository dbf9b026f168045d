//! Sampling pass: per-pair distance statistics over many random configurations.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LinkShapes, ShapeType};
use crate::model::{batch_seed, ConfigSampler, ModelError, RobotModel, BATCH_SIZE};
use crate::proximity::{distance, pose_with_transforms, PairDistance, ProximityError, QueryPlan};

pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error("stats for {expected_type} with {expected} shapes cannot take {got_type} with {got}")]
    Mismatch {
        expected_type: ShapeType,
        expected: usize,
        got_type: ShapeType,
        got: usize,
    },
    #[error("pair ({i}, {j}) is not a valid pair for {num_shapes} shapes")]
    InvalidPair { i: usize, j: usize, num_shapes: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub i: usize,
    pub j: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub d_mean: f64,
    pub collision_fraction: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub shape_type: ShapeType,
    pub robot_name: String,
    pub seed: u64,
    pub num_shapes: usize,
    /// Sorted by (i, j).
    pub entries: Vec<PairStats>,
}

impl StatsTable {
    pub fn empty(shape_type: ShapeType, robot_name: &str, seed: u64, num_shapes: usize) -> Self {
        StatsTable {
            shape_type,
            robot_name: robot_name.to_string(),
            seed,
            num_shapes,
            entries: Vec::new(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PairStats> {
        let key = (i.min(j), i.max(j));
        self.entries
            .binary_search_by(|e| (e.i, e.j).cmp(&key))
            .ok()
            .map(|k| &self.entries[k])
    }

    /// Fold one configuration's pair distances into the statistics.
    pub fn accumulate(
        &self,
        shape_type: ShapeType,
        num_shapes: usize,
        pair_distances: &[PairDistance],
    ) -> Result<StatsTable, SamplingError> {
        if shape_type != self.shape_type || num_shapes != self.num_shapes {
            return Err(SamplingError::Mismatch {
                expected_type: self.shape_type,
                expected: self.num_shapes,
                got_type: shape_type,
                got: num_shapes,
            });
        }
        let mut acc: BTreeMap<(usize, usize), Accumulator> = self
            .entries
            .iter()
            .map(|e| ((e.i, e.j), Accumulator::from_stats(e)))
            .collect();
        for pd in pair_distances {
            if pd.i >= pd.j || pd.j >= self.num_shapes {
                return Err(SamplingError::InvalidPair {
                    i: pd.i,
                    j: pd.j,
                    num_shapes: self.num_shapes,
                });
            }
            acc.entry((pd.i, pd.j)).or_default().add(pd.d);
        }
        Ok(self.with_entries(acc))
    }

    /// Statistics over the union of the two sample sets.
    pub fn merge(&self, other: &StatsTable) -> Result<StatsTable, SamplingError> {
        if other.shape_type != self.shape_type || other.num_shapes != self.num_shapes {
            return Err(SamplingError::Mismatch {
                expected_type: self.shape_type,
                expected: self.num_shapes,
                got_type: other.shape_type,
                got: other.num_shapes,
            });
        }
        let mut acc: BTreeMap<(usize, usize), Accumulator> = self
            .entries
            .iter()
            .map(|e| ((e.i, e.j), Accumulator::from_stats(e)))
            .collect();
        for e in &other.entries {
            acc.entry((e.i, e.j))
                .or_default()
                .merge(&Accumulator::from_stats(e));
        }
        Ok(self.with_entries(acc))
    }

    fn with_entries(&self, acc: BTreeMap<(usize, usize), Accumulator>) -> StatsTable {
        StatsTable {
            entries: acc
                .into_iter()
                .filter(|(_, a)| a.samples > 0)
                .map(|((i, j), a)| a.finish(i, j))
                .collect(),
            ..StatsTable::empty(self.shape_type, &self.robot_name, self.seed, self.num_shapes)
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("stats serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<StatsTable, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Running min/max/count with a Neumaier-compensated sum.
#[derive(Clone, Copy, Debug)]
struct Accumulator {
    min: f64,
    max: f64,
    sum: f64,
    compensation: f64,
    collisions: u64,
    samples: u64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Accumulator {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            compensation: 0.0,
            collisions: 0,
            samples: 0,
        }
    }
}

impl Accumulator {
    fn add_to_sum(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn add(&mut self, d: f64) {
        self.min = self.min.min(d);
        self.max = self.max.max(d);
        self.add_to_sum(d);
        if d <= 0.0 {
            self.collisions += 1;
        }
        self.samples += 1;
    }

    fn merge(&mut self, other: &Accumulator) {
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.add_to_sum(other.sum);
        self.add_to_sum(other.compensation);
        self.collisions += other.collisions;
        self.samples += other.samples;
    }

    fn from_stats(s: &PairStats) -> Accumulator {
        Accumulator {
            min: s.d_min,
            max: s.d_max,
            sum: s.d_mean * s.samples as f64,
            compensation: 0.0,
            collisions: (s.collision_fraction * s.samples as f64).round() as u64,
            samples: s.samples,
        }
    }

    fn finish(&self, i: usize, j: usize) -> PairStats {
        let n = self.samples as f64;
        PairStats {
            i,
            j,
            d_min: self.min,
            d_max: self.max,
            // Clamp so rounding never pushes the mean outside [min, max].
            d_mean: ((self.sum + self.compensation) / n).clamp(self.min, self.max),
            collision_fraction: self.collisions as f64 / n,
            samples: self.samples,
        }
    }
}

/// Accumulators for every non-same-link pair of one shape type.
struct TypeAccumulator {
    plan: QueryPlan,
    pairs: Vec<Accumulator>,
}

/// Sample `n_samples` configurations and collect pair statistics for all six shape types.
///
/// Forward kinematics runs once per sample and feeds every shape type. Batches of
/// `BATCH_SIZE` samples run in parallel and are merged in batch order, so the output is
/// the same for any `threads` value.
pub fn run_sampling(
    model: &RobotModel,
    shapes: &[LinkShapes],
    n_samples: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<BTreeMap<ShapeType, StatsTable>, SamplingError> {
    if n_samples == 0 {
        return Err(SamplingError::NoSamples);
    }
    let zero = model.forward_kinematics(&model.zero_configuration())?;
    let mut template = Vec::with_capacity(ShapeType::ALL.len());
    for shape_type in ShapeType::ALL {
        let set = pose_with_transforms(shapes, shape_type, &zero)?;
        let plan = QueryPlan::unfiltered(&set);
        template.push((shape_type, set.shapes.len(), plan));
    }

    let batches = n_samples.div_ceil(BATCH_SIZE);
    let run_batch = |batch: usize| -> Result<Vec<Vec<Accumulator>>, SamplingError> {
        let mut accs: Vec<TypeAccumulator> = template
            .iter()
            .map(|(_, _, plan)| TypeAccumulator {
                plan: plan.clone(),
                pairs: vec![Accumulator::default(); plan.pairs().len()],
            })
            .collect();
        let mut sampler = ConfigSampler::new(batch_seed(seed, batch));
        let count = BATCH_SIZE.min(n_samples - batch * BATCH_SIZE);
        for _ in 0..count {
            let config = sampler.sample(model);
            let link_poses = model.forward_kinematics(&config)?;
            for (acc, (shape_type, _, _)) in accs.iter_mut().zip(&template) {
                let set = pose_with_transforms(shapes, *shape_type, &link_poses)?;
                for (slot, &(i, j)) in acc.pairs.iter_mut().zip(acc.plan.pairs()) {
                    slot.add(distance(&set.shapes[i], &set.shapes[j]).distance);
                }
            }
        }
        Ok(accs.into_iter().map(|a| a.pairs).collect())
    };

    let per_batch: Vec<Vec<Vec<Accumulator>>> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SamplingError::ThreadPool(e.to_string()))?
            .install(|| (0..batches).into_par_iter().map(run_batch).collect::<Result<_, _>>())?,
        None => (0..batches)
            .into_par_iter()
            .map(run_batch)
            .collect::<Result<_, _>>()?,
    };

    let mut out = BTreeMap::new();
    for (t, (shape_type, num_shapes, plan)) in template.iter().enumerate() {
        let mut total = vec![Accumulator::default(); plan.pairs().len()];
        for batch in &per_batch {
            for (sum, part) in total.iter_mut().zip(&batch[t]) {
                sum.merge(part);
            }
        }
        let entries = plan
            .pairs()
            .iter()
            .zip(&total)
            .map(|(&(i, j), a)| a.finish(i, j))
            .collect();
        out.insert(
            *shape_type,
            StatsTable {
                shape_type: *shape_type,
                robot_name: model.name.clone(),
                seed,
                num_shapes: *num_shapes,
                entries,
            },
        );
    }
    Ok(out)
}
