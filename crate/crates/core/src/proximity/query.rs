use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{distance, intersects, PosedSet, ProximityError};
use crate::geometry::{LinkShapes, Point, ShapeType};
use crate::matrix::SkipMatrix;
use crate::model::RobotModel;
use crate::sampling::StatsTable;

/// One entry of a shape index space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSlot {
    pub index: usize,
    pub link_index: usize,
    pub link_name: String,
    pub part: Option<usize>,
}

/// The shape index space of `shape_type`: shapes ordered by (link index, part index).
pub fn shape_layout(
    model: &RobotModel,
    shapes: &[LinkShapes],
    shape_type: ShapeType,
) -> Result<Vec<ShapeSlot>, ProximityError> {
    let local = super::local_shapes(shapes, shape_type)?;
    local
        .into_iter()
        .enumerate()
        .map(|(index, (_, link_index, part))| {
            let link = model
                .links
                .get(link_index)
                .ok_or(ProximityError::UnknownLink(link_index))?;
            Ok(ShapeSlot {
                index,
                link_index,
                link_name: link.name.clone(),
                part,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Collision,
    Proximity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub d_normalized: Option<f64>,
    pub skipped: bool,
    pub closest_segment: (Point, Point),
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryOutcome {
    /// `checks` counts the pairs evaluated before the answer was known.
    Collision { colliding: bool, checks: usize },
    Proximity(Vec<PairDistance>),
}

/// The pairs a query evaluates, resolved once so repeated queries skip the matrix lookups.
#[derive(Clone, Debug)]
pub struct QueryPlan {
    shape_type: ShapeType,
    num_shapes: usize,
    pairs: Vec<(usize, usize)>,
}

impl QueryPlan {
    /// Every pair except same-link pairs and pairs skipped by `matrix`.
    pub fn new(set: &PosedSet, matrix: &SkipMatrix) -> Result<QueryPlan, ProximityError> {
        check_space(set, matrix.shape_type, matrix.num_shapes)?;
        let skipped: HashSet<(usize, usize)> = matrix.skips.iter().map(|s| (s.i, s.j)).collect();
        Ok(Self::build(set, |pair| !skipped.contains(&pair)))
    }

    /// Every pair except same-link pairs.
    pub fn unfiltered(set: &PosedSet) -> QueryPlan {
        Self::build(set, |_| true)
    }

    fn build(set: &PosedSet, keep: impl Fn((usize, usize)) -> bool) -> QueryPlan {
        let n = set.shapes.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if set.shapes[i].owner_link() != set.shapes[j].owner_link() && keep((i, j)) {
                    pairs.push((i, j));
                }
            }
        }
        QueryPlan {
            shape_type: set.shape_type,
            num_shapes: n,
            pairs,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Stop at the first intersecting pair.
    pub fn collision(&self, set: &PosedSet) -> Result<(bool, usize), ProximityError> {
        check_space(set, self.shape_type, self.num_shapes)?;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if intersects(&set.shapes[i], &set.shapes[j]) {
                return Ok((true, k + 1));
            }
        }
        Ok((false, self.pairs.len()))
    }

    /// Distances of every planned pair, ascending by `d` (ties by index).
    pub fn proximity(
        &self,
        set: &PosedSet,
        stats: Option<&StatsTable>,
    ) -> Result<Vec<PairDistance>, ProximityError> {
        check_space(set, self.shape_type, self.num_shapes)?;
        if let Some(stats) = stats {
            if stats.shape_type != self.shape_type || stats.num_shapes != self.num_shapes {
                return Err(ProximityError::IndexSpaceMismatch {
                    expected_type: self.shape_type,
                    expected: self.num_shapes,
                    got_type: stats.shape_type,
                    got: stats.num_shapes,
                });
            }
        }
        let mut out: Vec<PairDistance> = self
            .pairs
            .iter()
            .map(|&(i, j)| {
                let r = distance(&set.shapes[i], &set.shapes[j]);
                let d_normalized = stats
                    .and_then(|s| s.get(i, j))
                    .filter(|p| p.d_mean > 0.0)
                    .map(|p| r.distance / p.d_mean);
                PairDistance {
                    i,
                    j,
                    d: r.distance,
                    d_normalized,
                    skipped: false,
                    closest_segment: (r.point_a, r.point_b),
                }
            })
            .collect();
        out.sort_by(|a, b| a.d.total_cmp(&b.d).then((a.i, a.j).cmp(&(b.i, b.j))));
        Ok(out)
    }

    pub fn run(
        &self,
        set: &PosedSet,
        stats: Option<&StatsTable>,
        mode: QueryMode,
    ) -> Result<QueryOutcome, ProximityError> {
        match mode {
            QueryMode::Collision => {
                let (colliding, checks) = self.collision(set)?;
                Ok(QueryOutcome::Collision { colliding, checks })
            }
            QueryMode::Proximity => Ok(QueryOutcome::Proximity(self.proximity(set, stats)?)),
        }
    }
}

fn check_space(set: &PosedSet, shape_type: ShapeType, num_shapes: usize) -> Result<(), ProximityError> {
    if set.shape_type != shape_type || set.shapes.len() != num_shapes {
        return Err(ProximityError::IndexSpaceMismatch {
            expected_type: shape_type,
            expected: num_shapes,
            got_type: set.shape_type,
            got: set.shapes.len(),
        });
    }
    Ok(())
}

/// Evaluate every pair not skipped by `matrix`. Same-link pairs are never evaluated.
pub fn query_all_pairs(
    set: &PosedSet,
    matrix: &SkipMatrix,
    stats: Option<&StatsTable>,
    mode: QueryMode,
) -> Result<QueryOutcome, ProximityError> {
    QueryPlan::new(set, matrix)?.run(set, stats, mode)
}
