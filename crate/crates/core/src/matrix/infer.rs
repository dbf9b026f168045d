use serde::{Deserialize, Serialize};

use super::{MatrixError, SkipEntry, SkipMatrix, SkipReason};
use crate::model::RobotModel;
use crate::proximity::ShapeSlot;
use crate::sampling::StatsTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceThresholds {
    /// A pair colliding in at least this share of samples is always in collision.
    pub always_fraction: f64,
    /// A pair that never collided is skipped only if it also stayed this far apart (m).
    pub never_margin: f64,
}

impl Default for InferenceThresholds {
    fn default() -> Self {
        InferenceThresholds {
            always_fraction: 0.99,
            never_margin: 0.0,
        }
    }
}

impl InferenceThresholds {
    pub fn validate(&self) -> Result<(), MatrixError> {
        let fraction_ok = self.always_fraction > 0.0 && self.always_fraction <= 1.0;
        if fraction_ok && self.never_margin >= 0.0 {
            Ok(())
        } else {
            Err(MatrixError::InvalidThresholds)
        }
    }
}

/// Classify every pair of `layout` from sampled statistics.
///
/// Precedence: adjacent links, then always in collision, then never in collision.
/// Pairs matching none of the rules stay active.
pub fn infer_skips(
    stats: &StatsTable,
    model: &RobotModel,
    layout: &[ShapeSlot],
    thresholds: &InferenceThresholds,
) -> Result<SkipMatrix, MatrixError> {
    thresholds.validate()?;
    if stats.num_shapes != layout.len() {
        return Err(MatrixError::StatsMismatch {
            expected_type: stats.shape_type,
            expected: layout.len(),
            got_type: stats.shape_type,
            got: stats.num_shapes,
        });
    }
    let adjacent = model.adjacent_link_pairs();
    let mut matrix = SkipMatrix::empty(&model.name, stats.shape_type, layout);
    for (i, a) in layout.iter().enumerate() {
        for (j, b) in layout.iter().enumerate().skip(i + 1) {
            if a.link_index == b.link_index {
                continue;
            }
            let links = (a.link_index.min(b.link_index), a.link_index.max(b.link_index));
            let reason = if adjacent.contains(&links) {
                Some(SkipReason::Adjacent)
            } else {
                stats.get(i, j).and_then(|s| {
                    if s.collision_fraction >= thresholds.always_fraction {
                        Some(SkipReason::AlwaysInCollision)
                    } else if s.collision_fraction == 0.0 && s.d_min >= thresholds.never_margin {
                        Some(SkipReason::NeverInCollision)
                    } else {
                        None
                    }
                })
            };
            if let Some(reason) = reason {
                matrix.skips.push(SkipEntry {
                    i,
                    j,
                    reason,
                    annotation: None,
                });
            }
        }
    }
    Ok(matrix)
}
