//! Self-collision matrices: which shape pairs a query may skip, and why.

mod infer;
mod io;
mod srdf;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ShapeType;
use crate::proximity::{PairDistance, ShapeSlot};

pub use infer::{infer_skips, InferenceThresholds};
pub use io::{ExportFormat, FORMAT_VERSION};
pub use srdf::{import_moveit_srdf, SrdfImport};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),
    #[error("degenerate pair ({0}, {0})")]
    DegeneratePair(usize),
    #[error("pair ({i}, {j}) is out of range for {num_shapes} shapes")]
    OutOfRange { i: usize, j: usize, num_shapes: usize },
    #[error("duplicate entry for pair ({i}, {j})")]
    DuplicatePair { i: usize, j: usize },
    #[error("pair ({i}, {j}) lies on one link ({link}); same-link pairs are never checked")]
    SameLink { i: usize, j: usize, link: String },
    #[error("invalid shape_index_map: {0}")]
    IndexMap(String),
    #[error("stats cover {got_type} with {got} shapes but the layout has {expected_type} with {expected}")]
    StatsMismatch {
        expected_type: ShapeType,
        expected: usize,
        got_type: ShapeType,
        got: usize,
    },
    #[error("link `{0}` is not part of the robot model")]
    UnknownLink(String),
    #[error("threshold must be a nonnegative number, got {0}")]
    InvalidThreshold(f64),
    #[error("always_fraction must lie in (0, 1] and never_margin must be >= 0")]
    InvalidThresholds,
    #[error("unknown export format `{0}` (expected json or yaml)")]
    UnknownFormat(String),
    #[error("unknown bulk mode `{0}` (expected raw or normalized)")]
    UnknownBulkMode(String),
    #[error("invalid JSON matrix: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid YAML matrix: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("invalid SRDF: {0}")]
    Xml(#[from] roxmltree::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NeverInCollision,
    AlwaysInCollision,
    Adjacent,
    UserMarked,
    Imported,
}

impl SkipReason {
    pub const ALL: [SkipReason; 5] = [
        SkipReason::NeverInCollision,
        SkipReason::AlwaysInCollision,
        SkipReason::Adjacent,
        SkipReason::UserMarked,
        SkipReason::Imported,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NeverInCollision => "never_in_collision",
            SkipReason::AlwaysInCollision => "always_in_collision",
            SkipReason::Adjacent => "adjacent",
            SkipReason::UserMarked => "user_marked",
            SkipReason::Imported => "imported",
        }
    }

    /// Reasons that come from a person rather than from sampling.
    pub fn is_manual(self) -> bool {
        matches!(self, SkipReason::UserMarked | SkipReason::Imported)
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub i: usize,
    pub j: usize,
    pub reason: SkipReason,
    /// Free text carried along with the entry (the original reason of imported pairs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub index: usize,
    pub link_name: String,
    pub part: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BulkMode {
    Raw,
    Normalized,
}

impl FromStr for BulkMode {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(BulkMode::Raw),
            "normalized" => Ok(BulkMode::Normalized),
            other => Err(MatrixError::UnknownBulkMode(other.to_string())),
        }
    }
}

/// Field order is the file layout; do not reorder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipMatrix {
    pub format_version: u32,
    pub robot_name: String,
    pub shape_type: ShapeType,
    pub num_shapes: usize,
    pub shape_index_map: Vec<IndexEntry>,
    /// Sorted by (i, j), i < j, unique.
    pub skips: Vec<SkipEntry>,
}

impl SkipMatrix {
    /// Matrix over `layout` with no skips.
    pub fn empty(robot_name: &str, shape_type: ShapeType, layout: &[ShapeSlot]) -> SkipMatrix {
        SkipMatrix {
            format_version: FORMAT_VERSION,
            robot_name: robot_name.to_string(),
            shape_type,
            num_shapes: layout.len(),
            shape_index_map: layout
                .iter()
                .map(|s| IndexEntry {
                    index: s.index,
                    link_name: s.link_name.clone(),
                    part: s.part,
                })
                .collect(),
            skips: Vec::new(),
        }
    }

    fn position(&self, i: usize, j: usize) -> Result<usize, usize> {
        self.skips.binary_search_by(|e| (e.i, e.j).cmp(&(i, j)))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&SkipEntry> {
        let (i, j) = (i.min(j), i.max(j));
        self.position(i, j).ok().map(|k| &self.skips[k])
    }

    pub fn is_skipped(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    /// Check that `(i, j)` names two distinct in-range shapes on different links.
    /// Returns the pair as `(min, max)`.
    pub fn check_pair(&self, i: usize, j: usize) -> Result<(usize, usize), MatrixError> {
        if i == j {
            return Err(MatrixError::DegeneratePair(i));
        }
        let (i, j) = (i.min(j), i.max(j));
        if j >= self.num_shapes {
            return Err(MatrixError::OutOfRange {
                i,
                j,
                num_shapes: self.num_shapes,
            });
        }
        let link = &self.shape_index_map[i].link_name;
        if *link == self.shape_index_map[j].link_name {
            return Err(MatrixError::SameLink {
                i,
                j,
                link: link.clone(),
            });
        }
        Ok((i, j))
    }

    /// Insert `entry` unless the pair is already skipped. Returns whether it was inserted.
    fn insert_if_absent(&mut self, entry: SkipEntry) -> bool {
        match self.position(entry.i, entry.j) {
            Ok(_) => false,
            Err(k) => {
                self.skips.insert(k, entry);
                true
            }
        }
    }

    /// Mark or unmark one pair. Marking keeps an existing reason; unmarking removes any entry.
    pub fn set_skip(&self, i: usize, j: usize, on: bool) -> Result<SkipMatrix, MatrixError> {
        let (i, j) = self.check_pair(i, j)?;
        let mut out = self.clone();
        if on {
            out.insert_if_absent(SkipEntry {
                i,
                j,
                reason: SkipReason::UserMarked,
                annotation: None,
            });
        } else if let Ok(k) = out.position(i, j) {
            out.skips.remove(k);
        }
        Ok(out)
    }

    /// Skip every active pair whose distance (raw or normalized by its mean) is strictly
    /// below `threshold`. Pairs without a mean distance are left alone in normalized mode.
    pub fn apply_bulk_rule(
        &self,
        live: &[PairDistance],
        mode: BulkMode,
        threshold: f64,
    ) -> Result<SkipMatrix, MatrixError> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(MatrixError::InvalidThreshold(threshold));
        }
        let mut out = self.clone();
        for pd in live {
            let value = match mode {
                BulkMode::Raw => Some(pd.d),
                BulkMode::Normalized => pd.d_normalized,
            };
            if value.is_some_and(|v| v < threshold) {
                let (i, j) = out.check_pair(pd.i, pd.j)?;
                out.insert_if_absent(SkipEntry {
                    i,
                    j,
                    reason: SkipReason::UserMarked,
                    annotation: None,
                });
            }
        }
        Ok(out)
    }

    /// Number of skips per reason (every reason listed, zero included).
    pub fn counts_by_reason(&self) -> BTreeMap<SkipReason, usize> {
        let mut counts: BTreeMap<SkipReason, usize> =
            SkipReason::ALL.iter().map(|r| (*r, 0)).collect();
        for e in &self.skips {
            *counts.entry(e.reason).or_default() += 1;
        }
        counts
    }

    /// Keep manual entries of `self` on top of a freshly inferred matrix.
    pub fn with_manual_entries_of(&self, inferred: SkipMatrix) -> SkipMatrix {
        let mut out = inferred;
        for e in self.skips.iter().filter(|e| e.reason.is_manual()) {
            if e.j >= out.num_shapes {
                continue;
            }
            match out.position(e.i, e.j) {
                Ok(k) => out.skips[k] = e.clone(),
                Err(k) => out.skips.insert(k, e.clone()),
            }
        }
        out
    }
}
