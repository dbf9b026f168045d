use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MatrixError, SkipMatrix};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Yaml,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 2] = [ExportFormat::Json, ExportFormat::Yaml];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Yaml => "yaml",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "yaml" | "yml" => Ok(ExportFormat::Yaml),
            other => Err(MatrixError::UnknownFormat(other.to_string())),
        }
    }
}

impl SkipMatrix {
    /// Canonical text: fixed field order, skips sorted by pair. JSON is compact.
    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => serde_json::to_string(self).expect("matrix serializes"),
            ExportFormat::Yaml => serde_yaml::to_string(self).expect("matrix serializes"),
        }
    }

    /// Parse and validate. Pairs written as `(j, i)` are normalized and skips re-sorted.
    pub fn import(text: &str, format: ExportFormat) -> Result<SkipMatrix, MatrixError> {
        let matrix: SkipMatrix = match format {
            ExportFormat::Json => serde_json::from_str(text)?,
            ExportFormat::Yaml => serde_yaml::from_str(text)?,
        };
        matrix.validated()
    }

    fn validated(mut self) -> Result<SkipMatrix, MatrixError> {
        if self.format_version != FORMAT_VERSION {
            return Err(MatrixError::UnsupportedVersion(self.format_version));
        }
        if self.shape_index_map.len() != self.num_shapes {
            return Err(MatrixError::IndexMap(format!(
                "{} entries for num_shapes {}",
                self.shape_index_map.len(),
                self.num_shapes
            )));
        }
        if let Some((k, e)) = self
            .shape_index_map
            .iter()
            .enumerate()
            .find(|(k, e)| e.index != *k)
        {
            return Err(MatrixError::IndexMap(format!(
                "entry {k} has index {}",
                e.index
            )));
        }
        let mut seen = HashSet::new();
        let mut skips = std::mem::take(&mut self.skips);
        for entry in &mut skips {
            let (i, j) = self.check_pair(entry.i, entry.j)?;
            if !seen.insert((i, j)) {
                return Err(MatrixError::DuplicatePair { i, j });
            }
            entry.i = i;
            entry.j = j;
        }
        skips.sort_by_key(|e| (e.i, e.j));
        self.skips = skips;
        Ok(self)
    }
}
