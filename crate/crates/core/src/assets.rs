//! Robot asset directory:
//!
//! ```text
//! <robot_dir>/model/robot.urdf        copy of the source description
//! <robot_dir>/model/model.json        parsed kinematic model
//! <robot_dir>/shapes/<link>.json      six representations per link with geometry
//! <robot_dir>/stats/<type>.json       sampled pair statistics per shape type
//! <robot_dir>/matrices/<type>.json    skip matrix per shape type (source of truth)
//! <robot_dir>/matrices/<type>.yaml    same content as YAML
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{
    build_link_representations, load_mesh, DecompositionParams, GeometryError, LinkShapes,
    MeshFormat, Point, ShapeType, TriangleMesh,
};
use crate::matrix::{ExportFormat, MatrixError, SkipMatrix};
use crate::model::{parse_urdf, GeometrySource, ModelError, RobotModel};
use crate::sampling::StatsTable;

/// Tessellation used for URDF primitive shapes.
const CYLINDER_SEGMENTS: usize = 32;
const SPHERE_RINGS: usize = 16;
const SPHERE_SEGMENTS: usize = 32;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("link `{link}`: {message}")]
    LinkGeometry { link: String, message: String },
    #[error("{0} does not exist; run preprocess first")]
    Missing(PathBuf),
    #[error("{path} describes {found}, expected {expected}")]
    WrongShapeType {
        path: PathBuf,
        found: ShapeType,
        expected: ShapeType,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AssetError + '_ {
    move |source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, AssetError> {
    if !path.exists() {
        return Err(AssetError::Missing(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, contents: &str) -> Result<(), AssetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AssetError> {
    serde_json::from_str(&read(path)?).map_err(|source| AssetError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("asset serializes");
    text.push('\n');
    text
}

/// File-name-safe form of a link name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// The merged mesh of all geometry elements of a link, in the link frame.
pub fn link_mesh(model: &RobotModel, link_index: usize) -> Result<Option<TriangleMesh>, AssetError> {
    let link = &model.links[link_index];
    let geometry_error = |message: String| AssetError::LinkGeometry {
        link: link.name.clone(),
        message,
    };
    let mut merged: Option<TriangleMesh> = None;
    for element in link.geometry() {
        let local = match &element.source {
            GeometrySource::Mesh { path, scale } => {
                let format = MeshFormat::from_path(path).ok_or_else(|| {
                    geometry_error(format!("unsupported mesh format `{}`", path.display()))
                })?;
                let bytes = fs::read(path).map_err(|e| {
                    geometry_error(format!("cannot read mesh `{}`: {e}", path.display()))
                })?;
                let loaded = load_mesh(&bytes, format)
                    .map_err(|e| geometry_error(format!("{}: {e}", path.display())))?;
                if loaded.dropped_triangles > 0 {
                    log::warn!(
                        "link `{}`: dropped {} degenerate triangles from {}",
                        link.name,
                        loaded.dropped_triangles,
                        path.display()
                    );
                }
                let mut mesh = loaded.mesh;
                for v in &mut mesh.vertices {
                    *v = Point::from(v.coords.component_mul(scale));
                }
                mesh
            }
            GeometrySource::Box { size } => {
                let half = Point::from(size * 0.5);
                TriangleMesh::cuboid(Point::from(-half.coords), half)
            }
            GeometrySource::Cylinder { radius, length } => {
                TriangleMesh::cylinder(*radius, *length, CYLINDER_SEGMENTS)
            }
            GeometrySource::Sphere { radius } => {
                TriangleMesh::uv_sphere(Point::origin(), *radius, SPHERE_RINGS, SPHERE_SEGMENTS)
            }
        };
        let placed = local.transformed(&element.origin);
        match &mut merged {
            Some(mesh) => mesh.append(&placed),
            None => merged = Some(placed),
        }
    }
    Ok(merged)
}

/// Build the six representations for every link that has geometry, sorted by link index.
pub fn build_shapes(
    model: &RobotModel,
    params: &DecompositionParams,
) -> Result<Vec<LinkShapes>, AssetError> {
    let mut shapes = Vec::new();
    for index in 0..model.links.len() {
        let Some(mesh) = link_mesh(model, index)? else {
            continue;
        };
        let built = build_link_representations(&mesh, index, params).map_err(
            |e: GeometryError| AssetError::LinkGeometry {
                link: model.links[index].name.clone(),
                message: e.to_string(),
            },
        )?;
        shapes.push(built);
    }
    Ok(shapes)
}

/// Handle on one robot asset directory.
#[derive(Clone, Debug)]
pub struct RobotAssets {
    root: PathBuf,
}

impl RobotAssets {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RobotAssets { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn urdf_path(&self) -> PathBuf {
        self.root.join("model").join("robot.urdf")
    }

    pub fn model_path(&self) -> PathBuf {
        self.root.join("model").join("model.json")
    }

    pub fn shapes_dir(&self) -> PathBuf {
        self.root.join("shapes")
    }

    pub fn stats_path(&self, shape_type: ShapeType) -> PathBuf {
        self.root.join("stats").join(format!("{shape_type}.json"))
    }

    pub fn matrix_path(&self, shape_type: ShapeType, format: ExportFormat) -> PathBuf {
        self.root
            .join("matrices")
            .join(format!("{shape_type}.{}", format.extension()))
    }

    /// Parse the URDF, build every link's shapes and write `model/` and `shapes/`.
    /// Stale shape files from earlier runs are removed.
    pub fn preprocess(
        &self,
        urdf_path: &Path,
        mesh_root: &Path,
        params: &DecompositionParams,
    ) -> Result<(RobotModel, Vec<LinkShapes>), AssetError> {
        let urdf = read(urdf_path)?;
        let model = parse_urdf(&urdf, mesh_root)?;
        let shapes = build_shapes(&model, params)?;

        write(&self.urdf_path(), &urdf)?;
        write(&self.model_path(), &to_json(&model))?;
        let dir = self.shapes_dir();
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        for link_shapes in &shapes {
            let name = &model.links[link_shapes.link_index].name;
            let path = dir.join(format!("{}.json", file_stem(name)));
            write(&path, &to_json(link_shapes))?;
        }
        Ok((model, shapes))
    }

    pub fn load_model(&self) -> Result<RobotModel, AssetError> {
        parse_json(&self.model_path())
    }

    /// All shape files, sorted by link index.
    pub fn load_shapes(&self) -> Result<Vec<LinkShapes>, AssetError> {
        let dir = self.shapes_dir();
        if !dir.exists() {
            return Err(AssetError::Missing(dir));
        }
        let mut shapes = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                shapes.push(parse_json::<LinkShapes>(&path)?);
            }
        }
        shapes.sort_by_key(|s| s.link_index);
        Ok(shapes)
    }

    pub fn write_stats(&self, stats: &StatsTable) -> Result<PathBuf, AssetError> {
        let path = self.stats_path(stats.shape_type);
        write(&path, &stats.to_json())?;
        Ok(path)
    }

    pub fn load_stats(&self, shape_type: ShapeType) -> Result<StatsTable, AssetError> {
        let path = self.stats_path(shape_type);
        let stats: StatsTable = parse_json(&path)?;
        if stats.shape_type != shape_type {
            return Err(AssetError::WrongShapeType {
                path,
                found: stats.shape_type,
                expected: shape_type,
            });
        }
        Ok(stats)
    }

    /// Write the matrix in each requested format; returns the written paths.
    pub fn write_matrix(
        &self,
        matrix: &SkipMatrix,
        formats: &[ExportFormat],
    ) -> Result<Vec<PathBuf>, AssetError> {
        let mut written = Vec::new();
        for &format in formats {
            let path = self.matrix_path(matrix.shape_type, format);
            write(&path, &matrix.export(format))?;
            written.push(path);
        }
        Ok(written)
    }

    /// Read the JSON matrix of `shape_type`.
    pub fn load_matrix(&self, shape_type: ShapeType) -> Result<SkipMatrix, AssetError> {
        let path = self.matrix_path(shape_type, ExportFormat::Json);
        let matrix = SkipMatrix::import(&read(&path)?, ExportFormat::Json)?;
        if matrix.shape_type != shape_type {
            return Err(AssetError::WrongShapeType {
                path,
                found: matrix.shape_type,
                expected: shape_type,
            });
        }
        Ok(matrix)
    }

    pub fn has_all_matrices(&self) -> bool {
        ShapeType::ALL
            .iter()
            .all(|&t| self.matrix_path(t, ExportFormat::Json).exists())
    }

    pub fn has_all_stats(&self) -> bool {
        ShapeType::ALL.iter().all(|&t| self.stats_path(t).exists())
    }
}
