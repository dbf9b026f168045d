//! State of one refinement session and the operations behind each endpoint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use skipset::assets::{AssetError, RobotAssets};
use skipset::geometry::{LinkShapes, Obb, Point, ShapeType, Sphere, TriangleMesh};
use skipset::matrix::{BulkMode, ExportFormat, IndexEntry, MatrixError, SkipMatrix, SkipReason};
use skipset::model::{ConfigSampler, Configuration, RigidTransform, RobotModel};
use skipset::proximity::{
    distance, local_shapes, pose_with_transforms, query_all_pairs, shape_layout, PairDistance,
    ProximityError, QueryMode, QueryOutcome, ShapeGeometry, ShapeSlot,
};
use skipset::sampling::StatsTable;

use crate::ServiceError;

const SPHERE_RINGS: usize = 12;
const SPHERE_SEGMENTS: usize = 24;

pub struct Session {
    assets: RobotAssets,
    model: RobotModel,
    shapes: Vec<LinkShapes>,
    stats: BTreeMap<ShapeType, StatsTable>,
    matrices: BTreeMap<ShapeType, SkipMatrix>,
    layouts: BTreeMap<ShapeType, Vec<ShapeSlot>>,
    current_config: Configuration,
    active_shape_type: ShapeType,
    selected_pair: Option<(usize, usize)>,
    dirty: bool,
}

#[derive(Serialize)]
pub struct RobotSummary {
    pub name: String,
    pub robot_dir: PathBuf,
    pub dof: usize,
    pub links: Vec<LinkSummary>,
    pub joints: Vec<JointSummary>,
    pub active_shape_type: ShapeType,
    pub current_config: Vec<f64>,
    pub selected_pair: Option<(usize, usize)>,
    pub dirty: bool,
}

#[derive(Serialize)]
pub struct LinkSummary {
    pub index: usize,
    pub name: String,
    pub has_geometry: bool,
}

#[derive(Serialize)]
pub struct JointSummary {
    pub name: String,
    #[serde(rename = "type")]
    pub joint_type: &'static str,
    pub parent: String,
    pub child: String,
    /// Position in the configuration vector; absent for fixed joints.
    pub config_index: Option<usize>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Serialize)]
pub struct ShapesResponse {
    pub shape_type: ShapeType,
    pub shapes: Vec<RenderShape>,
    pub shape_index_map: Vec<IndexEntry>,
}

#[derive(Serialize)]
pub struct RenderShape {
    pub index: usize,
    pub link_index: usize,
    pub link_name: String,
    pub part: Option<usize>,
    /// `sphere`, `obb` or `hull`.
    pub kind: &'static str,
    /// Link-local triangle mesh.
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere: Option<Sphere>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obb: Option<Obb>,
}

#[derive(Serialize)]
pub struct LinkPose {
    pub link: String,
    pub translation: [f64; 3],
    /// Unit quaternion `[x, y, z, w]`.
    pub rotation: [f64; 4],
}

#[derive(Serialize)]
pub struct PairsResponse {
    pub shape_type: ShapeType,
    pub config: Vec<f64>,
    pub link_poses: Vec<LinkPose>,
    /// Every pair evaluated under the active matrix, ascending by distance.
    pub pairs: Vec<PairDistance>,
    /// Pairs the matrix skips, with their current distance, ascending.
    pub skipped_pairs: Vec<PairDistance>,
}

#[derive(Serialize)]
pub struct Selection {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub intersecting: bool,
    pub point_a: Point,
    pub point_b: Point,
    pub skipped: bool,
}

#[derive(Serialize)]
pub struct SkipSummary {
    pub shape_type: ShapeType,
    pub counts: BTreeMap<SkipReason, usize>,
    pub total_skipped: usize,
    pub num_pairs: usize,
    pub dirty: bool,
}

#[derive(Serialize)]
pub struct ExportResponse {
    pub written: Vec<PathBuf>,
    pub dirty: bool,
}

fn pose_summary(model: &RobotModel, poses: &[RigidTransform]) -> Vec<LinkPose> {
    model
        .links
        .iter()
        .zip(poses)
        .map(|(link, pose)| {
            let t = pose.translation.vector;
            let q = pose.rotation.coords;
            LinkPose {
                link: link.name.clone(),
                translation: [t.x, t.y, t.z],
                rotation: [q.x, q.y, q.z, q.w],
            }
        })
        .collect()
}

fn obb_mesh(obb: &Obb) -> TriangleMesh {
    let half = Point::from(obb.half_extents);
    let mut mesh = TriangleMesh::cuboid(Point::from(-half.coords), half);
    for v in &mut mesh.vertices {
        *v = obb.center + obb.axes * v.coords;
    }
    if obb.axes.determinant() < 0.0 {
        for t in &mut mesh.triangles {
            t.swap(1, 2);
        }
    }
    mesh
}

impl Session {
    /// Open a robot asset directory that already holds shapes, stats and matrices.
    pub fn load(robot_dir: &Path) -> Result<Session, ServiceError> {
        let assets = RobotAssets::new(robot_dir);
        let model = assets.load_model()?;
        let shapes = assets.load_shapes()?;
        let mut stats = BTreeMap::new();
        let mut matrices = BTreeMap::new();
        let mut layouts = BTreeMap::new();
        for t in ShapeType::ALL {
            let layout = shape_layout(&model, &shapes, t)?;
            let table = assets.load_stats(t)?;
            let matrix = assets.load_matrix(t)?;
            if matrix.num_shapes != layout.len() || table.num_shapes != layout.len() {
                return Err(ServiceError::Asset(AssetError::Matrix(MatrixError::IndexMap(
                    format!("{t} files do not match the current shapes; re-run infer"),
                ))));
            }
            stats.insert(t, table);
            matrices.insert(t, matrix);
            layouts.insert(t, layout);
        }
        Ok(Session {
            current_config: model.zero_configuration(),
            assets,
            model,
            shapes,
            stats,
            matrices,
            layouts,
            active_shape_type: ShapeType::HullLink,
            selected_pair: None,
            dirty: false,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn matrix(&self, shape_type: ShapeType) -> &SkipMatrix {
        &self.matrices[&shape_type]
    }

    pub fn active_shape_type(&self) -> ShapeType {
        self.active_shape_type
    }

    pub fn current_config(&self) -> &Configuration {
        &self.current_config
    }

    pub fn summary(&self) -> RobotSummary {
        let model = &self.model;
        let config_index = |ji: usize| model.active_joints.iter().position(|&a| a == ji);
        RobotSummary {
            name: model.name.clone(),
            robot_dir: self.assets.root().to_path_buf(),
            dof: model.dof,
            links: model
                .links
                .iter()
                .enumerate()
                .map(|(index, l)| LinkSummary {
                    index,
                    name: l.name.clone(),
                    has_geometry: l.has_geometry(),
                })
                .collect(),
            joints: model
                .joints
                .iter()
                .enumerate()
                .map(|(ji, j)| {
                    let range = config_index(ji).map(|_| j.sampling_range());
                    JointSummary {
                        name: j.name.clone(),
                        joint_type: j.joint_type.as_str(),
                        parent: model.links[j.parent].name.clone(),
                        child: model.links[j.child].name.clone(),
                        config_index: config_index(ji),
                        lower: range.map(|r| r.0),
                        upper: range.map(|r| r.1),
                    }
                })
                .collect(),
            active_shape_type: self.active_shape_type,
            current_config: self.current_config.values().to_vec(),
            selected_pair: self.selected_pair,
            dirty: self.dirty,
        }
    }

    pub fn shapes(&self, shape_type: ShapeType) -> Result<ShapesResponse, ServiceError> {
        let layout = &self.layouts[&shape_type];
        let local = local_shapes(&self.shapes, shape_type)?;
        let shapes = layout
            .iter()
            .zip(local)
            .map(|(slot, (geometry, _, _))| {
                let (kind, mesh, sphere, obb) = match geometry {
                    ShapeGeometry::Sphere(s) => (
                        "sphere",
                        TriangleMesh::uv_sphere(s.center, s.radius, SPHERE_RINGS, SPHERE_SEGMENTS),
                        Some(s),
                        None,
                    ),
                    ShapeGeometry::Obb(b) => ("obb", obb_mesh(&b), None, Some(b)),
                    ShapeGeometry::Polytope(p) => (
                        "hull",
                        TriangleMesh {
                            vertices: p.vertices.clone(),
                            triangles: p.triangles().collect(),
                        },
                        None,
                        None,
                    ),
                };
                RenderShape {
                    index: slot.index,
                    link_index: slot.link_index,
                    link_name: slot.link_name.clone(),
                    part: slot.part,
                    kind,
                    vertices: mesh.vertices,
                    triangles: mesh.triangles,
                    sphere,
                    obb,
                }
            })
            .collect();
        Ok(ShapesResponse {
            shape_type,
            shapes,
            shape_index_map: self.matrices[&shape_type].shape_index_map.clone(),
        })
    }

    /// Set the configuration, or draw one from `sampler`.
    pub fn set_config(
        &mut self,
        values: Option<Vec<f64>>,
        sampler: &mut ConfigSampler,
    ) -> Result<PairsResponse, ServiceError> {
        let config = match values {
            Some(v) => {
                if v.len() != self.model.dof {
                    return Err(ServiceError::BadRequest(format!(
                        "configuration has {} values but the robot has {} degrees of freedom",
                        v.len(),
                        self.model.dof
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ServiceError::BadRequest("joint values must be finite".into()));
                }
                Configuration::new(v)
            }
            None => sampler.sample(&self.model),
        };
        self.current_config = config;
        self.pairs()
    }

    pub fn set_shape_type(&mut self, shape_type: ShapeType) -> Result<PairsResponse, ServiceError> {
        if shape_type != self.active_shape_type {
            self.active_shape_type = shape_type;
            self.selected_pair = None;
        }
        self.pairs()
    }

    /// The pair list of the active type at the current configuration.
    pub fn pairs(&self) -> Result<PairsResponse, ServiceError> {
        let t = self.active_shape_type;
        let poses = self.model.forward_kinematics(&self.current_config)?;
        let set = pose_with_transforms(&self.shapes, t, &poses)?;
        let matrix = &self.matrices[&t];
        let stats = &self.stats[&t];
        let QueryOutcome::Proximity(pairs) =
            query_all_pairs(&set, matrix, Some(stats), QueryMode::Proximity)?
        else {
            unreachable!("proximity mode yields a pair list")
        };
        let mut skipped_pairs: Vec<PairDistance> = matrix
            .skips
            .iter()
            .map(|s| {
                let r = distance(&set.shapes[s.i], &set.shapes[s.j]);
                PairDistance {
                    i: s.i,
                    j: s.j,
                    d: r.distance,
                    d_normalized: stats
                        .get(s.i, s.j)
                        .filter(|p| p.d_mean > 0.0)
                        .map(|p| r.distance / p.d_mean),
                    skipped: true,
                    closest_segment: (r.point_a, r.point_b),
                }
            })
            .collect();
        skipped_pairs.sort_by(|a, b| a.d.total_cmp(&b.d).then((a.i, a.j).cmp(&(b.i, b.j))));
        Ok(PairsResponse {
            shape_type: t,
            config: self.current_config.values().to_vec(),
            link_poses: pose_summary(&self.model, &poses),
            pairs,
            skipped_pairs,
        })
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(usize, usize), ServiceError> {
        let (i, j) = self.matrices[&self.active_shape_type].check_pair(i, j)?;
        Ok((i, j))
    }

    pub fn select(&mut self, i: usize, j: usize) -> Result<Selection, ServiceError> {
        let (i, j) = self.check_pair(i, j)?;
        let t = self.active_shape_type;
        let poses = self.model.forward_kinematics(&self.current_config)?;
        let set = pose_with_transforms(&self.shapes, t, &poses)?;
        let r = distance(&set.shapes[i], &set.shapes[j]);
        self.selected_pair = Some((i, j));
        Ok(Selection {
            i,
            j,
            d: r.distance,
            intersecting: r.intersecting,
            point_a: r.point_a,
            point_b: r.point_b,
            skipped: self.matrices[&t].is_skipped(i, j),
        })
    }

    pub fn skip_summary(&self) -> SkipSummary {
        let t = self.active_shape_type;
        let matrix = &self.matrices[&t];
        let layout = &self.layouts[&t];
        let num_pairs = layout
            .iter()
            .enumerate()
            .map(|(i, a)| {
                layout[i + 1..]
                    .iter()
                    .filter(|b| b.link_index != a.link_index)
                    .count()
            })
            .sum();
        SkipSummary {
            shape_type: t,
            counts: matrix.counts_by_reason(),
            total_skipped: matrix.skips.len(),
            num_pairs,
            dirty: self.dirty,
        }
    }

    fn replace_matrix(&mut self, updated: SkipMatrix) {
        let t = self.active_shape_type;
        if updated != self.matrices[&t] {
            self.matrices.insert(t, updated);
            self.dirty = true;
        }
    }

    pub fn set_skip(&mut self, i: usize, j: usize, on: bool) -> Result<SkipSummary, ServiceError> {
        let (i, j) = self.check_pair(i, j)?;
        let updated = self.matrices[&self.active_shape_type].set_skip(i, j, on)?;
        self.replace_matrix(updated);
        Ok(self.skip_summary())
    }

    /// Skip every currently evaluated pair whose raw or normalized distance is below
    /// `threshold`.
    pub fn bulk_skip(&mut self, mode: BulkMode, threshold: f64) -> Result<SkipSummary, ServiceError> {
        let live = self.pairs()?.pairs;
        let updated =
            self.matrices[&self.active_shape_type].apply_bulk_rule(&live, mode, threshold)?;
        self.replace_matrix(updated);
        Ok(self.skip_summary())
    }

    /// Write all six matrices in `formats`. The dirty flag clears once JSON, the source
    /// of truth, has been written.
    pub fn export(&mut self, formats: &[ExportFormat]) -> Result<ExportResponse, ServiceError> {
        let mut written = Vec::new();
        for matrix in self.matrices.values() {
            written.extend(self.assets.write_matrix(matrix, formats)?);
        }
        if formats.contains(&ExportFormat::Json) {
            self.dirty = false;
        }
        Ok(ExportResponse {
            written,
            dirty: self.dirty,
        })
    }
}

impl From<ProximityError> for ServiceError {
    fn from(e: ProximityError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}
