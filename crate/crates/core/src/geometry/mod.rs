//! Link geometry: mesh loading and the six shape representations built per link.

mod decomposition;
mod hull;
mod mesh;
mod obb;
mod sphere;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decomposition::{concavity, convex_decomposition, DecompositionParams};
pub use hull::convex_hull;
pub use mesh::{load_mesh, LoadedMesh, MeshFormat};
pub use obb::oriented_bounding_box;
pub use sphere::bounding_sphere;

pub type Point = Point3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("empty point set")]
    EmptyInput,
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("failed to parse {format} mesh: {message}")]
    Parse { format: MeshFormat, message: String },
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
}

/// Area below which a triangle is treated as degenerate (m^2).
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Build a mesh, dropping degenerate triangles. Returns the mesh and the number dropped.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<(Self, usize), GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.into_iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index,
                    count,
                });
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            if 0.5 * (b - a).cross(&(c - a)).norm() <= DEGENERATE_AREA {
                dropped += 1;
            } else {
                kept.push(tri);
            }
        }
        Ok((
            TriangleMesh {
                vertices,
                triangles: kept,
            },
            dropped,
        ))
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    pub fn transformed(&self, transform: &nalgebra::Isometry3<f64>) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| transform * p).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned box `[min, max]` as a closed 12-triangle mesh.
    pub fn cuboid(min: Point, max: Point) -> TriangleMesh {
        let corner = |i: usize| {
            Point::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        TriangleMesh {
            vertices: (0..8).map(corner).collect(),
            triangles: CUBOID_TRIANGLES.to_vec(),
        }
    }

    /// UV-tessellated sphere.
    pub fn uv_sphere(center: Point, radius: f64, rings: usize, segments: usize) -> TriangleMesh {
        let mut vertices = vec![center + Vector3::z() * radius];
        for r in 1..rings {
            let theta = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                vertices.push(
                    center
                        + radius
                            * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
                );
            }
        }
        vertices.push(center - Vector3::z() * radius);
        let south = vertices.len() - 1;
        let ring = |r: usize, s: usize| 1 + r * segments + s % segments;
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, ring(0, s), ring(0, s + 1)]);
            triangles.push([south, ring(rings - 2, s + 1), ring(rings - 2, s)]);
        }
        for r in 0..rings.saturating_sub(2) {
            for s in 0..segments {
                triangles.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
                triangles.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
            }
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Closed cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, length: f64, segments: usize) -> TriangleMesh {
        let h = length / 2.0;
        let mut vertices = vec![Point::new(0.0, 0.0, -h), Point::new(0.0, 0.0, h)];
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            let (x, y) = (radius * phi.cos(), radius * phi.sin());
            vertices.push(Point::new(x, y, -h));
            vertices.push(Point::new(x, y, h));
        }
        let bottom = |s: usize| 2 + 2 * (s % segments);
        let top = |s: usize| 3 + 2 * (s % segments);
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, bottom(s + 1), bottom(s)]);
            triangles.push([1, top(s), top(s + 1)]);
            triangles.push([bottom(s), bottom(s + 1), top(s + 1)]);
            triangles.push([bottom(s), top(s + 1), top(s)]);
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }
}

/// Outward-wound triangles over the corner numbering `x + 2y + 4z`.
pub(crate) const CUBOID_TRIANGLES: [[usize; 3]; 12] = [
    [0, 2, 1],
    [1, 2, 3],
    [4, 5, 6],
    [5, 7, 6],
    [0, 1, 4],
    [1, 5, 4],
    [2, 6, 3],
    [3, 6, 7],
    [0, 4, 2],
    [2, 4, 6],
    [1, 3, 5],
    [3, 7, 5],
];

/// Convex polytope with outward-oriented triangular faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    pub vertices: Vec<Point>,
    pub faces: Vec<Vec<usize>>,
}

impl ConvexPolytope {
    pub fn support(&self, direction: &Vector3<f64>) -> Point {
        let mut best = self.vertices[0];
        let mut best_dot = best.coords.dot(direction);
        for v in &self.vertices[1..] {
            let d = v.coords.dot(direction);
            if d > best_dot {
                best_dot = d;
                best = *v;
            }
        }
        best
    }

    /// Outward unit normal and offset of every face (`n . x <= offset` inside).
    pub fn planes(&self) -> Vec<(Vector3<f64>, f64)> {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0]];
                let normal = (1..f.len() - 1)
                    .map(|k| (self.vertices[f[k]] - a).cross(&(self.vertices[f[k + 1]] - a)))
                    .fold(Vector3::zeros(), |acc, n| acc + n)
                    .normalize();
                (normal, normal.dot(&a.coords))
            })
            .collect()
    }

    /// Largest signed distance of `p` above any face plane (nonpositive inside).
    pub fn signed_distance_bound(&self, p: &Point) -> f64 {
        self.planes()
            .iter()
            .map(|(n, d)| n.dot(&p.coords) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn centroid(&self) -> Point {
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, v| acc + v.coords);
        Point::from(sum / self.vertices.len() as f64)
    }

    pub fn volume(&self) -> f64 {
        let origin = self.vertices[0];
        self.triangles()
            .map(|[a, b, c]| {
                (self.vertices[a] - origin)
                    .cross(&(self.vertices[b] - origin))
                    .dot(&(self.vertices[c] - origin))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Fan triangulation of every face.
    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.faces
            .iter()
            .flat_map(|f| (1..f.len() - 1).map(move |k| [f[0], f[k], f[k + 1]]))
    }

    /// Radius of the smallest origin-centered ball around the centroid, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        let c = self.centroid();
        self.vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn contains(&self, p: &Point, tolerance: f64) -> bool {
        (p - self.center).norm() <= self.radius + tolerance
    }
}

/// Oriented box; the columns of `axes` are its local axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Point,
    pub axes: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl Obb {
    pub fn support(&self, direction: &Vector3<f64>) -> Point {
        let mut p = self.center;
        for k in 0..3 {
            let axis = self.axes.column(k);
            let sign = if axis.dot(direction) >= 0.0 { 1.0 } else { -1.0 };
            p += axis * (sign * self.half_extents[k]);
        }
        p
    }

    pub fn contains(&self, p: &Point, tolerance: f64) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|k| local[k].abs() <= self.half_extents[k] + tolerance)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Corners numbered `x + 2y + 4z` (bit set = positive side).
    pub fn corners(&self) -> [Point; 8] {
        std::array::from_fn(|i| {
            let mut p = self.center;
            for k in 0..3 {
                let sign = if i & (1 << k) == 0 { -1.0 } else { 1.0 };
                p += self.axes.column(k) * (sign * self.half_extents[k]);
            }
            p
        })
    }
}

/// The six shape representations. String names are stable: they appear in files and the API.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeType {
    SphereLink,
    ObbLink,
    HullLink,
    SphereDecomp,
    ObbDecomp,
    HullDecomp,
}

impl ShapeType {
    pub const ALL: [ShapeType; 6] = [
        ShapeType::SphereLink,
        ShapeType::ObbLink,
        ShapeType::HullLink,
        ShapeType::SphereDecomp,
        ShapeType::ObbDecomp,
        ShapeType::HullDecomp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeType::SphereLink => "sphere_link",
            ShapeType::ObbLink => "obb_link",
            ShapeType::HullLink => "hull_link",
            ShapeType::SphereDecomp => "sphere_decomp",
            ShapeType::ObbDecomp => "obb_decomp",
            ShapeType::HullDecomp => "hull_decomp",
        }
    }

    pub fn is_decomposition(self) -> bool {
        matches!(
            self,
            ShapeType::SphereDecomp | ShapeType::ObbDecomp | ShapeType::HullDecomp
        )
    }
}

impl fmt::Display for ShapeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown shape type `{0}`")]
pub struct UnknownShapeType(pub String);

impl FromStr for ShapeType {
    type Err = UnknownShapeType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownShapeType(s.to_string()))
    }
}

/// All six representations of one link, in the link frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkShapes {
    pub link_index: usize,
    pub hull: ConvexPolytope,
    pub decomposition: Vec<ConvexPolytope>,
    pub sphere_link: Sphere,
    pub obb_link: Obb,
    pub spheres_decomp: Vec<Sphere>,
    pub obbs_decomp: Vec<Obb>,
}

impl LinkShapes {
    /// Number of shapes this link contributes to `shape_type`'s index space.
    pub fn count(&self, shape_type: ShapeType) -> usize {
        if shape_type.is_decomposition() {
            self.decomposition.len()
        } else {
            1
        }
    }
}

/// Build all six representations for one link mesh.
pub fn build_link_representations(
    mesh: &TriangleMesh,
    link_index: usize,
    params: &DecompositionParams,
) -> Result<LinkShapes, GeometryError> {
    if mesh.vertices.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let hull = convex_hull(&mesh.vertices)?;
    let sphere_link = bounding_sphere(&hull.vertices)?;
    let obb_link = oriented_bounding_box(&mesh.vertices)?;
    let decomposition = convex_decomposition(mesh, params);

    let (spheres_decomp, obbs_decomp) = if decomposition.len() == 1 {
        (vec![sphere_link], vec![obb_link])
    } else {
        let spheres = decomposition
            .iter()
            .map(|part| bounding_sphere(&part.vertices))
            .collect::<Result<Vec<_>, _>>()?;
        let obbs = decomposition
            .iter()
            .map(|part| oriented_bounding_box(&part.vertices))
            .collect::<Result<Vec<_>, _>>()?;
        (spheres, obbs)
    };

    Ok(LinkShapes {
        link_index,
        hull,
        decomposition,
        sphere_link,
        obb_link,
        spheres_decomp,
        obbs_decomp,
    })
}
