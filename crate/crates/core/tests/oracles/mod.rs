//! Slow reference answers for geometry and distance queries. Shared with the CLI
//! acceptance suite, which includes this file by path.
#![allow(dead_code)]

use nalgebra::{Matrix3, Point3, Vector3};

pub type P = Point3<f64>;

/// Minimal enclosing sphere by trying every support set of 2, 3 or 4 points.
pub fn brute_force_sphere(points: &[P]) -> (P, f64) {
    let n = points.len();
    if n == 1 {
        return (points[0], 0.0);
    }
    let mut best: Option<(P, f64)> = None;
    let mut consider = |candidate: Option<(P, f64)>| {
        let Some((c, r)) = candidate else { return };
        if best.is_some_and(|(_, b)| b <= r) {
            return;
        }
        if points.iter().all(|p| (p - c).norm() <= r * (1.0 + 1e-12) + 1e-15) {
            best = Some((c, r));
        }
    };
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (points[a], points[b]);
            consider(Some((nalgebra::center(&pa, &pb), 0.5 * (pa - pb).norm())));
            for c in b + 1..n {
                consider(circumcircle(pa, pb, points[c]));
                for d in c + 1..n {
                    consider(circumsphere(pa, pb, points[c], points[d]));
                }
            }
        }
    }
    best.expect("the diametral sphere of the farthest pair is always feasible")
}

fn circumcircle(a: P, b: P, c: P) -> Option<(P, f64)> {
    let (u, v) = (b - a, c - a);
    let w = u.cross(&v);
    let denom = 2.0 * w.norm_squared();
    if denom < 1e-18 {
        return None;
    }
    let offset = (v.norm_squared() * w.cross(&u) + u.norm_squared() * v.cross(&w)) / denom;
    Some((a + offset, offset.norm()))
}

fn circumsphere(a: P, b: P, c: P, d: P) -> Option<(P, f64)> {
    let m = Matrix3::from_rows(&[
        (b - a).transpose(),
        (c - a).transpose(),
        (d - a).transpose(),
    ]);
    if m.determinant().abs() < 1e-12 {
        return None;
    }
    let rhs = 0.5
        * Vector3::new(
            (b - a).norm_squared(),
            (c - a).norm_squared(),
            (d - a).norm_squared(),
        );
    let offset = m.lu().solve(&rhs)?;
    Some((a + offset, offset.norm()))
}

/// A solid in world coordinates.
#[derive(Clone, Debug)]
pub enum Solid {
    Ball { center: P, radius: f64 },
    Mesh(ConvexMesh),
}

/// Closed convex surface given as triangles; planes are oriented away from the centroid.
#[derive(Clone, Debug)]
pub struct ConvexMesh {
    pub vertices: Vec<P>,
    pub triangles: Vec<[usize; 3]>,
    planes: Vec<(Vector3<f64>, f64)>,
    edges: Vec<(usize, usize)>,
}

impl ConvexMesh {
    pub fn new(vertices: Vec<P>, triangles: Vec<[usize; 3]>) -> Self {
        let centroid = P::from(
            vertices.iter().fold(Vector3::zeros(), |acc, v| acc + v.coords) / vertices.len() as f64,
        );
        let mut planes = Vec::new();
        let mut edges = Vec::new();
        for t in &triangles {
            let [a, b, c] = t.map(|k| vertices[k]);
            let n = (b - a).cross(&(c - a));
            if n.norm() > 1e-14 {
                let mut n = n.normalize();
                if n.dot(&(a - centroid)) < 0.0 {
                    n = -n;
                }
                planes.push((n, n.dot(&a.coords)));
            }
            for (x, y) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.push((x.min(y), x.max(y)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        ConvexMesh {
            vertices,
            triangles,
            planes,
            edges,
        }
    }

    /// The eight corners and twelve triangles of a box.
    pub fn cuboid(center: P, axes: Matrix3<f64>, half: Vector3<f64>) -> Self {
        let vertices = (0..8)
            .map(|i| {
                let mut p = center;
                for k in 0..3 {
                    let s = if i & (1 << k) == 0 { -1.0 } else { 1.0 };
                    p += axes.column(k) * (s * half[k]);
                }
                p
            })
            .collect();
        let quads = [
            [0, 2, 6, 4],
            [1, 5, 7, 3],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 1, 3, 2],
            [4, 6, 7, 5],
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        ConvexMesh::new(vertices, triangles)
    }

    pub fn contains(&self, p: &P, tolerance: f64) -> bool {
        self.planes
            .iter()
            .all(|(n, d)| n.dot(&p.coords) - d <= tolerance)
    }

    fn corners(&self, t: &[usize; 3]) -> [P; 3] {
        t.map(|k| self.vertices[k])
    }

    /// Distance from `p` to the solid (0 inside).
    pub fn point_distance(&self, p: &P) -> f64 {
        if self.contains(p, 0.0) {
            return 0.0;
        }
        self.triangles
            .iter()
            .map(|t| point_triangle(p, &self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Point to triangle: foot of the perpendicular when it lands inside the triangle,
/// otherwise the nearest of the three edges.
pub fn point_triangle(p: &P, [a, b, c]: &[P; 3]) -> f64 {
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm_squared();
    if area2 > 1e-30 {
        let foot = p - n * ((p - a).dot(&n) / area2);
        let wa = (b - foot).cross(&(c - foot)).dot(&n);
        let wb = (c - foot).cross(&(a - foot)).dot(&n);
        let wc = (a - foot).cross(&(b - foot)).dot(&n);
        if wa >= 0.0 && wb >= 0.0 && wc >= 0.0 {
            return (p - foot).norm();
        }
    }
    point_segment(p, a, b)
        .min(point_segment(p, b, c))
        .min(point_segment(p, c, a))
}

pub fn point_segment(p: &P, a: &P, b: &P) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Segment to segment: the interior stationary point when it exists, otherwise the
/// best endpoint-to-segment distance.
pub fn segment_segment(p1: &P, q1: &P, p2: &P, q2: &P) -> f64 {
    let (d1, d2, r) = (q1 - p1, q2 - p2, p1 - p2);
    let (a, e, b) = (d1.norm_squared(), d2.norm_squared(), d1.dot(&d2));
    let (c, f) = (d1.dot(&r), d2.dot(&r));
    let denom = a * e - b * b;
    let mut best = point_segment(p1, p2, q2)
        .min(point_segment(q1, p2, q2))
        .min(point_segment(p2, p1, q1))
        .min(point_segment(q2, p1, q1));
    if denom > 1e-14 * a * e {
        let s = (b * f - c * e) / denom;
        let t = (a * f - b * c) / denom;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            best = best.min(((p1 + d1 * s) - (p2 + d2 * t)).norm());
        }
    }
    best
}

/// Does the closed segment `pq` touch the triangle?
fn segment_hits_triangle(p: &P, q: &P, [a, b, c]: &[P; 3]) -> bool {
    let dir = q - p;
    let (e1, e2) = (b - a, c - a);
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return false;
    }
    let s = p - a;
    let u = s.dot(&h) / det;
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) / det;
    let t = e2.dot(&qv) / det;
    u >= 0.0 && v >= 0.0 && u + v <= 1.0 && (0.0..=1.0).contains(&t)
}

fn meshes_touch(a: &ConvexMesh, b: &ConvexMesh) -> bool {
    a.vertices.iter().any(|v| b.contains(v, 0.0))
        || b.vertices.iter().any(|v| a.contains(v, 0.0))
        || a.edges.iter().any(|&(x, y)| {
            b.triangles
                .iter()
                .any(|t| segment_hits_triangle(&a.vertices[x], &a.vertices[y], &b.corners(t)))
        })
        || b.edges.iter().any(|&(x, y)| {
            a.triangles
                .iter()
                .any(|t| segment_hits_triangle(&b.vertices[x], &b.vertices[y], &a.corners(t)))
        })
}

/// Exact distance between two convex meshes: 0 when they touch, otherwise the minimum
/// over vertex-triangle and edge-edge feature pairs.
pub fn mesh_distance(a: &ConvexMesh, b: &ConvexMesh) -> f64 {
    if meshes_touch(a, b) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (x, y) in [(a, b), (b, a)] {
        for v in &x.vertices {
            for t in &y.triangles {
                best = best.min(point_triangle(v, &y.corners(t)));
            }
        }
    }
    for &(i, j) in &a.edges {
        for &(k, l) in &b.edges {
            best = best.min(segment_segment(
                &a.vertices[i],
                &a.vertices[j],
                &b.vertices[k],
                &b.vertices[l],
            ));
        }
    }
    best
}

pub fn solid_distance(a: &Solid, b: &Solid) -> f64 {
    match (a, b) {
        (Solid::Ball { center: ca, radius: ra }, Solid::Ball { center: cb, radius: rb }) => {
            ((ca - cb).norm() - ra - rb).max(0.0)
        }
        (Solid::Ball { center, radius }, Solid::Mesh(m))
        | (Solid::Mesh(m), Solid::Ball { center, radius }) => {
            (m.point_distance(center) - radius).max(0.0)
        }
        (Solid::Mesh(x), Solid::Mesh(y)) => mesh_distance(x, y),
    }
}

/// Distance between axis-aligned boxes given by centers and half extents.
pub fn aabb_distance(ca: &P, ha: &Vector3<f64>, cb: &P, hb: &Vector3<f64>) -> f64 {
    let gap = (cb - ca).abs() - ha - hb;
    gap.map(|g| g.max(0.0)).norm()
}

/// Distance from a ball to an axis-aligned box.
pub fn ball_aabb_distance(center: &P, radius: f64, cb: &P, hb: &Vector3<f64>) -> f64 {
    let outside = ((center - cb).abs() - hb).map(|g| g.max(0.0)).norm();
    (outside - radius).max(0.0)
}

/// SplitMix64, so test inputs do not depend on the library's generator.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn point(&mut self, half_width: f64) -> P {
        P::new(
            self.uniform(-half_width, half_width),
            self.uniform(-half_width, half_width),
            self.uniform(-half_width, half_width),
        )
    }

    pub fn vector(&mut self, half_width: f64) -> Vector3<f64> {
        self.point(half_width).coords
    }

    pub fn rotation(&mut self) -> nalgebra::UnitQuaternion<f64> {
        let q = nalgebra::Quaternion::new(
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
        );
        nalgebra::UnitQuaternion::from_quaternion(q)
    }
}

use skipset::geometry::{convex_hull, ConvexPolytope, Obb, Sphere};
use skipset::model::RigidTransform;
use skipset::proximity::{PosedShape, ShapeGeometry};

/// A random test body: library geometry plus the matching oracle solid.
#[derive(Clone, Debug)]
pub enum Body {
    Ball(Sphere),
    /// Axis-aligned box, so an analytic answer exists.
    Aabb(Obb),
    /// Box carried by a rigid pose.
    Box(Obb, RigidTransform),
    Hull(ConvexPolytope, RigidTransform),
}

impl Body {
    /// A body of kind `kind % 4` centered uniformly in the cube of half width `spread`.
    pub fn random(rng: &mut TestRng, kind: usize, spread: f64) -> Body {
        let center = rng.point(spread);
        let size = rng.uniform(0.05, 0.5);
        match kind % 4 {
            0 => Body::Ball(Sphere { center, radius: size }),
            1 => Body::Aabb(Obb {
                center,
                axes: Matrix3::identity(),
                half_extents: Vector3::new(
                    rng.uniform(0.02, size),
                    rng.uniform(0.02, size),
                    rng.uniform(0.02, size),
                ),
            }),
            2 => Body::Box(
                Obb {
                    center: rng.point(0.05),
                    axes: Matrix3::identity(),
                    half_extents: Vector3::new(
                        rng.uniform(0.02, size),
                        rng.uniform(0.02, size),
                        rng.uniform(0.02, size),
                    ),
                },
                RigidTransform::from_parts(center.coords.into(), rng.rotation()),
            ),
            _ => {
                let count = 6 + (rng.next_u64() % 14) as usize;
                let points: Vec<P> = (0..count).map(|_| rng.point(size)).collect();
                let hull = convex_hull(&points).expect("random points span a volume");
                Body::Hull(hull, RigidTransform::from_parts(center.coords.into(), rng.rotation()))
            }
        }
    }

    /// Pose `self`, moved rigidly by `shift`.
    pub fn posed(&self, shift: &RigidTransform) -> PosedShape<'_> {
        let (geometry, pose) = match self {
            Body::Ball(s) => (ShapeGeometry::Sphere(*s), RigidTransform::identity()),
            Body::Aabb(b) => (ShapeGeometry::Obb(*b), RigidTransform::identity()),
            Body::Box(b, pose) => (ShapeGeometry::Obb(*b), *pose),
            Body::Hull(h, pose) => (ShapeGeometry::Polytope(h), *pose),
        };
        PosedShape::new(geometry, shift * pose, 0, None)
    }

    pub fn solid(&self) -> Solid {
        match self {
            Body::Ball(s) => Solid::Ball {
                center: s.center,
                radius: s.radius,
            },
            Body::Aabb(b) => Solid::Mesh(ConvexMesh::cuboid(b.center, b.axes, b.half_extents)),
            Body::Box(b, pose) => Solid::Mesh(ConvexMesh::cuboid(
                pose * b.center,
                *pose.rotation.to_rotation_matrix().matrix() * b.axes,
                b.half_extents,
            )),
            Body::Hull(h, pose) => Solid::Mesh(ConvexMesh::new(
                h.vertices.iter().map(|v| pose * v).collect(),
                h.triangles().collect(),
            )),
        }
    }

    /// Analytic distance, when both bodies are balls or axis-aligned boxes.
    pub fn analytic_distance(&self, other: &Body) -> Option<f64> {
        match (self, other) {
            (Body::Ball(a), Body::Ball(b)) => {
                Some(((a.center - b.center).norm() - a.radius - b.radius).max(0.0))
            }
            (Body::Ball(s), Body::Aabb(b)) | (Body::Aabb(b), Body::Ball(s)) => Some(
                ball_aabb_distance(&s.center, s.radius, &b.center, &b.half_extents),
            ),
            (Body::Aabb(a), Body::Aabb(b)) => Some(aabb_distance(
                &a.center,
                &a.half_extents,
                &b.center,
                &b.half_extents,
            )),
            _ => None,
        }
    }
}
