//! Approximate convex decomposition by recursive plane splitting.
//!
//! A part's concavity is the largest depth of its surface samples (triangle vertices and
//! centroids) below the boundary of its own hull. The most concave part is cut by a plane
//! through its deepest sample; candidate normals are the world axes and the part's
//! principal axes, and the cut that minimizes the larger child concavity wins. Splitting
//! stops when every part is within tolerance, the part budget is spent, or no candidate
//! cut reduces concavity.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{convex_hull, oriented_bounding_box, ConvexPolytope, Point, TriangleMesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    pub max_parts: usize,
    /// Meters.
    pub concavity_tol: f64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        DecompositionParams {
            max_parts: 16,
            concavity_tol: 1e-3,
        }
    }
}

type Triangle = [Point; 3];

/// Largest depth of `points` below the surface of `hull` (0 when all lie on it).
pub fn concavity(points: &[Point], hull: &ConvexPolytope) -> f64 {
    let planes = hull.planes();
    points
        .iter()
        .map(|p| {
            planes
                .iter()
                .map(|(n, d)| d - n.dot(&p.coords))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

struct Part {
    triangles: Vec<Triangle>,
    hull: ConvexPolytope,
    concavity: f64,
    deepest: Point,
    splittable: bool,
}

impl Part {
    fn new(triangles: Vec<Triangle>) -> Option<Part> {
        let vertices: Vec<Point> = triangles.iter().flatten().copied().collect();
        let hull = convex_hull(&vertices).ok()?;
        let planes = hull.planes();
        let mut concavity = 0.0;
        let mut deepest = vertices[0];
        let centroids = triangles
            .iter()
            .map(|[a, b, c]| Point::from((a.coords + b.coords + c.coords) / 3.0));
        for p in vertices.iter().copied().chain(centroids) {
            let depth = planes
                .iter()
                .map(|(n, d)| d - n.dot(&p.coords))
                .fold(f64::INFINITY, f64::min);
            if depth > concavity {
                concavity = depth;
                deepest = p;
            }
        }
        Some(Part {
            triangles,
            hull,
            concavity,
            deepest,
            splittable: true,
        })
    }
}

/// Decompose `mesh` into at most `params.max_parts` convex parts whose union covers every
/// mesh vertex. A mesh that is convex within tolerance yields exactly its hull.
pub fn convex_decomposition(mesh: &TriangleMesh, params: &DecompositionParams) -> Vec<ConvexPolytope> {
    let Ok(hull) = convex_hull(&mesh.vertices) else {
        return Vec::new();
    };
    if params.max_parts <= 1 || mesh.triangles.is_empty() {
        return vec![hull];
    }
    let mut soup: Vec<Triangle> = mesh
        .triangles
        .iter()
        .map(|t| t.map(|i| mesh.vertices[i]))
        .collect();
    // Vertices outside every triangle still have to be covered.
    let mut referenced = vec![false; mesh.vertices.len()];
    for t in &mesh.triangles {
        for &i in t {
            referenced[i] = true;
        }
    }
    soup.extend(
        mesh.vertices
            .iter()
            .zip(&referenced)
            .filter(|(_, r)| !**r)
            .map(|(p, _)| [*p; 3]),
    );

    let Some(root) = Part::new(soup) else {
        return vec![hull];
    };
    if root.concavity <= params.concavity_tol {
        return vec![hull];
    }
    let mut parts = vec![root];
    while parts.len() < params.max_parts {
        let Some(worst) = parts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable && p.concavity > params.concavity_tol)
            .max_by(|a, b| a.1.concavity.total_cmp(&b.1.concavity))
            .map(|(i, _)| i)
        else {
            break;
        };
        match split(&parts[worst]) {
            Some((left, right)) => {
                parts[worst] = left;
                parts.push(right);
            }
            None => parts[worst].splittable = false,
        }
    }
    parts.into_iter().map(|p| p.hull).collect()
}

fn split(part: &Part) -> Option<(Part, Part)> {
    let points: Vec<Point> = part.triangles.iter().flatten().copied().collect();
    let principal = oriented_bounding_box(&points).ok()?.axes;
    let normals = [
        Vector3::x(),
        Vector3::y(),
        Vector3::z(),
        principal.column(0).into_owned(),
        principal.column(1).into_owned(),
        principal.column(2).into_owned(),
    ];
    let tolerance = 1e-9 * part.hull.scale().max(1e-9);

    let mut best: Option<(f64, f64, Part, Part)> = None;
    for normal in normals {
        let offset = normal.dot(&part.deepest.coords);
        let below = clip(&part.triangles, &normal, offset, tolerance, false);
        let above = clip(&part.triangles, &normal, offset, tolerance, true);
        let strictly = |tris: &[Triangle], sign: f64| {
            tris.iter()
                .flatten()
                .any(|p| sign * (normal.dot(&p.coords) - offset) > tolerance)
        };
        if !strictly(&below, -1.0) || !strictly(&above, 1.0) {
            continue;
        }
        let (Some(left), Some(right)) = (Part::new(below), Part::new(above)) else {
            continue;
        };
        let worst = left.concavity.max(right.concavity);
        let volume = left.hull.volume() + right.hull.volume();
        let better = match &best {
            None => true,
            Some((w, v, _, _)) => worst < *w - tolerance || (worst <= *w + tolerance && volume < *v),
        };
        if better {
            best = Some((worst, volume, left, right));
        }
    }
    let (worst, _, left, right) = best?;
    (worst < part.concavity - tolerance).then_some((left, right))
}

/// Keep the part of each triangle on one side of the plane `normal . x = offset`.
///
/// A triangle lying in the plane goes to the side its (outward) normal points away
/// from, since that is where the solid it bounds lies.
fn clip(
    triangles: &[Triangle],
    normal: &Vector3<f64>,
    offset: f64,
    tolerance: f64,
    keep_above: bool,
) -> Vec<Triangle> {
    let sign = if keep_above { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for tri in triangles {
        let side: [f64; 3] = tri.map(|p| sign * (normal.dot(&p.coords) - offset));
        if side.iter().all(|s| s.abs() <= tolerance) {
            let facing = sign * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).dot(normal);
            if facing <= 0.0 {
                out.push(*tri);
            }
            continue;
        }
        if side.iter().all(|&s| s >= -tolerance) {
            out.push(*tri);
            continue;
        }
        if side.iter().all(|&s| s <= tolerance) {
            // Nothing strictly on the kept side; edge contact only.
            continue;
        }
        let mut polygon: Vec<Point> = Vec::with_capacity(4);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (sa, sb) = (side[k], side[(k + 1) % 3]);
            if sa >= -tolerance {
                polygon.push(a);
            }
            if (sa >= -tolerance) != (sb >= -tolerance) {
                let t = sa / (sa - sb);
                polygon.push(a + (b - a) * t);
            }
        }
        for k in 1..polygon.len().saturating_sub(1) {
            out.push([polygon[0], polygon[k], polygon[k + 1]]);
        }
    }
    out
}
