//! Gilbert-Johnson-Keerthi distance between convex sets given by support functions.
//!
//! Shapes are split into a core (a point for spheres, the solid itself for boxes and
//! polytopes) plus a margin radius, so sphere queries converge in finitely many steps.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::Point;

/// Iteration cap; hitting it marks the result as degraded.
pub const MAX_ITERATIONS: usize = 128;
/// Relative progress tolerance on the squared distance estimate.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Squared core distance treated as contact (1e-12 m).
const CONTACT_SQ: f64 = 1e-24;

pub trait SupportMap {
    /// Farthest point of the core along `direction` (world frame).
    fn support(&self, direction: &Vector3<f64>) -> Point;
    /// Any point of the core.
    fn reference_point(&self) -> Point;
    /// Radius swept around the core.
    fn margin(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug)]
struct Vertex {
    w: Vector3<f64>,
    a: Point,
    b: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GjkResult {
    /// Distance between the cores.
    pub distance: f64,
    /// Closest points on the cores; equal when the cores overlap.
    pub point_a: Point,
    pub point_b: Point,
    pub overlapping: bool,
    pub degraded: bool,
    pub iterations: usize,
}

/// Closest point of a simplex to the origin, with the sub-simplex supporting it.
struct Closest {
    v: Vector3<f64>,
    vertices: [Vertex; 4],
    weights: [f64; 4],
    len: usize,
}

impl Closest {
    fn from(pairs: &[(Vertex, f64)]) -> Closest {
        let mut vertices = [pairs[0].0; 4];
        let mut weights = [0.0; 4];
        let mut v = Vector3::zeros();
        let mut len = 0;
        for &(vertex, weight) in pairs {
            if weight > 0.0 {
                vertices[len] = vertex;
                weights[len] = weight;
                v += vertex.w * weight;
                len += 1;
            }
        }
        if len == 0 {
            vertices[0] = pairs[0].0;
            weights[0] = 1.0;
            v = pairs[0].0.w;
            len = 1;
        }
        Closest {
            v,
            vertices,
            weights,
            len,
        }
    }

    fn witnesses(&self) -> (Point, Point) {
        let mut a = Vector3::zeros();
        let mut b = Vector3::zeros();
        for k in 0..self.len {
            a += self.vertices[k].a.coords * self.weights[k];
            b += self.vertices[k].b.coords * self.weights[k];
        }
        (Point::from(a), Point::from(b))
    }
}

fn closest_on_segment(p: Vertex, q: Vertex) -> Closest {
    let d = q.w - p.w;
    let denom = d.norm_squared();
    if denom <= 0.0 {
        return Closest::from(&[(p, 1.0)]);
    }
    let t = (-p.w.dot(&d) / denom).clamp(0.0, 1.0);
    Closest::from(&[(p, 1.0 - t), (q, t)])
}

fn closest_on_triangle(a: Vertex, b: Vertex, c: Vertex) -> Closest {
    let ab = b.w - a.w;
    let ac = c.w - a.w;
    let ap = -a.w;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return Closest::from(&[(a, 1.0)]);
    }
    let bp = -b.w;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return Closest::from(&[(b, 1.0)]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return Closest::from(&[(a, 1.0 - t), (b, t)]);
    }
    let cp = -c.w;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return Closest::from(&[(c, 1.0)]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return Closest::from(&[(a, 1.0 - t), (c, t)]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return Closest::from(&[(b, 1.0 - t), (c, t)]);
    }
    let sum = va + vb + vc;
    if sum == 0.0 || sum.is_nan() {
        // Degenerate triangle: fall back to its edges.
        return [closest_on_segment(a, b), closest_on_segment(a, c), closest_on_segment(b, c)]
            .into_iter()
            .min_by(|x, y| x.v.norm_squared().total_cmp(&y.v.norm_squared()))
            .unwrap();
    }
    let denom = 1.0 / sum;
    let v = vb * denom;
    let w = vc * denom;
    Closest::from(&[(a, 1.0 - v - w), (b, v), (c, w)])
}

fn closest_on_tetrahedron(a: Vertex, b: Vertex, c: Vertex, d: Vertex) -> Closest {
    let volume = (b.w - a.w).cross(&(c.w - a.w)).dot(&(d.w - a.w));
    let scale = (b.w - a.w).norm() * (c.w - a.w).norm() * (d.w - a.w).norm();
    let degenerate = volume.abs() <= 1e-14 * scale;
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let mut best: Option<Closest> = None;
    let mut inside = true;
    for (p, q, r, opposite) in faces {
        let n = (q.w - p.w).cross(&(r.w - p.w));
        let origin_side = n.dot(&-p.w);
        let opposite_side = n.dot(&(opposite.w - p.w));
        if degenerate || origin_side * opposite_side < 0.0 {
            inside = false;
            let candidate = closest_on_triangle(p, q, r);
            if best
                .as_ref()
                .is_none_or(|b| candidate.v.norm_squared() < b.v.norm_squared())
            {
                best = Some(candidate);
            }
        }
    }
    if inside {
        // Barycentric coordinates of the origin.
        let m = Matrix3::from_columns(&[b.w - a.w, c.w - a.w, d.w - a.w]);
        let weights = m
            .try_inverse()
            .map(|inv| inv * -a.w)
            .unwrap_or_else(|| Vector3::repeat(0.25));
        let mut result = Closest::from(&[
            (a, 1.0 - weights.sum()),
            (b, weights.x),
            (c, weights.y),
            (d, weights.z),
        ]);
        result.v = Vector3::zeros();
        return result;
    }
    best.unwrap()
}

fn closest_on_simplex(vertices: &[Vertex]) -> Closest {
    match *vertices {
        [a] => Closest::from(&[(a, 1.0)]),
        [a, b] => closest_on_segment(a, b),
        [a, b, c] => closest_on_triangle(a, b, c),
        [a, b, c, d] => closest_on_tetrahedron(a, b, c, d),
        _ => unreachable!(),
    }
}

/// Core-to-core distance. With `separation_bound = Some(m)` the loop stops as soon as
/// the cores are proven farther apart than `m` or closer than `m` (boolean queries).
pub fn gjk<A: SupportMap, B: SupportMap>(
    shape_a: &A,
    shape_b: &B,
    separation_bound: Option<f64>,
) -> GjkResult {
    let support = |dir: &Vector3<f64>| {
        let a = shape_a.support(dir);
        let b = shape_b.support(&-dir);
        Vertex { w: a - b, a, b }
    };
    let a0 = shape_a.reference_point();
    let b0 = shape_b.reference_point();
    let mut closest = Closest::from(&[(Vertex { w: a0 - b0, a: a0, b: b0 }, 1.0)]);
    let mut simplex: Vec<Vertex> = Vec::with_capacity(4);
    let mut degraded = true;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let v = closest.v;
        let vv = v.norm_squared();
        if vv <= CONTACT_SQ {
            degraded = false;
            break;
        }
        let w = support(&-v);
        let vw = v.dot(&w.w);
        if let Some(bound) = separation_bound {
            // Lower bound vw / |v| on the core distance exceeds the margin.
            if vw > 0.0 && vw * vw > bound * bound * vv {
                degraded = false;
                break;
            }
            if vv <= bound * bound {
                degraded = false;
                break;
            }
        }
        let duplicate = simplex.iter().any(|s| s.w == w.w);
        if duplicate || vv - vw <= RELATIVE_TOLERANCE * vv {
            degraded = false;
            break;
        }
        if simplex.is_empty() {
            simplex.extend(closest.vertices[..closest.len].iter().copied());
        }
        simplex.push(w);
        let next = closest_on_simplex(&simplex);
        if next.v.norm_squared() >= vv {
            // No progress: the previous estimate is as good as it gets.
            degraded = false;
            break;
        }
        simplex.clear();
        simplex.extend(next.vertices[..next.len].iter().copied());
        closest = next;
        if closest.len == 4 {
            degraded = false;
            break;
        }
    }

    let (point_a, point_b) = closest.witnesses();
    let overlapping = closest.len == 4 || closest.v.norm_squared() <= CONTACT_SQ;
    if overlapping {
        return GjkResult {
            distance: 0.0,
            point_a,
            point_b: point_a,
            overlapping: true,
            degraded,
            iterations,
        };
    }
    GjkResult {
        distance: closest.v.norm(),
        point_a,
        point_b,
        overlapping: false,
        degraded,
        iterations,
    }
}
