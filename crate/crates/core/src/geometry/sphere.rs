//! Minimal enclosing sphere (Welzl, move-to-front variant).

use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, Point, Sphere};

/// Smallest sphere containing every point.
pub fn bounding_sphere(points: &[Point]) -> Result<Sphere, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut pts = points.to_vec();
    // Deterministic shuffle keeps the expected linear running time without
    // making the output depend on a global RNG.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for i in (1..pts.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        pts.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let scale = pts
        .iter()
        .map(|p| (p - pts[0]).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tolerance = 1e-12 * scale;
    let mut boundary = Vec::with_capacity(4);
    let n = pts.len();
    Ok(move_to_front(&mut pts, n, &mut boundary, tolerance))
}

fn move_to_front(pts: &mut [Point], n: usize, boundary: &mut Vec<Point>, tolerance: f64) -> Sphere {
    let mut sphere = from_boundary(boundary);
    if boundary.len() == 4 {
        return sphere;
    }
    for i in 0..n {
        let p = pts[i];
        if (p - sphere.center).norm() <= sphere.radius + tolerance {
            continue;
        }
        boundary.push(p);
        sphere = move_to_front(pts, i, boundary, tolerance);
        boundary.pop();
        pts[..=i].rotate_right(1);
    }
    sphere
}

/// Smallest sphere with every boundary point on its surface.
fn from_boundary(boundary: &[Point]) -> Sphere {
    match boundary {
        [] => Sphere {
            center: Point::origin(),
            radius: -1.0,
        },
        [a] => Sphere {
            center: *a,
            radius: 0.0,
        },
        [a, b] => {
            let center = nalgebra::center(a, b);
            Sphere {
                center,
                radius: (a - center).norm().max((b - center).norm()),
            }
        }
        [a, b, c] => circumscribed_three(a, b, c),
        [a, b, c, d] => circumscribed_four(a, b, c, d),
        _ => unreachable!("boundary holds at most four points"),
    }
}

fn enclosing(center: Point, points: &[&Point]) -> Sphere {
    let radius = points
        .iter()
        .map(|p| (*p - center).norm())
        .fold(0.0, f64::max);
    Sphere { center, radius }
}

fn circumscribed_three(a: &Point, b: &Point, c: &Point) -> Sphere {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let denom = 2.0 * n.norm_squared();
    if denom <= f64::EPSILON * ab.norm_squared() * ac.norm_squared() {
        // Collinear: the farthest pair spans the sphere.
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .into_iter()
            .max_by(|x, y| (x.0 - x.1).norm_squared().total_cmp(&(y.0 - y.1).norm_squared()))
            .unwrap();
        return enclosing(nalgebra::center(p, q), &[a, b, c]);
    }
    let offset = (ac.norm_squared() * n.cross(&ab) + ab.norm_squared() * ac.cross(&n)) / denom;
    enclosing(a + offset, &[a, b, c])
}

fn circumscribed_four(a: &Point, b: &Point, c: &Point, d: &Point) -> Sphere {
    let rows = Matrix3::from_rows(&[
        (b - a).transpose(),
        (c - a).transpose(),
        (d - a).transpose(),
    ]);
    let rhs = 0.5
        * Vector3::new(
            (b - a).norm_squared(),
            (c - a).norm_squared(),
            (d - a).norm_squared(),
        );
    let scale = (b - a).norm() * (c - a).norm() * (d - a).norm();
    if rows.determinant().abs() > 1e-12 * scale {
        if let Some(inv) = rows.try_inverse() {
            return enclosing(a + inv * rhs, &[a, b, c, d]);
        }
    }
    // Coplanar support set: best circumscribed circle over the triples.
    let triples = [(a, b, c), (a, b, d), (a, c, d), (b, c, d)];
    triples
        .into_iter()
        .map(|(p, q, r)| enclosing(circumscribed_three(p, q, r).center, &[a, b, c, d]))
        .min_by(|x, y| x.radius.total_cmp(&y.radius))
        .unwrap()
}
