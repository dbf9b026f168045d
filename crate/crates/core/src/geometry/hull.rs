//! Quickhull in three dimensions.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::{ConvexPolytope, GeometryError, Point};

/// Padding applied along degenerate directions of flat or collinear inputs (meters).
pub const DEGENERATE_PADDING: f64 = 1e-6;

/// Minimal convex polytope containing `points`.
///
/// Inputs with fewer than four affinely independent points (coincident, collinear or
/// coplanar sets) are padded by [`DEGENERATE_PADDING`] along the missing directions
/// and rebuilt; a warning is logged when that happens.
pub fn convex_hull(points: &[Point]) -> Result<ConvexPolytope, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut input = points.to_vec();
    let mut padded = false;
    loop {
        match quickhull(&input) {
            Ok(hull) => {
                let hull = drop_flat_vertices(hull);
                if padded {
                    log::warn!(
                        "degenerate point set ({} points) padded to a hull of {} vertices",
                        points.len(),
                        hull.vertices.len()
                    );
                }
                return Ok(hull);
            }
            Err(directions) => {
                let scale = extent(&input);
                let padding = DEGENERATE_PADDING.max(1e-8 * scale);
                input = pad(&input, &directions, padding);
                padded = true;
            }
        }
    }
}

fn extent(points: &[Point]) -> f64 {
    let (lo, hi) = bounds(points);
    (hi - lo).max()
}

fn bounds(points: &[Point]) -> (Vector3<f64>, Vector3<f64>) {
    points.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
    )
}

fn pad(points: &[Point], directions: &[Vector3<f64>], padding: f64) -> Vec<Point> {
    let mut out = points.to_vec();
    for dir in directions {
        let shifted: Vec<Point> = out.iter().map(|p| p + dir * padding).collect();
        out.extend(shifted);
    }
    out
}

fn orthonormal_pair(u: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = u.cross(&helper).normalize();
    let b = u.cross(&a).normalize();
    (a, b)
}

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

struct Builder<'a> {
    points: &'a [Point],
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
    eps: f64,
}

impl<'a> Builder<'a> {
    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let [a, b, c] = v.map(|i| self.points[i]);
        let normal = (b - a).cross(&(c - a)).normalize();
        let id = self.faces.len();
        self.faces.push(Face {
            v,
            normal,
            offset: normal.dot(&a.coords),
            outside: Vec::new(),
            alive: true,
        });
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    }

    fn remove_face(&mut self, id: usize) {
        let v = self.faces[id].v;
        self.faces[id].alive = false;
        for k in 0..3 {
            let key = (v[k], v[(k + 1) % 3]);
            if self.edges.get(&key) == Some(&id) {
                self.edges.remove(&key);
            }
        }
    }

    /// Push `p` onto the outside set of the face it is farthest above, if any.
    fn assign(&mut self, p: usize, candidates: &[usize]) {
        let point = self.points[p];
        let mut best = None;
        let mut best_dist = self.eps;
        for &f in candidates {
            let d = self.faces[f].distance(&point);
            if d > best_dist {
                best_dist = d;
                best = Some(f);
            }
        }
        if let Some(f) = best {
            self.faces[f].outside.push(p);
        }
    }
}

/// Builds the hull, or returns the padding directions when the input is degenerate.
fn quickhull(points: &[Point]) -> Result<ConvexPolytope, Vec<Vector3<f64>>> {
    let (lo, hi) = bounds(points);
    let scale = (hi - lo).max();
    if scale == 0.0 {
        return Err(vec![Vector3::x(), Vector3::y(), Vector3::z()]);
    }
    let magnitude = lo.abs().sup(&hi.abs()).max();
    let eps = 1e-11 * scale + 1e-13 * magnitude;
    let degenerate = 1e-9 * scale;

    // Initial simplex from axis extremes.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let min = (0..points.len())
            .min_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]))
            .unwrap();
        let max = (0..points.len())
            .max_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]))
            .unwrap();
        extremes.push(min);
        extremes.push(max);
    }
    let mut p0 = extremes[0];
    let mut p1 = extremes[1];
    let mut best = -1.0;
    for &a in &extremes {
        for &b in &extremes {
            let d = (points[a] - points[b]).norm_squared();
            if d > best {
                best = d;
                p0 = a;
                p1 = b;
            }
        }
    }
    let line = (points[p1] - points[p0]).normalize();
    let line_distance = |p: &Point| {
        let w = p - points[p0];
        (w - line * w.dot(&line)).norm()
    };
    let p2 = (0..points.len())
        .max_by(|&a, &b| line_distance(&points[a]).total_cmp(&line_distance(&points[b])))
        .unwrap();
    if line_distance(&points[p2]) <= degenerate {
        let (a, b) = orthonormal_pair(&line);
        return Err(vec![a, b]);
    }
    let normal = (points[p1] - points[p0])
        .cross(&(points[p2] - points[p0]))
        .normalize();
    let plane_distance = |p: &Point| normal.dot(&(p - points[p0]));
    let p3 = (0..points.len())
        .max_by(|&a, &b| {
            plane_distance(&points[a])
                .abs()
                .total_cmp(&plane_distance(&points[b]).abs())
        })
        .unwrap();
    if plane_distance(&points[p3]).abs() <= degenerate {
        return Err(vec![normal]);
    }

    let mut builder = Builder {
        points,
        faces: Vec::new(),
        edges: HashMap::new(),
        eps,
    };
    let (p1, p2) = if plane_distance(&points[p3]) > 0.0 {
        (p2, p1)
    } else {
        (p1, p2)
    };
    let initial = [
        builder.add_face([p0, p1, p2]),
        builder.add_face([p0, p3, p1]),
        builder.add_face([p1, p3, p2]),
        builder.add_face([p2, p3, p0]),
    ];
    let simplex = [p0, p1, p2, p3];
    for p in 0..points.len() {
        if !simplex.contains(&p) {
            builder.assign(p, &initial);
        }
    }

    let mut pending: Vec<usize> = initial.to_vec();
    while let Some(face) = pending.pop() {
        if !builder.faces[face].alive || builder.faces[face].outside.is_empty() {
            continue;
        }
        let eye = {
            let f = &builder.faces[face];
            *f.outside
                .iter()
                .max_by(|&&a, &&b| f.distance(&points[a]).total_cmp(&f.distance(&points[b])))
                .unwrap()
        };
        let eye_point = points[eye];

        // Visible region and its horizon.
        let mut visible = vec![face];
        let mut visited = HashMap::from([(face, ())]);
        let mut horizon = Vec::new();
        let mut cursor = 0;
        while cursor < visible.len() {
            let f = visible[cursor];
            cursor += 1;
            let v = builder.faces[f].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let Some(&neighbor) = builder.edges.get(&(b, a)) else {
                    continue;
                };
                if visited.contains_key(&neighbor) {
                    continue;
                }
                if builder.faces[neighbor].distance(&eye_point) > eps {
                    visited.insert(neighbor, ());
                    visible.push(neighbor);
                } else {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            orphans.extend(std::mem::take(&mut builder.faces[f].outside));
            builder.remove_face(f);
        }
        let created: Vec<usize> = horizon
            .iter()
            .map(|&(a, b)| builder.add_face([a, b, eye]))
            .collect();
        for p in orphans {
            if p != eye {
                builder.assign(p, &created);
            }
        }
        pending.extend(created);
    }

    let mut remap = vec![usize::MAX; points.len()];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for f in builder.faces.iter().filter(|f| f.alive) {
        let face = f
            .v
            .iter()
            .map(|&i| {
                if remap[i] == usize::MAX {
                    remap[i] = vertices.len();
                    vertices.push(points[i]);
                }
                remap[i]
            })
            .collect();
        faces.push(face);
    }
    Ok(ConvexPolytope { vertices, faces })
}

/// Rebuild without vertices that lie inside a facet or along an edge (fewer than three
/// distinct incident face planes), so every remaining vertex is extreme. Nearly
/// coplanar neighbours can fool the normal test, so a dropped vertex that ends up
/// outside the rebuilt hull is kept.
fn drop_flat_vertices(mut hull: ConvexPolytope) -> ConvexPolytope {
    let mut protected: Vec<Point> = Vec::new();
    for _ in 0..8 {
        let planes = hull.planes();
        let mut incident: Vec<Vec<Vector3<f64>>> = vec![Vec::new(); hull.vertices.len()];
        for (face, (normal, _)) in hull.faces.iter().zip(&planes) {
            for &v in face {
                let distinct = &mut incident[v];
                if distinct.len() < 3 && distinct.iter().all(|n| n.dot(normal) < 1.0 - 1e-10) {
                    distinct.push(*normal);
                }
            }
        }
        let (keep, dropped): (Vec<_>, Vec<_>) = hull
            .vertices
            .iter()
            .zip(&incident)
            .partition(|(p, normals)| normals.len() >= 3 || protected.contains(p));
        let keep: Vec<Point> = keep.into_iter().map(|(p, _)| *p).collect();
        if dropped.is_empty() || keep.len() < 4 {
            return hull;
        }
        let Ok(rebuilt) = quickhull(&keep) else {
            return hull;
        };
        let tolerance = 1e-11 * rebuilt.scale();
        let missed: Vec<Point> = dropped
            .into_iter()
            .map(|(p, _)| *p)
            .filter(|p| rebuilt.signed_distance_bound(p) > tolerance)
            .collect();
        if missed.is_empty() {
            hull = rebuilt;
        } else {
            protected.extend(missed);
        }
    }
    hull
}
