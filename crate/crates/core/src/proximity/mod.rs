//! Distance and intersection queries between posed shapes, and skip-filtered pair queries.

mod gjk;
mod query;
mod sat;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexPolytope, LinkShapes, Obb, Point, ShapeType, Sphere};
use crate::model::{Configuration, ModelError, RigidTransform, RobotModel};

pub use gjk::{gjk, GjkResult, SupportMap, MAX_ITERATIONS, RELATIVE_TOLERANCE};
pub use query::{
    query_all_pairs, shape_layout, PairDistance, QueryMode, QueryOutcome, QueryPlan, ShapeSlot,
};
pub use sat::obb_overlap;

#[derive(Debug, Error)]
pub enum ProximityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("shape index spaces differ: {expected_type} with {expected} shapes vs {got_type} with {got}")]
    IndexSpaceMismatch {
        expected_type: ShapeType,
        expected: usize,
        got_type: ShapeType,
        got: usize,
    },
    #[error("link shapes must be sorted by link index without duplicates")]
    UnsortedShapes,
    #[error("link index {0} is out of range")]
    UnknownLink(usize),
}

/// Shape geometry in its link frame. Polytopes are borrowed from the owning `LinkShapes`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeGeometry<'a> {
    Sphere(Sphere),
    Obb(Obb),
    Polytope(&'a ConvexPolytope),
}

/// World-frame form used by the query kernels.
#[derive(Clone, Copy, Debug)]
enum World<'a> {
    Ball { center: Point, radius: f64 },
    Box(Obb),
    Polytope {
        polytope: &'a ConvexPolytope,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    },
}

impl SupportMap for World<'_> {
    fn support(&self, direction: &Vector3<f64>) -> Point {
        match self {
            World::Ball { center, .. } => *center,
            World::Box(obb) => obb.support(direction),
            World::Polytope {
                polytope,
                rotation,
                translation,
            } => {
                let local = polytope.support(&(rotation.transpose() * direction));
                Point::from(rotation * local.coords + translation)
            }
        }
    }

    fn reference_point(&self) -> Point {
        match self {
            World::Ball { center, .. } => *center,
            World::Box(obb) => obb.center,
            World::Polytope {
                polytope,
                rotation,
                translation,
            } => Point::from(rotation * polytope.vertices[0].coords + translation),
        }
    }

    fn margin(&self) -> f64 {
        match self {
            World::Ball { radius, .. } => *radius,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PosedShape<'a> {
    geometry: ShapeGeometry<'a>,
    pose: RigidTransform,
    owner_link: usize,
    owner_part: Option<usize>,
    world: World<'a>,
}

impl<'a> PosedShape<'a> {
    pub fn new(
        geometry: ShapeGeometry<'a>,
        pose: RigidTransform,
        owner_link: usize,
        owner_part: Option<usize>,
    ) -> Self {
        let rotation = *pose.rotation.to_rotation_matrix().matrix();
        let world = match geometry {
            ShapeGeometry::Sphere(s) => World::Ball {
                center: pose * s.center,
                radius: s.radius,
            },
            ShapeGeometry::Obb(b) => World::Box(Obb {
                center: pose * b.center,
                axes: rotation * b.axes,
                half_extents: b.half_extents,
            }),
            ShapeGeometry::Polytope(polytope) => World::Polytope {
                polytope,
                rotation,
                translation: pose.translation.vector,
            },
        };
        PosedShape {
            geometry,
            pose,
            owner_link,
            owner_part,
            world,
        }
    }

    pub fn geometry(&self) -> &ShapeGeometry<'a> {
        &self.geometry
    }

    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }

    pub fn owner_link(&self) -> usize {
        self.owner_link
    }

    pub fn owner_part(&self) -> Option<usize> {
        self.owner_part
    }

    /// Same shape under an additional world transform applied on the left.
    pub fn moved(&self, transform: &RigidTransform) -> PosedShape<'a> {
        PosedShape::new(self.geometry, transform * self.pose, self.owner_link, self.owner_part)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    /// Meters; 0 when intersecting.
    pub distance: f64,
    pub intersecting: bool,
    pub point_a: Point,
    pub point_b: Point,
    /// GJK hit its iteration cap; the distance is an upper bound.
    pub degraded: bool,
}

/// Spheres are points swept by a radius: two shapes with cores `dc` apart and margins
/// `ra`, `rb` are `dc - ra - rb` apart. Overlapping margins get a common point on the
/// core segment, in the middle of the stretch covered by both balls.
fn inflate(pa: Point, pb: Point, core: f64, ra: f64, rb: f64) -> DistanceResult {
    let gap = core - ra - rb;
    if core > 0.0 && gap > 0.0 {
        let u = (pb - pa) / core;
        return DistanceResult {
            distance: gap,
            intersecting: false,
            point_a: pa + u * ra,
            point_b: pb - u * rb,
            degraded: false,
        };
    }
    let common = if core > 0.0 {
        let lo = (core - rb).max(0.0);
        let hi = core.min(ra);
        pa + (pb - pa) * (0.5 * (lo + hi) / core)
    } else {
        pa
    };
    DistanceResult {
        distance: 0.0,
        intersecting: true,
        point_a: common,
        point_b: common,
        degraded: false,
    }
}

/// Minimum distance between two posed shapes, clamped at 0 for overlapping shapes.
pub fn distance(a: &PosedShape, b: &PosedShape) -> DistanceResult {
    if let (World::Ball { center: ca, radius: ra }, World::Ball { center: cb, radius: rb }) =
        (&a.world, &b.world)
    {
        return inflate(*ca, *cb, (cb - ca).norm(), *ra, *rb);
    }
    let result = gjk(&a.world, &b.world, None);
    let (ra, rb) = (a.world.margin(), b.world.margin());
    let mut out = if result.overlapping {
        DistanceResult {
            distance: 0.0,
            intersecting: true,
            point_a: result.point_a,
            point_b: result.point_a,
            degraded: false,
        }
    } else {
        inflate(result.point_a, result.point_b, result.distance, ra, rb)
    };
    out.degraded = result.degraded;
    out
}

/// True iff the shapes overlap. Box pairs use the separating-axis test.
pub fn intersects(a: &PosedShape, b: &PosedShape) -> bool {
    match (&a.world, &b.world) {
        (World::Ball { center: ca, radius: ra }, World::Ball { center: cb, radius: rb }) => {
            (cb - ca).norm() <= ra + rb
        }
        (World::Box(ba), World::Box(bb)) => obb_overlap(ba, bb),
        (wa, wb) => {
            let margin = wa.margin() + wb.margin();
            let result = gjk(wa, wb, Some(margin));
            result.overlapping || result.distance <= margin
        }
    }
}

/// The same boolean computed from the full distance query (no fast paths).
pub fn intersects_by_distance(a: &PosedShape, b: &PosedShape) -> bool {
    distance(a, b).intersecting
}

/// Posed shapes of one type, in shape index order.
#[derive(Clone, Debug)]
pub struct PosedSet<'a> {
    pub shape_type: ShapeType,
    pub shapes: Vec<PosedShape<'a>>,
}

/// Link-local geometry of every shape of `shape_type`, in index order, with owner link and part.
pub fn local_shapes(
    shapes: &[LinkShapes],
    shape_type: ShapeType,
) -> Result<Vec<(ShapeGeometry<'_>, usize, Option<usize>)>, ProximityError> {
    if shapes.windows(2).any(|w| w[0].link_index >= w[1].link_index) {
        return Err(ProximityError::UnsortedShapes);
    }
    let mut out = Vec::new();
    for link in shapes {
        let l = link.link_index;
        match shape_type {
            ShapeType::SphereLink => out.push((ShapeGeometry::Sphere(link.sphere_link), l, None)),
            ShapeType::ObbLink => out.push((ShapeGeometry::Obb(link.obb_link), l, None)),
            ShapeType::HullLink => out.push((ShapeGeometry::Polytope(&link.hull), l, None)),
            ShapeType::SphereDecomp => out.extend(
                link.spheres_decomp
                    .iter()
                    .enumerate()
                    .map(|(p, s)| (ShapeGeometry::Sphere(*s), l, Some(p))),
            ),
            ShapeType::ObbDecomp => out.extend(
                link.obbs_decomp
                    .iter()
                    .enumerate()
                    .map(|(p, b)| (ShapeGeometry::Obb(*b), l, Some(p))),
            ),
            ShapeType::HullDecomp => out.extend(
                link.decomposition
                    .iter()
                    .enumerate()
                    .map(|(p, h)| (ShapeGeometry::Polytope(h), l, Some(p))),
            ),
        }
    }
    Ok(out)
}

/// Pose every shape of `shape_type` with precomputed link world transforms.
pub fn pose_with_transforms<'a>(
    shapes: &'a [LinkShapes],
    shape_type: ShapeType,
    link_poses: &[RigidTransform],
) -> Result<PosedSet<'a>, ProximityError> {
    let local = local_shapes(shapes, shape_type)?;
    let posed = local
        .into_iter()
        .map(|(geometry, link, part)| {
            let pose = link_poses
                .get(link)
                .ok_or(ProximityError::UnknownLink(link))?;
            Ok(PosedShape::new(geometry, *pose, link, part))
        })
        .collect::<Result<Vec<_>, ProximityError>>()?;
    Ok(PosedSet {
        shape_type,
        shapes: posed,
    })
}

/// Run forward kinematics and pose every shape of `shape_type`.
pub fn pose_shapes<'a>(
    model: &RobotModel,
    shapes: &'a [LinkShapes],
    shape_type: ShapeType,
    config: &Configuration,
) -> Result<PosedSet<'a>, ProximityError> {
    let link_poses = model.forward_kinematics(config)?;
    pose_with_transforms(shapes, shape_type, &link_poses)
}
