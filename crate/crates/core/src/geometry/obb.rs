use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{GeometryError, Obb, Point};

/// Box aligned with the principal axes of the point covariance, tight along each axis.
///
/// Axes are ordered by decreasing variance, each flipped so its largest component is
/// positive, and the third axis is chosen to make the frame right-handed.
pub fn oriented_bounding_box(points: &[Point]) -> Result<Obb, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let covariance = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - mean;
        acc + d * d.transpose()
    }) / n;

    let eigen = SymmetricEigen::new(covariance);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let axis = |k: usize| {
        let mut v: Vector3<f64> = eigen.eigenvectors.column(order[k]).into_owned();
        let lead = v.iamax();
        if v[lead] < 0.0 {
            v = -v;
        }
        v.normalize()
    };
    let first = axis(0);
    let second = axis(1);
    // Re-orthogonalize against round-off and close the frame.
    let second = (second - first * first.dot(&second)).normalize();
    let third = first.cross(&second);
    let axes = Matrix3::from_columns(&[first, second, third]);

    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        let local = axes.transpose() * p.coords;
        lo = lo.inf(&local);
        hi = hi.sup(&local);
    }
    let half_extents = (hi - lo) * 0.5;
    let center = Point::from(axes * ((hi + lo) * 0.5));
    Ok(Obb {
        center,
        axes,
        half_extents,
    })
}
