//! Separating-axis overlap test for two oriented boxes (15 candidate axes).

use nalgebra::Matrix3;

use crate::geometry::Obb;

/// Guards the edge-edge axes against near-parallel edges.
const PARALLEL_EPSILON: f64 = 1e-12;

/// True iff the boxes overlap (touching counts as overlap).
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let ea = a.half_extents;
    let eb = b.half_extents;
    // Rotation expressing b's axes in a's frame.
    let r: Matrix3<f64> = a.axes.transpose() * b.axes;
    let abs_r = r.map(|x| x.abs() + PARALLEL_EPSILON);
    let t = a.axes.transpose() * (b.center - a.center);

    for i in 0..3 {
        let ra = ea[i];
        let rb = eb[0] * abs_r[(i, 0)] + eb[1] * abs_r[(i, 1)] + eb[2] * abs_r[(i, 2)];
        if t[i].abs() > ra + rb {
            return false;
        }
    }
    for j in 0..3 {
        let ra = ea[0] * abs_r[(0, j)] + ea[1] * abs_r[(1, j)] + ea[2] * abs_r[(2, j)];
        let rb = eb[j];
        let proj = t[0] * r[(0, j)] + t[1] * r[(1, j)] + t[2] * r[(2, j)];
        if proj.abs() > ra + rb {
            return false;
        }
    }
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for j in 0..3 {
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            let ra = ea[i1] * abs_r[(i2, j)] + ea[i2] * abs_r[(i1, j)];
            let rb = eb[j1] * abs_r[(i, j2)] + eb[j2] * abs_r[(i, j1)];
            let proj = t[i2] * r[(i1, j)] - t[i1] * r[(i2, j)];
            if proj.abs() > ra + rb {
                return false;
            }
        }
    }
    true
}
