//! Planar convex hulls and convex-set intersection tests.

use crate::geodesy::PlanarPoint;
use crate::scalar::Scalar;
use std::cmp::Ordering;

/// Indices of the convex hull vertices in counter-clockwise order (Andrew's
/// monotone chain). Collinear boundary points are dropped; one or two
/// distinct points come back as-is.
pub fn convex_hull<T: Scalar>(points: &[PlanarPoint<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (points[a], points[b]);
        p.x.partial_cmp(&q.x)
            .unwrap_or(Ordering::Equal)
            .then(p.y.partial_cmp(&q.y).unwrap_or(Ordering::Equal))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() <= 2 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| points[a].sub(points[o]).cross(points[b].sub(points[o]));
    let mut hull: Vec<usize> = Vec::with_capacity(idx.len() * 2);
    for &i in &idx {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= T::zero() {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= T::zero() {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    if hull.len() < 2 {
        // all points coincide
        return vec![idx[0]];
    }
    hull
}

fn project_onto<T: Scalar>(poly: &[PlanarPoint<T>], axis: PlanarPoint<T>) -> (T, T) {
    poly.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
        let v = p.dot(axis);
        (lo.min(v), hi.max(v))
    })
}

fn candidate_axes<T: Scalar>(poly: &[PlanarPoint<T>], out: &mut Vec<PlanarPoint<T>>) {
    let n = poly.len();
    if n < 2 {
        return;
    }
    for k in 0..n {
        let e = poly[(k + 1) % n].sub(poly[k]);
        out.push(PlanarPoint::new(-e.y, e.x));
        if n == 2 {
            out.push(e);
            break;
        }
    }
}

/// Whether two convex sets, given by their hull vertices (1, 2 or more
/// points), share any point. Touching boundaries count as intersecting.
pub fn convex_sets_intersect<T: Scalar>(a: &[PlanarPoint<T>], b: &[PlanarPoint<T>]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let mut axes = Vec::new();
    candidate_axes(a, &mut axes);
    candidate_axes(b, &mut axes);
    if a.len() == 1 && b.len() == 1 {
        axes.push(b[0].sub(a[0]));
    }
    for axis in axes {
        if axis.x == T::zero() && axis.y == T::zero() {
            continue;
        }
        let (alo, ahi) = project_onto(a, axis);
        let (blo, bhi) = project_onto(b, axis);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

/// Hull vertices (as points) of a subset of `points`.
pub fn hull_points<T: Scalar>(points: &[PlanarPoint<T>], members: &[usize]) -> Vec<PlanarPoint<T>> {
    let sub: Vec<PlanarPoint<T>> = members.iter().map(|&i| points[i]).collect();
    convex_hull(&sub).into_iter().map(|k| sub[k]).collect()
}
