//! Small fixed-size helpers for 2-vectors and 2x2 matrices.

use crate::Point;

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Point) -> Point {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// z-component of the cross product.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn mat_vec(m: &Mat2, v: Point) -> Point {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

#[inline]
/// `(M + Mᵀ)/2`.
pub fn symmetric_part(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse(m: &Mat2) -> Option<Mat2> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[0][0];
    let c = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [mean - rad, mean + rad]
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Mat2) -> f64 {
    let mtm = [
        [
            m[0][0] * m[0][0] + m[1][0] * m[1][0],
            m[0][0] * m[0][1] + m[1][0] * m[1][1],
        ],
        [
            m[0][1] * m[0][0] + m[1][1] * m[1][0],
            m[0][1] * m[0][1] + m[1][1] * m[1][1],
        ],
    ];
    sym_eigenvalues(&mtm)[1].max(0.0).sqrt()
}

/// Quadratic form `x . m y`.
#[inline]
pub fn quad_form(m: &Mat2, x: Point, y: Point) -> f64 {
    dot(x, mat_vec(m, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_rotation_scaling() {
        let m = [[2.0, -1.0], [1.0, 3.0]];
        let inv = inverse(&m).unwrap();
        let p = mat_vec(&m, mat_vec(&inv, [0.3, -0.7]));
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] + 0.7).abs() < 1e-15);
        assert!(inverse(&[[1.0, 2.0], [2.0, 4.0]]).is_none());
    }

    #[test]
    fn eigen_and_norm() {
        let e = sym_eigenvalues(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
        assert!((spectral_norm(&[[0.0, 2.0], [0.0, 0.0]]) - 2.0).abs() < 1e-15);
    }
}
