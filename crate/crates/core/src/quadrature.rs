//! Quadrature rules: Gauss-Legendre on an interval and collapsed
//! (Duffy-transformed) product rules on triangles.

use crate::linalg::{add, cross, scale, sub};
use crate::Point;

/// Gauss-Legendre nodes and weights on `[0, 1]`, computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle in barycentric form; weights sum
/// to one so that `area * sum(w_q f(x_q))` approximates the integral.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Collapsed product rule with `n` Gauss points per direction; exact for
    /// polynomials of total degree `2n - 2`.
    pub fn collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xi, wi) in x.iter().zip(&w) {
            for (eta, we) in x.iter().zip(&w) {
                let s = *xi;
                let t = eta * (1.0 - s);
                points.push([1.0 - s - t, s, t]);
                // reference triangle area is 1/2
                weights.push(2.0 * wi * we * (1.0 - s));
            }
        }
        TriangleRule { points, weights }
    }

    /// Edge-midpoint rule, exact for quadratics.
    pub fn midpoints() -> Self {
        TriangleRule {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Integrates `f` over the triangle with vertices `v`.
    pub fn integrate<F: Fn(Point) -> f64>(&self, v: &[Point; 3], f: F) -> f64 {
        let area = triangle_area(v).abs();
        let mut s = 0.0;
        for (b, w) in self.points.iter().zip(&self.weights) {
            s += w * f(barycentric_point(v, b));
        }
        area * s
    }
}

#[inline]
pub fn barycentric_point(v: &[Point; 3], b: &[f64; 3]) -> Point {
    add(add(scale(b[0], v[0]), scale(b[1], v[1])), scale(b[2], v[2]))
}

/// Signed area, positive for counter-clockwise vertices.
#[inline]
pub fn triangle_area(v: &[Point; 3]) -> f64 {
    0.5 * cross(sub(v[1], v[0]), sub(v[2], v[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((q - exact).abs() < 1e-14, "n={n} p={p} q={q}");
            }
        }
    }

    #[test]
    fn collapsed_rule_exact_degree() {
        // int over reference triangle of x^a y^b = a! b! / (a+b+2)!
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for n in 1..7 {
            let rule = TriangleRule::collapsed(n);
            for a in 0..=(2 * n as u32 - 2) {
                for b in 0..=(2 * n as u32 - 2 - a) {
                    let q = rule.integrate(&v, |p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((q - exact).abs() < 1e-14, "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn midpoint_rule_is_quadratic_exact() {
        let v = [[0.2, 0.1], [1.3, 0.4], [0.5, 1.1]];
        let fine = TriangleRule::collapsed(4);
        let mid = TriangleRule::midpoints();
        let f = |p: Point| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1] + 3.0 * p[1] * p[1];
        assert!((fine.integrate(&v, f) - mid.integrate(&v, f)).abs() < 1e-14);
    }
}
