use std::io::Write;

use super::{p1_gradients, BilinearFormSpec, Conductivity};
use crate::linalg;
use crate::mesh::{MembraneMesh, Region};
use crate::quadrature::{barycentric_point, TriangleRule};
use crate::{Point, Result};

/// L² norms of the pieces of a discrete field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// `‖∇u⁺‖_{L²(D⁺)}`.
    pub grad_plus: f64,
    /// `‖∇u⁻‖_{L²(D⁻)}`.
    pub grad_minus: f64,
    /// `‖u⁺ − u⁻‖_{L²(Γ)}`.
    pub jump: f64,
    /// `‖u‖_{L²}` over both regions.
    pub u_l2: f64,
}

impl Norms {
    /// `(‖∇u⁺‖² + ‖∇u⁻‖² + w ‖u⁺ − u⁻‖²)^{1/2}`.
    pub fn weighted(&self, jump_weight: f64) -> f64 {
        (self.grad_plus.powi(2) + self.grad_minus.powi(2) + jump_weight * self.jump.powi(2)).sqrt()
    }
}

fn jump_square_integral(mesh: &MembraneMesh, u: &[f64], e: usize) -> f64 {
    let [[p0, m0], [p1, m1]] = mesh.interface_edge_nodes(e);
    let j0 = u[p0] - u[m0];
    let j1 = u[p1] - u[m1];
    mesh.interface_edge_length(e) / 3.0 * (j0 * j0 + j0 * j1 + j1 * j1)
}

fn mass_square_integral(area: f64, w: [f64; 3]) -> f64 {
    area / 6.0 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[0] * w[1] + w[1] * w[2] + w[0] * w[2])
}

pub fn norms(mesh: &MembraneMesh, u: &[f64]) -> Norms {
    let mut gp = 0.0;
    let mut gm = 0.0;
    let mut l2 = 0.0;
    for t in 0..mesh.num_triangles() {
        let (g, area) = p1_gradients(&mesh.vertices(t));
        let w = mesh.triangles[t].map(|v| u[v]);
        let grad = [
            w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
            w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
        ];
        let gg = area * linalg::dot(grad, grad);
        match mesh.regions[t] {
            Region::Plus => gp += gg,
            Region::Minus => gm += gg,
        }
        l2 += mass_square_integral(area, w);
    }
    let jump: f64 = (0..mesh.interface_edges.len())
        .map(|e| jump_square_integral(mesh, u, e))
        .sum();
    Norms {
        grad_plus: gp.sqrt(),
        grad_minus: gm.sqrt(),
        jump: jump.sqrt(),
        u_l2: l2.sqrt(),
    }
}

/// `a(u, u)` evaluated element by element.
pub fn energy(mesh: &MembraneMesh, spec: &BilinearFormSpec, u: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.num_triangles() {
        let (g, area) = p1_gradients(&mesh.vertices(t));
        let w = mesh.triangles[t].map(|v| u[v]);
        let grad = [
            w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
            w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
        ];
        let a = spec.conductivity.at(mesh.reference_centroid(t));
        s += area * linalg::quad_form(&a, grad, grad) + spec.delta * mass_square_integral(area, w);
    }
    let jump: f64 = (0..mesh.interface_edges.len())
        .map(|e| jump_square_integral(mesh, u, e))
        .sum();
    s + spec.gamma * jump
}

/// `∫ (χ⁺ A∇u⁺ + χ⁻ A∇u⁻)·ψ` with `A` taken at reference centroids.
pub fn flux_pairing(
    mesh: &MembraneMesh,
    conductivity: &Conductivity,
    u: &[f64],
    psi: &dyn Fn(Point) -> Point,
) -> f64 {
    let rule = TriangleRule::collapsed(5);
    let mut s = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.vertices(t);
        let (g, area) = p1_gradients(&v);
        let w = mesh.triangles[t].map(|i| u[i]);
        let grad = [
            w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
            w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
        ];
        let flux = linalg::mat_vec(&conductivity.at(mesh.reference_centroid(t)), grad);
        let mut ipsi = [0.0, 0.0];
        for (b, q) in rule.points.iter().zip(&rule.weights) {
            let p = psi(barycentric_point(&v, b));
            ipsi[0] += q * p[0];
            ipsi[1] += q * p[1];
        }
        s += area * linalg::dot(flux, ipsi);
    }
    s
}

/// `∫_{region} u φ`.
pub fn region_integral(mesh: &MembraneMesh, u: &[f64], region: Region, phi: &dyn Fn(Point) -> f64) -> f64 {
    let rule = TriangleRule::collapsed(5);
    let mut s = 0.0;
    for t in 0..mesh.num_triangles() {
        if mesh.regions[t] != region {
            continue;
        }
        let v = mesh.vertices(t);
        let w = mesh.triangles[t].map(|i| u[i]);
        let area = crate::quadrature::triangle_area(&v);
        for (b, q) in rule.points.iter().zip(&rule.weights) {
            let uq = b[0] * w[0] + b[1] * w[1] + b[2] * w[2];
            s += area * q * uq * phi(barycentric_point(&v, b));
        }
    }
    s
}

/// Writes `node_id,x,y,region,value` rows.
pub fn write_solution_csv<W: Write>(mesh: &MembraneMesh, u: &[f64], mut w: W) -> Result<()> {
    let regions = mesh.node_regions();
    writeln!(w, "node_id,x,y,region,value")?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(
            w,
            "{i},{:.16e},{:.16e},{},{:.16e}",
            p[0],
            p[1],
            match regions[i] {
                Region::Plus => "plus",
                Region::Minus => "minus",
            },
            u[i]
        )?;
    }
    Ok(())
}
