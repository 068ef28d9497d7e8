//! Comparison of the ε-problem on `D = (0,1)²` with the homogenized
//! constant-coefficient problem `−∇·A⁰∇u₀ = f`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::fem::{self, flux_pairing, norms, p1_gradients, region_integral, BilinearFormSpec, Conductivity, DiscreteSystem, FemSolution, Load};
use crate::geometry::{DeformationMap, InterfaceSpec};
use crate::linalg::{self, Mat2};
use crate::mesh::{tile_domain_mesh, unit_square_mesh, CellMesh, MembraneMesh, MembraneRule, Region};
use crate::quadrature::{barycentric_point, TriangleRule};
use crate::{Error, Point, Result};

/// Resolution of the homogenized reference solve, `h = 1/128`.
pub const HOMOG_DIVISIONS: usize = 128;

pub type Source = dyn Fn(Point) -> f64 + Sync;

/// Solution of the ε-problem together with its mesh.
#[derive(Debug, Clone)]
pub struct HeteroSolution {
    pub eps_inverse: usize,
    pub seed: u64,
    pub mesh: Arc<MembraneMesh>,
    pub fem: FemSolution,
}

/// Mesh of `D_ε`: cells `εΦ(Y_k)` with membranes except in the cushion
/// layer closer than the interface margin to `∂D`.
pub fn hetero_mesh(cell: &CellMesh, map: &DeformationMap, eps_inverse: usize, seed: u64) -> Result<MembraneMesh> {
    let rule = MembraneRule::Cushion { beta: cell.spec.margin() };
    tile_domain_mesh(cell, &map.with_seed(seed), eps_inverse, rule)
}

/// The transmission problem with interface weight `1/ε` and zero Dirichlet
/// data on `∂D`.
pub fn solve_hetero(
    cell: &CellMesh,
    map: &DeformationMap,
    conductivity: Conductivity,
    eps_inverse: usize,
    seed: u64,
    f: &Source,
) -> Result<HeteroSolution> {
    let mesh = hetero_mesh(cell, map, eps_inverse, seed)?;
    let spec = BilinearFormSpec {
        conductivity,
        gamma: eps_inverse as f64,
        delta: 0.0,
    };
    let system = DiscreteSystem::dirichlet(&mesh, &spec, Load::source(f))?;
    let fem = fem::solve(&system, None)?;
    Ok(HeteroSolution {
        eps_inverse,
        seed,
        mesh: Arc::new(mesh),
        fem,
    })
}

/// P1 solution on the uniform `n × n` mesh of the unit square, with O(1)
/// point location.
#[derive(Debug, Clone)]
pub struct GridField {
    pub mesh: MembraneMesh,
    pub values: Vec<f64>,
    pub divisions: usize,
    pub a0: Mat2,
}

impl GridField {
    fn locate(&self, x: Point) -> Result<(usize, [f64; 3])> {
        const SLACK: f64 = 1e-9;
        if !(x[0] >= -SLACK && x[0] <= 1.0 + SLACK && x[1] >= -SLACK && x[1] <= 1.0 + SLACK) {
            return Err(Error::MeshMismatch(format!("point {x:?} outside the unit square")));
        }
        let n = self.divisions;
        let s = [x[0] * n as f64, x[1] * n as f64];
        let i = (s[0].floor().max(0.0) as usize).min(n - 1);
        let j = (s[1].floor().max(0.0) as usize).min(n - 1);
        let (u, v) = (s[0] - i as f64, s[1] - j as f64);
        let base = 2 * (j * n + i);
        // below the diagonal: (i,j) (i+1,j) (i+1,j+1); above: (i,j) (i+1,j+1) (i,j+1)
        if v <= u {
            Ok((base, [1.0 - u, u - v, v]))
        } else {
            Ok((base + 1, [1.0 - v, u, v - u]))
        }
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        let (t, b) = self.locate(x)?;
        let tri = self.mesh.triangles[t];
        Ok(b[0] * self.values[tri[0]] + b[1] * self.values[tri[1]] + b[2] * self.values[tri[2]])
    }
}

/// Constant-coefficient Dirichlet solve on the `1/128` grid.
pub fn solve_homog(a0: Mat2, f: &Source) -> Result<GridField> {
    solve_homog_on(a0, f, HOMOG_DIVISIONS)
}

pub fn solve_homog_on(a0: Mat2, f: &Source, divisions: usize) -> Result<GridField> {
    let mesh = unit_square_mesh(divisions);
    let spec = BilinearFormSpec {
        conductivity: Conductivity::Constant(a0),
        gamma: 0.0,
        delta: 0.0,
    };
    let system = DiscreteSystem::dirichlet(&mesh, &spec, Load::source(f))?;
    let sol = fem::solve(&system, None)?;
    Ok(GridField {
        mesh,
        values: sol.values,
        divisions,
        a0,
    })
}

fn bubble(x: Point) -> f64 {
    (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).powi(2)
}

/// Scalar test functions `b, b x₁, b x₂, b x₁x₂` with
/// `b = (x₁(1−x₁)x₂(1−x₂))²`.
pub fn scalar_tests() -> [fn(Point) -> f64; 4] {
    [
        |x| bubble(x),
        |x| bubble(x) * x[0],
        |x| bubble(x) * x[1],
        |x| bubble(x) * x[0] * x[1],
    ]
}

/// Vector test fields `(b, 0), (0, b), (b x₂, b x₁)`.
pub fn vector_tests() -> [fn(Point) -> Point; 3] {
    [
        |x| [bubble(x), 0.0],
        |x| [0.0, bubble(x)],
        |x| [bubble(x) * x[1], bubble(x) * x[0]],
    ]
}

/// One row of the convergence report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub seed: u64,
    pub eps: f64,
    pub l2_error: f64,
    pub jump_l2: f64,
    pub jump_over_sqrt_eps: f64,
    pub flux_residuals: [f64; 3],
    pub mass_residuals: [f64; 4],
    pub grad_plus: f64,
    pub grad_minus: f64,
}

impl ConvergenceRow {
    pub const CSV_HEADER: &'static str = "seed,eps,l2_error,jump_l2,jump_over_sqrt_eps,flux_res_1,flux_res_2,flux_res_3,mass_res_1,mass_res_2,mass_res_3,mass_res_4,grad_plus,grad_minus";

    pub fn csv_line(&self) -> String {
        let mut s = format!("{},{:.16e}", self.seed, self.eps);
        let fields = [self.l2_error, self.jump_l2, self.jump_over_sqrt_eps]
            .into_iter()
            .chain(self.flux_residuals)
            .chain(self.mass_residuals)
            .chain([self.grad_plus, self.grad_minus]);
        for v in fields {
            s.push_str(&format!(",{v:.16e}"));
        }
        s
    }
}

/// Reference-side pairings of `u₀`: `∫ A⁰∇u₀·ψ_j` and `θ ∫ u₀ φ_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogPairings {
    pub flux: [f64; 3],
    pub mass: [f64; 4],
}

pub fn homog_pairings(u0: &GridField, theta: f64) -> HomogPairings {
    let a = Conductivity::Constant(u0.a0);
    HomogPairings {
        flux: vector_tests().map(|psi| flux_pairing(&u0.mesh, &a, &u0.values, &psi)),
        mass: scalar_tests().map(|phi| theta * region_integral(&u0.mesh, &u0.values, Region::Plus, &phi)),
    }
}

/// `‖u − u₀‖_{L²(D)}` with `u` the piecewise field of `mesh`; `u₀` is
/// evaluated at the quadrature points of `mesh` by point location.
pub fn l2_difference(mesh: &MembraneMesh, u: &[f64], u0: &GridField) -> Result<f64> {
    let rule = TriangleRule::collapsed(4);
    let parts = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let v = mesh.vertices(t);
            let w = mesh.triangles[t].map(|i| u[i]);
            let area = crate::quadrature::triangle_area(&v).abs();
            let mut s = 0.0;
            for (b, q) in rule.points.iter().zip(&rule.weights) {
                let d = b[0] * w[0] + b[1] * w[1] + b[2] * w[2] - u0.eval(barycentric_point(&v, b))?;
                s += q * d * d;
            }
            Ok(area * s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// Error measures of `u_ε` against `u₀`.
pub fn error_suite(
    mesh: &MembraneMesh,
    u: &[f64],
    conductivity: &Conductivity,
    u0: &GridField,
    reference: &HomogPairings,
    eps: f64,
    seed: u64,
) -> Result<ConvergenceRow> {
    let n = norms(mesh, u);
    let flux = vector_tests().map(|psi| flux_pairing(mesh, conductivity, u, &psi));
    let mass = scalar_tests().map(|phi| region_integral(mesh, u, Region::Minus, &phi));
    let mut flux_residuals = [0.0; 3];
    let mut mass_residuals = [0.0; 4];
    for j in 0..3 {
        flux_residuals[j] = (flux[j] - reference.flux[j]).abs();
    }
    for j in 0..4 {
        mass_residuals[j] = (mass[j] - reference.mass[j]).abs();
    }
    Ok(ConvergenceRow {
        seed,
        eps,
        l2_error: l2_difference(mesh, u, u0)?,
        jump_l2: n.jump,
        jump_over_sqrt_eps: n.jump / eps.sqrt(),
        flux_residuals,
        mass_residuals,
        grad_plus: n.grad_plus,
        grad_minus: n.grad_minus,
    })
}

/// Least-squares fit of `log e = a + s log ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub r_squared: f64,
}

pub fn rate_fit(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps.len() != errors.len() || eps.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 matching points, got {} and {}",
            eps.len(),
            errors.len()
        )));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 1e-14)) {
        return Err(Error::DegenerateFit(format!("error value {e} too small to fit")));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all ε values coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        exponent: slope,
        r_squared,
    })
}

/// Inputs of an ε-sweep.
#[derive(Clone)]
pub struct SweepConfig<'a> {
    pub spec: InterfaceSpec,
    pub map: DeformationMap,
    pub conductivity: Conductivity,
    pub h: f64,
    /// `1/ε` values, increasing.
    pub eps_inverses: Vec<usize>,
    pub seeds: Vec<u64>,
    pub a0: Mat2,
    pub theta: f64,
    pub source: &'a Source,
}

/// Runs every `(seed, ε)` pair in parallel; rows come back ordered by seed,
/// then by decreasing ε.
pub fn run_sweep(cfg: &SweepConfig<'_>) -> Result<Vec<ConvergenceRow>> {
    if cfg.eps_inverses.windows(2).any(|w| w[0] >= w[1]) || cfg.eps_inverses.is_empty() {
        return Err(Error::InvalidInput("ε values must be strictly decreasing".into()));
    }
    let cell = crate::mesh::build_cell_mesh(&cfg.spec, cfg.h)?;
    let u0 = solve_homog(cfg.a0, cfg.source)?;
    let reference = homog_pairings(&u0, cfg.theta);
    let tasks: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.eps_inverses.iter().map(move |&e| (s, e)))
        .collect();
    tasks
        .par_iter()
        .map(|&(seed, k)| {
            let sol = solve_hetero(&cell, &cfg.map, cfg.conductivity, k, seed, cfg.source)?;
            error_suite(&sol.mesh, &sol.fem.values, &cfg.conductivity, &u0, &reference, 1.0 / k as f64, seed)
        })
        .collect()
}

/// `(‖∇u⁺‖ + ‖∇u⁻‖) / ‖f‖` of a row.
pub fn energy_ratio(row: &ConvergenceRow, f_l2: f64) -> f64 {
    (row.grad_plus + row.grad_minus) / f_l2
}

/// `(max − min) / max` of positive values.
pub fn relative_variation(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return 0.0;
    }
    (max - min) / max
}

/// `‖f‖_{L²(D)}` by a 64 × 64 Gauss panel rule.
pub fn source_l2(f: &Source) -> f64 {
    let mesh = unit_square_mesh(64);
    let rule = TriangleRule::collapsed(4);
    (0..mesh.num_triangles())
        .map(|t| rule.integrate(&mesh.vertices(t), |x| f(x).powi(2)))
        .sum::<f64>()
        .sqrt()
}

/// Gradient of a P1 field on triangle `t`.
pub fn triangle_gradient(mesh: &MembraneMesh, u: &[f64], t: usize) -> Point {
    let (g, _) = p1_gradients(&mesh.vertices(t));
    let w = mesh.triangles[t].map(|i| u[i]);
    linalg::add(
        linalg::add(linalg::scale(w[0], g[0]), linalg::scale(w[1], g[1])),
        linalg::scale(w[2], g[2]),
    )
}
