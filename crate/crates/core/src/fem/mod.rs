//! P1 finite elements for the transmission form
//!
//! ```text
//! a(u, v) = Σ_± ∫ A∇u^±·∇v^± + γ ∫_Γ (u⁺ − u⁻)(v⁺ − v⁻) dσ + δ ∫ u v
//! ```
//!
//! with volume loads `∫ f v` and corrector loads `−∫ A p·∇v`.

mod norms;
mod sparse;

pub use norms::{energy, flux_pairing, norms, region_integral, write_solution_csv, Norms};
pub use sparse::{pcg, CgOutcome, Csr};

use rayon::prelude::*;

use crate::linalg::{self, Mat2};
use crate::mesh::{CellMesh, MembraneMesh};
use crate::quadrature::{barycentric_point, TriangleRule};
use crate::{Error, Point, Result};

/// Relative residual target of the linear solver.
pub const SOLVER_TOL: f64 = 1e-10;

/// Conductivity `Ã(y)`, given on the reference (lattice) configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conductivity {
    Identity,
    /// `diag(1 + 0.5 sin²(2π y₁), 1)`.
    Anisotropic,
    Constant(Mat2),
}

impl Conductivity {
    pub fn at(&self, y: Point) -> Mat2 {
        match self {
            Conductivity::Identity => linalg::IDENTITY,
            Conductivity::Anisotropic => {
                let s = (2.0 * std::f64::consts::PI * y[0]).sin();
                [[1.0 + 0.5 * s * s, 0.0], [0.0, 1.0]]
            }
            Conductivity::Constant(m) => *m,
        }
    }

    /// Ellipticity bounds `(λ, Λ)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Conductivity::Identity => (1.0, 1.0),
            Conductivity::Anisotropic => (1.0, 1.5),
            Conductivity::Constant(m) => {
                let e = linalg::sym_eigenvalues(m);
                (e[0], e[1])
            }
        }
    }

    fn check(&self, a: &Mat2) -> Result<()> {
        if (a[0][1] - a[1][0]).abs() > 1e-12 * (1.0 + a[0][1].abs()) {
            return Err(Error::NonEllipticField(format!("asymmetric conductivity {a:?}")));
        }
        let e = linalg::sym_eigenvalues(a);
        if !(e[0] > 0.0) || !e[1].is_finite() {
            return Err(Error::NonEllipticField(format!(
                "conductivity eigenvalues {e:?} not positive"
            )));
        }
        Ok(())
    }
}

/// Coefficients of the bilinear form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearFormSpec {
    pub conductivity: Conductivity,
    /// Interface weight: `1/ε` for the ε-problem, 1 for the corrector.
    pub gamma: f64,
    /// Mass weight.
    pub delta: f64,
}

/// Right-hand side: `∫ f v − ∫ A p·∇v`.
#[derive(Clone, Copy, Default)]
pub struct Load<'a> {
    pub source: Option<&'a (dyn Fn(Point) -> f64 + Sync)>,
    pub direction: Option<Point>,
}

impl<'a> Load<'a> {
    pub fn source(f: &'a (dyn Fn(Point) -> f64 + Sync)) -> Self {
        Load {
            source: Some(f),
            direction: None,
        }
    }

    pub fn corrector(p: Point) -> Self {
        Load {
            source: None,
            direction: Some(p),
        }
    }
}

/// Node-to-unknown numbering; periodic problems identify nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub node_dof: Vec<usize>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn identity(n: usize) -> Self {
        DofMap {
            node_dof: (0..n).collect(),
            n_dofs: n,
        }
    }

    /// Identifies nodes on opposite sides of a single reference cell.
    pub fn periodic(cell: &CellMesh) -> Self {
        let n = cell.side_divisions as u32;
        let mut by_key = std::collections::HashMap::new();
        for (v, key) in cell.lattice.iter().enumerate() {
            if let Some(k) = key {
                by_key.insert(*k, v);
            }
        }
        let mut node_dof = vec![usize::MAX; cell.mesh.num_nodes()];
        let mut n_dofs = 0;
        for v in 0..cell.mesh.num_nodes() {
            let canonical = match cell.lattice[v] {
                Some([gx, gy]) => by_key[&[gx % n, gy % n]],
                None => v,
            };
            if canonical == v {
                node_dof[v] = n_dofs;
                n_dofs += 1;
            }
        }
        for v in 0..cell.mesh.num_nodes() {
            if let Some([gx, gy]) = cell.lattice[v] {
                node_dof[v] = node_dof[by_key[&[gx % n, gy % n]]];
            }
        }
        DofMap { node_dof, n_dofs }
    }
}

/// Assembled linear system together with its Dirichlet data.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Constrained unknowns and their prescribed values.
    pub constrained: Vec<(usize, f64)>,
}

/// Nodal values; interface nodes carry one value per side.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// P1 gradients of the barycentric basis of a triangle, and its area.
pub fn p1_gradients(v: &[Point; 3]) -> ([Point; 3], f64) {
    let area2 = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(v[j][1] - v[k][1]) / area2, (v[k][0] - v[j][0]) / area2];
    }
    (g, 0.5 * area2)
}

/// Two-point Gauss nodes on `[0,1]`.
pub(crate) const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Assembles the form and load over `dofs`.
pub fn assemble(
    mesh: &MembraneMesh,
    spec: &BilinearFormSpec,
    load: Load<'_>,
    dofs: &DofMap,
) -> Result<(Csr, Vec<f64>)> {
    if spec.gamma < 0.0 || spec.delta < 0.0 {
        return Err(Error::InvalidInput("γ and δ must be nonnegative".into()));
    }
    let rule = TriangleRule::midpoints();
    let elements: Vec<Result<([[f64; 3]; 3], [f64; 3])>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let v = mesh.vertices(t);
            let (g, area) = p1_gradients(&v);
            let a = spec.conductivity.at(mesh.reference_centroid(t));
            spec.conductivity.check(&a)?;
            let mut k = [[0.0; 3]; 3];
            for i in 0..3 {
                let ag = linalg::mat_vec(&a, g[i]);
                for j in 0..3 {
                    let mass = if i == j { 2.0 } else { 1.0 } * area / 12.0;
                    k[j][i] = area * linalg::dot(ag, g[j]) + spec.delta * mass;
                }
            }
            let mut f = [0.0; 3];
            if let Some(src) = load.source {
                for (b, w) in rule.points.iter().zip(&rule.weights) {
                    let fx = src(barycentric_point(&v, b));
                    for i in 0..3 {
                        f[i] += w * area * fx * b[i];
                    }
                }
            }
            if let Some(p) = load.direction {
                let ap = linalg::mat_vec(&a, p);
                for i in 0..3 {
                    f[i] -= area * linalg::dot(ap, g[i]);
                }
            }
            Ok((k, f))
        })
        .collect();

    let n = dofs.n_dofs;
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles() + 16 * mesh.interface_edges.len());
    let mut rhs = vec![0.0; n];
    for (t, e) in elements.into_iter().enumerate() {
        let (k, f) = e?;
        let d = mesh.triangles[t].map(|v| dofs.node_dof[v]);
        for i in 0..3 {
            rhs[d[i]] += f[i];
            for j in 0..3 {
                triplets.push((d[i], d[j], k[i][j]));
            }
        }
    }
    if spec.gamma > 0.0 {
        for e in 0..mesh.interface_edges.len() {
            let [[p0, m0], [p1, m1]] = mesh.interface_edge_nodes(e);
            let len = mesh.interface_edge_length(e);
            // edge mass matrix by two-point Gauss
            let mut m = [[0.0; 2]; 2];
            for &s in &GAUSS2 {
                let phi = [1.0 - s, s];
                for a in 0..2 {
                    for b in 0..2 {
                        m[a][b] += 0.5 * len * phi[a] * phi[b];
                    }
                }
            }
            let nodes = [p0, p1, m0, m1];
            let sign = [1.0, 1.0, -1.0, -1.0];
            for a in 0..4 {
                for b in 0..4 {
                    triplets.push((
                        dofs.node_dof[nodes[a]],
                        dofs.node_dof[nodes[b]],
                        spec.gamma * sign[a] * sign[b] * m[a % 2][b % 2],
                    ));
                }
            }
        }
    }
    Ok((Csr::from_triplets(n, &triplets), rhs))
}

impl DiscreteSystem {
    /// Assembles with homogeneous Dirichlet data on `mesh.boundary`.
    pub fn dirichlet(mesh: &MembraneMesh, spec: &BilinearFormSpec, load: Load<'_>) -> Result<Self> {
        let dofs = DofMap::identity(mesh.num_nodes());
        let (matrix, rhs) = assemble(mesh, spec, load, &dofs)?;
        let constrained = mesh.boundary.iter().map(|&b| (b, 0.0)).collect();
        Ok(DiscreteSystem {
            matrix,
            rhs,
            dofs,
            constrained,
        })
    }

    /// Symmetric elimination of the constrained unknowns: returns the free
    /// block, its right-hand side and the free unknown ids.
    pub fn reduced(&self) -> (Csr, Vec<f64>, Vec<usize>) {
        let n = self.dofs.n_dofs;
        let mut keep = vec![true; n];
        let mut fixed = vec![0.0; n];
        for &(d, g) in &self.constrained {
            keep[d] = false;
            fixed[d] = g;
        }
        let lifted = self.matrix.mul(&fixed);
        let (k, free) = self.matrix.restrict(&keep);
        let rhs = free.iter().map(|&i| self.rhs[i] - lifted[i]).collect();
        (k, rhs, free)
    }

    /// Expands free-unknown values to nodal values.
    pub fn expand(&self, free: &[usize], x: &[f64]) -> Vec<f64> {
        let mut dof_values = vec![0.0; self.dofs.n_dofs];
        for &(d, g) in &self.constrained {
            dof_values[d] = g;
        }
        for (&i, &v) in free.iter().zip(x) {
            dof_values[i] = v;
        }
        self.dofs.node_dof.iter().map(|&d| dof_values[d]).collect()
    }

    /// Free-unknown values of nodal values (inverse of `expand` on free dofs).
    pub fn restrict_values(&self, free: &[usize], nodal: &[f64]) -> Vec<f64> {
        let mut dof_values = vec![0.0; self.dofs.n_dofs];
        for (v, &d) in self.dofs.node_dof.iter().enumerate() {
            dof_values[d] = nodal[v];
        }
        free.iter().map(|&i| dof_values[i]).collect()
    }
}

/// Solves the system by Jacobi-preconditioned CG, optionally from a nodal
/// initial guess.
pub fn solve(system: &DiscreteSystem, initial: Option<&[f64]>) -> Result<FemSolution> {
    let (k, rhs, free) = system.reduced();
    let x0 = initial.map(|g| system.restrict_values(&free, g));
    let out = pcg(&k, &rhs, x0.as_deref(), SOLVER_TOL)?;
    Ok(FemSolution {
        values: system.expand(&free, &out.x),
        iterations: out.iterations,
        relative_residual: out.relative_residual,
    })
}
