//! The regularized corrector on the truncated cube `Φ(Q_n)` and the periodic
//! single-cell oracle.
//!
//! For a direction `p` the truncated corrector `w` solves
//!
//! ```text
//! Σ_± ∫ A∇w^±·∇φ^± + ∫_Γ (w⁺ − w⁻)(φ⁺ − φ⁻) + δ ∫ w φ = −Σ_± ∫ A p·∇φ^±
//! ```
//!
//! with `w = 0` on `∂Φ(Q_n)`. Per-cell fluxes `F_k^± = ∫_{Φ(Y_k^±)} A(p + ∇w)`
//! feed the effective tensor.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::fem::{self, p1_gradients, BilinearFormSpec, Conductivity, DiscreteSystem, DofMap, FemSolution, Load};
use crate::geometry::{DeformationMap, InterfaceSpec};
use crate::linalg;
use crate::mesh::{build_cell_mesh, build_window_mesh_with, CellMesh, MembraneMesh, MembraneRule, Region};
use crate::{Error, Point, Result};

/// Parameters of one truncated corrector solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorConfig {
    pub direction: Point,
    pub delta: f64,
    /// Half-width `n` of `Q_n = (−n, n)²`.
    pub n: usize,
    /// Half-width of the averaging window `Q_m`.
    pub m: usize,
    pub h: f64,
    pub seed: u64,
    /// `false` removes every membrane (a plain conductivity problem).
    pub membranes: bool,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig {
            direction: [1.0, 0.0],
            delta: 1e-3,
            n: 8,
            m: 4,
            h: 0.05,
            seed: 0,
            membranes: true,
        }
    }
}

impl CorrectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidInput(format!("delta = {} outside (0, 1]", self.delta)));
        }
        if self.m < 1 || self.m >= self.n {
            return Err(Error::InvalidInput(format!(
                "window m = {} must satisfy 1 ≤ m ≤ n − 1 with n = {}",
                self.m, self.n
            )));
        }
        if !self.direction.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("direction must be finite".into()));
        }
        Ok(())
    }
}

/// Integrals of the corrector over one lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub cell: [i64; 2],
    /// `∫_{Φ(Y_k⁺)} A(p + ∇w⁺)`.
    pub flux_plus: Point,
    /// `∫_{Φ(Y_k⁻)} A(p + ∇w⁻)`.
    pub flux_minus: Point,
    /// `‖w⁺ − w⁻‖²` on `Φ(Γ_k)`.
    pub jump_sq: f64,
    /// Contribution of the cell to `E_k`, measured on the reference cell.
    pub reference_energy: f64,
}

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub direction: Point,
    pub delta: f64,
    /// `n` for truncated solves, 0 for the periodic oracle.
    pub half_width: usize,
    pub mesh: Arc<MembraneMesh>,
    pub conductivity: Conductivity,
    pub fem: FemSolution,
    /// Sorted by `(k₂, k₁)`.
    pub cells: Vec<CellRecord>,
}

fn in_window(k: [i64; 2], m: usize) -> bool {
    let m = m as i64;
    k.iter().all(|&c| -m <= c && c < m)
}

impl CorrectorSolution {
    pub fn values(&self) -> &[f64] {
        &self.fem.values
    }

    /// Records of the cells in `Q_m`. The periodic oracle has the single cell
    /// `(0, 0)`, which every window contains.
    pub fn window(&self, m: usize) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(move |c| in_window(c.cell, m))
    }

    /// Mean of `(F⁺, F⁻)` over the cells of `Q_m`.
    pub fn flux_average(&self, m: usize) -> (Point, Point) {
        let mut plus = [0.0; 2];
        let mut minus = [0.0; 2];
        let mut count = 0usize;
        for c in self.window(m) {
            plus = linalg::add(plus, c.flux_plus);
            minus = linalg::add(minus, c.flux_minus);
            count += 1;
        }
        let s = 1.0 / count.max(1) as f64;
        (linalg::scale(s, plus), linalg::scale(s, minus))
    }

    /// Mean of `F⁺ + F⁻` over `Q_m`.
    pub fn total_flux_average(&self, m: usize) -> Point {
        let (p, q) = self.flux_average(m);
        linalg::add(p, q)
    }
}

/// `E_k` for `k = 1..=n`: gradient energy of both pieces, `δ`-mass and
/// interface jump of `w̃ = w∘Φ`, accumulated over the reference cube `Q_k`.
pub fn energy_profile(sol: &CorrectorSolution) -> Vec<f64> {
    let n = sol.half_width;
    let mut shells = vec![0.0; n + 1];
    for c in &sol.cells {
        // smallest k with the cell inside Q_k
        let k = c.cell.iter().map(|&x| if x >= 0 { x + 1 } else { -x }).max().unwrap_or(1) as usize;
        if k <= n {
            shells[k] += c.reference_energy;
        }
    }
    let mut acc = 0.0;
    shells[1..]
        .iter()
        .map(|e| {
            acc += e;
            acc
        })
        .collect()
}

/// `s_n = max |w| / n` for solutions given as `(n, nodal values)`.
pub fn sublinearity_diagnostic(runs: &[(usize, &[f64])]) -> Vec<f64> {
    runs.iter()
        .map(|(n, w)| {
            let max = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            max / (*n).max(1) as f64
        })
        .collect()
}

fn grad(g: &[Point; 3], w: [f64; 3]) -> Point {
    [
        w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
        w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
    ]
}

fn edge_jump_sq(j0: f64, j1: f64, len: f64) -> f64 {
    len / 3.0 * (j0 * j0 + j0 * j1 + j1 * j1)
}

fn mass_sq(area: f64, w: [f64; 3]) -> f64 {
    area / 6.0 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[0] * w[1] + w[1] * w[2] + w[0] * w[2])
}

/// Lattice cell containing the reference midpoint of interface edge `e`.
pub(crate) fn edge_cell(mesh: &MembraneMesh, e: usize) -> [i64; 2] {
    let [[a, _], [b, _]] = mesh.interface_edge_nodes(e);
    let (ra, rb) = (mesh.reference[a], mesh.reference[b]);
    [
        (0.5 * (ra[0] + rb[0])).floor() as i64,
        (0.5 * (ra[1] + rb[1])).floor() as i64,
    ]
}

fn record(map: &mut BTreeMap<(i64, i64), CellRecord>, k: [i64; 2]) -> &mut CellRecord {
    map.entry((k[1], k[0])).or_insert(CellRecord {
        cell: k,
        flux_plus: [0.0; 2],
        flux_minus: [0.0; 2],
        jump_sq: 0.0,
        reference_energy: 0.0,
    })
}

/// Per-cell fluxes, jumps and reference energies of the field `w`.
pub fn cell_records(
    mesh: &MembraneMesh,
    conductivity: &Conductivity,
    delta: f64,
    p: Point,
    w: &[f64],
) -> Vec<CellRecord> {
    let mut map: BTreeMap<(i64, i64), CellRecord> = BTreeMap::new();
    for t in 0..mesh.num_triangles() {
        let vals = mesh.triangles[t].map(|v| w[v]);
        let (g, area) = p1_gradients(&mesh.vertices(t));
        let a = conductivity.at(mesh.reference_centroid(t));
        let flux = linalg::scale(area, linalg::mat_vec(&a, linalg::add(p, grad(&g, vals))));
        let (gr, area_r) = p1_gradients(&mesh.reference_vertices(t));
        let gw = grad(&gr, vals);
        let e = area_r * linalg::dot(gw, gw) + delta * mass_sq(area_r, vals);
        let rec = record(&mut map, mesh.cells[t]);
        match mesh.regions[t] {
            Region::Plus => rec.flux_plus = linalg::add(rec.flux_plus, flux),
            Region::Minus => rec.flux_minus = linalg::add(rec.flux_minus, flux),
        }
        rec.reference_energy += e;
    }
    for e in 0..mesh.interface_edges.len() {
        let [[p0, m0], [p1, m1]] = mesh.interface_edge_nodes(e);
        let (j0, j1) = (w[p0] - w[m0], w[p1] - w[m1]);
        let len = mesh.interface_edge_length(e);
        let len_r = linalg::dist(mesh.reference[p0], mesh.reference[p1]);
        let rec = record(&mut map, edge_cell(mesh, e));
        rec.jump_sq += edge_jump_sq(j0, j1, len);
        rec.reference_energy += edge_jump_sq(j0, j1, len_r);
    }
    map.into_values().collect()
}

/// Mesh of `Φ(o + Q_n)` for the realization `cfg.seed` of `map`; the
/// truncated cube is the case `shift = 0`.
pub fn truncated_mesh(cfg: &CorrectorConfig, cell: &CellMesh, map: &DeformationMap, shift: [i64; 2]) -> Result<Arc<MembraneMesh>> {
    let n = cfg.n as i64;
    let map = map.with_seed(cfg.seed);
    let rule = if cfg.membranes { MembraneRule::All } else { MembraneRule::Off };
    build_window_mesh_with(cell, &map, [shift[0] - n, shift[1] - n], 2 * cfg.n, rule).map(Arc::new)
}

/// Solves the truncated problem for direction `p` on a prepared mesh.
pub fn solve_on_mesh(
    mesh: Arc<MembraneMesh>,
    p: Point,
    delta: f64,
    half_width: usize,
    conductivity: Conductivity,
    initial: Option<&[f64]>,
) -> Result<CorrectorSolution> {
    let spec = BilinearFormSpec {
        conductivity,
        gamma: 1.0,
        delta,
    };
    let system = DiscreteSystem::dirichlet(&mesh, &spec, Load::corrector(p))?;
    let fem = fem::solve(&system, initial)?;
    let cells = cell_records(&mesh, &conductivity, delta, p, &fem.values);
    Ok(CorrectorSolution {
        direction: p,
        delta,
        half_width,
        mesh,
        conductivity,
        fem,
        cells,
    })
}

/// Truncated corrector on `Φ(Q_n)` for the interface `spec`.
pub fn solve_truncated(
    cfg: &CorrectorConfig,
    spec: &InterfaceSpec,
    map: &DeformationMap,
    conductivity: Conductivity,
) -> Result<CorrectorSolution> {
    cfg.validate()?;
    let cell = build_cell_mesh(spec, cfg.h)?;
    let mesh = truncated_mesh(cfg, &cell, map, [0, 0])?;
    solve_on_mesh(mesh, cfg.direction, cfg.delta, cfg.n, conductivity, None)
}

/// Single-cell corrector with periodic identification of `∂Y`, `Φ = Id`,
/// `δ = 0`, gauged to zero mean on the PLUS region.
pub fn periodic_cell_solve(p: Point, spec: &InterfaceSpec, conductivity: Conductivity, h: f64) -> Result<CorrectorSolution> {
    let cell = build_cell_mesh(spec, h)?;
    periodic_solve_on_cell(p, &cell, conductivity)
}

pub fn periodic_solve_on_cell(p: Point, cell: &CellMesh, conductivity: Conductivity) -> Result<CorrectorSolution> {
    let mesh = &cell.mesh;
    let form = BilinearFormSpec {
        conductivity,
        gamma: 1.0,
        delta: 0.0,
    };
    let dofs = DofMap::periodic(cell);
    let (matrix, rhs) = fem::assemble(mesh, &form, Load::corrector(p), &dofs)?;
    let regions = mesh.node_regions();
    let pinned = (0..mesh.num_nodes())
        .find(|&v| regions[v] == Region::Plus)
        .map(|v| dofs.node_dof[v])
        .ok_or_else(|| Error::InvalidInput("cell has no PLUS region".into()))?;
    let system = DiscreteSystem {
        matrix,
        rhs,
        dofs,
        constrained: vec![(pinned, 0.0)],
    };
    let mut fem = fem::solve(&system, None)?;
    let mut integral = 0.0;
    let mut area = 0.0;
    for t in 0..mesh.num_triangles() {
        if mesh.regions[t] == Region::Plus {
            let a = mesh.triangle_area(t);
            let s: f64 = mesh.triangles[t].iter().map(|&v| fem.values[v]).sum();
            integral += a * s / 3.0;
            area += a;
        }
    }
    let mean = integral / area;
    for v in fem.values.iter_mut() {
        *v -= mean;
    }
    let cells = cell_records(mesh, &conductivity, 0.0, p, &fem.values);
    Ok(CorrectorSolution {
        direction: p,
        delta: 0.0,
        half_width: 0,
        mesh: Arc::new(mesh.clone()),
        conductivity,
        fem,
        cells,
    })
}

/// PLUS-region mean of a nodal field.
pub fn plus_mean(mesh: &MembraneMesh, w: &[f64]) -> f64 {
    let mut integral = 0.0;
    let mut area = 0.0;
    for t in 0..mesh.num_triangles() {
        if mesh.regions[t] == Region::Plus {
            let a = mesh.triangle_area(t);
            integral += a * mesh.triangles[t].iter().map(|&v| w[v]).sum::<f64>() / 3.0;
            area += a;
        }
    }
    integral / area
}

/// Effective scalar `e₁·∫_Y A(e₁ + ∇w)` of the periodic oracle at mesh sizes
/// `h` and `2h`, extrapolated assuming second-order convergence.
pub fn periodic_reference_scalar(spec: &InterfaceSpec, conductivity: Conductivity, h: f64) -> Result<RichardsonEstimate> {
    let fine = periodic_cell_solve([1.0, 0.0], spec, conductivity, h)?.total_flux_average(1)[0];
    let coarse = periodic_cell_solve([1.0, 0.0], spec, conductivity, 2.0 * h)?.total_flux_average(1)[0];
    Ok(RichardsonEstimate::new(fine, coarse, 2.0, 2.0))
}

/// Two-level Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonEstimate {
    pub fine: f64,
    pub coarse: f64,
    pub extrapolated: f64,
}

impl RichardsonEstimate {
    pub fn new(fine: f64, coarse: f64, ratio: f64, order: f64) -> Self {
        let f = ratio.powf(order);
        RichardsonEstimate {
            fine,
            coarse,
            extrapolated: fine + (fine - coarse) / (f - 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(p: Point) -> CorrectorConfig {
        CorrectorConfig {
            direction: p,
            delta: 1e-2,
            n: 2,
            m: 1,
            h: 0.1,
            seed: 3,
            membranes: true,
        }
    }

    #[test]
    fn config_validation() {
        assert!(CorrectorConfig::default().validate().is_ok());
        for bad in [
            CorrectorConfig { delta: 0.0, ..Default::default() },
            CorrectorConfig { delta: 1.5, ..Default::default() },
            CorrectorConfig { m: 0, ..Default::default() },
            CorrectorConfig { m: 8, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidInput(_))));
        }
    }

    #[test]
    fn zero_direction_gives_zero() {
        let s = solve_truncated(&small_cfg([0.0, 0.0]), &InterfaceSpec::default(), &DeformationMap::Identity, Conductivity::Identity).unwrap();
        assert!(s.values().iter().all(|v| v.abs() < 1e-10));
        assert!(energy_profile(&s).iter().all(|&e| e == 0.0));
        assert_eq!(sublinearity_diagnostic(&[(2, s.values())]), vec![0.0]);
    }

    #[test]
    fn linear_in_direction() {
        let spec = InterfaceSpec::default();
        let map = DeformationMap::bernoulli(1, 0.1);
        let a = solve_truncated(&small_cfg([1.0, 0.0]), &spec, &map, Conductivity::Anisotropic).unwrap();
        let b = solve_truncated(&small_cfg([2.0, 0.0]), &spec, &map, Conductivity::Anisotropic).unwrap();
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((2.0 * x - y).abs() < 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn dirichlet_trace_vanishes() {
        let s = solve_truncated(&small_cfg([0.6, 0.8]), &InterfaceSpec::default(), &DeformationMap::Identity, Conductivity::Identity).unwrap();
        for &b in &s.mesh.boundary {
            assert_eq!(s.values()[b], 0.0);
        }
        assert_eq!(s.cells.len(), 16);
    }

    #[test]
    fn energy_profile_matches_direct_sum_and_grows() {
        let s = solve_truncated(&small_cfg([1.0, 0.0]), &InterfaceSpec::default(), &DeformationMap::bernoulli(5, 0.1), Conductivity::Identity).unwrap();
        let e = energy_profile(&s);
        assert_eq!(e.len(), 2);
        assert!(e[0] > 0.0 && e[1] >= e[0]);
        // E_n over the whole reference cube equals the form evaluated on the
        // reference mesh
        let mut reference = (*s.mesh).clone();
        reference.nodes = reference.reference.clone();
        let form = BilinearFormSpec {
            conductivity: Conductivity::Identity,
            gamma: 1.0,
            delta: s.delta,
        };
        let direct = fem::energy(&reference, &form, s.values());
        assert!((e[1] - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn periodic_gauge_and_symmetry() {
        let spec = InterfaceSpec::default();
        let c = build_cell_mesh(&spec, 0.1).unwrap();
        let s1 = periodic_solve_on_cell([1.0, 0.0], &c, Conductivity::Identity).unwrap();
        let s2 = periodic_solve_on_cell([0.0, 1.0], &c, Conductivity::Identity).unwrap();
        assert!(plus_mean(&c.mesh, s1.values()).abs() < 1e-12);
        let f1 = s1.total_flux_average(1);
        let f2 = s2.total_flux_average(1);
        assert!((f1[0] - f2[1]).abs() < 1e-6);
        assert!(f1[1].abs() < 1e-6 && f2[0].abs() < 1e-6);
        assert!(f1[0] < 1.0 && f1[0] > 0.5);
    }

    #[test]
    fn periodic_zero_direction() {
        let s = periodic_cell_solve([0.0, 0.0], &InterfaceSpec::default(), Conductivity::Identity, 0.1).unwrap();
        assert!(s.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn small_inclusion_barely_resists() {
        let spec = InterfaceSpec::circle(0.02).unwrap();
        let s = periodic_cell_solve([1.0, 0.0], &spec, Conductivity::Identity, 0.05).unwrap();
        let f = s.total_flux_average(1);
        assert!((f[0] - 1.0).abs() < 2e-2 && f[1].abs() < 2e-2, "{f:?}");
    }

    #[test]
    fn initial_guess_does_not_matter() {
        let cfg = small_cfg([1.0, 0.0]);
        let a = solve_truncated(&cfg, &InterfaceSpec::default(), &DeformationMap::Identity, Conductivity::Identity).unwrap();
        let guess: Vec<f64> = (0..a.values().len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let b = solve_on_mesh(a.mesh.clone(), cfg.direction, cfg.delta, cfg.n, Conductivity::Identity, Some(&guess)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn richardson_removes_quadratic_term() {
        let f = |h: f64| 0.7 + 3.0 * h * h;
        let r = RichardsonEstimate::new(f(0.1), f(0.2), 2.0, 2.0);
        assert!((r.extrapolated - 0.7).abs() < 1e-14);
    }
}
