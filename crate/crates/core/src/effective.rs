//! Volume statistics `(ρ, θ)` and the Monte-Carlo effective tensor `A⁰`.

use rayon::prelude::*;

use crate::corrector::{self, CorrectorConfig, CorrectorSolution};
use crate::fem::{p1_gradients, Conductivity};
use crate::geometry::{splitmix64, DeformationMap, InterfaceSpec};
use crate::linalg::{self, Mat2};
use crate::mesh::build_cell_mesh;
use crate::quadrature::gauss_legendre;
use crate::{Error, Point, Result};

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean with `s/√N`; a single sample has zero standard error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Estimate { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeStats {
    /// `E ∫_Y det ∇Φ`.
    pub rho: Estimate,
    /// `E ∫_{Y⁻} det ∇Φ / ρ`.
    pub theta: Estimate,
    pub samples: usize,
}

/// `∫_Y det ∇Φ` over cell `k` by 16 × 16 Gauss panels of order 6.
pub fn cell_volume(map: &DeformationMap, k: [i64; 2]) -> f64 {
    let (x, w) = gauss_legendre(6);
    let panels = 16;
    let hp = 1.0 / panels as f64;
    let mut s = 0.0;
    for pi in 0..panels {
        for pj in 0..panels {
            for (xa, wa) in x.iter().zip(&w) {
                for (xb, wb) in x.iter().zip(&w) {
                    let y = [
                        k[0] as f64 + (pi as f64 + xa) * hp,
                        k[1] as f64 + (pj as f64 + xb) * hp,
                    ];
                    s += wa * wb * hp * hp * linalg::det(&jacobian_in_cell(map, k, y));
                }
            }
        }
    }
    s
}

/// `∫_{Y_k⁻} det ∇Φ` by a polar Gauss × trapezoid rule on the disk.
pub fn inclusion_volume(map: &DeformationMap, spec: &InterfaceSpec, k: [i64; 2]) -> f64 {
    let (x, w) = gauss_legendre(24);
    let n_theta = 128;
    let r = spec.radius;
    let c = [k[0] as f64 + spec.center[0], k[1] as f64 + spec.center[1]];
    let mut s = 0.0;
    for (xr, wr) in x.iter().zip(&w) {
        let rho = r * xr;
        for j in 0..n_theta {
            let t = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            let y = [c[0] + rho * t.cos(), c[1] + rho * t.sin()];
            s += wr * r * rho * (2.0 * std::f64::consts::PI / n_theta as f64) * linalg::det(&jacobian_in_cell(map, k, y));
        }
    }
    s
}

fn jacobian_in_cell(map: &DeformationMap, k: [i64; 2], y: Point) -> Mat2 {
    match map.cell_bump(k) {
        Some(b) => b.jacobian([y[0] - k[0] as f64, y[1] - k[1] as f64]),
        None => map.jacobian(y),
    }
}

/// `(ρ, θ)` from the central cell of each realization.
pub fn volume_stats(map: &DeformationMap, spec: &InterfaceSpec, seeds: &[u64]) -> Result<VolumeStats> {
    if seeds.is_empty() {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    let (full, inner): (Vec<f64>, Vec<f64>) = seeds
        .par_iter()
        .map(|&s| {
            let m = map.with_seed(s);
            (cell_volume(&m, [0, 0]), inclusion_volume(&m, spec, [0, 0]))
        })
        .unzip();
    let rho = Estimate::from_samples(&full);
    let inner = Estimate::from_samples(&inner);
    let theta = Estimate {
        mean: inner.mean / rho.mean,
        stderr: inner.stderr / rho.mean,
    };
    if !(theta.mean > 0.0 && theta.mean < 1.0) || !(rho.mean > 0.0) {
        return Err(Error::InvalidInput(format!(
            "volume statistics out of range: rho = {}, theta = {}",
            rho.mean, theta.mean
        )));
    }
    Ok(VolumeStats {
        rho,
        theta,
        samples: seeds.len(),
    })
}

/// Realization seeds derived from a master seed.
pub fn seed_list(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| splitmix64(master ^ splitmix64(i))).collect()
}

/// Window-averaged fluxes of one realization: `columns[i] = mean_k (F_k⁺ + F_k⁻)(e_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSample {
    pub seed: u64,
    pub columns: [Point; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTensor {
    /// `a⁰_ij = e_j·F(e_i) / ρ`.
    pub a0: Mat2,
    pub stderr: Mat2,
    pub samples: usize,
    pub rho: f64,
    pub theta: f64,
    pub config_hash: Option<String>,
}

/// `A⁰` from per-realization window fluxes, with seed-to-seed standard errors.
/// Random media need at least two samples.
pub fn effective_tensor(samples: &[TensorSample], vol: &VolumeStats, deterministic: bool) -> Result<EffectiveTensor> {
    let required = if deterministic { 1 } else { 2 };
    if samples.len() < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.len(),
        });
    }
    let rho = vol.rho.mean;
    let mut a0 = [[0.0; 2]; 2];
    let mut stderr = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let xs: Vec<f64> = samples.iter().map(|s| s.columns[i][j] / rho).collect();
            let e = Estimate::from_samples(&xs);
            a0[i][j] = e.mean;
            stderr[i][j] = e.stderr;
        }
    }
    Ok(EffectiveTensor {
        a0,
        stderr,
        samples: samples.len(),
        rho,
        theta: vol.theta.mean,
        config_hash: None,
    })
}

/// The three test directions of the energy identity.
pub fn identity_directions() -> [Point; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[1.0, 0.0], [0.0, 1.0], [s, s]]
}

/// Window mean of the jump energy plus `∫ (ξ + ∇w_ξ)·A(ξ + ∇w_ξ)` over the
/// deformed cells, where `w_ξ = ξ₁ w₁ + ξ₂ w₂` by linearity.
pub fn window_energy(w1: &CorrectorSolution, w2: &CorrectorSolution, xi: Point, m: usize) -> f64 {
    let mesh = &w1.mesh;
    let w: Vec<f64> = w1
        .values()
        .iter()
        .zip(w2.values())
        .map(|(a, b)| xi[0] * a + xi[1] * b)
        .collect();
    let inside = |k: [i64; 2]| k.iter().all(|&c| -(m as i64) <= c && c < m as i64);
    let mut s = 0.0;
    let mut cells = std::collections::BTreeSet::new();
    for t in 0..mesh.num_triangles() {
        let k = mesh.cells[t];
        if !inside(k) {
            continue;
        }
        cells.insert((k[1], k[0]));
        let (g, area) = p1_gradients(&mesh.vertices(t));
        let v = mesh.triangles[t].map(|i| w[i]);
        let grad = [
            v[0] * g[0][0] + v[1] * g[1][0] + v[2] * g[2][0],
            v[0] * g[0][1] + v[1] * g[1][1] + v[2] * g[2][1],
        ];
        let q = linalg::add(xi, grad);
        s += area * linalg::quad_form(&w1.conductivity.at(mesh.reference_centroid(t)), q, q);
    }
    for e in 0..mesh.interface_edges.len() {
        if !inside(corrector::edge_cell(mesh, e)) {
            continue;
        }
        let [[p0, m0], [p1, m1]] = mesh.interface_edge_nodes(e);
        let (j0, j1) = (w[p0] - w[m0], w[p1] - w[m1]);
        s += mesh.interface_edge_length(e) / 3.0 * (j0 * j0 + j0 * j1 + j1 * j1);
    }
    s / cells.len().max(1) as f64
}

/// Result of the truncated corrector runs for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    /// Window means of `(F⁺, F⁻)` for `p = e₁, e₂`.
    pub flux: [(Point, Point); 2],
    /// `E_k` profile of the `e₁` corrector.
    pub energy_profile: Vec<f64>,
    /// Window energies for [`identity_directions`].
    pub window_energies: [f64; 3],
    pub iterations: [usize; 2],
}

impl SeedRun {
    pub fn sample(&self) -> TensorSample {
        TensorSample {
            seed: self.seed,
            columns: [
                linalg::add(self.flux[0].0, self.flux[0].1),
                linalg::add(self.flux[1].0, self.flux[1].1),
            ],
        }
    }
}

/// Solves the `e₁` and `e₂` correctors of one realization on a shared mesh.
pub fn run_seed(
    cfg: &CorrectorConfig,
    cell: &crate::mesh::CellMesh,
    map: &DeformationMap,
    conductivity: Conductivity,
    seed: u64,
) -> Result<SeedRun> {
    let cfg = CorrectorConfig { seed, ..*cfg };
    cfg.validate()?;
    let mesh = corrector::truncated_mesh(&cfg, cell, map, [0, 0])?;
    let w1 = corrector::solve_on_mesh(mesh.clone(), [1.0, 0.0], cfg.delta, cfg.n, conductivity, None)?;
    let w2 = corrector::solve_on_mesh(mesh, [0.0, 1.0], cfg.delta, cfg.n, conductivity, None)?;
    let dirs = identity_directions();
    Ok(SeedRun {
        seed,
        flux: [w1.flux_average(cfg.m), w2.flux_average(cfg.m)],
        energy_profile: corrector::energy_profile(&w1),
        window_energies: dirs.map(|xi| window_energy(&w1, &w2, xi, cfg.m)),
        iterations: [w1.fem.iterations, w2.fem.iterations],
    })
}

/// Everything computed by [`run_effective`].
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveRun {
    pub tensor: EffectiveTensor,
    pub volume: VolumeStats,
    pub runs: Vec<SeedRun>,
    /// Energy-identity residuals for [`identity_directions`].
    pub residuals: [f64; 3],
}

/// Corrector runs over `seeds` (in parallel, results in seed order), the
/// volume statistics and the resulting tensor.
pub fn run_effective(
    cfg: &CorrectorConfig,
    spec: &InterfaceSpec,
    map: &DeformationMap,
    conductivity: Conductivity,
    seeds: &[u64],
) -> Result<EffectiveRun> {
    cfg.validate()?;
    let cell = build_cell_mesh(spec, cfg.h)?;
    let runs = seeds
        .par_iter()
        .map(|&s| run_seed(cfg, &cell, map, conductivity, s))
        .collect::<Result<Vec<_>>>()?;
    let volume = volume_stats(map, spec, seeds)?;
    let samples: Vec<TensorSample> = runs.iter().map(SeedRun::sample).collect();
    let tensor = effective_tensor(&samples, &volume, map.is_deterministic())?;
    let residuals = energy_identity_residuals(&tensor, &runs);
    Ok(EffectiveRun {
        tensor,
        volume,
        runs,
        residuals,
    })
}

/// `a⁰ξ·ξ − (1/ρ) E[window energy of ξ]` for each of [`identity_directions`].
pub fn energy_identity_residuals(t: &EffectiveTensor, runs: &[SeedRun]) -> [f64; 3] {
    let dirs = identity_directions();
    let mut out = [0.0; 3];
    for (i, xi) in dirs.iter().enumerate() {
        let mean = runs.iter().map(|r| r.window_energies[i]).sum::<f64>() / runs.len().max(1) as f64;
        out[i] = linalg::quad_form(&t.a0, *xi, *xi) - mean / t.rho;
    }
    out
}

/// Outcome of [`ellipticity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityVerdict {
    pub eigenvalues: [f64; 2],
    /// Largest entry standard error, used for the upper-bound slack.
    pub stderr: f64,
    pub upper_bound: f64,
    pub residuals: Option<[f64; 3]>,
}

/// Checks `0 < λ_min(A⁰)` and `λ_max(A⁰) ≤ Λ + 3 stderr`. The lower constant
/// `λ` is reported by the caller's context only; the effective tensor of a
/// membrane medium may fall below it.
pub fn ellipticity_check(t: &EffectiveTensor, upper: f64, residuals: Option<[f64; 3]>) -> Result<EllipticityVerdict> {
    let sym = [
        [t.a0[0][0], 0.5 * (t.a0[0][1] + t.a0[1][0])],
        [0.5 * (t.a0[0][1] + t.a0[1][0]), t.a0[1][1]],
    ];
    let eigenvalues = linalg::sym_eigenvalues(&sym);
    let stderr = t.stderr.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
    let asym = (t.a0[0][1] - t.a0[1][0]).abs();
    if !(eigenvalues[0] > 0.0) {
        return Err(Error::EllipticityViolation(format!(
            "smallest eigenvalue {} is not positive",
            eigenvalues[0]
        )));
    }
    if eigenvalues[1] > upper + 3.0 * stderr {
        return Err(Error::EllipticityViolation(format!(
            "largest eigenvalue {} exceeds {upper} + 3·{stderr}",
            eigenvalues[1]
        )));
    }
    if asym > 2.0 * stderr + 1e-8 * (1.0 + t.a0[0][0].abs()) {
        return Err(Error::EllipticityViolation(format!(
            "asymmetry {asym} exceeds twice the standard error {stderr}"
        )));
    }
    Ok(EllipticityVerdict {
        eigenvalues,
        stderr,
        upper_bound: upper,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bump;

    #[test]
    fn identity_volumes() {
        let spec = InterfaceSpec::default();
        let v = volume_stats(&DeformationMap::Identity, &spec, &[0]).unwrap();
        assert!((v.rho.mean - 1.0).abs() < 1e-12);
        assert!((v.theta.mean - std::f64::consts::PI / 16.0).abs() < 1e-6);
    }

    #[test]
    fn bump_volumes_match_dense_oracle() {
        let spec = InterfaceSpec::default();
        let bump = Bump::standard(0.1);
        let map = DeformationMap::Bump(bump);
        // 1000 × 1000 polar midpoint grid on the disk
        let n = 1000;
        let mut inner = 0.0;
        for i in 0..n {
            let r = spec.radius * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                let y = [0.5 + r * t.cos(), 0.5 + r * t.sin()];
                inner += r * linalg::det(&bump.jacobian(y));
            }
        }
        inner *= spec.radius / n as f64 * 2.0 * std::f64::consts::PI / n as f64;
        let v = volume_stats(&map, &spec, &[0]).unwrap();
        assert!((v.rho.mean - 1.0).abs() < 1e-12, "{}", v.rho.mean);
        assert!((v.theta.mean - inner).abs() < 1e-6, "{} vs {inner}", v.theta.mean);
    }

    #[test]
    fn single_bumped_cell_volume_is_one() {
        for seed in 0..8 {
            let map = DeformationMap::bernoulli(seed, 0.1);
            assert!((cell_volume(&map, [0, 0]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        let vol = VolumeStats {
            rho: Estimate { mean: 1.0, stderr: 0.0 },
            theta: Estimate { mean: 0.2, stderr: 0.0 },
            samples: 1,
        };
        let s = TensorSample {
            seed: 0,
            columns: [[1.0, 0.0], [0.0, 1.0]],
        };
        assert!(matches!(
            effective_tensor(&[s], &vol, false),
            Err(Error::InsufficientSamples { required: 2, got: 1 })
        ));
        assert!(effective_tensor(&[s], &vol, true).is_ok());
    }

    #[test]
    fn stderr_of_samples() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn non_spd_is_rejected() {
        let t = EffectiveTensor {
            a0: [[1.0, 2.0], [2.0, 1.0]],
            stderr: [[0.0; 2]; 2],
            samples: 4,
            rho: 1.0,
            theta: 0.2,
            config_hash: None,
        };
        assert!(matches!(ellipticity_check(&t, 1.0, None), Err(Error::EllipticityViolation(_))));
        let t = EffectiveTensor {
            a0: [[1.0, 0.0], [0.0, 1.0]],
            ..t
        };
        let v = ellipticity_check(&t, 1.0, None).unwrap();
        assert_eq!(v.eigenvalues, [1.0, 1.0]);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = seed_list(7, 16);
        let b = seed_list(7, 16);
        assert_eq!(a, b);
        let mut c = a.clone();
        c.sort_unstable();
        c.dedup();
        assert_eq!(c.len(), 16);
    }
}
