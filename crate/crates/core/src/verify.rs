//! Independent oracles: the backward-induction bound for energy profiles, a
//! dense direct solver and a surface-integral cross-check.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::fem::{Csr, DiscreteSystem};
use crate::geometry::{DeformationMap, InterfaceSpec};
use crate::linalg;
use crate::{Error, Point, Result};

/// Relative slack when checking hypotheses and conclusions in floating point.
const SLACK: f64 = 1e-12;

/// A sequence `E_1 ≤ … ≤ E_n` with constants `C` and `C₁` in dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InductionInstance {
    /// `values[k - 1] = E_k`.
    pub values: Vec<f64>,
    pub c: f64,
    pub c1: f64,
    pub d: u32,
}

/// Constants of the backward induction and the verified bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductionBound {
    pub beta: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C′ = C₂ (C₃ + 1)`.
    pub c_prime: f64,
    /// `max_k E_k / k^d`.
    pub worst_ratio: f64,
}

fn powd(k: f64, d: u32) -> f64 {
    k.powi(d as i32)
}

impl InductionInstance {
    /// Checks monotonicity, `E_n ≤ C n^d` and `E_k ≤ C₁(E_{k+1} − E_k + (k+1)^d)`.
    pub fn check_hypotheses(&self) -> Result<()> {
        let n = self.values.len();
        if n == 0 || !(self.c > 0.0) || !(self.c1 > 0.0) || self.d == 0 {
            return Err(Error::HypothesisViolation("empty sequence or nonpositive constants".into()));
        }
        let e = &self.values;
        if e.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::HypothesisViolation("values must be finite and nonnegative".into()));
        }
        for k in 1..n {
            if e[k - 1] > e[k] {
                return Err(Error::HypothesisViolation(format!("E_{k} > E_{}", k + 1)));
            }
        }
        let cap = self.c * powd(n as f64, self.d);
        if e[n - 1] > cap * (1.0 + SLACK) {
            return Err(Error::HypothesisViolation(format!("E_n = {} exceeds C n^d = {cap}", e[n - 1])));
        }
        for k in 1..n {
            let rhs = self.c1 * (e[k] - e[k - 1] + powd(k as f64 + 1.0, self.d));
            if e[k - 1] > rhs + SLACK * (rhs.abs() + e[k - 1]) {
                return Err(Error::HypothesisViolation(format!(
                    "recursion fails at k = {k}: {} > {rhs}",
                    e[k - 1]
                )));
            }
        }
        Ok(())
    }
}

/// `C₃ = max_k k^d ((C₁ + 1/β)(1 + 1/k)^d − (C₁ + 1))`, clamped at zero. The
/// bracket is eventually negative because `β > 1`.
fn induction_c3(c1: f64, beta: f64, d: u32) -> f64 {
    let mut best: f64 = 0.0;
    let mut k = 1u64;
    loop {
        let kf = k as f64;
        let term = powd(kf, d) * ((c1 + 1.0 / beta) * powd(1.0 + 1.0 / kf, d) - (c1 + 1.0));
        best = best.max(term);
        // (1 + 1/k)^d decreases to 1, so once negative the bracket stays so
        if term < 0.0 {
            break;
        }
        k += 1;
    }
    best
}

/// Returns the constant `C′` built in the proof (`β = max(2, C/C₁)`,
/// `C₂ = β C₁`, `C₃` as in [`induction_c3`]) after checking `E_k ≤ C′ k^d`.
pub fn backward_induction_bound(inst: &InductionInstance) -> Result<InductionBound> {
    inst.check_hypotheses()?;
    let beta = (inst.c / inst.c1).max(2.0);
    let c2 = beta * inst.c1;
    let c3 = induction_c3(inst.c1, beta, inst.d);
    let c_prime = c2 * (c3 + 1.0);
    let mut worst: f64 = 0.0;
    for (i, &e) in inst.values.iter().enumerate() {
        let kd = powd(i as f64 + 1.0, inst.d);
        worst = worst.max(e / kd);
        if e > c2 * (kd + c3) * (1.0 + SLACK) {
            return Err(Error::HypothesisViolation(format!(
                "E_{} = {e} exceeds C₂(k^d + C₃) = {}",
                i + 1,
                c2 * (kd + c3)
            )));
        }
    }
    if worst > c_prime * (1.0 + SLACK) {
        return Err(Error::HypothesisViolation(format!("E_k/k^d = {worst} exceeds C′ = {c_prime}")));
    }
    Ok(InductionBound {
        beta,
        c2,
        c3,
        c_prime,
        worst_ratio: worst,
    })
}

/// Random instance built backward from `E_n ~ U[0, C n^d]`: each `E_k` is
/// drawn below `min(E_{k+1}, C₁(E_{k+1} + (k+1)^d)/(1 + C₁))`, and sits on
/// that bound with probability 0.3.
pub fn generate_instance<R: Rng>(rng: &mut R, n: usize, c: f64, c1: f64, d: u32) -> InductionInstance {
    let mut values = vec![0.0; n];
    values[n - 1] = rng.gen::<f64>() * c * powd(n as f64, d);
    for k in (1..n).rev() {
        let next = values[k];
        let upper = next.min(c1 * (next + powd(k as f64 + 1.0, d)) / (1.0 + c1));
        values[k - 1] = if rng.gen_bool(0.3) { upper } else { rng.gen::<f64>() * upper };
    }
    InductionInstance { values, c, c1, d }
}

/// Summary of [`induction_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductionSuite {
    pub instances: usize,
    /// Largest `max_k E_k/k^d / C′` seen.
    pub worst_ratio: f64,
    pub max_c_prime: f64,
}

/// Generates `count` instances (`n ∈ [2, 40]`, `C, C₁ ∈ [0.5, 5]`, `d = 2`)
/// from `seed`, self-checks each one and runs the bound on it.
pub fn induction_suite(seed: u64, count: usize) -> Result<InductionSuite> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut max_c_prime: f64 = 0.0;
    for _ in 0..count {
        let n = rng.gen_range(2..=40);
        let c = rng.gen_range(0.5..5.0);
        let c1 = rng.gen_range(0.5..5.0);
        let inst = generate_instance(&mut rng, n, c, c1, 2);
        let bound = backward_induction_bound(&inst)?;
        worst = worst.max(bound.worst_ratio / bound.c_prime);
        max_c_prime = max_c_prime.max(bound.c_prime);
    }
    Ok(InductionSuite {
        instances: count,
        worst_ratio: worst,
        max_c_prime,
    })
}

/// Largest system accepted by the dense oracle.
pub const DENSE_LIMIT: usize = 2000;

/// Solves `K x = b` by dense Cholesky, falling back to full-pivot LU for
/// indefinite input.
pub fn dense_solve(matrix: &Csr, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.n;
    if n > DENSE_LIMIT {
        return Err(Error::InvalidInput(format!("{n} unknowns exceed the dense limit {DENSE_LIMIT}")));
    }
    if rhs.len() != n {
        return Err(Error::InvalidInput("right-hand side length mismatch".into()));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in matrix.row(i) {
            a[(i, j)] += v;
        }
    }
    let b = DVector::from_column_slice(rhs);
    let scale = a.amax();
    if scale == 0.0 {
        return Err(Error::SingularMatrix("zero matrix".into()));
    }
    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale * n as f64 {
        return Err(Error::SingularMatrix(format!(
            "smallest pivot {min_pivot:e} relative to {scale:e}"
        )));
    }
    let x = match a.cholesky() {
        Some(ch) => ch.solve(&b),
        None => lu
            .solve(&b)
            .ok_or_else(|| Error::SingularMatrix("LU solve failed".into()))?,
    };
    Ok(x.iter().copied().collect())
}

/// Nodal solution of `system` by [`dense_solve`] on the free unknowns.
pub fn dense_solve_oracle(system: &DiscreteSystem) -> Result<Vec<f64>> {
    let (k, rhs, free) = system.reduced();
    let x = dense_solve(&k, &rhs)?;
    Ok(system.expand(&free, &x))
}

/// Two evaluations of `∫_{Φ(Γ₀)} f dσ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCheck {
    /// Pullback to `Γ₀` with the normal-gradient factor `|∇Φ^{-T} n| det ∇Φ`.
    pub via_formula: f64,
    /// Midpoint rule on dense polylines through `Φ(Γ₀)`, extrapolated in the
    /// number of segments.
    pub via_parametric: f64,
    pub diff: f64,
}

/// Cross-checks the surface-measure factor against a polyline quadrature of
/// the deformed curve.
pub fn surface_integral_crosscheck(map: &DeformationMap, spec: &InterfaceSpec, f: &dyn Fn(Point) -> f64) -> SurfaceCheck {
    let tau = 2.0 * std::f64::consts::PI;
    let r = spec.radius;
    // trapezoid rule in the angle is spectrally accurate for smooth periodic integrands
    let m = 4096;
    let mut via_formula = 0.0;
    for j in 0..m {
        let t = tau * j as f64 / m as f64;
        let normal = [t.cos(), t.sin()];
        let x = spec.point_at(t);
        via_formula += f(map.apply(x)) * map.surface_factor_normal_form(x, normal) * r * tau / m as f64;
    }
    // the chord error of the midpoint polyline is O(M⁻²); one Richardson step removes it
    let coarse = polyline_integral(map, spec, f, 100_000);
    let fine = polyline_integral(map, spec, f, 200_000);
    let via_parametric = (4.0 * fine - coarse) / 3.0;
    SurfaceCheck {
        via_formula,
        via_parametric,
        diff: (via_formula - via_parametric).abs(),
    }
}

/// Midpoint rule for `f` on the polyline through `M` equally spaced images of `Γ₀`.
pub fn polyline_integral(map: &DeformationMap, spec: &InterfaceSpec, f: &dyn Fn(Point) -> f64, segments: usize) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut s = 0.0;
    let mut prev = map.apply(spec.point_at(0.0));
    for j in 1..=segments {
        let next = map.apply(spec.point_at(tau * j as f64 / segments as f64));
        let mid = linalg::scale(0.5, linalg::add(prev, next));
        s += f(mid) * linalg::dist(prev, next);
        prev = next;
    }
    s
}
