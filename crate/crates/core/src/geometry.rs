//! Unit-cell interface, cellwise deformation maps and surface-measure factors.
//!
//! Every deformation shipped here is the identity on the lattice lines
//! `{y : y_1 ∈ ℤ or y_2 ∈ ℤ}`, so each cell `Y_k = k + [0,1)²` is mapped onto
//! itself. A Bernoulli realization deforms cell `k` by the bump map when the
//! bit `X_k` is set and leaves it untouched otherwise.

use crate::linalg::{self, Mat2, IDENTITY};
use crate::{Error, Point, Result};

/// Closed interface `Γ₀` inside the unit cell: a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSpec {
    pub center: Point,
    pub radius: f64,
}

impl Default for InterfaceSpec {
    fn default() -> Self {
        InterfaceSpec {
            center: [0.5, 0.5],
            radius: 0.25,
        }
    }
}

impl InterfaceSpec {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        let spec = InterfaceSpec { center, radius };
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidInput(format!(
                "interface radius must lie in (0, 0.5), got {radius}"
            )));
        }
        if spec.margin() <= 0.0 {
            return Err(Error::InvalidInput(
                "interface must lie strictly inside the unit cell".into(),
            ));
        }
        Ok(spec)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new([0.5, 0.5], radius)
    }

    /// Distance from the interface to the cell boundary (β).
    pub fn margin(&self) -> f64 {
        let c = self.center;
        let d = c[0].min(1.0 - c[0]).min(c[1]).min(1.0 - c[1]);
        d - self.radius
    }

    /// Point on the circle at angle `angle` (radians).
    pub fn point_at(&self, angle: f64) -> Point {
        [
            self.center[0] + self.radius * angle.cos(),
            self.center[1] + self.radius * angle.sin(),
        ]
    }

    /// Area of the enclosed region `Y⁻`.
    pub fn inner_area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius
    }
}

/// `splitmix64` finalizer, used as a counter-based generator.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// I.i.d. fair bits indexed by cells of ℤ², keyed by a master seed.
///
/// A bit depends only on `(seed, k + shift)`; the evaluation order is
/// irrelevant. `shift` realizes the lattice action `τ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernoulliField {
    pub seed: u64,
    pub shift: [i64; 2],
}

impl BernoulliField {
    pub fn new(seed: u64) -> Self {
        BernoulliField { seed, shift: [0, 0] }
    }

    pub fn bit(&self, k: [i64; 2]) -> bool {
        let kx = k[0].wrapping_add(self.shift[0]) as u64;
        let ky = k[1].wrapping_add(self.shift[1]) as u64;
        let h = splitmix64(splitmix64(self.seed ^ 0x5851_F42D_4C95_7F2D) ^ kx);
        let h = splitmix64(h ^ ky.rotate_left(29));
        h >> 63 == 1
    }

    /// The shifted field `τ_k ω`: its bit at `ℓ` is the original bit at `ℓ + k`.
    pub fn shifted(&self, k: [i64; 2]) -> Self {
        BernoulliField {
            seed: self.seed,
            shift: [self.shift[0] + k[0], self.shift[1] + k[1]],
        }
    }
}

/// Compactly supported bump deformation of the unit cell,
/// `Φ₁(y) = y + a ψ(|y − c| / R) u` with `ψ(ρ) = exp(−1/(1 − ρ²))` for
/// `ρ < 1` and zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: Point,
    pub support_radius: f64,
    pub direction: Point,
}

impl Bump {
    /// Bump centered in the cell with support radius 1/2 and direction `e₁`.
    pub fn standard(amplitude: f64) -> Self {
        Bump {
            amplitude,
            center: [0.5, 0.5],
            support_radius: 0.5,
            direction: [1.0, 0.0],
        }
    }

    fn q(&self, y: Point) -> f64 {
        let d = linalg::sub(y, self.center);
        linalg::dot(d, d) / (self.support_radius * self.support_radius)
    }

    /// Mollifier value `ψ(|y − c| / R)`.
    pub fn profile(&self, y: Point) -> f64 {
        let q = self.q(y);
        if q >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - q)).exp()
        }
    }

    /// Gradient of the mollifier profile.
    pub fn profile_gradient(&self, y: Point) -> Point {
        let q = self.q(y);
        if q >= 1.0 {
            return [0.0, 0.0];
        }
        let h = (-1.0 / (1.0 - q)).exp();
        let dh = -h / ((1.0 - q) * (1.0 - q));
        let r2 = self.support_radius * self.support_radius;
        let d = linalg::sub(y, self.center);
        [dh * 2.0 * d[0] / r2, dh * 2.0 * d[1] / r2]
    }

    /// Hessian of the mollifier profile.
    pub fn profile_hessian(&self, y: Point) -> Mat2 {
        let q = self.q(y);
        if q >= 1.0 {
            return [[0.0; 2]; 2];
        }
        let h = (-1.0 / (1.0 - q)).exp();
        let omq = 1.0 - q;
        let dh = -h / (omq * omq);
        let d2h = h * (2.0 * q - 1.0) / (omq * omq * omq * omq);
        let r2 = self.support_radius * self.support_radius;
        let d = linalg::sub(y, self.center);
        let gq = [2.0 * d[0] / r2, 2.0 * d[1] / r2];
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = d2h * gq[i] * gq[j] + if i == j { dh * 2.0 / r2 } else { 0.0 };
            }
        }
        m
    }

    /// Displacement `Φ₁(y) − y` in cell-local coordinates.
    pub fn displacement(&self, y: Point) -> Point {
        linalg::scale(self.amplitude * self.profile(y), self.direction)
    }

    /// Jacobian `∇Φ₁(y) = I + a u ⊗ ∇ψ`.
    pub fn jacobian(&self, y: Point) -> Mat2 {
        let g = self.profile_gradient(y);
        let a = self.amplitude;
        let u = self.direction;
        [
            [1.0 + a * u[0] * g[0], a * u[0] * g[1]],
            [a * u[1] * g[0], 1.0 + a * u[1] * g[1]],
        ]
    }
}

/// Bounds sampled on a dense grid: `μ ≤ det ∇Φ`, `|∇Φ| ≤ M`, `|D²Φ| ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBounds {
    pub mu: f64,
    pub m: f64,
    /// Bound on `|∇Ψ|`, with `Ψ = Φ⁻¹`.
    pub m_inverse: f64,
}

/// The random (or deterministic) diffeomorphism `Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeformationMap {
    Identity,
    /// The same bump in every cell (a deterministic periodic deformation).
    Bump(Bump),
    /// Cell `k` carries the bump iff the bit `X_k` is set.
    BernoulliCellwise { field: BernoulliField, bump: Bump },
    /// Uniform similarity `y ↦ s y`. It moves cell boundaries and is only meant
    /// for surface-measure cross-checks.
    Scaling(f64),
}

impl DeformationMap {
    pub fn bernoulli(seed: u64, amplitude: f64) -> Self {
        DeformationMap::BernoulliCellwise {
            field: BernoulliField::new(seed),
            bump: Bump::standard(amplitude),
        }
    }

    /// Same map with the Bernoulli seed replaced; deterministic maps are
    /// returned unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        match *self {
            DeformationMap::BernoulliCellwise { bump, .. } => DeformationMap::BernoulliCellwise {
                field: BernoulliField::new(seed),
                bump,
            },
            other => other,
        }
    }

    /// The shifted realization `τ_k ω`.
    pub fn shifted(&self, k: [i64; 2]) -> Self {
        match *self {
            DeformationMap::BernoulliCellwise { field, bump } => DeformationMap::BernoulliCellwise {
                field: field.shifted(k),
                bump,
            },
            other => other,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, DeformationMap::BernoulliCellwise { .. })
    }

    /// Whether cell boundaries are fixed, i.e. the map acts cell by cell.
    pub fn is_cellwise(&self) -> bool {
        !matches!(self, DeformationMap::Scaling(_))
    }

    /// Bump acting on cell `k`, if any.
    pub fn cell_bump(&self, k: [i64; 2]) -> Option<&Bump> {
        match self {
            DeformationMap::Identity | DeformationMap::Scaling(_) => None,
            DeformationMap::Bump(b) => Some(b),
            DeformationMap::BernoulliCellwise { field, bump } => {
                if field.bit(k) {
                    Some(bump)
                } else {
                    None
                }
            }
        }
    }

    /// `Φ(y)`.
    pub fn apply(&self, y: Point) -> Point {
        match self {
            DeformationMap::Scaling(s) => linalg::scale(*s, y),
            _ => {
                let k = cell_of(y);
                self.apply_in_cell(k, y)
            }
        }
    }

    /// `Φ` evaluated with the formula of cell `k` (valid slightly outside the
    /// closed cell, since the bump vanishes near the cell boundary).
    pub fn apply_in_cell(&self, k: [i64; 2], y: Point) -> Point {
        match self {
            DeformationMap::Scaling(s) => linalg::scale(*s, y),
            _ => match self.cell_bump(k) {
                None => y,
                Some(b) => {
                    let d = b.displacement(local(k, y));
                    if d == [0.0, 0.0] {
                        y
                    } else {
                        linalg::add(y, d)
                    }
                }
            },
        }
    }

    /// Analytic Jacobian `∇Φ(y)`.
    pub fn jacobian(&self, y: Point) -> Mat2 {
        match self {
            DeformationMap::Scaling(s) => [[*s, 0.0], [0.0, *s]],
            _ => self.jacobian_in_cell(cell_of(y), y),
        }
    }

    fn jacobian_in_cell(&self, k: [i64; 2], y: Point) -> Mat2 {
        match self.cell_bump(k) {
            None => IDENTITY,
            Some(b) => b.jacobian(local(k, y)),
        }
    }

    /// Spectral norm of `D²Φ(y)` (the Hessian of the single displaced component).
    pub fn hessian_norm(&self, y: Point) -> f64 {
        let k = cell_of(y);
        match self.cell_bump(k) {
            None => 0.0,
            Some(b) => {
                let h = b.profile_hessian(local(k, y));
                b.amplitude.abs() * linalg::norm(b.direction) * linalg::spectral_norm(&h)
            }
        }
    }

    /// `Ψ(x) = Φ⁻¹(x)` by damped Newton iteration inside the cell containing `x`.
    pub fn inverse(&self, x: Point) -> Result<Point> {
        const MAX_ITER: usize = 100;
        if let DeformationMap::Scaling(s) = self {
            return Ok(linalg::scale(1.0 / s, x));
        }
        let k = cell_of(x);
        if self.cell_bump(k).is_none() {
            return Ok(x);
        }
        let tol = 1e-14 * (1.0 + linalg::norm(x));
        let mut y = x;
        let mut r = linalg::sub(self.apply_in_cell(k, y), x);
        let mut rn = linalg::norm(r);
        for _ in 0..MAX_ITER {
            if rn <= tol {
                return Ok(y);
            }
            let j = self.jacobian_in_cell(k, y);
            let jinv = linalg::inverse(&j).ok_or(Error::NonConvergence {
                x: x[0],
                y: x[1],
                iterations: 0,
                residual: rn,
            })?;
            let step = linalg::mat_vec(&jinv, r);
            let mut lambda = 1.0;
            loop {
                let cand = [y[0] - lambda * step[0], y[1] - lambda * step[1]];
                let rc = linalg::sub(self.apply_in_cell(k, cand), x);
                let rcn = linalg::norm(rc);
                if rcn < rn || lambda < 1e-6 {
                    y = cand;
                    r = rc;
                    rn = rcn;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if rn <= tol.max(1e-12) {
            Ok(y)
        } else {
            Err(Error::NonConvergence {
                x: x[0],
                y: x[1],
                iterations: MAX_ITER,
                residual: rn,
            })
        }
    }

    /// Arc-length factor `|∇Φ(x) t|` carrying `dσ` on `Γ₀` to `dσ` on `Φ(Γ₀)`.
    pub fn surface_factor(&self, x: Point, tangent: Point) -> f64 {
        linalg::norm(linalg::mat_vec(&self.jacobian(x), tangent))
    }

    /// The same factor in normal-gradient form,
    /// `|∇Φ(x)^{-T} n| det ∇Φ(x)` with `n` the unit normal of `Γ₀` at `x`.
    pub fn surface_factor_normal_form(&self, x: Point, normal: Point) -> f64 {
        let j = self.jacobian(x);
        let jinv_t = linalg::transpose(&linalg::inverse(&j).expect("deformation Jacobian is invertible"));
        linalg::norm(linalg::mat_vec(&jinv_t, normal)) * linalg::det(&j)
    }

    /// Sampled bounds `(μ, M, M′)` over one cell on a `samples × samples` grid.
    /// Cellwise maps carry at most one distinct non-identity cell map, so one
    /// bumped cell represents all cells.
    pub fn bounds(&self, samples: usize) -> MapBounds {
        let bump = match self {
            DeformationMap::Bump(b) | DeformationMap::BernoulliCellwise { bump: b, .. } => Some(*b),
            _ => None,
        };
        let mut mu = f64::INFINITY;
        let mut m: f64 = 0.0;
        let mut m_inv: f64 = 0.0;
        let sample_map = match bump {
            Some(b) => DeformationMap::Bump(b),
            None => *self,
        };
        for i in 0..samples {
            for j in 0..samples {
                let y = [
                    (i as f64 + 0.5) / samples as f64,
                    (j as f64 + 0.5) / samples as f64,
                ];
                let jac = sample_map.jacobian(y);
                mu = mu.min(linalg::det(&jac));
                m = m.max(linalg::spectral_norm(&jac)).max(sample_map.hessian_norm(y));
                if let Some(inv) = linalg::inverse(&jac) {
                    m_inv = m_inv.max(linalg::spectral_norm(&inv));
                }
            }
        }
        MapBounds {
            mu,
            m,
            m_inverse: m_inv,
        }
    }
}

/// Lattice cell containing `y`, i.e. `[y]` with `y − [y] ∈ [0,1)²`.
#[inline]
pub fn cell_of(y: Point) -> [i64; 2] {
    [y[0].floor() as i64, y[1].floor() as i64]
}

#[inline]
fn local(k: [i64; 2], y: Point) -> Point {
    [y[0] - k[0] as f64, y[1] - k[1] as f64]
}

/// Free functions mirroring the operation names used throughout the docs.
pub fn apply_phi(map: &DeformationMap, y: Point) -> Point {
    map.apply(y)
}

pub fn jacobian_phi(map: &DeformationMap, y: Point) -> Mat2 {
    map.jacobian(y)
}

pub fn inverse_phi(map: &DeformationMap, x: Point) -> Result<Point> {
    map.inverse(x)
}

pub fn surface_factor(map: &DeformationMap, x: Point, tangent: Point) -> f64 {
    map.surface_factor(x, tangent)
}
