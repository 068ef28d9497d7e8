//! Experiment configuration.
//!
//! The primary format is TOML; a file ending in `.json` is read as JSON with
//! the same schema. Every section and key is optional and falls back to the
//! defaults below. See `docs/config.md` for the full schema.

use std::path::{Path, PathBuf};

use membrane_homog::corrector::CorrectorConfig;
use membrane_homog::effective::seed_list;
use membrane_homog::fem::Conductivity;
use membrane_homog::geometry::{DeformationMap, InterfaceSpec};
use membrane_homog::Point;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Identity,
    Bump,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConductivityPreset {
    Identity,
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourcePreset {
    /// `f ≡ 1`.
    One,
    /// `f = 1 + x₁ + 2x₂`.
    Affine,
}

impl SourcePreset {
    pub fn eval(self, x: Point) -> f64 {
        match self {
            SourcePreset::One => 1.0,
            SourcePreset::Affine => 1.0 + x[0] + 2.0 * x[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    /// The reference cell `Y`.
    Cell,
    /// `Φ(Q_n)` for the corrector half-width.
    Truncated,
    /// The domain mesh of `D` for the first `1/ε` of the sweep.
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub radius: f64,
    pub map: MapKind,
    pub amplitude: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            radius: 0.25,
            map: MapKind::Identity,
            amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConductivityConfig {
    pub preset: ConductivityPreset,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        Self {
            preset: ConductivityPreset::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h: f64,
    pub kind: MeshKind,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            kind: MeshKind::Cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorSection {
    pub delta: f64,
    pub n: usize,
    pub m: usize,
    pub directions: Vec<Point>,
    pub membranes: bool,
}

impl Default for CorrectorSection {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            n: 8,
            m: 4,
            directions: vec![[1.0, 0.0], [0.0, 1.0]],
            membranes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    /// Explicit seeds; when present `master_seed` and `count` are ignored.
    pub seeds: Option<Vec<u64>>,
    pub master_seed: u64,
    pub count: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            seeds: None,
            master_seed: 0,
            count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogenizeSection {
    pub eps_inverse: Vec<usize>,
    pub source: SourcePreset,
    /// Realizations for the sweep; defaults to the Monte-Carlo seed list.
    pub seeds: Option<Vec<u64>>,
    /// A prior `effective.json`; without it `A⁰` is computed inline.
    pub effective: Option<PathBuf>,
}

impl Default for HomogenizeSection {
    fn default() -> Self {
        Self {
            eps_inverse: vec![4, 8, 16],
            source: SourcePreset::One,
            seeds: None,
            effective: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub conductivity: ConductivityConfig,
    pub mesh: MeshConfig,
    pub corrector: CorrectorSection,
    pub monte_carlo: MonteCarloConfig,
    pub homogenize: HomogenizeSection,
    pub output: OutputConfig,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text, path)?
        } else {
            Self::from_toml(&text, path)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            ConfigError::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        if !(g.radius > 0.0 && g.radius < 0.5) {
            return Err(invalid("geometry.radius", "must lie in (0, 0.5)"));
        }
        if !(g.amplitude.is_finite() && g.amplitude >= 0.0) {
            return Err(invalid("geometry.amplitude", "must be finite and nonnegative"));
        }
        if g.map != MapKind::Identity {
            let b = self.map().bounds(64);
            if !(b.mu > 0.0) {
                return Err(invalid(
                    "geometry.amplitude",
                    format!("deformation folds (min det = {:.3e})", b.mu),
                ));
            }
        }
        if !(self.mesh.h > 0.0 && self.mesh.h <= 0.25) {
            return Err(invalid("mesh.h", "must lie in (0, 0.25]"));
        }
        let c = &self.corrector;
        if !(c.delta > 0.0 && c.delta <= 1.0) {
            return Err(invalid("corrector.delta", "must lie in (0, 1]"));
        }
        if c.n < 2 {
            return Err(invalid("corrector.n", "must be at least 2"));
        }
        if c.m < 1 || c.m >= c.n {
            return Err(invalid("corrector.m", format!("must satisfy 1 ≤ m < n = {}", c.n)));
        }
        if c.directions.is_empty() {
            return Err(invalid("corrector.directions", "at least one direction is required"));
        }
        if c.directions.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(invalid("corrector.directions", "components must be finite"));
        }
        let mc = &self.monte_carlo;
        match &mc.seeds {
            Some(s) if s.is_empty() => return Err(invalid("monte_carlo.seeds", "must not be empty")),
            None if mc.count == 0 => return Err(invalid("monte_carlo.count", "must be at least 1")),
            _ => {}
        }
        let h = &self.homogenize;
        if h.eps_inverse.is_empty() {
            return Err(invalid("homogenize.eps_inverse", "must not be empty"));
        }
        if h.eps_inverse.iter().any(|&k| k == 0) || h.eps_inverse.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "homogenize.eps_inverse",
                "must be positive integers in increasing order",
            ));
        }
        if let Some(s) = &h.seeds {
            if s.is_empty() {
                return Err(invalid("homogenize.seeds", "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.monte_carlo.master_seed = seed;
        if let Some(s) = self.monte_carlo.seeds.take() {
            self.monte_carlo.count = s.len();
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.monte_carlo.seeds {
            Some(s) => s.clone(),
            None => seed_list(self.monte_carlo.master_seed, self.monte_carlo.count),
        }
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        self.homogenize.seeds.clone().unwrap_or_else(|| self.seeds())
    }

    pub fn interface(&self) -> InterfaceSpec {
        InterfaceSpec::circle(self.geometry.radius).expect("radius validated")
    }

    /// The map with seed 0; realizations are selected with `with_seed`.
    pub fn map(&self) -> DeformationMap {
        let a = self.geometry.amplitude;
        match self.geometry.map {
            MapKind::Identity => DeformationMap::Identity,
            MapKind::Bump => DeformationMap::Bump(membrane_homog::geometry::Bump::standard(a)),
            MapKind::Bernoulli => DeformationMap::bernoulli(0, a),
        }
    }

    pub fn conductivity(&self) -> Conductivity {
        match self.conductivity.preset {
            ConductivityPreset::Identity => Conductivity::Identity,
            ConductivityPreset::Anisotropic => Conductivity::Anisotropic,
        }
    }

    pub fn corrector_config(&self, direction: Point, seed: u64) -> CorrectorConfig {
        CorrectorConfig {
            direction,
            delta: self.corrector.delta,
            n: self.corrector.n,
            m: self.corrector.m,
            h: self.mesh.h,
            seed,
            membranes: self.corrector.membranes,
        }
    }

    /// SHA-256 of the canonical JSON form. Keys are sorted and the output
    /// directory is left out, so the hash identifies the experiment only.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
