//! Experiment description (TOML) and the simulate → reconstruct pipeline
//! shared by the command-line tool and the tests.
//!
//! ```toml
//! [geometry]
//! strip_width = 1.0
//! rays = [{ theta_over_pi = 1.0, weight = 1.0 },
//!         { theta_over_pi = 0.25, weight = 1.0 },
//!         { theta_over_pi = -0.25, weight = 1.0 }]
//! # scheme = [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]]   # optional c_jk
//!
//! [phantom]
//! kind = "square"            # square | shepp-logan | custom
//! # primitives = [{ shape = "rect", cy = 0, cz = 0.5, hy = 0.1, hz = 0.1, amplitude = 5 }]
//! # scattering = [...]       # η, same primitive syntax
//!
//! [grid]
//! n = 125                    # interior Z samples; ny defaults to a covering window
//!
//! [noise]                    # omit for noiseless data
//! photons = 1e4
//! seed = 1
//!
//! [solver]
//! method = "direct"          # direct | recursive | local
//! lambda = 0.0
//! n_sum = 200
//! truncation = "zero-coefficients"   # or zero-data
//! q0 = "analytic"            # or system
//! use_projection = false
//! local_zero_set = []
//!
//! [output]
//! dir = "out"
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{add_poisson_noise, combine_pairs, pairwise_fields};
use crate::geometry::{scheme_for_weights, validate_coefficients_with, CoefficientMatrix, Requirement, StarGeometry};
use crate::grid::{DataField, Grid, ImageGrid, PairwiseField};
use crate::local::{divergence_reconstruct, solve_sigmas, vector_combine};
use crate::phantom::{shepp_logan, square_phantom, Phantom, Primitive};
use crate::solver::reconstruct::{reconstruct, Method, Q0Mode, ReconstructOptions, SliceReport};
use crate::spectral::Truncation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayConfig {
    pub theta_over_pi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "one")]
    pub strip_width: f64,
    pub rays: Vec<RayConfig>,
    /// Pairwise table c_jk; derived from the ray weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    #[default]
    Square,
    SheppLogan,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    #[serde(default)]
    pub kind: PhantomKind,
    /// Only for `custom`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub primitives: Vec<Primitive>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scattering: Vec<Primitive>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
}

fn default_n() -> usize {
    125
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: default_n(), ny: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub photons: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Direct,
    Recursive,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationName {
    #[default]
    ZeroCoefficients,
    ZeroData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Q0Name {
    #[default]
    Analytic,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_nsum")]
    pub n_sum: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    #[serde(default)]
    pub truncation: TruncationName,
    #[serde(default)]
    pub q0: Q0Name,
    #[serde(default)]
    pub use_projection: bool,
    /// Rays given σ = 0 by the local method.
    #[serde(default)]
    pub local_zero_set: Vec<usize>,
}

fn default_nsum() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: MethodName::default(),
            lambda: 0.0,
            n_sum: default_nsum(),
            nmax: None,
            truncation: TruncationName::default(),
            q0: Q0Name::default(),
            use_projection: false,
            local_zero_set: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self, ballistic: Option<Vec<f64>>) -> ReconstructOptions {
        ReconstructOptions {
            method: if self.method == MethodName::Recursive { Method::Recursive } else { Method::Direct },
            lambda: self.lambda,
            nmax: self.nmax,
            n_sum: self.n_sum,
            truncation: match self.truncation {
                TruncationName::ZeroCoefficients => Truncation::ZeroCoefficients,
                TruncationName::ZeroData => Truncation::ZeroData,
            },
            ballistic,
            q0: match self.q0 {
                Q0Name::Analytic => Q0Mode::Analytic,
                Q0Name::System => Q0Mode::System,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Everything derived from a validated config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub geometry: StarGeometry,
    pub phantom: Phantom,
    pub grid: Grid,
    pub scheme: CoefficientMatrix,
}

const MAX_N: usize = 4096;

impl ExperimentConfig {
    /// Parse and validate.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))?;
        cfg.setup()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn geometry(&self) -> Result<StarGeometry> {
        let g = &self.geometry;
        let t: Vec<f64> = g.rays.iter().map(|r| r.theta_over_pi).collect();
        let w: Vec<f64> = g.rays.iter().map(|r| r.weight).collect();
        StarGeometry::from_turns(&t, &w, g.strip_width)
    }

    pub fn phantom(&self) -> Result<Phantom> {
        let l = self.geometry.strip_width;
        let p = &self.phantom;
        let base = match p.kind {
            PhantomKind::Square | PhantomKind::SheppLogan if !p.primitives.is_empty() => {
                return Err(Error::Config("primitives are only allowed with kind = \"custom\"".into()))
            }
            PhantomKind::Square => square_phantom(l),
            PhantomKind::SheppLogan => shepp_logan(l),
            PhantomKind::Custom => Phantom::new(l, p.primitives.clone())?,
        };
        base.with_scattering(p.scattering.clone())
    }

    /// Builds and checks every derived object; nothing is simulated.
    pub fn setup(&self) -> Result<Setup> {
        let geometry = self.geometry()?;
        let phantom = self.phantom()?;
        let n = self.grid.n;
        if !(3..=MAX_N).contains(&n) {
            return Err(Error::Config(format!("grid.n must be in 3..={MAX_N}, got {n}")));
        }
        let grid = match self.grid.ny {
            Some(ny) if ny > 4 * MAX_N => return Err(Error::Config(format!("grid.ny = {ny} is too large"))),
            Some(ny) => Grid::new(n, ny, geometry.strip_width()).map_err(|e| Error::Config(e.to_string()))?,
            None => Grid::covering(n, &phantom, &geometry)?,
        };
        let scheme = match &self.geometry.scheme {
            Some(c) => validate_coefficients_with(c, Requirement::UniformScattering)?,
            None => scheme_for_weights(&geometry.weights())?,
        };
        if scheme.len() != geometry.len() {
            return Err(Error::Config(format!("scheme is {0}x{0} but there are {1} rays", scheme.len(), geometry.len())));
        }
        let tol = 1e-9 * geometry.weights().iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (k, (a, b)) in scheme.column_sums().iter().zip(geometry.weights()).enumerate() {
            if (a - b).abs() > tol {
                return Err(Error::Config(format!("scheme column {k} sums to {a}, but the ray weight is {b}")));
            }
        }
        if let Some(noise) = &self.noise {
            if !(noise.photons >= 1.0) || !noise.photons.is_finite() {
                return Err(Error::Config(format!("noise.photons must be >= 1, got {}", noise.photons)));
            }
            if noise.seed > i64::MAX as u64 {
                return Err(Error::Config("noise.seed must fit in a signed 64-bit integer".into()));
            }
        }
        let s = &self.solver;
        if !(s.lambda >= 0.0) || !s.lambda.is_finite() {
            return Err(Error::Config(format!("solver.lambda must be finite and >= 0, got {}", s.lambda)));
        }
        if s.n_sum == 0 {
            return Err(Error::Config("solver.n_sum must be positive".into()));
        }
        if let Some(m) = s.nmax {
            if m > n {
                return Err(Error::Config(format!("solver.nmax = {m} exceeds grid.n = {n}")));
            }
        }
        if let Some(&z) = s.local_zero_set.iter().find(|&&z| z >= geometry.len()) {
            return Err(Error::Config(format!("local_zero_set entry {z} is not a ray index")));
        }
        Ok(Setup { geometry, phantom, grid, scheme })
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub pairs: Vec<PairwiseField>,
    /// Φ = Σ_{j<k} c_jk φ_jk.
    pub data: DataField,
    /// Exact vertical projections ∫_0^L μ(Y_i, z) dz.
    pub ballistic: Vec<f64>,
    /// Noisy samples whose count had to be clamped to 1.
    pub clamped: usize,
}

pub fn ballistic_projections(p: &Phantom, grid: Grid) -> Vec<f64> {
    (0..grid.ny).map(|i| p.line_integral((grid.y(i), 0.0), (0.0, 1.0), grid.strip_width)).collect()
}

pub fn simulate(setup: &Setup, noise: Option<&NoiseConfig>) -> Result<Simulation> {
    let with_scattering = !setup.phantom.scattering.is_empty();
    let mut pairs = pairwise_fields(&setup.phantom, &setup.geometry, setup.grid, with_scattering)?;
    let mut clamped = 0;
    if let Some(nz) = noise {
        for p in pairs.iter_mut() {
            let (noisy, c) = add_poisson_noise(p, nz.photons, nz.seed)?;
            *p = noisy;
            clamped += c;
        }
    }
    let data = combine_pairs(&pairs, &setup.scheme)?;
    let ballistic = ballistic_projections(&setup.phantom, setup.grid);
    Ok(Simulation { pairs, data, ballistic, clamped })
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub image: ImageGrid,
    /// Per-q diagnostics; empty for the local method.
    pub slices: Vec<SliceReport>,
    pub warnings: Vec<String>,
}

/// Fourier methods read `data` (and `ballistic` when projections are
/// enabled); the local method reads `pairs`.
pub fn run_reconstruction(
    setup: &Setup,
    solver: &SolverConfig,
    data: &DataField,
    pairs: &[PairwiseField],
    ballistic: Option<&[f64]>,
) -> Result<Outcome> {
    if solver.method == MethodName::Local {
        let scheme = solve_sigmas(&setup.geometry, &solver.local_zero_set)?;
        let field = vector_combine(pairs, &scheme)?;
        let image = divergence_reconstruct(&field, scheme.zeta)?;
        return Ok(Outcome { image, slices: Vec::new(), warnings: Vec::new() });
    }
    let proj = if solver.use_projection {
        Some(ballistic.ok_or_else(|| Error::Config("use_projection needs ballistic data".into()))?.to_vec())
    } else {
        None
    };
    let r = reconstruct(data, &setup.geometry, &solver.options(proj))?;
    Ok(Outcome { image: r.image, slices: r.slices, warnings: r.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_2A: &str = r#"
[geometry]
rays = [{ theta_over_pi = 1.0, weight = 1.0 }, { theta_over_pi = 0.25, weight = 1.0 }, { theta_over_pi = -0.25, weight = 1.0 }]

[grid]
n = 31

[noise]
photons = 1e4
seed = 7
"#;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::from_toml(CASE_2A).unwrap();
        assert_eq!(cfg.grid.n, 31);
        assert_eq!(cfg.solver.n_sum, 200);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = CASE_2A.replace("seed = 7", "seed = 7\nextra = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = CASE_2A.replace("[grid]", "[grid]\nsize = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn scheme_must_match_weights() {
        let text = CASE_2A.replace("rays =", "scheme = [[0, 1, 0], [1, 0, 0], [0, 0, 0]]\nrays =");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn noiseless_pipeline_matches_direct_transform() {
        let mut cfg = ExperimentConfig::from_toml(CASE_2A).unwrap();
        cfg.noise = None;
        let setup = cfg.setup().unwrap();
        let sim = simulate(&setup, None).unwrap();
        let direct = crate::forward::star_transform(&setup.phantom, &setup.geometry, setup.grid).unwrap();
        for (a, b) in sim.data.values.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
