//! Experiment configuration files.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use robin_shape::ball_analysis::{BallProblem, BoundaryCondition};
use robin_shape::disk_spectral::SpectralConfig;
use robin_shape::fem2d::StarDomain;
use robin_shape::flows::PerturbationSpec;
use robin_shape::sources::RadialSource;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    pub command: Option<String>,
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub problem: ProblemSpec,
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub domain: Option<DomainSpec>,
    pub eps: Option<f64>,
    pub insulation: Option<InsulationSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        delta: f64,
    },
    /// `p(r²)` with coefficients in increasing powers of `r²`.
    Polynomial {
        coeffs: Vec<f64>,
        working_radius: f64,
    },
    Tabulated {
        radii: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Robin(f64),
    Limit(Dirichlet),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dirichlet {
    Dirichlet,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "robin_one")]
    pub beta: BetaSpec,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            n: 2,
            radius: 1.0,
            beta: BetaSpec::Robin(1.0),
        }
    }
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

fn robin_one() -> BetaSpec {
    BetaSpec::Robin(1.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    Translation {
        #[serde(default = "x_axis")]
        direction: [f64; 2],
    },
    StarMode {
        k: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn x_axis() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_modes")]
    pub radial: usize,
    pub mesh_h: Option<f64>,
    pub step: Option<f64>,
    #[serde(default = "yes")]
    pub refine_mesh: bool,
    #[serde(default = "default_cell")]
    pub grid_cell: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            modes: 64,
            radial: 64,
            mesh_h: None,
            step: None,
            refine_mesh: true,
            grid_cell: 0.01,
        }
    }
}

fn default_modes() -> usize {
    64
}

fn yes() -> bool {
    true
}

fn default_cell() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    ShiftedDisk {
        radius: f64,
        center: [f64; 2],
    },
    Fourier {
        radius: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default)]
        preserve_area: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsulationSpec {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_profiles")]
    pub profiles: usize,
    #[serde(default)]
    pub seed: u64,
    /// Upper bound for `Σ|c_k|`; must stay below 1.
    #[serde(default = "default_budget")]
    pub max_amplitude: f64,
    #[serde(default = "default_max_mode")]
    pub max_mode: u32,
}

impl Default for InsulationSpec {
    fn default() -> Self {
        Self {
            mass: 1.0,
            profiles: 20,
            seed: 0,
            max_amplitude: 0.9,
            max_mode: 6,
        }
    }
}

fn default_profiles() -> usize {
    20
}

fn default_budget() -> f64 {
    0.9
}

fn default_max_mode() -> u32 {
    6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Axis {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Values(ref v) => {
                if v.is_empty() {
                    bail!("sweep axis is empty");
                }
                Ok(v.clone())
            }
            Axis::Range { start, stop, count, log } => {
                if count == 0 {
                    bail!("sweep axis needs count ≥ 1");
                }
                if log && !(start > 0.0 && stop > 0.0) {
                    bail!("logarithmic sweep axis needs positive endpoints");
                }
                let at = |i: usize| {
                    if i == 0 {
                        return start;
                    }
                    if i + 1 == count {
                        return stop;
                    }
                    let s = i as f64 / (count - 1) as f64;
                    if log {
                        (start.ln() + s * (stop.ln() - start.ln())).exp()
                    } else {
                        start + s * (stop - start)
                    }
                };
                Ok((0..count).map(at).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub beta: Axis,
    pub delta: Axis,
    pub radius: Axis,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            beta: Axis::Range {
                start: 0.1,
                stop: 10.0,
                count: 21,
                log: true,
            },
            delta: Axis::Values(vec![0.1, 0.3, 0.5, 1.0]),
            radius: Axis::Values(vec![1.0]),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_translation")]
    pub translation: f64,
    #[serde(default = "tol_mode")]
    pub star_mode: f64,
    #[serde(default = "tol_fem")]
    pub fem: f64,
    #[serde(default = "tol_identity")]
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            translation: tol_translation(),
            star_mode: tol_mode(),
            fem: tol_fem(),
            identity: tol_identity(),
        }
    }
}

fn tol_translation() -> f64 {
    0.01
}

fn tol_mode() -> f64 {
    0.02
}

fn tol_fem() -> f64 {
    1e-3
}

fn tol_identity() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report file name inside the output directory.
    pub report: Option<String>,
    /// CSV file name inside the output directory.
    pub csv: Option<String>,
}

/// Reads a config, reporting the path of the offending field on failure.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("invalid config at `{}`: {}", path, e.into_inner())
    })
}

impl SourceSpec {
    pub fn build(&self, n: usize) -> Result<RadialSource<f64>> {
        let src = match self {
            SourceSpec::Constant { value } => RadialSource::constant(*value, n),
            SourceSpec::Gaussian { delta } => RadialSource::gaussian(*delta, n),
            SourceSpec::Polynomial { coeffs, working_radius } => {
                RadialSource::polynomial(coeffs.clone(), n, *working_radius)
            }
            SourceSpec::Tabulated { radii, values } => RadialSource::tabulated(radii.clone(), values.clone(), n),
        };
        Ok(src?)
    }
}

impl ProblemSpec {
    pub fn boundary(&self) -> BoundaryCondition<f64> {
        match self.beta {
            BetaSpec::Robin(b) => BoundaryCondition::Robin(b),
            BetaSpec::Limit(_) => BoundaryCondition::Dirichlet,
        }
    }

    pub fn build(&self) -> Result<BallProblem<f64>> {
        let p = match self.beta {
            BetaSpec::Robin(b) => BallProblem::robin(self.n, self.radius, b),
            BetaSpec::Limit(_) => BallProblem::dirichlet(self.n, self.radius),
        };
        Ok(p?)
    }
}

impl PerturbationConfig {
    pub fn build(&self, radius: f64) -> Result<PerturbationSpec<f64>> {
        let p = match *self {
            PerturbationConfig::Translation { direction } => PerturbationSpec::translation(radius, direction),
            PerturbationConfig::StarMode { k, amplitude } => PerturbationSpec::star_mode(radius, k, amplitude),
        };
        Ok(p?)
    }
}

impl SolverSpec {
    pub fn spectral(&self) -> Result<SpectralConfig> {
        Ok(SpectralConfig::new(self.modes, self.radial)?)
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<StarDomain<f64>> {
        let d = match self {
            DomainSpec::Disk { radius } => StarDomain::disk(*radius),
            DomainSpec::Ellipse { a, b } => StarDomain::ellipse(*a, *b),
            DomainSpec::ShiftedDisk { radius, center } => StarDomain::shifted_disk(*radius, *center),
            DomainSpec::Fourier {
                radius,
                cos,
                sin,
                preserve_area,
            } => {
                let d = StarDomain::fourier(*radius, cos.clone(), sin.clone())?;
                if *preserve_area {
                    Ok(d.preserving_area())
                } else {
                    Ok(d)
                }
            }
        };
        Ok(d?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_keyword_and_defaults() {
        let cfg = parse(r#"{"problem": {"beta": "dirichlet"}}"#).unwrap();
        assert_eq!(cfg.problem.boundary(), BoundaryCondition::Dirichlet);
        assert_eq!(cfg.problem.n, 2);
        assert_eq!(cfg.solver.modes, 64);
        assert!(parse(r#"{"problem": {"beta": "neumann"}}"#).is_err());
    }

    #[test]
    fn error_names_the_field() {
        let e = parse(r#"{"solver": {"modes": 8, "mesh": 0.1}}"#).unwrap_err().to_string();
        assert!(e.contains("solver.mesh"), "{e}");
        let e = parse(r#"{"source": {"kind": "gaussian"}}"#).unwrap_err().to_string();
        assert!(e.contains("delta"), "{e}");
    }

    #[test]
    fn axes_hit_their_endpoints() {
        let a = Axis::Range {
            start: 0.1,
            stop: 10.0,
            count: 5,
            log: true,
        };
        let p = a.points().unwrap();
        assert_eq!((p[0], p[4]), (0.1, 10.0));
        assert!((p[2] - 1.0).abs() < 1e-12);
        assert!(Axis::Values(vec![]).points().is_err());
        let lin = Axis::Range {
            start: 0.0,
            stop: 1.0,
            count: 3,
            log: false,
        };
        assert_eq!(lin.points().unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
