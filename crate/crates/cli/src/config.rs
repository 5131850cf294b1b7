//! TOML scenario description and the builders that turn it into library objects.

use std::path::Path;

use nonlocal_green::fredholm::ScanWindow;
use nonlocal_green::lattice::{CellSet, GridFunction, GridSpec, Region};
use nonlocal_green::operators::{
    make_klein_gordon, make_multiplication, make_nihilo_a, make_null_wave, make_rank_one, DiffOp, KernelFamily,
    NihiloFamily,
};
use nonlocal_green::profiles::{bump2d, Profile1d};
use nonlocal_green::scenarios::kernel_gaussian;
use nonlocal_green::{sampling, CausalSolver, Sign};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for random sources and test functions. `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Random sources per check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub grid: GridConfig,
    pub region: Option<RegionConfig>,
    pub operator: OperatorConfig,
    pub family: Option<FamilyConfig>,
    /// `λ` values as `[re, im]` pairs.
    #[serde(default)]
    pub lambda: Vec<[f64; 2]>,
    pub scan: Option<ScanConfig>,
    #[serde(default = "default_signs")]
    pub signs: Vec<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub born: BornConfig,
    pub lu: Option<LuConfig>,
    pub nihilo: Option<NihiloConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_trials() -> usize {
    10
}

fn default_signs() -> Vec<String> {
    vec!["+".into(), "-".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    Circle { nt: usize, nx: usize, dt: f64, dx: f64 },
    NullSquare { n: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    /// Inclusive index ranges.
    Rectangle { n: [usize; 2], j: [usize; 2] },
    /// Coordinate window.
    Window { t: [f64; 2], x: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    KleinGordon {
        #[serde(default)]
        mass: f64,
        #[serde(default)]
        potential: PotentialConfig,
    },
    NullWave,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    None,
    /// Independent normal values of standard deviation `amplitude` on every cell.
    Gaussian { seed: u64, amplitude: f64 },
    Bump(Bump2d),
}

/// Product bump centred at `(t, x)` with half-widths `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump2d {
    pub center: [f64; 2],
    pub radius: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Bump2d {
    fn sample(&self, grid: &GridSpec) -> GridFunction {
        bump2d(
            grid,
            (self.center[0], self.center[1]),
            (self.radius[0], self.radius[1]),
            self.amplitude,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    KernelGaussian { seed: u64, degree: usize, amplitude: f64 },
    /// `A φ = -<h, φ> f` with both bumps cut to `K`.
    RankOne { f: Bump2d, h: Bump2d },
    Multiplication { v: Bump2d },
    /// Ex-nihilo interaction; `K` is `window x window`, the region table is ignored.
    Nihilo {
        f: Profile1d,
        g: Profile1d,
        h: Profile1d,
        window: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub re: [f64; 2],
    pub im: [f64; 2],
    #[serde(default = "default_resolution")]
    pub n_re: usize,
    #[serde(default = "default_resolution")]
    pub n_im: usize,
}

fn default_resolution() -> usize {
    ScanWindow::DEFAULT_RESOLUTION
}

impl ScanConfig {
    pub fn window(&self) -> Result<ScanWindow> {
        ScanWindow::new((self.re[0], self.re[1]), (self.im[0], self.im[1]), self.n_re, self.n_im)
            .map_err(CliError::Build)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Kernel-dimension threshold relative to `σ_max`.
    pub tau_sing: f64,
    /// Identities of the modified Green operators and Møller compositions.
    pub residual: f64,
    /// Agreement with the dense oracle.
    pub oracle: f64,
    /// Located points against a known closed form.
    pub location: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_sing: nonlocal_green::TAU_SING,
            residual: 1e-10,
            oracle: 1e-8,
            location: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornConfig {
    pub n_max: usize,
}

impl Default for BornConfig {
    fn default() -> Self {
        BornConfig { n_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuConfig {
    /// One Klein–Gordon mass per component.
    pub masses: Vec<f64>,
    pub diag_amplitude: f64,
    pub coupling: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NihiloConfig {
    /// Points per axis, coarse to fine.
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Optional file-name prefix, placed before the subcommand name.
    pub stem: Option<String>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tau_sing", t.tau_sing),
            ("residual", t.residual),
            ("oracle", t.oracle),
            ("location", t.location),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.signs.is_empty() {
            return Err(CliError::Config("signs must not be empty".into()));
        }
        self.signs()?;
        if self.lambda.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Config("λ values must be finite".into()));
        }
        let needs_region = matches!(
            self.family,
            Some(FamilyConfig::KernelGaussian { .. } | FamilyConfig::RankOne { .. } | FamilyConfig::Multiplication { .. })
        ) || self.lu.is_some();
        if needs_region && self.region.is_none() {
            return Err(CliError::Config("this family needs a [region] table".into()));
        }
        if let Some(lu) = &self.lu {
            if lu.masses.is_empty() {
                return Err(CliError::Config("lu.masses must not be empty".into()));
            }
        }
        if let Some(n) = &self.nihilo {
            if n.resolutions.is_empty() {
                return Err(CliError::Config("nihilo.resolutions must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn signs(&self) -> Result<Vec<Sign>> {
        self.signs
            .iter()
            .map(|s| s.parse::<Sign>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.lambda.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = match self.grid {
            GridConfig::Circle { nt, nx, dt, dx } => GridSpec::circle(nt, nx, dt, dx),
            GridConfig::NullSquare { n, lo, hi } => GridSpec::null_square(n, lo, hi),
        };
        g.map_err(CliError::Build)
    }

    pub fn region(&self, grid: &GridSpec) -> Result<Region> {
        let r = match &self.region {
            Some(RegionConfig::Rectangle { n, j }) => Region::rectangle(grid, n[0], n[1], j[0], j[1]),
            Some(RegionConfig::Window { t, x }) => Region::window(grid, (t[0], t[1]), (x[0], x[1])),
            None => return Err(CliError::Config("missing [region] table".into())),
        };
        r.map_err(CliError::Build)
    }

    pub fn operator(&self, grid: &GridSpec) -> Result<DiffOp> {
        self.operator_with_mass(grid, None)
    }

    /// The configured operator, optionally with its mass replaced.
    pub fn operator_with_mass(&self, grid: &GridSpec, mass_override: Option<f64>) -> Result<DiffOp> {
        let op = match &self.operator {
            OperatorConfig::KleinGordon { mass, potential } => {
                let v = match potential {
                    PotentialConfig::None => None,
                    PotentialConfig::Gaussian { seed, amplitude } => {
                        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(*seed);
                        let v = sampling::gaussian_on(grid, &CellSet::full(grid), false, &mut rng);
                        Some(v.scale(Complex64::new(*amplitude, 0.0)))
                    }
                    PotentialConfig::Bump(b) => Some(b.sample(grid)),
                };
                make_klein_gordon(grid, mass_override.unwrap_or(*mass), v.as_ref())
            }
            OperatorConfig::NullWave => make_null_wave(grid),
        };
        op.map_err(CliError::Build)
    }

    pub fn solver(&self) -> Result<CausalSolver> {
        Ok(CausalSolver::new(self.operator(&self.grid()?)?))
    }

    /// Families whose coefficients are kernel matrices on `K`.
    pub fn kernel_family(&self, solver: &CausalSolver) -> Result<KernelFamily> {
        let grid = *solver.grid();
        let fam = match &self.family {
            Some(FamilyConfig::KernelGaussian { seed, degree, amplitude }) => {
                let k = self.region(&grid)?;
                kernel_gaussian(solver, &k, *degree, *amplitude, *seed)
            }
            Some(FamilyConfig::RankOne { f, h }) => {
                let k = self.region(&grid)?;
                let (f, h) = self.rank_one_profiles(&grid, f, h, &k);
                make_rank_one(&f, &h, &k).map(|op| KernelFamily::linear(&op))
            }
            Some(FamilyConfig::Multiplication { v }) => {
                let k = self.region(&grid)?;
                make_multiplication(&v.sample(&grid).masked(k.cells()), &k).map(|op| KernelFamily::linear(&op))
            }
            Some(FamilyConfig::Nihilo { .. }) => {
                return Err(CliError::Config("the nihilo family has no kernel matrix form".into()))
            }
            None => return Err(CliError::Config("missing [family] table".into())),
        };
        fam.map_err(CliError::Build)
    }

    fn rank_one_profiles(&self, grid: &GridSpec, f: &Bump2d, h: &Bump2d, k: &Region) -> (GridFunction, GridFunction) {
        (f.sample(grid).masked(k.cells()), h.sample(grid).masked(k.cells()))
    }

    /// `(f, h)` of a rank-one family, cut to `K`.
    pub fn rank_one_pair(&self, grid: &GridSpec) -> Result<Option<(GridFunction, GridFunction)>> {
        match &self.family {
            Some(FamilyConfig::RankOne { f, h }) => {
                let k = self.region(grid)?;
                Ok(Some(self.rank_one_profiles(grid, f, h, &k)))
            }
            _ => Ok(None),
        }
    }

    /// Solver and ex-nihilo family on a null square with `n` points per axis,
    /// keeping the configured extent.
    pub fn nihilo_at(&self, n: usize) -> Result<(CausalSolver, NihiloFamily)> {
        let Some(FamilyConfig::Nihilo { f, g, h, window }) = &self.family else {
            return Err(CliError::Config("nihilo needs family.kind = \"nihilo\"".into()));
        };
        let GridConfig::NullSquare { lo, hi, .. } = self.grid else {
            return Err(CliError::Config("nihilo needs a null_square grid".into()));
        };
        let grid = GridSpec::null_square(n, lo, hi).map_err(CliError::Build)?;
        let solver = CausalSolver::new(make_null_wave(&grid).map_err(CliError::Build)?);
        let op = make_nihilo_a(
            &grid,
            &f.sample(grid.nt, grid.t0, grid.dt),
            &g.sample(grid.nx, grid.x0, grid.dx),
            &h.sample(grid.nx, grid.x0, grid.dx),
            (window[0], window[1]),
        )
        .map_err(CliError::Build)?;
        Ok((solver, NihiloFamily(op)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [grid]
        kind = "circle"
        nt = 12
        nx = 8
        dt = 0.05
        dx = 0.0625

        [operator]
        kind = "klein_gordon"
        mass = 1.0
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.signs().unwrap(), vec![Sign::Plus, Sign::Minus]);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.grid().unwrap().len(), 96);
    }

    #[test]
    fn bad_tolerance_and_unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[tolerances]\nresidual = -1.0\n");
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(CliError::Config(_))));
        let unknown = format!("{MINIMAL}\nfoo = 1\n");
        assert!(matches!(ScenarioConfig::from_toml(&unknown), Err(CliError::Parse(_))));
        let sign = format!("signs = [\"*\"]\n{MINIMAL}");
        assert!(ScenarioConfig::from_toml(&sign).is_err());
    }

    #[test]
    fn family_without_region_is_rejected() {
        let text = format!("{MINIMAL}\n[family]\nkind = \"kernel_gaussian\"\nseed = 1\ndegree = 1\namplitude = 1.0\n");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(CliError::Config(_))));
    }
}
