//! Subcommand runners.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nonlocal_green::fredholm::{dense_oracle, verify_index_duality, IndexReport, DENSE_ORACLE_CAP};
use nonlocal_green::green::{green_suite, verify_duality, DENSE_CAP};
use nonlocal_green::lattice::{admissible_sources, causal_set, support, GridFunction, SUPPORT_TOL};
use nonlocal_green::linalg::{self, CMatrix, CVector};
use nonlocal_green::lusys::{random_system, verify_system};
use nonlocal_green::moller::MollerMap;
use nonlocal_green::report::{Check, VerifyReport};
use nonlocal_green::scenarios::nihilo_kernel_vectors;
use nonlocal_green::{sampling, Fredholm, InteractionFamily, Sign};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::emit::{fmt_f64, points_json, scan_csv, to_json, write_file};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// `E±` residual, inverse and cone suite.
    Green,
    /// `Ẽ±` identities, dense-oracle agreement and support.
    Modified,
    /// Exceptional-set scan with CSV and JSON output.
    Scan,
    /// Born-series convergence tables.
    Born,
    /// Møller compositions and intertwining.
    Moller,
    /// Kernel dimensions against the dual problem.
    Index,
    /// Block LU systems.
    Lu,
    /// Ex-nihilo kernel growth across resolutions.
    Nihilo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::Modified => "modified",
            Command::Scan => "scan",
            Command::Born => "born",
            Command::Moller => "moller",
            Command::Index => "index",
            Command::Lu => "lu",
            Command::Nihilo => "nihilo",
        }
    }
}

/// Outcome of one invocation. Everything except `timings` is a function of
/// the config and seed alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub command: Command,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Emitted data files, relative to the output directory.
    pub files: Vec<PathBuf>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunResult {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    out: &'a Path,
    /// `<stem>_<command>` or just `<command>`.
    prefix: String,
    report: VerifyReport,
    files: Vec<PathBuf>,
    timings: Vec<(String, f64)>,
}

impl Ctx<'_> {
    fn emit(&mut self, suffix: &str, contents: &str) -> Result<()> {
        let name = PathBuf::from(format!("{}_{suffix}", self.prefix));
        write_file(&self.out.join(&name), contents)?;
        self.files.push(name);
        Ok(())
    }

    fn timed<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let v = f();
        self.timings.push((label.into(), start.elapsed().as_secs_f64()));
        v
    }

    fn lambdas(&self) -> Result<Vec<Complex64>> {
        let l = self.cfg.lambdas();
        if l.is_empty() {
            return Err(CliError::Config("this subcommand needs at least one λ".into()));
        }
        Ok(l)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
    }
}

fn sign_label(sign: Sign) -> &'static str {
    match sign {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

fn rel(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

/// Runs `command` on `cfg`, writing data files under `out`.
pub fn run(cfg: &ScenarioConfig, command: Command, out: &Path) -> Result<RunResult> {
    let mut ctx = Ctx {
        cfg,
        out,
        prefix: match &cfg.output.stem {
            Some(stem) => format!("{stem}_{}", command.name()),
            None => command.name().to_string(),
        },
        report: VerifyReport::new(command.name()),
        files: Vec::new(),
        timings: Vec::new(),
    };
    match command {
        Command::Green => run_green(&mut ctx)?,
        Command::Modified => run_modified(&mut ctx)?,
        Command::Scan => run_scan(&mut ctx)?,
        Command::Born => run_born(&mut ctx)?,
        Command::Moller => run_moller(&mut ctx)?,
        Command::Index => run_index(&mut ctx)?,
        Command::Lu => run_lu(&mut ctx)?,
        Command::Nihilo => run_nihilo(&mut ctx)?,
    }
    let mut result = RunResult {
        command,
        seed: cfg.seed,
        passed: ctx.report.passed(),
        checks: ctx.report.checks,
        files: ctx.files,
        timings: ctx.timings,
    };
    let report_name = PathBuf::from(format!("{}_report.json", ctx.prefix));
    write_file(&out.join(&report_name), &to_json(&result)?)?;
    result.files.push(report_name);
    Ok(result)
}

fn run_green(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let (trials, seed) = (ctx.cfg.trials, ctx.cfg.seed);
    let suite = ctx.timed("green suite", || green_suite(&solver, trials, seed));
    ctx.report.merge(suite);
    if solver.op().interior_cells().count() <= DENSE_CAP {
        let dual = ctx.timed("duality", || verify_duality(&solver, DENSE_CAP))?;
        ctx.report.merge(dual);
    }
    Ok(())
}

fn run_modified(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let family = ctx.cfg.kernel_family(&solver)?;
    let g = *solver.grid();
    let adm = admissible_sources(&g);
    let defining = solver.op().defining_cells();
    let tol = ctx.cfg.tolerances;
    let mut rng = ctx.rng(1);
    let start = Instant::now();
    for sign in ctx.cfg.signs()? {
        let fr = Fredholm::new(&solver, &family, sign)?;
        for l in ctx.lambdas()? {
            let (mut id1, mut id2, mut contained) = (0.0f64, 0.0f64, true);
            let mut oracle = None;
            for t in 0..ctx.cfg.trials {
                let f = sampling::gaussian_on(&g, &adm, true, &mut rng);
                let u = fr.modified_green(l, &f)?;
                id1 = id1.max(fr.apply_perturbed(l, &u).sub(&f).max_abs_on(&defining) / f.max_abs());
                let test = sampling::gaussian_on(&g, &adm, true, &mut rng);
                id2 = id2.max(rel(&fr.modified_green(l, &fr.apply_perturbed(l, &test))?, &test));
                if t == 0 && g.len() <= DENSE_ORACLE_CAP {
                    oracle = Some(rel(&u, &dense_oracle(&solver, &family, l, sign, &f, DENSE_ORACLE_CAP)?));
                }
                let sparse = sampling::sparse_on(&g, &adm, 2, &mut rng);
                let seed = support(&sparse, SUPPORT_TOL).union(family.region().cells());
                let cone = causal_set(&g, &seed, sign.direction());
                contained &= support(&fr.modified_green(l, &sparse)?, SUPPORT_TOL).is_subset(&cone);
            }
            let at = format!("{sign} λ = {l}");
            ctx.report.check_le(format!("{at}: (P+A) E~ f - f"), id1, tol.residual);
            ctx.report.check_le(format!("{at}: E~ (P+A) g - g"), id2, tol.residual);
            if let Some(o) = oracle {
                ctx.report.check_le(format!("{at}: dense oracle"), o, tol.oracle);
            }
            ctx.report.check_true(format!("{at}: supp E~ f in J(supp f ∪ K)"), contained);
        }
    }
    ctx.timings.push(("modified suite".into(), start.elapsed().as_secs_f64()));
    Ok(())
}

fn run_scan(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let family = ctx.cfg.kernel_family(&solver)?;
    let Some(scan) = ctx.cfg.scan else {
        return Err(CliError::Config("scan needs a [scan] window".into()));
    };
    let window = scan.window()?;
    let tau = ctx.cfg.tolerances.tau_sing;
    let rank_one = ctx.cfg.rank_one_pair(solver.grid())?;
    for sign in ctx.cfg.signs()? {
        let fr = Fredholm::new(&solver, &family, sign)?;
        let report = ctx.timed(format!("scan {sign}"), || fr.scan(&window, tau))?;
        let label = sign_label(sign);
        ctx.emit(&format!("{label}.csv"), &scan_csv(&report.samples))?;
        ctx.emit(&format!("points_{label}.json"), &points_json(&report.points)?)?;
        for p in &report.points {
            ctx.report.check_true(
                format!("{sign} λ = {}: refined, kernel dim {}", p.lambda, p.kernel_dim),
                p.refined && p.kernel_dim >= 1,
            );
        }
        if let Some((f, h)) = &rank_one {
            let star = 1.0 / h.pairing(&solver.solve(f, sign)?);
            if window.contains(star, 0.0) {
                let best = report
                    .points
                    .iter()
                    .map(|p| (p.lambda - star).norm())
                    .fold(f64::INFINITY, f64::min);
                ctx.report.check_le(format!("{sign}: |λ - 1/ν| at {star}"), best, ctx.cfg.tolerances.location);
                ctx.report
                    .check_true(format!("{sign}: single point ({})", report.points.len()), report.points.len() == 1);
            }
        }
    }
    Ok(())
}

fn run_born(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let family = ctx.cfg.kernel_family(&solver)?;
    let g = *solver.grid();
    let n_max = ctx.cfg.born.n_max.max(2);
    let mut rng = ctx.rng(2);
    let f = sampling::gaussian_on(&g, &admissible_sources(&g), true, &mut rng);
    for sign in ctx.cfg.signs()? {
        let fr = Fredholm::new(&solver, &family, sign)?;
        for (i, l) in ctx.lambdas()?.into_iter().enumerate() {
            let born = fr.born_series(l, &f, n_max)?;
            let exact = fr.modified_green(l, &f)?;
            let errors: Vec<f64> = born.partial_sums.iter().map(|p| p.sub(&exact).max_abs()).collect();
            let mut table = String::from("n,error,term_norm\n");
            for (n, (e, t)) in errors.iter().zip(&born.term_norms).enumerate() {
                table.push_str(&format!("{n},{},{}\n", fmt_f64(*e), fmt_f64(*t)));
            }
            ctx.emit(&format!("{}_{i}.csv", sign_label(sign)), &table)?;
            // the flag must agree with what the errors actually do
            let shrinking = errors[n_max] < errors[1];
            ctx.report.check_true(
                format!("{sign} λ = {l}: ratio {:.6}, diverging = {}", born.ratio, born.diverging),
                born.diverging != shrinking,
            );
        }
    }
    Ok(())
}

fn run_moller(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let family = ctx.cfg.kernel_family(&solver)?;
    let g = *solver.grid();
    let adm = admissible_sources(&g);
    let mut rng = ctx.rng(3);
    for sign in ctx.cfg.signs()? {
        for l in ctx.lambdas()? {
            let m = MollerMap::new(&solver, &family, l, sign)?;
            let mut comp = 0.0f64;
            let mut suite = VerifyReport::new(format!("{sign} λ = {l}"));
            for _ in 0..ctx.cfg.trials {
                let phi = solver.causal_propagator(&sampling::gaussian_on(&g, &adm, true, &mut rng))?;
                comp = comp.max(rel(&m.apply(&m.inverse(&phi))?, &phi));
                comp = comp.max(rel(&m.inverse(&m.apply(&phi)?), &phi));
                let f = sampling::gaussian_on(&g, &adm, true, &mut rng);
                suite.checks.extend(m.verify_intertwining(&f)?.checks);
            }
            suite.check_le("r r^-1 = r^-1 r = id", comp, ctx.cfg.tolerances.residual);
            ctx.report.merge(suite);
        }
    }
    Ok(())
}

fn run_index(ctx: &mut Ctx<'_>) -> Result<()> {
    let solver = ctx.cfg.solver()?;
    let family = ctx.cfg.kernel_family(&solver)?;
    let tau = ctx.cfg.tolerances.tau_sing;
    let mut lambdas = ctx.cfg.lambdas();
    if let Some(scan) = ctx.cfg.scan {
        let window = scan.window()?;
        for sign in ctx.cfg.signs()? {
            let report = Fredholm::new(&solver, &family, sign)?.scan(&window, tau)?;
            lambdas.extend(report.points.iter().map(|p| p.lambda));
        }
    }
    if lambdas.is_empty() {
        return Err(CliError::Config("index needs λ values or a [scan] window".into()));
    }
    let mut reports: Vec<IndexReport> = Vec::new();
    for l in lambdas {
        let r = verify_index_duality(&solver, &family, l, tau)?;
        let mut checks = r.report.clone();
        checks.name = format!("λ = {l}");
        ctx.report.merge(checks);
        reports.push(r);
    }
    ctx.emit("reports.json", &to_json(&reports)?)?;
    Ok(())
}

fn run_lu(ctx: &mut Ctx<'_>) -> Result<()> {
    let Some(lu) = ctx.cfg.lu.clone() else {
        return Err(CliError::Config("lu needs an [lu] table".into()));
    };
    let g = ctx.cfg.grid()?;
    let k = ctx.cfg.region(&g)?;
    let ops = lu
        .masses
        .iter()
        .map(|&m| ctx.cfg.operator_with_mass(&g, Some(m)))
        .collect::<Result<Vec<_>>>()?;
    for (i, l) in ctx.lambdas()?.into_iter().enumerate() {
        let system = random_system(ops.clone(), &k, lu.diag_amplitude, lu.coupling, l, lu.seed.wrapping_add(i as u64))
            .map_err(CliError::Build)?;
        for sign in ctx.cfg.signs()? {
            let seed = ctx.cfg.seed.wrapping_add(i as u64);
            let mut r = verify_system(&system, sign, ctx.cfg.trials, seed)?;
            r.name = format!("{} components {sign} λ = {l}", system.n());
            ctx.report.merge(r);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NihiloRow {
    pub n: usize,
    pub kernel_dim: usize,
    /// Rank of the explicitly constructed kernel vectors.
    pub constructed: usize,
    pub max_residual: f64,
}

fn run_nihilo(ctx: &mut Ctx<'_>) -> Result<()> {
    let resolutions = match &ctx.cfg.nihilo {
        Some(n) => n.resolutions.clone(),
        None => match ctx.cfg.grid {
            crate::config::GridConfig::NullSquare { n, .. } => vec![n, 2 * n - 1],
            _ => return Err(CliError::Config("nihilo needs a null_square grid".into())),
        },
    };
    let l = ctx.cfg.lambdas().first().copied().unwrap_or(Complex64::new(1.0, 0.0));
    let tol = ctx.cfg.tolerances;
    let mut rows = Vec::new();
    for &n in &resolutions {
        let (solver, family) = ctx.cfg.nihilo_at(n)?;
        let fr = Fredholm::new(&solver, &family, Sign::Plus)?;
        let sys = fr.block(l).system();
        let vectors: Vec<CVector> = nihilo_kernel_vectors(&family)
            .iter()
            .map(|v| CVector::from_column_slice(v))
            .collect();
        let max_residual = vectors
            .iter()
            .map(|x| (&sys * x).norm() / x.norm())
            .fold(0.0, f64::max);
        let constructed = if vectors.is_empty() {
            0
        } else {
            linalg::rank(&CMatrix::from_columns(&vectors), 1e-8)
        };
        let kernel_dim = fr.kernel_dim(l, tol.tau_sing).dim;
        ctx.report
            .check_le(format!("n={n}: constructed kernel vectors"), max_residual, tol.residual);
        ctx.report.check_true(
            format!("n={n}: kernel dim {kernel_dim} >= constructed {constructed}"),
            kernel_dim >= constructed,
        );
        rows.push(NihiloRow {
            n,
            kernel_dim,
            constructed,
            max_residual,
        });
    }
    for w in rows.windows(2) {
        if w[1].n + 1 >= 2 * w[0].n {
            ctx.report.check_true(
                format!("dim(n={}) = {} >= 2 dim(n={}) - 1", w[1].n, w[1].kernel_dim, w[0].n),
                w[1].kernel_dim + 1 >= 2 * w[0].kernel_dim,
            );
        }
    }
    ctx.emit("rows.json", &to_json(&rows)?)?;
    Ok(())
}
