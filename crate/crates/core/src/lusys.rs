//! Block LU factorisation of `n x n` systems `𝒫 = (δ_ij P_i + A_ij(λ))` whose
//! interactions all live on one region `K`.
//!
//! Stage one inverts `P_1 + A_11` through the `K`-block; the Schur complement
//! `Q - S Ẽ_1 R` is again a system of the same shape with interaction kernels
//! `a_ij - μ a_i1 G̃_K a_1j`, where `G̃_K` is the `K x K` block of `Ẽ_1`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::green::{CausalSolver, Sign};
use crate::lattice::{admissible_sources, causal_set, support, GridFunction, Region, SUPPORT_TOL};
use crate::linalg::{self, CMatrix};
use crate::operators::{DiffOp, KernelFamily, LinearMap};
use crate::report::VerifyReport;
use crate::sampling;

/// One value per component.
pub type BlockFunction = Vec<GridFunction>;

/// `n x n` system of hyperbolic operators coupled through `K`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    solvers: Vec<CausalSolver>,
    region: Region,
    lambda: Complex64,
    /// `families[i][j]` is `A_ij`; `None` means zero.
    families: Vec<Vec<Option<KernelFamily>>>,
}

impl BlockSystem {
    /// `diag[i]` is `A_ii`, `offdiag` lists `((i, j), A_ij)` with `i != j`.
    pub fn new(
        ops: Vec<DiffOp>,
        region: &Region,
        diag: Vec<Option<KernelFamily>>,
        offdiag: Vec<((usize, usize), KernelFamily)>,
        lambda: Complex64,
    ) -> Result<Self> {
        let n = ops.len();
        if n == 0 {
            return Err(Error::InvalidSystem("a system needs at least one component".into()));
        }
        if diag.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: diag.len(),
            });
        }
        for op in &ops {
            if op.grid_spec() != region.grid() {
                return Err(Error::InvalidSystem("components live on different grids".into()));
            }
        }
        let mut families: Vec<Vec<Option<KernelFamily>>> = vec![vec![None; n]; n];
        for (i, d) in diag.into_iter().enumerate() {
            families[i][i] = d;
        }
        for ((i, j), fam) in offdiag {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidSystem(format!("bad off-diagonal index ({i}, {j})")));
            }
            families[i][j] = Some(fam);
        }
        for fam in families.iter().flatten().flatten() {
            if fam.coefficients().is_empty() || fam_region(fam) != region {
                return Err(Error::InvalidSystem("every interaction must live on the shared region".into()));
            }
        }
        Ok(BlockSystem {
            solvers: ops.into_iter().map(CausalSolver::new).collect(),
            region: region.clone(),
            lambda,
            families,
        })
    }

    pub fn n(&self) -> usize {
        self.solvers.len()
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn solvers(&self) -> &[CausalSolver] {
        &self.solvers
    }

    /// Kernel matrices `a_ij(λ)`.
    pub fn kernels(&self) -> Vec<Vec<CMatrix>> {
        let k = self.region.len();
        self.families
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| match f {
                        Some(fam) => fam.eval(self.lambda).matrix().clone(),
                        None => CMatrix::zeros(k, k),
                    })
                    .collect()
            })
            .collect()
    }

    /// `(𝒫 F)_i = P_i F_i + Σ_j A_ij F_j`.
    pub fn apply(&self, f: &[GridFunction]) -> BlockFunction {
        apply_evaluated(&self.solvers, &self.region, &self.kernels(), f)
    }
}

fn fam_region(fam: &KernelFamily) -> &Region {
    crate::operators::InteractionFamily::region(fam)
}

fn apply_evaluated(solvers: &[CausalSolver], region: &Region, a: &[Vec<CMatrix>], f: &[GridFunction]) -> BlockFunction {
    let w = Complex64::new(region.grid().weight(), 0.0);
    let restricted: Vec<DVector<Complex64>> = f.iter().map(|x| DVector::from_vec(region.restrict(x))).collect();
    solvers
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut out = s.op().apply(&f[i]);
            let mut acc = DVector::zeros(region.len());
            for (j, x) in restricted.iter().enumerate() {
                acc += &a[i][j] * x;
            }
            for (&k, v) in region.order().iter().zip(acc.iter()) {
                out.values[k] += v * w;
            }
            out
        })
        .collect()
}

/// Leading stage: `Ẽ_1` for `P_1 + A_11` plus the couplings to the rest.
#[derive(Debug, Clone)]
struct Stage {
    solver: CausalSolver,
    a11: CMatrix,
    /// `(I + μ a_11 G_K)^{-1}`.
    inv: CMatrix,
    /// `a_1j`, `j >= 2`.
    row: Vec<CMatrix>,
    /// `a_i1`, `i >= 2`.
    col: Vec<CMatrix>,
}

/// Recursive LU factorisation of a [`BlockSystem`] for one sign.
#[derive(Debug, Clone)]
pub struct FactoredSystem {
    sign: Sign,
    lambda: Complex64,
    region: Region,
    /// Kernels `a_ij` of the system this stage factors.
    kernels: Vec<Vec<CMatrix>>,
    stage: Stage,
    rest: Option<Box<FactoredSystem>>,
}

impl FactoredSystem {
    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn depth(&self) -> usize {
        1 + self.rest.as_ref().map_or(0, |r| r.depth())
    }

    /// Interaction kernels `a_ij` of the Schur complement, if any.
    pub fn schur_kernels(&self) -> Option<&[Vec<CMatrix>]> {
        self.rest.as_ref().map(|r| r.kernels.as_slice())
    }

    /// `Ẽ_1 f` for the leading stage.
    fn stage_green(&self, f: &GridFunction) -> GridFunction {
        let st = &self.stage;
        let w = Complex64::new(self.region.grid().weight(), 0.0);
        let ef = st.solver.solve_unchecked(f, self.sign);
        let b = &st.a11 * DVector::from_vec(self.region.restrict(&ef)) * w;
        let x = &st.inv * b;
        let mut g = f.clone();
        for (&k, v) in self.region.order().iter().zip(x.iter()) {
            g.values[k] -= v;
        }
        st.solver.solve_unchecked(&g, self.sign)
    }

    /// `E±_𝒫 F` by the block formula, recursively.
    pub fn green(&self, f: &[GridFunction]) -> Result<BlockFunction> {
        if f.len() != self.depth() {
            return Err(Error::DimensionMismatch {
                expected: self.depth(),
                found: f.len(),
            });
        }
        for x in f {
            self.stage.solver.check_source(x)?;
        }
        Ok(self.green_unchecked(f))
    }

    fn green_unchecked(&self, f: &[GridFunction]) -> BlockFunction {
        let w = Complex64::new(self.region.grid().weight(), 0.0);
        let Some(rest) = &self.rest else {
            return vec![self.stage_green(&f[0])];
        };
        // Z_rest = F_rest - S Ẽ_1 F_1
        let e1 = DVector::from_vec(self.region.restrict(&self.stage_green(&f[0])));
        let z_rest: Vec<GridFunction> = f[1..]
            .iter()
            .zip(&self.stage.col)
            .map(|(fi, ai1)| {
                let s = ai1 * &e1 * w;
                let mut z = fi.clone();
                for (&k, v) in self.region.order().iter().zip(s.iter()) {
                    z.values[k] -= v;
                }
                z
            })
            .collect();
        let x_rest = rest.green_unchecked(&z_rest);
        // X_1 = Ẽ_1 (F_1 - R X_rest)
        let mut rx = DVector::zeros(self.region.len());
        for (a1j, xj) in self.stage.row.iter().zip(&x_rest) {
            rx += a1j * DVector::from_vec(self.region.restrict(xj)) * w;
        }
        let mut src = f[0].clone();
        for (&k, v) in self.region.order().iter().zip(rx.iter()) {
            src.values[k] -= v;
        }
        let mut out = vec![self.stage_green(&src)];
        out.extend(x_rest);
        out
    }
}

fn factor_evaluated(
    solvers: &[CausalSolver],
    region: &Region,
    a: Vec<Vec<CMatrix>>,
    lambda: Complex64,
    sign: Sign,
    stage_index: usize,
    tau: f64,
) -> Result<FactoredSystem> {
    let n = solvers.len();
    let w = Complex64::new(region.grid().weight(), 0.0);
    let solver = solvers[0].clone();
    let gk = crate::scenarios::green_block(&solver, region, sign);
    let sys = linalg::identity(region.len()) + &a[0][0] * &gk * w;
    let sigma = linalg::singular_values(&sys);
    let (smin, smax) = (*sigma.last().unwrap_or(&1.0), *sigma.first().unwrap_or(&1.0));
    if smin <= tau * smax {
        return Err(Error::StageNearSingular {
            stage: stage_index,
            lambda,
            sigma_min: smin,
        });
    }
    let inv = sys.try_inverse().ok_or(Error::StageNearSingular {
        stage: stage_index,
        lambda,
        sigma_min: smin,
    })?;
    let a11 = a[0][0].clone();
    let row: Vec<CMatrix> = (1..n).map(|j| a[0][j].clone()).collect();
    let col: Vec<CMatrix> = (1..n).map(|i| a[i][0].clone()).collect();
    let rest = if n > 1 {
        let g_tilde = &gk * &inv;
        let reduced: Vec<Vec<CMatrix>> = (1..n)
            .map(|i| (1..n).map(|j| &a[i][j] - &a[i][0] * &g_tilde * &a[0][j] * w).collect())
            .collect();
        Some(Box::new(factor_evaluated(
            &solvers[1..],
            region,
            reduced,
            lambda,
            sign,
            stage_index + 1,
            tau,
        )?))
    } else {
        None
    };
    Ok(FactoredSystem {
        sign,
        lambda,
        region: region.clone(),
        kernels: a,
        stage: Stage {
            solver,
            a11,
            inv,
            row,
            col,
        },
        rest,
    })
}

pub fn lu_factor(system: &BlockSystem, sign: Sign) -> Result<FactoredSystem> {
    factor_evaluated(
        &system.solvers,
        &system.region,
        system.kernels(),
        system.lambda,
        sign,
        1,
        crate::fredholm::TAU_SING,
    )
}

pub fn system_green(factored: &FactoredSystem, f: &[GridFunction]) -> Result<BlockFunction> {
    factored.green(f)
}

fn max_abs_block(f: &[GridFunction]) -> f64 {
    f.iter().map(|x| x.max_abs()).fold(0.0, f64::max)
}

/// Two-sided inverse identities and block support checks on random sources.
pub fn verify_system(system: &BlockSystem, sign: Sign, trials: usize, seed: u64) -> Result<VerifyReport> {
    let fac = lu_factor(system, sign)?;
    let g = *system.region.grid();
    let adm = admissible_sources(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport::new(format!("system{sign}"));
    let (mut right, mut left, mut cone_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..trials {
        let f: BlockFunction = (0..system.n()).map(|_| sampling::gaussian_on(&g, &adm, true, &mut rng)).collect();
        let x = fac.green(&f)?;
        let px = system.apply(&x);
        let scale = max_abs_block(&f);
        for (i, s) in system.solvers.iter().enumerate() {
            let defining = s.op().defining_cells();
            right = right.max(px[i].sub(&f[i]).max_abs_on(&defining) / scale);
        }
        let test: BlockFunction = (0..system.n()).map(|_| sampling::gaussian_on(&g, &adm, true, &mut rng)).collect();
        let back = fac.green(&system.apply(&test))?;
        let tscale = max_abs_block(&test);
        for (b, t) in back.iter().zip(&test) {
            left = left.max(b.sub(t).max_abs() / tscale);
        }
        // support of the sparse sources
        let sparse: BlockFunction = (0..system.n()).map(|_| sampling::sparse_on(&g, &adm, 2, &mut rng)).collect();
        let mut seed_set = system.region.cells().clone();
        for x in &sparse {
            seed_set = seed_set.union(&support(x, SUPPORT_TOL));
        }
        let cone = causal_set(&g, &seed_set, sign.direction());
        for x in fac.green(&sparse)? {
            cone_ok &= support(&x, SUPPORT_TOL).is_subset(&cone);
        }
    }
    report.check_le("𝒫 E F - F (rel)", right, 1e-9);
    report.check_le("E 𝒫 G - G (rel)", left, 1e-9);
    report.check_true("supp E F in J(supp F ∪ K)", cone_ok);
    Ok(report)
}

/// Random system with gaussian-bump kernels: diagonal interactions of size
/// `diag_amplitude` and couplings of size `coupling`, all of degree one.
pub fn random_system(
    ops: Vec<DiffOp>,
    region: &Region,
    diag_amplitude: f64,
    coupling: f64,
    lambda: Complex64,
    seed: u64,
) -> Result<BlockSystem> {
    let n = ops.len();
    let solvers: Vec<CausalSolver> = ops.iter().cloned().map(CausalSolver::new).collect();
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::new();
    for i in 0..n {
        diag.push(Some(crate::scenarios::kernel_gaussian(
            &solvers[i],
            region,
            1,
            diag_amplitude,
            seed.wrapping_add(i as u64),
        )?));
        for j in 0..n {
            if i != j && coupling > 0.0 {
                let s = seed.wrapping_mul(31).wrapping_add((i * n + j) as u64 + 1000);
                offdiag.push(((i, j), crate::scenarios::kernel_gaussian(&solvers[j], region, 1, coupling, s)?));
            }
        }
    }
    BlockSystem::new(ops, region, diag, offdiag, lambda)
}
