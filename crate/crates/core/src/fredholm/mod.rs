//! Reduction of the perturbed problem `P + A(λ)` to the `|K| x |K|` matrix
//! `I + Y±(λ)` with `Y±(λ) = A(λ)E±` restricted to `K`.
//!
//! [`Fredholm`] precomputes the Green columns `E±δ_q` for `q ∈ K` and the
//! coefficient blocks `M_k = (A_k E± δ_q)(p)`, so that `Y(λ) = Σ λ^k M_k` costs
//! one small matrix sum per `λ`. The free functions mirror the methods for
//! one-off use.

mod index;
mod scan;

pub use index::{verify_index_duality, IndexReport};
pub use scan::{scan_exceptional, ExceptionalPoint, ScanReport, ScanSample, ScanWindow};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{CausalSolver, Sign};
use crate::lattice::{causal_set, support, CellSet, GridFunction, Region, SUPPORT_TOL};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::operators::{InteractionFamily, LinearMap};
use crate::par;

/// Default relative singularity threshold on `σ_min / σ_max`.
pub const TAU_SING: f64 = 1e-8;

/// Default cap on the number of grid cells for [`dense_oracle`].
pub const DENSE_ORACLE_CAP: usize = 2500;

/// `Y±(λ)` on `K`: `matrix[(p, q)] = (A(λ) E± δ_q)(p)` with `δ_q` the unit
/// impulse at the `q`-th cell of `K`. For a `K`-supported source with values
/// `x`, `(A(λ)E± x)|_K = matrix · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct KBlock {
    pub sign: Sign,
    pub lambda: Complex64,
    pub matrix: CMatrix,
}

impl KBlock {
    /// `I + Y`.
    pub fn system(&self) -> CMatrix {
        linalg::identity(self.matrix.nrows()) + &self.matrix
    }

    pub fn determinant(&self) -> Complex64 {
        linalg::determinant(&self.system())
    }

    /// Singular values of `I + Y`, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.system())
    }
}

/// `(σ_min, σ_max)` of a descending list; `(1, 1)` for an empty region.
fn extremes(sigma: &[f64]) -> (f64, f64) {
    match (sigma.last(), sigma.first()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (1.0, 1.0),
    }
}

/// Kernel of `I + Y±(λ)` and the homogeneous solutions it generates.
#[derive(Debug, Clone)]
pub struct KernelInfo {
    pub sign: Sign,
    pub lambda: Complex64,
    pub dim: usize,
    /// All singular values of `I + Y`, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors for the singular values below `τ σ_max`, in region order.
    pub block_basis: Vec<CVector>,
    /// `E± h` for each basis vector `h`.
    pub solutions: Vec<GridFunction>,
    /// `max |(P + A(λ)) E± h| / max |h|` on the defining cells, per solution.
    pub residuals: Vec<f64>,
    /// Whether every solution is supported in `J±(K)`.
    pub supported_in_cone: bool,
}

/// Partial sums of the Born series `Σ_{k<=n} E±(-A(λ)E±)^k f`.
#[derive(Debug, Clone)]
pub struct BornSeries {
    pub partial_sums: Vec<GridFunction>,
    /// `max |t_k|` of the terms `t_k = (-A(λ)E±)^k f`, `k = 0..=n_max`.
    pub term_norms: Vec<f64>,
    /// Geometric-mean growth of the terms after the first.
    pub ratio: f64,
    pub diverging: bool,
}

/// Summary of one Cauchy–Riemann spot check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolomorphyCheck {
    pub lambda: Complex64,
    pub target: usize,
    pub source: usize,
    /// `|∂_x F + i ∂_y F|` scaled by `max(1, |∂_x F|)`.
    pub defect: f64,
}

/// Precomputed data for `P + A(λ)` with a fixed sign.
pub struct Fredholm<'a> {
    solver: &'a CausalSolver,
    family: &'a dyn InteractionFamily,
    sign: Sign,
    /// `E± δ_q` for each `q` in region order.
    columns: Vec<GridFunction>,
    /// `M_k`, `k = 1..=degree`.
    coefficient_blocks: Vec<CMatrix>,
}

impl std::fmt::Debug for Fredholm<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fredholm")
            .field("sign", &self.sign)
            .field("region", &self.family.region().label())
            .field("k", &self.columns.len())
            .field("degree", &self.coefficient_blocks.len())
            .finish()
    }
}

impl<'a> Fredholm<'a> {
    pub fn new(solver: &'a CausalSolver, family: &'a dyn InteractionFamily, sign: Sign) -> Result<Self> {
        let region = family.region();
        if region.grid() != solver.grid() {
            return Err(Error::InvalidRegion("region and solver live on different grids".into()));
        }
        if !region.cells().is_subset(solver.source_domain()) {
            return Err(Error::InvalidRegion("region leaves the solver's source domain".into()));
        }
        let g = *solver.grid();
        let order = region.order().to_vec();
        let columns = par::map_slice(&order, |&q| {
            let mut d = GridFunction::zeros(&g);
            d.values[q] = ONE;
            solver.solve_unchecked(&d, sign)
        });
        let k = order.len();
        let coefficient_blocks = (1..=family.degree())
            .map(|deg| {
                let cols = par::map_slice(&columns, |u| family.coefficient_on_region(deg, u));
                CMatrix::from_fn(k, k, |p, q| cols[q][p])
            })
            .collect();
        Ok(Fredholm {
            solver,
            family,
            sign,
            columns,
            coefficient_blocks,
        })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn solver(&self) -> &CausalSolver {
        self.solver
    }

    pub fn family(&self) -> &dyn InteractionFamily {
        self.family
    }

    pub fn region(&self) -> &Region {
        self.family.region()
    }

    /// `M_k = A_k E±` on `K`, `k = 1..=degree`.
    pub fn coefficient_blocks(&self) -> &[CMatrix] {
        &self.coefficient_blocks
    }

    /// Values of `E± δ_q` on `K` (rows = targets, cols = sources).
    pub fn green_block(&self) -> CMatrix {
        let order = self.region().order();
        CMatrix::from_fn(order.len(), order.len(), |p, q| self.columns[q].values[order[p]])
    }

    pub fn block(&self, lambda: Complex64) -> KBlock {
        let k = self.columns.len();
        let mut m = CMatrix::zeros(k, k);
        let mut power = ONE;
        for mk in &self.coefficient_blocks {
            power *= lambda;
            m += mk * power;
        }
        KBlock {
            sign: self.sign,
            lambda,
            matrix: m,
        }
    }

    /// Solves `(I + Y) x = b` after checking `σ_min > τ σ_max`.
    fn solve_block(&self, lambda: Complex64, b: &[Complex64], tau: f64) -> Result<Vec<Complex64>> {
        if b.is_empty() {
            return Ok(Vec::new());
        }
        let sys = self.block(lambda).system();
        let (smin, smax) = extremes(&linalg::singular_values(&sys));
        if smin <= tau * smax {
            return Err(Error::NearSingular {
                lambda,
                sigma_min: smin,
            });
        }
        let x = sys
            .lu()
            .solve(&DVector::from_column_slice(b))
            .ok_or(Error::NearSingular {
                lambda,
                sigma_min: smin,
            })?;
        Ok(x.iter().copied().collect())
    }

    /// `g` with `g + A(λ)E± g = f`.
    pub fn resolve_sources(&self, lambda: Complex64, f: &GridFunction) -> Result<GridFunction> {
        self.solver.check_source(f)?;
        if lambda == ZERO {
            return Ok(f.clone());
        }
        let ef = self.solver.solve_unchecked(f, self.sign);
        let g1 = self.family.apply_on_region(lambda, &ef);
        if g1.iter().all(|v| *v == ZERO) {
            return Ok(f.clone());
        }
        let x = self.solve_block(lambda, &g1, TAU_SING)?;
        let mut g = f.clone();
        for (&k, v) in self.region().order().iter().zip(&x) {
            g.values[k] -= v;
        }
        Ok(g)
    }

    /// `Ẽ± f = E± (I + A(λ)E±)^{-1} f`.
    pub fn modified_green(&self, lambda: Complex64, f: &GridFunction) -> Result<GridFunction> {
        let g = self.resolve_sources(lambda, f)?;
        Ok(self.solver.solve_unchecked(&g, self.sign))
    }

    /// `(P + A(λ)) u`.
    pub fn apply_perturbed(&self, lambda: Complex64, u: &GridFunction) -> GridFunction {
        let mut out = self.solver.op().apply(u);
        for (&k, v) in self.region().order().iter().zip(self.family.apply_on_region(lambda, u)) {
            out.values[k] += v;
        }
        out
    }

    pub fn born_series(&self, lambda: Complex64, f: &GridFunction, n_max: usize) -> Result<BornSeries> {
        self.solver.check_source(f)?;
        let order = self.region().order();
        let y = self.block(lambda).matrix;
        let base = self.solver.solve_unchecked(f, self.sign);
        let mut partial_sums = vec![base.clone()];
        let mut term_norms = vec![f.max_abs()];
        let mut acc = CVector::zeros(order.len());
        let mut t = -DVector::from_vec(self.family.apply_on_region(lambda, &base));
        for _ in 1..=n_max {
            term_norms.push(linalg::max_abs_slice(t.as_slice()));
            acc += &t;
            let mut src = GridFunction::zeros(self.solver.grid());
            for (&k, v) in order.iter().zip(acc.iter()) {
                src.values[k] = *v;
            }
            partial_sums.push(base.add(&self.solver.solve_unchecked(&src, self.sign)));
            t = -(&y * t);
        }
        let ratio = growth_ratio(&term_norms);
        Ok(BornSeries {
            partial_sums,
            term_norms,
            ratio,
            diverging: ratio > 1.0,
        })
    }

    pub fn kernel_dim(&self, lambda: Complex64, tau: f64) -> KernelInfo {
        let sys = self.block(lambda).system();
        let svd = linalg::right_svd(&sys);
        let (_, smax) = extremes(&svd.sigma);
        let region = self.region();
        let g = *self.solver.grid();
        let cone = causal_set(&g, region.cells(), self.sign.direction());
        let defining = self.solver.op().defining_cells();
        let mut info = KernelInfo {
            sign: self.sign,
            lambda,
            dim: 0,
            sigma: svd.sigma.clone(),
            block_basis: Vec::new(),
            solutions: Vec::new(),
            residuals: Vec::new(),
            supported_in_cone: true,
        };
        for (s, v) in svd.sigma.iter().zip(svd.right) {
            if *s > tau * smax {
                continue;
            }
            let h = region.extend(v.as_slice());
            let u = self.solver.solve_unchecked(&h, self.sign);
            let res = self.apply_perturbed(lambda, &u).max_abs_on(&defining) / h.max_abs();
            info.supported_in_cone &= support(&u, SUPPORT_TOL).is_subset(&cone);
            info.residuals.push(res);
            info.solutions.push(u);
            info.block_basis.push(v);
            info.dim += 1;
        }
        info
    }

    /// Cauchy–Riemann defect of `λ -> (Ẽ± δ_source)(target)` at `lambda`.
    pub fn holomorphy_defect(&self, lambda: Complex64, target: usize, source: usize, step: f64) -> Result<HolomorphyCheck> {
        let g = *self.solver.grid();
        let mut d = GridFunction::zeros(&g);
        d.values[source] = ONE;
        let entry = |l: Complex64| -> Result<Complex64> { Ok(self.modified_green(l, &d)?.values[target]) };
        let dx = (entry(lambda + step)? - entry(lambda - step)?) / (2.0 * step);
        let i = Complex64::new(0.0, step);
        let dy = (entry(lambda + i)? - entry(lambda - i)?) / (2.0 * step);
        let defect = (dx + Complex64::i() * dy).norm() / dx.norm().max(1.0);
        Ok(HolomorphyCheck {
            lambda,
            target,
            source,
            defect,
        })
    }

    /// Taylor coefficients `C_0..=C_n` of `(I + Y(λ))^{-1}` about `λ = 0`.
    pub fn inverse_taylor(&self, n: usize) -> Vec<CMatrix> {
        let k = self.columns.len();
        let mut c: Vec<CMatrix> = vec![linalg::identity(k)];
        for order in 1..=n {
            let mut next = CMatrix::zeros(k, k);
            for (j, mj) in self.coefficient_blocks.iter().enumerate().take(order) {
                next -= mj * &c[order - j - 1];
            }
            c.push(next);
        }
        c
    }
}

/// `(|t_n| / |t_1|)^{1/(n-1)}`; zero when the series terminates.
fn growth_ratio(norms: &[f64]) -> f64 {
    let n = norms.len();
    if n < 3 || norms[1] == 0.0 {
        return 0.0;
    }
    (norms[n - 1] / norms[1]).powf(1.0 / (n - 2) as f64)
}

/// Sums `Σ λ^k C_k` for `k <= n`.
pub fn taylor_sum(coefficients: &[CMatrix], lambda: Complex64, n: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(coefficients[0].nrows(), coefficients[0].ncols());
    let mut power = ONE;
    for c in coefficients.iter().take(n + 1) {
        acc += c * power;
        power *= lambda;
    }
    acc
}

pub fn k_block(solver: &CausalSolver, family: &dyn InteractionFamily, lambda: Complex64, sign: Sign) -> Result<KBlock> {
    Ok(Fredholm::new(solver, family, sign)?.block(lambda))
}

pub fn resolve_sources(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    lambda: Complex64,
    sign: Sign,
    f: &GridFunction,
) -> Result<GridFunction> {
    Fredholm::new(solver, family, sign)?.resolve_sources(lambda, f)
}

pub fn modified_green(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    lambda: Complex64,
    sign: Sign,
    f: &GridFunction,
) -> Result<GridFunction> {
    Fredholm::new(solver, family, sign)?.modified_green(lambda, f)
}

pub fn born_series(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    lambda: Complex64,
    sign: Sign,
    f: &GridFunction,
    n_max: usize,
) -> Result<BornSeries> {
    Fredholm::new(solver, family, sign)?.born_series(lambda, f, n_max)
}

pub fn kernel_dim(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    lambda: Complex64,
    sign: Sign,
    tau: f64,
) -> Result<KernelInfo> {
    Ok(Fredholm::new(solver, family, sign)?.kernel_dim(lambda, tau))
}

/// Brute-force solution of `(P + A(λ)) u = f` with `u` vanishing on the two
/// initial (`+`) or final (`-`) rows, by dense LU with full pivoting.
///
/// Reports [`Error::SingularSystem`] when the smallest pivot falls below
/// `1e-10` of the largest.
pub fn dense_oracle(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    lambda: Complex64,
    sign: Sign,
    f: &GridFunction,
    cap: usize,
) -> Result<GridFunction> {
    let g = *solver.grid();
    let n = g.len();
    if n > cap {
        return Err(Error::DenseCapExceeded { cells: n, cap });
    }
    solver.check_source(f)?;
    let op = solver.op();
    let fixed = boundary_cells(solver, sign);
    let region = family.region();
    // columns of A(λ) on K
    let a_cols = par::map_range(n, |c| {
        let mut d = GridFunction::zeros(&g);
        d.values[c] = ONE;
        family.apply_on_region(lambda, &d)
    });
    // equations: zero data on the boundary cells, then (P + A) on the defining cells
    let mut eq_of_cell = vec![None; n];
    let mut rows: Vec<usize> = fixed.indices();
    let first_equation = rows.len();
    for r in 0..n {
        if op.is_defining(g.cell(r)) {
            eq_of_cell[r] = Some(rows.len());
            rows.push(r);
        }
    }
    if rows.len() != n {
        return Err(Error::InvalidSystem(format!("{} equations for {n} unknowns", rows.len())));
    }
    let mut m = CMatrix::zeros(n, n);
    let mut rhs = CVector::zeros(n);
    for (e, &r) in rows.iter().enumerate() {
        if e < first_equation {
            m[(e, r)] = ONE;
            continue;
        }
        for (other, coeff) in op.stencil_row(g.cell(r)) {
            m[(e, g.index(other))] += coeff;
        }
        rhs[e] = f.values[r];
    }
    for (p, &r) in region.order().iter().enumerate() {
        let Some(e) = eq_of_cell[r] else { continue };
        for (c, col) in a_cols.iter().enumerate() {
            m[(e, c)] += col[p];
        }
    }
    let lu = m.full_piv_lu();
    let pivots: Vec<f64> = lu.u().diagonal().iter().map(|v| v.norm()).collect();
    let pmax = pivots.iter().copied().fold(0.0, f64::max);
    let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(pmin > 1e-10 * pmax) {
        return Err(Error::SingularSystem);
    }
    let u = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    GridFunction::from_values(&g, u.iter().copied().collect())
}

/// Cells carrying the zero data of `E±`: two rows at the start (`+`) or end
/// (`-`) of each causal axis on the circle, the first or last row and column
/// on the null square.
pub fn boundary_cells(solver: &CausalSolver, sign: Sign) -> CellSet {
    let g = *solver.grid();
    match g.topology {
        crate::lattice::Topology::TimeBoundedCircle => CellSet::from_predicate(&g, |c| match sign {
            Sign::Plus => c.n < 2,
            Sign::Minus => c.n + 2 >= g.nt,
        }),
        crate::lattice::Topology::NullSquare => CellSet::from_predicate(&g, |c| match sign {
            Sign::Plus => c.n == 0 || c.j == 0,
            Sign::Minus => c.n + 1 == g.nt || c.j + 1 == g.nx,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{admissible_sources, Cell, GridSpec};
    use crate::operators::{make_klein_gordon, make_rank_one, KernelFamily};
    use crate::profiles::bump2d;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup() -> (CausalSolver, Region) {
        let g = GridSpec::circle(20, 12, 0.05, 0.0625).unwrap();
        let s = CausalSolver::new(make_klein_gordon(&g, 1.0, None).unwrap());
        let k = Region::rectangle(&g, 7, 10, 3, 6).unwrap();
        (s, k)
    }

    fn random_family(k: &Region, degree: usize, seed: u64) -> KernelFamily {
        let g = *k.grid();
        let s = CausalSolver::new(make_klein_gordon(&g, 1.0, None).unwrap());
        crate::scenarios::kernel_gaussian(&s, k, degree, 1.0, seed).unwrap()
    }

    fn rel(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn block_vanishes_at_zero_and_is_linear() {
        let (s, k) = setup();
        let fam = random_family(&k, 1, 1);
        let fr = Fredholm::new(&s, &fam, Sign::Plus).unwrap();
        assert_eq!(linalg::max_abs(&fr.block(ZERO).matrix), 0.0);
        let l = c(0.3, -0.7);
        let diff = fr.block(l).matrix - fr.block(ONE).matrix * l;
        assert!(linalg::max_abs(&diff) <= 1e-14 * linalg::max_abs(&fr.block(ONE).matrix));
    }

    #[test]
    fn block_columns_match_direct_composition() {
        let (s, k) = setup();
        let fam = random_family(&k, 2, 2);
        let l = c(0.4, 0.2);
        for sign in Sign::BOTH {
            let b = k_block(&s, &fam, l, sign).unwrap();
            for (q, &cell) in k.order().iter().enumerate() {
                let d = GridFunction::impulse(s.grid(), s.grid().cell(cell));
                let col = fam.apply_on_region(l, &s.solve(&d, sign).unwrap());
                for p in 0..k.len() {
                    assert!((b.matrix[(p, q)] - col[p]).norm() <= 1e-13 * (1.0 + col[p].norm()));
                }
            }
        }
    }

    #[test]
    fn rank_one_block_has_rank_one() {
        let (s, k) = setup();
        let g = *s.grid();
        let f = bump2d(&g, (g.time(8), g.space(4)), (0.1, 0.15), 1.0).masked(k.cells());
        let h = bump2d(&g, (g.time(9), g.space(5)), (0.1, 0.15), 1.0).masked(k.cells());
        let a = make_rank_one(&f, &h, &k).unwrap();
        let fam = KernelFamily::linear(&a);
        let b = k_block(&s, &fam, c(2.0, 1.0), Sign::Plus).unwrap();
        assert_eq!(linalg::rank(&b.matrix, 1e-10), 1);
    }

    #[test]
    fn resolved_sources_satisfy_the_defining_equation() {
        let (s, k) = setup();
        let g = *s.grid();
        let fam = random_family(&k, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = sampling::gaussian_on(&g, &admissible_sources(&g), true, &mut rng);
        for sign in Sign::BOTH {
            let fr = Fredholm::new(&s, &fam, sign).unwrap();
            assert_eq!(fr.resolve_sources(ZERO, &f).unwrap(), f);
            let l = c(0.1, 0.0);
            let gsrc = fr.resolve_sources(l, &f).unwrap();
            let back = gsrc.add(&fam.apply(l, &s.solve(&gsrc, sign).unwrap()));
            assert!(rel(&back, &f) <= 1e-10);
        }
    }

    #[test]
    fn sources_beyond_the_region_are_untouched() {
        let (s, k) = setup();
        let g = *s.grid();
        let fam = random_family(&k, 1, 4);
        // rows after K for E+, rows before K for E-
        let late = GridFunction::impulse(&g, Cell::new(14, 4));
        let early = GridFunction::impulse(&g, Cell::new(3, 4));
        let l = c(0.5, 0.5);
        let fp = Fredholm::new(&s, &fam, Sign::Plus).unwrap();
        let fm = Fredholm::new(&s, &fam, Sign::Minus).unwrap();
        assert_eq!(fp.resolve_sources(l, &late).unwrap(), late);
        assert_eq!(fm.resolve_sources(l, &early).unwrap(), early);
        assert_eq!(fp.modified_green(l, &late).unwrap(), s.retarded(&late).unwrap());
    }

    #[test]
    fn modified_green_matches_dense_oracle_and_is_inverse() {
        let (s, k) = setup();
        let g = *s.grid();
        let fam = random_family(&k, 1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let adm = admissible_sources(&g);
        let f = sampling::gaussian_on(&g, &adm, true, &mut rng);
        let test = sampling::gaussian_on(&g, &adm, true, &mut rng);
        let defining = s.op().defining_cells();
        for sign in Sign::BOTH {
            let fr = Fredholm::new(&s, &fam, sign).unwrap();
            let l = c(0.2, 0.1);
            let u = fr.modified_green(l, &f).unwrap();
            let oracle = dense_oracle(&s, &fam, l, sign, &f, DENSE_ORACLE_CAP).unwrap();
            assert!(rel(&u, &oracle) <= 1e-8, "{sign}: {}", rel(&u, &oracle));
            let res = fr.apply_perturbed(l, &u).sub(&f).max_abs_on(&defining) / f.max_abs();
            assert!(res <= 1e-10);
            let pg = fr.apply_perturbed(l, &test);
            assert!(rel(&fr.modified_green(l, &pg).unwrap(), &test) <= 1e-10);
            let zero = dense_oracle(&s, &fam, ZERO, sign, &f, DENSE_ORACLE_CAP).unwrap();
            assert!(rel(&zero, &s.solve(&f, sign).unwrap()) <= 1e-10);
        }
        assert!(matches!(
            dense_oracle(&s, &fam, ONE, Sign::Plus, &f, 10),
            Err(Error::DenseCapExceeded { .. })
        ));
    }

    #[test]
    fn transfer_to_the_full_source_space() {
        // invert I + A E± densely on all defining cells and compare
        let (s, k) = setup();
        let g = *s.grid();
        let fam = random_family(&k, 1, 8);
        let l = c(-0.3, 0.2);
        let cells = s.source_domain().indices();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = sampling::gaussian_on(&g, s.source_domain(), true, &mut rng);
        for sign in Sign::BOTH {
            let cols = par::map_slice(&cells, |&q| {
                let mut d = GridFunction::zeros(&g);
                d.values[q] = ONE;
                d.add(&fam.apply(l, &s.solve_unchecked(&d, sign)))
            });
            let m = CMatrix::from_fn(cells.len(), cells.len(), |r, q| cols[q].values[cells[r]]);
            let b = CVector::from_iterator(cells.len(), cells.iter().map(|&r| f.values[r]));
            let x = m.lu().solve(&b).unwrap();
            let gsrc = resolve_sources(&s, &fam, l, sign, &f).unwrap();
            let err = cells
                .iter()
                .zip(x.iter())
                .map(|(&r, v)| (gsrc.values[r] - v).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-10 * f.max_abs());
        }
    }

    #[test]
    fn near_singular_lambda_is_reported() {
        let (s, k) = setup();
        let g = *s.grid();
        let f = bump2d(&g, (g.time(8), g.space(4)), (0.1, 0.15), 1.0).masked(k.cells());
        let h = bump2d(&g, (g.time(9), g.space(4)), (0.1, 0.15), 1.0).masked(k.cells());
        let fam = KernelFamily::linear(&make_rank_one(&f, &h, &k).unwrap());
        let nu = h.pairing(&s.retarded(&f).unwrap());
        let star = ONE / nu;
        let err = modified_green(&s, &fam, star, Sign::Plus, &f).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }));
        assert!(matches!(
            dense_oracle(&s, &fam, star, Sign::Plus, &f, DENSE_ORACLE_CAP),
            Err(Error::SingularSystem)
        ));
        let info = kernel_dim(&s, &fam, star, Sign::Plus, TAU_SING).unwrap();
        assert_eq!(info.dim, 1);
        assert!(info.residuals[0] <= 1e-8);
        assert!(info.supported_in_cone);
        let ef = s.retarded(&f).unwrap();
        assert!(linalg::line_angle(&ef.values, &info.solutions[0].values) <= 1e-6);
        assert_eq!(kernel_dim(&s, &fam, ZERO, Sign::Plus, TAU_SING).unwrap().dim, 0);
    }

    #[test]
    fn born_series_for_rank_one_is_geometric() {
        let (s, k) = setup();
        let g = *s.grid();
        let f = bump2d(&g, (g.time(8), g.space(4)), (0.1, 0.15), 1.0).masked(k.cells());
        let h = bump2d(&g, (g.time(9), g.space(4)), (0.1, 0.15), 1.0).masked(k.cells());
        let fam = KernelFamily::linear(&make_rank_one(&f, &h, &k).unwrap());
        let nu = h.pairing(&s.retarded(&f).unwrap());
        let fr = Fredholm::new(&s, &fam, Sign::Plus).unwrap();
        let l = c(0.0, 0.4) / nu;
        let exact = fr.modified_green(l, &f).unwrap();
        let series = fr.born_series(l, &f, 8).unwrap();
        assert!((series.ratio - 0.4).abs() <= 1e-10);
        assert!(!series.diverging);
        let errs: Vec<f64> = series.partial_sums.iter().map(|p| p.sub(&exact).max_abs()).collect();
        for n in 1..8 {
            assert!((errs[n + 1] / errs[n] - 0.4).abs() < 1e-6);
        }
        assert!(fr.born_series(ONE * 2.0 / nu, &f, 8).unwrap().diverging);
        let zero = fr.born_series(ZERO, &f, 3).unwrap();
        assert!(zero.partial_sums.iter().all(|p| *p == zero.partial_sums[0]));
    }

    #[test]
    fn entries_are_holomorphic_in_lambda() {
        let (s, k) = setup();
        let fam = random_family(&k, 2, 10);
        let fr = Fredholm::new(&s, &fam, Sign::Plus).unwrap();
        let src = s.grid().index(Cell::new(6, 4));
        let tgt = s.grid().index(Cell::new(15, 5));
        for l in [c(0.1, 0.05), c(-0.2, 0.1)] {
            let chk = fr.holomorphy_defect(l, tgt, src, 1e-4).unwrap();
            assert!(chk.defect <= 1e-6, "{chk:?}");
        }
    }

    #[test]
    fn inverse_matches_its_taylor_polynomial() {
        let (s, k) = setup();
        let fam = random_family(&k, 1, 11);
        let fr = Fredholm::new(&s, &fam, Sign::Minus).unwrap();
        let m1 = &fr.coefficient_blocks()[0];
        // nearest exceptional point of I + λ M1 is 1 / spectral radius
        let eig = nalgebra::Schur::new(m1.clone()).eigenvalues().unwrap();
        let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let l = c(0.0, 0.3 / radius);
        let exact = fr.block(l).system().try_inverse().unwrap();
        let coeffs = fr.inverse_taylor(12);
        let errs: Vec<f64> = (4..=12).map(|n| linalg::max_abs(&(taylor_sum(&coeffs, l, n) - &exact))).collect();
        let rate = (errs[8] / errs[0]).powf(1.0 / 8.0);
        assert!(rate <= 0.3 * 1.1, "{rate}");
    }
}
