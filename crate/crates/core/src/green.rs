//! Exact retarded and advanced Green operators for the lattice stencils.
//!
//! Klein–Gordon sources are marched by leapfrog from two zero rows at the start
//! (retarded) or end (advanced) of the time axis. The null-square operator is
//! inverted by two-dimensional cumulative sums. Both are exact inverses of the
//! stencil on its defining rows, up to rounding.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    admissible_sources, causal_set, support, CellSet, Direction, GridFunction, GridSpec, SUPPORT_TOL,
};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::operators::{DiffKind, DiffOp, LinearMap, NullOrientation};
use crate::report::VerifyReport;
use crate::sampling;

/// `+` selects the retarded operator `E⁺`, `-` the advanced operator `E⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn direction(self) -> Direction {
        match self {
            Sign::Plus => Direction::Future,
            Sign::Minus => Direction::Past,
        }
    }

    pub fn opposite(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

impl std::str::FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "+" | "plus" | "retarded" => Ok(Sign::Plus),
            "-" | "minus" | "advanced" => Ok(Sign::Minus),
            other => Err(format!("unknown sign {other:?}")),
        }
    }
}

/// Default cap on the number of cells for dense verification matrices.
pub const DENSE_CAP: usize = 4096;

/// A stencil together with its causal inverses.
#[derive(Debug, Clone)]
pub struct CausalSolver {
    op: DiffOp,
    sources: CellSet,
}

impl CausalSolver {
    pub fn new(op: DiffOp) -> Self {
        let sources = op.defining_cells();
        CausalSolver { op, sources }
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid_spec()
    }

    /// Cells a source may occupy (the defining cells of the stencil).
    pub fn source_domain(&self) -> &CellSet {
        &self.sources
    }

    /// Solver for the formal dual stencil.
    pub fn dual(&self) -> CausalSolver {
        CausalSolver::new(self.op.dual())
    }

    pub fn check_source(&self, f: &GridFunction) -> Result<()> {
        if !f.is_finite() {
            return Err(Error::NonFinite);
        }
        for (k, v) in f.values.iter().enumerate() {
            if *v != ZERO && !self.sources.contains_index(k) {
                return Err(Error::SourceOutsideDomain {
                    cell: self.grid().cell(k),
                });
            }
        }
        Ok(())
    }

    /// `E± f`.
    pub fn solve(&self, f: &GridFunction, sign: Sign) -> Result<GridFunction> {
        self.check_source(f)?;
        Ok(self.solve_unchecked(f, sign))
    }

    pub fn retarded(&self, f: &GridFunction) -> Result<GridFunction> {
        self.solve(f, Sign::Plus)
    }

    pub fn advanced(&self, f: &GridFunction) -> Result<GridFunction> {
        self.solve(f, Sign::Minus)
    }

    /// `E f = E⁻ f - E⁺ f`.
    pub fn causal_propagator(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_source(f)?;
        Ok(self.solve_unchecked(f, Sign::Minus).sub(&self.solve_unchecked(f, Sign::Plus)))
    }

    /// `σ(Ef₁, Ef₂) = <f₁, E f₂>` for a formally self-adjoint stencil.
    pub fn symplectic_form(&self, f1: &GridFunction, f2: &GridFunction) -> Result<Complex64> {
        let defect = self.op.self_adjoint_defect();
        if defect > 1e-12 {
            return Err(Error::NotSelfAdjoint(defect));
        }
        self.check_source(f1)?;
        Ok(f1.pairing(&self.causal_propagator(f2)?))
    }

    /// Green operator applied to a source already known to lie in the source domain.
    /// Values outside the domain are ignored.
    pub(crate) fn solve_unchecked(&self, f: &GridFunction, sign: Sign) -> GridFunction {
        let g = *self.grid();
        let values = match self.op.kind() {
            DiffKind::KleinGordon { .. } => self.march(&f.values, sign),
            DiffKind::NullWave(o) => null_solve(&g, *o, &f.values, sign),
        };
        GridFunction { grid: g, values }
    }

    fn march(&self, f: &[Complex64], sign: Sign) -> Vec<Complex64> {
        let g = self.grid();
        let (nt, nx) = (g.nt, g.nx);
        let dt2 = g.dt * g.dt;
        let ix2 = 1.0 / (g.dx * g.dx);
        let m2 = self.op.mass() * self.op.mass();
        let mut u = vec![ZERO; nt * nx];
        let row_live = |n: usize| f[n * nx..(n + 1) * nx].iter().any(|v| *v != ZERO);
        // one leapfrog step: write row `to` from rows `n` (centre) and `from`
        let step = |u: &mut Vec<Complex64>, n: usize, from: usize, to: usize| {
            for j in 0..nx {
                let k = n * nx + j;
                let c = u[k];
                let lap = (u[n * nx + (j + 1) % nx] - 2.0 * c + u[n * nx + (j + nx - 1) % nx]) * ix2;
                let rhs = lap - c * m2 - self.op.potential_at(k) * c + f[k];
                u[to * nx + j] = 2.0 * c - u[from * nx + j] + rhs * dt2;
            }
        };
        match sign {
            Sign::Plus => {
                let Some(first) = (1..nt - 1).find(|&n| row_live(n)) else {
                    return u;
                };
                for n in first..nt - 1 {
                    step(&mut u, n, n - 1, n + 1);
                }
            }
            Sign::Minus => {
                let Some(last) = (1..nt - 1).rev().find(|&n| row_live(n)) else {
                    return u;
                };
                for n in (1..=last).rev() {
                    step(&mut u, n, n + 1, n - 1);
                }
            }
        }
        u
    }

    /// Dense matrix of `E±` on the given cells (rows = targets, cols = sources).
    pub fn green_matrix(&self, sign: Sign, cells: &[usize]) -> CMatrix {
        let g = *self.grid();
        let cols = crate::par::map_slice(cells, |&c| {
            let mut d = GridFunction::zeros(&g);
            d.values[c] = ONE;
            let u = self.solve_unchecked(&d, sign);
            cells.iter().map(|&r| u.values[r]).collect::<Vec<_>>()
        });
        CMatrix::from_fn(cells.len(), cells.len(), |r, c| cols[c][r])
    }
}

/// Inclusive 2d prefix sums `S(i,j) = sum_{i'<=i, j'<=j} f`.
fn prefix_sums(nt: usize, nx: usize, f: &[Complex64]) -> Vec<Complex64> {
    let mut s = f.to_vec();
    for i in 0..nt {
        for j in 1..nx {
            let prev = s[i * nx + j - 1];
            s[i * nx + j] += prev;
        }
    }
    for i in 1..nt {
        for j in 0..nx {
            let prev = s[(i - 1) * nx + j];
            s[i * nx + j] += prev;
        }
    }
    s
}

/// Inclusive 2d suffix sums `T(i,j) = sum_{i'>=i, j'>=j} f`.
fn suffix_sums(nt: usize, nx: usize, f: &[Complex64]) -> Vec<Complex64> {
    let mut s = f.to_vec();
    for i in 0..nt {
        for j in (0..nx - 1).rev() {
            let next = s[i * nx + j + 1];
            s[i * nx + j] += next;
        }
    }
    for i in (0..nt - 1).rev() {
        for j in 0..nx {
            let next = s[(i + 1) * nx + j];
            s[i * nx + j] += next;
        }
    }
    s
}

fn null_solve(g: &GridSpec, o: NullOrientation, f: &[Complex64], sign: Sign) -> Vec<Complex64> {
    let (nt, nx) = (g.nt, g.nx);
    let w = g.weight();
    // restrict to the defining cells of the orientation
    let masked: Vec<Complex64> = (0..nt * nx)
        .map(|k| {
            let (i, j) = (k / nx, k % nx);
            let ok = match o {
                NullOrientation::Backward => i >= 1 && j >= 1,
                NullOrientation::Forward => i + 1 < nt && j + 1 < nx,
            };
            if ok { f[k] } else { ZERO }
        })
        .collect();
    let mut u = vec![ZERO; nt * nx];
    match (o, sign) {
        (NullOrientation::Backward, Sign::Plus) => {
            let s = prefix_sums(nt, nx, &masked);
            for (x, y) in u.iter_mut().zip(s) {
                *x = y * w;
            }
        }
        (NullOrientation::Forward, Sign::Minus) => {
            let s = suffix_sums(nt, nx, &masked);
            for (x, y) in u.iter_mut().zip(s) {
                *x = y * w;
            }
        }
        (NullOrientation::Forward, Sign::Plus) => {
            // sum over i' < i, j' < j
            let s = prefix_sums(nt, nx, &masked);
            for i in 1..nt {
                for j in 1..nx {
                    u[i * nx + j] = s[(i - 1) * nx + j - 1] * w;
                }
            }
        }
        (NullOrientation::Backward, Sign::Minus) => {
            // sum over i' > i, j' > j
            let s = suffix_sums(nt, nx, &masked);
            for i in 0..nt - 1 {
                for j in 0..nx - 1 {
                    u[i * nx + j] = s[(i + 1) * nx + j + 1] * w;
                }
            }
        }
    }
    u
}

/// Cells where a test function `g` may live so that `E± P g = g` holds for
/// both signs: two clear rows at each end of every causal axis.
pub fn margin_cells(grid: &GridSpec) -> CellSet {
    admissible_sources(grid)
}

/// Compares the dense Green matrices of the dual stencil with the transposed
/// Green matrices of the stencil, `E_t± = (E∓)ᵀ`, on the interior cells.
pub fn verify_duality(solver: &CausalSolver, cap: usize) -> Result<VerifyReport> {
    let cells = solver.op().interior_cells().indices();
    if cells.len() > cap {
        return Err(Error::DenseCapExceeded {
            cells: cells.len(),
            cap,
        });
    }
    let dual = solver.dual();
    let mut report = VerifyReport::new("duality");
    for sign in Sign::BOTH {
        let et = dual.green_matrix(sign, &cells);
        let e = solver.green_matrix(sign.opposite(), &cells);
        let diff = crate::linalg::max_abs(&(et - e.transpose()));
        report.check_le(format!("max|E_t{sign} - (E{})^T|", sign.opposite()), diff, 1e-12);
    }
    Ok(report)
}

/// Residual, inverse and support checks for `E±` on random sources.
pub fn green_suite(solver: &CausalSolver, trials: usize, seed: u64) -> VerifyReport {
    let g = *solver.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adm = admissible_sources(&g);
    let defining = solver.op().defining_cells();
    let mut report = VerifyReport::new("green");
    let (mut g2, mut g1, mut g3) = (0.0f64, 0.0f64, true);
    let mut prop = 0.0f64;
    for t in 0..trials {
        let f = if t % 2 == 0 {
            sampling::gaussian_on(&g, &adm, false, &mut rng)
        } else {
            sampling::sparse_on(&g, &adm, 3, &mut rng)
        };
        let fmax = f.max_abs().max(f64::MIN_POSITIVE);
        let test = sampling::gaussian_on(&g, &adm, false, &mut rng);
        let pg = solver.op().apply(&test);
        let gmax = test.max_abs().max(f64::MIN_POSITIVE);
        let supp_f = support(&f, SUPPORT_TOL);
        for sign in Sign::BOTH {
            let u = solver.solve_unchecked(&f, sign);
            let r = solver.op().apply(&u).sub(&f).max_abs_on(&defining) / fmax;
            g2 = g2.max(r);
            let back = solver.solve_unchecked(&pg, sign).sub(&test).max_abs() / gmax;
            g1 = g1.max(back);
            let cone = causal_set(&g, &supp_f, sign.direction());
            g3 &= support(&u, SUPPORT_TOL).is_subset(&cone);
        }
        let e = solver.solve_unchecked(&f, Sign::Minus).sub(&solver.solve_unchecked(&f, Sign::Plus));
        prop = prop.max(solver.op().apply(&e).max_abs_on(&defining) / fmax);
    }
    report.check_le("PE±f - f (rel)", g2, 1e-12);
    report.check_le("E±Pg - g (rel)", g1, 1e-11);
    report.check_true("supp E±f in J±(supp f)", g3);
    report.check_le("P E f (rel)", prop, 1e-11);
    report
}
