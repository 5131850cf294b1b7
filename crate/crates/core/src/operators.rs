//! Linear operators on grid functions.
//!
//! * [`DiffOp`]: the hyperbolic stencils (Klein–Gordon on the circle grid, and the
//!   product of backward null differences on the null square).
//! * [`KernelOp`]: integral operators with kernel supported in `K x K`,
//!   `(Af)(p) = sum_q a(p, q) f(q) mu` for `p` in `K` and zero elsewhere.
//! * [`KernelFamily`]: polynomial families `A(λ) = sum_{k>=1} λ^k ρ_k` with no
//!   constant term.
//! * [`NihiloOp`]: a first-order structured operator whose input reaches one
//!   backward-difference cell outside `K` while its range stays in `K`.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Cell, CellSet, GridFunction, GridSpec, Region, Topology, SUPPORT_TOL};
use crate::linalg::{CMatrix, ONE, ZERO};

/// A linear self-map of grid functions on one grid.
pub trait LinearMap: Send + Sync {
    fn grid(&self) -> &GridSpec;
    fn apply(&self, f: &GridFunction) -> GridFunction;
}

/// Dense matrix of `op` on the listed cells: entry `(r, c)` is
/// `(op δ_{cols[c]})(rows[r])` for unit impulses.
pub fn dense_matrix(op: &dyn LinearMap, rows: &[usize], cols: &[usize]) -> CMatrix {
    let grid = *op.grid();
    let columns = crate::par::map_slice(cols, |&c| {
        let mut d = GridFunction::zeros(&grid);
        d.values[c] = ONE;
        let out = op.apply(&d);
        rows.iter().map(|&r| out.values[r]).collect::<Vec<_>>()
    });
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| columns[c][r])
}

fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::TimeBoundedCircle => "time-bounded circle",
        Topology::NullSquare => "null square",
    }
}

/// Which way the null differences point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullOrientation {
    /// `(u(i,j) - u(i-1,j) - u(i,j-1) + u(i-1,j-1)) / (du dv)`, defined for `i, j >= 1`.
    Backward,
    /// The formal dual of `Backward`: forward differences, defined for
    /// `i <= nt-2, j <= nx-2`.
    Forward,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffKind {
    KleinGordon { mass: f64, potential: Vec<Complex64> },
    NullWave(NullOrientation),
}

/// A hyperbolic difference operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp {
    grid: GridSpec,
    kind: DiffKind,
}

/// Discrete Klein–Gordon operator
/// `(u(n+1) - 2u(n) + u(n-1))/dt² - (u(j+1) - 2u(j) + u(j-1))/dx² + m²u + Vu`
/// on rows `1..=nt-2`, periodic in space. `potential = None` means `V = 0`.
pub fn make_klein_gordon(grid: &GridSpec, mass: f64, potential: Option<&GridFunction>) -> Result<DiffOp> {
    if grid.topology != Topology::TimeBoundedCircle {
        return Err(Error::TopologyMismatch {
            expected: topology_name(Topology::TimeBoundedCircle),
            found: topology_name(grid.topology),
        });
    }
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(Error::InvalidGrid(format!("mass must be finite and >= 0, got {mass}")));
    }
    let potential = match potential {
        Some(v) => {
            if v.grid.nt != grid.nt || v.grid.nx != grid.nx {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: v.values.len(),
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            v.values.clone()
        }
        None => vec![ZERO; grid.len()],
    };
    Ok(DiffOp {
        grid: *grid,
        kind: DiffKind::KleinGordon { mass, potential },
    })
}

/// `∂u∂v` on a null square as a product of backward differences.
pub fn make_null_wave(grid: &GridSpec) -> Result<DiffOp> {
    if grid.topology != Topology::NullSquare {
        return Err(Error::TopologyMismatch {
            expected: topology_name(Topology::NullSquare),
            found: topology_name(grid.topology),
        });
    }
    Ok(DiffOp {
        grid: *grid,
        kind: DiffKind::NullWave(NullOrientation::Backward),
    })
}

impl DiffOp {
    pub fn kind(&self) -> &DiffKind {
        &self.kind
    }

    pub fn grid_spec(&self) -> &GridSpec {
        &self.grid
    }

    /// Whether `(P u)(cell)` is defined.
    pub fn is_defining(&self, cell: Cell) -> bool {
        let g = &self.grid;
        match self.kind {
            DiffKind::KleinGordon { .. } => cell.n >= 1 && cell.n + 1 < g.nt,
            DiffKind::NullWave(NullOrientation::Backward) => cell.n >= 1 && cell.j >= 1,
            DiffKind::NullWave(NullOrientation::Forward) => cell.n + 1 < g.nt && cell.j + 1 < g.nx,
        }
    }

    /// Cells where `P u` is defined; this is also the domain of sources for
    /// the Green operators.
    pub fn defining_cells(&self) -> CellSet {
        CellSet::from_predicate(&self.grid, |c| self.is_defining(c))
    }

    /// Cells where both `P` and its formal dual are defined.
    pub fn interior_cells(&self) -> CellSet {
        let g = self.grid;
        match self.kind {
            DiffKind::KleinGordon { .. } => self.defining_cells(),
            DiffKind::NullWave(_) => CellSet::from_predicate(&g, |c| {
                c.n >= 1 && c.j >= 1 && c.n + 1 < g.nt && c.j + 1 < g.nx
            }),
        }
    }

    /// Coefficients of row `cell`: `(P u)(cell) = sum coeff * u(other)`.
    pub fn stencil_row(&self, cell: Cell) -> Vec<(Cell, Complex64)> {
        if !self.is_defining(cell) {
            return Vec::new();
        }
        let g = &self.grid;
        let c = |x: f64| Complex64::new(x, 0.0);
        match &self.kind {
            DiffKind::KleinGordon { mass, potential } => {
                let (it2, ix2) = (1.0 / (g.dt * g.dt), 1.0 / (g.dx * g.dx));
                let (n, j) = (cell.n, cell.j);
                let centre = c(-2.0 * it2 + 2.0 * ix2 + mass * mass) + potential[g.index(cell)];
                vec![
                    (Cell::new(n + 1, j), c(it2)),
                    (Cell::new(n - 1, j), c(it2)),
                    (cell, centre),
                    (Cell::new(n, (j + 1) % g.nx), c(-ix2)),
                    (Cell::new(n, (j + g.nx - 1) % g.nx), c(-ix2)),
                ]
            }
            DiffKind::NullWave(o) => {
                let w = 1.0 / g.weight();
                let (i, j) = (cell.n, cell.j);
                let (i2, j2) = match o {
                    NullOrientation::Backward => (i - 1, j - 1),
                    NullOrientation::Forward => (i + 1, j + 1),
                };
                vec![
                    (cell, c(w)),
                    (Cell::new(i2, j), c(-w)),
                    (Cell::new(i, j2), c(-w)),
                    (Cell::new(i2, j2), c(w)),
                ]
            }
        }
    }

    /// Formal (bilinear) dual with respect to the uniform measure.
    ///
    /// The Klein–Gordon stencil is symmetric and multiplication by `V` is its own
    /// bilinear transpose, so it is self-dual; null backward differences dualise
    /// to forward differences.
    pub fn dual(&self) -> DiffOp {
        let kind = match &self.kind {
            DiffKind::KleinGordon { .. } => self.kind.clone(),
            DiffKind::NullWave(NullOrientation::Backward) => DiffKind::NullWave(NullOrientation::Forward),
            DiffKind::NullWave(NullOrientation::Forward) => DiffKind::NullWave(NullOrientation::Backward),
        };
        DiffOp { grid: self.grid, kind }
    }

    /// `max |P[a,c] - P[c,a]| / max |P|` over interior cells, read off the
    /// assembled stencil.
    pub fn self_adjoint_defect(&self) -> f64 {
        let interior = self.interior_cells();
        let mut entries: HashMap<(usize, usize), Complex64> = HashMap::new();
        for cell in interior.cells() {
            let r = self.grid.index(cell);
            for (other, coeff) in self.stencil_row(cell) {
                if interior.contains(other) {
                    *entries.entry((r, self.grid.index(other))).or_insert(ZERO) += coeff;
                }
            }
        }
        let scale = entries.values().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        entries
            .iter()
            .map(|(&(r, c), v)| (v - entries.get(&(c, r)).copied().unwrap_or(ZERO)).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub(crate) fn potential_at(&self, index: usize) -> Complex64 {
        match &self.kind {
            DiffKind::KleinGordon { potential, .. } => potential[index],
            DiffKind::NullWave(_) => ZERO,
        }
    }

    pub(crate) fn mass(&self) -> f64 {
        match &self.kind {
            DiffKind::KleinGordon { mass, .. } => *mass,
            DiffKind::NullWave(_) => 0.0,
        }
    }
}

impl LinearMap for DiffOp {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn apply(&self, f: &GridFunction) -> GridFunction {
        let g = self.grid;
        let (nt, nx) = (g.nt, g.nx);
        let u = &f.values;
        let mut out = GridFunction::zeros(&g);
        match &self.kind {
            DiffKind::KleinGordon { mass, potential } => {
                let (it2, ix2, m2) = (1.0 / (g.dt * g.dt), 1.0 / (g.dx * g.dx), mass * mass);
                for n in 1..nt - 1 {
                    for j in 0..nx {
                        let k = n * nx + j;
                        let jp = n * nx + (j + 1) % nx;
                        let jm = n * nx + (j + nx - 1) % nx;
                        let tt = (u[k + nx] - 2.0 * u[k] + u[k - nx]) * it2;
                        let xx = (u[jp] - 2.0 * u[k] + u[jm]) * ix2;
                        out.values[k] = tt - xx + u[k] * m2 + potential[k] * u[k];
                    }
                }
            }
            DiffKind::NullWave(o) => {
                let iw = 1.0 / g.weight();
                let (ilo, ihi, jlo, jhi, s) = match o {
                    NullOrientation::Backward => (1, nt, 1, nx, -1isize),
                    NullOrientation::Forward => (0, nt - 1, 0, nx - 1, 1isize),
                };
                for i in ilo..ihi {
                    for j in jlo..jhi {
                        let k = i * nx + j;
                        let di = (k as isize + s * nx as isize) as usize;
                        let dj = (k as isize + s) as usize;
                        let dij = (k as isize + s * (nx as isize + 1)) as usize;
                        out.values[k] = (u[k] - u[di] - u[dj] + u[dij]) * iw;
                    }
                }
            }
        }
        out
    }
}

/// Integral operator with kernel supported in `K x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOp {
    region: Region,
    matrix: CMatrix,
    weight: f64,
}

impl KernelOp {
    pub fn new(region: &Region, matrix: CMatrix) -> Result<Self> {
        let k = region.len();
        if matrix.nrows() != k || matrix.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: if matrix.nrows() != k { matrix.nrows() } else { matrix.ncols() },
            });
        }
        Ok(KernelOp {
            weight: region.grid().weight(),
            region: region.clone(),
            matrix,
        })
    }

    pub fn zero(region: &Region) -> Self {
        let k = region.len();
        KernelOp {
            weight: region.grid().weight(),
            region: region.clone(),
            matrix: CMatrix::zeros(k, k),
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Kernel values `a(p, q)` in region order.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Matrix of `f|_K -> (Af)|_K` acting on plain values, i.e. `mu * a`.
    pub fn operator_matrix(&self) -> CMatrix {
        &self.matrix * Complex64::new(self.weight, 0.0)
    }

    /// Region-ordered values of `A f`.
    pub fn apply_on_region(&self, f: &GridFunction) -> Vec<Complex64> {
        let x = nalgebra::DVector::from_vec(self.region.restrict(f));
        let y = &self.matrix * x * Complex64::new(self.weight, 0.0);
        y.iter().copied().collect()
    }

    /// Bilinear transpose.
    pub fn dual(&self) -> KernelOp {
        KernelOp {
            region: self.region.clone(),
            matrix: self.matrix.transpose(),
            weight: self.weight,
        }
    }
}

impl LinearMap for KernelOp {
    fn grid(&self) -> &GridSpec {
        self.region.grid()
    }

    fn apply(&self, f: &GridFunction) -> GridFunction {
        self.region.extend(&self.apply_on_region(f))
    }
}

fn check_supported_in(what: &'static str, f: &GridFunction, region: &Region) -> Result<()> {
    let supp = crate::lattice::support(f, SUPPORT_TOL);
    match supp.difference(region.cells()).first() {
        Some(&cell) => Err(Error::SupportViolation { what, cell }),
        None => Ok(()),
    }
}

/// `A φ = -(sum h φ mu) f`; kernel `a(p, q) = -f(p) h(q)`.
pub fn make_rank_one(f: &GridFunction, h: &GridFunction, region: &Region) -> Result<KernelOp> {
    check_supported_in("f", f, region)?;
    check_supported_in("h", h, region)?;
    let fk = region.restrict(f);
    let hk = region.restrict(h);
    let m = CMatrix::from_fn(region.len(), region.len(), |p, q| -fk[p] * hk[q]);
    KernelOp::new(region, m)
}

/// Multiplication by `V` on `K`: diagonal kernel `V(p) / mu`.
pub fn make_multiplication(v: &GridFunction, region: &Region) -> Result<KernelOp> {
    check_supported_in("V", v, region)?;
    let w = region.grid().weight();
    let vk = region.restrict(v);
    let m = CMatrix::from_fn(region.len(), region.len(), |p, q| if p == q { vk[p] / w } else { ZERO });
    KernelOp::new(region, m)
}

/// `A(λ) = sum_{k=1..d} λ^k ρ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    region: Region,
    coefficients: Vec<CMatrix>,
}

pub fn make_kernel_family(region: &Region, coefficient_kernels: Vec<CMatrix>) -> Result<KernelFamily> {
    if coefficient_kernels.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let k = region.len();
    for m in &coefficient_kernels {
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: if m.nrows() != k { m.nrows() } else { m.ncols() },
            });
        }
    }
    Ok(KernelFamily {
        region: region.clone(),
        coefficients: coefficient_kernels,
    })
}

impl KernelFamily {
    /// Degree-1 family `λ A`.
    pub fn linear(op: &KernelOp) -> Self {
        KernelFamily {
            region: op.region.clone(),
            coefficients: vec![op.matrix.clone()],
        }
    }

    pub fn coefficients(&self) -> &[CMatrix] {
        &self.coefficients
    }

    pub fn eval(&self, lambda: Complex64) -> KernelOp {
        let k = self.region.len();
        let mut m = CMatrix::zeros(k, k);
        let mut power = ONE;
        for rho in &self.coefficients {
            power *= lambda;
            m += rho * power;
        }
        KernelOp {
            weight: self.region.grid().weight(),
            region: self.region.clone(),
            matrix: m,
        }
    }

    /// `dA/dλ` kernel at `lambda`.
    pub fn derivative(&self, lambda: Complex64) -> CMatrix {
        let k = self.region.len();
        let mut m = CMatrix::zeros(k, k);
        let mut power = ONE;
        for (i, rho) in self.coefficients.iter().enumerate() {
            m += rho * (power * (i as f64 + 1.0));
            power *= lambda;
        }
        m
    }

    /// Family of bilinear transposes.
    pub fn dual(&self) -> KernelFamily {
        KernelFamily {
            region: self.region.clone(),
            coefficients: self.coefficients.iter().map(|m| m.transpose()).collect(),
        }
    }
}

/// `eval_family`: the kernel operator `A(λ)`.
pub fn eval_family(family: &KernelFamily, lambda: Complex64) -> KernelOp {
    family.eval(lambda)
}

/// Polynomial interaction family `A(λ) = sum_{k=1..d} λ^k A_k` whose
/// coefficients map into `C_K` and vanish on functions vanishing near `K`.
pub trait InteractionFamily: Send + Sync {
    fn region(&self) -> &Region;
    fn degree(&self) -> usize;
    /// Region-ordered values of `A_k f`, `k` in `1..=degree`.
    fn coefficient_on_region(&self, k: usize, f: &GridFunction) -> Vec<Complex64>;

    /// Region-ordered values of `A(λ) f`.
    fn apply_on_region(&self, lambda: Complex64, f: &GridFunction) -> Vec<Complex64> {
        let mut acc = vec![ZERO; self.region().len()];
        let mut power = ONE;
        for k in 1..=self.degree() {
            power *= lambda;
            for (a, v) in acc.iter_mut().zip(self.coefficient_on_region(k, f)) {
                *a += power * v;
            }
        }
        acc
    }

    fn apply(&self, lambda: Complex64, f: &GridFunction) -> GridFunction {
        self.region().extend(&self.apply_on_region(lambda, f))
    }
}

impl InteractionFamily for KernelFamily {
    fn region(&self) -> &Region {
        &self.region
    }

    fn degree(&self) -> usize {
        self.coefficients.len()
    }

    fn coefficient_on_region(&self, k: usize, f: &GridFunction) -> Vec<Complex64> {
        let x = nalgebra::DVector::from_vec(self.region.restrict(f));
        let y = &self.coefficients[k - 1] * x * Complex64::new(self.region.grid().weight(), 0.0);
        y.iter().copied().collect()
    }

    fn apply_on_region(&self, lambda: Complex64, f: &GridFunction) -> Vec<Complex64> {
        self.eval(lambda).apply_on_region(f)
    }
}

/// `A φ (i,j) = -f(u_i) (Dg)(v_j) sum_{j'} h(v_j') (D_u φ)(i,j') dv`
/// with `D` the normalised backward difference.
#[derive(Debug, Clone, PartialEq)]
pub struct NihiloOp {
    region: Region,
    f_u: Vec<f64>,
    dg_v: Vec<f64>,
    h_v: Vec<f64>,
}

/// Normalised backward difference, zero at index 0.
pub fn backward_difference(values: &[f64], h: f64) -> Vec<f64> {
    (0..values.len())
        .map(|k| if k == 0 { 0.0 } else { (values[k] - values[k - 1]) / h })
        .collect()
}

/// Builds [`NihiloOp`] on a null square with `K = window x window`.
///
/// `h_v` is rescaled so that the discrete pairing `sum h g dv` equals one.
pub fn make_nihilo_a(
    grid: &GridSpec,
    f_u: &[f64],
    g_v: &[f64],
    h_v: &[f64],
    window: (f64, f64),
) -> Result<NihiloOp> {
    if grid.topology != Topology::NullSquare {
        return Err(Error::TopologyMismatch {
            expected: topology_name(Topology::NullSquare),
            found: topology_name(grid.topology),
        });
    }
    if f_u.len() != grid.nt {
        return Err(Error::DimensionMismatch {
            expected: grid.nt,
            found: f_u.len(),
        });
    }
    for p in [g_v, h_v] {
        if p.len() != grid.nx {
            return Err(Error::DimensionMismatch {
                expected: grid.nx,
                found: p.len(),
            });
        }
    }
    let region = Region::window(grid, window, window)?.with_label("K_nihilo");
    let eps = 1e-9 * grid.dx;
    let inside_u = |i: usize| grid.time(i) >= window.0 - eps && grid.time(i) <= window.1 + eps;
    let inside_v = |j: usize| grid.space(j) >= window.0 - eps && grid.space(j) <= window.1 + eps;
    let dg = backward_difference(g_v, grid.dx);
    let scale = |p: &[f64]| p.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tiny = |x: f64, s: f64| x.abs() <= 1e-14 * s;
    let (sf, sh, sg) = (scale(f_u), scale(h_v), scale(&dg));
    if let Some(i) = (0..grid.nt).find(|&i| !inside_u(i) && !tiny(f_u[i], sf)) {
        return Err(Error::SupportViolation {
            what: "f_u",
            cell: Cell::new(i, 0),
        });
    }
    if let Some(j) = (0..grid.nx).find(|&j| !inside_v(j) && !tiny(h_v[j], sh)) {
        return Err(Error::SupportViolation {
            what: "h_v",
            cell: Cell::new(0, j),
        });
    }
    if let Some(j) = (0..grid.nx).find(|&j| !inside_v(j) && !tiny(dg[j], sg)) {
        return Err(Error::SupportViolation {
            what: "Dg_v",
            cell: Cell::new(0, j),
        });
    }
    if let Some(j) = (0..grid.nx).find(|&j| grid.space(j) < window.0 - eps && g_v[j] != 0.0) {
        return Err(Error::SupportViolation {
            what: "g_v",
            cell: Cell::new(0, j),
        });
    }
    let pairing: f64 = h_v.iter().zip(g_v).map(|(a, b)| a * b).sum::<f64>() * grid.dx;
    if !(pairing.abs() > 1e-300) || !pairing.is_finite() {
        return Err(Error::Normalization(format!("<h, g> = {pairing}")));
    }
    Ok(NihiloOp {
        region,
        f_u: f_u.to_vec(),
        dg_v: dg,
        h_v: h_v.iter().map(|x| x / pairing).collect(),
    })
}

impl NihiloOp {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn f_u(&self) -> &[f64] {
        &self.f_u
    }

    pub fn dg_v(&self) -> &[f64] {
        &self.dg_v
    }

    /// The rescaled `h` (so that `sum h g dv = 1`).
    pub fn h_v(&self) -> &[f64] {
        &self.h_v
    }

    pub fn apply_on_region(&self, phi: &GridFunction) -> Vec<Complex64> {
        let g = self.region.grid();
        let (nx, du, dv) = (g.nx, g.dt, g.dx);
        let mut row_sum: HashMap<usize, Complex64> = HashMap::new();
        self.region
            .order()
            .iter()
            .map(|&k| {
                let (i, j) = (k / nx, k % nx);
                let s = *row_sum.entry(i).or_insert_with(|| {
                    if i == 0 {
                        return ZERO;
                    }
                    let mut acc = ZERO;
                    for jp in 0..nx {
                        if self.h_v[jp] != 0.0 {
                            acc += (phi.values[i * nx + jp] - phi.values[(i - 1) * nx + jp]) / du * self.h_v[jp];
                        }
                    }
                    acc * dv
                });
                -s * (self.f_u[i] * self.dg_v[j])
            })
            .collect()
    }
}

impl LinearMap for NihiloOp {
    fn grid(&self) -> &GridSpec {
        self.region.grid()
    }

    fn apply(&self, f: &GridFunction) -> GridFunction {
        self.region.extend(&self.apply_on_region(f))
    }
}

/// `A(λ) = λ A_nihilo`.
#[derive(Debug, Clone, PartialEq)]
pub struct NihiloFamily(pub NihiloOp);

impl InteractionFamily for NihiloFamily {
    fn region(&self) -> &Region {
        &self.0.region
    }

    fn degree(&self) -> usize {
        1
    }

    fn coefficient_on_region(&self, _k: usize, f: &GridFunction) -> Vec<Complex64> {
        self.0.apply_on_region(f)
    }
}

/// Any operator this crate knows how to dualise.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Diff(DiffOp),
    Kernel(KernelOp),
    Nihilo(NihiloOp),
}

impl LinearMap for Operator {
    fn grid(&self) -> &GridSpec {
        match self {
            Operator::Diff(p) => p.grid(),
            Operator::Kernel(a) => a.grid(),
            Operator::Nihilo(a) => a.grid(),
        }
    }

    fn apply(&self, f: &GridFunction) -> GridFunction {
        match self {
            Operator::Diff(p) => p.apply(f),
            Operator::Kernel(a) => a.apply(f),
            Operator::Nihilo(a) => a.apply(f),
        }
    }
}

/// Bilinear transpose with respect to the uniform measure.
pub fn dual(op: &Operator) -> Result<Operator> {
    match op {
        Operator::Diff(p) => Ok(Operator::Diff(p.dual())),
        Operator::Kernel(a) => Ok(Operator::Kernel(a.dual())),
        Operator::Nihilo(_) => Err(Error::UnsupportedDual("the nihilo operator")),
    }
}
