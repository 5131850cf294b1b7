//! Discrete spacetimes, causal cones, regions and grid functions.
//!
//! Two topologies are supported:
//!
//! * [`Topology::TimeBoundedCircle`]: rows are time slices `n = 0..nt`, columns are
//!   cells `j = 0..nx` of a periodic spatial circle. The causal cone moves one cell
//!   per time step.
//! * [`Topology::NullSquare`]: rows are the null coordinate `u`, columns the null
//!   coordinate `v`. A cell `(i', j')` lies in the future of `(i, j)` iff `i' >= i`
//!   and `j' >= j`.
//!
//! Cells are stored row-major, `index = n * nx + j`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rows reserved at each end of the time axis for initial/final data.
pub const TIME_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    TimeBoundedCircle,
    NullSquare,
}

/// Direction of a causal cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Future,
    Past,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Future => Direction::Past,
            Direction::Past => Direction::Future,
        }
    }
}

/// Uniform lattice description.
///
/// For [`Topology::NullSquare`] the time fields are reused for the `u` axis
/// (`nt`, `dt`, `t0`) and the spatial fields for the `v` axis (`nx`, `dx`, `x0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub topology: Topology,
    pub t0: f64,
    pub x0: f64,
}

impl GridSpec {
    pub fn new(
        topology: Topology,
        nt: usize,
        nx: usize,
        dt: f64,
        dx: f64,
        t0: f64,
        x0: f64,
    ) -> Result<Self> {
        let grid = GridSpec {
            nt,
            nx,
            dt,
            dx,
            topology,
            t0,
            x0,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Time-bounded circle with origin at zero.
    pub fn circle(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Self> {
        Self::new(Topology::TimeBoundedCircle, nt, nx, dt, dx, 0.0, 0.0)
    }

    /// Null square covering `[lo, hi]^2` with `n` points per axis.
    pub fn null_square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("null square needs n >= 2, got {n}")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(Topology::NullSquare, n, n, h, h, lo, lo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt < 6 || self.nx < 4 {
            return Err(Error::InvalidGrid(format!(
                "need nt >= 6 and nx >= 4, got nt={} nx={}",
                self.nt, self.nx
            )));
        }
        if !(self.dt.is_finite() && self.dx.is_finite() && self.dt > 0.0 && self.dx > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive and finite, got dt={} dx={}",
                self.dt, self.dx
            )));
        }
        if !(self.t0.is_finite() && self.x0.is_finite()) {
            return Err(Error::InvalidGrid("non-finite coordinate origin".into()));
        }
        match self.topology {
            Topology::TimeBoundedCircle => {
                if self.dt > self.dx * (1.0 + 1e-12) {
                    return Err(Error::InvalidGrid(format!(
                        "CFL violated: dt={} > dx={}",
                        self.dt, self.dx
                    )));
                }
            }
            Topology::NullSquare => {
                if (self.dt - self.dx).abs() > 1e-12 * self.dx.max(self.dt) {
                    return Err(Error::InvalidGrid(format!(
                        "null square needs du == dv, got {} and {}",
                        self.dt, self.dx
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nt * self.nx
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(cell.n < self.nt && cell.j < self.nx);
        cell.n * self.nx + cell.j
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell {
            n: index / self.nx,
            j: index % self.nx,
        }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.n < self.nt && cell.j < self.nx
    }

    /// Measure of one cell: `dt*dx` (or `du*dv`).
    #[inline]
    pub fn weight(&self) -> f64 {
        self.dt * self.dx
    }

    /// Time (or `u`) coordinate of row `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Space (or `v`) coordinate of column `j`.
    pub fn space(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    /// Periodic index distance on the circle; plain distance on the null square.
    pub fn spatial_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        match self.topology {
            Topology::TimeBoundedCircle => d.min(self.nx - d),
            Topology::NullSquare => d,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |k| self.cell(k))
    }
}

/// A lattice point `(n, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub j: usize,
}

impl Cell {
    pub fn new(n: usize, j: usize) -> Self {
        Cell { n, j }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.j)
    }
}

/// Subset of the cells of one grid.
#[derive(Clone, PartialEq, Eq)]
pub struct CellSet {
    nt: usize,
    nx: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellSet")
            .field("nt", &self.nt)
            .field("nx", &self.nx)
            .field("count", &self.count())
            .finish()
    }
}

impl CellSet {
    pub fn empty(grid: &GridSpec) -> Self {
        CellSet {
            nt: grid.nt,
            nx: grid.nx,
            bits: vec![false; grid.len()],
        }
    }

    pub fn full(grid: &GridSpec) -> Self {
        CellSet {
            nt: grid.nt,
            nx: grid.nx,
            bits: vec![true; grid.len()],
        }
    }

    pub fn from_cells(grid: &GridSpec, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut set = Self::empty(grid);
        for c in cells {
            if !grid.contains(c) {
                return Err(Error::InvalidRegion(format!("cell {c} outside grid")));
            }
            set.insert(grid.index(c));
        }
        Ok(set)
    }

    pub fn from_predicate(grid: &GridSpec, mut pred: impl FnMut(Cell) -> bool) -> Self {
        let bits = (0..grid.len()).map(|k| pred(grid.cell(k))).collect();
        CellSet {
            nt: grid.nt,
            nx: grid.nx,
            bits,
        }
    }

    /// Inclusive rectangle of rows `n_lo..=n_hi` and columns `j_lo..=j_hi`.
    pub fn rectangle(grid: &GridSpec, n_lo: usize, n_hi: usize, j_lo: usize, j_hi: usize) -> Self {
        Self::from_predicate(grid, |c| {
            (n_lo..=n_hi).contains(&c.n) && (j_lo..=j_hi).contains(&c.j)
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nt, self.nx)
    }

    #[inline]
    pub fn contains_index(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.n < self.nt && cell.j < self.nx && self.bits[cell.n * self.nx + cell.j]
    }

    #[inline]
    pub fn insert(&mut self, index: usize) {
        self.bits[index] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Row-major indices of the members.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(k, b)| b.then_some(k))
            .collect()
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.indices()
            .into_iter()
            .map(|k| Cell {
                n: k / self.nx,
                j: k % self.nx,
            })
            .collect()
    }

    fn check_shape(&self, other: &CellSet) {
        assert_eq!(self.shape(), other.shape(), "cell sets from different grids");
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        self.check_shape(other);
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        CellSet { bits, ..*self }
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        self.check_shape(other);
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        CellSet { bits, ..*self }
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.check_shape(other);
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.check_shape(other);
        !self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    /// Members of `self` that are not in `other`.
    pub fn difference(&self, other: &CellSet) -> Vec<Cell> {
        self.check_shape(other);
        self.bits
            .iter()
            .zip(&other.bits)
            .enumerate()
            .filter(|(_, (a, b))| **a && !**b)
            .map(|(k, _)| Cell {
                n: k / self.nx,
                j: k % self.nx,
            })
            .collect()
    }
}

/// Causal future or past `J±(seed)` of a cell set.
pub fn causal_set(grid: &GridSpec, seed: &CellSet, direction: Direction) -> CellSet {
    assert_eq!(seed.shape(), (grid.nt, grid.nx), "seed from another grid");
    let (nt, nx) = (grid.nt, grid.nx);
    let mut out = CellSet::empty(grid);
    match grid.topology {
        Topology::TimeBoundedCircle => {
            let rows: Box<dyn Iterator<Item = usize>> = match direction {
                Direction::Future => Box::new(0..nt),
                Direction::Past => Box::new((0..nt).rev()),
            };
            let mut reach = vec![false; nx];
            let mut next = vec![false; nx];
            for n in rows {
                // widen the previous row's reach by one cell on each side
                for j in 0..nx {
                    next[j] = reach[j] || reach[(j + 1) % nx] || reach[(j + nx - 1) % nx];
                }
                for j in 0..nx {
                    next[j] |= seed.bits[n * nx + j];
                    out.bits[n * nx + j] = next[j];
                }
                std::mem::swap(&mut reach, &mut next);
            }
        }
        Topology::NullSquare => match direction {
            Direction::Future => {
                for i in 0..nt {
                    for j in 0..nx {
                        let k = i * nx + j;
                        let mut b = seed.bits[k];
                        if i > 0 {
                            b |= out.bits[k - nx];
                        }
                        if j > 0 {
                            b |= out.bits[k - 1];
                        }
                        out.bits[k] = b;
                    }
                }
            }
            Direction::Past => {
                for i in (0..nt).rev() {
                    for j in (0..nx).rev() {
                        let k = i * nx + j;
                        let mut b = seed.bits[k];
                        if i + 1 < nt {
                            b |= out.bits[k + nx];
                        }
                        if j + 1 < nx {
                            b |= out.bits[k + 1];
                        }
                        out.bits[k] = b;
                    }
                }
            }
        },
    }
    out
}

/// Cells where a source may be placed with two clear rows at each end of the
/// time axis (and of both null axes on a null square).
pub fn admissible_sources(grid: &GridSpec) -> CellSet {
    let row_ok = |n: usize| n >= TIME_MARGIN && n + TIME_MARGIN < grid.nt;
    match grid.topology {
        Topology::TimeBoundedCircle => CellSet::from_predicate(grid, |c| row_ok(c.n)),
        Topology::NullSquare => CellSet::from_predicate(grid, |c| {
            row_ok(c.n) && c.j >= TIME_MARGIN && c.j + TIME_MARGIN < grid.nx
        }),
    }
}

/// The interaction region `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    cells: CellSet,
    label: String,
    grid: GridSpec,
    order: Vec<usize>,
}

impl Region {
    pub fn new(grid: &GridSpec, cells: CellSet, label: impl Into<String>) -> Result<Self> {
        if cells.shape() != (grid.nt, grid.nx) {
            return Err(Error::InvalidRegion("cell set shape does not match grid".into()));
        }
        if cells.is_empty() {
            return Err(Error::InvalidRegion("region is empty".into()));
        }
        let admissible = admissible_sources(grid);
        if let Some(bad) = cells.difference(&admissible).first() {
            return Err(Error::InvalidRegion(format!(
                "cell {bad} violates the two-row margin"
            )));
        }
        let order = cells.indices();
        Ok(Region {
            cells,
            label: label.into(),
            grid: *grid,
            order,
        })
    }

    pub fn rectangle(
        grid: &GridSpec,
        n_lo: usize,
        n_hi: usize,
        j_lo: usize,
        j_hi: usize,
    ) -> Result<Self> {
        if n_lo > n_hi || j_lo > j_hi || n_hi >= grid.nt || j_hi >= grid.nx {
            return Err(Error::InvalidRegion(format!(
                "bad rectangle rows {n_lo}..={n_hi} cols {j_lo}..={j_hi}"
            )));
        }
        Self::new(grid, CellSet::rectangle(grid, n_lo, n_hi, j_lo, j_hi), "K")
    }

    /// Cells whose coordinates lie in `[t_lo, t_hi] x [x_lo, x_hi]`.
    pub fn window(grid: &GridSpec, t: (f64, f64), x: (f64, f64)) -> Result<Self> {
        let eps = 1e-9 * grid.dt.min(grid.dx);
        let cells = CellSet::from_predicate(grid, |c| {
            let (tc, xc) = (grid.time(c.n), grid.space(c.j));
            tc >= t.0 - eps && tc <= t.1 + eps && xc >= x.0 - eps && xc <= x.1 + eps
        });
        Self::new(grid, cells, "K")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of cells `|K|`.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Grid indices of the region in the fixed (row-major) ordering used for
    /// all `|K| x |K|` matrices.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Values of `f` on `K`, in region order.
    pub fn restrict(&self, f: &GridFunction) -> Vec<Complex64> {
        self.order.iter().map(|&k| f.values[k]).collect()
    }

    /// Extension by zero of region-ordered values.
    pub fn extend(&self, values: &[Complex64]) -> GridFunction {
        assert_eq!(values.len(), self.len());
        let mut out = GridFunction::zeros(&self.grid);
        for (&k, v) in self.order.iter().zip(values) {
            out.values[k] = *v;
        }
        out
    }
}

/// Complex-valued lattice field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(grid: &GridSpec) -> Self {
        GridFunction {
            grid: *grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(GridFunction {
            grid: *grid,
            values,
        })
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(Cell) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.cell(k))).collect();
        GridFunction {
            grid: *grid,
            values,
        }
    }

    pub fn from_real_fn(grid: &GridSpec, mut f: impl FnMut(Cell) -> f64) -> Self {
        Self::from_fn(grid, |c| Complex64::new(f(c), 0.0))
    }

    /// Unit impulse at `cell`.
    pub fn impulse(grid: &GridSpec, cell: Cell) -> Self {
        let mut out = Self::zeros(grid);
        out.values[grid.index(cell)] = Complex64::new(1.0, 0.0);
        out
    }

    #[inline]
    pub fn at(&self, cell: Cell) -> Complex64 {
        self.values[self.grid.index(cell)]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, value: Complex64) {
        let k = self.grid.index(cell);
        self.values[k] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum of `|f|` over the cells of `set`.
    pub fn max_abs_on(&self, set: &CellSet) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| set.contains_index(*k))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: Complex64, other: &GridFunction) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GridFunction) {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += y;
        }
    }

    /// Zero outside `set`.
    pub fn masked(&self, set: &CellSet) -> Self {
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| if set.contains_index(k) { *v } else { Complex64::new(0.0, 0.0) })
                .collect(),
        }
    }

    pub fn conj(&self) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Bilinear pairing `sum f g mu`.
    pub fn pairing(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.weight()
    }

    /// Inner product `sum conj(f) g mu`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.weight()
    }

    /// Time reflection `n -> nt - 1 - n`.
    pub fn time_reversed(&self) -> Self {
        let g = self.grid;
        Self::from_fn(&g, |c| self.at(Cell::new(g.nt - 1 - c.n, c.j)))
    }
}

/// Cells where `|f| > tol * max(1, max |f|)`.
pub fn support(f: &GridFunction, tol: f64) -> CellSet {
    let threshold = tol * f.max_abs().max(1.0);
    let bits = f.values.iter().map(|v| v.norm() > threshold).collect();
    CellSet {
        nt: f.grid.nt,
        nx: f.grid.nx,
        bits,
    }
}

/// Default relative support threshold.
pub const SUPPORT_TOL: f64 = 1e-12;
