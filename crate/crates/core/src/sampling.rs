//! Seeded random grid functions for test suites.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::{CellSet, GridFunction, GridSpec};

/// Standard normal values on `set`, zero elsewhere.
pub fn gaussian_on<R: Rng + ?Sized>(grid: &GridSpec, set: &CellSet, complex: bool, rng: &mut R) -> GridFunction {
    GridFunction::from_fn(grid, |c| {
        if set.contains(c) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
            Complex64::new(re, im)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// A few random impulses at cells drawn from `set`.
pub fn sparse_on<R: Rng + ?Sized>(grid: &GridSpec, set: &CellSet, count: usize, rng: &mut R) -> GridFunction {
    let cells = set.indices();
    let mut out = GridFunction::zeros(grid);
    if cells.is_empty() {
        return out;
    }
    for _ in 0..count {
        let k = cells[rng.random_range(0..cells.len())];
        let re: f64 = rng.sample(StandardNormal);
        out.values[k] += Complex64::new(re, 0.0);
    }
    out
}
