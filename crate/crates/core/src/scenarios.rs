//! Reproducible interaction recipes.
//!
//! Everything here is generated from a seed or from smooth profiles, so a
//! scenario can be rebuilt bit-for-bit from a short description.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::green::{CausalSolver, Sign};
use crate::lattice::{GridFunction, GridSpec, Region};
use crate::linalg::{self, CMatrix, ONE};
use crate::operators::{make_kernel_family, make_nihilo_a, make_null_wave, KernelFamily, NihiloFamily};
use crate::profiles::{unit_bump, Profile1d};

/// Values of `E± δ_q` on `K` (rows = targets, cols = sources).
pub fn green_block(solver: &CausalSolver, region: &Region, sign: Sign) -> CMatrix {
    let g = *solver.grid();
    let order = region.order();
    let cols = crate::par::map_slice(order, |&q| {
        let mut d = GridFunction::zeros(&g);
        d.values[q] = ONE;
        let u = solver.solve_unchecked(&d, sign);
        order.iter().map(|&p| u.values[p]).collect::<Vec<_>>()
    });
    CMatrix::from_fn(order.len(), order.len(), |p, q| cols[q][p])
}

/// Envelope over the bounding box of `K`, positive on every cell of `K`.
fn region_envelope(region: &Region) -> Vec<f64> {
    let cells = region.cells().cells();
    let (n_lo, n_hi) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.n), b.max(c.n)));
    let (j_lo, j_hi) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.j), b.max(c.j)));
    let (cn, cj) = ((n_lo + n_hi) as f64 / 2.0, (j_lo + j_hi) as f64 / 2.0);
    let (rn, rj) = ((n_hi - n_lo) as f64 / 2.0 + 1.0, (j_hi - j_lo) as f64 / 2.0 + 1.0);
    cells
        .iter()
        .map(|c| unit_bump(c.n as f64, cn, rn) * unit_bump(c.j as f64, cj, rj))
        .collect()
}

/// Random gaussian-bump product kernels `ρ_k(p, q) = s_k Z_k(p, q) b(p) b(q)`
/// with `Z_k` complex Gaussian and `b` a bump over `K`.
///
/// Each `s_k` is chosen so that the larger of `σ_max(A_k E⁺)` and
/// `σ_max(A_k E⁻)` on `K` equals `amplitude`. A degree-1 family is then
/// non-exceptional for `|λ| < 1 / amplitude`.
pub fn kernel_gaussian(
    solver: &CausalSolver,
    region: &Region,
    degree: usize,
    amplitude: f64,
    seed: u64,
) -> Result<KernelFamily> {
    if degree == 0 {
        return Err(Error::EmptyFamily);
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::Normalization(format!("amplitude must be positive, got {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = region.len();
    let b = region_envelope(region);
    let w = region.grid().weight();
    let blocks = [green_block(solver, region, Sign::Plus), green_block(solver, region, Sign::Minus)];
    let mut coeffs = Vec::with_capacity(degree);
    for _ in 0..degree {
        let z = linalg::complex_gaussian(&mut rng, k, k, 1.0);
        let rho = CMatrix::from_fn(k, k, |p, q| z[(p, q)] * (b[p] * b[q]));
        let norm = blocks
            .iter()
            .map(|gb| linalg::singular_values(&(&rho * gb * Complex64::new(w, 0.0)))[0])
            .fold(0.0, f64::max);
        if !(norm > 0.0) {
            return Err(Error::Normalization("kernel acts trivially on the region".into()));
        }
        coeffs.push(rho * Complex64::new(amplitude / norm, 0.0));
    }
    make_kernel_family(region, coeffs)
}

/// Standard ex-nihilo profiles on `[-4, 4]^2` with `K = [-2, 2]^2`:
/// `f = 1` on `[-1, 1.5]`, a smooth step `g` rising across `K`, and a bump `h`.
pub fn nihilo_profiles() -> (Profile1d, Profile1d, Profile1d) {
    (
        Profile1d::Plateau {
            lo: -1.0,
            hi: 1.5,
            ramp: 0.5,
        },
        Profile1d::Step {
            start: -2.0,
            end: 2.0,
            amplitude: 1.0,
        },
        Profile1d::Bump {
            center: 0.0,
            radius: 2.0,
            amplitude: 1.0,
        },
    )
}

pub const NIHILO_WINDOW: (f64, f64) = (-2.0, 2.0);

/// Null-square solver and ex-nihilo family on `[-4, 4]^2` with `n` points per axis.
pub fn nihilo_scenario(n: usize, profiles: &(Profile1d, Profile1d, Profile1d)) -> Result<(CausalSolver, NihiloFamily)> {
    let grid = GridSpec::null_square(n, -4.0, 4.0)?;
    let solver = CausalSolver::new(make_null_wave(&grid)?);
    let (f, g, h) = profiles;
    let op = make_nihilo_a(
        &grid,
        &f.sample(grid.nt, grid.t0, grid.dt),
        &g.sample(grid.nx, grid.x0, grid.dx),
        &h.sample(grid.nx, grid.x0, grid.dx),
        NIHILO_WINDOW,
    )?;
    Ok((solver, NihiloFamily(op)))
}

/// Block vectors `δ_i ⊗ Dg` on `K` for every `u`-row where `f_u = 1`.
/// They lie in the kernel of `I + Y⁺(1)` exactly.
pub fn nihilo_kernel_vectors(family: &NihiloFamily) -> Vec<Vec<Complex64>> {
    let op = &family.0;
    let region = op.region();
    let nx = region.grid().nx;
    let rows: Vec<usize> = (0..op.f_u().len()).filter(|&i| op.f_u()[i] == 1.0).collect();
    rows.iter()
        .filter(|&&i| region.order().iter().any(|&k| k / nx == i))
        .map(|&i| {
            region
                .order()
                .iter()
                .map(|&k| {
                    if k / nx == i {
                        Complex64::new(op.dg_v()[k % nx], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect()
}
