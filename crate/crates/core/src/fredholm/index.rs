//! Kernel dimensions of `P + A(λ)` against those of the formal dual.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{extremes, Fredholm};
use crate::error::Result;
use crate::green::{CausalSolver, Sign};
use crate::linalg::{self, CMatrix};
use crate::operators::KernelFamily;
use crate::report::VerifyReport;

/// `N±(λ)` for `(P, A)` and for `(P†, A†)`, with the checks that relate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub lambda: Complex64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub dual_n_plus: usize,
    pub dual_n_minus: usize,
    pub report: VerifyReport,
}

fn null_basis(m: &CMatrix, tau: f64) -> Vec<linalg::CVector> {
    let svd = linalg::right_svd(m);
    let (_, smax) = extremes(&svd.sigma);
    svd.sigma
        .iter()
        .zip(svd.right)
        .filter(|(s, _)| **s <= tau * smax)
        .map(|(_, v)| v)
        .collect()
}

/// Compares `N±` of `P + A(λ)` with `N∓` of `P† + A†(λ)` and checks that
/// `x -> μ a(λ) conj(x)` maps `ker(I + (Y_t±)^*)` injectively into `ker(I + Y∓)`.
pub fn verify_index_duality(solver: &CausalSolver, family: &KernelFamily, lambda: Complex64, tau: f64) -> Result<IndexReport> {
    let dual_solver = solver.dual();
    let dual_family = family.dual();
    let w = Complex64::new(solver.grid().weight(), 0.0);
    let a = family.eval(lambda).matrix().clone();
    let mut dims = [[0usize; 2]; 2];
    let mut report = VerifyReport::new(format!("index at λ = {lambda}"));
    let mut blocks = Vec::new();
    let mut dual_blocks = Vec::new();
    for (s, sign) in Sign::BOTH.into_iter().enumerate() {
        let fr = Fredholm::new(solver, family, sign)?;
        let frt = Fredholm::new(&dual_solver, &dual_family, sign)?;
        let sys = fr.block(lambda).system();
        let sys_t = frt.block(lambda).system();
        dims[0][s] = null_basis(&sys, tau).len();
        dims[1][s] = null_basis(&sys_t, tau).len();
        blocks.push(sys);
        dual_blocks.push(sys_t);
    }
    for (s, sign) in Sign::BOTH.into_iter().enumerate() {
        let o = 1 - s;
        report.check_true(
            format!("N{sign}(P+A) = N{}(P'+A') ({} vs {})", sign.opposite(), dims[0][s], dims[1][o]),
            dims[0][s] == dims[1][o],
        );
        // kernel of (I + Y_t^s)^* carried into ker(I + Y^{-s})
        let basis = null_basis(&dual_blocks[s].adjoint(), tau);
        let mut images = Vec::with_capacity(basis.len());
        let mut worst = 0.0f64;
        for x in &basis {
            let z = &a * x.map(|v| v.conj()) * w;
            let norm = z.norm();
            let res = if norm > 0.0 { (&blocks[o] * &z).norm() / norm } else { f64::INFINITY };
            worst = worst.max(res);
            images.push(if norm > 0.0 { z / Complex64::new(norm, 0.0) } else { z });
        }
        report.check_le(format!("A Γ ker(I+Y_t{sign}*) in ker(I+Y{})", sign.opposite()), worst, 1e-8);
        let rank = if images.is_empty() {
            0
        } else {
            linalg::rank(&CMatrix::from_columns(&images), 1e-8)
        };
        report.check_true(format!("A Γ injective on ker(I+Y_t{sign}*)"), rank == basis.len());
    }
    Ok(IndexReport {
        lambda,
        n_plus: dims[0][0],
        n_minus: dims[0][1],
        dual_n_plus: dims[1][0],
        dual_n_minus: dims[1][1],
        report,
    })
}
