//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values (descending) with the matching right singular vectors.
pub struct RightSvd {
    pub sigma: Vec<f64>,
    pub right: Vec<CVector>,
}

pub fn right_svd(m: &CMatrix) -> RightSvd {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let right = idx.iter().map(|&i| v_t.row(i).adjoint()).collect();
    RightSvd { sigma, right }
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

pub fn determinant(m: &CMatrix) -> Complex64 {
    if m.is_empty() {
        return ONE;
    }
    m.clone().lu().determinant()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_abs_slice(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Angle between two complex lines, `atan2(|b - proj_a b|, |proj_a b|)`.
///
/// Uses the sine form so that tiny angles are resolved to rounding level.
pub fn line_angle(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let aa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    if aa == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let ab: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let c = ab / aa;
    let perp = norm2(&b.iter().zip(a).map(|(y, x)| y - c * x).collect::<Vec<_>>());
    let par = c.norm() * aa.sqrt();
    perp.atan2(par)
}

/// Matrix with i.i.d. complex Gaussian entries (`re, im ~ N(0, std^2 / 2)`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> CMatrix {
    let s = std / std::f64::consts::SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// Matrix with i.i.d. real Gaussian entries.
pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        Complex64::new(std * re, 0.0)
    })
}
