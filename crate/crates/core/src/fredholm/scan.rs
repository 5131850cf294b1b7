//! Exceptional-set scanning over a rectangle in the complex `λ`-plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{extremes, Fredholm};
use crate::error::{Error, Result};
use crate::green::{CausalSolver, Sign};
use crate::linalg;
use crate::operators::InteractionFamily;
use crate::par;

/// Axis-aligned rectangle `[re_lo, re_hi] x [im_lo, im_hi]` sampled on an
/// `n_re x n_im` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanWindow {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl ScanWindow {
    pub const DEFAULT_RESOLUTION: usize = 41;

    pub fn new(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Result<Self> {
        let w = ScanWindow { re, im, n_re, n_im };
        w.validate()?;
        Ok(w)
    }

    /// Square window of half-width `radius` about `center`, default resolution.
    pub fn centered(center: Complex64, radius: f64) -> Result<Self> {
        let n = Self::DEFAULT_RESOLUTION;
        Self::new(
            (center.re - radius, center.re + radius),
            (center.im - radius, center.im + radius),
            n,
            n,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok_axis = |(lo, hi): (f64, f64), n: usize| lo.is_finite() && hi.is_finite() && lo < hi && n >= 2;
        if !ok_axis(self.re, self.n_re) || !ok_axis(self.im, self.n_im) {
            return Err(Error::InvalidRegion(format!("bad scan window {self:?}")));
        }
        Ok(())
    }

    pub fn step(&self) -> (f64, f64) {
        (
            (self.re.1 - self.re.0) / (self.n_re - 1) as f64,
            (self.im.1 - self.im.0) / (self.n_im - 1) as f64,
        )
    }

    /// Sample `(a, b)` with `a` along the real axis.
    pub fn point(&self, a: usize, b: usize) -> Complex64 {
        let (hr, hi) = self.step();
        Complex64::new(self.re.0 + a as f64 * hr, self.im.0 + b as f64 * hi)
    }

    /// Whether `z` lies in the window grown by `cells` sampling steps.
    pub fn contains(&self, z: Complex64, cells: f64) -> bool {
        let (hr, hi) = self.step();
        z.re >= self.re.0 - cells * hr
            && z.re <= self.re.1 + cells * hr
            && z.im >= self.im.0 - cells * hi
            && z.im <= self.im.1 + cells * hi
    }
}

/// One `λ` sample: `σ_min` and `det` of `I + Y±(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub lambda: Complex64,
    pub sigma_min: f64,
    pub det: Complex64,
}

/// A located zero of `det(I + Y±(λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    pub lambda: Complex64,
    pub sigma_min: f64,
    pub kernel_dim: usize,
    /// `|det|` at the refined point.
    pub det_residual: f64,
    /// Whether the secant iteration met its tolerance.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub sign: Sign,
    pub window: ScanWindow,
    pub tau: f64,
    /// Samples in row-major order over `(im, re)`: index `b * n_re + a`.
    pub samples: Vec<ScanSample>,
    pub points: Vec<ExceptionalPoint>,
    /// Pairs of points closer than two sampling steps.
    pub clusters: Vec<(usize, usize)>,
}

impl ScanReport {
    pub fn sample(&self, a: usize, b: usize) -> &ScanSample {
        &self.samples[b * self.window.n_re + a]
    }
}

const MAX_SECANT: usize = 50;

struct Secant {
    lambda: Complex64,
    det: Complex64,
    converged: bool,
}

impl Fredholm<'_> {
    fn sample_at(&self, lambda: Complex64) -> ScanSample {
        let sys = self.block(lambda).system();
        let (smin, _) = extremes(&linalg::singular_values(&sys));
        ScanSample {
            lambda,
            sigma_min: if lambda == Complex64::new(0.0, 0.0) { 1.0 } else { smin },
            det: linalg::determinant(&sys),
        }
    }

    fn det(&self, lambda: Complex64) -> Complex64 {
        self.block(lambda).determinant()
    }

    /// Secant iteration on `det` from `start`, first step `h`. Iterates until
    /// the steps stall and returns the point of smallest `|det|`; it counts as
    /// converged when that `|det|` meets the tolerance.
    fn secant(&self, start: Complex64, h: Complex64, det_scale: f64) -> Secant {
        let tol = 1e-12 * (1.0 + det_scale);
        let (mut x0, mut x1) = (start, start + h);
        let (mut d0, mut d1) = (self.det(x0), self.det(x1));
        let mut best = if d0.norm() < d1.norm() { (x0, d0) } else { (x1, d1) };
        for _ in 0..MAX_SECANT {
            if d1.norm() == 0.0 {
                break;
            }
            let denom = d1 - d0;
            if denom.norm() == 0.0 || !denom.is_finite() {
                break;
            }
            let x2 = x1 - d1 * (x1 - x0) / denom;
            if !x2.is_finite() {
                break;
            }
            let small_step = (x2 - x1).norm() <= 4.0 * f64::EPSILON * (1.0 + x2.norm());
            x0 = x1;
            d0 = d1;
            x1 = x2;
            d1 = self.det(x1);
            if d1.norm() < best.1.norm() {
                best = (x1, d1);
            }
            if small_step {
                break;
            }
        }
        Secant {
            lambda: best.0,
            det: best.1,
            converged: best.1.norm() <= tol,
        }
    }

    /// Samples the window, refines every strict local minimum of `σ_min`
    /// by a secant iteration on the determinant, and keeps refined points
    /// with `σ_min <= τ σ_max` inside the window (grown by one step).
    pub fn scan(&self, window: &ScanWindow, tau: f64) -> Result<ScanReport> {
        window.validate()?;
        let (na, nb) = (window.n_re, window.n_im);
        let samples = par::map_range(na * nb, |k| self.sample_at(window.point(k % na, k / na)));
        let at = |a: usize, b: usize| samples[b * na + a].sigma_min;
        let mut candidates = Vec::new();
        for b in 0..nb {
            for a in 0..na {
                let s = at(a, b);
                let mut strict = true;
                for (da, db) in [(-1i64, -1i64), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                    let (x, y) = (a as i64 + da, b as i64 + db);
                    if x < 0 || y < 0 || x >= na as i64 || y >= nb as i64 {
                        continue;
                    }
                    if at(x as usize, y as usize) <= s {
                        strict = false;
                        break;
                    }
                }
                if strict && window.point(a, b) != Complex64::new(0.0, 0.0) {
                    candidates.push(window.point(a, b));
                }
            }
        }
        let det_scale = samples[0].det.norm();
        let (hr, hi) = window.step();
        let h = Complex64::new(0.1 * hr, 0.05 * hi);
        let refined = par::map_slice(&candidates, |&z| self.secant(z, h, det_scale));
        let mut points: Vec<ExceptionalPoint> = Vec::new();
        for r in refined {
            if !r.converged || !window.contains(r.lambda, 1.0) || r.lambda.norm() == 0.0 {
                continue;
            }
            let sys = self.block(r.lambda).system();
            let sigma = linalg::singular_values(&sys);
            let (smin, smax) = extremes(&sigma);
            if smin > tau * smax {
                continue;
            }
            let dup = points
                .iter()
                .any(|p| (p.lambda - r.lambda).norm() <= 1e-8 * (1.0 + r.lambda.norm()));
            if dup {
                continue;
            }
            points.push(ExceptionalPoint {
                lambda: r.lambda,
                sigma_min: smin,
                kernel_dim: sigma.iter().filter(|&&s| s <= tau * smax).count(),
                det_residual: r.det.norm(),
                refined: true,
            });
        }
        points.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
        let radius = 2.0 * hr.max(hi);
        let mut clusters = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if (points[i].lambda - points[j].lambda).norm() <= radius {
                    clusters.push((i, j));
                }
            }
        }
        Ok(ScanReport {
            sign: self.sign(),
            window: *window,
            tau,
            samples,
            points,
            clusters,
        })
    }
}

pub fn scan_exceptional(
    solver: &CausalSolver,
    family: &dyn InteractionFamily,
    window: &ScanWindow,
    sign: Sign,
    tau: f64,
) -> Result<ScanReport> {
    Fredholm::new(solver, family, sign)?.scan(window, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fredholm::TAU_SING;
    use crate::lattice::{GridSpec, Region};
    use crate::operators::{make_klein_gordon, make_rank_one, KernelFamily, KernelOp};
    use crate::profiles::bump2d;

    fn solver() -> CausalSolver {
        let g = GridSpec::circle(20, 12, 0.05, 0.0625).unwrap();
        CausalSolver::new(make_klein_gordon(&g, 0.5, None).unwrap())
    }

    #[test]
    fn zero_family_has_no_exceptional_points() {
        let s = solver();
        let k = Region::rectangle(s.grid(), 6, 9, 3, 6).unwrap();
        let fam = KernelFamily::linear(&KernelOp::zero(&k));
        let w = ScanWindow::centered(Complex64::new(0.0, 0.0), 5.0).unwrap();
        let r = scan_exceptional(&s, &fam, &w, Sign::Plus, TAU_SING).unwrap();
        assert!(r.points.is_empty());
        assert!(r.samples.iter().all(|x| x.sigma_min == 1.0));
        assert_eq!(r.sample(20, 20).lambda, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rank_one_zero_is_found() {
        let s = solver();
        let g = *s.grid();
        let k = Region::rectangle(&g, 6, 10, 2, 7).unwrap();
        let f = bump2d(&g, (g.time(7), g.space(4)), (0.12, 0.2), 1.0).masked(k.cells());
        let h = bump2d(&g, (g.time(9), g.space(5)), (0.12, 0.2), 1.0).masked(k.cells());
        let fam = KernelFamily::linear(&make_rank_one(&f, &h, &k).unwrap());
        for sign in Sign::BOTH {
            let nu = h.pairing(&s.solve(&f, sign).unwrap());
            let star = 1.0 / nu;
            let w = ScanWindow::centered(Complex64::new(0.0, 0.0), 1.5 * star.norm()).unwrap();
            let r = scan_exceptional(&s, &fam, &w, sign, TAU_SING).unwrap();
            assert_eq!(r.points.len(), 1, "{sign}: {:?}", r.points);
            assert!((r.points[0].lambda - star).norm() <= 1e-6 * (1.0 + star.norm()));
            assert_eq!(r.points[0].kernel_dim, 1);
            let worst = r
                .samples
                .iter()
                .map(|x| (x.det - (1.0 - x.lambda * nu)).norm())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10);
        }
    }

    #[test]
    fn bad_windows_are_rejected() {
        assert!(ScanWindow::new((1.0, 0.0), (0.0, 1.0), 5, 5).is_err());
        assert!(ScanWindow::new((0.0, 1.0), (0.0, 1.0), 1, 5).is_err());
    }
}
