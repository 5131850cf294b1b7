//! Smooth profiles sampled on the lattice.
//!
//! Everything is built from the standard bump `exp(-1/(1 - t^2))` on `(-1, 1)`.

use num_complex::Complex64;

use crate::lattice::{GridFunction, GridSpec};

/// Standard bump, zero outside `(-1, 1)`, equal to `1/e` at the origin.
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Bump normalised to peak value 1, centred at `center` with half-width `radius`.
pub fn unit_bump(x: f64, center: f64, radius: f64) -> f64 {
    bump((x - center) / radius) * std::f64::consts::E
}

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Smooth plateau: 1 on `[lo, hi]`, 0 outside `(lo - ramp, hi + ramp)`.
pub fn plateau(x: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    if x >= lo && x <= hi {
        1.0
    } else if x < lo {
        smooth_step((x - (lo - ramp)) / ramp)
    } else {
        smooth_step(((hi + ramp) - x) / ramp)
    }
}

/// One-dimensional profile described by a recipe.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile1d {
    Bump { center: f64, radius: f64, amplitude: f64 },
    Step { start: f64, end: f64, amplitude: f64 },
    Plateau { lo: f64, hi: f64, ramp: f64 },
}

impl Profile1d {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile1d::Bump {
                center,
                radius,
                amplitude,
            } => amplitude * unit_bump(x, center, radius),
            Profile1d::Step { start, end, amplitude } => {
                amplitude * smooth_step((x - start) / (end - start))
            }
            Profile1d::Plateau { lo, hi, ramp } => plateau(x, lo, hi, ramp),
        }
    }

    /// Samples at `x0 + k h`, `k = 0..n`.
    pub fn sample(&self, n: usize, x0: f64, h: f64) -> Vec<f64> {
        (0..n).map(|k| self.eval(x0 + k as f64 * h)).collect()
    }
}

/// Product bump on the grid, centred at coordinates `(t, x)` with half-widths
/// `(rt, rx)`. Spatial distance is periodic on a circle grid.
pub fn bump2d(grid: &GridSpec, center: (f64, f64), radius: (f64, f64), amplitude: f64) -> GridFunction {
    let period = grid.nx as f64 * grid.dx;
    let circle = grid.topology == crate::lattice::Topology::TimeBoundedCircle;
    GridFunction::from_fn(grid, |c| {
        let dt = grid.time(c.n) - center.0;
        let mut dx = grid.space(c.j) - center.1;
        if circle {
            dx -= period * (dx / period).round();
        }
        let v = amplitude * unit_bump(dt, 0.0, radius.0) * unit_bump(dx, 0.0, radius.1);
        Complex64::new(v, 0.0)
    })
}
