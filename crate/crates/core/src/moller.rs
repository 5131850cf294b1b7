//! Classical Møller maps `r_λ φ = φ - E±(I + A(λ)E±)^{-1} A(λ) φ` relating
//! solutions of `P` to solutions of `P + A(λ)`.

use num_complex::Complex64;

use crate::error::Result;
use crate::fredholm::Fredholm;
use crate::green::{CausalSolver, Sign};
use crate::lattice::GridFunction;
use crate::operators::{InteractionFamily, LinearMap};
use crate::report::VerifyReport;

/// Møller map at fixed `λ`. `Sign::Plus` is the retarded map, `Sign::Minus`
/// the advanced one.
#[derive(Debug)]
pub struct MollerMap<'a> {
    fredholm: Fredholm<'a>,
    lambda: Complex64,
}

impl<'a> MollerMap<'a> {
    pub fn new(solver: &'a CausalSolver, family: &'a dyn InteractionFamily, lambda: Complex64, sign: Sign) -> Result<Self> {
        Ok(MollerMap {
            fredholm: Fredholm::new(solver, family, sign)?,
            lambda,
        })
    }

    pub fn retarded(solver: &'a CausalSolver, family: &'a dyn InteractionFamily, lambda: Complex64) -> Result<Self> {
        Self::new(solver, family, lambda, Sign::Plus)
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn sign(&self) -> Sign {
        self.fredholm.sign()
    }

    /// `r_λ φ`.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        let fr = &self.fredholm;
        let a_phi = fr.family().apply(self.lambda, phi);
        let g = fr.resolve_sources(self.lambda, &a_phi)?;
        Ok(phi.sub(&fr.solver().solve_unchecked(&g, fr.sign())))
    }

    /// `r_λ⁻¹ φ = φ + E± A(λ) φ`.
    pub fn inverse(&self, phi: &GridFunction) -> GridFunction {
        let fr = &self.fredholm;
        let a_phi = fr.family().apply(self.lambda, phi);
        phi.add(&fr.solver().solve_unchecked(&a_phi, fr.sign()))
    }

    /// Checks that `r_λ` carries `E f` to a solution of `P + A(λ)` and that
    /// `r_λ⁻¹` carries `(Ẽ⁻ - Ẽ⁺) f` to a solution of `P`, on the defining cells.
    pub fn verify_intertwining(&self, f: &GridFunction) -> Result<VerifyReport> {
        let fr = &self.fredholm;
        let solver = fr.solver();
        let defining = solver.op().defining_cells();
        let mut report = VerifyReport::new(format!("moller{}", self.sign()));

        let phi0 = solver.causal_propagator(f)?;
        let r_phi0 = self.apply(&phi0)?;
        let res0 = fr.apply_perturbed(self.lambda, &r_phi0).max_abs_on(&defining);
        report.check_le("(P+A) r E f", res0 / phi0.max_abs().max(f64::MIN_POSITIVE), 1e-9);

        let other = Fredholm::new(solver, fr.family(), fr.sign().opposite())?;
        let (plus, minus) = match fr.sign() {
            Sign::Plus => (fr, &other),
            Sign::Minus => (&other, fr),
        };
        let phi_l = minus
            .modified_green(self.lambda, f)?
            .sub(&plus.modified_green(self.lambda, f)?);
        let res1 = solver.op().apply(&self.inverse(&phi_l)).max_abs_on(&defining);
        report.check_le("P r^-1 (E~- - E~+) f", res1 / phi_l.max_abs().max(f64::MIN_POSITIVE), 1e-9);
        Ok(report)
    }
}

pub fn moller(map: &MollerMap<'_>, phi: &GridFunction) -> Result<GridFunction> {
    map.apply(phi)
}

pub fn moller_inverse(map: &MollerMap<'_>, phi: &GridFunction) -> GridFunction {
    map.inverse(phi)
}

pub fn verify_intertwining(map: &MollerMap<'_>, f: &GridFunction) -> Result<VerifyReport> {
    map.verify_intertwining(f)
}
