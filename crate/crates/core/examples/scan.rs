//! Exceptional points of a degree-2 random kernel in a 6x6 window of λ.

use nonlocal_green::fredholm::{Fredholm, ScanWindow, TAU_SING};
use nonlocal_green::green::{CausalSolver, Sign};
use nonlocal_green::lattice::{GridSpec, Region};
use nonlocal_green::operators::make_klein_gordon;
use nonlocal_green::scenarios::kernel_gaussian;

fn main() -> nonlocal_green::Result<()> {
    let grid = GridSpec::circle(24, 16, 0.05, 0.0625)?;
    let solver = CausalSolver::new(make_klein_gordon(&grid, 1.0, None)?);
    let k = Region::rectangle(&grid, 9, 12, 5, 8)?;
    let family = kernel_gaussian(&solver, &k, 2, 1.0, 7)?;

    for sign in Sign::BOTH {
        let fr = Fredholm::new(&solver, &family, sign)?;
        let window = ScanWindow::new((-3.0, 3.0), (-3.0, 3.0), 41, 41)?;
        let report = fr.scan(&window, TAU_SING)?;
        for p in &report.points {
            println!("{sign}: λ = {:.6} (kernel dim {})", p.lambda, p.kernel_dim);
        }
    }
    Ok(())
}
