//! Fixtures shared by the solver benchmarks in `benches/`.

use khessian_core::greens::{default_grid, GreenKernel, GRID_EXTENT, GRID_NODES};
use khessian_core::{BoundaryKind, Datum, ProblemSpec};

/// Unforced `k = 2`, `N = 4` problem: the homoclinic case.
pub fn homoclinic_case() -> ProblemSpec {
    ProblemSpec::autonomous(2, 4, BoundaryKind::Entire).expect("valid problem")
}

/// Forced Dirichlet problem with `g(s) = s`.
pub fn forced_case(lambda: f64) -> ProblemSpec {
    let datum = Datum::power_law(1.0, 1.0).expect("valid datum");
    ProblemSpec::new(2, 4, lambda, BoundaryKind::Dirichlet, datum).expect("valid problem")
}

/// Kernel, grid and a smooth decaying source for Green inversion.
pub fn green_input(boundary: BoundaryKind) -> (GreenKernel, Vec<f64>, Vec<f64>) {
    let spec = ProblemSpec::autonomous(2, 4, boundary).expect("valid problem");
    let kernel = GreenKernel::for_spec(&spec);
    let t = default_grid(boundary, GRID_NODES, GRID_EXTENT);
    let f = t.iter().map(|&s| (-3.0 * s.abs()).exp() / (1.0 + s * s)).collect();
    (kernel, t, f)
}
