//! Newton on a second-order finite-difference grid, natural-parameter
//! continuation in `λ` with fold detection, and residual checks of the
//! linearization around the explicit `N = 4` entire solutions.
//!
//! Grid rows for `-z'' + b1 z' + b0 z - α z^k - λ F = 0`:
//!
//! * interior: centered differences;
//! * `t = 0`: `z = 0` (Dirichlet) or `z' - c z = 0` (Navier, one-sided);
//! * `t = -T` (entire): `z' - μ+ z = 0`, the decaying mode towards `-∞`;
//! * `t = T`: `z' - μ- z = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::{default_grid, nonexistence_threshold, GRID_NODES};
use crate::linalg::{smallest_singular_value, BandMatrix};
use crate::problem::{BoundaryKind, Coefficients, ProblemSpec};
use crate::transform::SolutionProfile;

pub const MIN_NODES: usize = 1000;
pub const DEFAULT_T: f64 = 25.0;
/// Newton stops once the update is below this, relative to `max(1, sup|z|)`.
pub const STEP_TOLERANCE: f64 = 1e-12;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const MAX_NEWTON: usize = 60;
pub const MAX_DAMPING: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub solution: SolutionProfile,
    pub newton_iterations: usize,
    /// Discrete sup-norm of the residual.
    pub residual: f64,
    /// `‖J‖_∞ / σ_min(J)` at the solution.
    pub jacobian_conditioning: f64,
}

impl BranchPoint {
    pub fn sup_norm(&self) -> f64 {
        self.solution.sup_norm()
    }
}

/// The discretized problem at fixed data; `λ` enters only through `forcing`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub t_grid: Vec<f64>,
    pub h: f64,
    pub boundary: BoundaryKind,
    coeffs: Coefficients,
    /// `F(t_i)` without `λ`.
    forcing: Vec<f64>,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec, t_end: f64, nodes: usize) -> Result<Self> {
        spec.require_supported_order()?;
        if nodes < MIN_NODES {
            return Err(Error::Domain(format!("{nodes} grid nodes; at least {MIN_NODES} are required")));
        }
        if !(t_end > 0.0) {
            return Err(Error::Domain(format!("truncation T = {t_end} must be positive")));
        }
        let t_grid = default_grid(spec.boundary, nodes, t_end);
        let h = t_grid[1] - t_grid[0];
        let forcing = if spec.datum.is_zero() {
            vec![0.0; nodes]
        } else {
            t_grid.iter().map(|&t| spec.forcing(t)).collect::<Result<_>>()?
        };
        Ok(Self { t_grid, h, boundary: spec.boundary, coeffs: spec.coefficients(), forcing })
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    fn left_row(&self) -> Option<f64> {
        match self.boundary {
            BoundaryKind::Dirichlet => None,
            BoundaryKind::Navier => Some(self.coeffs.navier_slope()),
            BoundaryKind::Entire => Some(self.coeffs.mu_plus),
        }
    }

    pub fn residual(&self, z: &[f64], lambda: f64) -> Vec<f64> {
        let n = self.len();
        let (h, c) = (self.h, &self.coeffs);
        let k = c.k as i32;
        let mut r = vec![0.0; n];
        r[0] = match self.left_row() {
            None => z[0],
            Some(slope) => (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * h) - slope * z[0],
        };
        for i in 1..n - 1 {
            let d2 = (z[i + 1] - 2.0 * z[i] + z[i - 1]) / (h * h);
            let d1 = (z[i + 1] - z[i - 1]) / (2.0 * h);
            r[i] = -d2 + c.b1 * d1 + c.b0 * z[i] - c.alpha * z[i].powi(k) - lambda * self.forcing[i];
        }
        r[n - 1] = (3.0 * z[n - 1] - 4.0 * z[n - 2] + z[n - 3]) / (2.0 * h) - c.mu_minus * z[n - 1];
        r
    }

    pub fn jacobian(&self, z: &[f64]) -> BandMatrix {
        let potential: Vec<f64> = z.iter().map(|&v| self.potential(v)).collect();
        self.linear_matrix(&potential)
    }

    /// `b0 - k α z^{k-1}`.
    fn potential(&self, z: f64) -> f64 {
        let c = &self.coeffs;
        c.b0 - f64::from(c.k) * c.alpha * z.powi(c.k as i32 - 1)
    }

    /// Matrix of `-φ'' + b1 φ' + q φ` with the boundary rows.
    fn linear_matrix(&self, q: &[f64]) -> BandMatrix {
        let n = self.len();
        let (h, b1) = (self.h, self.coeffs.b1);
        let mut a = BandMatrix::zeros(n, 2, 2);
        match self.left_row() {
            None => a.set(0, 0, 1.0),
            Some(slope) => {
                a.set(0, 0, -3.0 / (2.0 * h) - slope);
                a.set(0, 1, 4.0 / (2.0 * h));
                a.set(0, 2, -1.0 / (2.0 * h));
            }
        }
        for i in 1..n - 1 {
            a.set(i, i - 1, -1.0 / (h * h) - b1 / (2.0 * h));
            a.set(i, i, 2.0 / (h * h) + q[i]);
            a.set(i, i + 1, -1.0 / (h * h) + b1 / (2.0 * h));
        }
        a.set(n - 1, n - 3, 1.0 / (2.0 * h));
        a.set(n - 1, n - 2, -4.0 / (2.0 * h));
        a.set(n - 1, n - 1, 3.0 / (2.0 * h) - self.coeffs.mu_minus);
        a
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton from `guess` on the uniform grid of `guess.len()` nodes
/// over `[0, T]` (balls) or `[-T, T]` (entire).
pub fn newton_solve(spec: &ProblemSpec, lambda: f64, guess: &[f64], t_end: f64) -> Result<BranchPoint> {
    let disc = Discretization::new(spec, t_end, guess.len())?;
    newton_on(&disc, spec, lambda, guess)
}

pub fn newton_on(disc: &Discretization, spec: &ProblemSpec, lambda: f64, guess: &[f64]) -> Result<BranchPoint> {
    if guess.len() != disc.len() {
        return Err(Error::LengthMismatch { expected: disc.len(), found: guess.len() });
    }
    let mut z = guess.to_vec();
    let mut r = disc.residual(&z, lambda);
    let mut rn = sup(&r);
    if !rn.is_finite() {
        return Err(Error::NonFinite("residual of the initial guess".into()));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_NEWTON {
        iterations += 1;
        let jac = disc.jacobian(&z);
        let lu = jac.factor().map_err(|_| Error::SingularJacobian { lambda, pivot: 0.0 })?;
        let step: Vec<f64> = lu.solve(&r).iter().map(|v| -v).collect();
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { lambda, pivot: lu.min_pivot() });
        }
        let size = sup(&step);
        let scale = sup(&z).max(1.0);
        // rounding floor of the residual rows, which carry 1/h² weights
        let floor = 1e3 * f64::EPSILON * scale / (disc.h * disc.h);
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_DAMPING {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, d)| a + tau * d).collect();
            let rt = disc.residual(&trial, lambda);
            let rtn = sup(&rt);
            if rtn.is_finite() && (rtn < rn || rtn <= floor) {
                accepted = Some((trial, rt, rtn));
                break;
            }
            tau *= 0.5;
        }
        let Some((trial, rt, rtn)) = accepted else {
            return Err(Error::NoConvergence(format!(
                "no decrease of the residual {rn:e} after {MAX_DAMPING} damped retries at λ = {lambda}"
            )));
        };
        z = trial;
        r = rt;
        rn = rtn;
        if tau * size <= STEP_TOLERANCE * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxIterations { iterations, last_update: rn });
    }
    if rn > RESIDUAL_TOLERANCE {
        return Err(Error::NoConvergence(format!("residual {rn:e} above {RESIDUAL_TOLERANCE:e} at λ = {lambda}")));
    }
    let jac = disc.jacobian(&z);
    let sigma = smallest_singular_value(&jac, 60).map_err(|_| Error::SingularJacobian { lambda, pivot: 0.0 })?;
    let jacobian_conditioning = jac.norm_inf() / sigma;
    let solution = SolutionProfile::with_u(disc.t_grid.clone(), z, &spec.with_lambda(lambda))?;
    Ok(BranchPoint { lambda, solution, newton_iterations: iterations, residual: rn, jacobian_conditioning })
}

/// The linearization `φ ↦ -φ'' + b1 φ' + (b0 - k α z*^{k-1}) φ` about a
/// grid solution `z*`, with the same boundary rows as the nonlinear problem.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub base_solution: Vec<f64>,
    /// `b0 - k α z*^{k-1}` per node.
    pub potential: Vec<f64>,
    disc: Discretization,
}

impl LinearizedOperator {
    pub fn new(spec: &ProblemSpec, base_solution: Vec<f64>, t_end: f64) -> Result<Self> {
        let disc = Discretization::new(spec, t_end, base_solution.len())?;
        let potential = base_solution.iter().map(|&v| disc.potential(v)).collect();
        Ok(Self { base_solution, potential, disc })
    }

    /// `(b1, b0)` when the base solution vanishes.
    pub fn constant_coefficients(&self) -> Option<(f64, f64)> {
        self.base_solution
            .iter()
            .all(|&v| v == 0.0)
            .then_some((self.disc.coeffs.b1, self.disc.coeffs.b0))
    }

    pub fn matrix(&self) -> BandMatrix {
        self.disc.linear_matrix(&self.potential)
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.matrix().matvec(phi)
    }

    pub fn smallest_singular_value(&self) -> Result<f64> {
        smallest_singular_value(&self.matrix(), 200)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationOptions {
    pub t_end: f64,
    pub nodes: usize,
    /// Continuation stops with a fold once the step falls below this.
    pub min_step: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { t_end: DEFAULT_T, nodes: GRID_NODES, min_step: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    /// Last `λ` with a converged solution.
    pub lambda_star: f64,
    pub last_step: f64,
    pub last_error: String,
    /// Non-existence bound for the same data, when it applies.
    pub lambda_bar: Option<f64>,
    /// `λ* ≤ λ̄`, when the bound applies.
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRun {
    pub points: Vec<BranchPoint>,
    pub fold: Option<FoldReport>,
}

pub fn continue_branch(spec: &ProblemSpec, lambda_step: f64, lambda_max: f64) -> Result<BranchRun> {
    continue_branch_with(spec, lambda_step, lambda_max, &ContinuationOptions::default())
}

/// Natural continuation from `(λ, z) = (0, 0)` towards `lambda_max`,
/// predicting each guess by linear extrapolation of the last two points and
/// halving the step after a failed solve.
pub fn continue_branch_with(
    spec: &ProblemSpec,
    lambda_step: f64,
    lambda_max: f64,
    opts: &ContinuationOptions,
) -> Result<BranchRun> {
    if !(lambda_step > 0.0) || !lambda_max.is_finite() {
        return Err(Error::Domain(format!("step {lambda_step} must be positive and the target finite")));
    }
    let disc = Discretization::new(spec, opts.t_end, opts.nodes)?;
    let direction = if lambda_max < 0.0 { -1.0 } else { 1.0 };
    let mut points = vec![newton_on(&disc, spec, 0.0, &vec![0.0; disc.len()])?];
    let mut step = lambda_step;
    let mut fold = None;
    loop {
        let last = points.last().expect("starting point");
        if last.lambda == lambda_max {
            break;
        }
        let target = if direction > 0.0 {
            (last.lambda + step).min(lambda_max)
        } else {
            (last.lambda - step).max(lambda_max)
        };
        let guess: Vec<f64> = match points.len() {
            1 => last.solution.z_values.clone(),
            m => {
                let prev = &points[m - 2];
                let ratio = (target - last.lambda) / (last.lambda - prev.lambda);
                last.solution
                    .z_values
                    .iter()
                    .zip(&prev.solution.z_values)
                    .map(|(a, b)| a + ratio * (a - b))
                    .collect()
            }
        };
        match newton_on(&disc, spec, target, &guess) {
            Ok(point) => points.push(point),
            Err(
                e @ (Error::NoConvergence(_)
                | Error::SingularJacobian { .. }
                | Error::MaxIterations { .. }
                | Error::NonFinite(_)),
            ) => {
                step *= 0.5;
                if step < opts.min_step {
                    fold = Some(FoldReport {
                        lambda_star: last.lambda,
                        last_step: step,
                        last_error: e.to_string(),
                        lambda_bar: None,
                        within_bound: None,
                    });
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(report) = fold.as_mut() {
        if spec.k == 2 && report.lambda_star > 0.0 {
            if let Ok(bound) = nonexistence_threshold(&spec.datum, spec.dim, spec.boundary) {
                report.lambda_bar = Some(bound.lambda_bar);
                report.within_bound = Some(report.lambda_star <= bound.lambda_bar);
            }
        }
    }
    Ok(BranchRun { points, fold })
}

/// Value and first three derivatives of a function of `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet([f64; 4]);

const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];

impl Jet {
    fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    fn variable(t: f64) -> Self {
        Jet([t, 1.0, 0.0, 0.0])
    }

    fn exp(self) -> Self {
        let x = self.0;
        let mut y = [x[0].exp(), 0.0, 0.0, 0.0];
        for n in 1..4 {
            y[n] = (0..n).map(|j| BINOM[n - 1][j] * y[j] * x[n - j]).sum();
        }
        Jet(y)
    }

    fn scale(self, c: f64) -> Self {
        Jet(self.0.map(|v| c * v))
    }

    fn derivative(self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|n| (0..=n).map(|j| BINOM[n][j] * self.0[j] * o.0[n - j]).sum()))
    }
}

impl std::ops::Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; 4];
        for n in 0..4 {
            let known: f64 = (0..n).map(|j| BINOM[n][j] * q[j] * o.0[n - j]).sum();
            q[n] = (self.0[n] - known) / o.0[0];
        }
        Jet(q)
    }
}

/// `16 e^{2(t-t0)} / (1 + e^{2(t-t0)})²`, the `N = 4` entire solution.
fn explicit_solution(t: Jet, t0: f64) -> Jet {
    let e = (t - Jet::constant(t0)).scale(2.0).exp();
    let one_plus = Jet::constant(1.0) + e;
    e.scale(16.0) / (one_plus * one_plus)
}

/// Value and first three `t`-derivatives of the `N = 4` entire solution
/// `16 e^{2(t-t0)} / (1 + e^{2(t-t0)})²`.
pub fn explicit_entire_solution(t: f64, t0: f64) -> [f64; 4] {
    explicit_solution(Jet::variable(t), t0).0
}

/// `e^t (e^{4t} + e^{4t0} - 3 e^{2(t+t0)}) / (e^{2t} + e^{2t0})³`.
fn kernel_candidate(t: Jet, t0: f64) -> Jet {
    let e2 = t.scale(2.0).exp();
    let e4 = t.scale(4.0).exp();
    let c2 = Jet::constant((2.0 * t0).exp());
    let c4 = Jet::constant((4.0 * t0).exp());
    let numerator = t.exp() * (e4 + c4 - (e2 * c2).scale(3.0));
    let base = e2 + c2;
    numerator / (base * base * base)
}

/// `-φ'' + (constant - 48 e^{2(t+t0)} / (e^{2t} + e^{2t0})²) φ`.
fn printed_operator(phi: Jet, t: f64, t0: f64, constant: f64) -> f64 {
    let denominator = (2.0 * t).exp() + (2.0 * t0).exp();
    let potential = constant - 48.0 * (2.0 * (t + t0)).exp() / (denominator * denominator);
    -phi.0[2] + potential * phi.0[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelReport {
    pub t0: f64,
    /// `sup |-φ'' + (4 - 3 z*) φ|` for `φ = dz*/dt`.
    pub translation_mode_residual: f64,
    /// The candidate kernel function under the operator with constant 1.
    pub printed_kernel_residual: f64,
    /// The same candidate under the operator with constant 4.
    pub constant_four_residual: f64,
    /// `sup |φ|` of the candidate, for scale.
    pub candidate_sup: f64,
}

pub const KERNEL_POINTS: usize = 501;
pub const KERNEL_HALF_WIDTH: f64 = 10.0;

/// Residual checks on `t ∈ [t0 - 10, t0 + 10]` with exact derivatives.
pub fn kernel_check(t0: f64) -> KernelReport {
    let mut report = KernelReport {
        t0,
        translation_mode_residual: 0.0,
        printed_kernel_residual: 0.0,
        constant_four_residual: 0.0,
        candidate_sup: 0.0,
    };
    for i in 0..KERNEL_POINTS {
        let t = t0 - KERNEL_HALF_WIDTH + 2.0 * KERNEL_HALF_WIDTH * i as f64 / (KERNEL_POINTS - 1) as f64;
        let jet = Jet::variable(t);
        let z = explicit_solution(jet, t0);
        // φ = z', so φ'' = z'''
        let [phi, _, phi2] = z.derivative();
        let translation = -phi2 + (4.0 - 3.0 * z.0[0]) * phi;
        let candidate = kernel_candidate(jet, t0);
        report.translation_mode_residual = report.translation_mode_residual.max(translation.abs());
        report.printed_kernel_residual = report.printed_kernel_residual.max(printed_operator(candidate, t, t0, 1.0).abs());
        report.constant_four_residual = report.constant_four_residual.max(printed_operator(candidate, t, t0, 4.0).abs());
        report.candidate_sup = report.candidate_sup.max(candidate.0[0].abs());
    }
    report
}

/// Residual of a candidate kernel function under the operator with a given
/// constant; `φ ≡ 0` gives zero.
pub fn operator_residual_of(phi: impl Fn(f64) -> [f64; 3], t0: f64, constant: f64) -> f64 {
    (0..KERNEL_POINTS)
        .map(|i| {
            let t = t0 - KERNEL_HALF_WIDTH + 2.0 * KERNEL_HALF_WIDTH * i as f64 / (KERNEL_POINTS - 1) as f64;
            let [v, d1, d2] = phi(t);
            printed_operator(Jet([v, d1, d2, 0.0]), t, t0, constant).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{green_apply, GreenKernel};
    use crate::problem::Datum;
    use crate::shoot;

    fn forced(dim: u32, boundary: BoundaryKind) -> ProblemSpec {
        let p = if dim == 2 { 0.0 } else { f64::from(dim) - 3.0 };
        ProblemSpec::new(2, dim, 0.0, boundary, Datum::power_law(1.0, p).unwrap()).unwrap()
    }

    #[test]
    fn zero_is_found_in_one_iteration() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        let p = newton_solve(&spec, 0.0, &vec![0.0; 2001], DEFAULT_T).unwrap();
        assert_eq!(p.newton_iterations, 1);
        assert_eq!(p.sup_norm(), 0.0);
    }

    #[test]
    fn too_few_nodes_rejected() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        assert!(matches!(newton_solve(&spec, 0.0, &[0.0; 100], DEFAULT_T), Err(Error::Domain(_))));
    }

    #[test]
    fn small_lambda_scales_linearly() {
        for dim in [2u32, 4, 5] {
            let spec = forced(dim, BoundaryKind::Dirichlet);
            let a = newton_solve(&spec, 0.01, &vec![0.0; 4001], DEFAULT_T).unwrap();
            let b = newton_solve(&spec, 0.005, &vec![0.0; 4001], DEFAULT_T).unwrap();
            assert!(a.residual < 1e-9);
            let ratio = a.sup_norm() / b.sup_norm();
            assert!((1.8..=2.2).contains(&ratio), "N = {dim}: {ratio}");
        }
    }

    #[test]
    fn agrees_with_shooting() {
        let spec = forced(4, BoundaryKind::Dirichlet).with_lambda(0.01);
        let p = newton_solve(&spec, 0.01, &vec![0.0; 4001], DEFAULT_T).unwrap();
        let s = shoot::solve(&spec, DEFAULT_T, shoot::DEFAULT_WINDOW, 401).unwrap();
        assert_eq!(s.roots.len(), 1);
        let diff = p
            .solution
            .z_values
            .iter()
            .zip(&s.roots[0].profile.z_values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = forced(5, BoundaryKind::Navier);
        let disc = Discretization::new(&spec, 10.0, 1001).unwrap();
        let z: Vec<f64> = disc.t_grid.iter().map(|t| 0.3 * (-t).exp() * (1.0 + t.sin())).collect();
        let jac = disc.jacobian(&z);
        let v: Vec<f64> = disc.t_grid.iter().map(|t| (0.7 * t).cos()).collect();
        let jv = jac.matvec(&v);
        let eps = 1e-6;
        let plus: Vec<f64> = z.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = z.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
        let (rp, rm) = (disc.residual(&plus, 0.2), disc.residual(&minus, 0.2));
        for i in 0..jv.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            assert!((fd - jv[i]).abs() <= 1e-6 * jv[i].abs().max(1.0), "row {i}: {fd} vs {}", jv[i]);
        }
    }

    #[test]
    fn linearization_at_zero_has_constant_coefficients() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        let op = LinearizedOperator::new(&spec, vec![0.0; 1001], DEFAULT_T).unwrap();
        assert_eq!(op.constant_coefficients(), Some((0.0, 4.0)));
        let spec6 = forced(6, BoundaryKind::Navier);
        let op6 = LinearizedOperator::new(&spec6, vec![0.0; 1001], DEFAULT_T).unwrap();
        assert_eq!(op6.constant_coefficients(), Some((2.0, 8.0)));
    }

    #[test]
    fn jacobian_at_origin_is_nonsingular() {
        for dim in [2u32, 3, 4, 6] {
            for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Navier] {
                let spec = forced(dim, boundary);
                let sigmas: Vec<f64> = [1001usize, 2001, 4001]
                    .iter()
                    .map(|&n| LinearizedOperator::new(&spec, vec![0.0; n], DEFAULT_T).unwrap().smallest_singular_value().unwrap())
                    .collect();
                assert!(sigmas.iter().all(|&s| s > 1e-3), "N = {dim} {boundary:?}: {sigmas:?}");
                assert!(sigmas[2] > 0.5 * sigmas[0], "N = {dim} {boundary:?}: {sigmas:?}");
            }
        }
    }

    #[test]
    fn branch_derivative_is_kernel_image() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        let delta = 1e-4;
        let a = newton_solve(&spec, delta, &vec![0.0; 4001], DEFAULT_T).unwrap();
        let b = newton_solve(&spec, -delta, &vec![0.0; 4001], DEFAULT_T).unwrap();
        let t = a.solution.t_grid.clone();
        let f: Vec<f64> = t.iter().map(|&s| spec.forcing(s).unwrap()).collect();
        let image = green_apply(&f, &t, &GreenKernel::for_spec(&spec)).unwrap();
        let diff = (0..t.len())
            .map(|i| ((a.solution.z_values[i] - b.solution.z_values[i]) / (2.0 * delta) - image[i]).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn refinement_is_second_order() {
        let spec = forced(4, BoundaryKind::Navier);
        let solve = |n: usize| newton_solve(&spec, 0.05, &vec![0.0; n], 10.0).unwrap().solution.z_values;
        let (coarse, mid, fine) = (solve(1001), solve(2001), solve(4001));
        let d1 = (0..1001).map(|i| (coarse[i] - mid[2 * i]).abs()).fold(0.0, f64::max);
        let d2 = (0..1001).map(|i| (mid[2 * i] - fine[4 * i]).abs()).fold(0.0, f64::max);
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn zero_datum_branch_is_trivial() {
        let spec = ProblemSpec::new(2, 4, 0.0, BoundaryKind::Dirichlet, Datum::Zero).unwrap();
        let opts = ContinuationOptions { nodes: 1001, ..Default::default() };
        let run = continue_branch_with(&spec, 0.5, 2.0, &opts).unwrap();
        assert!(run.fold.is_none());
        assert_eq!(run.points.last().unwrap().lambda, 2.0);
        assert!(run.points.iter().all(|p| p.sup_norm() == 0.0));
    }

    #[test]
    fn negative_direction_has_no_fold() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        let opts = ContinuationOptions { nodes: 1001, ..Default::default() };
        let run = continue_branch_with(&spec, 0.5, -10.0, &opts).unwrap();
        assert!(run.fold.is_none());
        assert_eq!(run.points.last().unwrap().lambda, -10.0);
    }

    #[test]
    fn positive_direction_folds_below_bound() {
        let spec = forced(4, BoundaryKind::Dirichlet);
        let opts = ContinuationOptions { nodes: 1001, ..Default::default() };
        let run = continue_branch_with(&spec, 0.5, 1e3, &opts).unwrap();
        let fold = run.fold.expect("fold");
        assert!(fold.lambda_star > 0.0);
        assert_eq!(fold.within_bound, Some(true), "{fold:?}");
    }

    #[test]
    fn translation_mode_is_in_kernel() {
        for t0 in [0.0, 1.0] {
            let r = kernel_check(t0);
            assert!(r.translation_mode_residual < 1e-8, "{r:?}");
            assert!(r.printed_kernel_residual.is_finite() && r.constant_four_residual.is_finite());
        }
        assert_eq!(operator_residual_of(|_| [0.0; 3], 0.0, 1.0), 0.0);
    }

    #[test]
    fn jets_differentiate_exactly() {
        let t = 0.4;
        let e = Jet::variable(t).scale(3.0).exp();
        let expected = (3.0 * t).exp();
        assert!((e.0[3] - 27.0 * expected).abs() < 1e-12 * expected * 27.0);
        let q = Jet::constant(1.0) / (Jet::constant(1.0) + Jet::variable(t));
        // d²/dt² (1+t)^{-1} = 2 (1+t)^{-3}
        assert!((q.0[2] - 2.0 / (1.0 + t).powi(3)).abs() < 1e-14);
    }
}
