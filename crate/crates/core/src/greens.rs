//! Exact inversion of the constant-coefficient operator
//! `L[z] = -z'' + b1 z' + b0 z` on the line and on the half-line, and the
//! constructions built on it: the monotone iteration for `λ < 0`, the
//! large-`λ` non-existence bound and the sharpness demonstration.
//!
//! With `μ+ > 0 > μ-` the roots of `μ² - b1 μ - b0` and `Δ = μ+ - μ-`,
//!
//! ```text
//! G(t, s) = e^{μ-(t-s)} / Δ   (s ≤ t),      e^{μ+(t-s)} / Δ   (s > t).
//! ```
//!
//! On `[0, ∞)` a multiple of `e^{μ- t}` is added. Writing
//! `I₀ = ∫₀^∞ e^{-μ+ s} f` the particular part has `z(0) = I₀/Δ` and
//! `z'(0) = μ+ I₀/Δ`, so the correction `A e^{μ- t}` is
//!
//! * Dirichlet, `z(0) = 0`: `A = -I₀/Δ`;
//! * Navier, `z'(0) = c z(0)` with `c = N-1-γ`: `A = (c - μ+) I₀ / (Δ (μ- - c))`,
//!   which vanishes for `k = 2` where `c = μ+`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::fit_log_slope;
use crate::problem::{assumption_check, quadratic_roots, BoundaryKind, Coefficients, Datum, ProblemSpec};
use crate::quadrature::{cumulative_cubic, integrate_half_line, lagrange4, GaussRule};
use crate::transform::SolutionProfile;

/// Nodes of the default iteration grid.
pub const GRID_NODES: usize = 4001;
/// Half-width of the default grid: `[0, 25]` on balls, `[-25, 25]` entire.
pub const GRID_EXTENT: f64 = 25.0;
/// Fraction of the grid used to fit exponential tails of the input.
const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenKernel {
    pub dim: u32,
    pub boundary: BoundaryKind,
    pub b1: f64,
    pub b0: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// `1/Δ`; equals `1/N` for `k = 2`.
    pub normalization: f64,
    navier_slope: f64,
}

impl GreenKernel {
    pub fn new(coeffs: &Coefficients, boundary: BoundaryKind) -> Self {
        Self::from_parts(coeffs.dim, boundary, coeffs.b1, coeffs.b0, coeffs.navier_slope())
    }

    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self::new(&spec.coefficients(), spec.boundary)
    }

    fn from_parts(dim: u32, boundary: BoundaryKind, b1: f64, b0: f64, navier_slope: f64) -> Self {
        let (mu_plus, mu_minus) = quadratic_roots(b1, b0);
        Self { dim, boundary, b1, b0, mu_plus, mu_minus, normalization: 1.0 / (mu_plus - mu_minus), navier_slope }
    }

    /// Kernel of `L + shift` under the same boundary row.
    pub fn shifted(&self, shift: f64) -> Self {
        Self::from_parts(self.dim, self.boundary, self.b1, self.b0 + shift, self.navier_slope)
    }

    /// Coefficient of `e^{μ- t}` per unit `I₀`.
    fn correction(&self) -> f64 {
        let c = self.navier_slope;
        match self.boundary {
            BoundaryKind::Dirichlet => -self.normalization,
            BoundaryKind::Navier => (c - self.mu_plus) * self.normalization / (self.mu_minus - c),
            BoundaryKind::Entire => 0.0,
        }
    }

    /// Kernel on the whole line.
    pub fn entire_value(&self, t: f64, s: f64) -> f64 {
        let mu = if s <= t { self.mu_minus } else { self.mu_plus };
        (mu * (t - s)).exp() * self.normalization
    }

    /// Kernel including the boundary correction (`t, s ≥ 0` on balls).
    pub fn value(&self, t: f64, s: f64) -> f64 {
        let base = self.entire_value(t, s);
        if self.boundary.is_ball() {
            base + self.correction() * (self.mu_minus * t - self.mu_plus * s).exp()
        } else {
            base
        }
    }
}

/// Uniform grid on `[0, extent]` (balls) or `[-extent, extent]` (entire).
pub fn default_grid(boundary: BoundaryKind, nodes: usize, extent: f64) -> Vec<f64> {
    let lo = if boundary.is_ball() { 0.0 } else { -extent };
    (0..nodes).map(|i| lo + (extent - lo) * i as f64 / (nodes - 1) as f64).collect()
}

/// Exponential rate of a grid function over a tail slice, or `None` when the
/// slice is negligible compared to `scale`.
fn tail_rate(t: &[f64], f: &[f64], scale: f64, end: &str) -> Result<Option<f64>> {
    if f.iter().all(|v| v.abs() <= 1e-14 * scale) {
        return Ok(None);
    }
    fit_log_slope(t, f)
        .map(Some)
        .map_err(|e| Error::Divergence(format!("tail of the input at {end} is not exponential: {e}")))
}

/// `z = L⁻¹ f` on the grid `t` by quadrature against the kernel.
///
/// The two one-sided integrals are propagated interval by interval, each
/// interval integrated exactly up to Gauss error against the local cubic
/// interpolant of `f`. Beyond the grid `f` is continued with its fitted
/// exponential tail, which must be integrable against the kernel.
pub fn green_apply(f: &[f64], t: &[f64], kernel: &GreenKernel) -> Result<Vec<f64>> {
    let n = t.len();
    if n < 4 || f.len() != n {
        return apply(f, t, kernel, |_, _| f64::NAN);
    }
    apply(f, t, kernel, |i, s| {
        let lo = i.saturating_sub(1).min(n - 4);
        lagrange4(&t[lo..lo + 4], &f[lo..lo + 4], s)
    })
}

/// [`green_apply`] for a source known as a function; the interval integrals
/// sample it directly, so jumps placed on grid nodes cost no accuracy.
pub fn green_apply_source(source: impl Fn(f64) -> f64, t: &[f64], kernel: &GreenKernel) -> Result<Vec<f64>> {
    let n = t.len();
    let f: Vec<f64> = t.iter().map(|&s| source(s)).collect();
    if n < 2 {
        return apply(&f, t, kernel, |_, _| f64::NAN);
    }
    // nudge off the nodes so one-sided values are used at jumps
    apply(&f, t, kernel, |i, s| {
        let width = t[i + 1] - t[i];
        source(s.clamp(t[i] + 1e-12 * width, t[i + 1] - 1e-12 * width))
    })
}

fn apply(f: &[f64], t: &[f64], kernel: &GreenKernel, local: impl Fn(usize, f64) -> f64) -> Result<Vec<f64>> {
    let n = t.len();
    if f.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: f.len() });
    }
    if n < 8 {
        return Err(Error::Domain(format!("{n} grid nodes; at least 8 are required")));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("grid must be increasing and the input finite".into()));
    }
    if kernel.boundary.is_ball() && t[0] != 0.0 {
        return Err(Error::Domain(format!("half-line grid must start at t = 0, not {}", t[0])));
    }
    let (mp, mm) = (kernel.mu_plus, kernel.mu_minus);
    let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tail = ((n as f64 * TAIL_FRACTION) as usize).max(4);

    // ∫_{t_end}^∞ e^{μ+(t_end - s)} f(s) ds from the fitted tail f ~ e^{r s}
    let right = match tail_rate(&t[n - tail..], &f[n - tail..], scale, "+inf")? {
        None => 0.0,
        Some(r) if r < mp => f[n - 1] / (mp - r),
        Some(r) => {
            return Err(Error::Divergence(format!("input grows like e^({r:.3} t), not integrable against e^(-{mp:.3} t)")))
        }
    };
    let left = if kernel.boundary.is_ball() {
        0.0
    } else {
        match tail_rate(&t[..tail], &f[..tail], scale, "-inf")? {
            None => 0.0,
            Some(r) if r > mm => f[0] / (r - mm),
            Some(r) => {
                return Err(Error::Divergence(format!(
                    "input behaves like e^({r:.3} t) at -inf, not integrable against e^({:.3} t)",
                    -mm
                )))
            }
        }
    };

    let rule = GaussRule::new(6);
    // lower[i] = ∫_{-∞ or 0}^{t_i} e^{μ-(t_i - s)} f,  upper[i] = ∫_{t_i}^∞ e^{μ+(t_i - s)} f
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    lower[0] = left;
    for i in 0..n - 1 {
        let (a, b) = (t[i], t[i + 1]);
        let piece = rule.integrate(a, b, |s| (mm * (b - s)).exp() * local(i, s));
        lower[i + 1] = (mm * (b - a)).exp() * lower[i] + piece;
    }
    upper[n - 1] = right;
    for i in (0..n - 1).rev() {
        let (a, b) = (t[i], t[i + 1]);
        let piece = rule.integrate(a, b, |s| (mp * (a - s)).exp() * local(i, s));
        upper[i] = (mp * (a - b)).exp() * upper[i + 1] + piece;
    }

    let norm = kernel.normalization;
    let z = match kernel.boundary {
        BoundaryKind::Entire => (0..n).map(|i| norm * (lower[i] + upper[i])).collect(),
        // z(0) = (0 + I₀ - I₀)/Δ = 0 exactly
        BoundaryKind::Dirichlet => (0..n)
            .map(|i| norm * (lower[i] + upper[i] - (mm * t[i]).exp() * upper[0]))
            .collect(),
        BoundaryKind::Navier => {
            let a = kernel.correction() * upper[0];
            (0..n).map(|i| norm * (lower[i] + upper[i]) + a * (mm * t[i]).exp()).collect()
        }
    };
    Ok(z)
}

/// `-z'' + b1 z' + b0 z` at interior nodes `2..n-2` of a uniform grid, with
/// fourth-order central differences.
pub fn apply_operator(z: &[f64], h: f64, b1: f64, b0: f64) -> Vec<f64> {
    let n = z.len();
    if n < 5 {
        return Vec::new();
    }
    (2..n - 2)
        .map(|i| {
            let d1 = (z[i - 2] - 8.0 * z[i - 1] + 8.0 * z[i + 1] - z[i + 2]) / (12.0 * h);
            let d2 = (-z[i - 2] + 16.0 * z[i - 1] - 30.0 * z[i] + 16.0 * z[i + 1] - z[i + 2]) / (12.0 * h * h);
            -d2 + b1 * d1 + b0 * z[i]
        })
        .collect()
}

/// Interior sup-norm of `L[z] - f` on a uniform grid.
pub fn operator_residual(z: &[f64], f: &[f64], t: &[f64], kernel: &GreenKernel) -> Result<f64> {
    if z.len() != f.len() || z.len() != t.len() {
        return Err(Error::LengthMismatch { expected: t.len(), found: z.len().min(f.len()) });
    }
    let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let lz = apply_operator(z, h, kernel.b1, kernel.b0);
    Ok(lz.iter().zip(&f[2..]).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Forcing samples and their kernel images for one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForcingProfile {
    pub lambda: f64,
    pub t_grid: Vec<f64>,
    /// `λ F(t)`.
    pub f2: Vec<f64>,
    /// `L⁻¹ f2`.
    pub z1: Vec<f64>,
    /// `L⁻¹ F`, independent of `λ`.
    pub z_lambda: Vec<f64>,
    alpha: f64,
    k: u32,
}

impl ForcingProfile {
    pub fn new(spec: &ProblemSpec, t_grid: Vec<f64>) -> Result<Self> {
        let kernel = GreenKernel::for_spec(spec);
        let forcing = t_grid.iter().map(|&t| spec.forcing(t)).collect::<Result<Vec<f64>>>()?;
        let f2: Vec<f64> = forcing.iter().map(|v| spec.lambda * v).collect();
        let z1 = green_apply(&f2, &t_grid, &kernel)?;
        let z_lambda = if spec.lambda != 0.0 {
            z1.iter().map(|v| v / spec.lambda).collect()
        } else {
            green_apply(&forcing, &t_grid, &kernel)?
        };
        let c = spec.coefficients();
        Ok(Self { lambda: spec.lambda, t_grid, f2, z1, z_lambda, alpha: c.alpha, k: c.k })
    }

    /// `α z^k + λ F` on the grid.
    pub fn f1(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.f2).map(|(v, f)| self.alpha * v.powi(self.k as i32) + f).collect()
    }
}

/// Outcome of [`monotone_solve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneSolution {
    pub profile: SolutionProfile,
    pub iterations: usize,
    /// `sup |ξ_{n+1} - ξ_n|` per step.
    pub history: Vec<f64>,
    /// `sup |ξ - L⁻¹[α ξ^k + λ F]|` at the final iterate.
    pub residual: f64,
    /// Interior finite-difference residual of the differential equation.
    pub operator_residual: f64,
    /// Shift `M` of the iteration operator `L + M`.
    pub shift: f64,
}

pub const MONOTONE_TOLERANCE: f64 = 1e-10;
pub const MONOTONE_MAX_ITERATIONS: usize = 500;
pub const ORDER_SLACK: f64 = 1e-12;

pub fn monotone_solve(spec: &ProblemSpec) -> Result<MonotoneSolution> {
    monotone_solve_on(spec, default_grid(spec.boundary, GRID_NODES, GRID_EXTENT))
}

/// Monotone iteration for `λ < 0` started from `ξ₀ = L⁻¹[λ F]`.
///
/// The plain map `ξ ↦ L⁻¹[α ξ² + λ F]` is order-reversing on negative
/// functions, so iterates alternate around the solution. The iteration is
/// run as `(L + M) ξ_{n+1} = α ξ_n^k + M ξ_n + λ F` with
/// `M = k α sup|ξ₀|^{k-1}`, which makes the right side nondecreasing on
/// `[ξ₀, 0]` and the sequence nondecreasing. The order `ξ₀ ≤ ξ_n ≤ ξ_{n+1} ≤ 0`
/// is checked at every step.
pub fn monotone_solve_on(spec: &ProblemSpec, t_grid: Vec<f64>) -> Result<MonotoneSolution> {
    spec.require_supported_order()?;
    if !(spec.lambda < 0.0) {
        return Err(Error::Precondition(format!("monotone iteration needs λ < 0, got {}", spec.lambda)));
    }
    if !spec.datum.is_nonnegative() {
        return Err(Error::Precondition("monotone iteration needs g ≥ 0".into()));
    }
    let report = assumption_check(&spec.datum, spec.dim, spec.boundary);
    if !spec.datum.is_zero() && !report.holds() {
        return Err(Error::Assumption(report.witness));
    }
    let c = spec.coefficients();
    let kernel = GreenKernel::for_spec(spec);
    let forcing = ForcingProfile::new(spec, t_grid.clone())?;
    let xi0 = forcing.z1.clone();
    let sup0 = xi0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let shift = f64::from(c.k) * c.alpha * sup0.powi(c.k as i32 - 1);
    let shifted = kernel.shifted(shift);

    let mut xi = xi0.clone();
    let mut history = Vec::new();
    let mut converged = false;
    for iterate in 1..=MONOTONE_MAX_ITERATIONS {
        let rhs: Vec<f64> = forcing.f1(&xi).iter().zip(&xi).map(|(f, x)| f + shift * x).collect();
        let next = green_apply(&rhs, &t_grid, &shifted)?;
        for i in 0..next.len() {
            let (lo, prev, new) = (xi0[i], xi[i], next[i]);
            if new < prev - ORDER_SLACK || new > ORDER_SLACK || prev < lo - ORDER_SLACK {
                return Err(Error::IterationOrder {
                    iterate,
                    detail: format!(
                        "at t = {}: ξ₀ = {lo:e}, ξ_n = {prev:e}, ξ_(n+1) = {new:e}",
                        t_grid[i]
                    ),
                });
            }
        }
        let update = next.iter().zip(&xi).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        history.push(update);
        xi = next;
        if update < MONOTONE_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxIterations { iterations: history.len(), last_update: *history.last().unwrap_or(&f64::NAN) });
    }
    let image = green_apply(&forcing.f1(&xi), &t_grid, &kernel)?;
    let residual = image.iter().zip(&xi).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let operator_residual = operator_residual(&xi, &forcing.f1(&xi), &t_grid, &kernel)?;
    let iterations = history.len();
    let profile = SolutionProfile::with_u(t_grid, xi, spec)?;
    Ok(MonotoneSolution { profile, iterations, history, residual, operator_residual, shift })
}

/// The two constants of the large-`λ` bound and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub lambda_bar: f64,
    /// Change of `λ̄` under grid refinement plus the Gauss error of `C₁`.
    pub quadrature_error_estimate: f64,
}

/// `λ̄ = C₁/C₂` with
///
/// ```text
/// C₁ = (1/Δ) [∫_{-∞}^0 e^{-μ- s} F + ∫_0^∞ e^{-μ+ s} F]
/// C₂ = (α/Δ) [∫_{-∞}^0 e^{-μ- s} z_λ² + ∫_0^∞ e^{-μ+ s} z_λ²],   z_λ = L⁻¹ F,
/// ```
///
/// for `k = 2`. On balls the data live on `t ≥ 0` only and the first
/// integral of each pair is absent.
pub fn nonexistence_threshold(datum: &Datum, dim: u32, boundary: BoundaryKind) -> Result<ThresholdReport> {
    if datum.is_zero() {
        return Err(Error::DegenerateDatum);
    }
    if !datum.is_nonnegative() {
        return Err(Error::Precondition("the bound needs g ≥ 0".into()));
    }
    let report = assumption_check(datum, dim, boundary);
    if !report.holds() {
        return Err(Error::Assumption(report.witness));
    }
    let spec = ProblemSpec::new(2, dim, 1.0, boundary, datum.clone())?;
    let kernel = GreenKernel::for_spec(&spec);
    let c = spec.coefficients();

    let mut c1_error = 0.0;
    let mut c1 = 0.0;
    let breaks = forcing_breakpoints(datum);
    let right = integrate_half_line(|s| (-kernel.mu_plus * s).exp() * spec.forcing(s).unwrap_or(f64::NAN), 0.0, 1.0, &breaks, 200.0);
    c1 += right.value;
    c1_error += right.error_estimate;
    if !boundary.is_ball() {
        let left = integrate_half_line(|s| (-kernel.mu_minus * s).exp() * spec.forcing(s).unwrap_or(f64::NAN), 0.0, -1.0, &breaks, 200.0);
        c1 += left.value;
        c1_error += left.error_estimate;
    }
    c1 *= kernel.normalization;
    if !c1.is_finite() {
        return Err(Error::NonFinite("C1 quadrature".into()));
    }

    let c2_on = |nodes: usize| -> Result<f64> {
        let grid = default_grid(boundary, nodes, GRID_EXTENT);
        let profile = ForcingProfile::new(&spec, grid.clone())?;
        let weighted: Vec<f64> = grid
            .iter()
            .zip(&profile.z_lambda)
            .map(|(&s, z)| {
                let mu = if s < 0.0 { kernel.mu_minus } else { kernel.mu_plus };
                (-mu * s).exp() * z * z
            })
            .collect();
        let total = *cumulative_cubic(&grid, &weighted).last().expect("nonempty grid");
        Ok(c.alpha * kernel.normalization * total)
    };
    let c2 = c2_on(GRID_NODES)?;
    let c2_fine = c2_on(2 * GRID_NODES - 1)?;
    if !(c2 > 0.0) {
        return Err(Error::DegenerateDatum);
    }
    let lambda_bar = c1 / c2;
    let quadrature_error_estimate = (c1 / c2_fine - lambda_bar).abs() + c1_error * kernel.normalization / c2;
    Ok(ThresholdReport { c1, c2, lambda_bar, quadrature_error_estimate })
}

/// Points where `F` has kinks: images `t = -ln s` of density jumps.
fn forcing_breakpoints(datum: &Datum) -> Vec<f64> {
    match datum {
        Datum::Indicator { a, b, .. } => [*a, *b].iter().filter(|v| **v > 0.0).map(|v| -v.ln()).collect(),
        _ => Vec::new(),
    }
}

/// `z₁` at one truncation for one boundary kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessSample {
    pub boundary: BoundaryKind,
    pub truncation: f64,
    pub z1: f64,
    /// `e^{T} z₁(T)`; the entire and ball problems require this to vanish.
    pub weighted_z1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessReport {
    pub dim: u32,
    pub source: String,
    pub samples: Vec<SharpnessSample>,
    /// Per boundary kind: `z₁` increases across the truncations and exceeds `10³` at the last.
    pub unbounded: Vec<(BoundaryKind, bool)>,
    /// Per boundary kind: `z₁` stays below `10³` and decreases at the last truncations.
    pub bounded_decaying: Vec<(BoundaryKind, bool)>,
}

pub const SHARPNESS_TRUNCATIONS: [f64; 3] = [10.0, 20.0, 40.0];
/// Grid spacing of the sharpness runs.
const SHARPNESS_STEP: f64 = 0.00625;

/// `z₁ = L⁻¹ f₂` for a given source on growing truncations, for all three
/// boundary kinds.
pub fn sharpness_profile(source: impl Fn(f64) -> f64, label: &str, dim: u32) -> Result<SharpnessReport> {
    let coeffs = Coefficients::new(2, dim)?;
    let kinds = [BoundaryKind::Dirichlet, BoundaryKind::Navier, BoundaryKind::Entire];
    let mut samples = Vec::new();
    for boundary in kinds {
        let kernel = GreenKernel::new(&coeffs, boundary);
        for &truncation in &SHARPNESS_TRUNCATIONS {
            let nodes = (truncation / SHARPNESS_STEP).round() as usize + 1;
            let nodes = if boundary.is_ball() { nodes } else { 2 * nodes - 1 };
            let grid = default_grid(boundary, nodes, truncation);
            let z = green_apply_source(&source, &grid, &kernel)?;
            let z1 = z[z.len() - 1];
            samples.push(SharpnessSample { boundary, truncation, z1, weighted_z1: truncation.exp() * z1 });
        }
    }
    let per_kind = |pred: &dyn Fn(&[&SharpnessSample]) -> bool| -> Vec<(BoundaryKind, bool)> {
        kinds
            .iter()
            .map(|&b| {
                let runs: Vec<&SharpnessSample> = samples.iter().filter(|s| s.boundary == b).collect();
                (b, pred(&runs))
            })
            .collect()
    };
    let unbounded = per_kind(&|r| r.windows(2).all(|w| w[1].z1 > w[0].z1) && r[r.len() - 1].z1 > 1e3);
    let bounded_decaying = per_kind(&|r| {
        r.iter().all(|s| s.z1.abs() < 1e3) && r[r.len() - 1].z1.abs() <= r[r.len() - 2].z1.abs()
    });
    Ok(SharpnessReport { dim, source: label.to_string(), samples, unbounded, bounded_decaying })
}

/// Runs [`sharpness_profile`] for `f₂ = λ F` built from a datum that violates
/// the decay hypothesis, after checking `λ e^{(N-3)t} ∫₀^{e^{-t}} g ≥ 1` on `t > 0`.
pub fn sharpness_demo(datum: &Datum, lambda: f64, dim: u32) -> Result<SharpnessReport> {
    let spec = ProblemSpec::new(2, dim, lambda, BoundaryKind::Dirichlet, datum.clone())?;
    if assumption_check(datum, dim, BoundaryKind::Dirichlet).holds() {
        return Err(Error::Precondition("datum satisfies the decay hypothesis".into()));
    }
    for i in 1..=400 {
        let t = 0.1 * i as f64;
        let weighted = lambda * t.exp() * spec.forcing(t)?;
        if weighted < 1.0 - 1e-12 {
            return Err(Error::Precondition(format!(
                "λ e^(N-3)t ∫g = {weighted} < 1 at t = {t}"
            )));
        }
    }
    sharpness_profile(
        |t| if t >= 0.0 { lambda * spec.forcing(t).unwrap_or(f64::NAN) } else { 0.0 },
        &format!("λ F for {datum:?}"),
        dim,
    )
}

/// `e^{-rate t} 𝟙_{t ≥ 0}`.
pub fn exponential_source(rate: f64) -> impl Fn(f64) -> f64 {
    move |t| if t >= 0.0 { (-rate * t).exp() } else { 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(dim: u32, boundary: BoundaryKind) -> GreenKernel {
        GreenKernel::new(&Coefficients::new(2, dim).unwrap(), boundary)
    }

    fn bump(t: f64, center: f64, width: f64) -> f64 {
        let x = (t - center) / width;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(4)
        } else {
            0.0
        }
    }

    #[test]
    fn entire_kernel_jump_and_continuity() {
        let g = kernel(4, BoundaryKind::Entire);
        assert_eq!(g.mu_plus, 2.0);
        assert_eq!(g.mu_minus, -2.0);
        assert!((g.normalization - 0.25).abs() < 1e-15);
        let h = 1e-6;
        let t = 0.3;
        // ∂ₜG jumps by -1 across s = t
        let slope_above = (g.entire_value(t + h, t) - g.entire_value(t, t)) / h;
        let slope_below = (g.entire_value(t, t) - g.entire_value(t - h, t)) / h;
        assert!((slope_above - slope_below + 1.0).abs() < 1e-5);
        assert!((g.entire_value(t, t + 1e-14) - g.entire_value(t, t)).abs() < 1e-12);
    }

    #[test]
    fn constant_input_kernel_integrals() {
        // (2N-4)/(2N) + (2N-4)/(N(N-2)) = 1
        for dim in [3u32, 4, 5, 7] {
            let n = f64::from(dim);
            let total = (2.0 * n - 4.0) / (2.0 * n) + (2.0 * n - 4.0) / (n * (n - 2.0));
            assert!((total - 1.0).abs() < 1e-14);
            let g = kernel(dim, BoundaryKind::Entire);
            let left = integrate_half_line(|s| g.entire_value(0.0, s) * (2.0 * n - 4.0), 0.0, -1.0, &[], 80.0);
            let right = integrate_half_line(|s| g.entire_value(0.0, s) * (2.0 * n - 4.0), 0.0, 1.0, &[], 80.0);
            assert!((left.value + right.value - 1.0).abs() < 1e-12, "N = {dim}");
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let t = default_grid(BoundaryKind::Dirichlet, 101, 10.0);
        let z = green_apply(&vec![0.0; 101], &t, &kernel(4, BoundaryKind::Dirichlet)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_of_operator_on_bumps() {
        for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Navier, BoundaryKind::Entire] {
            for dim in [2u32, 4, 6] {
                let g = kernel(dim, boundary);
                let t = default_grid(boundary, 4001, 25.0);
                let f: Vec<f64> = t.iter().map(|&s| bump(s, 2.0, 1.5) + 0.5 * bump(s, 5.0, 0.7)).collect();
                let z = green_apply(&f, &t, &g).unwrap();
                let r = operator_residual(&z, &f, &t, &g).unwrap();
                assert!(r < 1e-6, "{boundary:?} N = {dim}: {r}");
            }
        }
    }

    #[test]
    fn boundary_rows_hold() {
        let t = default_grid(BoundaryKind::Dirichlet, 4001, 25.0);
        let f: Vec<f64> = t.iter().map(|&s| (-s).exp() * (1.0 + s)).collect();
        let zd = green_apply(&f, &t, &kernel(5, BoundaryKind::Dirichlet)).unwrap();
        assert_eq!(zd[0], 0.0);
        // Navier row z'(0) = (N-2) z(0), one-sided fourth-order difference
        let zn = green_apply(&f, &t, &kernel(5, BoundaryKind::Navier)).unwrap();
        let h = t[1];
        let d = (-25.0 * zn[0] + 48.0 * zn[1] - 36.0 * zn[2] + 16.0 * zn[3] - 3.0 * zn[4]) / (12.0 * h);
        assert!((d - 3.0 * zn[0]).abs() < 1e-8, "{d} vs {}", 3.0 * zn[0]);
    }

    #[test]
    fn exponential_input_matches_closed_form() {
        // entire, f = e^{-t} 𝟙_{t≥0}, N = 4: z = (e^{-t} - e^{-2t})/4 + e^{-t}/12 for t ≥ 0
        let g = kernel(4, BoundaryKind::Entire);
        let t = default_grid(BoundaryKind::Entire, 8001, 25.0);
        let z = green_apply_source(exponential_source(1.0), &t, &g).unwrap();
        for (i, &s) in t.iter().enumerate().filter(|(_, s)| **s >= 0.5) {
            let exact = ((-s).exp() - (-2.0 * s).exp()) / 4.0 + (-s).exp() / 12.0;
            assert!((z[i] - exact).abs() < 1e-9 * exact.max(1e-6), "t = {s}: {} vs {exact}", z[i]);
        }
    }

    #[test]
    fn growing_input_is_rejected() {
        let t = default_grid(BoundaryKind::Dirichlet, 401, 20.0);
        let f: Vec<f64> = t.iter().map(|&s| (2.5 * s).exp()).collect();
        assert!(matches!(green_apply(&f, &t, &kernel(4, BoundaryKind::Dirichlet)), Err(Error::Divergence(_))));
    }

    #[test]
    fn z_lambda_is_independent_of_lambda() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let grid = default_grid(BoundaryKind::Dirichlet, 2001, 25.0);
        let a = ForcingProfile::new(&ProblemSpec::new(2, 4, 0.3, BoundaryKind::Dirichlet, datum.clone()).unwrap(), grid.clone()).unwrap();
        let b = ForcingProfile::new(&ProblemSpec::new(2, 4, -2.0, BoundaryKind::Dirichlet, datum).unwrap(), grid).unwrap();
        for (x, y) in a.z_lambda.iter().zip(&b.z_lambda) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn monotone_iteration_converges_below_zero() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, datum).unwrap();
        let sol = monotone_solve(&spec).unwrap();
        assert!(sol.iterations <= 200);
        assert!(sol.residual < 1e-8);
        assert!(sol.operator_residual < 1e-6, "{}", sol.operator_residual);
        assert!(sol.profile.z_values.iter().all(|&z| z <= 0.0));
    }

    #[test]
    fn monotone_iteration_small_lambda_and_zero_datum() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, -1e-8, BoundaryKind::Navier, datum).unwrap();
        assert!(monotone_solve(&spec).unwrap().profile.sup_norm() < 1e-6);
        let zero = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, Datum::Zero).unwrap();
        let sol = monotone_solve(&zero).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.profile.z_values.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn monotone_iteration_preconditions() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let pos = ProblemSpec::new(2, 4, 1.0, BoundaryKind::Dirichlet, datum).unwrap();
        assert!(matches!(monotone_solve(&pos), Err(Error::Precondition(_))));
        let bad = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, Datum::power_law(1.0, 0.0).unwrap()).unwrap();
        assert!(matches!(monotone_solve(&bad), Err(Error::Assumption(_))));
    }

    #[test]
    fn threshold_scaling_and_stability() {
        let g = Datum::power_law(1.0, 1.0).unwrap();
        let one = nonexistence_threshold(&g, 4, BoundaryKind::Dirichlet).unwrap();
        assert!(one.lambda_bar > 0.0 && one.lambda_bar.is_finite());
        assert!(one.quadrature_error_estimate < 1e-6 * one.lambda_bar, "{one:?}");
        let two = nonexistence_threshold(&g.scaled(2.0), 4, BoundaryKind::Dirichlet).unwrap();
        assert!((two.lambda_bar / one.lambda_bar - 0.5).abs() < 1e-6);
        assert!(matches!(nonexistence_threshold(&Datum::Zero, 4, BoundaryKind::Dirichlet), Err(Error::DegenerateDatum)));
    }

    #[test]
    fn sharpness_control_and_zero_source() {
        let control = sharpness_profile(exponential_source(3.0), "e^-3t", 4).unwrap();
        assert!(control.bounded_decaying.iter().all(|(_, ok)| *ok));
        let zero = sharpness_profile(|_| 0.0, "zero", 4).unwrap();
        assert!(zero.samples.iter().all(|s| s.z1 == 0.0));
    }

    #[test]
    fn slow_source_leaves_weighted_limit() {
        // e^{T} z₁(T) tends to 1/3 on the line for N = 4
        let report = sharpness_profile(exponential_source(1.0), "e^-t", 4).unwrap();
        let last = report.samples.iter().rfind(|s| s.boundary == BoundaryKind::Entire).unwrap();
        assert!((last.weighted_z1 - 1.0 / 3.0).abs() < 1e-6, "{last:?}");
    }

    #[test]
    fn demo_rejects_decaying_datum() {
        let ok = Datum::power_law(1.0, 1.0).unwrap();
        assert!(matches!(sharpness_demo(&ok, 1.0, 4), Err(Error::Precondition(_))));
        let constant = Datum::power_law(1.0, 0.0).unwrap();
        assert!(sharpness_demo(&constant, 1.0, 4).is_ok());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn bumps(parts: &[(f64, f64, f64)]) -> impl Fn(f64) -> f64 + '_ {
        move |t| {
            parts
                .iter()
                .map(|&(c, w, a)| {
                    let x = (t - c) / w;
                    if x.abs() < 1.0 { a * (1.0 - x * x).powi(3) } else { 0.0 }
                })
                .sum()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn nonnegative_sources_give_nonnegative_output(
            dim in 3u32..8,
            kind in 0usize..3,
            parts in prop::collection::vec((1.5..6.0f64, 0.1..1.5f64, 0.0..10.0f64), 1..5),
        ) {
            let boundary = [BoundaryKind::Dirichlet, BoundaryKind::Navier, BoundaryKind::Entire][kind];
            let kernel = GreenKernel::new(&Coefficients::new(2, dim).unwrap(), boundary);
            let t = default_grid(boundary, 801, 10.0);
            let z = green_apply_source(bumps(&parts), &t, &kernel).unwrap();
            let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for v in &z {
                prop_assert!(*v >= -1e-12 * scale.max(1.0), "{v}");
            }
        }
    }
}

#[cfg(test)]
mod refinement {
    use super::*;
    use crate::transform::radial_residual;

    fn residual_on(profile: &SolutionProfile, spec: &ProblemSpec, lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = (0..profile.len()).filter(|&i| (lo..=hi).contains(&profile.r_grid[i])).collect();
        let (a, b) = (idx[0], idx[idx.len() - 1] + 1);
        radial_residual(&profile.u_values[a..b], &profile.r_grid[a..b], spec).unwrap()
    }

    #[test]
    fn monotone_radial_residual_follows_grid_order() {
        let spec = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, Datum::power_law(1.0, 1.0).unwrap()).unwrap();
        // pairs with the same finite-difference stride below r = 1
        for (coarse, fine) in [(401, 801), (3201, 6401)] {
            let [a, b] = [coarse, fine].map(|n| {
                let sol = monotone_solve_on(&spec, default_grid(spec.boundary, n, GRID_EXTENT)).unwrap();
                residual_on(&sol.profile, &spec, 0.3, 1.0)
            });
            assert!(a >= 4.0 * b, "{coarse} -> {fine}: {a:e} -> {b:e}");
        }
    }
}
