//! The verification battery: twelve checks, each returning an outcome with
//! the measured numbers so that a failure is reported rather than hidden.

use serde::Serialize;

use crate::branch::{continue_branch, explicit_entire_solution, kernel_check, newton_solve, DEFAULT_T};
use crate::error::Result;
use crate::greens::{exponential_source, monotone_solve, nonexistence_threshold, sharpness_profile};
use crate::integrate::{fit_decay_exponent, integrate, Terminal};
use crate::phaseplane::{
    conserved_v, equilibria, nonexistence_certificate, trace_manifold, ManifoldBranch, Verdict, DEFAULT_HORIZON,
};
use crate::problem::{BoundaryKind, Datum, ProblemSpec};
use crate::shoot::{self, DEFAULT_SAMPLES, DEFAULT_WINDOW};
use crate::transform::SolutionProfile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn new(id: u8, title: &'static str, passed: bool, detail: String) -> Self {
        Self { id, title, passed, detail }
    }

    fn from_result(id: u8, title: &'static str, run: Result<(bool, String)>) -> Self {
        match run {
            Ok((passed, detail)) => Self::new(id, title, passed, detail),
            Err(e) => Self::new(id, title, false, format!("error: {e}")),
        }
    }

    /// One line of the verification table.
    pub fn line(&self) -> String {
        format!("{} [{:02}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.title, self.detail)
    }
}

pub type Criterion = fn() -> CriterionOutcome;

pub const ALL: [Criterion; 12] = [
    criterion_01, criterion_02, criterion_03, criterion_04, criterion_05, criterion_06, criterion_07, criterion_08,
    criterion_09, criterion_10, criterion_11, criterion_12,
];

pub fn run_all() -> Vec<CriterionOutcome> {
    ALL.iter().map(|c| c()).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// The scan finds the trivial solution and nothing else.
fn only_trivial(roots: &[f64]) -> bool {
    roots.len() == 1 && roots[0].abs() < 1e-8
}

/// Sign changes of the scan that are not poles, and the number of poles.
fn scan_brackets(result: &shoot::ShootingResult) -> (Vec<(f64, f64)>, usize) {
    let changes = shoot::sign_changes(&result.scan);
    let poles = changes.iter().filter(|c| c.pole).count();
    (changes.iter().filter(|c| !c.pole).map(|c| (c.lo, c.hi)).collect(), poles)
}

fn brackets_only_zero(brackets: &[(f64, f64)]) -> bool {
    !brackets.is_empty() && brackets.iter().all(|&(lo, hi)| lo <= 0.0 && hi >= 0.0)
}

fn entire(k: u32, dim: u32) -> ProblemSpec {
    ProblemSpec::autonomous(k, dim, BoundaryKind::Entire).expect("valid dimension")
}

/// Closed-form entire solution and its radial profile.
pub fn criterion_01() -> CriterionOutcome {
    CriterionOutcome::from_result(1, "explicit entire solutions", (|| {
        let mut residual = 0.0_f64;
        for t0 in [0.0, 1.5] {
            for i in 0..501 {
                let t = t0 - 10.0 + 20.0 * i as f64 / 500.0;
                let [z, _, z2, _] = explicit_entire_solution(t, t0);
                residual = residual.max((-z2 + 4.0 * z - 1.5 * z * z).abs());
            }
        }
        let spec = entire(2, 4);
        let mut u_error = 0.0_f64;
        for alpha in [1.0_f64, 2.0] {
            let t0 = 0.5 * alpha.ln();
            let t: Vec<f64> = (0..=8000).map(|i| -20.0 + 0.005 * i as f64).collect();
            let z: Vec<f64> = t.iter().map(|&s| explicit_entire_solution(s, t0)[0]).collect();
            let profile = SolutionProfile::with_u(t, z, &spec)?;
            for i in 0..=400 {
                let r = 0.05 + (10.0 - 0.05) * i as f64 / 400.0;
                u_error = u_error.max((profile.u_at(r)? - 8.0 / (1.0 + alpha * r * r)).abs());
            }
        }
        Ok((
            residual < 1e-12 && u_error < 1e-6,
            format!("ODE residual {residual:.2e} (< 1e-12), u sup-error {u_error:.2e} (< 1e-6)"),
        ))
    })())
}

/// First integral of the undamped `N = 4` system along orbits.
pub fn criterion_02() -> CriterionOutcome {
    CriterionOutcome::from_result(2, "conservation of V for N = 4", (|| {
        let spec = entire(2, 4);
        let field = spec.field();
        let mut worst = 0.0_f64;
        // closed orbits around the centre, one near the homoclinic loop
        for x0 in [[1.0, 0.0], [2.0, 0.3], [3.5, 0.0], [2.67, 1.5], [0.05, 0.0], [3.99, 0.0]] {
            let path = integrate(|t, x| field.rate(t, x), x0, 0.0, 30.0, 1e-10, &[])?;
            let v0 = conserved_v(x0[0], x0[1]);
            for s in &path.samples {
                worst = worst.max((conserved_v(s.state[0], s.state[1]) - v0).abs());
            }
        }
        let origin = &equilibria(&spec)?[0];
        let trace = trace_manifold(origin, ManifoldBranch::StableRight, &spec, 30.0)?;
        let v0 = conserved_v(trace.seed[0], trace.seed[1]);
        for s in &trace.trajectory.samples {
            worst = worst.max((conserved_v(s.state[0], s.state[1]) - v0).abs());
        }
        Ok((worst < 1e-7, format!("max |V - V0| = {worst:.2e} over 7 orbits (< 1e-7)")))
    })())
}

/// Origin eigenvalues and the `N = 4` stable direction.
pub fn criterion_03() -> CriterionOutcome {
    CriterionOutcome::from_result(3, "spectral data at the origin", (|| {
        let mut worst = 0.0_f64;
        for dim in 2..=14u32 {
            let origin = &equilibria(&entire(2, dim))?[0];
            let n = f64::from(dim);
            let (hi, lo) = origin.real_eigenvalues().unwrap_or((f64::NAN, f64::NAN));
            worst = worst.max((hi - (n - 2.0)).abs()).max((lo + 2.0).abs());
        }
        let origin = &equilibria(&entire(2, 4))?[0];
        let v = origin.eigenvectors.map(|e| e[1]).unwrap_or([f64::NAN; 2]);
        // cross product with (1, -2), normalized
        let parallel = (v[0] * -2.0 - v[1]).abs() / (v[0].hypot(v[1]) * 5f64.sqrt());
        let exact = worst <= 4.0 * f64::EPSILON;
        Ok((
            exact && parallel < 1e-12,
            format!("max eigenvalue error {worst:.1e} for N = 2..14; stable vector deviation from (1,-2) {parallel:.1e}"),
        ))
    })())
}

/// Heteroclinic connection for `N = 5` and its decay rate.
pub fn criterion_04() -> CriterionOutcome {
    CriterionOutcome::from_result(4, "heteroclinic orbit for N = 5", (|| {
        let spec = entire(2, 5);
        let origin = &equilibria(&spec)?[0];
        let trace = trace_manifold(origin, ManifoldBranch::StableRight, &spec, DEFAULT_HORIZON)?;
        let end = trace.trajectory.final_state();
        let distance = (end[0] - 3.0).hypot(end[1]);
        let rate = fit_decay_exponent(&trace.trajectory, 0.05)?;
        let verdict_ok = matches!(trace.verdict, Verdict::HeteroclinicTo(p) if p == [3.0, 0.0]);
        Ok((
            verdict_ok && distance < 1e-3 && (rate + 2.0).abs() <= 0.05,
            format!("verdict {:?}, distance to (3,0) {distance:.2e}, tail exponent {rate:.4}", trace.verdict),
        ))
    })())
}

/// Crossing certificates and shooting scans for the unforced ball problems.
pub fn criterion_05() -> CriterionOutcome {
    CriterionOutcome::from_result(5, "non-existence certificates at lambda = 0", (|| {
        let mut passed = true;
        let mut notes = Vec::new();
        for dim in [4u32, 5, 6] {
            let cert = nonexistence_certificate(&entire(2, dim))?;
            let nd = cert.crossings_of(BoundaryKind::Dirichlet).count();
            let nn = cert.crossings_of(BoundaryKind::Navier).count();
            passed &= nd == 0 && nn == 0;
            for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Navier] {
                let spec = ProblemSpec::autonomous(2, dim, boundary)?;
                let result = shoot::solve(&spec, DEFAULT_T, DEFAULT_WINDOW, DEFAULT_SAMPLES)?;
                let roots = result.root_parameters();
                let (brackets, poles) = scan_brackets(&result);
                passed &= only_trivial(&roots) && brackets_only_zero(&brackets);
                let crossings = if boundary == BoundaryKind::Dirichlet { nd } else { nn };
                notes.push(format!(
                    "N={dim} {}: crossings {crossings}, brackets {brackets:?}, poles {poles}, roots {roots:?}",
                    boundary.name()
                ));
            }
        }
        let spec = ProblemSpec::autonomous(2, 3, BoundaryKind::Dirichlet)?;
        let res = shoot::solve(&spec, DEFAULT_T, DEFAULT_WINDOW, DEFAULT_SAMPLES)?;
        let nonzero: Vec<f64> = res.root_parameters().into_iter().filter(|s| s.abs() >= 1e-8).collect();
        let (brackets, _) = scan_brackets(&res);
        let away: Vec<(f64, f64)> = brackets.into_iter().filter(|&(lo, hi)| lo > 0.0 || hi < 0.0).collect();
        passed &= !nonzero.is_empty() && !away.is_empty();
        notes.push(format!("N=3 dirichlet: brackets away from 0 {away:?}, nonzero roots {nonzero:?}"));
        Ok((passed, notes.join("; ")))
    })())
}

/// Stable manifolds escape for `N ∈ {2, 3}` on the whole line.
pub fn criterion_06() -> CriterionOutcome {
    CriterionOutcome::from_result(6, "entire non-existence for N = 2, 3", (|| {
        let mut passed = true;
        let mut notes = Vec::new();
        for dim in [2u32, 3] {
            let spec = entire(2, dim);
            let origin = &equilibria(&spec)?[0];
            for branch in [ManifoldBranch::StableLeft, ManifoldBranch::StableRight] {
                let trace = trace_manifold(origin, branch, &spec, DEFAULT_HORIZON)?;
                match trace.trajectory.terminal {
                    Terminal::BlowUp { t_escape } => notes.push(format!("N={dim} {}: escape at t = {t_escape:.3}", branch.name())),
                    ref other => {
                        passed = false;
                        notes.push(format!("N={dim} {}: {}", branch.name(), other.label()));
                    }
                }
            }
        }
        Ok((passed, notes.join("; ")))
    })())
}

fn admissible_power_law(dim: u32) -> Result<Datum> {
    // p = N - 3 is not integrable at s = 0 for N = 2
    let p = if dim == 2 { 0.0 } else { f64::from(dim) - 3.0 };
    Datum::power_law(1.0, p)
}

/// Small-`λ` branch: Newton, linear scaling, agreement with shooting.
pub fn criterion_07() -> CriterionOutcome {
    CriterionOutcome::from_result(7, "small-lambda branch", (|| {
        let mut passed = true;
        let mut notes = Vec::new();
        for dim in [2u32, 4, 5] {
            let spec = ProblemSpec::new(2, dim, 0.0, BoundaryKind::Dirichlet, admissible_power_law(dim)?)?;
            for lambda in [0.01, -0.01] {
                let full = newton_solve(&spec, lambda, &vec![0.0; 4001], DEFAULT_T)?;
                let half = newton_solve(&spec, 0.5 * lambda, &vec![0.0; 4001], DEFAULT_T)?;
                let ratio = full.sup_norm() / half.sup_norm();
                let shot = shoot::solve(&spec.with_lambda(lambda), DEFAULT_T, DEFAULT_WINDOW, DEFAULT_SAMPLES)?;
                let nearest = shot.roots.iter().min_by(|a, b| a.s.abs().total_cmp(&b.s.abs()));
                let diff = nearest.map_or(f64::INFINITY, |r| sup_diff(&r.profile.z_values, &full.solution.z_values));
                let ok = full.residual < 1e-9 && (1.8..=2.2).contains(&ratio) && diff < 1e-6;
                passed &= ok;
                notes.push(format!(
                    "N={dim} λ={lambda}: residual {:.1e}, ratio {ratio:.4}, |shoot - newton| {diff:.1e}",
                    full.residual
                ));
            }
        }
        Ok((passed, notes.join("; ")))
    })())
}

/// Monotone iteration for `λ = -1`.
pub fn criterion_08() -> CriterionOutcome {
    CriterionOutcome::from_result(8, "monotone iteration for lambda < 0", (|| {
        let spec = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, Datum::power_law(1.0, 1.0)?)?;
        // order violations beyond 1e-12 abort the iteration with an error
        let sol = monotone_solve(&spec)?;
        let max_z = sol.profile.z_values.iter().cloned().fold(f64::MIN, f64::max);
        Ok((
            sol.iterations <= 200 && sol.residual < 1e-8 && max_z <= 0.0,
            format!(
                "{} iterations, residual {:.2e}, max z {max_z:.1e}, sup |z| {:.4e}",
                sol.iterations,
                sol.residual,
                sol.profile.sup_norm()
            ),
        ))
    })())
}

/// Non-existence bound against the continuation fold.
pub fn criterion_09() -> CriterionOutcome {
    CriterionOutcome::from_result(9, "large-lambda bound consistency", (|| {
        let datum = Datum::power_law(1.0, 1.0)?;
        let bound = nonexistence_threshold(&datum, 4, BoundaryKind::Dirichlet)?;
        let doubled = nonexistence_threshold(&datum.scaled(2.0), 4, BoundaryKind::Dirichlet)?;
        let scaling = (doubled.lambda_bar / bound.lambda_bar - 0.5).abs() / 0.5;
        let spec = ProblemSpec::new(2, 4, 0.0, BoundaryKind::Dirichlet, datum)?;
        let run = continue_branch(&spec, 0.5, 1e4)?;
        let lambda_star = run.fold.as_ref().map_or(f64::NAN, |f| f.lambda_star);
        let stable = bound.quadrature_error_estimate <= 1e-6 * bound.lambda_bar;
        Ok((
            stable && scaling < 1e-6 && lambda_star > 0.0 && lambda_star <= bound.lambda_bar,
            format!(
                "λ̄ = {:.8} (C1 {:.6e}, C2 {:.6e}, quadrature error {:.1e}), fold λ* = {lambda_star:.6}, scaling error {scaling:.1e}",
                bound.lambda_bar, bound.c1, bound.c2, bound.quadrature_error_estimate
            ),
        ))
    })())
}

/// Growth of `z₁` for a slowly decaying source, boundedness for a fast one.
pub fn criterion_10() -> CriterionOutcome {
    CriterionOutcome::from_result(10, "sharpness of the decay hypothesis", (|| {
        let slow = sharpness_profile(exponential_source(1.0), "e^-t", 4)?;
        let fast = sharpness_profile(exponential_source(3.0), "e^-3t", 4)?;
        let grows = slow.unbounded.iter().all(|(_, ok)| *ok);
        let bounded = fast.bounded_decaying.iter().all(|(_, ok)| *ok);
        let values: Vec<String> = slow
            .samples
            .iter()
            .map(|s| format!("{} T={}: z1 {:.3e}, e^T z1 {:.4}", s.boundary.name(), s.truncation, s.z1, s.weighted_z1))
            .collect();
        Ok((
            grows && bounded,
            format!("e^-t source: {}; e^-3t control bounded: {bounded}", values.join(", ")),
        ))
    })())
}

/// Cubic field: certificates, scans and odd symmetry.
pub fn criterion_11() -> CriterionOutcome {
    CriterionOutcome::from_result(11, "k = 3 certificate", (|| {
        let mut passed = true;
        let mut notes = Vec::new();
        for dim in [3u32, 4, 5] {
            let spec = entire(3, dim);
            let cert = nonexistence_certificate(&spec)?;
            passed &= cert.crossings.is_empty();
            let mut scans = Vec::new();
            for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Navier] {
                let result = shoot::solve(&spec.with_boundary(boundary), DEFAULT_T, DEFAULT_WINDOW, DEFAULT_SAMPLES)?;
                let roots = result.root_parameters();
                let (brackets, poles) = scan_brackets(&result);
                passed &= only_trivial(&roots) && brackets_only_zero(&brackets);
                scans.push(format!("{} brackets {brackets:?} poles {poles} roots {roots:?}", boundary.name()));
            }
            // f(-x) = -f(x) pointwise and along the two stable branches
            let field = spec.field();
            let mut odd = 0.0_f64;
            for i in 0..50 {
                let x = [(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.91).cos() * 5.0];
                let (a, b) = (field.rate(0.0, &x), field.rate(0.0, &[-x[0], -x[1]]));
                odd = odd.max((a[0] + b[0]).abs()).max((a[1] + b[1]).abs());
            }
            let origin = &equilibria(&spec)?[0];
            let right = trace_manifold(origin, ManifoldBranch::StableRight, &spec, 20.0)?;
            let left = trace_manifold(origin, ManifoldBranch::StableLeft, &spec, 20.0)?;
            for (a, b) in right.trajectory.samples.iter().zip(&left.trajectory.samples) {
                odd = odd.max((a.state[0] + b.state[0]).abs()).max((a.state[1] + b.state[1]).abs());
            }
            passed &= odd < 1e-9 && right.trajectory.samples.len() == left.trajectory.samples.len();
            notes.push(format!("N={dim}: crossings {}, {}, oddness {odd:.1e}", cert.crossings.len(), scans.join(", ")));
        }
        Ok((passed, notes.join("; ")))
    })())
}

/// Residuals of the linearized operator on the translation mode and on the
/// candidate kernel function under both constants.
pub fn criterion_12() -> CriterionOutcome {
    let reports: Vec<_> = [0.0, 1.0].iter().map(|&t0| kernel_check(t0)).collect();
    let passed = reports
        .iter()
        .all(|r| r.translation_mode_residual < 1e-8 && r.printed_kernel_residual.is_finite() && r.constant_four_residual.is_finite());
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "t0={}: translation {:.1e}, constant 1 {:.4e}, constant 4 {:.4e} (sup φ {:.3e})",
                r.t0, r.translation_mode_residual, r.printed_kernel_residual, r.constant_four_residual, r.candidate_sup
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    CriterionOutcome::new(12, "linearized kernel report", passed, detail)
}
