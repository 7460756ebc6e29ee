//! Shooting on the truncated half-line `[0, T]`.
//!
//! The scan integrates forward from the `t = 0` boundary row and records the
//! growing-mode amplitude at `T`; its sign changes bracket solutions and are
//! refined by bisection. Because the growing mode amplifies by `e^{μ+ T}`,
//! each bracket is then polished and turned into a profile by two-sided
//! matching: a forward leg from `t = 0` and a backward leg from `T` started
//! on the decaying eigendirection, joined at `t_m` by Newton on the
//! variational equations. A bracket whose polished root moves away from it
//! is a pole of the mismatch (a change of blow-up direction), not a solution.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate_with, Control, Options, Path, Terminal};
use crate::quadrature::{integrate_half_line, GaussRule};
use crate::problem::{BoundaryKind, Coefficients, ProblemSpec};
use crate::transform::SolutionProfile;
use crate::State;

pub const DEFAULT_T: f64 = 25.0;
pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_SAMPLES: usize = 2001;
/// Width to which brackets are bisected.
pub const ROOT_WIDTH: f64 = 1e-12;
/// Largest accepted matching residual.
pub const ROOT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Tolerance of the scan integrations.
    pub scan_tol: f64,
    /// Tolerance of the matching legs.
    pub polish_tol: f64,
    pub profile_nodes: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { scan_tol: 1e-8, polish_tol: 1e-11, profile_nodes: 4001 }
    }
}

/// Initial state on the `t = 0` boundary row.
pub fn start_state(s: f64, spec: &ProblemSpec) -> Result<State> {
    let c = spec.coefficients();
    match spec.boundary {
        BoundaryKind::Dirichlet => Ok([0.0, s]),
        BoundaryKind::Navier => Ok([s, c.navier_slope() * s]),
        BoundaryKind::Entire => Err(Error::UnsupportedBoundary(BoundaryKind::Entire)),
    }
}

fn start_tangent(spec: &ProblemSpec) -> State {
    match spec.boundary {
        BoundaryKind::Navier => [1.0, spec.coefficients().navier_slope()],
        _ => [0.0, 1.0],
    }
}

fn check(spec: &ProblemSpec, t_end: f64) -> Result<Coefficients> {
    spec.require_supported_order()?;
    if !spec.boundary.is_ball() {
        return Err(Error::UnsupportedBoundary(spec.boundary));
    }
    if !(t_end >= 10.0) {
        return Err(Error::Domain(format!("truncation T = {t_end} must be at least 10")));
    }
    Ok(spec.coefficients())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub s: f64,
    /// Growing-mode amplitude at `T`, or `±∞` with its sign at blow-up.
    pub mismatch: f64,
    /// Sign of the growing-mode amplitude where the orbit first leaves the
    /// ball of radius [`escape_radius`] (at `T` if it never does); `None`
    /// for orbits starting outside the ball.
    pub departure: Option<f64>,
    pub terminal: &'static str,
}

/// Radius of the neighbourhood of the origin used to read the departure
/// sign: half the distance to the nonzero equilibrium.
pub fn escape_radius(c: &Coefficients) -> f64 {
    if c.b0 > 0.0 {
        0.5 * (c.b0 / c.alpha).powf(1.0 / (f64::from(c.k) - 1.0))
    } else {
        1.0
    }
}

fn mismatch_sample(s: f64, spec: &ProblemSpec, t_end: f64, tol: f64) -> Result<ScanSample> {
    let c = check(spec, t_end)?;
    let field = spec.field();
    let x0 = start_state(s, spec)?;
    let opts = Options::new(tol).atol(0.0);
    // For k = 2 every escape ends at z → -∞ whichever side the orbit leaves
    // the origin on, so roots where the mismatch only touches -∞ are found
    // through the departure sign instead.
    let radius = escape_radius(&c);
    let inside = x0[0].hypot(x0[1]) < radius;
    let mut exit_sign = None;
    let path = integrate_with(
        |t, x| field.rate(t, x),
        x0,
        0.0,
        t_end,
        &opts,
        &[],
        |_, x| {
            if inside && exit_sign.is_none() && x[0].hypot(x[1]) > radius {
                exit_sign = Some(c.growing_amplitude(x).signum());
            }
            Control::Continue
        },
    )?;
    let amplitude = c.growing_amplitude(&path.final_state());
    let mismatch = match path.terminal {
        Terminal::BlowUp { .. } => amplitude.signum() * f64::INFINITY,
        _ => amplitude,
    };
    let departure = inside.then(|| exit_sign.unwrap_or(amplitude.signum()));
    Ok(ScanSample { s, mismatch, departure, terminal: path.terminal.label() })
}

/// Growing-mode coefficient at `T` of the orbit leaving the `t = 0`
/// boundary row with parameter `s`.
pub fn mismatch(s: f64, spec: &ProblemSpec, t_end: f64) -> Result<f64> {
    mismatch_sample(s, spec, t_end, 1e-10).map(|m| m.mismatch)
}

/// Mismatch on `n` equally spaced parameters, evaluated in parallel.
pub fn scan(spec: &ProblemSpec, t_end: f64, window: (f64, f64), n: usize, tol: f64) -> Result<Vec<ScanSample>> {
    check(spec, t_end)?;
    if n < 2 || !(window.1 > window.0) {
        return Err(Error::Domain("scan needs at least two samples on a nonempty window".into()));
    }
    let step = (window.1 - window.0) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            // exact zero when the window is symmetric
            let s = if 2 * i + 1 == n && window.0 == -window.1 { 0.0 } else { window.0 + step * i as f64 };
            mismatch_sample(s, spec, t_end, tol)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Root {
    pub s: f64,
    /// Norm of the matching defect at `t_m`.
    pub residual: f64,
    /// `|w(0)|` (Dirichlet) or `|w'(0) - (N-1) w(0)|` (Navier).
    pub boundary_residual: f64,
    /// `e^{t} z` at `T`.
    pub weighted_tail: f64,
    pub profile: SolutionProfile,
}

/// Sign change of the scanned mismatch between `lo` and `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignChange {
    pub lo: f64,
    pub hi: f64,
    /// Both ends blew up in opposite directions from starts outside the
    /// departure ball: the mismatch passes through infinity, not zero.
    pub pole: bool,
}

/// Exact zeros (as `lo == hi`) and sign changes of a scan.
pub fn sign_changes(scan: &[ScanSample]) -> Vec<SignChange> {
    let mut out = Vec::new();
    for (i, a) in scan.iter().enumerate() {
        if a.mismatch == 0.0 {
            out.push(SignChange { lo: a.s, hi: a.s, pole: false });
        }
        let Some(b) = scan.get(i + 1) else { continue };
        if a.mismatch != 0.0 && b.mismatch != 0.0 && a.mismatch.signum() != b.mismatch.signum() {
            let departs_apart = matches!((a.departure, b.departure), (Some(x), Some(y)) if x != y);
            let pole = a.mismatch.is_infinite() && b.mismatch.is_infinite() && !departs_apart;
            out.push(SignChange { lo: a.s, hi: b.s, pole });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedBracket {
    pub lo: f64,
    pub hi: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingResult {
    pub roots: Vec<Root>,
    pub scan: Vec<ScanSample>,
    pub truncation_t: f64,
    pub rejected: Vec<RejectedBracket>,
}

impl ShootingResult {
    pub fn root_parameters(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.s).collect()
    }
}

pub fn solve(spec: &ProblemSpec, t_end: f64, window: (f64, f64), n_samples: usize) -> Result<ShootingResult> {
    solve_with(spec, t_end, window, n_samples, &ShootOptions::default())
}

pub fn solve_with(
    spec: &ProblemSpec,
    t_end: f64,
    window: (f64, f64),
    n_samples: usize,
    opts: &ShootOptions,
) -> Result<ShootingResult> {
    if n_samples < 100 {
        return Err(Error::Domain(format!("{n_samples} scan samples; at least 100 are required")));
    }
    let scan = scan(spec, t_end, window, n_samples, opts.scan_tol)?;
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    for (i, sample) in scan.iter().enumerate() {
        if sample.mismatch == 0.0 {
            candidates.push((sample.s, sample.s, sample.s));
        }
        let Some(next) = scan.get(i + 1) else { continue };
        let (a, b) = (sample.mismatch, next.mismatch);
        if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
            let s = bisect_root(spec, t_end, sample, next, opts.scan_tol, |m| Some(m.mismatch))?;
            candidates.push((s, sample.s, next.s));
        } else if let (Some(da), Some(db)) = (sample.departure, next.departure) {
            if a != 0.0 && b != 0.0 && da != db {
                let s = bisect_root(spec, t_end, sample, next, opts.scan_tol, |m| m.departure)?;
                candidates.push((s, sample.s, next.s));
            }
        }
    }

    let mut roots = Vec::new();
    let mut rejected = Vec::new();
    for (s, lo, hi) in candidates {
        match polish(spec, s, t_end, opts) {
            Ok(root) if within(root.s, lo, hi) && root.residual < ROOT_TOLERANCE => {
                if !roots.iter().any(|r: &Root| (r.s - root.s).abs() <= 1e-9 * root.s.abs().max(1.0)) {
                    roots.push(root)
                }
            }
            Ok(root) => rejected.push(RejectedBracket {
                lo,
                hi,
                reason: format!("matching moved the root to {} (residual {:e})", root.s, root.residual),
            }),
            Err(e) => rejected.push(RejectedBracket { lo, hi, reason: e.to_string() }),
        }
    }
    Ok(ShootingResult { roots, scan, truncation_t: t_end, rejected })
}

/// Polished roots must stay in their bracket, up to a relative slack.
fn within(s: f64, lo: f64, hi: f64) -> bool {
    let slack = 1e-6 * s.abs().max(1.0);
    s >= lo - slack && s <= hi + slack
}

/// Bisection on the sign of `key`; stops early where `key` is undefined.
fn bisect_root(
    spec: &ProblemSpec,
    t_end: f64,
    lo: &ScanSample,
    hi: &ScanSample,
    tol: f64,
    key: impl Fn(&ScanSample) -> Option<f64>,
) -> Result<f64> {
    let sign_lo = key(lo).map_or(0.0, f64::signum);
    let (mut lo, mut hi) = (lo.s, hi.s);
    while hi - lo > ROOT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sample = mismatch_sample(mid, spec, t_end, tol)?;
        let Some(m) = key(&sample) else { break };
        if sample.mismatch == 0.0 || m == 0.0 {
            return Ok(mid);
        }
        if m.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Planar field augmented with its variational equation.
fn augmented(spec: &ProblemSpec) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
    let field = spec.field();
    move |t, x| {
        let r = field.rate(t, &[x[0], x[1]]);
        let j = field.jacobian(&[x[0], x[1]]);
        [r[0], r[1], j[0][0] * x[2] + j[0][1] * x[3], j[1][0] * x[2] + j[1][1] * x[3]]
    }
}

/// Matching point: long enough for the forward leg to resolve the decaying
/// solution, short enough that its growing mode stays below `e^{10}`.
pub fn matching_time(coeffs: &Coefficients, t_end: f64) -> f64 {
    if coeffs.mu_plus > 0.0 {
        (0.5 * t_end).min(10.0 / coeffs.mu_plus)
    } else {
        0.5 * t_end
    }
}

struct Legs {
    forward: Path<4>,
    backward: Path<4>,
}

fn run_legs(spec: &ProblemSpec, s: f64, q: f64, t_end: f64, t_match: f64, tol: f64) -> Result<Legs> {
    let c = spec.coefficients();
    let rhs = augmented(spec);
    let opts = Options::new(tol).atol(0.0);
    let x0 = start_state(s, spec)?;
    let d0 = start_tangent(spec);
    let forward = integrate_with(&rhs, [x0[0], x0[1], d0[0], d0[1]], 0.0, t_match, &opts, &[], |_, _| Control::Continue)?;
    let scale = (c.mu_minus * t_end).exp();
    let p = forced_tail(spec, &c, t_end)?;
    let xt = [p[0] + q * scale, p[1] + q * scale * c.mu_minus, scale, scale * c.mu_minus];
    let backward = integrate_with(&rhs, xt, t_end, t_match, &opts, &[], |_, _| Control::Continue)?;
    for (leg, name) in [(&forward, "forward"), (&backward, "backward")] {
        if leg.terminal != Terminal::ReachedEnd {
            return Err(Error::NoConvergence(format!("{name} matching leg stopped: {}", leg.terminal.label())));
        }
    }
    Ok(Legs { forward, backward })
}

/// Growing-mode part of the decaying forced solution at `T`,
/// `(1, μ+) λ/Δ ∫_T^∞ e^{μ+(T-s)} F(s) ds`; the nonlinearity is negligible there.
fn forced_tail(spec: &ProblemSpec, c: &Coefficients, t_end: f64) -> Result<State> {
    if spec.lambda == 0.0 || spec.datum.is_zero() {
        return Ok([0.0, 0.0]);
    }
    let mut failure = None;
    let q = integrate_half_line(
        |s| match spec.forcing(s) {
            Ok(f) => (c.mu_plus * (t_end - s)).exp() * f,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        t_end,
        1.0,
        &[],
        400.0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let p = spec.lambda * q.value / (c.mu_plus - c.mu_minus);
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("forced tail at T = {t_end}")));
    }
    Ok([p, c.mu_plus * p])
}

/// Decaying-mode amplitude (in units of `e^{μ- t}`) that the linearized
/// forcing adds between `t_match` and `T`: `λ/Δ ∫ e^{-μ- s} F(s) ds`.
fn forced_decaying_gain(spec: &ProblemSpec, c: &Coefficients, t_match: f64, t_end: f64) -> Result<f64> {
    if spec.lambda == 0.0 || spec.datum.is_zero() {
        return Ok(0.0);
    }
    let rule = GaussRule::new(10);
    let mut total = 0.0;
    let mut a = t_match;
    while a < t_end {
        let b = (a + 1.0).min(t_end);
        let mut failure = None;
        total += rule.integrate(a, b, |s| match spec.forcing(s) {
            Ok(f) => (-c.mu_minus * s).exp() * f,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        a = b;
    }
    Ok(spec.lambda * total / (c.mu_plus - c.mu_minus))
}

/// Newton on the matching defect in `(s, q)`, then assembly of the profile.
pub fn polish(spec: &ProblemSpec, s_guess: f64, t_end: f64, opts: &ShootOptions) -> Result<Root> {
    let c = check(spec, t_end)?;
    let t_match = matching_time(&c, t_end);
    let tol = opts.polish_tol;

    let mut s = s_guess;
    let x_fwd = run_legs(spec, s, 0.0, t_end, t_match, tol)?.forward.final_state();
    let mut q = c.decaying_amplitude(&[x_fwd[0], x_fwd[1]]) * (-c.mu_minus * t_match).exp()
        + forced_decaying_gain(spec, &c, t_match, t_end)?;
    let mut residual = f64::INFINITY;
    let mut legs = None;
    for _ in 0..40 {
        let run = run_legs(spec, s, q, t_end, t_match, tol)?;
        let f = run.forward.final_state();
        let b = run.backward.final_state();
        let defect = [f[0] - b[0], f[1] - b[1]];
        let size = f[0].abs().max(f[1].abs()).max(b[0].abs()).max(b[1].abs()).max(1e-300);
        residual = (defect[0].powi(2) + defect[1].powi(2)).sqrt();
        // columns: ∂/∂s forward, -∂/∂q backward
        let (a11, a12, a21, a22) = (f[2], -b[2], f[3], -b[3]);
        let det = a11 * a22 - a12 * a21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence(format!("singular matching Jacobian near s = {s}")));
        }
        let ds = -(a22 * defect[0] - a12 * defect[1]) / det;
        let dq = -(-a21 * defect[0] + a11 * defect[1]) / det;
        legs = Some(run);
        if residual <= 1e-14 * size.max(1e-12) || (ds.abs() <= 1e-15 * s.abs().max(1e-12) && dq.abs() <= 1e-15 * q.abs().max(1e-300)) {
            break;
        }
        s += ds;
        q += dq;
        if !s.is_finite() || !q.is_finite() {
            return Err(Error::NoConvergence("matching Newton diverged".into()));
        }
    }
    let legs = legs.expect("at least one Newton pass");
    let n = opts.profile_nodes.max(16);
    let t_grid: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    let z: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let leg = if t <= t_match { &legs.forward } else { &legs.backward };
            leg.interpolate(t).map(|x| x[0]).unwrap_or(f64::NAN)
        })
        .collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matching legs do not cover the profile grid".into()));
    }
    let profile = SolutionProfile::with_u(t_grid, z, spec)?;
    let y0 = legs.forward.first().state[1];
    let z0 = legs.forward.first().state[0];
    let boundary_residual = boundary_residual(spec, &c, z0, y0);
    let weighted_tail = (t_end.exp() * profile.z_values[n - 1]).abs();
    Ok(Root { s, residual, boundary_residual, weighted_tail, profile })
}

/// Boundary row at `t = 0` in the `w` variable.
fn boundary_residual(spec: &ProblemSpec, c: &Coefficients, z0: f64, y0: f64) -> f64 {
    // w = e^{γt} z  ⇒  w(0) = z(0), w'(0) = z'(0) + γ z(0)
    let (w0, dw0) = (z0, y0 + c.gamma * z0);
    match spec.boundary {
        BoundaryKind::Dirichlet => w0.abs(),
        _ => (dw0 - (f64::from(c.dim) - 1.0) * w0).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Datum;

    fn ball(dim: u32, boundary: BoundaryKind) -> ProblemSpec {
        ProblemSpec::autonomous(2, dim, boundary).unwrap()
    }

    #[test]
    fn trivial_orbit_has_zero_mismatch() {
        for dim in [3, 4, 5] {
            assert_eq!(mismatch(0.0, &ball(dim, BoundaryKind::Dirichlet), 25.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn short_truncation_is_rejected() {
        assert!(matches!(mismatch(1.0, &ball(4, BoundaryKind::Dirichlet), 5.0), Err(Error::Domain(_))));
        assert!(matches!(
            mismatch(1.0, &ball(4, BoundaryKind::Entire), 25.0),
            Err(Error::UnsupportedBoundary(_))
        ));
    }

    #[test]
    fn unforced_balls_above_critical_dimension_have_only_zero() {
        for dim in [4, 5] {
            for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Navier] {
                let res = solve(&ball(dim, boundary), DEFAULT_T, DEFAULT_WINDOW, 401).unwrap();
                assert_eq!(res.root_parameters(), vec![0.0], "N = {dim}, {boundary:?}: {:?}", res.rejected);
            }
        }
    }

    #[test]
    fn three_dimensional_dirichlet_has_nonzero_root() {
        let res = solve(&ball(3, BoundaryKind::Dirichlet), DEFAULT_T, DEFAULT_WINDOW, 401).unwrap();
        let nonzero: Vec<&Root> = res.roots.iter().filter(|r| r.s != 0.0).collect();
        assert!(!nonzero.is_empty(), "{:?}", res.rejected);
        for root in nonzero {
            assert!(root.boundary_residual < 1e-8);
            assert!(root.profile.u_values[0] == 0.0);
        }
    }

    #[test]
    fn small_forcing_gives_small_unique_root() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, 0.01, BoundaryKind::Dirichlet, datum).unwrap();
        let a = solve(&spec, DEFAULT_T, DEFAULT_WINDOW, 401).unwrap();
        let b = solve(&spec.with_lambda(0.005), DEFAULT_T, DEFAULT_WINDOW, 401).unwrap();
        assert_eq!(a.roots.len(), 1, "{:?}", a.rejected);
        assert_eq!(b.roots.len(), 1);
        assert!(b.roots[0].s.abs() < a.roots[0].s.abs());
        assert!(a.roots[0].weighted_tail < 1e-6);
    }

    #[test]
    fn negative_forcing_gives_nonpositive_profile() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, -1.0, BoundaryKind::Dirichlet, datum).unwrap();
        let res = solve(&spec, DEFAULT_T, DEFAULT_WINDOW, 401).unwrap();
        assert!(!res.roots.is_empty());
        let root = &res.roots[0];
        assert!(root.profile.z_values.iter().all(|&z| z <= 1e-14), "max {}", root.profile.z_values.iter().cloned().fold(f64::MIN, f64::max));
    }

    #[test]
    fn truncation_insensitivity() {
        let datum = Datum::power_law(1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, 0.01, BoundaryKind::Navier, datum).unwrap();
        let a = solve(&spec, 25.0, DEFAULT_WINDOW, 201).unwrap();
        let b = solve(&spec, 50.0, DEFAULT_WINDOW, 201).unwrap();
        assert!((a.roots[0].s - b.roots[0].s).abs() < 1e-8);
    }
}
