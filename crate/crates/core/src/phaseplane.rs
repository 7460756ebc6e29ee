//! Phase-plane structure of the autonomous planar system: equilibria and
//! their spectra, the conserved quantity at `N = 4`, manifold tracing and
//! floating-point certificates that no orbit on the stable manifold of the
//! origin meets the Dirichlet or Navier boundary sets.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{distance, integrate_with, Control, Event, EventHit, EventKind, Options, Terminal, Trajectory};
use crate::problem::{quadratic_roots, BoundaryKind, Coefficients, ProblemSpec};
use crate::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Saddle,
    SourceNode,
    SourceFocus,
    SinkNode,
    SinkFocus,
    Center,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub point: State,
    pub jacobian: [[f64; 2]; 2],
    /// Ordered with the larger real part first.
    pub eigenvalues: [Complex64; 2],
    /// Unit eigenvectors `∝ (1, μ)` with positive `z` component, when real.
    pub eigenvectors: Option<[State; 2]>,
    pub classification: Classification,
}

impl Equilibrium {
    fn at(point: State, coeffs: &Coefficients) -> Self {
        let k = coeffs.k as i32;
        let j21 = coeffs.b0 - f64::from(coeffs.k) * coeffs.alpha * point[0].powi(k - 1);
        let jacobian = [[0.0, 1.0], [j21, coeffs.b1]];
        let disc = coeffs.b1 * coeffs.b1 + 4.0 * j21;
        let (eigenvalues, eigenvectors) = if disc >= 0.0 {
            let (hi, lo) = quadratic_roots(coeffs.b1, j21);
            let unit = |mu: f64| {
                let n = (1.0 + mu * mu).sqrt();
                [1.0 / n, mu / n]
            };
            ([Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)], Some([unit(hi), unit(lo)]))
        } else {
            let re = 0.5 * coeffs.b1;
            let im = 0.5 * (-disc).sqrt();
            ([Complex64::new(re, im), Complex64::new(re, -im)], None)
        };
        let classification = classify_spectrum(&eigenvalues);
        Self { point, jacobian, eigenvalues, eigenvectors, classification }
    }

    /// Real eigenvalues `(larger, smaller)`, if the spectrum is real.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        self.eigenvectors.map(|_| (self.eigenvalues[0].re, self.eigenvalues[1].re))
    }

    pub fn is_origin(&self) -> bool {
        self.point == [0.0, 0.0]
    }
}

fn classify_spectrum(ev: &[Complex64; 2]) -> Classification {
    use Classification::*;
    if ev[0].im != 0.0 {
        return match ev[0].re {
            re if re > 0.0 => SourceFocus,
            re if re < 0.0 => SinkFocus,
            _ => Center,
        };
    }
    let (a, b) = (ev[0].re, ev[1].re);
    if a == 0.0 || b == 0.0 {
        Degenerate
    } else if a > 0.0 && b > 0.0 {
        SourceNode
    } else if a < 0.0 && b < 0.0 {
        SinkNode
    } else {
        Saddle
    }
}

/// Classification from the stored spectrum.
pub fn classify(eq: &Equilibrium, _spec: &ProblemSpec) -> Classification {
    classify_spectrum(&eq.eigenvalues)
}

fn require_autonomous(spec: &ProblemSpec) -> Result<Coefficients> {
    if spec.lambda != 0.0 {
        return Err(Error::NonAutonomous(spec.lambda));
    }
    spec.require_supported_order()?;
    Ok(spec.coefficients())
}

/// Equilibria of the unforced system; coincident points are reported once.
pub fn equilibria(spec: &ProblemSpec) -> Result<Vec<Equilibrium>> {
    let c = require_autonomous(spec)?;
    let mut points = vec![[0.0, 0.0]];
    let ratio = c.b0 / c.alpha;
    match c.k {
        2 => points.push([ratio, 0.0]),
        3 if ratio > 0.0 => {
            let z = ratio.sqrt();
            points.push([z, 0.0]);
            points.push([-z, 0.0]);
        }
        _ => {}
    }
    let mut unique: Vec<State> = Vec::new();
    for p in points {
        if !unique.iter().any(|q| distance(q, &p) == 0.0) {
            unique.push(p);
        }
    }
    Ok(unique.into_iter().map(|p| Equilibrium::at(p, &c)).collect())
}

/// `V(z, y) = y²/2 - 2z² + z³/2`, conserved when `k = 2`, `N = 4`.
pub fn conserved_v(z: f64, y: f64) -> f64 {
    0.5 * y * y - 2.0 * z * z + 0.5 * z * z * z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldBranch {
    StableLeft,
    StableRight,
    UnstableLeft,
    UnstableRight,
}

impl ManifoldBranch {
    pub const ALL: [ManifoldBranch; 4] = [
        ManifoldBranch::StableLeft,
        ManifoldBranch::StableRight,
        ManifoldBranch::UnstableLeft,
        ManifoldBranch::UnstableRight,
    ];

    pub fn is_stable(self) -> bool {
        matches!(self, ManifoldBranch::StableLeft | ManifoldBranch::StableRight)
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldBranch::StableLeft => "stable_left",
            ManifoldBranch::StableRight => "stable_right",
            ManifoldBranch::UnstableLeft => "unstable_left",
            ManifoldBranch::UnstableRight => "unstable_right",
        }
    }

    fn sign(self) -> f64 {
        match self {
            ManifoldBranch::StableLeft | ManifoldBranch::UnstableLeft => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum Verdict {
    Homoclinic,
    HeteroclinicTo(State),
    AxisCrossing(State),
    LineCrossing(State),
    Unbounded,
    /// Horizon reached without any of the above.
    Inconclusive,
}

impl Verdict {
    fn same_kind(&self, other: &Verdict) -> bool {
        match (self, other) {
            (Verdict::HeteroclinicTo(a), Verdict::HeteroclinicTo(b)) => distance(a, b) < 1e-9,
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

/// Seed offset along the unit eigenvector.
pub const SEED_OFFSET: f64 = 1e-6;
/// Radius of the ball that counts as convergence to an equilibrium.
pub const CONVERGENCE_RADIUS: f64 = 1e-3;
/// Time an orbit must stay inside the convergence ball.
pub const CONVERGENCE_DWELL: f64 = 1.0;
const ESCAPE_RADIUS: f64 = 0.1;
const RETURN_RADIUS: f64 = 1e-2;
/// Crossings closer than this to the traced equilibrium are ignored.
pub const CROSSING_EXCLUSION: f64 = 1e-5;
pub const DEFAULT_HORIZON: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub epsilon: f64,
    pub tol: f64,
    /// Record crossings of `z = 0` and of the Navier line.
    pub record_crossings: bool,
    /// Stop at the first recorded crossing and report it as the verdict.
    pub stop_at_crossing: bool,
    /// Repeat at `ε/2` and compare verdicts.
    pub richardson: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { epsilon: SEED_OFFSET, tol: 1e-10, record_crossings: true, stop_at_crossing: false, richardson: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrace {
    pub branch: ManifoldBranch,
    pub offset: f64,
    pub seed: State,
    pub trajectory: Trajectory,
    pub verdict: Verdict,
    /// Crossings of the Dirichlet axis and the Navier line, in time order.
    pub crossings: Vec<EventHit<2>>,
    /// Whether the verdict agrees with a trace seeded at half the offset.
    pub verdict_stable: Option<bool>,
}

/// Eigenvector and eigenvalue spanning the requested one-dimensional
/// manifold: stable branches need exactly one negative real eigenvalue (the
/// other may vanish, as at the degenerate origin for `N = 2`), unstable
/// branches exactly one positive one.
fn manifold_direction(eq: &Equilibrium, branch: ManifoldBranch) -> Result<(State, f64)> {
    let missing = || Error::NoManifold {
        z: eq.point[0],
        y: eq.point[1],
        which: if branch.is_stable() { "stable" } else { "unstable" },
    };
    let (hi, lo) = eq.real_eigenvalues().ok_or_else(missing)?;
    let vectors = eq.eigenvectors.ok_or_else(missing)?;
    if branch.is_stable() {
        if lo < 0.0 && hi >= 0.0 {
            return Ok((vectors[1], lo));
        }
    } else if hi > 0.0 && lo <= 0.0 {
        return Ok((vectors[0], hi));
    }
    Err(missing())
}

pub fn trace_manifold(eq: &Equilibrium, branch: ManifoldBranch, spec: &ProblemSpec, horizon: f64) -> Result<ManifoldTrace> {
    trace_manifold_with(eq, branch, spec, horizon, &TraceOptions::default())
}

pub fn trace_manifold_with(
    eq: &Equilibrium,
    branch: ManifoldBranch,
    spec: &ProblemSpec,
    horizon: f64,
    opts: &TraceOptions,
) -> Result<ManifoldTrace> {
    if !(1e-8..=1e-4).contains(&opts.epsilon) {
        return Err(Error::Domain(format!("seed offset {:e} outside [1e-8, 1e-4]", opts.epsilon)));
    }
    let mut trace = trace_once(eq, branch, spec, horizon, opts, opts.epsilon)?;
    if opts.richardson {
        let half = trace_once(eq, branch, spec, horizon, opts, 0.5 * opts.epsilon)?;
        trace.verdict_stable = Some(trace.verdict.same_kind(&half.verdict));
    }
    Ok(trace)
}

fn trace_once(
    eq: &Equilibrium,
    branch: ManifoldBranch,
    spec: &ProblemSpec,
    horizon: f64,
    opts: &TraceOptions,
    epsilon: f64,
) -> Result<ManifoldTrace> {
    let coeffs = require_autonomous(spec)?;
    let (direction, _) = manifold_direction(eq, branch)?;
    let sign = branch.sign();
    let seed = [eq.point[0] + sign * epsilon * direction[0], eq.point[1] + sign * epsilon * direction[1]];
    let others: Vec<State> = equilibria(spec)?
        .into_iter()
        .map(|e| e.point)
        .filter(|p| distance(p, &eq.point) > 0.0)
        .collect();
    let t1 = if branch.is_stable() { -horizon } else { horizon };

    let mut events = Vec::new();
    if opts.record_crossings {
        let axis = Event::axis_crossing().excluding(eq.point, CROSSING_EXCLUSION);
        let line = Event::line_crossing(coeffs.navier_slope()).excluding(eq.point, CROSSING_EXCLUSION);
        if opts.stop_at_crossing {
            events.push(axis.terminal());
            events.push(line.terminal());
        } else {
            events.push(axis);
            events.push(line);
        }
    }

    let mut escaped = false;
    let mut outcome: Option<Verdict> = None;
    let mut entered: Vec<Option<f64>> = vec![None; others.len()];
    let field = spec.field();
    let options = Options::new(opts.tol).atol(opts.tol * 1e-6);
    let trajectory = integrate_with(|t, s| field.rate(t, s), seed, 0.0, t1, &options, &events, |t, s| {
        let from_seed = distance(s, &eq.point);
        if from_seed > ESCAPE_RADIUS {
            escaped = true;
        } else if escaped && from_seed < RETURN_RADIUS {
            outcome = Some(Verdict::Homoclinic);
            return Control::Stop;
        }
        for (i, p) in others.iter().enumerate() {
            if distance(s, p) < CONVERGENCE_RADIUS {
                let since = *entered[i].get_or_insert(t);
                if (t - since).abs() >= CONVERGENCE_DWELL {
                    outcome = Some(Verdict::HeteroclinicTo(*p));
                    return Control::Stop;
                }
            } else {
                entered[i] = None;
            }
        }
        Control::Continue
    })?;

    let mut crossings = trajectory.events.clone();
    let verdict = match trajectory.terminal {
        Terminal::Stopped { .. } => outcome.unwrap_or(Verdict::Inconclusive),
        Terminal::BlowUp { .. } => Verdict::Unbounded,
        Terminal::ReachedEnd => Verdict::Inconclusive,
        Terminal::Event(hit) => {
            crossings.push(hit);
            match hit.kind {
                EventKind::LineCrossing => Verdict::LineCrossing(hit.state),
                _ => Verdict::AxisCrossing(hit.state),
            }
        }
    };
    Ok(ManifoldTrace { branch, offset: epsilon, seed, trajectory, verdict, crossings, verdict_stable: None })
}

/// Crossing of a boundary set by a stable-manifold branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCrossing {
    pub boundary: BoundaryKind,
    pub branch: ManifoldBranch,
    pub t: f64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub k: u32,
    pub dim: u32,
    pub horizon: f64,
    /// Slope of the Navier line `y = c z`.
    pub navier_slope: f64,
    pub crossings: Vec<BoundaryCrossing>,
    pub branch_verdicts: Vec<(ManifoldBranch, Verdict)>,
    /// True when no branch meets either boundary set: floating-point
    /// evidence, not a proof.
    pub certified: bool,
}

impl Certificate {
    pub fn crossings_of(&self, boundary: BoundaryKind) -> impl Iterator<Item = &BoundaryCrossing> {
        self.crossings.iter().filter(move |c| c.boundary == boundary)
    }
}

/// Traces both stable branches of the origin backward and lists every
/// crossing of the Dirichlet set `{z = 0, y ≠ 0}` and of the Navier set
/// `{y = c z, (z, y) ≠ 0}`.
pub fn nonexistence_certificate(spec: &ProblemSpec) -> Result<Certificate> {
    nonexistence_certificate_with(spec, DEFAULT_HORIZON)
}

pub fn nonexistence_certificate_with(spec: &ProblemSpec, horizon: f64) -> Result<Certificate> {
    let coeffs = require_autonomous(spec)?;
    let origin = equilibria(spec)?.into_iter().find(|e| e.is_origin()).expect("origin is an equilibrium");
    let mut crossings = Vec::new();
    let mut branch_verdicts = Vec::new();
    for branch in [ManifoldBranch::StableLeft, ManifoldBranch::StableRight] {
        let opts = TraceOptions { richardson: false, ..TraceOptions::default() };
        let trace = trace_manifold_with(&origin, branch, spec, horizon, &opts)?;
        for hit in &trace.crossings {
            let boundary = match hit.kind {
                EventKind::AxisCrossing => BoundaryKind::Dirichlet,
                _ => BoundaryKind::Navier,
            };
            crossings.push(BoundaryCrossing { boundary, branch, t: hit.t, state: hit.state });
        }
        branch_verdicts.push((branch, trace.verdict));
    }
    Ok(Certificate {
        k: spec.k,
        dim: spec.dim,
        horizon,
        navier_slope: coeffs.navier_slope(),
        certified: crossings.is_empty(),
        crossings,
        branch_verdicts,
    })
}

/// Equilibria plus all one-dimensional manifold branches of the origin.
#[derive(Debug, Clone)]
pub struct Portrait {
    pub equilibria: Vec<Equilibrium>,
    pub traces: Vec<ManifoldTrace>,
}

pub fn portrait(spec: &ProblemSpec, horizon: f64) -> Result<Portrait> {
    let equilibria = equilibria(spec)?;
    let origin = &equilibria[0];
    let mut traces = Vec::new();
    for branch in ManifoldBranch::ALL {
        match trace_manifold(origin, branch, spec, horizon) {
            Ok(trace) => traces.push(trace),
            Err(Error::NoManifold { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Portrait { equilibria, traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: u32, dim: u32) -> ProblemSpec {
        ProblemSpec::autonomous(k, dim, BoundaryKind::Entire).unwrap()
    }

    #[test]
    fn equilibria_examples() {
        let eq = equilibria(&spec(2, 4)).unwrap();
        assert_eq!(eq.len(), 2);
        assert!((eq[1].point[0] - 8.0 / 3.0).abs() < 1e-15);
        let eq = equilibria(&spec(2, 5)).unwrap();
        assert_eq!(eq[1].point, [3.0, 0.0]);
        let eq = equilibria(&spec(3, 3)).unwrap();
        assert_eq!(eq.len(), 3);
        assert!((eq[1].point[0] - 6f64.sqrt()).abs() < 1e-15);
        assert!((eq[2].point[0] + 6f64.sqrt()).abs() < 1e-15);
        for dim in 2..=8 {
            for k in [2, 3] {
                if k > dim {
                    continue;
                }
                let s = spec(k, dim);
                for e in equilibria(&s).unwrap() {
                    let v = s.field().rate(0.0, &e.point);
                    assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12, "k={k} N={dim}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn forced_problem_has_no_equilibria() {
        let s = spec(2, 4).with_lambda(0.5);
        assert!(matches!(equilibria(&s), Err(Error::NonAutonomous(_))));
    }

    #[test]
    fn classification_examples() {
        let eq = equilibria(&spec(2, 4)).unwrap();
        assert_eq!(eq[0].classification, Classification::Saddle);
        let v = eq[0].eigenvectors.unwrap()[1];
        assert!((v[1] / v[0] + 2.0).abs() < 1e-15);
        assert_eq!(eq[1].classification, Classification::Center);
        assert!((eq[1].eigenvalues[0].im - 2.0).abs() < 1e-14);

        let eq = equilibria(&spec(2, 5)).unwrap();
        assert_eq!(eq[1].classification, Classification::SourceFocus);
        assert!((eq[1].eigenvalues[0].re - 0.5).abs() < 1e-15);
        assert!((eq[1].eigenvalues[0].im - 23f64.sqrt() / 2.0).abs() < 1e-14);

        for dim in 5..=13 {
            assert_eq!(equilibria(&spec(2, dim)).unwrap()[1].classification, Classification::SourceFocus);
        }
        assert_eq!(equilibria(&spec(2, 14)).unwrap()[1].classification, Classification::SourceNode);
        assert_eq!(equilibria(&spec(2, 2)).unwrap()[0].classification, Classification::Degenerate);
    }

    #[test]
    fn origin_spectrum_is_exact_for_k2() {
        for dim in 2..=30 {
            let eq = &equilibria(&spec(2, dim)).unwrap()[0];
            let n = f64::from(dim);
            assert_eq!(eq.real_eigenvalues().unwrap(), (n - 2.0, -2.0));
        }
    }

    #[test]
    fn conserved_quantity_examples() {
        assert_eq!(conserved_v(0.0, 0.0), 0.0);
        assert_eq!(conserved_v(4.0, 0.0), 0.0);
        assert!((conserved_v(8.0 / 3.0, 0.0) + 128.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn homoclinic_at_critical_dimension() {
        let s = spec(2, 4);
        let origin = &equilibria(&s).unwrap()[0];
        let trace = trace_manifold(origin, ManifoldBranch::StableRight, &s, 30.0).unwrap();
        assert_eq!(trace.verdict, Verdict::Homoclinic);
        assert_eq!(trace.verdict_stable, Some(true));
        let zmax = trace.trajectory.samples.iter().map(|x| x.state[0]).fold(0.0, f64::max);
        assert!((zmax - 4.0).abs() < 1e-4, "{zmax}");
        let v0 = conserved_v(trace.seed[0], trace.seed[1]);
        for x in &trace.trajectory.samples {
            assert!((conserved_v(x.state[0], x.state[1]) - v0).abs() < 1e-7);
        }
        assert!(trace.crossings.is_empty());
    }

    #[test]
    fn heteroclinic_above_critical_dimension() {
        let s = spec(2, 5);
        let origin = &equilibria(&s).unwrap()[0];
        let trace = trace_manifold(origin, ManifoldBranch::StableRight, &s, DEFAULT_HORIZON).unwrap();
        match trace.verdict {
            Verdict::HeteroclinicTo(p) => assert_eq!(p, [3.0, 0.0]),
            other => panic!("expected heteroclinic, got {other:?}"),
        }
        let last = trace.trajectory.final_state();
        assert!(distance(&last, &[3.0, 0.0]) < 1e-3);
    }

    #[test]
    fn unbounded_below_critical_dimension() {
        for dim in [2, 3] {
            let s = spec(2, dim);
            let origin = &equilibria(&s).unwrap()[0];
            for branch in [ManifoldBranch::StableLeft, ManifoldBranch::StableRight] {
                let trace = trace_manifold(origin, branch, &s, DEFAULT_HORIZON).unwrap();
                assert_eq!(trace.verdict, Verdict::Unbounded, "N = {dim}, {branch:?}");
            }
        }
    }

    #[test]
    fn center_has_no_manifold() {
        let s = spec(2, 4);
        let center = &equilibria(&s).unwrap()[1];
        assert!(matches!(
            trace_manifold(center, ManifoldBranch::StableLeft, &s, 10.0),
            Err(Error::NoManifold { .. })
        ));
    }

    #[test]
    fn certificates_for_k2() {
        for dim in [4, 5, 6] {
            let cert = nonexistence_certificate(&spec(2, dim)).unwrap();
            assert!(cert.certified, "N = {dim}: {:?}", cert.crossings);
        }
        let cert = nonexistence_certificate(&spec(2, 3)).unwrap();
        assert!(cert.crossings_of(BoundaryKind::Dirichlet).count() >= 1);
    }

    #[test]
    fn cubic_traces_are_mirror_images() {
        let s = spec(3, 3);
        let origin = &equilibria(&s).unwrap()[0];
        let right = trace_manifold(origin, ManifoldBranch::StableRight, &s, 20.0).unwrap();
        let left = trace_manifold(origin, ManifoldBranch::StableLeft, &s, 20.0).unwrap();
        assert_eq!(right.trajectory.samples.len(), left.trajectory.samples.len());
        for (a, b) in right.trajectory.samples.iter().zip(&left.trajectory.samples) {
            assert_eq!(a.t, b.t);
            assert!((a.state[0] + b.state[0]).abs() < 1e-9 && (a.state[1] + b.state[1]).abs() < 1e-9);
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::integrate::integrate;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn energy_is_conserved_inside_the_loop(z0 in 0.2..3.9f64, y0 in -0.3..0.3f64) {
            let spec = ProblemSpec::autonomous(2, 4, BoundaryKind::Entire).unwrap();
            prop_assume!(conserved_v(z0, y0) < 0.0 && z0 > 0.0);
            let field = spec.field();
            let (tol, horizon) = (1e-10, 30.0);
            let path = integrate(|t, x| field.rate(t, x), [z0, y0], 0.0, horizon, tol, &[]).unwrap();
            let v0 = conserved_v(z0, y0);
            let drift = path.samples.iter().map(|s| (conserved_v(s.state[0], s.state[1]) - v0).abs()).fold(0.0, f64::max);
            prop_assert!(drift <= 10.0 * tol * horizon, "drift {drift}");
        }
    }
}
