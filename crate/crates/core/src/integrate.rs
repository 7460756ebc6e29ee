//! Adaptive Dormand–Prince 5(4) integration with cubic Hermite dense output,
//! event location and blow-up detection.
//!
//! The integrator is generic over the state dimension so that the shooting
//! module can carry variational equations alongside the planar state.
//! Backward runs (`t1 < t0`) use negative steps, i.e. the time-reversed field.

use serde::Serialize;

use crate::error::{Error, Result};

/// Planar state `(z, y)` with `y = z'`.
pub type State = [f64; 2];

/// Planar trajectory.
pub type Trajectory = Path<2>;

/// Norm above which a run stops with [`Terminal::BlowUp`].
pub const BLOW_UP_THRESHOLD: f64 = 1e6;
/// Smallest admissible step magnitude.
pub const MIN_STEP: f64 = 1e-14;
/// Event times are located to this width.
pub const EVENT_TIME_TOL: f64 = 1e-10;

const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const D: usize> {
    pub t: f64,
    pub state: [f64; D],
    /// Field value at `(t, state)`, used for dense output.
    pub rate: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Zero of the first component.
    AxisCrossing,
    /// Zero of `y - c z` for a fixed slope `c`.
    LineCrossing,
    Custom(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    Rising,
    Falling,
}

type Predicate<'a, const D: usize> = Box<dyn Fn(f64, &[f64; D]) -> f64 + Send + Sync + 'a>;

/// Zero-crossing event on a scalar predicate of `(t, state)`.
pub struct Event<'a, const D: usize> {
    pub kind: EventKind,
    predicate: Predicate<'a, D>,
    pub direction: Direction,
    pub terminal: bool,
    /// Crossings located within `radius` of `center` are ignored.
    pub exclusion: Option<([f64; D], f64)>,
}

impl<'a, const D: usize> Event<'a, D> {
    pub fn new(kind: EventKind, predicate: impl Fn(f64, &[f64; D]) -> f64 + Send + Sync + 'a) -> Self {
        Self { kind, predicate: Box::new(predicate), direction: Direction::Any, terminal: false, exclusion: None }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn excluding(mut self, center: [f64; D], radius: f64) -> Self {
        self.exclusion = Some((center, radius));
        self
    }

    pub fn value(&self, t: f64, state: &[f64; D]) -> f64 {
        (self.predicate)(t, state)
    }

    fn triggers(&self, before: f64, after: f64) -> bool {
        let crossed = (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0);
        crossed
            && match self.direction {
                Direction::Any => true,
                Direction::Rising => after > before,
                Direction::Falling => after < before,
            }
    }

    fn excluded(&self, state: &[f64; D]) -> bool {
        self.exclusion.is_some_and(|(c, r)| distance(state, &c) < r)
    }
}

impl<'a> Event<'a, 2> {
    /// Crossing of the axis `z = 0`.
    pub fn axis_crossing() -> Self {
        Event::new(EventKind::AxisCrossing, |_, s: &State| s[0])
    }

    /// Crossing of the line `y = slope · z`.
    pub fn line_crossing(slope: f64) -> Self {
        Event::new(EventKind::LineCrossing, move |_, s: &State| s[1] - slope * s[0])
    }
}

impl<const D: usize> std::fmt::Debug for Event<'_, D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Event")
            .field("kind", &self.kind)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const D: usize> {
    pub kind: EventKind,
    /// Position of the event in the list passed to the integrator.
    pub index: usize,
    pub t: f64,
    pub state: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal<const D: usize> {
    ReachedEnd,
    BlowUp { t_escape: f64 },
    Event(EventHit<D>),
    /// The observer asked to stop.
    Stopped { t: f64 },
}

impl<const D: usize> Terminal<D> {
    pub fn label(&self) -> &'static str {
        match self {
            Terminal::ReachedEnd => "reached_end",
            Terminal::BlowUp { .. } => "blow_up",
            Terminal::Event(_) => "event",
            Terminal::Stopped { .. } => "stopped",
        }
    }
}

/// Answer of an observer after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Computed orbit: accepted step endpoints with their field values.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<const D: usize> {
    pub samples: Vec<Sample<D>>,
    /// Non-terminal events in order of occurrence.
    pub events: Vec<EventHit<D>>,
    pub terminal: Terminal<D>,
    pub tolerance_used: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<const D: usize> Path<D> {
    pub fn first(&self) -> &Sample<D> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<D> {
        self.samples.last().expect("a path holds at least its initial sample")
    }

    pub fn final_state(&self) -> [f64; D] {
        self.last().state
    }

    pub fn is_forward(&self) -> bool {
        self.last().t >= self.first().t
    }

    pub fn blew_up(&self) -> bool {
        matches!(self.terminal, Terminal::BlowUp { .. })
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.state[i]).collect()
    }

    /// Cubic Hermite interpolation; `None` outside the covered time range.
    pub fn interpolate(&self, t: f64) -> Option<[f64; D]> {
        let n = self.samples.len();
        let sign = if self.is_forward() { 1.0 } else { -1.0 };
        let key = |s: &Sample<D>| s.t * sign;
        let target = t * sign;
        if n == 0 || target < key(&self.samples[0]) || target > key(&self.samples[n - 1]) {
            return None;
        }
        if n == 1 {
            return Some(self.samples[0].state);
        }
        let i = self.samples.partition_point(|s| key(s) <= target).clamp(1, n - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        Some(hermite(a.t, &a.state, &a.rate, b.t, &b.state, &b.rate, t))
    }
}

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub blow_up: f64,
    pub max_steps: usize,
    pub max_step: f64,
}

impl Options {
    pub fn new(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, blow_up: BLOW_UP_THRESHOLD, max_steps: MAX_STEPS, max_step: f64::INFINITY }
    }

    pub fn atol(mut self, atol: f64) -> Self {
        self.atol = atol;
        self
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn blow_up(mut self, threshold: f64) -> Self {
        self.blow_up = threshold;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-3).contains(&self.rtol) {
            return Err(Error::Tolerance(self.rtol));
        }
        if !(self.atol >= 0.0) || self.atol > 1e-3 {
            return Err(Error::Tolerance(self.atol));
        }
        Ok(())
    }
}

/// Integrates from `t0` to `t1` with `rtol = atol = tol`.
pub fn integrate<const D: usize, F>(
    field: F,
    state0: [f64; D],
    t0: f64,
    t1: f64,
    tol: f64,
    events: &[Event<'_, D>],
) -> Result<Path<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    integrate_with(field, state0, t0, t1, &Options::new(tol), events, |_, _| Control::Continue)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Full-control integration; `observer` sees every accepted step and may stop
/// the run.
pub fn integrate_with<const D: usize, F, O>(
    field: F,
    state0: [f64; D],
    t0: f64,
    t1: f64,
    opts: &Options,
    events: &[Event<'_, D>],
    mut observer: O,
) -> Result<Path<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D]) -> Control,
{
    opts.validate()?;
    if !t0.is_finite() || !t1.is_finite() || !all_finite(&state0) {
        return Err(Error::NonFinite(format!("initial data at t = {t0}")));
    }
    let f0 = field(t0, &state0);
    if !all_finite(&f0) {
        return Err(Error::NonFinite(format!("field at the initial state, t = {t0}")));
    }
    let mut path = Path {
        samples: vec![Sample { t: t0, state: state0, rate: f0 }],
        events: Vec::new(),
        terminal: Terminal::ReachedEnd,
        tolerance_used: opts.rtol,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if t0 == t1 {
        return Ok(path);
    }
    if norm(&state0) > opts.blow_up {
        path.terminal = Terminal::BlowUp { t_escape: t0 };
        return Ok(path);
    }
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut x = state0;
    let mut fx = f0;
    let mut comp = [0.0; D];
    let mut h = initial_step(&field, t0, &state0, &f0, dir, opts).min(opts.max_step);
    let mut previous: Vec<f64> = events.iter().map(|e| e.value(t0, &state0)).collect();

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            path.terminal = Terminal::ReachedEnd;
            return Ok(path);
        }
        if path.accepted_steps + path.rejected_steps >= opts.max_steps {
            return Err(Error::StepLimit { t, max_steps: opts.max_steps });
        }
        let last_step = h >= remaining;
        let mut step = if last_step { remaining } else { h };
        if step < MIN_STEP {
            if remaining < MIN_STEP {
                step = remaining;
            } else {
                return Err(Error::StepUnderflow { t, h: step });
            }
        }
        let hs = step * dir;

        let mut k = [[0.0; D]; 7];
        k[0] = fx;
        for s in 1..7 {
            let mut xs = x;
            for (i, xi) in xs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                *xi += hs * acc;
            }
            k[s] = field(t + C[s] * hs, &xs);
        }
        let mut delta = [0.0; D];
        let mut err_sq = 0.0;
        let mut trial = x;
        for i in 0..D {
            let incr: f64 = (0..6).map(|j| A[6][j] * k[j][i]).sum();
            delta[i] = hs * incr;
            trial[i] = x[i] + delta[i];
            let e: f64 = hs * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let scale = opts.atol + opts.rtol * x[i].abs().max(trial[i].abs());
            err_sq += if scale > 0.0 { (e / scale).powi(2) } else if e == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let err = (err_sq / D as f64).sqrt();
        if !err.is_finite() || !all_finite(&trial) || err > 1.0 {
            path.rejected_steps += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h = step * factor;
            continue;
        }

        // compensated update keeps long decaying runs free of drift
        let mut x_new = x;
        for i in 0..D {
            let y = delta[i] - comp[i];
            let s = x[i] + y;
            comp[i] = (s - x[i]) - y;
            x_new[i] = s;
        }
        let t_new = if last_step { t1 } else { t + hs };
        let f_new = field(t_new, &x_new);
        path.accepted_steps += 1;

        let dense = |tau: f64| hermite(t, &x, &fx, t_new, &x_new, &f_new, tau);

        if norm(&x_new) > opts.blow_up {
            let t_escape = bisect(t, t_new, |tau| norm(&dense(tau)) - opts.blow_up);
            let state = dense(t_escape);
            let rate = field(t_escape, &state);
            path.samples.push(Sample { t: t_escape, state, rate });
            path.terminal = Terminal::BlowUp { t_escape };
            return Ok(path);
        }

        let mut hits: Vec<(bool, EventHit<D>)> = Vec::new();
        for (idx, event) in events.iter().enumerate() {
            let after = event.value(t_new, &x_new);
            if event.triggers(previous[idx], after) {
                let before = previous[idx];
                let tau = bisect(t, t_new, |tau| {
                    let v = event.value(tau, &dense(tau));
                    if before < 0.0 { v } else { -v }
                });
                let state = dense(tau);
                if !event.excluded(&state) {
                    hits.push((event.terminal, EventHit { kind: event.kind, index: idx, t: tau, state }));
                }
            }
            previous[idx] = after;
        }
        hits.sort_by(|a, b| ((a.1.t - t) * dir).total_cmp(&((b.1.t - t) * dir)));
        if let Some(pos) = hits.iter().position(|(terminal, _)| *terminal) {
            let hit = hits[pos].1;
            path.events.extend(hits[..pos].iter().map(|(_, h)| *h));
            let rate = field(hit.t, &hit.state);
            path.samples.push(Sample { t: hit.t, state: hit.state, rate });
            path.terminal = Terminal::Event(hit);
            return Ok(path);
        }
        path.events.extend(hits.into_iter().map(|(_, h)| h));

        path.samples.push(Sample { t: t_new, state: x_new, rate: f_new });
        t = t_new;
        x = x_new;
        fx = f_new;
        if observer(t, &x) == Control::Stop {
            path.terminal = Terminal::Stopped { t };
            return Ok(path);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * factor).min(opts.max_step);
    }
}

fn initial_step<const D: usize, F>(field: &F, t0: f64, x0: &[f64; D], f0: &[f64; D], dir: f64, opts: &Options) -> f64
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let scale = |i: usize| opts.atol + opts.rtol * x0[i].abs();
    let rms = |v: &[f64; D]| {
        ((0..D).map(|i| (v[i] / scale(i).max(f64::MIN_POSITIVE)).powi(2)).sum::<f64>() / D as f64).sqrt()
    };
    let d0 = rms(x0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut x1 = *x0;
    for i in 0..D {
        x1[i] += dir * h0 * f0[i];
    }
    let f1 = field(t0 + dir * h0, &x1);
    let mut diff = [0.0; D];
    for i in 0..D {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms(&diff) / h0;
    let dmax = d1.max(d2);
    let h1 = if !dmax.is_finite() {
        h0 * 1e-3
    } else if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).max(MIN_STEP * 10.0)
}

/// Root of `g` on `[a, b]` assuming `g(a) < 0 <= g(b)`, located to
/// [`EVENT_TIME_TOL`].
fn bisect(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    while (hi - lo).abs() > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn hermite<const D: usize>(
    t0: f64,
    x0: &[f64; D],
    f0: &[f64; D],
    t1: f64,
    x1: &[f64; D],
    f1: &[f64; D],
    t: f64,
) -> [f64; D] {
    let h = t1 - t0;
    let th = (t - t0) / h;
    let mut out = [0.0; D];
    for i in 0..D {
        let dx = x1[i] - x0[i];
        out[i] = (1.0 - th) * x0[i]
            + th * x1[i]
            + th * (th - 1.0) * ((1.0 - 2.0 * th) * dx + (th - 1.0) * h * f0[i] + th * h * f1[i]);
    }
    out
}

pub(crate) fn norm<const D: usize>(x: &[f64; D]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn all_finite<const D: usize>(x: &[f64; D]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Least-squares slope of `ln |v|` against `t`.
pub fn fit_log_slope(t: &[f64], v: &[f64]) -> Result<f64> {
    if t.len() != v.len() {
        return Err(Error::LengthMismatch { expected: t.len(), found: v.len() });
    }
    if t.len() < 3 {
        return Err(Error::Fit(format!("{} points are too few for a slope", t.len())));
    }
    let sign = v[0].signum();
    if v.iter().any(|&x| x == 0.0 || !x.is_finite() || x.signum() != sign) {
        return Err(Error::Fit("tail contains zeros or sign changes".into()));
    }
    let n = t.len() as f64;
    let logs: Vec<f64> = v.iter().map(|x| x.abs().ln()).collect();
    let tm = t.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, li) in t.iter().zip(&logs) {
        sxy += (ti - tm) * (li - lm);
        sxx += (ti - tm) * (ti - tm);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate time window".into()));
    }
    Ok(sxy / sxx)
}

/// Decay exponent of `z` over the final `window` fraction (by time, at the
/// largest `t`) of a trajectory, sampled densely through the interpolant.
pub fn fit_decay_exponent<const D: usize>(traj: &Path<D>, window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Fit(format!("window fraction {window} outside (0, 1]")));
    }
    let (a, b) = (traj.first().t, traj.last().t);
    let (lo, hi) = (a.min(b), a.max(b));
    if hi <= lo {
        return Err(Error::Fit("trajectory spans no time".into()));
    }
    let start = hi - window * (hi - lo);
    let points = 200;
    let ts: Vec<f64> = (0..points).map(|i| start + (hi - start) * i as f64 / (points - 1) as f64).collect();
    let zs: Vec<f64> = ts
        .iter()
        .map(|&t| traj.interpolate(t).map(|s| s[0]).unwrap_or(f64::NAN))
        .collect();
    fit_log_slope(&ts, &zs)
}
