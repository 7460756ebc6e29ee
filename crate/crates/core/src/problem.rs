//! Problem definition: dimension, Hessian order, parameter, boundary kind and
//! forcing datum, together with the coefficients of the autonomous
//! `z`-equation and the planar vector field built on top of them.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::State;

/// Boundary condition family of the radial problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `u = ∂ₙu = 0` on the unit sphere; `z(0) = 0`, decay as `t → ∞`.
    Dirichlet,
    /// `u = Δu = 0` on the unit sphere; `z'(0) = (N-1-γ) z(0)`, decay as `t → ∞`.
    Navier,
    /// Radial solutions on all of `R^N`, decaying at both ends of the `t` line.
    Entire,
}

impl BoundaryKind {
    pub fn is_ball(self) -> bool {
        !matches!(self, BoundaryKind::Entire)
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Navier => "navier",
            BoundaryKind::Entire => "entire",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "navier" => Ok(BoundaryKind::Navier),
            "entire" => Ok(BoundaryKind::Entire),
            other => Err(Error::Domain(format!("unknown boundary kind `{other}`"))),
        }
    }
}

/// Tabulated datum `g(s)` given by strictly increasing samples.
///
/// The cumulative `∫ g` is the exact integral of the piecewise-linear
/// interpolant of `g`. At the sample nodes this coincides with trapezoidal
/// accumulation; between nodes it is quadratic, which keeps it monotone for
/// `g >= 0` and preserves the small-`s` behaviour of the first interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedDatum {
    s: Vec<f64>,
    g: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl TabulatedDatum {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Datum("tabulated datum needs at least two samples".into()));
        }
        let (s, g): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if s.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Datum("tabulated samples must be finite".into()));
        }
        if s[0] < 0.0 {
            return Err(Error::Datum(format!("sample abscissa {} is negative", s[0])));
        }
        if let Some(w) = s.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Datum(format!(
                "sample abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let mut cumulative = Vec::with_capacity(s.len());
        cumulative.push(0.0);
        for i in 1..s.len() {
            let step = 0.5 * (g[i] + g[i - 1]) * (s[i] - s[i - 1]);
            cumulative.push(cumulative[i - 1] + step);
        }
        Ok(Self { s, g, cumulative })
    }

    /// Reads a two-column CSV with header `s,g`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "s" || &headers[1] != "g" {
            return Err(Error::Datum(format!(
                "expected CSV header `s,g`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, record) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let pair = record.map_err(|e| Error::Datum(format!("row {}: {e}", line + 2)))?;
            samples.push(pair);
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    fn locate(&self, s: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&s) {
            return Err(Error::Extrapolation { s, lo, hi });
        }
        // index of the interval [s_i, s_{i+1}] containing s
        let i = self.s.partition_point(|&x| x <= s);
        Ok(i.saturating_sub(1).min(self.s.len() - 2))
    }

    pub fn cumulative(&self, s: f64) -> Result<f64> {
        let i = self.locate(s)?;
        let width = self.s[i + 1] - self.s[i];
        let d = s - self.s[i];
        let slope = (self.g[i + 1] - self.g[i]) / width;
        Ok(self.cumulative[i] + self.g[i] * d + 0.5 * slope * d * d)
    }

    pub fn density(&self, s: f64) -> Result<f64> {
        let i = self.locate(s)?;
        let theta = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        Ok(self.g[i] + theta * (self.g[i + 1] - self.g[i]))
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s.iter().copied().zip(self.g.iter().copied())
    }
}

/// Forcing datum `g(s) = f(s) s^{N-1}` of the radial problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Datum {
    Zero,
    /// `g(s) = c s^p`, integrable at the origin when `p > -1`.
    PowerLaw { c: f64, p: f64 },
    /// `g(s) = c` on `[a, b]`, zero elsewhere.
    Indicator { a: f64, b: f64, c: f64 },
    Tabulated(TabulatedDatum),
}

impl Datum {
    pub fn power_law(c: f64, p: f64) -> Result<Self> {
        if !c.is_finite() || !p.is_finite() {
            return Err(Error::Datum("power-law parameters must be finite".into()));
        }
        if p <= -1.0 {
            return Err(Error::Datum(format!(
                "power law s^{p} is not integrable at s = 0 (need p > -1)"
            )));
        }
        Ok(Datum::PowerLaw { c, p })
    }

    pub fn indicator(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || a < 0.0 || b < a {
            return Err(Error::Datum(format!("indicator needs 0 <= a <= b, got [{a}, {b}]")));
        }
        Ok(Datum::Indicator { a, b, c })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        TabulatedDatum::new(samples).map(Datum::Tabulated)
    }

    /// `∫₀ˢ g`.
    pub fn cumulative(&self, s: f64) -> Result<f64> {
        match self {
            Datum::Zero => Ok(0.0),
            Datum::PowerLaw { c, p } => {
                if s <= 0.0 {
                    Ok(0.0)
                } else {
                    Ok(c * s.powf(p + 1.0) / (p + 1.0))
                }
            }
            Datum::Indicator { a, b, c } => Ok(c * (s.clamp(*a, *b) - a)),
            Datum::Tabulated(tab) => tab.cumulative(s),
        }
    }

    pub fn density(&self, s: f64) -> Result<f64> {
        match self {
            Datum::Zero => Ok(0.0),
            Datum::PowerLaw { c, p } => Ok(c * s.powf(*p)),
            Datum::Indicator { a, b, c } => Ok(if (*a..=*b).contains(&s) { *c } else { 0.0 }),
            Datum::Tabulated(tab) => tab.density(s),
        }
    }

    /// True when `g` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Datum::Zero => true,
            Datum::PowerLaw { c, .. } => *c == 0.0,
            Datum::Indicator { a, b, c } => *c == 0.0 || a == b,
            Datum::Tabulated(tab) => tab.g.iter().all(|&g| g == 0.0),
        }
    }

    /// True when `g >= 0` everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Datum::Zero => true,
            Datum::PowerLaw { c, .. } | Datum::Indicator { c, .. } => *c >= 0.0,
            Datum::Tabulated(tab) => tab.g.iter().all(|&g| g >= 0.0),
        }
    }

    /// The datum `factor · g`.
    pub fn scaled(&self, factor: f64) -> Datum {
        match self {
            Datum::Zero => Datum::Zero,
            Datum::PowerLaw { c, p } => Datum::PowerLaw { c: c * factor, p: *p },
            Datum::Indicator { a, b, c } => Datum::Indicator { a: *a, b: *b, c: c * factor },
            Datum::Tabulated(tab) => {
                let samples = tab.samples().map(|(s, g)| (s, g * factor)).collect();
                Datum::Tabulated(TabulatedDatum::new(samples).expect("scaling keeps samples valid"))
            }
        }
    }
}

/// `N choose k` as a float; exact for the small arguments used here.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Constants of `-z'' + b1 z' + b0 z = α z^k + λF`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub k: u32,
    pub dim: u32,
    /// Exponent of the rescaling `w = e^{γt} z`, `γ = (3-k)/(k-1)`.
    pub gamma: f64,
    /// `α_{k,N} = binom(N-1, k-1) / k`.
    pub alpha: f64,
    pub b1: f64,
    pub b0: f64,
    /// Growth root of `μ² - b1 μ - b0 = 0`.
    pub mu_plus: f64,
    /// Decay root of `μ² - b1 μ - b0 = 0`.
    pub mu_minus: f64,
}

impl Coefficients {
    pub fn new(k: u32, dim: u32) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("dimension N = {dim} must be at least 2")));
        }
        if k < 2 || k > dim {
            return Err(Error::Domain(format!("Hessian order k = {k} must satisfy 2 <= k <= N = {dim}")));
        }
        let kf = f64::from(k);
        let n = f64::from(dim);
        let gamma = (3.0 - kf) / (kf - 1.0);
        let alpha = binomial(dim - 1, k - 1) / kf;
        let b1 = n - 2.0 - 2.0 * gamma;
        let b0 = n - 1.0 + gamma * (n - 2.0) - gamma * gamma;
        let (mu_plus, mu_minus) = quadratic_roots(b1, b0);
        Ok(Self { k, dim, gamma, alpha, b1, b0, mu_plus, mu_minus })
    }

    /// Slope `c` of the Navier boundary row `z'(0) = c z(0)`.
    ///
    /// From `w'(0) = (N-1) w(0)` and `w = e^{γt} z`.
    pub fn navier_slope(&self) -> f64 {
        f64::from(self.dim) - 1.0 - self.gamma
    }

    /// Exponent of `e^{(N-3-γ)t}` in the forcing term.
    pub fn forcing_exponent(&self) -> f64 {
        f64::from(self.dim) - 3.0 - self.gamma
    }

    /// Growing-mode amplitude of a state in the eigenbasis `{(1, μ+), (1, μ-)}`.
    pub fn growing_amplitude(&self, state: &State) -> f64 {
        (state[1] - self.mu_minus * state[0]) / (self.mu_plus - self.mu_minus)
    }

    /// Decaying-mode amplitude of a state in the eigenbasis `{(1, μ+), (1, μ-)}`.
    pub fn decaying_amplitude(&self, state: &State) -> f64 {
        (self.mu_plus * state[0] - state[1]) / (self.mu_plus - self.mu_minus)
    }
}

/// Roots of `μ² - b1 μ - b0 = 0` as `(larger, smaller)`, computed without
/// cancellation.
pub(crate) fn quadratic_roots(b1: f64, b0: f64) -> (f64, f64) {
    let disc = (b1 * b1 + 4.0 * b0).sqrt();
    if b1 >= 0.0 {
        let plus = 0.5 * (b1 + disc);
        let minus = if plus == 0.0 { 0.0 } else { -b0 / plus };
        (plus, minus)
    } else {
        let minus = 0.5 * (b1 - disc);
        (-b0 / minus, minus)
    }
}

pub fn coefficients(k: u32, dim: u32) -> Result<Coefficients> {
    Coefficients::new(k, dim)
}

/// A fully specified radial problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub k: u32,
    pub dim: u32,
    pub lambda: f64,
    pub boundary: BoundaryKind,
    pub datum: Datum,
}

impl ProblemSpec {
    pub fn new(k: u32, dim: u32, lambda: f64, boundary: BoundaryKind, datum: Datum) -> Result<Self> {
        Coefficients::new(k, dim)?;
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda = {lambda} is not finite")));
        }
        Ok(Self { k, dim, lambda, boundary, datum })
    }

    /// Unforced problem (`λ = 0`, zero datum).
    pub fn autonomous(k: u32, dim: u32, boundary: BoundaryKind) -> Result<Self> {
        Self::new(k, dim, 0.0, boundary, Datum::Zero)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_boundary(&self, boundary: BoundaryKind) -> Self {
        Self { boundary, ..self.clone() }
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::new(self.k, self.dim).expect("validated at construction")
    }

    /// Fails for orders the nonlinear solvers do not handle.
    pub fn require_supported_order(&self) -> Result<()> {
        match self.k {
            2 | 3 => Ok(()),
            k => Err(Error::UnsupportedOrder(k)),
        }
    }

    /// `F(t) = e^{(N-3-γ)t} ∫₀^{e^{-t}} g`, without the factor `λ`.
    pub fn forcing(&self, t: f64) -> Result<f64> {
        let coeffs = self.coefficients();
        forcing_with(&self.datum, coeffs.forcing_exponent(), t)
    }

    pub fn field(&self) -> PlanarField<'_> {
        PlanarField::new(self)
    }
}

fn forcing_with(datum: &Datum, exponent: f64, t: f64) -> Result<f64> {
    match datum {
        Datum::Zero => Ok(0.0),
        // combined exponent avoids overflow of the two factors separately
        Datum::PowerLaw { c, p } => Ok(c / (p + 1.0) * ((exponent - (p + 1.0)) * t).exp()),
        _ => {
            let cumulative = datum.cumulative((-t).exp())?;
            if cumulative == 0.0 {
                Ok(0.0)
            } else {
                Ok((exponent * t).exp() * cumulative)
            }
        }
    }
}

/// `F(t)` for `spec`; the parameter `λ` is applied by callers.
pub fn forcing_f(t: f64, spec: &ProblemSpec) -> Result<f64> {
    spec.forcing(t)
}

/// The planar system `z' = y`, `y' = b1 y + b0 z - α z^k - λ F(t)`.
#[derive(Debug, Clone, Copy)]
pub struct PlanarField<'a> {
    spec: &'a ProblemSpec,
    coeffs: Coefficients,
}

impl<'a> PlanarField<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self { spec, coeffs: spec.coefficients() }
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Right-hand side; undefined forcing (tabulated extrapolation) yields NaN,
    /// which the integrator reports as a numeric error.
    pub fn rate(&self, t: f64, state: &State) -> State {
        let [z, y] = *state;
        let c = &self.coeffs;
        let mut dy = c.b1 * y + c.b0 * z - c.alpha * z.powi(self.coeffs.k as i32);
        if self.spec.lambda != 0.0 {
            let f = forcing_with(&self.spec.datum, c.forcing_exponent(), t).unwrap_or(f64::NAN);
            dy -= self.spec.lambda * f;
        }
        [y, dy]
    }

    /// Jacobian `∂(z', y')/∂(z, y)` at a state.
    pub fn jacobian(&self, state: &State) -> [[f64; 2]; 2] {
        let c = &self.coeffs;
        let k = c.k as i32;
        [[0.0, 1.0], [c.b0 - f64::from(c.k) * c.alpha * state[0].powi(k - 1), c.b1]]
    }
}

/// Checked evaluation of the planar vector field.
pub fn vector_field(state: State, t: f64, spec: &ProblemSpec) -> Result<State> {
    if !state.iter().all(|v| v.is_finite()) || !t.is_finite() {
        return Err(Error::NonFinite(format!("state ({}, {}) at t = {t}", state[0], state[1])));
    }
    if spec.lambda != 0.0 {
        spec.forcing(t)?;
    }
    let rate = spec.field().rate(t, &state);
    if rate.iter().all(|v| v.is_finite()) {
        Ok(rate)
    } else {
        Err(Error::NonFinite(format!("vector field at ({}, {}), t = {t}", state[0], state[1])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionStatus {
    Holds,
    Violated,
    Inconclusive,
}

/// Outcome of checking that `e^{(N-3)t} ∫₀^{e^{-t}} g → 0` at the relevant ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub status: AssumptionStatus,
    pub witness: String,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.status == AssumptionStatus::Holds
    }

    fn new(status: AssumptionStatus, witness: impl Into<String>) -> Self {
        Self { status, witness: witness.into() }
    }
}

/// Threshold below which a tabulated weighted cumulative counts as decayed.
pub const ASSUMPTION_DECAY_THRESHOLD: f64 = 1e-6;
/// Upper end of the log-spaced `t` grid used for tabulated data.
pub const ASSUMPTION_T_MAX: f64 = 40.0;

/// Decides whether the datum satisfies the decay hypothesis at `t → +∞`
/// (ball problems) or at `t → ±∞` (entire problem).
pub fn assumption_check(datum: &Datum, dim: u32, boundary: BoundaryKind) -> AssumptionReport {
    use AssumptionStatus::*;
    let n = f64::from(dim);
    let both_ends = boundary == BoundaryKind::Entire;
    if datum.is_zero() {
        return AssumptionReport::new(Holds, "g vanishes identically");
    }
    match datum {
        Datum::Zero => unreachable!(),
        Datum::PowerLaw { p, .. } => {
            let exponent = n - 4.0 - p;
            if exponent >= 0.0 {
                AssumptionReport::new(
                    Violated,
                    format!("e^({exponent} t) does not vanish as t -> +inf"),
                )
            } else if both_ends {
                AssumptionReport::new(
                    Violated,
                    format!("e^({exponent} t) diverges as t -> -inf"),
                )
            } else {
                AssumptionReport::new(Holds, format!("weighted cumulative ~ e^({exponent} t)"))
            }
        }
        Datum::Indicator { a, b, .. } => {
            let plus_ok = *a > 0.0 || dim < 4;
            if !plus_ok {
                return AssumptionReport::new(
                    Violated,
                    format!("g ~ const near 0 gives e^({} t) as t -> +inf", n - 4.0),
                );
            }
            if both_ends && dim <= 3 {
                return AssumptionReport::new(
                    Violated,
                    format!(
                        "cumulative tends to {} while e^({} t) does not vanish as t -> -inf",
                        b - a,
                        n - 3.0
                    ),
                );
            }
            AssumptionReport::new(Holds, "indicator support gives vanishing limits")
        }
        Datum::Tabulated(_) => {
            let plus = tabulated_tail(datum, n, 1.0);
            if !both_ends || plus.status != Holds {
                return plus;
            }
            let minus = tabulated_tail(datum, n, -1.0);
            if minus.status == Holds {
                AssumptionReport::new(Holds, format!("{}; {}", plus.witness, minus.witness))
            } else {
                minus
            }
        }
    }
}

fn tabulated_tail(datum: &Datum, n: f64, direction: f64) -> AssumptionReport {
    use AssumptionStatus::*;
    let points = 60;
    let (lo, hi) = (-2.0_f64, ASSUMPTION_T_MAX.log10());
    let mut values = Vec::with_capacity(points);
    for j in 0..points {
        let t = direction * 10f64.powf(lo + (hi - lo) * j as f64 / (points - 1) as f64);
        match datum.cumulative((-t).exp()) {
            Ok(cum) => values.push((t, ((n - 3.0) * t).exp() * cum)),
            Err(e) => {
                return AssumptionReport::new(Inconclusive, format!("cannot evaluate at t = {t:.3}: {e}"))
            }
        }
    }
    let decade_start = ASSUMPTION_T_MAX / 10.0;
    let tail: Vec<f64> = values
        .iter()
        .filter(|(t, _)| t.abs() >= decade_start)
        .map(|(_, v)| v.abs())
        .collect();
    let last = *tail.last().expect("grid covers the last decade");
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let increasing = tail.windows(2).all(|w| w[1] >= w[0]) && last > tail[0];
    let side = if direction > 0.0 { "+inf" } else { "-inf" };
    if decreasing && last < ASSUMPTION_DECAY_THRESHOLD {
        AssumptionReport::new(Holds, format!("decays to {last:.3e} towards t -> {side}"))
    } else if increasing && last >= ASSUMPTION_DECAY_THRESHOLD {
        AssumptionReport::new(Violated, format!("grows to {last:.3e} towards t -> {side}"))
    } else {
        AssumptionReport::new(Inconclusive, format!("no clear trend towards t -> {side} (last {last:.3e})"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coefficients_for_critical_dimension() {
        let c = coefficients(2, 4).unwrap();
        assert_eq!((c.gamma, c.alpha, c.b1, c.b0), (1.0, 1.5, 0.0, 4.0));
        assert_eq!((c.mu_plus, c.mu_minus), (2.0, -2.0));
    }

    #[test]
    fn coefficients_for_n5_and_cubic() {
        let c = coefficients(2, 5).unwrap();
        assert_eq!((c.gamma, c.alpha, c.b1, c.b0), (1.0, 2.0, 1.0, 6.0));
        assert_eq!((c.mu_plus, c.mu_minus), (3.0, -2.0));

        let c = coefficients(3, 3).unwrap();
        assert_eq!(c.gamma, 0.0);
        assert_relative_eq!(c.alpha, 1.0 / 3.0);
        assert_eq!((c.b1, c.b0), (1.0, 2.0));
        assert_eq!((c.mu_plus, c.mu_minus), (2.0, -1.0));
    }

    #[test]
    fn order_out_of_range_is_a_domain_error() {
        assert!(matches!(coefficients(1, 4), Err(Error::Domain(_))));
        assert!(matches!(coefficients(5, 4), Err(Error::Domain(_))));
        assert!(matches!(coefficients(2, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn k2_roots_are_exact_for_all_dimensions() {
        for dim in 2..=40 {
            let c = coefficients(2, dim).unwrap();
            let n = f64::from(dim);
            assert_eq!(c.mu_plus - c.mu_minus, n);
            assert_eq!(c.mu_plus * c.mu_minus, -(2.0 * n - 4.0));
            assert_eq!((c.mu_plus, c.mu_minus), (n - 2.0, -2.0));
        }
    }

    #[test]
    fn forcing_examples() {
        let spec = ProblemSpec::new(2, 4, 1.0, BoundaryKind::Dirichlet, Datum::power_law(1.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(spec.forcing(0.0).unwrap(), 1.0, max_relative = 1e-15);

        let zero = ProblemSpec::new(2, 4, 1.0, BoundaryKind::Dirichlet, Datum::Zero).unwrap();
        assert_eq!(zero.forcing(3.7).unwrap(), 0.0);

        let linear = ProblemSpec::new(2, 5, 1.0, BoundaryKind::Dirichlet, Datum::power_law(1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(linear.forcing(2f64.ln()).unwrap(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn tabulated_forcing_outside_range_is_an_extrapolation_error() {
        let datum = Datum::tabulated(vec![(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]).unwrap();
        let spec = ProblemSpec::new(2, 4, 1.0, BoundaryKind::Entire, datum).unwrap();
        assert!(matches!(spec.forcing(-1.0), Err(Error::Extrapolation { .. })));
        assert!(spec.forcing(0.5).is_ok());
    }

    #[test]
    fn tabulated_cumulative_matches_trapezoid_at_nodes() {
        let datum = Datum::tabulated(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)]).unwrap();
        assert_relative_eq!(datum.cumulative(0.5).unwrap(), 0.25);
        assert_relative_eq!(datum.cumulative(1.0).unwrap(), 0.25 + 1.0);
        assert_relative_eq!(datum.cumulative(0.25).unwrap(), 0.0625);
        assert_eq!(datum.cumulative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_validation() {
        assert!(Datum::tabulated(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(Datum::tabulated(vec![(-0.1, 1.0), (1.0, 2.0)]).is_err());
        assert!(Datum::tabulated(vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn tabulated_csv_requires_header() {
        let ok = TabulatedDatum::from_csv_reader("s,g\n0,1\n1,2\n".as_bytes()).unwrap();
        assert_eq!(ok.range(), (0.0, 1.0));
        assert!(TabulatedDatum::from_csv_reader("x,y\n0,1\n1,2\n".as_bytes()).is_err());
        assert!(TabulatedDatum::from_csv_reader("s,g\n1,1\n0,2\n".as_bytes()).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let spec = ProblemSpec::autonomous(2, 4, BoundaryKind::Entire).unwrap();
        let v = vector_field([8.0 / 3.0, 0.0], 0.3, &spec).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-14);
        assert_eq!(vector_field([0.0, 0.0], 1.0, &spec).unwrap(), [0.0, 0.0]);

        let spec5 = ProblemSpec::autonomous(2, 5, BoundaryKind::Entire).unwrap();
        assert_eq!(vector_field([3.0, 0.0], -2.0, &spec5).unwrap(), [0.0, 0.0]);

        assert!(matches!(vector_field([f64::NAN, 0.0], 0.0, &spec), Err(Error::NonFinite(_))));
    }

    #[test]
    fn assumption_examples() {
        let p1 = Datum::power_law(1.0, 1.0).unwrap();
        assert!(assumption_check(&p1, 4, BoundaryKind::Dirichlet).holds());
        let p0 = Datum::power_law(1.0, 0.0).unwrap();
        assert_eq!(assumption_check(&p0, 5, BoundaryKind::Dirichlet).status, AssumptionStatus::Violated);
        assert!(assumption_check(&Datum::Zero, 7, BoundaryKind::Entire).holds());
        assert_eq!(assumption_check(&p1, 4, BoundaryKind::Entire).status, AssumptionStatus::Violated);
    }

    #[test]
    fn assumption_indicator_cases() {
        let away = Datum::indicator(0.2, 0.8, 1.0).unwrap();
        assert!(assumption_check(&away, 6, BoundaryKind::Dirichlet).holds());
        assert!(assumption_check(&away, 4, BoundaryKind::Entire).holds());
        assert_eq!(assumption_check(&away, 3, BoundaryKind::Entire).status, AssumptionStatus::Violated);
        let touching = Datum::indicator(0.0, 1.0, 1.0).unwrap();
        assert_eq!(assumption_check(&touching, 4, BoundaryKind::Dirichlet).status, AssumptionStatus::Violated);
        assert!(assumption_check(&touching, 3, BoundaryKind::Dirichlet).holds());
    }

    #[test]
    fn assumption_tabulated_matches_symbolic() {
        let samples = |p: f64| (0..=200).map(|i| i as f64 / 200.0).map(|s| (s, s.powf(p))).collect::<Vec<_>>();
        let linear = Datum::tabulated(samples(1.0)).unwrap();
        assert!(assumption_check(&linear, 4, BoundaryKind::Dirichlet).holds());
        let constant = Datum::tabulated(samples(0.0)).unwrap();
        assert_eq!(assumption_check(&constant, 5, BoundaryKind::Navier).status, AssumptionStatus::Violated);
        assert_eq!(assumption_check(&linear, 4, BoundaryKind::Entire).status, AssumptionStatus::Inconclusive);
    }

    #[test]
    fn power_law_must_be_integrable() {
        assert!(Datum::power_law(1.0, -1.0).is_err());
        assert!(Datum::power_law(1.0, -0.5).is_ok());
    }
}
