//! Gauss–Legendre rules, composite integration on half-lines, cumulative
//! integrals of grid functions and finite-difference weights.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Result of a composite half-line integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// `|Q₂₀ - Q₁₀|` accumulated over panels.
    pub error_estimate: f64,
}

/// Integrates `f` over `[start, +∞)` (`direction > 0`) or `(-∞, start]`
/// (`direction < 0`) with unit-width panels in `t`, which corresponds to
/// logarithmic panels in `σ = e^{-t}`.
///
/// Panels are split at `breakpoints` so that jumps of the integrand fall on
/// panel edges. Integration stops, past the last breakpoint, once three
/// consecutive panels contribute less than `1e-16` relative to the running
/// total, or after `max_extent`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    direction: f64,
    breakpoints: &[f64],
    max_extent: f64,
) -> Quadrature {
    let coarse = GaussRule::new(10);
    let fine = GaussRule::new(20);
    let dir = direction.signum();
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .map(|&b| (b - start) * dir)
        .filter(|&d| d > 0.0 && d < max_extent)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let last_cut = cuts.last().copied().unwrap_or(0.0);

    let mut value = 0.0;
    let mut error = 0.0;
    let mut quiet = 0;
    let mut a = 0.0_f64;
    let mut next_cut = 0;
    while a < max_extent {
        let mut b = (a.floor() + 1.0).min(max_extent);
        while next_cut < cuts.len() && cuts[next_cut] <= a {
            next_cut += 1;
        }
        if next_cut < cuts.len() && cuts[next_cut] < b {
            b = cuts[next_cut];
        }
        let (ta, tb) = (start + dir * a, start + dir * b);
        let q_fine = fine.integrate(ta, tb, &mut f) * dir;
        let q_coarse = coarse.integrate(ta, tb, &mut f) * dir;
        value += q_fine;
        error += (q_fine - q_coarse).abs();
        if b >= last_cut && q_fine.abs() <= 1e-16 * value.abs().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        a = b;
    }
    Quadrature { value, error_estimate: error }
}

/// Running integral `∫_{x₀}^{x_i} f` of grid data using, on every interval,
/// the exact integral of the cubic through the four nearest nodes.
pub fn cumulative_cubic(x: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 0..n - 1 {
        out[i + 1] = out[i] + interval_cubic(x, f, i);
    }
    out
}

/// Exact integral over `[x_i, x_{i+1}]` of the cubic Lagrange interpolant on
/// the four nodes nearest to that interval (linear when fewer exist).
pub fn interval_cubic(x: &[f64], f: &[f64], i: usize) -> f64 {
    let n = x.len();
    let (a, b) = (x[i], x[i + 1]);
    if n < 4 {
        return 0.5 * (b - a) * (f[i] + f[i + 1]);
    }
    let lo = i.saturating_sub(1).min(n - 4);
    let xs = &x[lo..lo + 4];
    let fs = &f[lo..lo + 4];
    // two-point Gauss is exact for cubics
    let g = 0.5 / 3f64.sqrt();
    let mid = 0.5 * (a + b);
    let half = b - a;
    let eval = |t: f64| lagrange4(xs, fs, t);
    0.5 * half * (eval(mid - g * half) + eval(mid + g * half))
}

pub(crate) fn lagrange4(xs: &[f64], fs: &[f64], t: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..4 {
        let mut basis = 1.0;
        for m in 0..4 {
            if m != j {
                basis *= (t - xs[m]) / (xs[j] - xs[m]);
            }
        }
        total += basis * fs[j];
    }
    total
}

/// Finite-difference weights for derivatives `0..=order` at `x0` on the
/// nodes `xs`; `weights[m][j]` multiplies `f(xs[j])` for the `m`-th
/// derivative.
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = GaussRule::new(10);
        for p in 0..20 {
            let exact = (2f64.powi(p + 1) - 1.0) / (p + 1) as f64;
            assert_relative_eq!(rule.integrate(1.0, 2.0, |x| x.powi(p)), exact, max_relative = 1e-14);
        }
        let (x, w) = gauss_legendre(20);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn half_line_exponentials() {
        let q = integrate_half_line(|t| (-2.0 * t).exp(), 0.0, 1.0, &[], 200.0);
        assert_relative_eq!(q.value, 0.5, max_relative = 1e-14);
        let q = integrate_half_line(|t| (3.0 * t).exp(), 0.0, -1.0, &[], 200.0);
        assert_relative_eq!(q.value, 1.0 / 3.0, max_relative = 1e-14);
        assert!(q.error_estimate < 1e-14);
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let f = |t: f64| if t < 1.3 { 0.0 } else { (-t).exp() };
        let q = integrate_half_line(f, 0.0, 1.0, &[1.3], 100.0);
        assert_relative_eq!(q.value, (-1.3f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn cumulative_cubic_is_exact_on_cubics() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let f: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + t.powi(3)).collect();
        let c = cumulative_cubic(&x, &f);
        for (t, ci) in x.iter().zip(&c) {
            let exact = t - t * t + t.powi(4) / 4.0;
            assert!((ci - exact).abs() < 1e-12, "{t}: {ci} vs {exact}");
        }
    }

    #[test]
    fn fd_weights_reproduce_derivatives() {
        let xs: Vec<f64> = (-3..=3).map(|j| 0.5 + 0.1 * j as f64).collect();
        let w = fd_weights(0.5, &xs, 4);
        let f: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let d = |m: usize| w[m].iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        assert!((d(0) - 0.5f64.sin()).abs() < 1e-14);
        assert!((d(1) - 0.5f64.cos()).abs() < 1e-8);
        assert!((d(2) + 0.5f64.sin()).abs() < 1e-6);
        assert!((d(4) - 0.5f64.sin()).abs() < 1e-3);
        for row in &w[1..] {
            assert!(row.iter().sum::<f64>().abs() < 1e-8);
        }
    }
}
