//! Changes of variables between the radial profile `u(r)`, the reduced
//! variable `w(t) = -u'(e^{-t})` and the autonomous variable `z = e^{-γt} w`,
//! plus reconstruction of `u` and a pointwise check of the radial equation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::fit_log_slope;
use crate::problem::{binomial, BoundaryKind, ProblemSpec};
use crate::quadrature::{cumulative_cubic, fd_weights};

/// A solution known on a `t` grid in all three variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionProfile {
    pub t_grid: Vec<f64>,
    pub z_values: Vec<f64>,
    pub w_values: Vec<f64>,
    /// `r = e^{-t}`, decreasing along the grid.
    pub r_grid: Vec<f64>,
    /// Radial solution at `r_grid`; empty until reconstructed.
    pub u_values: Vec<f64>,
    pub boundary: BoundaryKind,
    pub gamma: f64,
}

impl SolutionProfile {
    pub fn from_z(t_grid: Vec<f64>, z_values: Vec<f64>, gamma: f64, boundary: BoundaryKind) -> Result<Self> {
        let w_values = w_from_z(&z_values, &t_grid, gamma)?;
        if t_grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain("profile grid must be strictly increasing".into()));
        }
        let r_grid = t_grid.iter().map(|t| (-t).exp()).collect();
        Ok(Self { t_grid, z_values, w_values, r_grid, u_values: Vec::new(), boundary, gamma })
    }

    /// Builds the profile and fills `u_values`.
    pub fn with_u(t_grid: Vec<f64>, z_values: Vec<f64>, spec: &ProblemSpec) -> Result<Self> {
        let gamma = spec.coefficients().gamma;
        let mut profile = Self::from_z(t_grid, z_values, gamma, spec.boundary)?;
        profile.u_values = reconstruct_u(&profile, spec)?;
        Ok(profile)
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.z_values.iter().fold(0.0, |m, z| m.max(z.abs()))
    }

    /// Slope of `ln |z|` over the last `fraction` of the grid.
    pub fn tail_exponent(&self, fraction: f64) -> Result<f64> {
        let n = self.len();
        let start = ((1.0 - fraction.clamp(0.0, 1.0)) * n as f64) as usize;
        fit_log_slope(&self.t_grid[start.min(n)..], &self.z_values[start.min(n)..])
    }

    /// `u` at radius `r` by cubic interpolation in `t = -ln r`.
    pub fn u_at(&self, r: f64) -> Result<f64> {
        if self.u_values.len() != self.len() {
            return Err(Error::Precondition("u has not been reconstructed".into()));
        }
        interpolate_cubic(&self.t_grid, &self.u_values, -r.ln())
    }

    /// `z` at time `t` by cubic interpolation.
    pub fn z_at(&self, t: f64) -> Result<f64> {
        interpolate_cubic(&self.t_grid, &self.z_values, t)
    }
}

/// Cubic Lagrange interpolation on the four grid nodes around `x`.
pub fn interpolate_cubic(grid: &[f64], values: &[f64], x: f64) -> Result<f64> {
    let n = grid.len();
    if n != values.len() {
        return Err(Error::LengthMismatch { expected: n, found: values.len() });
    }
    if n < 4 {
        return Err(Error::Domain("interpolation needs at least four nodes".into()));
    }
    if !(grid[0]..=grid[n - 1]).contains(&x) {
        return Err(Error::Domain(format!("{x} outside grid [{}, {}]", grid[0], grid[n - 1])));
    }
    let i = grid.partition_point(|&g| g <= x).saturating_sub(1);
    let lo = i.saturating_sub(1).min(n - 4);
    let mut total = 0.0;
    for j in lo..lo + 4 {
        let mut basis = 1.0;
        for m in lo..lo + 4 {
            if m != j {
                basis *= (x - grid[m]) / (grid[j] - grid[m]);
            }
        }
        total += basis * values[j];
    }
    Ok(total)
}

/// `z = e^{-γt} w`.
pub fn z_from_w(w_values: &[f64], t_grid: &[f64], gamma: f64) -> Result<Vec<f64>> {
    rescale(w_values, t_grid, -gamma)
}

/// `w = e^{γt} z`.
pub fn w_from_z(z_values: &[f64], t_grid: &[f64], gamma: f64) -> Result<Vec<f64>> {
    rescale(z_values, t_grid, gamma)
}

fn rescale(values: &[f64], t_grid: &[f64], exponent: f64) -> Result<Vec<f64>> {
    if values.len() != t_grid.len() {
        return Err(Error::LengthMismatch { expected: t_grid.len(), found: values.len() });
    }
    Ok(values.iter().zip(t_grid).map(|(v, t)| v * (exponent * t).exp()).collect())
}

/// Tail level below which the `r`-space integrand counts as decayed.
pub const TAIL_DECAY: f64 = 1e-10;

/// Reconstructs `u` on the profile's radii.
///
/// With `s = e^{-τ}`, `∫ w(-ln s) ds = ∫ w(τ) e^{-τ} dτ`. Ball problems
/// integrate from `t = 0` (`r = 1`, `u = 0`); the entire problem integrates
/// from the left end of the grid and adds the tail `∫_{-∞}^{t₀}` of a fitted
/// exponential, so that `u(∞) = 0`.
pub fn reconstruct_u(profile: &SolutionProfile, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let t = &profile.t_grid;
    let n = t.len();
    if profile.z_values.len() != n || profile.w_values.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: profile.w_values.len() });
    }
    if n < 4 {
        return Err(Error::Domain("reconstruction needs at least four nodes".into()));
    }
    let integrand: Vec<f64> = profile.w_values.iter().zip(t).map(|(w, t)| w * (-t).exp()).collect();
    if spec.boundary.is_ball() {
        if t[0].abs() > 1e-12 {
            return Err(Error::Domain(format!("ball profile grid must start at t = 0, starts at {}", t[0])));
        }
        return Ok(cumulative_cubic(t, &integrand));
    }

    let scale = integrand.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for (end, value) in [("left", integrand[0]), ("right", integrand[n - 1])] {
        if value.abs() > TAIL_DECAY * scale {
            return Err(Error::Truncation(format!(
                "{end} tail of the r-space integrand is {value:e}, above {TAIL_DECAY:e}"
            )));
        }
    }
    let head = (n / 10).max(4);
    let tail = if integrand[0] == 0.0 {
        0.0
    } else {
        match fit_log_slope(&t[..head], &integrand[..head]) {
            Ok(rate) if rate > 0.0 => integrand[0] / rate,
            _ => {
                return Err(Error::Truncation(
                    "left tail is not exponentially decaying; cannot extend u to r = ∞".into(),
                ))
            }
        }
    };
    Ok(cumulative_cubic(t, &integrand).into_iter().map(|c| c + tail).collect())
}

/// Largest stencil used by [`radial_residual`].
pub const MAX_STENCIL: usize = 13;
const MIN_STENCIL: usize = 7;

/// Maximum over interior nodes of `|Δ²u - (-1)^k S_k[u] - λ f|` for radial
/// `u`, with derivatives from wide centred finite-difference stencils.
///
/// Each node uses a stride in the grid so that the stencil spacing is about
/// `min(0.02, 0.15 r)`: the fourth derivative and the `1/r³` weight amplify
/// rounding, which a wider high-order stencil keeps below truncation error.
/// Nodes whose centred stencil does not fit inside the grid are skipped; the
/// axis `r = 0` is never used.
pub fn radial_residual(u_values: &[f64], r_grid: &[f64], spec: &ProblemSpec) -> Result<f64> {
    let n = r_grid.len();
    if u_values.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: u_values.len() });
    }
    if n < MIN_STENCIL {
        return Err(Error::Stencil(format!("{n} points; at least {MIN_STENCIL} are needed")));
    }
    let mut pairs: Vec<(f64, f64)> = r_grid.iter().copied().zip(u_values.iter().copied()).collect();
    if pairs.windows(2).all(|p| p[1].0 < p[0].0) {
        pairs.reverse();
    } else if !pairs.windows(2).all(|p| p[1].0 > p[0].0) {
        return Err(Error::Stencil("radial grid must be strictly monotone".into()));
    }
    if pairs[0].0 <= 0.0 {
        pairs.remove(0);
    }
    let (r, u): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let n = r.len();
    let width = n.min(MAX_STENCIL) - (1 - n.min(MAX_STENCIL) % 2);
    if width < MIN_STENCIL {
        return Err(Error::Stencil(format!("{n} positive radii; at least {MIN_STENCIL} are needed")));
    }
    let half = width / 2;

    let nd = f64::from(spec.dim);
    let k = spec.k;
    let ck = if k.is_multiple_of(2) { 1.0 } else { -1.0 } * binomial(spec.dim - 1, k - 1) / f64::from(k);
    let kf = f64::from(k);

    let mut worst: Option<f64> = None;
    for i in 0..n {
        let ri = r[i];
        let local = if i + 1 < n { r[i + 1] - r[i] } else { r[i] - r[i - 1] };
        let target = 0.02_f64.min(0.15 * ri);
        let stride = ((target / local).round() as usize).max(1);
        if i < half * stride || i + half * stride >= n {
            continue;
        }
        let idx: Vec<usize> = (0..width).map(|j| i + j * stride - half * stride).collect();
        let xs: Vec<f64> = idx.iter().map(|&j| r[j]).collect();
        let w = fd_weights(ri, &xs, 4);
        let d = |m: usize| idx.iter().zip(&w[m]).map(|(&j, c)| c * (u[j] - u[i])).sum::<f64>();
        let (u1, u2, u3, u4) = (d(1), d(2), d(3), d(4));
        let lhs = u4 + 2.0 * (nd - 1.0) * u3 / ri + (nd - 1.0) * (nd - 3.0) * u2 / ri.powi(2)
            - (nd - 1.0) * (nd - 3.0) * u1 / ri.powi(3);
        let hessian = ck
            * ((nd - kf) * u1.powi(k as i32) / ri.powi(k as i32)
                + kf * u1.powi(k as i32 - 1) * u2 / ri.powi(k as i32 - 1));
        let forcing = if spec.lambda == 0.0 {
            0.0
        } else {
            spec.lambda * spec.datum.density(ri)? / ri.powi(spec.dim as i32 - 1)
        };
        let residual = (lhs - hessian - forcing).abs();
        worst = Some(worst.map_or(residual, |m: f64| m.max(residual)));
    }
    worst.ok_or_else(|| Error::Stencil("no interior node admits a centred stencil".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Datum;

    fn entire(dim: u32) -> ProblemSpec {
        ProblemSpec::autonomous(2, dim, BoundaryKind::Entire).unwrap()
    }

    #[test]
    fn z_w_examples() {
        let t: Vec<f64> = (0..11).map(|i| -2.0 + 0.4 * i as f64).collect();
        let w: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        let z = z_from_w(&w, &t, 1.0).unwrap();
        assert!(z.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(z_from_w(&[0.0; 11], &t, 1.0).unwrap().iter().all(|&v| v == 0.0));

        let w: Vec<f64> = t.iter().map(|t| 16.0 * (-t).exp() / (1.0 + (-2.0 * t).exp()).powi(2)).collect();
        let z = z_from_w(&w, &t, 1.0).unwrap();
        for (ti, zi) in t.iter().zip(&z) {
            let exact = 16.0 * (-2.0 * ti).exp() / (1.0 + (-2.0 * ti).exp()).powi(2);
            assert!((zi - exact).abs() < 1e-14 * exact.max(1.0));
        }
        assert!(matches!(z_from_w(&w[..3], &t, 1.0), Err(Error::LengthMismatch { .. })));
    }

    fn explicit_profile(alpha: f64) -> SolutionProfile {
        let t0 = 0.5 * alpha.ln();
        let t: Vec<f64> = (0..=8000).map(|i| -20.0 + 0.005 * i as f64).collect();
        let z: Vec<f64> = t.iter().map(|t| 4.0 / (t - t0).cosh().powi(2)).collect();
        SolutionProfile::with_u(t, z, &entire(4)).unwrap()
    }

    #[test]
    fn entire_reconstruction_matches_closed_form() {
        for alpha in [1.0, 2.0] {
            let profile = explicit_profile(alpha);
            let mut worst = 0.0_f64;
            for i in 0..=200 {
                let r = 0.05 + (10.0 - 0.05) * i as f64 / 200.0;
                let err = (profile.u_at(r).unwrap() - 8.0 / (1.0 + alpha * r * r)).abs();
                worst = worst.max(err);
            }
            assert!(worst < 1e-6, "alpha = {alpha}: {worst:e}");
        }
    }

    #[test]
    fn zero_profile_reconstructs_zero() {
        let t: Vec<f64> = (0..100).map(|i| 0.1 * i as f64).collect();
        let spec = ProblemSpec::autonomous(2, 4, BoundaryKind::Dirichlet).unwrap();
        let p = SolutionProfile::with_u(t.clone(), vec![0.0; 100], &spec).unwrap();
        assert!(p.u_values.iter().all(|&u| u == 0.0));
        let z: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let p = SolutionProfile::with_u(t, z, &spec).unwrap();
        assert_eq!(p.u_values[0], 0.0);
        assert_eq!(p.r_grid[0], 1.0);
    }

    #[test]
    fn undecayed_entire_tail_is_reported() {
        let t: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
        let z = vec![1.0; 100];
        let p = SolutionProfile::from_z(t, z, 1.0, BoundaryKind::Entire).unwrap();
        assert!(matches!(reconstruct_u(&p, &entire(4)), Err(Error::Truncation(_))));
    }

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn residual_of_explicit_solutions() {
        let r = uniform(0.1, 5.0, 2000);
        for alpha in [1.0, 2.0] {
            let u: Vec<f64> = r.iter().map(|r| 8.0 / (1.0 + alpha * r * r)).collect();
            let res = radial_residual(&u, &r, &entire(4)).unwrap();
            assert!(res < 1e-5, "alpha = {alpha}: {res:e}");
        }
    }

    #[test]
    fn residual_of_constant_vanishes() {
        let r = uniform(0.2, 3.0, 300);
        let res = radial_residual(&vec![2.5; 300], &r, &entire(5)).unwrap();
        assert!(res < 1e-12);
    }

    #[test]
    fn residual_sees_wrong_solutions_and_forcing() {
        let r = uniform(0.1, 5.0, 2000);
        let u: Vec<f64> = r.iter().map(|r| 7.0 / (1.0 + r * r)).collect();
        assert!(radial_residual(&u, &r, &entire(4)).unwrap() > 1e-2);

        // Δ²(ε r⁴) = 8N(N+2)ε, balanced by the datum; the Hessian term is O(ε²)
        let eps = 1e-6;
        let u: Vec<f64> = r.iter().map(|r| eps * r.powi(4)).collect();
        let n = 4.0;
        assert!(radial_residual(&u, &r, &entire(4)).unwrap() > 1e-4);
        let datum = Datum::power_law(eps * 8.0 * n * (n + 2.0), n - 1.0).unwrap();
        let spec = ProblemSpec::new(2, 4, 1.0, BoundaryKind::Dirichlet, datum).unwrap();
        let res = radial_residual(&u, &r, &spec).unwrap();
        assert!(res < 2e-7, "{res:e}");
    }

    #[test]
    fn residual_rejects_coarse_grids() {
        let r = uniform(0.5, 1.0, 6);
        assert!(matches!(radial_residual(&[0.0; 6], &r, &entire(4)), Err(Error::Stencil(_))));
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn w_z_round_trip(
            steps in prop::collection::vec(0.01..1.0f64, 2..60),
            start in -10.0..10.0f64,
            gamma in 0.0..2.0f64,
            seed in prop::collection::vec(-3.0..3.0f64, 60),
        ) {
            let mut t = vec![start];
            for h in &steps {
                t.push(t.last().unwrap() + h);
            }
            let w: Vec<f64> = seed.iter().take(t.len()).copied().collect();
            let back = w_from_z(&z_from_w(&w, &t, gamma).unwrap(), &t, gamma).unwrap();
            for (a, b) in w.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(f64::MIN_POSITIVE), "{a} vs {b}");
            }
        }
    }
}
