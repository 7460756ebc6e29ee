//! Banded LU factorization with partial pivoting and a smallest singular
//! value estimate, sized for the finite-difference Jacobians in `branch`.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl` slots
/// receive fill-in from row interchanges.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku + self.kl {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("index in range");
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let current = self.get(i, j);
        self.set(i, j, current + value);
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting. Fails on an exactly zero or
    /// non-finite pivot.
    pub fn factor(&self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut a = self.clone();
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * kl];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::SingularJacobian { lambda: f64::NAN, pivot: best });
            }
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (sk, sp) = (a.slot(k, j).unwrap(), a.slot(p, j));
                    let vp = sp.map_or(0.0, |s| a.data[s]);
                    let vk = a.data[sk];
                    a.data[sk] = vp;
                    if let Some(s) = sp {
                        a.data[s] = vk;
                    }
                }
            }
            let pivot = a.get(k, k);
            for i in k + 1..=last_row {
                let m = a.get(i, k) / pivot;
                multipliers[k * kl + (i - k - 1)] = m;
                let sik = a.slot(i, k).unwrap();
                a.data[sik] = 0.0;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let akj = a.get(k, j);
                        if akj != 0.0 {
                            let s = a.slot(i, j).unwrap();
                            a.data[s] -= m * akj;
                        }
                    }
                }
            }
        }
        Ok(BandLu { u: a, pivots, multipliers })
    }
}

/// Factors `P A = L U` of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    u: BandMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.u.n, self.u.kl, self.u.ku);
        assert_eq!(rhs.len(), n);
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            for r in 1..=kl.min(n - 1 - k) {
                b[k + r] -= self.multipliers[k * kl + r - 1] * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + ku + kl).min(n - 1) {
                s -= self.u.get(i, j) * b[j];
            }
            b[i] = s / self.u.get(i, i);
        }
        b
    }

    /// Smallest absolute diagonal entry of `U`.
    pub fn min_pivot(&self) -> f64 {
        (0..self.u.n).map(|i| self.u.get(i, i).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Smallest singular value of `a` by inverse iteration on `AᵀA`.
pub fn smallest_singular_value(a: &BandMatrix, iterations: usize) -> Result<f64> {
    let lu = a.factor()?;
    let lut = a.transpose().factor()?;
    let n = a.dim();
    // deterministic, non-symmetric start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let mut estimate = f64::NAN;
    for _ in 0..iterations.max(1) {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let y = lut.solve(&lu.solve(&x));
        let growth = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let next = 1.0 / growth.sqrt();
        let done = (next - estimate).abs() <= 1e-10 * next;
        estimate = next;
        x = y;
        if done {
            break;
        }
    }
    Ok(estimate)
}
