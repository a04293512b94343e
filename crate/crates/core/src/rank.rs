//! Max-norm truncation error `μ_r(X) = ‖X − [X]_r‖_max` and the ε-rank upper
//! bound obtained by scanning it.
//!
//! `rank_ε(X)` itself is hard to compute; the smallest `r` with `μ_r(X) ≤ ε` is
//! only ever an upper bound on it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{max_abs_norm, DenseMatrix};
use crate::svd::{svd, Svd};

/// Result of [`rank_eps_upper_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankBoundResult {
    pub epsilon: f64,
    pub rank_upper_bound: usize,
    /// `μ_r` for `r = 0..=rank_upper_bound`. Every entry but the last is `> ε`.
    pub mu_curve: Vec<f64>,
}

/// Walks `r = 0, 1, 2, …` peeling one singular triple off a residual at a
/// time, so that `μ_r` for consecutive `r` costs `O(mn)` each.
pub struct MuScan<'a> {
    svd: &'a Svd,
    residual: Vec<f64>,
    rank: usize,
    mu: f64,
}

impl<'a> MuScan<'a> {
    pub fn new(x: &DenseMatrix, svd: &'a Svd) -> Result<Self> {
        if svd.shape() != x.shape() {
            return Err(Error::Dimension(format!(
                "SVD of {:?} does not match matrix {:?}",
                svd.shape(),
                x.shape()
            )));
        }
        Ok(Self {
            svd,
            residual: x.as_slice().to_vec(),
            rank: 0,
            mu: max_abs_norm(x),
        })
    }

    /// Current `r`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `μ_r` at the current `r`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_exhausted(&self) -> bool {
        self.rank >= self.svd.rank_capacity()
    }

    /// Advance to `r + 1` and return the new `μ`.
    pub fn step(&mut self) -> Option<f64> {
        if self.is_exhausted() {
            return None;
        }
        let t = self.rank;
        let n = self.svd.vt.cols();
        let sigma = self.svd.singular_values[t];
        let v = self.svd.vt.row(t);
        let u = &self.svd.u;
        let last = t + 1 == self.svd.rank_capacity();
        self.mu = self
            .residual
            .par_chunks_mut(n)
            .enumerate()
            .map(|(i, row)| {
                let a = sigma * u.get(i, t);
                let mut worst = 0.0_f64;
                for (x, &b) in row.iter_mut().zip(v) {
                    *x -= a * b;
                    if last {
                        // [X]_k = X exactly; what is left is round-off.
                        *x = 0.0;
                    }
                    worst = worst.max(x.abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        self.rank += 1;
        Some(self.mu)
    }
}

/// `μ_r(X)`, computing a fresh SVD.
pub fn mu_r(x: &DenseMatrix, r: usize) -> Result<f64> {
    let s = svd(x)?;
    mu_r_with_svd(x, &s, r)
}

pub fn mu_r_with_svd(x: &DenseMatrix, s: &Svd, r: usize) -> Result<f64> {
    let k = s.rank_capacity();
    if r > k {
        return Err(Error::Argument(format!(
            "rank {r} exceeds min(rows, cols) = {k}"
        )));
    }
    let mut scan = MuScan::new(x, s)?;
    while scan.rank() < r {
        scan.step();
    }
    Ok(scan.mu())
}

/// Smallest `r` with `μ_r(X) ≤ ε` by linear scan over one SVD.
pub fn rank_eps_upper_bound(x: &DenseMatrix, epsilon: f64) -> Result<RankBoundResult> {
    let s = svd(x)?;
    rank_eps_upper_bound_with_svd(x, &s, epsilon)
}

pub fn rank_eps_upper_bound_with_svd(
    x: &DenseMatrix,
    s: &Svd,
    epsilon: f64,
) -> Result<RankBoundResult> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let mut scan = MuScan::new(x, s)?;
    let mut curve = vec![scan.mu()];
    while scan.mu() > epsilon {
        match scan.step() {
            Some(mu) => curve.push(mu),
            None => break,
        }
    }
    Ok(RankBoundResult {
        epsilon,
        rank_upper_bound: scan.rank(),
        mu_curve: curve,
    })
}

/// Upper bounds for several tolerances from one scan. Output order follows
/// `epsilons`.
pub fn rank_eps_upper_bounds(x: &DenseMatrix, s: &Svd, epsilons: &[f64]) -> Result<Vec<usize>> {
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::Argument(format!(
            "epsilon must be positive and finite, got {e}"
        )));
    }
    let mut out = vec![None; epsilons.len()];
    let mut scan = MuScan::new(x, s)?;
    loop {
        let mu = scan.mu();
        for (slot, &e) in out.iter_mut().zip(epsilons) {
            if slot.is_none() && mu <= e {
                *slot = Some(scan.rank());
            }
        }
        if out.iter().all(Option::is_some) || scan.step().is_none() {
            break;
        }
    }
    Ok(out.into_iter().map(|r| r.unwrap_or(scan.rank())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_examples() {
        let d = DenseMatrix::diag(&[3.0, 1.0]).unwrap();
        assert!((mu_r(&d, 1).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(mu_r(&d, 0).unwrap(), 3.0);

        let x = DenseMatrix::from_fn(5, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5)).unwrap();
        assert!(mu_r(&x, 1).unwrap() <= 1e-10);

        let eye = DenseMatrix::identity(10).unwrap();
        assert!((mu_r(&eye, 5).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(mu_r(&eye, 11), Err(Error::Argument(_))));
    }

    #[test]
    fn rank_bound_examples() {
        let z = DenseMatrix::zeros(4, 4).unwrap();
        let r = rank_eps_upper_bound(&z, 0.5).unwrap();
        assert_eq!(r.rank_upper_bound, 0);
        assert_eq!(r.mu_curve, vec![0.0]);

        let d = DenseMatrix::diag(&[3.0, 1.0]).unwrap();
        assert_eq!(rank_eps_upper_bound(&d, 0.5).unwrap().rank_upper_bound, 2);
        let r = rank_eps_upper_bound(&d, 1.0).unwrap();
        assert_eq!(r.rank_upper_bound, 1);
        assert_eq!(r.mu_curve.len(), 2);
        assert!(r.mu_curve[0] > 1.0 && r.mu_curve[1] <= 1.0);
    }

    #[test]
    fn epsilon_must_be_positive() {
        let d = DenseMatrix::diag(&[3.0, 1.0]).unwrap();
        assert!(rank_eps_upper_bound(&d, 0.0).is_err());
        assert!(rank_eps_upper_bound(&d, f64::NAN).is_err());
    }

    #[test]
    fn multi_epsilon_scan_agrees_with_single() {
        let x = DenseMatrix::from_fn(12, 9, |i, j| ((i as f64) - (j as f64)).cos() / (1.0 + (i + j) as f64))
            .unwrap();
        let s = svd(&x).unwrap();
        let eps = [0.1, 1e-3, 1e-6, 0.02];
        let multi = rank_eps_upper_bounds(&x, &s, &eps).unwrap();
        for (e, r) in eps.iter().zip(multi) {
            assert_eq!(rank_eps_upper_bound_with_svd(&x, &s, *e).unwrap().rank_upper_bound, r);
        }
    }
}
