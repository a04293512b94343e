//! Thin singular value decomposition and spectral truncation.
//!
//! The factorization is computed by `faer` (bidiagonalization followed by a
//! divide-and-conquer / QR sweep) in sequential mode, so the result is a
//! deterministic function of the input.

use faer::Mat;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// `X = U diag(σ) Vᵀ` with `k = min(m, n)`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Nonincreasing and nonnegative, length `k`.
    pub singular_values: Vec<f64>,
    /// `k × n`, orthonormal rows.
    pub vt: DenseMatrix,
}

impl Svd {
    pub fn rank_capacity(&self) -> usize {
        self.singular_values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.vt.cols())
    }
}

pub fn svd(x: &DenseMatrix) -> Result<Svd> {
    let (m, n) = x.shape();
    let k = m.min(n);
    let a = Mat::<f64>::from_fn(m, n, |i, j| x.get(i, j));
    let dec = a.thin_svd().map_err(|e| {
        Error::Numerical(format!(
            "SVD of {m}x{n} matrix did not converge within the solver's iteration cap ({e:?})"
        ))
    })?;
    let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());

    let mut sigma: Vec<f64> = (0..k).map(|i| s[i]).collect();
    // The solver already sorts; clamp tiny negative round-off.
    for s in &mut sigma {
        if *s < 0.0 {
            *s = 0.0;
        }
    }
    let u = DenseMatrix::from_vec(m, k, (0..m * k).map(|p| u[(p / k, p % k)]).collect())?;
    let vt = DenseMatrix::from_vec(k, n, (0..k * n).map(|p| v[(p % n, p / n)]).collect())?;
    Ok(Svd {
        u,
        singular_values: sigma,
        vt,
    })
}

/// Largest singular value `σ₁`.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64> {
    let (m, n) = x.shape();
    let a = Mat::<f64>::from_fn(m, n, |i, j| x.get(i, j));
    let s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular values did not converge ({e:?})")))?;
    Ok(s.first().copied().unwrap_or(0.0).max(0.0))
}

/// `[X]_r = U[:, :r] diag(σ[:r]) Vᵀ[:r, :]`; `r = 0` gives the zero matrix.
pub fn truncate_svd(s: &Svd, r: usize) -> Result<DenseMatrix> {
    let k = s.rank_capacity();
    if r > k {
        return Err(Error::Argument(format!("truncation rank {r} exceeds {k}")));
    }
    let (m, n) = s.shape();
    let mut out = vec![0.0; m * n];
    for t in 0..r {
        let sigma = s.singular_values[t];
        let v = s.vt.row(t);
        for i in 0..m {
            let a = sigma * s.u.get(i, t);
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i * n..(i + 1) * n].iter_mut().zip(v) {
                *o += a * b;
            }
        }
    }
    DenseMatrix::from_vec(m, n, out)
}
