//! Gaussian Johnson–Lindenstrauss maps and the compression pipelines built on
//! them.

mod compress;

pub use compress::{
    compress_lvm, theorem0_compress, theorem2_compress, theorem3_compress, theorem4_compress,
    CompressOptions, CompressedApprox, Projection, DEFAULT_MAX_RETRIES, MAX_PROJECTION_ENTRIES,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq, DenseMatrix};
use crate::rng::{standard_normal, stream, StreamRole};

/// `r = ⌈8 ln(n_points + 1) / ε_JL²⌉` (natural log).
pub fn jl_target_dim(n_points: usize, eps_jl: f64) -> Result<usize> {
    if n_points == 0 {
        return Err(Error::Argument("need at least one point".into()));
    }
    if !(eps_jl > 0.0 && eps_jl < 1.0) {
        return Err(Error::Argument(format!("eps_jl must lie in (0, 1), got {eps_jl}")));
    }
    let r = (8.0 * ((n_points + 1) as f64).ln() / (eps_jl * eps_jl)).ceil();
    if !(r < usize::MAX as f64) {
        return Err(Error::Capacity(format!("target dimension {r} is not representable")));
    }
    Ok(r as usize)
}

/// `ln` of the real number `8 ln(n_points + 1) / ε_JL²`, for `ε_JL` given by
/// its logarithm; stays finite when the dimension itself would overflow.
pub fn ln_jl_target_dim(n_points: usize, ln_eps_jl: f64) -> f64 {
    (8.0 * ((n_points + 1) as f64).ln()).ln() - 2.0 * ln_eps_jl
}

/// A realized `r × D` map with i.i.d. `N(0, 1/r)` entries.
#[derive(Debug, Clone)]
pub struct JlMap {
    pub q: DenseMatrix,
    /// Distortion the map was sized for, if any.
    pub target_eps_jl: Option<f64>,
    pub seed: u64,
}

impl JlMap {
    pub fn target_dim(&self) -> usize {
        self.q.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.q.cols()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "vector of length {} for a map from dimension {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok((0..self.target_dim()).map(|i| dot(self.q.row(i), x)).collect())
    }
}

/// Row `i` of `Q` comes from stream `(seed, Projection, i)`, so the map does
/// not depend on the thread count.
pub fn sample_jl_map(input_dim: usize, r: usize, seed: u64) -> Result<JlMap> {
    if input_dim == 0 || r == 0 {
        return Err(Error::Argument(format!(
            "JL map needs r ≥ 1 and input dimension ≥ 1, got r = {r}, D = {input_dim}"
        )));
    }
    if (r as u64).saturating_mul(input_dim as u64) > MAX_PROJECTION_ENTRIES {
        return Err(Error::Capacity(format!(
            "a {r}x{input_dim} projection exceeds {MAX_PROJECTION_ENTRIES} entries"
        )));
    }
    let scale = 1.0 / (r as f64).sqrt();
    let mut data = vec![0.0; r * input_dim];
    data.par_chunks_mut(input_dim)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = stream(seed, StreamRole::Projection, i as u64);
            for x in row {
                *x = scale * standard_normal(&mut rng);
            }
        });
    Ok(JlMap {
        q: DenseMatrix::from_vec(r, input_dim, data)?,
        target_eps_jl: None,
        seed,
    })
}

/// Map sized by [`jl_target_dim`] for `n_points` points.
pub fn sample_jl_map_for(input_dim: usize, n_points: usize, eps_jl: f64, seed: u64) -> Result<JlMap> {
    let r = jl_target_dim(n_points, eps_jl)?;
    let mut map = sample_jl_map(input_dim, r, seed)?;
    map.target_eps_jl = Some(eps_jl);
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreservationReport {
    pub passed: bool,
    /// Largest `|x_iᵀx_j − (Qx_i)ᵀ(Qx_j)| / (ε_JL (‖x_i‖² + ‖x_j‖² − x_iᵀx_j))`.
    pub worst_ratio: f64,
    pub worst_pair: (usize, usize),
    pub pairs_checked: usize,
}

/// Checks `|x_iᵀx_j − (Qx_i)ᵀ(Qx_j)| ≤ ε_JL (‖x_i‖² + ‖x_j‖² − x_iᵀx_j)` for
/// all pairs `i ≤ j`.
pub fn verify_inner_product_preservation(
    map: &JlMap,
    points: &[Vec<f64>],
    eps_jl: f64,
) -> Result<PreservationReport> {
    let projected: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| map.apply(x))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = points.iter().map(|x| norm_sq(x)).collect();
    let rows: Vec<(f64, (usize, usize))> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut worst = (0.0_f64, (i, i));
            for j in i..points.len() {
                let ip = dot(&points[i], &points[j]);
                let lhs = (ip - dot(&projected[i], &projected[j])).abs();
                let rhs = eps_jl * (norms[i] + norms[j] - ip);
                let ratio = if rhs > 0.0 {
                    lhs / rhs
                } else if lhs > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if ratio > worst.0 {
                    worst = (ratio, (i, j));
                }
            }
            worst
        })
        .collect();
    let (worst_ratio, worst_pair) = rows
        .into_iter()
        .fold((0.0, (0, 0)), |acc, w| if w.0 > acc.0 { w } else { acc });
    let n = points.len();
    Ok(PreservationReport {
        passed: worst_ratio <= 1.0,
        worst_ratio,
        worst_pair,
        pairs_checked: n * (n + 1) / 2,
    })
}
