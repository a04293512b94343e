use crate::error::{Error, Result};
use crate::lvm::{generate_piecewise_matrix, LatentSample, PiecewiseLvmSpec};
use crate::matrix::{max_abs_diff, DenseMatrix};
use crate::taylor::{check_epsilon, taylor_factorize, SeriesConstant, TaylorFactorization};

/// Block-concatenated factors for a piecewise model. Block `ℓ` of `u_i` holds
/// `u_i^{(ℓ)}` when `α_i ∈ A_ℓ` and zeros otherwise; likewise for `v_j` and
/// `B_ℓ`. Since exactly one cell contains `(α_i, β_j)`, `u_iᵀ v_j` picks out
/// that piece's expansion.
#[derive(Debug, Clone)]
pub struct PiecewiseTaylorFactorization {
    pub pieces: Vec<TaylorFactorization>,
    /// Column ranges of the blocks: block `ℓ` is `offsets[ℓ]..offsets[ℓ+1]`.
    pub block_offsets: Vec<usize>,
    pub u_matrix: DenseMatrix,
    pub v_matrix: DenseMatrix,
    pub epsilon: f64,
    /// `ε‖f‖` with `‖f‖ = max_ℓ ‖f_ℓ‖`.
    pub error_bound: f64,
    pub achieved_error: f64,
    /// Largest `|u_iᵀv_j − u_i^{(ℓ)ᵀ}v_j^{(ℓ)}|` over entries; zero unless the
    /// block layout is broken.
    pub block_mismatch: f64,
    /// `Σ_ℓ C_u^{(ℓ)}`.
    pub c_u: SeriesConstant,
    /// `Σ_ℓ C_v^{(ℓ)}`.
    pub c_v: SeriesConstant,
    pub sup_norm: f64,
}

impl PiecewiseTaylorFactorization {
    pub fn n_tilde(&self) -> usize {
        self.u_matrix.cols()
    }
}

pub fn taylor_factorize_piecewise(
    spec: &PiecewiseLvmSpec,
    sample: &LatentSample,
    epsilon: f64,
) -> Result<PiecewiseTaylorFactorization> {
    check_epsilon(epsilon)?;
    let pieces: Vec<TaylorFactorization> = spec
        .pieces()
        .iter()
        .map(|p| taylor_factorize(&p.spec, sample, epsilon))
        .collect::<Result<_>>()?;
    let mut block_offsets = vec![0];
    for f in &pieces {
        block_offsets.push(block_offsets.last().unwrap() + f.n_tilde);
    }
    let width = *block_offsets.last().unwrap();
    let (m, n) = (sample.rows(), sample.cols());

    let alpha_in: Vec<Vec<bool>> = sample
        .alphas
        .iter()
        .map(|a| {
            spec.pieces()
                .iter()
                .map(|p| p.alpha_box.contains(a, spec.radius()))
                .collect()
        })
        .collect();
    let beta_in: Vec<Vec<bool>> = sample
        .betas
        .iter()
        .map(|b| {
            spec.pieces()
                .iter()
                .map(|p| p.beta_box.contains(b, spec.radius()))
                .collect()
        })
        .collect();

    let mut u = vec![0.0; m * width];
    for i in 0..m {
        for (l, f) in pieces.iter().enumerate() {
            if alpha_in[i][l] {
                u[i * width + block_offsets[l]..i * width + block_offsets[l + 1]]
                    .copy_from_slice(f.u_matrix.row(i));
            }
        }
    }
    let mut v = vec![0.0; width * n];
    for (l, f) in pieces.iter().enumerate() {
        for r in 0..f.n_tilde {
            let row = f.v_matrix.row(r);
            let dst = &mut v[(block_offsets[l] + r) * n..(block_offsets[l] + r + 1) * n];
            for j in 0..n {
                if beta_in[j][l] {
                    dst[j] = row[j];
                }
            }
        }
    }
    let u_matrix = DenseMatrix::from_vec(m, width, u)?;
    let v_matrix = DenseMatrix::from_vec(width, n, v)?;

    let xhat = u_matrix.matmul(&v_matrix)?;
    let per_piece: Vec<DenseMatrix> = pieces
        .iter()
        .map(|f| f.reconstruct())
        .collect::<Result<_>>()?;
    let mut block_mismatch = 0.0_f64;
    for i in 0..m {
        for j in 0..n {
            let l = spec.piece_of(&sample.alphas[i], &sample.betas[j])?;
            block_mismatch = block_mismatch.max((xhat.get(i, j) - per_piece[l].get(i, j)).abs());
        }
    }
    if block_mismatch != 0.0 {
        return Err(Error::InternalConsistency(format!(
            "block-concatenated factors differ from per-piece products by {block_mismatch:e}"
        )));
    }

    let x = generate_piecewise_matrix(spec, sample)?;
    let achieved_error = max_abs_diff(&x, &xhat)?;
    let sup_norm = spec.sup_norm();
    let error_bound = epsilon * sup_norm;
    if !(achieved_error <= error_bound) {
        return Err(Error::InternalConsistency(format!(
            "piecewise expansion has max error {achieved_error:e} > ε‖f‖ = {error_bound:e}"
        )));
    }
    let c_u = pieces
        .iter()
        .fold(SeriesConstant::zero(), |acc, f| acc.add(f.c_u));
    let c_v = pieces
        .iter()
        .fold(SeriesConstant::zero(), |acc, f| acc.add(f.c_v));
    Ok(PiecewiseTaylorFactorization {
        pieces,
        block_offsets,
        u_matrix,
        v_matrix,
        epsilon,
        error_bound,
        achieved_error,
        block_mismatch,
        c_u,
        c_v,
        sup_norm,
    })
}
