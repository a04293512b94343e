//! Entrywise low-rank approximation of matrices generated by smooth latent
//! variable models.
//!
//! The crate generates matrices `X_ij = f(α_i, β_j)` ([`lvm`]), builds
//! explicit bounded-rank factorizations from Taylor expansions ([`taylor`]),
//! compresses them further with Johnson–Lindenstrauss projections ([`jl`]),
//! and measures max-norm rank upper bounds from truncated SVDs ([`rank`],
//! [`scan`]).
//!
//! ```
//! use logrank::{compress_lvm, sample_latents, CompressOptions, LvmSpec};
//!
//! let spec = LvmSpec::rbf(2, 1.0)?;
//! let sample = sample_latents(&spec, 40, 40, 7)?;
//! let (fact, approx) = compress_lvm(&spec, &sample, 0.2, 1, &CompressOptions::default())?;
//! assert!(approx.achieved_max_error <= 0.2 * spec.sup_norm());
//! assert!(fact.achieved_error <= 0.1 * spec.sup_norm());
//! # Ok::<(), logrank::Error>(())
//! ```

pub mod error;
pub mod io;
pub mod jl;
pub mod lvm;
pub mod matrix;
pub mod rank;
pub mod rng;
pub mod scan;
pub mod special;
pub mod svd;
pub mod taylor;

pub use error::{Error, Result};
pub use io::{read_matrix, write_matrix, write_matrix_csv, Metadata};
pub use jl::{
    compress_lvm, jl_target_dim, sample_jl_map, theorem0_compress, theorem2_compress,
    theorem3_compress, theorem4_compress, verify_inner_product_preservation, CompressOptions,
    CompressedApprox, JlMap, PreservationReport, Projection,
};
pub use lvm::{
    evaluate_entry, generate_matrix, generate_piecewise_matrix, generate_symmetric_matrix,
    sample_latents, verify_niceness, Family, LatentDistribution, LatentSample, LvmSpec,
    NicenessReport, PiecewiseLvmSpec, PolyTerm,
};
pub use matrix::{max_abs_norm, DenseMatrix};
pub use rank::{mu_r, rank_eps_upper_bound, RankBoundResult};
pub use scan::{run_scan, ScanConfig, ScanRecord};
pub use svd::{spectral_norm, svd, truncate_svd, Svd};
pub use taylor::{
    compute_cu, compute_cv, select_truncation_order, taylor_factorize, taylor_factorize_piecewise,
    taylor_factorize_with_order, MultiIndexSet, PiecewiseTaylorFactorization, SeriesConstant,
    TaylorFactorization,
};
