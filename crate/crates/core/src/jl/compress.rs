use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{write_matrix, Metadata};
use crate::jl::{ln_jl_target_dim, sample_jl_map};
use crate::lvm::{generate_matrix, generate_symmetric_matrix, LatentSample, LvmSpec};
use crate::matrix::{max_abs_diff, DenseMatrix};
use crate::special::log_add_exp;
use crate::svd::svd;
use crate::taylor::{
    check_epsilon, taylor_factorize, PiecewiseTaylorFactorization, SeriesConstant,
    TaylorFactorization,
};

pub const DEFAULT_MAX_RETRIES: usize = 20;
/// Largest `r · (D + m + n)` (the entries of `Q` and both projected factors)
/// for a projection at the sufficient dimension. Beyond it, an `r ≥ D` is
/// realized by keeping the factors unprojected.
pub const MAX_PROJECTION_ENTRIES: u64 = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressOptions {
    /// Number of projections drawn (seeds `seed, seed+1, …`) before giving up.
    pub max_retries: usize,
    /// Project to this many dimensions instead of the sufficient `r`.
    pub rank_override: Option<usize>,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            max_retries: DEFAULT_MAX_RETRIES,
            rank_override: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// `Q` with i.i.d. `N(0, 1/r)` entries.
    Gaussian,
    /// The sufficient `r` is at least the factor width `D`, so the factors are
    /// kept as they are (rank `≤ D ≤ r`).
    Identity,
}

impl Projection {
    pub fn name(&self) -> &'static str {
        match self {
            Projection::Gaussian => "gaussian",
            Projection::Identity => "identity",
        }
    }
}

/// `Y = left · right` with `rank(Y) ≤ rank_budget`.
#[derive(Debug, Clone)]
pub struct CompressedApprox {
    pub method: &'static str,
    /// `m × rank_budget`.
    pub left: DenseMatrix,
    /// `rank_budget × n`.
    pub right: DenseMatrix,
    pub rank_budget: usize,
    /// `ln` of the sufficient dimension `8 ln(points + 1) / ε_JL²`.
    pub theoretical_rank_ln: f64,
    /// The sufficient dimension, when it fits in `u64`.
    pub theoretical_rank: Option<u64>,
    pub epsilon: f64,
    pub eps_jl_ln: f64,
    /// `‖X‖₂` or `‖f‖`.
    pub reference_norm: f64,
    /// `ε · reference_norm`.
    pub target_error: f64,
    pub seed: u64,
    pub accepted_seed: u64,
    pub projection: Projection,
    pub retries_used: usize,
    /// Measured `‖X − Y‖_max`.
    pub achieved_max_error: f64,
    /// Measured `max |u_iᵀv_j − (Qu_i)ᵀ(Qv_j)|`.
    pub jl_max_error: f64,
    /// Whether the rank used is below `min(m, n)`.
    pub nontrivial: bool,
    /// Measured error of `(Y + Yᵀ)/2`, for symmetric inputs.
    pub symmetrized_max_error: Option<f64>,
}

impl CompressedApprox {
    pub fn eps_jl(&self) -> f64 {
        self.eps_jl_ln.exp()
    }

    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        self.left.matmul(&self.right)
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("kind", "compressed")
            .insert("method", self.method)
            .insert("r", self.rank_budget)
            .insert(
                "theoretical_r",
                self.theoretical_rank
                    .map_or_else(|| format!("exp({})", self.theoretical_rank_ln), |r| r.to_string()),
            )
            .insert("ln_theoretical_r", self.theoretical_rank_ln)
            .insert("epsilon", self.epsilon)
            .insert("eps_jl", self.eps_jl())
            .insert("ln_eps_jl", self.eps_jl_ln)
            .insert("reference_norm", self.reference_norm)
            .insert("seed", self.seed)
            .insert("accepted_seed", self.accepted_seed)
            .insert("projection", self.projection.name())
            .insert("retries_used", self.retries_used)
            .insert("achieved_max_error", self.achieved_max_error)
            .insert("jl_max_error", self.jl_max_error)
            .insert("nontrivial", self.nontrivial);
        if let Some(e) = self.symmetrized_max_error {
            m.insert("symmetrized_max_error", e);
        }
        m
    }

    /// Writes `<prefix>.left.epsr`, `<prefix>.right.epsr` and `<prefix>.meta`.
    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let with = |suffix: &str| {
            let mut s = prefix.as_ref().as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        write_matrix(&self.left, with(".left.epsr"))?;
        write_matrix(&self.right, with(".right.epsr"))?;
        self.metadata().write(with(".meta"))
    }
}

struct Plan {
    method: &'static str,
    epsilon: f64,
    ln_eps_jl: f64,
    ln_r: f64,
    r: Option<u64>,
    reference_norm: f64,
}

/// Projects the factors `u` (`m × D`) and `v` (`D × n`) through one shared
/// `Q` and checks the result against `x`.
fn project(
    plan: Plan,
    u: &DenseMatrix,
    v: &DenseMatrix,
    x: &DenseMatrix,
    seed: u64,
    opts: &CompressOptions,
) -> Result<CompressedApprox> {
    if opts.max_retries == 0 {
        return Err(Error::Argument("max_retries must be at least 1".into()));
    }
    let d = u.cols();
    let (m, n) = x.shape();
    let base = u.matmul(v)?;
    let target = plan.epsilon * plan.reference_norm;
    let (projection, r) = match (opts.rank_override, plan.r) {
        (Some(0), _) => return Err(Error::Argument("rank override must be at least 1".into())),
        (Some(r), _) => (Projection::Gaussian, r),
        (None, Some(r)) if r.saturating_mul((d + m + n) as u64) <= MAX_PROJECTION_ENTRIES => {
            (Projection::Gaussian, r as usize)
        }
        (None, None) => (Projection::Identity, d),
        (None, Some(r)) if r >= d as u64 => (Projection::Identity, d),
        (None, Some(r)) => {
            return Err(Error::Capacity(format!(
                "projection of {d} dimensions to r = {r} exceeds {MAX_PROJECTION_ENTRIES} entries"
            )))
        }
    };
    let nontrivial = match opts.rank_override {
        Some(r) => r < m.min(n),
        None => plan.r.is_some_and(|r| r < m.min(n) as u64),
    };
    let mut out = CompressedApprox {
        method: plan.method,
        left: u.clone(),
        right: v.clone(),
        rank_budget: r,
        theoretical_rank_ln: plan.ln_r,
        theoretical_rank: plan.r,
        epsilon: plan.epsilon,
        eps_jl_ln: plan.ln_eps_jl,
        reference_norm: plan.reference_norm,
        target_error: target,
        seed,
        accepted_seed: seed,
        projection,
        retries_used: 0,
        achieved_max_error: f64::INFINITY,
        jl_max_error: 0.0,
        nontrivial,
        symmetrized_max_error: None,
    };
    if projection == Projection::Identity {
        out.achieved_max_error = max_abs_diff(x, &base)?;
        if !(out.achieved_max_error <= target) {
            return Err(Error::InternalConsistency(format!(
                "unprojected factors miss the target: {:e} > {target:e}",
                out.achieved_max_error
            )));
        }
        return Ok(out);
    }
    let mut best = f64::INFINITY;
    for attempt in 0..opts.max_retries {
        let s = seed.wrapping_add(attempt as u64);
        let q = sample_jl_map(d, r, s)?.q;
        let left = u.matmul_transposed(&q)?;
        let right = q.matmul(v)?;
        let y = left.matmul(&right)?;
        let err = max_abs_diff(x, &y)?;
        best = best.min(err);
        if err <= target {
            out.left = left;
            out.right = right;
            out.accepted_seed = s;
            out.retries_used = attempt;
            out.achieved_max_error = err;
            out.jl_max_error = max_abs_diff(&base, &y)?;
            return Ok(out);
        }
    }
    Err(Error::ProbabilisticFailure {
        target,
        best_error: best,
        attempts: opts.max_retries,
    })
}

/// SVD factors `Ũ = U√Σ`, `Ṽᵀ = √Σ Vᵀ` projected with `ε_JL = ε/3` and
/// `r = ⌈72 ln(m + n + 1)/ε²⌉`; succeeds when `‖X − Y‖_max ≤ ε‖X‖₂`.
pub fn theorem0_compress(
    x: &DenseMatrix,
    epsilon: f64,
    seed: u64,
    opts: &CompressOptions,
) -> Result<CompressedApprox> {
    check_epsilon(epsilon)?;
    let s = svd(x)?;
    let k = s.singular_values.len();
    let root: Vec<f64> = s.singular_values.iter().map(|v| v.sqrt()).collect();
    let u = DenseMatrix::from_fn(x.rows(), k, |i, c| s.u.get(i, c) * root[c])?;
    let v = DenseMatrix::from_fn(k, x.cols(), |c, j| root[c] * s.vt.get(c, j))?;
    let points = x.rows() + x.cols();
    let r_real = 72.0 * ((points + 1) as f64).ln() / (epsilon * epsilon);
    let plan = Plan {
        method: "theorem0",
        epsilon,
        ln_eps_jl: (epsilon / 3.0).ln(),
        ln_r: r_real.ln(),
        r: Some(r_real.ceil() as u64),
        reference_norm: s.singular_values[0],
    };
    project(plan, &u, &v, x, seed, opts)
}

/// `ln ε_JL` with `ε_JL = (ε/2) / (C_u + C_v + 1 + ε/2)`.
fn ln_eps_jl(epsilon: f64, c_u: SeriesConstant, c_v: SeriesConstant) -> f64 {
    let ln_denominator = log_add_exp(log_add_exp(c_u.ln, c_v.ln), (1.0 + epsilon / 2.0).ln());
    (epsilon / 2.0).ln() - ln_denominator
}

fn lvm_plan(
    method: &'static str,
    epsilon: f64,
    points: usize,
    c_u: SeriesConstant,
    c_v: SeriesConstant,
    sup_norm: f64,
) -> Plan {
    let ln_eps = ln_eps_jl(epsilon, c_u, c_v);
    let ln_r = ln_jl_target_dim(points, ln_eps);
    let r = if ln_r < 60.0 * std::f64::consts::LN_2 {
        let eps_jl = ln_eps.exp();
        Some((8.0 * ((points + 1) as f64).ln() / (eps_jl * eps_jl)).ceil() as u64)
    } else {
        None
    };
    Plan {
        method,
        epsilon,
        ln_eps_jl: ln_eps,
        ln_r,
        r,
        reference_norm: sup_norm,
    }
}

fn check_taylor_budget(error_bound: f64, epsilon: f64, sup_norm: f64) -> Result<()> {
    if !(error_bound <= epsilon / 2.0 * sup_norm) {
        return Err(Error::Argument(format!(
            "Taylor stage error bound {error_bound:e} exceeds (ε/2)‖f‖ = {:e}; \
             factorize with ε/2 = {} or smaller",
            epsilon / 2.0 * sup_norm,
            epsilon / 2.0
        )));
    }
    Ok(())
}

fn check_shape(x: &DenseMatrix, m: usize, n: usize) -> Result<()> {
    if x.shape() != (m, n) {
        return Err(Error::Dimension(format!(
            "reference matrix is {:?}, factors describe {m}x{n}",
            x.shape()
        )));
    }
    Ok(())
}

/// Projects the Taylor factors of `x` through one shared `Q` sized with
/// `ε_JL = (ε/2)/(C_u + C_v + 1 + ε/2)` and `m + n` points; succeeds when
/// `‖X − X̃‖_max ≤ ε‖f‖`.
pub fn theorem2_compress(
    fact: &TaylorFactorization,
    x: &DenseMatrix,
    epsilon: f64,
    seed: u64,
    opts: &CompressOptions,
) -> Result<CompressedApprox> {
    check_epsilon(epsilon)?;
    check_shape(x, fact.rows(), fact.cols())?;
    check_taylor_budget(fact.error_bound, epsilon, fact.sup_norm)?;
    let plan = lvm_plan(
        "theorem2",
        epsilon,
        fact.rows() + fact.cols(),
        fact.c_u,
        fact.c_v,
        fact.sup_norm,
    );
    project(plan, &fact.u_matrix, &fact.v_matrix, x, seed, opts)
}

/// Taylor factorization at `ε/2` followed by [`theorem2_compress`].
pub fn compress_lvm(
    spec: &LvmSpec,
    sample: &LatentSample,
    epsilon: f64,
    seed: u64,
    opts: &CompressOptions,
) -> Result<(TaylorFactorization, CompressedApprox)> {
    check_epsilon(epsilon)?;
    let fact = taylor_factorize(spec, sample, epsilon / 2.0)?;
    let x = generate_matrix(spec, sample)?;
    let approx = theorem2_compress(&fact, &x, epsilon, seed, opts)?;
    Ok((fact, approx))
}

/// [`theorem2_compress`] on block-concatenated piecewise factors, with
/// `C_u`, `C_v` summed over pieces.
pub fn theorem3_compress(
    pfact: &PiecewiseTaylorFactorization,
    x: &DenseMatrix,
    epsilon: f64,
    seed: u64,
    opts: &CompressOptions,
) -> Result<CompressedApprox> {
    check_epsilon(epsilon)?;
    check_shape(x, pfact.u_matrix.rows(), pfact.v_matrix.cols())?;
    check_taylor_budget(pfact.error_bound, epsilon, pfact.sup_norm)?;
    let plan = lvm_plan(
        "theorem3",
        epsilon,
        x.rows() + x.cols(),
        pfact.c_u,
        pfact.c_v,
        pfact.sup_norm,
    );
    project(plan, &pfact.u_matrix, &pfact.v_matrix, x, seed, opts)
}

/// Symmetric case `X_ij = f(α_i, α_j)`: the same pipeline as [`theorem2_compress`] with `β := α`
/// and `2n` points. Also records the error of the symmetrized `(Y + Yᵀ)/2`.
pub fn theorem4_compress(
    spec: &LvmSpec,
    alphas: &[Vec<f64>],
    epsilon: f64,
    seed: u64,
    opts: &CompressOptions,
) -> Result<CompressedApprox> {
    check_epsilon(epsilon)?;
    if alphas.is_empty() {
        return Err(Error::Argument("need at least one latent".into()));
    }
    let sample = LatentSample {
        alphas: alphas.to_vec(),
        betas: alphas.to_vec(),
        seed,
    };
    let fact = taylor_factorize(spec, &sample, epsilon / 2.0)?;
    let x = generate_symmetric_matrix(spec, alphas)?;
    let plan = lvm_plan(
        "theorem4",
        epsilon,
        2 * alphas.len(),
        fact.c_u,
        fact.c_v,
        fact.sup_norm,
    );
    let mut out = project(plan, &fact.u_matrix, &fact.v_matrix, &x, seed, opts)?;
    if x.is_symmetric() {
        let y = out.reconstruct()?;
        let yt = y.transpose();
        let sym = DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| 0.5 * (y.get(i, j) + yt.get(i, j)))?;
        out.symmetrized_max_error = Some(max_abs_diff(&x, &sym)?);
    }
    Ok(out)
}
