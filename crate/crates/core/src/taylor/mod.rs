//! Bounded-rank factorization `X̂ = UV` from the multivariate Taylor expansion
//! of `f(α, ·)` about `β = 0`.
//!
//! With `s = √‖f‖`, the factor entries are
//! `(u_i)_μ = D^μ f(α_i, 0) / (√μ! · s)` and `(v_j)_μ = s · β_j^μ / √μ!`
//! for `|μ| ≤ K`, so `u_iᵀ v_j` is the degree-`K` Taylor polynomial.

mod constants;
mod multi_index;
mod piecewise;

pub use constants::{compute_cu, compute_cv, SeriesConstant, MAX_SERIES_TERMS};
pub use multi_index::{loose_count_bound, multi_index_count, MultiIndexSet, MAX_MULTI_INDEX_ENTRIES};
pub use piecewise::{taylor_factorize_piecewise, PiecewiseTaylorFactorization};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix, Metadata};
use crate::lvm::specfile::spec_to_text;
use crate::lvm::{generate_matrix, Family, LatentSample, LvmSpec};
use crate::matrix::{max_abs_diff, DenseMatrix};
use crate::special::{ln_factorials, scaled_hermite, scaled_powers};

/// Largest factorization width accepted.
pub const MAX_N_TILDE: u64 = 1_000_000;
/// Largest total number of factor entries `(m + n) · Ñ` accepted.
pub const MAX_FACTOR_ENTRIES: u64 = 1 << 28;

/// `K = max(1, ⌈max(2e·N·R·M, log₂(C/ε))⌉)`.
pub fn select_truncation_order(spec: &LvmSpec, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    let n = spec.latent_dim() as f64;
    let growth = 2.0 * std::f64::consts::E * n * spec.radius() * spec.m();
    let accuracy = (spec.c() / epsilon).log2();
    let k = growth.max(accuracy).ceil().max(1.0);
    if !(k < 1e9) {
        return Err(Error::Capacity(format!("truncation order {k} is not representable")));
    }
    Ok(k as usize)
}

/// The order actually expanded to: families that are polynomial in `β` of
/// degree `d` are exact at order `d`, so `min(K, d)` is used for them.
pub fn effective_order(spec: &LvmSpec, k: usize) -> usize {
    match spec.family().beta_degree() {
        Some(d) => k.min(d),
        None => k,
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TaylorFactorization {
    /// `m × Ñ`, row `i` is `u_iᵀ`.
    pub u_matrix: DenseMatrix,
    /// `Ñ × n`, column `j` is `v_j`.
    pub v_matrix: DenseMatrix,
    /// Order expanded to.
    pub k: usize,
    /// Order from the selection formula (equal to `k` unless the family is a
    /// low-degree polynomial in `β`).
    pub k_selected: usize,
    pub n_tilde: usize,
    /// Target accuracy, when built from one.
    pub epsilon: Option<f64>,
    /// Certified `‖X − UV‖_max` bound: `ε‖f‖` when built from `ε` (and checked
    /// against the measured error), otherwise the measured error itself.
    pub error_bound: f64,
    /// Measured `‖X − UV‖_max` against direct evaluation.
    pub achieved_error: f64,
    pub c_u: SeriesConstant,
    pub c_v: SeriesConstant,
    pub sup_norm: f64,
    /// SHA-256 of the canonical spec text.
    pub spec_hash: String,
}

impl TaylorFactorization {
    pub fn rows(&self) -> usize {
        self.u_matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.v_matrix.cols()
    }

    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        self.u_matrix.matmul(&self.v_matrix)
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("kind", "taylor")
            .insert("k", self.k)
            .insert("k_selected", self.k_selected)
            .insert("n_tilde", self.n_tilde)
            .insert(
                "epsilon",
                self.epsilon.map_or("none".to_string(), |e| e.to_string()),
            )
            .insert("error_bound", self.error_bound)
            .insert("achieved_error", self.achieved_error)
            .insert("c_u", self.c_u.value())
            .insert("ln_c_u", self.c_u.ln)
            .insert("c_v", self.c_v.value())
            .insert("ln_c_v", self.c_v.ln)
            .insert("sup_norm", self.sup_norm)
            .insert("spec_hash", &self.spec_hash);
        m
    }

    /// Writes `<prefix>.u.epsr`, `<prefix>.v.epsr` and `<prefix>.meta`.
    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let [u, v, meta] = sidecar_paths(prefix.as_ref());
        write_matrix(&self.u_matrix, u)?;
        write_matrix(&self.v_matrix, v)?;
        self.metadata().write(meta)
    }

    pub fn load(prefix: impl AsRef<Path>) -> Result<Self> {
        let [u, v, meta_path] = sidecar_paths(prefix.as_ref());
        let u_matrix = read_matrix(&u)?;
        let v_matrix = read_matrix(&v)?;
        let meta = Metadata::read(&meta_path)?;
        let field = |key: &str| -> Result<&str> {
            meta.get(key).ok_or_else(|| Error::Parse {
                path: meta_path.display().to_string(),
                line: 0,
                message: format!("missing `{key}`"),
            })
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?.parse().map_err(|_| Error::Parse {
                path: meta_path.display().to_string(),
                line: 0,
                message: format!("bad value for `{key}`"),
            })
        };
        let n_tilde = num("n_tilde")? as usize;
        if u_matrix.cols() != n_tilde || v_matrix.rows() != n_tilde {
            return Err(Error::Dimension(format!(
                "factor shapes {:?}, {:?} disagree with n_tilde = {n_tilde}",
                u_matrix.shape(),
                v_matrix.shape()
            )));
        }
        let epsilon = match field("epsilon")? {
            "none" => None,
            _ => Some(num("epsilon")?),
        };
        Ok(Self {
            k: num("k")? as usize,
            k_selected: num("k_selected")? as usize,
            n_tilde,
            epsilon,
            error_bound: num("error_bound")?,
            achieved_error: num("achieved_error")?,
            c_u: SeriesConstant { ln: num("ln_c_u")?, terms: 0 },
            c_v: SeriesConstant { ln: num("ln_c_v")?, terms: 0 },
            sup_norm: num("sup_norm")?,
            spec_hash: field("spec_hash")?.to_string(),
            u_matrix,
            v_matrix,
        })
    }
}

/// `<prefix>.u.epsr`, `<prefix>.v.epsr`, `<prefix>.meta`.
pub fn sidecar_paths(prefix: &Path) -> [PathBuf; 3] {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [with(".u.epsr"), with(".v.epsr"), with(".meta")]
}

pub fn spec_hash(spec: &LvmSpec) -> String {
    hex_digest(spec_to_text(spec).as_bytes())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Factorization at the order selected for `epsilon`, certified by comparing
/// against direct evaluation: a measured error above `ε‖f‖` is reported as an
/// internal consistency failure.
pub fn taylor_factorize(
    spec: &LvmSpec,
    sample: &LatentSample,
    epsilon: f64,
) -> Result<TaylorFactorization> {
    let k_selected = select_truncation_order(spec, epsilon)?;
    let mut fact = build(spec, sample, effective_order(spec, k_selected))?;
    fact.k_selected = k_selected;
    let bound = epsilon * spec.sup_norm();
    if !(fact.achieved_error <= bound) {
        return Err(Error::InternalConsistency(format!(
            "order-{} expansion of the {} model has max error {:e} > ε‖f‖ = {bound:e}; \
             the declared niceness constants do not hold for these latents",
            fact.k,
            spec.family().name(),
            fact.achieved_error
        )));
    }
    fact.epsilon = Some(epsilon);
    fact.error_bound = bound;
    Ok(fact)
}

/// Factorization at a fixed order `k`; `error_bound` is the measured error.
pub fn taylor_factorize_with_order(
    spec: &LvmSpec,
    sample: &LatentSample,
    k: usize,
) -> Result<TaylorFactorization> {
    build(spec, sample, k)
}

fn build(spec: &LvmSpec, sample: &LatentSample, k: usize) -> Result<TaylorFactorization> {
    let n = spec.latent_dim();
    let (rows, cols) = (sample.rows(), sample.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::Argument("empty latent sample".into()));
    }
    let width = multi_index_count(n, k).unwrap_or(u64::MAX);
    if width > MAX_N_TILDE {
        return Err(Error::Capacity(format!(
            "Taylor width Ñ = binomial({}, {k}) = {} exceeds {MAX_N_TILDE}",
            n + k,
            if width == u64::MAX { ">2^64".to_string() } else { width.to_string() }
        )));
    }
    if width.saturating_mul((rows + cols) as u64) > MAX_FACTOR_ENTRIES {
        return Err(Error::Capacity(format!(
            "factors with Ñ = {width} for a {rows}x{cols} matrix exceed {MAX_FACTOR_ENTRIES} entries"
        )));
    }
    let c_u = compute_cu(spec)?;
    let c_v = compute_cv(spec)?;
    let idx = MultiIndexSet::enumerate(n, k)?;
    let w = idx.len();
    let scale = if spec.sup_norm() > 0.0 { spec.sup_norm().sqrt() } else { 1.0 };
    let coeffs = UCoefficients::new(spec, &idx)?;

    for a in &sample.alphas {
        spec.check_latent(a, "alpha")?;
    }
    for b in &sample.betas {
        spec.check_latent(b, "beta")?;
    }
    let mut u = vec![0.0; rows * w];
    u.par_chunks_mut(w).zip(&sample.alphas).for_each(|(row, a)| {
        coeffs.fill(a, row);
        row.iter_mut().for_each(|x| *x /= scale);
    });
    let mut vt = vec![0.0; cols * w];
    vt.par_chunks_mut(w).zip(&sample.betas).for_each(|(row, b)| {
        fill_v(&idx, b, row);
        row.iter_mut().for_each(|x| *x *= scale);
    });
    let u_matrix = DenseMatrix::from_vec(rows, w, u)?;
    let v_matrix = DenseMatrix::from_vec(cols, w, vt)?.transpose();

    let x = generate_matrix(spec, sample)?;
    let achieved_error = max_abs_diff(&x, &u_matrix.matmul(&v_matrix)?)?;
    Ok(TaylorFactorization {
        u_matrix,
        v_matrix,
        k,
        k_selected: k,
        n_tilde: w,
        epsilon: None,
        error_bound: achieved_error,
        achieved_error,
        c_u,
        c_v,
        sup_norm: spec.sup_norm(),
        spec_hash: spec_hash(spec),
    })
}

/// `β^μ / √μ!` for every `μ`.
fn fill_v(idx: &MultiIndexSet, beta: &[f64], out: &mut [f64]) {
    let k = idx.max_degree();
    let tables: Vec<Vec<f64>> = beta.iter().map(|&b| scaled_powers(b, k)).collect();
    for (o, mu) in out.iter_mut().zip(idx.iter()) {
        *o = mu
            .iter()
            .zip(&tables)
            .map(|(&e, t)| t[e as usize])
            .product();
    }
}

/// Per-family source of `D^μ f(α, 0) / √μ!`.
enum UCoefficients<'a> {
    InnerProduct {
        unit_pos: Vec<Option<usize>>,
    },
    Rbf {
        idx: &'a MultiIndexSet,
    },
    Polynomial {
        /// `(position of β-exponent, coefficient · √(b!), α-exponent)`
        terms: Vec<(usize, f64, Vec<u32>)>,
    },
    DotSeries {
        idx: &'a MultiIndexSet,
        /// `ln(|a_k| k!)` and sign of `a_k`
        weights: Vec<(f64, f64)>,
        ln_fact: Vec<f64>,
    },
}

impl<'a> UCoefficients<'a> {
    fn new(spec: &LvmSpec, idx: &'a MultiIndexSet) -> Result<Self> {
        let n = idx.dim();
        let k = idx.max_degree();
        Ok(match spec.family() {
            Family::InnerProduct => UCoefficients::InnerProduct {
                unit_pos: (0..n)
                    .map(|c| {
                        let mut e = vec![0u32; n];
                        e[c] = 1;
                        idx.index_of(&e)
                    })
                    .collect(),
            },
            Family::RbfKernel => UCoefficients::Rbf { idx },
            Family::Polynomial(terms) => {
                let lf = ln_factorials(terms.iter().map(|t| t.beta_degree() as usize).max().unwrap_or(0));
                UCoefficients::Polynomial {
                    terms: terms
                        .iter()
                        .filter_map(|t| {
                            let pos = idx.index_of(&t.beta_exp)?;
                            let ln_bfact: f64 = t.beta_exp.iter().map(|&e| lf[e as usize]).sum();
                            Some((pos, t.coefficient * (0.5 * ln_bfact).exp(), t.alpha_exp.clone()))
                        })
                        .collect(),
                }
            }
            Family::DotProductSeries(a) => {
                let lf = ln_factorials(k.max(a.len()));
                UCoefficients::DotSeries {
                    idx,
                    weights: a
                        .iter()
                        .enumerate()
                        .map(|(d, &c)| (c.abs().ln() + lf[d], c.signum()))
                        .collect(),
                    ln_fact: lf,
                }
            }
        })
    }

    fn fill(&self, alpha: &[f64], out: &mut [f64]) {
        match self {
            UCoefficients::InnerProduct { unit_pos } => {
                out.fill(0.0);
                for (c, p) in unit_pos.iter().enumerate() {
                    if let Some(p) = p {
                        out[*p] = alpha[c];
                    }
                }
            }
            UCoefficients::Rbf { idx } => {
                // D^μ_β e^{−‖α−β‖²} at β = 0 is e^{−‖α‖²} Π_k H_{μ_k}(α_k)
                let k = idx.max_degree();
                let tables: Vec<Vec<f64>> = alpha.iter().map(|&a| scaled_hermite(a, k)).collect();
                let damp = (-alpha.iter().map(|a| a * a).sum::<f64>()).exp();
                for (o, mu) in out.iter_mut().zip(idx.iter()) {
                    *o = damp
                        * mu
                            .iter()
                            .zip(&tables)
                            .map(|(&e, t)| t[e as usize])
                            .product::<f64>();
                }
            }
            UCoefficients::Polynomial { terms } => {
                out.fill(0.0);
                for (pos, coef, aexp) in terms {
                    let pa: f64 = alpha
                        .iter()
                        .zip(aexp)
                        .map(|(x, &e)| x.powi(e as i32))
                        .product();
                    out[*pos] += coef * pa;
                }
            }
            UCoefficients::DotSeries {
                idx,
                weights,
                ln_fact,
            } => {
                // coefficient of β^μ in a_k (αᵀβ)^k is a_k k!/μ! α^μ, k = |μ|
                for (o, mu) in out.iter_mut().zip(idx.iter()) {
                    let d = mu.iter().sum::<u32>() as usize;
                    *o = match weights.get(d) {
                        Some(&(ln_w, sign)) if sign != 0.0 => {
                            let ln_mu: f64 = mu.iter().map(|&e| ln_fact[e as usize]).sum();
                            let pa: f64 = alpha
                                .iter()
                                .zip(mu)
                                .map(|(x, &e)| x.powi(e as i32))
                                .product();
                            sign * (ln_w - 0.5 * ln_mu).exp() * pa
                        }
                        _ => 0.0,
                    };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvm::{sample_latents, LatentDistribution, PolyTerm};
    use crate::matrix::norm_sq;
    use crate::svd::svd;

    #[test]
    fn truncation_order_examples() {
        let unit = LvmSpec::inner_product(1, 1.0).unwrap();
        assert_eq!(select_truncation_order(&unit, 2f64.powi(-10)).unwrap(), 10);
        let two = LvmSpec::inner_product(2, 1.0).unwrap();
        assert_eq!(select_truncation_order(&two, 0.5).unwrap(), 11);
        let small = LvmSpec::inner_product(1, 0.1).unwrap().with_niceness(0.01, 1.0).unwrap();
        assert_eq!(select_truncation_order(&small, 0.5).unwrap(), 1);
        let mid = LvmSpec::inner_product(1, 0.5).unwrap().with_niceness(0.1, 1.0).unwrap();
        // 2e·0.5 = 2.718…, log₂(0.1/0.5) < 0
        assert_eq!(select_truncation_order(&mid, 0.5).unwrap(), 3);
        assert!(select_truncation_order(&unit, 1.0).is_err());
        assert!(select_truncation_order(&unit, 0.0).is_err());
    }

    #[test]
    fn inner_product_is_exact() {
        for n in [1, 3, 20] {
            let spec = LvmSpec::inner_product(n, 1.5).unwrap();
            let s = sample_latents(&spec, 17, 13, 2).unwrap();
            let f = taylor_factorize(&spec, &s, 0.3).unwrap();
            assert_eq!(f.k, 1);
            assert_eq!(f.n_tilde, n + 1);
            assert!(f.achieved_error <= 1e-12, "{}", f.achieved_error);
        }
    }

    #[test]
    fn monomial_is_exact() {
        for d in 1..=8 {
            let spec = LvmSpec::monomial(d, 1.0).unwrap();
            let s = sample_latents(&spec, 12, 12, d as u64).unwrap();
            let f = taylor_factorize(&spec, &s, 0.01).unwrap();
            assert_eq!(f.k, d as usize);
            assert!(f.k_selected >= d as usize);
            assert!(f.achieved_error <= 1e-12);
        }
    }

    #[test]
    fn rbf_one_dimensional_meets_tolerance() {
        let spec = LvmSpec::rbf(1, 1.0).unwrap();
        let s = sample_latents(&spec, 30, 30, 77).unwrap();
        let f = taylor_factorize(&spec, &s, 1e-3).unwrap();
        assert!(f.achieved_error <= 1e-3);
        let x = generate_matrix(&spec, &s).unwrap();
        let xh = f.reconstruct().unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let direct = crate::lvm::evaluate_entry(&spec, &s.alphas[i], &s.betas[j]).unwrap();
                assert_eq!(direct, x.get(i, j));
                assert!((direct - xh.get(i, j)).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn factor_norms_respect_series_constants() {
        let specs = [
            LvmSpec::rbf(1, 1.0).unwrap(),
            LvmSpec::rbf(2, 0.8).unwrap(),
            LvmSpec::inner_product(3, 2.0).unwrap(),
            LvmSpec::monomial(4, 1.5).unwrap(),
            LvmSpec::new(Family::DotProductSeries(vec![1.0, -0.5, 0.25]), 2, 1.0).unwrap(),
        ];
        for spec in specs {
            let s = sample_latents(&spec, 20, 20, 3).unwrap();
            let f = taylor_factorize(&spec, &s, 0.01).unwrap();
            let ln_f = spec.sup_norm().ln();
            for i in 0..20 {
                let nu = norm_sq(f.u_matrix.row(i));
                let nv = norm_sq(&f.v_matrix.column(i));
                assert!(nu.ln() <= f.c_u.ln + ln_f, "{} u", spec.family().name());
                assert!(nv.ln() <= f.c_v.ln + ln_f, "{} v", spec.family().name());
            }
        }
    }

    #[test]
    fn dot_series_and_general_polynomial() {
        let spec = LvmSpec::new(Family::DotProductSeries(vec![0.3, 1.0, -0.5, 0.2]), 3, 1.0).unwrap();
        let s = sample_latents(&spec, 25, 20, 9).unwrap();
        let f = taylor_factorize(&spec, &s, 0.1).unwrap();
        assert_eq!(f.k, 3);
        assert!(f.achieved_error <= 1e-12);

        let poly = LvmSpec::new(
            Family::Polynomial(vec![
                PolyTerm::new(0.7, vec![2, 0], vec![1, 2]),
                PolyTerm::new(-1.1, vec![0, 1], vec![0, 0]),
                PolyTerm::new(0.4, vec![1, 1], vec![3, 0]),
            ]),
            2,
            1.0,
        )
        .unwrap();
        let s = sample_latents(&poly, 25, 20, 9).unwrap();
        let f = taylor_factorize(&poly, &s, 0.1).unwrap();
        assert!(f.achieved_error <= 1e-12);
    }

    #[test]
    fn rank_is_at_most_width() {
        let spec = LvmSpec::rbf(1, 0.3).unwrap();
        let s = sample_latents(&spec, 60, 60, 4).unwrap();
        let f = taylor_factorize_with_order(&spec, &s, 5).unwrap();
        assert_eq!(f.n_tilde, 6);
        let sv = svd(&f.reconstruct().unwrap()).unwrap().singular_values;
        assert!(sv[6] <= 1e-10 * sv[0]);
    }

    #[test]
    fn error_shrinks_with_order() {
        let spec = LvmSpec::rbf(2, 1.0).unwrap();
        let s = sample_latents(&spec, 30, 30, 5).unwrap();
        let errs: Vec<f64> = (4..=20)
            .map(|k| taylor_factorize_with_order(&spec, &s, k).unwrap().achieved_error)
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{errs:?}");
        }
    }

    #[test]
    fn bad_constants_trip_the_consistency_check() {
        let spec = LvmSpec::rbf(1, 1.0).unwrap().with_niceness(0.01, 0.05).unwrap();
        let s = sample_latents(&spec, 10, 10, 1).unwrap();
        assert!(matches!(
            taylor_factorize(&spec, &s, 0.01),
            Err(Error::InternalConsistency(_))
        ));
    }

    #[test]
    fn capacity_guard() {
        let spec = LvmSpec::rbf(12, 1.0).unwrap();
        let s = sample_latents(&spec, 3, 3, 1).unwrap();
        assert!(matches!(taylor_factorize(&spec, &s, 0.1), Err(Error::Capacity(_))));
    }

    #[test]
    fn zero_function_factorizes() {
        let spec = LvmSpec::new(Family::Polynomial(vec![PolyTerm::new(0.0, vec![0], vec![0])]), 1, 1.0)
            .unwrap()
            .with_distribution(LatentDistribution::UniformInterval)
            .unwrap();
        let s = sample_latents(&spec, 4, 4, 1).unwrap();
        let f = taylor_factorize(&spec, &s, 0.5).unwrap();
        assert_eq!(f.achieved_error, 0.0);
    }

    #[test]
    fn sidecar_round_trip() {
        let spec = LvmSpec::rbf(1, 1.0).unwrap();
        let s = sample_latents(&spec, 5, 6, 1).unwrap();
        let f = taylor_factorize(&spec, &s, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("fact");
        f.save(&prefix).unwrap();
        let g = TaylorFactorization::load(&prefix).unwrap();
        assert_eq!(g.u_matrix, f.u_matrix);
        assert_eq!(g.v_matrix, f.v_matrix);
        assert_eq!(g.k, f.k);
        assert_eq!(g.error_bound, f.error_bound);
        assert_eq!(g.c_u.ln, f.c_u.ln);
        assert_eq!(g.spec_hash, f.spec_hash);
        assert_eq!(g.spec_hash.len(), 64);
        assert_ne!(spec_hash(&LvmSpec::rbf(2, 1.0).unwrap()), f.spec_hash);
    }
}
