//! Latent variable models: `X_ij = f(α_i, β_j)` with latents drawn from a
//! distribution supported on the closed ball `B_R ⊂ ℝ^N`.

mod niceness;
mod piecewise;
pub mod specfile;

pub use niceness::{beta_derivative, verify_niceness, NicenessReport};
pub use piecewise::{
    generate_piecewise_matrix, Interval, LatentBox, Piece, PiecewiseLvmSpec,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq, DenseMatrix};
use crate::rng::{standard_normal, stream, StreamRole};

/// Relative slack when checking `‖α‖ ≤ R`; normalizing onto the sphere can
/// land one ulp outside.
pub const SUPPORT_SLACK: f64 = 1e-12;

/// One monomial `coefficient · α^alpha_exp · β^beta_exp`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coefficient: f64,
    pub alpha_exp: Vec<u32>,
    pub beta_exp: Vec<u32>,
}

impl PolyTerm {
    pub fn new(coefficient: f64, alpha_exp: Vec<u32>, beta_exp: Vec<u32>) -> Self {
        Self {
            coefficient,
            alpha_exp,
            beta_exp,
        }
    }

    pub fn degree(&self) -> u32 {
        self.alpha_exp.iter().sum::<u32>() + self.beta_exp.iter().sum::<u32>()
    }

    pub fn beta_degree(&self) -> u32 {
        self.beta_exp.iter().sum()
    }

    fn eval(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let pa: f64 = alpha
            .iter()
            .zip(&self.alpha_exp)
            .map(|(x, &e)| x.powi(e as i32))
            .product();
        let pb: f64 = beta
            .iter()
            .zip(&self.beta_exp)
            .map(|(x, &e)| x.powi(e as i32))
            .product();
        self.coefficient * pa * pb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `f(α, β) = αᵀβ`.
    InnerProduct,
    /// Sum of [`PolyTerm`]s in the `2N` coordinates of `(α, β)`.
    Polynomial(Vec<PolyTerm>),
    /// `f(α, β) = exp(−‖α − β‖²)`.
    RbfKernel,
    /// Dot-product kernel with user coefficients:
    /// `f(α, β) = Σ_k a_k (αᵀβ)^k`. Its sup norm must be declared.
    DotProductSeries(Vec<f64>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::InnerProduct => "inner_product",
            Family::Polynomial(_) => "polynomial",
            Family::RbfKernel => "rbf",
            Family::DotProductSeries(_) => "custom",
        }
    }

    /// Degree in β when `f(α, ·)` is a polynomial, so its Taylor series at 0
    /// terminates.
    pub fn beta_degree(&self) -> Option<usize> {
        match self {
            Family::InnerProduct => Some(1),
            Family::Polynomial(terms) => {
                Some(terms.iter().map(|t| t.beta_degree() as usize).max().unwrap_or(0))
            }
            Family::RbfKernel => None,
            Family::DotProductSeries(a) => Some(a.len().saturating_sub(1)),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Family::InnerProduct | Family::RbfKernel | Family::DotProductSeries(_) => true,
            Family::Polynomial(terms) => terms.iter().all(|t| {
                terms.iter().any(|s| {
                    s.alpha_exp == t.beta_exp
                        && s.beta_exp == t.alpha_exp
                        && s.coefficient == t.coefficient
                })
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentDistribution {
    /// Uniform in the ball of radius `R`.
    UniformBall,
    /// Uniform on the sphere of radius `R`.
    UniformSphere,
    /// Uniform on `[−R, R]`; requires `N = 1`.
    UniformInterval,
}

impl LatentDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            LatentDistribution::UniformBall => "uniform_ball",
            LatentDistribution::UniformSphere => "uniform_sphere",
            LatentDistribution::UniformInterval => "uniform_interval",
        }
    }
}

/// A nice latent variable model with parameters `(N, R, C, M)` and `‖f‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct LvmSpec {
    family: Family,
    latent_dim: usize,
    radius: f64,
    c: f64,
    m: f64,
    sup_norm: f64,
    distribution: LatentDistribution,
}

impl LvmSpec {
    /// Spec with the analytic defaults for `C`, `M` and `‖f‖` of `family` and
    /// uniform-ball latents.
    ///
    /// Defaults: inner product `C = M = 1`, `‖f‖ = R²`; RBF `C = N(4R)^N`,
    /// `M = 4R` (with `R` floored at 1/2), `‖f‖ = 1`; polynomial and
    /// dot-product series `C = 1`, `M = d/R` for β-degree `d`, and `‖f‖` bounded
    /// by `Σ|coefficient|·R^degree`.
    pub fn new(family: Family, latent_dim: usize, radius: f64) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::Argument("latent dimension N must be at least 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Argument(format!("radius must be positive, got {radius}")));
        }
        let n = latent_dim as f64;
        let (c, m, sup_norm) = match &family {
            Family::InnerProduct => (1.0, 1.0, radius * radius),
            Family::RbfKernel => {
                let r = radius.max(0.5);
                (n * (4.0 * r).powf(n), 4.0 * r, 1.0)
            }
            Family::Polynomial(terms) => {
                for t in terms {
                    if t.alpha_exp.len() != latent_dim || t.beta_exp.len() != latent_dim {
                        return Err(Error::Argument(format!(
                            "polynomial term exponents must have length N = {latent_dim}"
                        )));
                    }
                    if !t.coefficient.is_finite() {
                        return Err(Error::Argument("non-finite polynomial coefficient".into()));
                    }
                }
                let d = family.beta_degree().unwrap_or(0).max(1) as f64;
                let sup: f64 = terms
                    .iter()
                    .map(|t| t.coefficient.abs() * radius.powi(t.degree() as i32))
                    .sum();
                (1.0, d / radius, sup)
            }
            Family::DotProductSeries(a) => {
                if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Argument(
                        "dot-product series needs finite coefficients".into(),
                    ));
                }
                let d = a.len().saturating_sub(1).max(1) as f64;
                let sup: f64 = a
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v.abs() * radius.powi(2 * k as i32))
                    .sum();
                (1.0, d / radius, sup)
            }
        };
        if !(sup_norm >= 0.0) || !sup_norm.is_finite() {
            return Err(Error::Argument(format!("‖f‖ bound {sup_norm} is not finite")));
        }
        Ok(Self {
            family,
            latent_dim,
            radius,
            c,
            m,
            sup_norm,
            distribution: LatentDistribution::UniformBall,
        })
    }

    pub fn rbf(latent_dim: usize, radius: f64) -> Result<Self> {
        Self::new(Family::RbfKernel, latent_dim, radius)
    }

    pub fn inner_product(latent_dim: usize, radius: f64) -> Result<Self> {
        Self::new(Family::InnerProduct, latent_dim, radius)
    }

    /// `f(α, β) = β^d` with `N = 1`.
    pub fn monomial(degree: u32, radius: f64) -> Result<Self> {
        Self::new(
            Family::Polynomial(vec![PolyTerm::new(1.0, vec![0], vec![degree])]),
            1,
            radius,
        )
    }

    pub fn with_distribution(mut self, distribution: LatentDistribution) -> Result<Self> {
        if distribution == LatentDistribution::UniformInterval && self.latent_dim != 1 {
            return Err(Error::Argument(
                "uniform_interval latents require N = 1".into(),
            ));
        }
        self.distribution = distribution;
        Ok(self)
    }

    pub fn with_niceness(mut self, c: f64, m: f64) -> Result<Self> {
        if !(c >= 0.0) || !(m >= 0.0) || m.is_infinite() {
            return Err(Error::Argument(format!(
                "niceness constants must satisfy C ≥ 0, M ≥ 0, got C = {c}, M = {m}"
            )));
        }
        self.c = c;
        self.m = m;
        Ok(self)
    }

    /// Declares `‖f‖`. Rejected when smaller than the largest `|f|` seen on a
    /// deterministic probe set of the domain.
    pub fn with_sup_norm(mut self, sup_norm: f64) -> Result<Self> {
        if !(sup_norm >= 0.0) || !sup_norm.is_finite() {
            return Err(Error::Argument(format!(
                "sup norm must be nonnegative and finite, got {sup_norm}"
            )));
        }
        let observed = self.observed_sup();
        if sup_norm < observed * (1.0 - 1e-12) {
            return Err(Error::Argument(format!(
                "declared ‖f‖ = {sup_norm} is below the observed sup {observed}"
            )));
        }
        self.sup_norm = sup_norm;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn distribution(&self) -> LatentDistribution {
        self.distribution
    }

    /// `f(α, β)` without domain checks.
    #[inline]
    pub fn eval_unchecked(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        match &self.family {
            Family::InnerProduct => dot(alpha, beta),
            Family::RbfKernel => {
                let d2: f64 = alpha.iter().zip(beta).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2).exp()
            }
            Family::Polynomial(terms) => terms.iter().map(|t| t.eval(alpha, beta)).sum(),
            Family::DotProductSeries(a) => {
                let t = dot(alpha, beta);
                a.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
        }
    }

    pub(crate) fn check_latent(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.latent_dim {
            return Err(Error::Dimension(format!(
                "{what} has dimension {}, model has N = {}",
                x.len(),
                self.latent_dim
            )));
        }
        let norm = norm_sq(x).sqrt();
        if !(norm <= self.radius * (1.0 + SUPPORT_SLACK)) {
            return Err(Error::Domain(format!(
                "‖{what}‖ = {norm} exceeds R = {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Largest `|f|` over a deterministic probe set: a 1-D sweep of `αᵀβ` for
    /// dot-product kernels, otherwise corners, axes and random ball points.
    fn observed_sup(&self) -> f64 {
        let r = self.radius;
        if let Family::DotProductSeries(a) = &self.family {
            let steps = 10_000;
            return (0..=steps)
                .map(|i| {
                    let t = -r * r + 2.0 * r * r * i as f64 / steps as f64;
                    a.iter().rev().fold(0.0, |acc, &c| acc * t + c).abs()
                })
                .fold(0.0, f64::max);
        }
        let n = self.latent_dim;
        let mut probes: Vec<Vec<f64>> = vec![vec![0.0; n]];
        for k in 0..n.min(8) {
            for s in [-r, r] {
                let mut e = vec![0.0; n];
                e[k] = s;
                probes.push(e);
            }
        }
        for i in 0..64 {
            let mut rng = stream(0x5eed, StreamRole::Grid, i);
            probes.push(sample_vector(LatentDistribution::UniformBall, n, r, &mut rng));
            probes.push(sample_vector(LatentDistribution::UniformSphere, n, r, &mut rng));
        }
        let mut sup = 0.0_f64;
        for a in &probes {
            for b in &probes {
                sup = sup.max(self.eval_unchecked(a, b).abs());
            }
        }
        sup
    }
}

/// Checked `f(α, β)`.
pub fn evaluate_entry(spec: &LvmSpec, alpha: &[f64], beta: &[f64]) -> Result<f64> {
    spec.check_latent(alpha, "alpha")?;
    spec.check_latent(beta, "beta")?;
    Ok(spec.eval_unchecked(alpha, beta))
}

/// Row and column latents for one matrix draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub alphas: Vec<Vec<f64>>,
    pub betas: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LatentSample {
    pub fn rows(&self) -> usize {
        self.alphas.len()
    }

    pub fn cols(&self) -> usize {
        self.betas.len()
    }
}

pub(crate) fn sample_vector(
    dist: LatentDistribution,
    n: usize,
    radius: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    match dist {
        LatentDistribution::UniformInterval => {
            (0..n).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect()
        }
        LatentDistribution::UniformSphere | LatentDistribution::UniformBall => {
            let dir = loop {
                let v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
                let norm = norm_sq(&v).sqrt();
                if norm > 0.0 {
                    break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
                }
            };
            let scale = match dist {
                LatentDistribution::UniformSphere => radius,
                _ => radius * rng.random::<f64>().powf(1.0 / n as f64),
            };
            dir.into_iter().map(|x| x * scale).collect()
        }
    }
}

/// `count` latents for `role`; vector `i` depends only on `(seed, role, i)`.
pub fn sample_role(spec: &LvmSpec, role: StreamRole, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, role, i as u64);
            sample_vector(spec.distribution, spec.latent_dim, spec.radius, &mut rng)
        })
        .collect()
}

pub fn sample_latents(spec: &LvmSpec, m: usize, n: usize, seed: u64) -> Result<LatentSample> {
    if m == 0 || n == 0 {
        return Err(Error::Argument(format!("need m, n ≥ 1, got {m}x{n}")));
    }
    Ok(LatentSample {
        alphas: sample_role(spec, StreamRole::Alpha, m, seed),
        betas: sample_role(spec, StreamRole::Beta, n, seed),
        seed,
    })
}

/// `X_ij = f(α_i, β_j)`.
pub fn generate_matrix(spec: &LvmSpec, sample: &LatentSample) -> Result<DenseMatrix> {
    for a in &sample.alphas {
        spec.check_latent(a, "alpha")?;
    }
    for b in &sample.betas {
        spec.check_latent(b, "beta")?;
    }
    DenseMatrix::from_fn(sample.rows(), sample.cols(), |i, j| {
        spec.eval_unchecked(&sample.alphas[i], &sample.betas[j])
    })
}

/// `X_ij = f(α_i, α_j)`. Only the upper triangle is evaluated when `f` is
/// symmetric, so the output is exactly symmetric.
pub fn generate_symmetric_matrix(spec: &LvmSpec, alphas: &[Vec<f64>]) -> Result<DenseMatrix> {
    for a in alphas {
        spec.check_latent(a, "alpha")?;
    }
    let n = alphas.len();
    if !spec.family.is_symmetric() {
        return DenseMatrix::from_fn(n, n, |i, j| spec.eval_unchecked(&alphas[i], &alphas[j]));
    }
    let upper = DenseMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            spec.eval_unchecked(&alphas[i], &alphas[j])
        } else {
            0.0
        }
    })?;
    DenseMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            upper.get(i, j)
        } else {
            upper.get(j, i)
        }
    })
}
