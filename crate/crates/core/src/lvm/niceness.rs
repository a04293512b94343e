//! Grid check of the derivative growth bound `|D^μ_β f(α, β)| ≤ C M^{|μ|} ‖f‖`.

use crate::error::{Error, Result};
use crate::lvm::{Family, LvmSpec};
use crate::matrix::dot;
use crate::special::hermite;
use crate::taylor::MultiIndexSet;

/// Largest `max_order` accepted by [`verify_niceness`].
pub const MAX_CHECK_ORDER: usize = 6;
/// Largest `N` accepted by [`verify_niceness`] (the grid is tensor-product).
pub const MAX_CHECK_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct NicenessReport {
    pub passed: bool,
    /// `max |D^μ f| / (C M^{|μ|} ‖f‖)` over the grid and all checked `μ`.
    pub worst_ratio: f64,
    pub worst_multi_index: Vec<u32>,
    pub worst_alpha: Vec<f64>,
    pub worst_beta: Vec<f64>,
    pub points_checked: usize,
}

fn falling(k: u32, s: u32) -> f64 {
    (0..s).map(|i| (k - i) as f64).product()
}

/// `D^μ_β f(α, β)` in closed form.
pub fn beta_derivative(spec: &LvmSpec, alpha: &[f64], beta: &[f64], mu: &[u32]) -> f64 {
    let order: u32 = mu.iter().sum();
    match spec.family() {
        Family::InnerProduct => match order {
            0 => dot(alpha, beta),
            1 => {
                let k = mu.iter().position(|&e| e == 1).unwrap();
                alpha[k]
            }
            _ => 0.0,
        },
        Family::RbfKernel => {
            // ∂ⁿ/∂βⁿ e^{−(β−a)²} = (−1)ⁿ Hₙ(β − a) e^{−(β−a)²}
            alpha
                .iter()
                .zip(beta)
                .zip(mu)
                .map(|((&a, &b), &e)| {
                    let x = b - a;
                    let h = hermite(x, e as usize)[e as usize];
                    let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
                    sign * h * (-x * x).exp()
                })
                .product()
        }
        Family::Polynomial(terms) => terms
            .iter()
            .map(|t| {
                if t.beta_exp.iter().zip(mu).any(|(&b, &e)| e > b) {
                    return 0.0;
                }
                let pa: f64 = alpha
                    .iter()
                    .zip(&t.alpha_exp)
                    .map(|(x, &e)| x.powi(e as i32))
                    .product();
                let pb: f64 = beta
                    .iter()
                    .zip(t.beta_exp.iter().zip(mu))
                    .map(|(x, (&b, &e))| falling(b, e) * x.powi((b - e) as i32))
                    .product();
                t.coefficient * pa * pb
            })
            .sum(),
        Family::DotProductSeries(a) => {
            // D^μ (αᵀβ)^k = k!/(k−|μ|)! · α^μ · (αᵀβ)^{k−|μ|}
            let t = dot(alpha, beta);
            let amu: f64 = alpha
                .iter()
                .zip(mu)
                .map(|(x, &e)| x.powi(e as i32))
                .product();
            a.iter()
                .enumerate()
                .filter(|(k, _)| *k as u32 >= order)
                .map(|(k, &c)| {
                    let k = k as u32;
                    c * falling(k, order) * amu * t.powi((k - order) as i32)
                })
                .sum()
        }
    }
}

/// Checks the bound on a tensor grid of `grid_points` values per coordinate of
/// `[−R, R]^N` (restricted to the ball) for both `α` and `β`, over every
/// `|μ| ≤ max_order`.
pub fn verify_niceness(
    spec: &LvmSpec,
    max_order: usize,
    grid_points: usize,
) -> Result<NicenessReport> {
    let n = spec.latent_dim();
    if n > MAX_CHECK_DIM || max_order > MAX_CHECK_ORDER {
        return Err(Error::Capability(format!(
            "niceness grid check supports N ≤ {MAX_CHECK_DIM} and order ≤ {MAX_CHECK_ORDER}, \
             got N = {n}, order = {max_order}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::Argument("need at least 2 grid points per axis".into()));
    }
    let r = spec.radius();
    let axis: Vec<f64> = (0..grid_points)
        .map(|i| -r + 2.0 * r * i as f64 / (grid_points - 1) as f64)
        .collect();
    let mut points = Vec::new();
    let total = grid_points.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        let p: Vec<f64> = (0..n)
            .map(|_| {
                let v = axis[rem % grid_points];
                rem /= grid_points;
                v
            })
            .collect();
        if dot(&p, &p).sqrt() <= r * (1.0 + 1e-12) {
            points.push(p);
        }
    }
    let indices = MultiIndexSet::enumerate(n, max_order)?;
    let mut report = NicenessReport {
        passed: true,
        worst_ratio: 0.0,
        worst_multi_index: vec![0; n],
        worst_alpha: points[0].clone(),
        worst_beta: points[0].clone(),
        points_checked: 0,
    };
    let (c, m, sup) = (spec.c(), spec.m(), spec.sup_norm());
    for a in &points {
        for b in &points {
            report.points_checked += 1;
            for mu in indices.iter() {
                let d = beta_derivative(spec, a, b, mu).abs();
                let order: u32 = mu.iter().sum();
                let bound = c * m.powi(order as i32) * sup;
                let ratio = if bound > 0.0 {
                    d / bound
                } else if d > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if ratio > report.worst_ratio {
                    report.worst_ratio = ratio;
                    report.worst_multi_index = mu.to_vec();
                    report.worst_alpha = a.clone();
                    report.worst_beta = b.clone();
                }
            }
        }
    }
    report.passed = report.worst_ratio <= 1.0;
    Ok(report)
}
