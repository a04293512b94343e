//! Upper bounds for the factor-norm constants
//! `C_v = Σ_s (N+s)^N R^{2s} / s!` and
//! `C_u = Σ_s (N+s)^N C² M^{2s} / ⌊s/N⌋!`, summed in log space.

use crate::error::{Error, Result};
use crate::lvm::LvmSpec;
use crate::special::{log_add_exp, LogSum};

/// Series terms summed before giving up.
pub const MAX_SERIES_TERMS: usize = 1_000_000;

/// Terms below `sum · e^{-TAIL_LN_GAP}` are treated as the tail.
const TAIL_LN_GAP: f64 = 40.0;

/// A series bound kept as its logarithm, since it can overflow `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConstant {
    /// `ln` of the bound; `-inf` for an exact zero.
    pub ln: f64,
    /// Terms summed explicitly before the tail bound was added.
    pub terms: usize,
}

impl SeriesConstant {
    pub fn zero() -> Self {
        Self {
            ln: f64::NEG_INFINITY,
            terms: 0,
        }
    }

    /// `exp(ln)`, possibly `+inf`.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn add(self, other: SeriesConstant) -> SeriesConstant {
        SeriesConstant {
            ln: log_add_exp(self.ln, other.ln),
            terms: self.terms + other.terms,
        }
    }
}

fn not_converged(what: &str) -> Error {
    Error::Numerical(format!(
        "{what} series did not reach its tail within {MAX_SERIES_TERMS} terms"
    ))
}

/// `C_v`. The term ratio `((N+s+1)/(N+s))^N R² / (s+1)` decreases in `s`, so
/// once it is below 1/2 the remaining tail is at most twice the next term.
pub fn compute_cv(spec: &LvmSpec) -> Result<SeriesConstant> {
    let n = spec.latent_dim() as f64;
    let ln_r2 = 2.0 * spec.radius().ln();
    let ln_term = |s: f64, ln_fact: f64| n * (n + s).ln() + s * ln_r2 - ln_fact;
    let mut sum = LogSum::default();
    let mut ln_fact = 0.0;
    for s in 0..MAX_SERIES_TERMS {
        let sf = s as f64;
        sum.add(ln_term(sf, ln_fact));
        let ln_fact_next = ln_fact + (sf + 1.0).ln();
        let ln_next = ln_term(sf + 1.0, ln_fact_next);
        let ln_ratio = n * ((n + sf + 1.0) / (n + sf)).ln() + ln_r2 - (sf + 1.0).ln();
        if ln_ratio < -std::f64::consts::LN_2 && ln_next < sum.ln() - TAIL_LN_GAP {
            sum.add(std::f64::consts::LN_2 + ln_next);
            return Ok(SeriesConstant {
                ln: sum.ln(),
                terms: s + 1,
            });
        }
        ln_fact = ln_fact_next;
    }
    Err(not_converged("C_v"))
}

/// `C_u`. Terms are grouped in blocks `s ∈ [qN, qN+N)` sharing `⌊s/N⌋ = q`;
/// each block is bounded by `b_q = N (qN+2N−1)^N C² max(M^{2qN}, M^{2(qN+N−1)}) / q!`,
/// whose ratio decreases in `q`, and the tail after block `q` is at most
/// `2 b_{q+1}` once that ratio is below 1/2.
pub fn compute_cu(spec: &LvmSpec) -> Result<SeriesConstant> {
    let nu = spec.latent_dim();
    let n = nu as f64;
    let (c, m) = (spec.c(), spec.m());
    if c == 0.0 {
        return Ok(SeriesConstant::zero());
    }
    let ln_c2 = 2.0 * c.ln();
    if m == 0.0 {
        // only s = 0 survives: N^N C²
        return Ok(SeriesConstant {
            ln: n * n.ln() + ln_c2,
            terms: 1,
        });
    }
    let ln_m2 = 2.0 * m.ln();
    let ln_block_bound = |q: f64, ln_qfact: f64| {
        let top = q * n + 2.0 * n - 1.0;
        let ln_pow = (q * n * ln_m2).max((q * n + n - 1.0) * ln_m2);
        n.ln() + n * top.ln() + ln_c2 + ln_pow - ln_qfact
    };
    let mut sum = LogSum::default();
    let mut ln_qfact = 0.0;
    let mut terms = 0usize;
    let mut q = 0usize;
    while terms < MAX_SERIES_TERMS {
        let qf = q as f64;
        for s in q * nu..(q + 1) * nu {
            let sf = s as f64;
            sum.add(n * (n + sf).ln() + ln_c2 + sf * ln_m2 - ln_qfact);
        }
        terms += nu;
        let ln_qfact_next = ln_qfact + (qf + 1.0).ln();
        let ln_next = ln_block_bound(qf + 1.0, ln_qfact_next);
        let ln_ratio = ln_next - ln_block_bound(qf, ln_qfact);
        if ln_ratio < -std::f64::consts::LN_2 && ln_next < sum.ln() - TAIL_LN_GAP {
            sum.add(std::f64::consts::LN_2 + ln_next);
            return Ok(SeriesConstant { ln: sum.ln(), terms });
        }
        ln_qfact = ln_qfact_next;
        q += 1;
    }
    Err(not_converged("C_u"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn cv_examples() {
        let tiny = compute_cv(&LvmSpec::inner_product(1, 1e-9).unwrap()).unwrap();
        assert!(tiny.value() >= 1.0 && tiny.value() <= 1.0 + 1e-9);

        let v = compute_cv(&LvmSpec::rbf(1, 1.0).unwrap()).unwrap().value();
        assert!(v >= 2.0 * E && rel(v, 2.0 * E) < 1e-14);

        // Σ (2+s)²/s! = (2 + 4 + 4)e
        let v = compute_cv(&LvmSpec::rbf(2, 1.0).unwrap()).unwrap().value();
        assert!(v >= 10.0 * E && rel(v, 10.0 * E) < 1e-14);
    }

    #[test]
    fn cu_examples() {
        let base = LvmSpec::inner_product(1, 1.0).unwrap();
        assert_eq!(compute_cu(&base.clone().with_niceness(0.0, 3.0).unwrap()).unwrap().value(), 0.0);
        let one = compute_cu(&base.clone().with_niceness(1.0, 0.0).unwrap()).unwrap().value();
        assert!((one - 1.0).abs() < 1e-15);
        let v = compute_cu(&base.with_niceness(1.0, 1.0).unwrap()).unwrap().value();
        assert!(v >= 2.0 * E && rel(v, 2.0 * E) < 1e-14);
    }

    #[test]
    fn large_constants_stay_finite_in_log_space() {
        let cu = compute_cu(&LvmSpec::rbf(3, 1.0).unwrap()).unwrap();
        assert!(cu.ln.is_finite() && cu.ln > 700.0);
        assert!(cu.value().is_infinite());
        let cv = compute_cv(&LvmSpec::inner_product(500, 1.0).unwrap()).unwrap();
        assert!(cv.ln.is_finite());
    }

    #[test]
    fn sums_add_in_log_space() {
        let a = SeriesConstant { ln: 2f64.ln(), terms: 3 };
        let b = SeriesConstant { ln: 3f64.ln(), terms: 4 };
        let s = a.add(b);
        assert!((s.value() - 5.0).abs() < 1e-14);
        assert_eq!(s.terms, 7);
        assert_eq!(a.add(SeriesConstant::zero()).value(), a.value());
    }
}
