//! Piecewise models: finitely many nice models glued over a partition of the
//! latent product domain into axis-aligned boxes `A_ℓ × B_ℓ`.
//!
//! Intervals are half-open `[lo, hi)`, except that an upper end sitting on the
//! domain edge `R` is closed, so each point of `[−R, R]^N × [−R, R]^N` lies in
//! exactly one cell.

use crate::error::{Error, Result};
use crate::lvm::{LatentDistribution, LatentSample, LvmSpec, SUPPORT_SLACK};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn contains(&self, x: f64, radius: f64) -> bool {
        let slack = radius * SUPPORT_SLACK;
        let lower_ok = if self.lo <= -radius { x >= -radius - slack } else { x >= self.lo };
        let upper_ok = if self.hi >= radius { x <= radius + slack } else { x < self.hi };
        lower_ok && upper_ok
    }

    fn clipped(&self, radius: f64) -> (f64, f64) {
        (self.lo.max(-radius), self.hi.min(radius))
    }
}

/// Product of per-coordinate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBox {
    pub intervals: Vec<Interval>,
}

impl LatentBox {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    /// `[−R, R]^N`.
    pub fn full(latent_dim: usize, radius: f64) -> Self {
        Self::new(vec![Interval::new(-radius, radius); latent_dim])
    }

    pub fn contains(&self, x: &[f64], radius: f64) -> bool {
        self.intervals.len() == x.len()
            && self.intervals.iter().zip(x).all(|(iv, &v)| iv.contains(v, radius))
    }

    fn volume(&self, radius: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| {
                let (lo, hi) = iv.clipped(radius);
                (hi - lo).max(0.0)
            })
            .product()
    }

    fn overlaps(&self, other: &LatentBox, radius: f64) -> bool {
        self.intervals.iter().zip(&other.intervals).all(|(a, b)| {
            let (alo, ahi) = a.clipped(radius);
            let (blo, bhi) = b.clipped(radius);
            alo.max(blo) < ahi.min(bhi)
        })
    }
}

/// One cell `A_ℓ × B_ℓ` and the nice model `f_ℓ` that applies on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub spec: LvmSpec,
    pub alpha_box: LatentBox,
    pub beta_box: LatentBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLvmSpec {
    latent_dim: usize,
    radius: f64,
    distribution: LatentDistribution,
    pieces: Vec<Piece>,
}

impl PiecewiseLvmSpec {
    /// Validates that the cells tile `[−R, R]^{2N}`: pairwise disjoint with
    /// volumes summing to the whole cube.
    pub fn new(pieces: Vec<Piece>, distribution: LatentDistribution) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::Partition("at least one piece is required".into()))?;
        let (n, r) = (first.spec.latent_dim(), first.spec.radius());
        for (l, p) in pieces.iter().enumerate() {
            if p.spec.latent_dim() != n || p.spec.radius() != r {
                return Err(Error::Partition(format!(
                    "piece {l} has (N, R) = ({}, {}), expected ({n}, {r})",
                    p.spec.latent_dim(),
                    p.spec.radius()
                )));
            }
            for (name, b) in [("alpha", &p.alpha_box), ("beta", &p.beta_box)] {
                if b.intervals.len() != n {
                    return Err(Error::Partition(format!(
                        "piece {l} {name} box has {} intervals, expected {n}",
                        b.intervals.len()
                    )));
                }
                if let Some(iv) = b.intervals.iter().find(|iv| !(iv.lo < iv.hi)) {
                    return Err(Error::Partition(format!(
                        "piece {l} {name} box has empty interval [{}, {})",
                        iv.lo, iv.hi
                    )));
                }
            }
        }
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                let (pa, pb) = (&pieces[a], &pieces[b]);
                if pa.alpha_box.overlaps(&pb.alpha_box, r) && pa.beta_box.overlaps(&pb.beta_box, r)
                {
                    return Err(Error::Partition(format!("pieces {a} and {b} overlap")));
                }
            }
        }
        let total: f64 = pieces
            .iter()
            .map(|p| p.alpha_box.volume(r) * p.beta_box.volume(r))
            .sum();
        let cube = (2.0 * r).powi(2 * n as i32);
        if (total - cube).abs() > 1e-9 * cube {
            return Err(Error::Partition(format!(
                "cells cover volume {total}, the latent domain has volume {cube}"
            )));
        }
        let distribution = if distribution == LatentDistribution::UniformInterval && n != 1 {
            return Err(Error::Argument("uniform_interval latents require N = 1".into()));
        } else {
            distribution
        };
        Ok(Self {
            latent_dim: n,
            radius: r,
            distribution,
            pieces,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distribution(&self) -> LatentDistribution {
        self.distribution
    }

    /// `‖f‖ = max_ℓ ‖f_ℓ‖`.
    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().map(|p| p.spec.sup_norm()).fold(0.0, f64::max)
    }

    /// Spec used for sampling latents (first piece with this distribution).
    pub fn sampling_spec(&self) -> LvmSpec {
        self.pieces[0]
            .spec
            .clone()
            .with_distribution(self.distribution)
            .expect("distribution validated at construction")
    }

    pub fn sample_latents(&self, m: usize, n: usize, seed: u64) -> Result<LatentSample> {
        crate::lvm::sample_latents(&self.sampling_spec(), m, n, seed)
    }

    /// The unique `ℓ` with `(α, β) ∈ A_ℓ × B_ℓ`.
    pub fn piece_of(&self, alpha: &[f64], beta: &[f64]) -> Result<usize> {
        let mut found = None;
        for (l, p) in self.pieces.iter().enumerate() {
            if p.alpha_box.contains(alpha, self.radius) && p.beta_box.contains(beta, self.radius) {
                if let Some(prev) = found {
                    return Err(Error::Partition(format!(
                        "point (α = {alpha:?}, β = {beta:?}) claimed by pieces {prev} and {l}"
                    )));
                }
                found = Some(l);
            }
        }
        found.ok_or_else(|| {
            Error::Partition(format!(
                "no piece claims (α = {alpha:?}, β = {beta:?})"
            ))
        })
    }

    /// Pieces whose α-box contains `alpha`.
    pub fn alpha_pieces(&self, alpha: &[f64]) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&l| self.pieces[l].alpha_box.contains(alpha, self.radius))
            .collect()
    }

    /// Pieces whose β-box contains `beta`.
    pub fn beta_pieces(&self, beta: &[f64]) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&l| self.pieces[l].beta_box.contains(beta, self.radius))
            .collect()
    }

    pub fn evaluate_entry(&self, alpha: &[f64], beta: &[f64]) -> Result<f64> {
        let l = self.piece_of(alpha, beta)?;
        crate::lvm::evaluate_entry(&self.pieces[l].spec, alpha, beta)
    }
}

/// `X_ij = f_{ℓ_ij}(α_i, β_j)`.
pub fn generate_piecewise_matrix(
    spec: &PiecewiseLvmSpec,
    sample: &LatentSample,
) -> Result<DenseMatrix> {
    DenseMatrix::try_from_fn(sample.rows(), sample.cols(), |i, j| {
        spec.evaluate_entry(&sample.alphas[i], &sample.betas[j])
    })
}
