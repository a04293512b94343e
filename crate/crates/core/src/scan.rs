//! The rank-scaling experiment: for square RBF-type matrices of growing size,
//! record the `μ_r` rank upper bound at several tolerances.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lvm::specfile::{is_spec_key, spec_from_key_values, KeyValues, SpecDocument};
use crate::lvm::{generate_matrix, sample_latents, LatentDistribution, LvmSpec};
use crate::rank::rank_eps_upper_bounds;
use crate::rng::derive_seed;
use crate::svd::svd;

pub const CSV_HEADER: &str = "epsilon,n,draw,rank_upper_bound,wall_time_seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub spec: LvmSpec,
    pub epsilons: Vec<f64>,
    pub n_values: Vec<usize>,
    pub draws_per_cell: usize,
    pub master_seed: u64,
}

impl ScanConfig {
    pub fn new(
        spec: LvmSpec,
        mut epsilons: Vec<f64>,
        mut n_values: Vec<usize>,
        draws_per_cell: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if epsilons.is_empty() || n_values.is_empty() {
            return Err(Error::Argument("scan needs at least one epsilon and one n".into()));
        }
        if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::Argument(format!("epsilon {e} must be positive")));
        }
        if n_values.contains(&0) {
            return Err(Error::Argument("matrix sizes must be positive".into()));
        }
        if draws_per_cell == 0 {
            return Err(Error::Argument("draws per cell must be at least 1".into()));
        }
        epsilons.sort_by(f64::total_cmp);
        epsilons.dedup();
        n_values.sort_unstable();
        n_values.dedup();
        Ok(Self {
            spec,
            epsilons,
            n_values,
            draws_per_cell,
            master_seed,
        })
    }

    /// RBF on the unit sphere in `N = 100`, `ε ∈ {0.03, 0.01}`,
    /// `n ∈ {100, 300, 500, 1000, 1500}`, five draws.
    pub fn desk_scale(master_seed: u64) -> Self {
        Self::new(
            unit_sphere_rbf(100),
            vec![0.03, 0.01],
            vec![100, 300, 500, 1000, 1500],
            5,
            master_seed,
        )
        .expect("valid preset")
    }

    /// `N = 1000`, `n` up to 3000, `ε` down to `1e-4`.
    pub fn full_scale(master_seed: u64) -> Self {
        Self::new(
            unit_sphere_rbf(1000),
            vec![0.1, 0.03, 0.01, 0.003, 0.001, 1e-4],
            vec![100, 300, 1000, 2000, 3000],
            5,
            master_seed,
        )
        .expect("valid preset")
    }

    /// Spec-file keys plus `epsilons`, `n_values` (comma lists), `draws` and
    /// `master_seed`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(|k| {
            matches!(k, "epsilons" | "n_values" | "draws" | "master_seed")
                || (is_spec_key(k) && k != "pieces" && !k.starts_with("piece."))
        })?;
        let spec = match spec_from_key_values(kv)? {
            SpecDocument::Plain(s) => s,
            SpecDocument::Piecewise(_) => unreachable!("piece keys rejected above"),
        };
        let epsilons = kv
            .parse_list::<f64>("epsilons")?
            .ok_or_else(|| kv.error_at(0, "missing required key `epsilons`"))?;
        let n_values = kv
            .parse_list::<usize>("n_values")?
            .ok_or_else(|| kv.error_at(0, "missing required key `n_values`"))?;
        let draws = kv.parse_value::<usize>("draws")?.unwrap_or(5);
        let seed = kv.parse_value::<u64>("master_seed")?.unwrap_or(0);
        Self::new(spec, epsilons, n_values, draws, seed).map_err(|e| kv.error_at(0, e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    /// Seed of draw `draw` at size index `n_index`. The tolerance is not part
    /// of the key, so every `ε` of a cell sees the same matrix.
    pub fn draw_seed(&self, n_index: usize, draw: usize) -> u64 {
        derive_seed(self.master_seed, &[n_index as u64, draw as u64])
    }
}

fn unit_sphere_rbf(n: usize) -> LvmSpec {
    LvmSpec::rbf(n, 1.0)
        .and_then(|s| s.with_distribution(LatentDistribution::UniformSphere))
        .expect("valid preset")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub epsilon: f64,
    pub n: usize,
    /// `None` for the per-cell maximum row.
    pub draw: Option<usize>,
    pub rank_upper_bound: usize,
    pub wall_time_seconds: f64,
}

/// Runs every `(n, draw)` draw in parallel. Each draw generates one matrix and
/// one SVD and reads off the bound for every `ε`. Rows are sorted by
/// `(ε, n, draw)` and each cell is followed by its maximum row.
pub fn run_scan(config: &ScanConfig) -> Result<Vec<ScanRecord>> {
    let jobs: Vec<(usize, usize)> = (0..config.n_values.len())
        .flat_map(|ni| (0..config.draws_per_cell).map(move |d| (ni, d)))
        .collect();
    let results: Vec<(usize, usize, Vec<usize>, f64)> = jobs
        .par_iter()
        .map(|&(ni, d)| {
            let n = config.n_values[ni];
            let start = Instant::now();
            let cell = || -> Result<Vec<usize>> {
                let sample = sample_latents(&config.spec, n, n, config.draw_seed(ni, d))?;
                let x = generate_matrix(&config.spec, &sample)?;
                let s = svd(&x)?;
                rank_eps_upper_bounds(&x, &s, &config.epsilons)
            };
            let ranks = cell().map_err(|e| {
                Error::Numerical(format!("scan cell n = {n}, draw = {d} failed: {e}"))
            })?;
            Ok((ni, d, ranks, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (ei, &epsilon) in config.epsilons.iter().enumerate() {
        for (ni, &n) in config.n_values.iter().enumerate() {
            let mut cell: Vec<&(usize, usize, Vec<usize>, f64)> =
                results.iter().filter(|r| r.0 == ni).collect();
            cell.sort_by_key(|r| r.1);
            for r in &cell {
                rows.push(ScanRecord {
                    epsilon,
                    n,
                    draw: Some(r.1),
                    rank_upper_bound: r.2[ei],
                    wall_time_seconds: r.3,
                });
            }
            rows.push(ScanRecord {
                epsilon,
                n,
                draw: None,
                rank_upper_bound: cell.iter().map(|r| r.2[ei]).max().unwrap_or(0),
                wall_time_seconds: cell.iter().map(|r| r.3).fold(0.0, f64::max),
            });
        }
    }
    Ok(rows)
}

/// Per-cell maxima `(ε, n, max rank)`.
pub fn cell_maxima(records: &[ScanRecord]) -> Vec<(f64, usize, usize)> {
    records
        .iter()
        .filter(|r| r.draw.is_none())
        .map(|r| (r.epsilon, r.n, r.rank_upper_bound))
        .collect()
}

pub fn scan_to_csv(records: &[ScanRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let draw = r.draw.map_or("max".to_string(), |d| d.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.epsilon, r.n, draw, r.rank_upper_bound, r.wall_time_seconds
        );
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of the per-cell maxima against `n` (log axis), one line per `ε`.
pub fn scan_to_svg(records: &[ScanRecord]) -> String {
    let (w, h) = (900.0, 600.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 70.0);
    let maxima = cell_maxima(records);
    let mut eps: Vec<f64> = maxima.iter().map(|m| m.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let ns: Vec<f64> = maxima.iter().map(|m| m.1 as f64).collect();
    let (nmin, nmax) = ns
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &n| (a.min(n), b.max(n)));
    let (lmin, lmax) = if nmin < nmax {
        (nmin.log10(), nmax.log10())
    } else {
        (nmin.log10() - 0.5, nmin.log10() + 0.5)
    };
    let ymax = maxima.iter().map(|m| m.2).max().unwrap_or(1).max(1) as f64 * 1.1;
    let px = |n: f64| left + (n.log10() - lmin) / (lmax - lmin) * (w - left - right);
    let py = |r: f64| h - bottom - r / ymax * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (left, w - right, h - bottom, top);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for &n in &ns {
        let x = px(n);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{n}</text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
    }
    for t in 0..=5 {
        let r = ymax / 1.1 * t as f64 / 5.0;
        let y = py(r);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            r
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#,
        (x0 + x1) / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">rank upper bound</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (k, &e) in eps.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts: Vec<(usize, usize)> = maxima
            .iter()
            .filter(|m| m.0 == e)
            .map(|m| (m.1, m.2))
            .collect();
        pts.sort_unstable();
        let path: Vec<String> = pts
            .iter()
            .map(|&(n, r)| format!("{:.1},{:.1}", px(n as f64), py(r as f64)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for p in &path {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 20.0 * k as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">ε = {e}</text>"#,
            x1 + 20.0,
            x1 + 45.0,
            x1 + 52.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
