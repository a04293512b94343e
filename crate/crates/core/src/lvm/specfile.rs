//! Flat `key = value` spec files.
//!
//! ```text
//! # RBF kernel on the unit sphere
//! family = rbf
//! N = 2
//! R = 1
//! distribution = uniform_sphere
//! seed = 7
//! ```
//!
//! Optional keys `C`, `M` and `sup_norm` override the family defaults. The
//! `polynomial` family takes `poly_terms = coef:a1,..,aN:b1,..,bN; ...` and
//! `custom` takes `coefficients = a0, a1, ...` (for `Σ a_k (αᵀβ)^k`) and must
//! declare `sup_norm`. A piecewise file sets `pieces = P` and, per piece,
//! `piece.<l>.family`, the family keys above, and
//! `piece.<l>.alpha_box = lo..hi, lo..hi` / `piece.<l>.beta_box` (missing boxes
//! mean the whole cube). Unknown and repeated keys are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lvm::{
    Family, Interval, LatentBox, LatentDistribution, LvmSpec, Piece, PiecewiseLvmSpec, PolyTerm,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parsed `key = value` lines with their source locations.
#[derive(Debug, Clone)]
pub struct KeyValues {
    path: String,
    entries: Vec<Entry>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_string(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: i + 1,
                    message: format!("key `{key}` repeated (first on line {})", prev.line),
                });
            }
            entries.push(Entry {
                key,
                value: v.trim().to_string(),
                line: i + 1,
            });
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn error_at(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn missing(&self, key: &str) -> Error {
        self.error_at(0, format!("missing required key `{key}`"))
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| self.missing(key))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                self.error_at(e.line, format!("`{key}`: cannot parse `{}`", e.value))
            }),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key)?.ok_or_else(|| self.missing(key))
    }

    /// Comma-separated list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|_| {
                    self.error_at(e.line, format!("`{key}`: cannot parse list item `{}`", s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Rejects any key for which `allowed` returns false.
    pub fn check_keys(&self, allowed: impl Fn(&str) -> bool) -> Result<()> {
        match self.entries.iter().find(|e| !allowed(&e.key)) {
            Some(e) => Err(self.error_at(e.line, format!("unknown key `{}`", e.key))),
            None => Ok(()),
        }
    }
}

/// A spec file describes either one model or a piecewise model.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecDocument {
    Plain(LvmSpec),
    Piecewise(PiecewiseLvmSpec),
}

impl SpecDocument {
    pub fn latent_dim(&self) -> usize {
        match self {
            SpecDocument::Plain(s) => s.latent_dim(),
            SpecDocument::Piecewise(p) => p.latent_dim(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            SpecDocument::Plain(s) => s.sup_norm(),
            SpecDocument::Piecewise(p) => p.sup_norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSpec {
    pub document: SpecDocument,
    pub seed: Option<u64>,
}

const MODEL_KEYS: &[&str] = &["family", "C", "M", "sup_norm", "poly_terms", "coefficients"];
const SHARED_KEYS: &[&str] = &["N", "R", "distribution"];

/// Keys understood by [`spec_from_key_values`].
pub fn is_spec_key(key: &str) -> bool {
    if MODEL_KEYS.contains(&key) || SHARED_KEYS.contains(&key) || key == "pieces" {
        return true;
    }
    if let Some(rest) = key.strip_prefix("piece.") {
        if let Some((idx, field)) = rest.split_once('.') {
            return idx.parse::<usize>().is_ok()
                && (MODEL_KEYS.contains(&field) || field == "alpha_box" || field == "beta_box");
        }
    }
    false
}

pub fn parse_spec(text: &str, path: &str) -> Result<ParsedSpec> {
    let kv = KeyValues::parse(text, path)?;
    kv.check_keys(|k| is_spec_key(k) || k == "seed")?;
    Ok(ParsedSpec {
        document: spec_from_key_values(&kv)?,
        seed: kv.parse_value("seed")?,
    })
}

pub fn read_spec(path: impl AsRef<Path>) -> Result<ParsedSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text, &path.display().to_string())
}

/// Builds the model from already key-checked entries.
pub fn spec_from_key_values(kv: &KeyValues) -> Result<SpecDocument> {
    let n: usize = kv.parse_required("N")?;
    let r: f64 = kv.parse_required("R")?;
    let distribution = match kv.get("distribution") {
        None => LatentDistribution::UniformBall,
        Some(e) => parse_distribution(&e.value)
            .ok_or_else(|| kv.error_at(e.line, format!("unknown distribution `{}`", e.value)))?,
    };
    match kv.parse_value::<usize>("pieces")? {
        None => {
            if let Some(e) = kv.entries().iter().find(|e| e.key.starts_with("piece.")) {
                return Err(kv.error_at(e.line, "`piece.*` keys require `pieces`"));
            }
            let spec = model_from(kv, "", n, r)?.with_distribution(distribution)?;
            Ok(SpecDocument::Plain(spec))
        }
        Some(p) => {
            if let Some(e) = MODEL_KEYS.iter().find_map(|k| kv.get(k)) {
                return Err(kv.error_at(
                    e.line,
                    format!("`{}` must be given per piece in a piecewise spec", e.key),
                ));
            }
            if let Some(e) = kv.entries().iter().find(|e| {
                e.key
                    .strip_prefix("piece.")
                    .and_then(|rest| rest.split_once('.'))
                    .and_then(|(i, _)| i.parse::<usize>().ok())
                    .is_some_and(|i| i >= p)
            }) {
                return Err(kv.error_at(e.line, format!("`{}` is beyond pieces = {p}", e.key)));
            }
            let mut pieces = Vec::with_capacity(p);
            for l in 0..p {
                let prefix = format!("piece.{l}.");
                let spec = model_from(kv, &prefix, n, r)?;
                let alpha_box = box_from(kv, &format!("{prefix}alpha_box"), n, r)?;
                let beta_box = box_from(kv, &format!("{prefix}beta_box"), n, r)?;
                pieces.push(Piece {
                    spec,
                    alpha_box,
                    beta_box,
                });
            }
            Ok(SpecDocument::Piecewise(PiecewiseLvmSpec::new(pieces, distribution)?))
        }
    }
}

pub fn parse_distribution(s: &str) -> Option<LatentDistribution> {
    match s {
        "uniform_ball" => Some(LatentDistribution::UniformBall),
        "uniform_sphere" => Some(LatentDistribution::UniformSphere),
        "uniform_interval" => Some(LatentDistribution::UniformInterval),
        _ => None,
    }
}

fn model_from(kv: &KeyValues, prefix: &str, n: usize, r: f64) -> Result<LvmSpec> {
    let key = |k: &str| format!("{prefix}{k}");
    let fam = kv.require(&key("family"))?;
    let family = match fam.value.as_str() {
        "inner_product" => Family::InnerProduct,
        "rbf" => Family::RbfKernel,
        "polynomial" => {
            let e = kv.require(&key("poly_terms"))?;
            Family::Polynomial(parse_poly_terms(&e.value).map_err(|m| kv.error_at(e.line, m))?)
        }
        "custom" => {
            if kv.get(&key("sup_norm")).is_none() {
                return Err(kv.error_at(fam.line, "family `custom` must declare `sup_norm`"));
            }
            Family::DotProductSeries(kv.parse_list(&key("coefficients"))?.ok_or_else(|| {
                kv.error_at(fam.line, format!("family `custom` needs `{}`", key("coefficients")))
            })?)
        }
        other => return Err(kv.error_at(fam.line, format!("unknown family `{other}`"))),
    };
    for (k, wanted) in [("poly_terms", "polynomial"), ("coefficients", "custom")] {
        if let Some(e) = kv.get(&key(k)) {
            if fam.value != wanted {
                return Err(kv.error_at(e.line, format!("`{k}` only applies to family `{wanted}`")));
            }
        }
    }
    let mut spec = LvmSpec::new(family, n, r)?;
    let c = kv.parse_value::<f64>(&key("C"))?.unwrap_or(spec.c());
    let m = kv.parse_value::<f64>(&key("M"))?.unwrap_or(spec.m());
    spec = spec.with_niceness(c, m)?;
    if let Some(s) = kv.parse_value::<f64>(&key("sup_norm"))? {
        spec = spec.with_sup_norm(s)?;
    }
    Ok(spec)
}

fn box_from(kv: &KeyValues, key: &str, n: usize, r: f64) -> Result<LatentBox> {
    let Some(e) = kv.get(key) else {
        return Ok(LatentBox::full(n, r));
    };
    let intervals = e
        .value
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .trim()
                .split_once("..")
                .ok_or_else(|| kv.error_at(e.line, format!("expected `lo..hi`, got `{part}`")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| kv.error_at(e.line, format!("bad bound `{lo}`")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| kv.error_at(e.line, format!("bad bound `{hi}`")))?;
            Ok(Interval::new(lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    if intervals.len() != n {
        return Err(kv.error_at(
            e.line,
            format!("`{key}` has {} intervals, expected N = {n}", intervals.len()),
        ));
    }
    Ok(LatentBox::new(intervals))
}

/// `coef:a1,..,aN:b1,..,bN; ...`
pub fn parse_poly_terms(s: &str) -> std::result::Result<Vec<PolyTerm>, String> {
    let exps = |t: &str| -> std::result::Result<Vec<u32>, String> {
        t.split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|_| format!("bad exponent `{x}`")))
            .collect()
    };
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("term `{t}` is not `coef:alpha_exps:beta_exps`"));
            }
            let coef: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| format!("bad coefficient `{}`", parts[0]))?;
            Ok(PolyTerm::new(coef, exps(parts[1])?, exps(parts[2])?))
        })
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn write_model(out: &mut String, prefix: &str, spec: &LvmSpec) {
    let _ = writeln!(out, "{prefix}family = {}", spec.family().name());
    match spec.family() {
        Family::Polynomial(terms) => {
            let t: Vec<String> = terms
                .iter()
                .map(|t| format!("{}:{}:{}", t.coefficient, join(&t.alpha_exp), join(&t.beta_exp)))
                .collect();
            let _ = writeln!(out, "{prefix}poly_terms = {}", t.join("; "));
        }
        Family::DotProductSeries(a) => {
            let _ = writeln!(out, "{prefix}coefficients = {}", join(a));
        }
        _ => {}
    }
    let _ = writeln!(out, "{prefix}C = {}", spec.c());
    let _ = writeln!(out, "{prefix}M = {}", spec.m());
    let _ = writeln!(out, "{prefix}sup_norm = {}", spec.sup_norm());
}

/// Canonical text with every constant explicit; parses back to an equal spec.
pub fn spec_to_text(spec: &LvmSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "N = {}", spec.latent_dim());
    let _ = writeln!(out, "R = {}", spec.radius());
    let _ = writeln!(out, "distribution = {}", spec.distribution().name());
    write_model(&mut out, "", spec);
    out
}

pub fn piecewise_spec_to_text(spec: &PiecewiseLvmSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "N = {}", spec.latent_dim());
    let _ = writeln!(out, "R = {}", spec.radius());
    let _ = writeln!(out, "distribution = {}", spec.distribution().name());
    let _ = writeln!(out, "pieces = {}", spec.pieces().len());
    let boxes = |b: &LatentBox| {
        b.intervals
            .iter()
            .map(|iv| format!("{}..{}", iv.lo, iv.hi))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for (l, p) in spec.pieces().iter().enumerate() {
        let prefix = format!("piece.{l}.");
        write_model(&mut out, &prefix, &p.spec);
        let _ = writeln!(out, "{prefix}alpha_box = {}", boxes(&p.alpha_box));
        let _ = writeln!(out, "{prefix}beta_box = {}", boxes(&p.beta_box));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_rbf_with_defaults() {
        let text = "# comment\nfamily = rbf   # trailing\nN = 2\nR = 1\n\ndistribution = uniform_sphere\nseed = 42\n";
        let p = parse_spec(text, "t").unwrap();
        assert_eq!(p.seed, Some(42));
        let SpecDocument::Plain(s) = p.document else { panic!() };
        assert_eq!(s, LvmSpec::rbf(2, 1.0).unwrap().with_distribution(LatentDistribution::UniformSphere).unwrap());
    }

    #[test]
    fn polynomial_and_custom() {
        let text = "family = polynomial\nN = 1\nR = 2\npoly_terms = 1.5:0:3; -2:1:1\nM = 2\n";
        let SpecDocument::Plain(s) = parse_spec(text, "t").unwrap().document else { panic!() };
        assert_eq!(
            s.family(),
            &Family::Polynomial(vec![
                PolyTerm::new(1.5, vec![0], vec![3]),
                PolyTerm::new(-2.0, vec![1], vec![1])
            ])
        );
        assert_eq!(s.m(), 2.0);
        assert_eq!(s.c(), 1.0);

        let text = "family = custom\nN = 2\nR = 1\ncoefficients = 1, 1, 0.5\nsup_norm = 3\n";
        let SpecDocument::Plain(s) = parse_spec(text, "t").unwrap().document else { panic!() };
        assert_eq!(s.sup_norm(), 3.0);
        let missing = "family = custom\nN = 2\nR = 1\ncoefficients = 1\n";
        assert!(parse_spec(missing, "t").is_err());
    }

    #[test]
    fn strictness() {
        let err = parse_spec("family = rbf\nN = 1\nR = 1\nradius = 3\n", "spec.txt").unwrap_err();
        match err {
            Error::Parse { path, line, message } => {
                assert_eq!(path, "spec.txt");
                assert_eq!(line, 4);
                assert!(message.contains("radius"));
            }
            e => panic!("{e}"),
        }
        assert!(parse_spec("family = rbf\nN = 1\nN = 2\nR = 1\n", "t").is_err());
        assert!(parse_spec("family = rbf\nN = x\nR = 1\n", "t").is_err());
        assert!(parse_spec("family = rbf\nR = 1\n", "t").is_err());
        assert!(parse_spec("family = gauss\nN = 1\nR = 1\n", "t").is_err());
        assert!(parse_spec("family = rbf\nN = 1\nR = 1\npoly_terms = 1:0:1\n", "t").is_err());
        assert!(parse_spec("family = rbf N = 1\n", "t").is_err());
    }

    #[test]
    fn piecewise_round_trip() {
        let text = "\
N = 1
R = 1
pieces = 2
piece.0.family = polynomial
piece.0.poly_terms = 1:1:1
piece.0.alpha_box = -1..0
piece.1.family = rbf
piece.1.alpha_box = 0..1
";
        let p = parse_spec(text, "t").unwrap();
        let SpecDocument::Piecewise(pw) = &p.document else { panic!() };
        assert_eq!(pw.pieces().len(), 2);
        assert_eq!(pw.piece_of(&[-0.5], &[0.9]).unwrap(), 0);
        assert_eq!(pw.piece_of(&[0.0], &[0.9]).unwrap(), 1);
        let again = parse_spec(&piecewise_spec_to_text(pw), "t").unwrap();
        assert_eq!(again.document, p.document);

        assert!(parse_spec(&text.replace("pieces = 2", "pieces = 1"), "t").is_err());
        assert!(parse_spec(&format!("{text}family = rbf\n"), "t").is_err());
        assert!(parse_spec(&text.replace("0..1", "0.5..1"), "t").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let specs = [
            LvmSpec::rbf(3, 0.7).unwrap(),
            LvmSpec::inner_product(4, 2.0).unwrap().with_distribution(LatentDistribution::UniformSphere).unwrap(),
            LvmSpec::monomial(5, 1.3).unwrap().with_niceness(1.0, 5.0 / 1.3).unwrap(),
            LvmSpec::new(Family::DotProductSeries(vec![0.5, -1.0, 0.25]), 2, 1.0).unwrap(),
        ];
        for s in specs {
            let SpecDocument::Plain(back) = parse_spec(&spec_to_text(&s), "t").unwrap().document else {
                panic!()
            };
            assert_eq!(back, s);
        }
    }
}
