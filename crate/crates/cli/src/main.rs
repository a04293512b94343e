use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logrank::io::Metadata;
use logrank::lvm::sample_role;
use logrank::lvm::specfile::{read_spec, SpecDocument};
use logrank::rng::StreamRole;
use logrank::scan::{cell_maxima, scan_to_csv, scan_to_svg};
use logrank::taylor::sidecar_paths;
use logrank::{
    compress_lvm, generate_matrix, generate_piecewise_matrix, generate_symmetric_matrix, max_abs_norm, rank_eps_upper_bound,
    read_matrix, run_scan, sample_latents, spectral_norm, taylor_factorize,
    taylor_factorize_piecewise, theorem0_compress, theorem3_compress, theorem4_compress,
    write_matrix, CompressOptions, CompressedApprox, DenseMatrix, Error, ScanConfig,
};

#[derive(Parser)]
#[command(name = "logrank", version, about = "Entrywise low-rank approximation of latent variable model matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample latents and write X_ij = f(α_i, β_j) as an EPSR file.
    Generate(GenerateArgs),
    /// Smallest r with ‖X − [X]_r‖_max ≤ ε, plus the μ-curve as CSV.
    Rankbound(RankboundArgs),
    /// Build an explicit low-rank approximation and write its factors.
    Approx(ApproxArgs),
    /// Rank upper bounds over a grid of ε and n.
    Scan(ScanArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Overrides the spec's `seed` key (default 0).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankboundArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    epsilon: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Theorem0,
    Taylor,
    Theorem2,
    Theorem3,
    Theorem4,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    spec: Option<PathBuf>,
    /// Input matrix; theorem0 only.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix for the factor files and metadata sidecar.
    #[arg(long)]
    out: PathBuf,
    /// Rows when sampling from a spec (and the size for theorem4).
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = logrank::jl::DEFAULT_MAX_RETRIES)]
    max_retries: usize,
    /// Project to this rank instead of the sufficient one.
    #[arg(long)]
    rank: Option<usize>,
}

#[derive(Args)]
struct ScanArgs {
    /// Scan config; defaults to the desk-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run the N = 1000, n ≤ 3000 preset instead of the desk-scale one.
    #[arg(long, conflicts_with = "config")]
    full_scale: bool,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_)
        | Error::Argument(_)
        | Error::Format { .. }
        | Error::Domain(_)
        | Error::Partition(_)
        | Error::Parse { .. }
        | Error::Io { .. } => 2,
        Error::Numerical(_) | Error::ProbabilisticFailure { .. } | Error::InternalConsistency(_) => 3,
        Error::Capability(_) | Error::Capacity(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Rankbound(a) => rankbound(a),
        Command::Approx(a) => approx(a),
        Command::Scan(a) => scan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn generate(a: GenerateArgs) -> Result<(), Error> {
    let parsed = read_spec(&a.spec)?;
    let seed = a.seed.or(parsed.seed).unwrap_or(0);
    let x = match &parsed.document {
        SpecDocument::Plain(spec) => generate_matrix(spec, &sample_latents(spec, a.m, a.n, seed)?)?,
        SpecDocument::Piecewise(spec) => {
            generate_piecewise_matrix(spec, &spec.sample_latents(a.m, a.n, seed)?)?
        }
    };
    write_matrix(&x, &a.out)?;
    println!("rows={}", x.rows());
    println!("cols={}", x.cols());
    println!("seed={seed}");
    println!("max_norm={}", max_abs_norm(&x));
    println!("spectral_norm={}", spectral_norm(&x)?);
    println!("out={}", a.out.display());
    Ok(())
}

fn rankbound(a: RankboundArgs) -> Result<(), Error> {
    let x = read_matrix(&a.matrix)?;
    let res = rank_eps_upper_bound(&x, a.epsilon)?;
    println!("rows={}", x.rows());
    println!("cols={}", x.cols());
    println!("epsilon={}", a.epsilon);
    println!("rank_upper_bound={}", res.rank_upper_bound);
    println!("r,mu_r");
    for (r, mu) in res.mu_curve.iter().enumerate() {
        println!("{r},{mu}");
    }
    Ok(())
}

fn approx(a: ApproxArgs) -> Result<(), Error> {
    let opts = CompressOptions {
        max_retries: a.max_retries,
        rank_override: a.rank,
    };
    if let Some(path) = &a.matrix {
        if !matches!(a.method, Method::Theorem0) {
            return Err(Error::Argument(
                "--matrix input is only accepted by --method theorem0; the others need --spec".into(),
            ));
        }
        let x = read_matrix(path)?;
        let out = theorem0_compress(&x, a.epsilon, a.seed.unwrap_or(0), &opts)?;
        return finish_compressed(&out, &x, &a.out);
    }
    let parsed = read_spec(a.spec.as_ref().expect("clap requires --spec or --matrix"))?;
    let seed = a.seed.or(parsed.seed).unwrap_or(0);
    match (a.method, &parsed.document) {
        (Method::Theorem0, SpecDocument::Plain(spec)) => {
            let x = generate_matrix(spec, &sample_latents(spec, a.m, a.n, seed)?)?;
            let out = theorem0_compress(&x, a.epsilon, seed, &opts)?;
            finish_compressed(&out, &x, &a.out)
        }
        (Method::Theorem0, SpecDocument::Piecewise(spec)) => {
            let x = generate_piecewise_matrix(spec, &spec.sample_latents(a.m, a.n, seed)?)?;
            let out = theorem0_compress(&x, a.epsilon, seed, &opts)?;
            finish_compressed(&out, &x, &a.out)
        }
        (Method::Taylor, SpecDocument::Plain(spec)) => {
            let sample = sample_latents(spec, a.m, a.n, seed)?;
            let fact = taylor_factorize(spec, &sample, a.epsilon)?;
            fact.save(&a.out)?;
            println!("method=taylor");
            println!("rows={}", fact.rows());
            println!("cols={}", fact.cols());
            println!("rank={}", fact.n_tilde);
            println!("k={}", fact.k);
            println!("achieved_max_error={}", fact.achieved_error);
            println!("target_error={}", fact.error_bound);
            println!("retries=0");
            println!("nontrivial={}", fact.n_tilde < fact.rows().min(fact.cols()));
            print_paths(&sidecar_paths(&a.out));
            Ok(())
        }
        (Method::Taylor, SpecDocument::Piecewise(spec)) => {
            let sample = spec.sample_latents(a.m, a.n, seed)?;
            let pf = taylor_factorize_piecewise(spec, &sample, a.epsilon)?;
            let paths = sidecar_paths(&a.out);
            write_matrix(&pf.u_matrix, &paths[0])?;
            write_matrix(&pf.v_matrix, &paths[1])?;
            let mut meta = Metadata::new();
            meta.insert("kind", "piecewise_taylor")
                .insert("pieces", pf.pieces.len())
                .insert("n_tilde", pf.n_tilde())
                .insert("epsilon", pf.epsilon)
                .insert("error_bound", pf.error_bound)
                .insert("achieved_error", pf.achieved_error)
                .insert("block_mismatch", pf.block_mismatch);
            meta.write(&paths[2])?;
            println!("method=taylor");
            println!("rows={}", pf.u_matrix.rows());
            println!("cols={}", pf.v_matrix.cols());
            println!("rank={}", pf.n_tilde());
            println!("pieces={}", pf.pieces.len());
            println!("achieved_max_error={}", pf.achieved_error);
            println!("target_error={}", pf.error_bound);
            println!("retries=0");
            println!("nontrivial={}", pf.n_tilde() < a.m.min(a.n));
            print_paths(&paths);
            Ok(())
        }
        (Method::Theorem2, SpecDocument::Plain(spec)) => {
            let sample = sample_latents(spec, a.m, a.n, seed)?;
            let (_, out) = compress_lvm(spec, &sample, a.epsilon, seed, &opts)?;
            let x = generate_matrix(spec, &sample)?;
            finish_compressed(&out, &x, &a.out)
        }
        (Method::Theorem3, SpecDocument::Piecewise(spec)) => {
            let sample = spec.sample_latents(a.m, a.n, seed)?;
            let pf = taylor_factorize_piecewise(spec, &sample, a.epsilon / 2.0)?;
            let x = generate_piecewise_matrix(spec, &sample)?;
            let out = theorem3_compress(&pf, &x, a.epsilon, seed, &opts)?;
            finish_compressed(&out, &x, &a.out)
        }
        (Method::Theorem4, SpecDocument::Plain(spec)) => {
            if a.m != a.n {
                return Err(Error::Argument(format!(
                    "theorem4 builds a square n×n matrix; got --m {} --n {}",
                    a.m, a.n
                )));
            }
            if !spec.family().is_symmetric() {
                return Err(Error::Argument(format!(
                    "theorem4 needs a symmetric f; the {} model is not",
                    spec.family().name()
                )));
            }
            let alphas = sample_role(spec, StreamRole::Alpha, a.n, seed);
            let out = theorem4_compress(spec, &alphas, a.epsilon, seed, &opts)?;
            let x = generate_symmetric_matrix(spec, &alphas)?;
            finish_compressed(&out, &x, &a.out)
        }
        (Method::Theorem2 | Method::Theorem4, SpecDocument::Piecewise(_)) => Err(Error::Argument(
            "piecewise specs take --method theorem3 (or taylor, theorem0)".into(),
        )),
        (Method::Theorem3, SpecDocument::Plain(_)) => Err(Error::Argument(
            "theorem3 needs a piecewise spec (`pieces = …`)".into(),
        )),
    }
}

fn finish_compressed(out: &CompressedApprox, x: &DenseMatrix, prefix: &Path) -> Result<(), Error> {
    out.save(prefix)?;
    println!("method={}", out.method);
    println!("rows={}", x.rows());
    println!("cols={}", x.cols());
    println!("rank={}", out.rank_budget);
    match out.theoretical_rank {
        Some(r) => println!("theoretical_rank={r}"),
        None => println!("theoretical_rank=exp({})", out.theoretical_rank_ln),
    }
    println!("projection={}", out.projection.name());
    println!("achieved_max_error={}", out.achieved_max_error);
    println!("target_error={}", out.target_error);
    println!("retries={}", out.retries_used);
    println!("accepted_seed={}", out.accepted_seed);
    println!("nontrivial={}", out.nontrivial);
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    print_paths(&[with(".left.epsr"), with(".right.epsr"), with(".meta")]);
    Ok(())
}

fn print_paths(paths: &[PathBuf]) {
    let joined: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    println!("files={}", joined.join(","));
}

fn scan(a: ScanArgs) -> Result<(), Error> {
    let mut config = match (&a.config, a.full_scale) {
        (Some(path), _) => ScanConfig::read(path)?,
        (None, true) => ScanConfig::full_scale(0),
        (None, false) => ScanConfig::desk_scale(0),
    };
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    let records = run_scan(&config)?;
    write_text(&a.out, &scan_to_csv(&records))?;
    if let Some(svg) = &a.svg {
        write_text(svg, &scan_to_svg(&records))?;
    }
    println!("rows={}", records.len());
    println!("cells={}", cell_maxima(&records).len());
    println!("master_seed={}", config.master_seed);
    println!("csv={}", a.out.display());
    if let Some(svg) = &a.svg {
        println!("svg={}", svg.display());
    }
    for (eps, n, r) in cell_maxima(&records) {
        println!("max_rank[epsilon={eps},n={n}]={r}");
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
