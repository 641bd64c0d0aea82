//! Command-line front end: tensor generation, decomposition runs, metric
//! reports, and the synthetic benchmark table.

use clap::{Parser, Subcommand, ValueEnum};
use odalm_core::alm::{od_alm_fit, AlmConfig};
use odalm_core::cp_als::{als_fit, AlsConfig};
use odalm_core::error::{Error, Result};
use odalm_core::generate::{hilbert, lowrank, orth_noise, random_tensor};
use odalm_core::io::{
    read_kruskal_text, read_tensor_binary, read_tensor_text, write_kruskal_text,
    write_tensor_binary, write_tensor_text, write_trace_csv,
};
use odalm_core::kruskal::{pairwise_inner, relative_error, theta, KruskalTensor};
use odalm_core::orthogonalize::{orthogonalize, project, to_kruskal};
use odalm_core::DenseTensor;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "odalm", about = "Orthogonal low-rank tensor decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Random,
    Lowrank,
    Hilbert,
    OrthNoise,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    CpAls,
    OdAlm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test tensor and write it to a file.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Mode sizes, e.g. 20x16x10x32 (also accepts commas).
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 5)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative noise magnitude for orth-noise.
        #[arg(long, default_value_t = 0.1)]
        noise_level: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Fit a rank-R decomposition to a tensor file.
    Decompose {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::OdAlm)]
        method: Method,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        eps_inner: Option<f64>,
        #[arg(long)]
        eps_outer: Option<f64>,
        #[arg(long)]
        max_outer: Option<usize>,
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long)]
        mu_growth: Option<f64>,
        /// Write the resulting factors here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-iteration trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Report error and orthogonality metrics of a stored decomposition.
    Eval { tensor: PathBuf, kruskal: PathBuf },
    /// Run the synthetic benchmark suite and emit a CSV table.
    Bench {
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [Method::CpAls, Method::OdAlm])]
        method: Vec<Method>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = s
        .split(|c| c == 'x' || c == ',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad dimension {:?}", p)))
        })
        .collect::<Result<_>>()?;
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::Parse(format!("invalid dims {:?}", s)));
    }
    Ok(dims)
}

/// Reads a tensor file, sniffing the binary magic.
fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let head = r.fill_buf()?;
    if head.starts_with(b"OTNS") {
        read_tensor_binary(&mut r)
    } else {
        read_tensor_text(&mut r)
    }
}

fn read_kruskal(path: &Path) -> Result<KruskalTensor> {
    read_kruskal_text(&mut BufReader::new(File::open(path)?))
}

fn generate(kind: GenKind, dims: &[usize], rank: usize, noise: f64, seed: u64) -> Result<DenseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        GenKind::Random => Ok(random_tensor(dims, &mut rng)),
        GenKind::Lowrank => Ok(lowrank(dims, rank, &mut rng)),
        GenKind::Hilbert => Ok(hilbert(dims)),
        GenKind::OrthNoise => orth_noise(dims, rank, noise, &mut rng),
    }
}

struct FitResult {
    factors: KruskalTensor,
    rerr: f64,
    iters: usize,
    seconds: f64,
    trace: odalm_core::alm::RunTrace,
}

/// Baseline alternating least squares fit.
fn run_cp_als(a: &DenseTensor, rank: usize) -> Result<FitResult> {
    let t0 = Instant::now();
    let (fit, trace) = als_fit(a, &AlsConfig::baseline(rank))?;
    Ok(FitResult {
        rerr: relative_error(a, &fit)?,
        iters: trace.rows.len(),
        seconds: t0.elapsed().as_secs_f64(),
        factors: fit,
        trace,
    })
}

/// Constrained pipeline: ALS warm start from the truncated HOSVD, the
/// augmented Lagrangian outer loop, then orthogonalization and projection.
fn run_od_alm(a: &DenseTensor, cfg: &AlmConfig) -> Result<FitResult> {
    let t0 = Instant::now();
    let (init, _) = als_fit(a, &AlsConfig::initializer(cfg.rank))?;
    let (out, trace) = od_alm_fit(a, cfg, &init)?;
    let list = project(a, &orthogonalize(&out)?)?;
    let factors = to_kruskal(&list);
    Ok(FitResult {
        rerr: relative_error(a, &factors)?,
        iters: trace.rows.len(),
        seconds: t0.elapsed().as_secs_f64(),
        factors,
        trace,
    })
}

fn cmd_gen(
    kind: GenKind,
    dims: &str,
    rank: usize,
    seed: u64,
    noise: f64,
    out: &Path,
    format: Format,
) -> Result<()> {
    let dims = parse_dims(dims)?;
    let a = generate(kind, &dims, rank, noise, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    match format {
        Format::Text => write_tensor_text(&mut w, &a)?,
        Format::Binary => write_tensor_binary(&mut w, &a)?,
    }
    println!(
        "wrote {} entries ({:?}) to {}",
        a.len(),
        a.dims(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_decompose(
    input: &Path,
    method: Method,
    rank: usize,
    eps_inner: Option<f64>,
    eps_outer: Option<f64>,
    max_outer: Option<usize>,
    mu0: Option<f64>,
    mu_growth: Option<f64>,
    out: Option<&Path>,
    trace_path: Option<&Path>,
) -> Result<()> {
    if rank == 0 {
        return Err(Error::Parse("rank must be at least 1".into()));
    }
    let a = read_tensor(input)?;
    let res = match method {
        Method::CpAls => run_cp_als(&a, rank)?,
        Method::OdAlm => {
            let mut cfg = AlmConfig::for_tensor(rank, &a);
            if let Some(v) = eps_inner {
                cfg.eps_inner = v;
            }
            if let Some(v) = eps_outer {
                cfg.eps_outer = v;
            }
            if let Some(v) = max_outer {
                cfg.max_outer = v;
            }
            if let Some(v) = mu0 {
                cfg.mu0 = v;
            }
            if let Some(v) = mu_growth {
                cfg.mu_growth = v;
            }
            run_od_alm(&a, &cfg)?
        }
    };
    let label = match method {
        Method::CpAls => "cp-als",
        Method::OdAlm => "od-alm",
    };
    println!("method: {}", label);
    println!("rerr: {:.6}", res.rerr);
    println!("iterations: {}", res.iters);
    println!("seconds: {:.3}", res.seconds);
    if let Some(p) = out {
        write_kruskal_text(&mut BufWriter::new(File::create(p)?), &res.factors)?;
    }
    if let Some(p) = trace_path {
        write_trace_csv(&mut BufWriter::new(File::create(p)?), &res.trace)?;
    }
    Ok(())
}

fn cmd_eval(tensor: &Path, kruskal: &Path) -> Result<()> {
    let a = read_tensor(tensor)?;
    let k = read_kruskal(kruskal)?;
    if a.dims() != k.dims() {
        return Err(Error::ShapeMismatch(format!(
            "tensor dims {:?} vs factor dims {:?}",
            a.dims(),
            k.dims()
        )));
    }
    println!("rerr: {:.6}", relative_error(&a, &k)?);
    println!("theta: {:.6e}", theta(&k)?);
    println!(
        "max_offdiag: {:.6e}",
        pairwise_inner(&k).max_abs_offdiag()
    );
    for (n, f) in k.factors.iter().enumerate() {
        // Grams of the normalized factors: which single modes carry the
        // orthogonality has no fixed pattern, so print them all.
        let mut nf = f.clone();
        for c in 0..nf.cols() {
            let nrm = nf.col_norm(c);
            if nrm > 0.0 {
                nf.scale_col(c, 1.0 / nrm);
            }
        }
        let g = nf.gram();
        println!("gram mode {}:", n);
        for i in 0..g.rows() {
            let row: Vec<String> = (0..g.cols()).map(|j| format!("{:9.5}", g.get(i, j))).collect();
            println!("  {}", row.join(" "));
        }
    }
    Ok(())
}

fn cmd_bench(methods: &[Method], repeats: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    if repeats == 0 {
        return Err(Error::Parse("repeats must be at least 1".into()));
    }
    let dims = [20usize, 16, 10, 32];
    let rank = 5;
    let kinds = [
        ("a1-random", GenKind::Random),
        ("a2-lowrank", GenKind::Lowrank),
        ("a3-hilbert", GenKind::Hilbert),
        ("a4-orth-noise", GenKind::OrthNoise),
    ];
    let mut methods: Vec<Method> = methods.to_vec();
    methods.sort_by_key(|m| matches!(m, Method::OdAlm));
    methods.dedup();

    let mut lines = vec!["tensor,method,mean_seconds,mean_rerr,mean_iters".to_string()];
    for (name, kind) in kinds {
        for &method in &methods {
            let mut secs = 0.0;
            let mut rerr = 0.0;
            let mut iters = 0.0;
            for rep in 0..repeats {
                let a = generate(kind, &dims, rank, 0.1, seed + rep as u64)?;
                let res = match method {
                    Method::CpAls => run_cp_als(&a, rank)?,
                    Method::OdAlm => run_od_alm(&a, &AlmConfig::for_tensor(rank, &a))?,
                };
                secs += res.seconds;
                rerr += res.rerr;
                iters += res.iters as f64;
            }
            let n = repeats as f64;
            let label = match method {
                Method::CpAls => "cp-als",
                Method::OdAlm => "od-alm",
            };
            lines.push(format!(
                "{},{},{:.3},{:.6},{:.1}",
                name,
                label,
                secs / n,
                rerr / n,
                iters / n
            ));
        }
    }
    let body = lines.join("\n") + "\n";
    match out {
        Some(p) => {
            File::create(p)?.write_all(body.as_bytes())?;
        }
        None => print!("{}", body),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            kind,
            dims,
            rank,
            seed,
            noise_level,
            out,
            format,
        } => cmd_gen(kind, &dims, rank, seed, noise_level, &out, format),
        Command::Decompose {
            input,
            method,
            rank,
            eps_inner,
            eps_outer,
            max_outer,
            mu0,
            mu_growth,
            out,
            trace,
        } => cmd_decompose(
            &input,
            method,
            rank,
            eps_inner,
            eps_outer,
            max_outer,
            mu0,
            mu_growth,
            out.as_deref(),
            trace.as_deref(),
        ),
        Command::Eval { tensor, kruskal } => cmd_eval(&tensor, &kruskal),
        Command::Bench {
            method,
            repeats,
            seed,
            out,
        } => cmd_bench(&method, repeats, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::DegenerateComponent { .. } => ExitCode::from(3),
                Error::Parse(_)
                | Error::Io(_)
                | Error::ShapeMismatch(_)
                | Error::Domain(_)
                | Error::Infeasible(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
