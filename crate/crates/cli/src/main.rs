use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_cones::blockrank::{exact_rank, rank_bound, rotate_to_low_rank_corner, tight_witness, BlockShape};
use lowrank_cones::cones::{cone_distance, cone_frame, cone_membership, project_cone, ConeKind, ConeSpec};
use lowrank_cones::exec::Execution;
use lowrank_cones::limits::{
    gap_distance, polar_limit_check, verify_main_theorem, verify_normal_cone_limits, verify_regular_tangent_limits,
    whitney_a_regularity_check, LimitParams, LimitReport, Subspace, Verdict,
};
use lowrank_cones::matcore::{format_matrix, orthonormality_residual, read_matrix, singular_values, write_matrix};
use lowrank_cones::seqlab::{
    constant_rank_sequence, dense_cluster_sequence, planted_frame_sequence, random_point, random_rank_sequence,
    save_bundle,
};
use lowrank_cones::variety::{distance_to_variety, numerical_rank};
use lowrank_cones::{Error, Matrix, RandomSource, DEFAULT_RANK_TOL};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAIL: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PARAMS: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

/// Tangent and normal cones of the variety of bounded-rank matrices.
#[derive(Parser, Debug)]
#[command(name = "lowrank-cones", version)]
struct Cli {
    /// Seed for every random choice
    #[arg(long, global = true, env = "LOWRANK_CONES_SEED", default_value_t = 0)]
    seed: u64,
    /// Relative rank tolerance
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance from a matrix to the matrices of rank at most r
    Distance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: usize,
    },
    /// Metric projection of eta onto a cone at X
    Project {
        #[command(flatten)]
        cone: ConeArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cone membership of eta at X
    Membership {
        #[command(flatten)]
        cone: ConeArgs,
    },
    /// Orthonormal frame [U U_perp], [V V_perp] of X
    Frame {
        #[arg(long)]
        input: PathBuf,
        /// Directory for u.txt, u_perp.txt, v.txt, v_perp.txt
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a matrix sequence and save it as a bundle directory
    Sequence {
        #[arg(long, value_enum)]
        kind: SequenceKind,
        #[command(flatten)]
        dims: SequenceArgs,
        #[arg(long = "N", default_value_t = 200)]
        n_len: usize,
        /// Target matrix; a random one of rank --rlow when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// 0/1 block matrix reaching the block rank bound
    Witness {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rotate M so that its lower-right block has small rank
    Rotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        /// Directory for u.txt, v.txt, m_prime.txt
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Gap distance between the column spans of two matrices
    Gap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        other: PathBuf,
    },
    /// Run a verification suite and write JSON and CSV reports
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        params: VerifyArgs,
    },
}

#[derive(Args, Debug)]
struct ConeArgs {
    /// Base point X
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    eta: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: ConeKind,
    #[arg(long)]
    rbar: usize,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    rlow: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
}

#[derive(Args, Debug)]
struct ShapeArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    s: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rlow: usize,
    #[arg(long)]
    r: usize,
    /// Defaults to r (ignored by whitney and polar)
    #[arg(long)]
    rbar: Option<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long = "N", default_value_t = 200)]
    n_len: usize,
    /// Report directory
    #[arg(long, default_value = ".")]
    output: PathBuf,
    #[arg(long)]
    sequential: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SequenceKind {
    Dense,
    PlantedFrame,
    ConstantRank,
    RandomRank,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Main,
    RegularTangent,
    Normal,
    Whitney,
    Polar,
}

fn parse_kind(s: &str) -> Result<ConeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Ordered key/value output rendered as text, JSON or CSV.
#[derive(Default)]
struct Output {
    fields: Vec<(String, Field)>,
}

enum Field {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Nums(Vec<f64>),
    Mat(Matrix),
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Output {
    fn put(&mut self, key: &str, f: Field) -> &mut Self {
        self.fields.push((key.to_string(), f));
        self
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut obj = serde_json::Map::new();
                for (k, f) in &self.fields {
                    let v = match f {
                        Field::Num(x) => json!(x),
                        Field::Int(x) => json!(x),
                        Field::Bool(x) => json!(x),
                        Field::Text(x) => json!(x),
                        Field::Nums(x) => json!(x),
                        Field::Mat(a) => Value::Array(
                            a.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<_>>())).collect(),
                        ),
                    };
                    obj.insert(k.clone(), v);
                }
                serde_json::to_string_pretty(&Value::Object(obj)).expect("serializable") + "\n"
            }
            Format::Text | Format::Csv => {
                let sep = if format == Format::Csv { "," } else { " " };
                let mut out = String::new();
                for (k, f) in &self.fields {
                    match f {
                        Field::Num(x) => out += &format!("{k}{sep}{}\n", num(*x)),
                        Field::Int(x) => out += &format!("{k}{sep}{x}\n"),
                        Field::Bool(x) => out += &format!("{k}{sep}{x}\n"),
                        Field::Text(x) => out += &format!("{k}{sep}{x}\n"),
                        Field::Nums(xs) => {
                            let xs: Vec<String> = xs.iter().map(|x| num(*x)).collect();
                            out += &format!("{k}{sep}{}\n", xs.join(sep));
                        }
                        Field::Mat(a) if format == Format::Text => {
                            out += &format!("{k}\n{}", format_matrix(a));
                        }
                        Field::Mat(a) => {
                            for (i, row) in a.row_iter().enumerate() {
                                let xs: Vec<String> = row.iter().map(|x| num(*x)).collect();
                                out += &format!("{k}[{i}],{}\n", xs.join(","));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

enum Failure {
    Lib(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Parse(_) => EXIT_IO,
        Error::RankExceedsVariety { .. } | Error::RankTooHigh { .. } | Error::NotInCone(_) => EXIT_DOMAIN,
        Error::NoConvergentSubsequence { .. } => EXIT_FAIL,
        Error::InvalidInput(_)
        | Error::InvalidRank { .. }
        | Error::InvalidParams(_)
        | Error::RankMismatch { .. }
        | Error::BudgetExceeded { .. } => EXIT_PARAMS,
    }
}

fn check_tol(tol: f64) -> Result<(), Error> {
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParams(format!("require 0 < tol < 1, got {tol}")));
    }
    Ok(())
}

/// `rbar < min(m, n)` is required at the command line; the library's
/// whole-space convention for larger `rbar` is not exposed here.
fn check_rbar(rbar: usize, x: &Matrix) -> Result<(), Error> {
    let min = x.nrows().min(x.ncols());
    if rbar >= min {
        return Err(Error::InvalidParams(format!(
            "require r̄ < min(m,n), got r̄={rbar}, min(m,n)={min}"
        )));
    }
    Ok(())
}

fn load_cone(args: &ConeArgs, tol: f64) -> Result<(Matrix, Matrix, ConeSpec), Error> {
    let x = read_matrix(&args.input)?;
    let eta = read_matrix(&args.eta)?;
    if eta.shape() != x.shape() {
        return Err(Error::InvalidInput(format!(
            "eta is {}x{} but X is {}x{}",
            eta.nrows(),
            eta.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    check_rbar(args.rbar, &x)?;
    let r = numerical_rank(&x, tol);
    if r > args.rbar {
        return Err(Error::RankExceedsVariety { r, rbar: args.rbar });
    }
    Ok((x, eta, ConeSpec::new(args.kind, args.rbar)))
}

fn write_dir(dir: &Path, files: &[(&str, &Matrix)]) -> Result<(), Error> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    for (name, m) in files {
        write_matrix(&dir.join(name), m)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    check_tol(cli.tol)?;
    let mut out = Output::default();
    match &cli.command {
        Command::Distance { input, r } => {
            let x = read_matrix(input)?;
            let d = distance_to_variety(&x, *r)?;
            let sigma = singular_values(&x);
            out.put("distance", Field::Num(d))
                .put("r", Field::Int(*r))
                .put("trailing_singular_values", Field::Nums(sigma.into_iter().skip(*r).collect()));
        }
        Command::Project { cone, output } => {
            let (x, eta, spec) = load_cone(cone, cli.tol)?;
            let f = cone_frame(&x, cli.tol)?;
            let p = project_cone(&f, &spec, &eta)?;
            let member = cone_membership(&f, &spec, &eta, cli.tol)?;
            if let Some(path) = output {
                write_matrix(path, &p)?;
            }
            out.put("kind", Field::Text(spec.kind.to_string()))
                .put("rbar", Field::Int(spec.rbar))
                .put("member", Field::Bool(member))
                .put("residual", Field::Num((&eta - &p).norm()))
                .put("projection", Field::Mat(p));
        }
        Command::Membership { cone } => {
            let (x, eta, spec) = load_cone(cone, cli.tol)?;
            let f = cone_frame(&x, cli.tol)?;
            out.put("kind", Field::Text(spec.kind.to_string()))
                .put("rbar", Field::Int(spec.rbar))
                .put("rank", Field::Int(f.r))
                .put("member", Field::Bool(cone_membership(&f, &spec, &eta, cli.tol)?))
                .put("distance", Field::Num(cone_distance(&f, &spec, &eta)?));
        }
        Command::Frame { input, output } => {
            let x = read_matrix(input)?;
            let f = cone_frame(&x, cli.tol)?;
            if let Some(dir) = output {
                write_dir(dir, &[("u.txt", &f.u), ("u_perp.txt", &f.u_perp), ("v.txt", &f.v), ("v_perp.txt", &f.v_perp)])?;
            }
            out.put("rank", Field::Int(f.r))
                .put("singular_values", Field::Nums(f.sigma.clone()))
                .put("frame_residual", Field::Num(f.residuals().max()))
                .put("u", Field::Mat(f.u.clone()))
                .put("u_perp", Field::Mat(f.u_perp.clone()))
                .put("v", Field::Mat(f.v.clone()))
                .put("v_perp", Field::Mat(f.v_perp.clone()));
        }
        Command::Sequence {
            kind,
            dims,
            n_len,
            input,
            output,
        } => {
            let rng = RandomSource::new(cli.seed);
            let SequenceArgs { m, n, rlow, r } = *dims;
            let rank = if *kind == SequenceKind::ConstantRank { r } else { rlow };
            let x = match input {
                Some(p) => read_matrix(p)?,
                None => {
                    if rank == 0 || rank >= m.min(n) {
                        return Err(Error::InvalidParams(format!(
                            "require 1 <= rank < min(m,n), got rank={rank}, min(m,n)={}",
                            m.min(n)
                        ))
                        .into());
                    }
                    random_point(m, n, rank, &mut rng.derive(0))
                }
            };
            if *n_len == 0 {
                return Err(Error::InvalidParams("require N >= 1".into()).into());
            }
            let seq_rng = rng.derive(1);
            let bundle = match kind {
                SequenceKind::Dense => dense_cluster_sequence(&x, r, *n_len, &seq_rng)?,
                SequenceKind::PlantedFrame => planted_frame_sequence(&x, r, *n_len, &seq_rng)?,
                SequenceKind::ConstantRank => constant_rank_sequence(&x, *n_len, &seq_rng)?,
                SequenceKind::RandomRank => random_rank_sequence(&x, r, *n_len, &seq_rng)?,
            };
            save_bundle(&bundle, output)?;
            let d = bundle.distances();
            out.put("directory", Field::Text(output.display().to_string()))
                .put("length", Field::Int(bundle.len()))
                .put("target_rank", Field::Int(bundle.r_low))
                .put("sequence_rank", Field::Int(bundle.r_seq))
                .put("first_distance", Field::Num(d[0]))
                .put("last_distance", Field::Num(*d.last().expect("nonempty")));
        }
        Command::Witness { shape, output } => {
            let shape = BlockShape::new(shape.k, shape.p, shape.q, shape.s)?;
            let w = tight_witness(shape);
            if let Some(path) = output {
                write_matrix(path, &w)?;
            }
            out.put("rank", Field::Int(exact_rank(&w).expect("0/1 matrix")))
                .put("bound", Field::Int(rank_bound(shape)))
                .put("d_rank", Field::Int(exact_rank(&shape.d_block(&w)).expect("0/1 matrix")))
                .put("witness", Field::Mat(w));
        }
        Command::Rotate { input, k, s, output } => {
            let m = read_matrix(input)?;
            let rot = rotate_to_low_rank_corner(&m, *k, *s)?;
            if let Some(dir) = output {
                write_dir(dir, &[("u.txt", &rot.u), ("v.txt", &rot.v), ("m_prime.txt", &rot.m_prime)])?;
            }
            let rec = (&rot.u * &rot.m_prime * rot.v.transpose() - &m).norm();
            out.put("rank", Field::Int(rot.rank))
                .put("d_prime_rank", Field::Int(rot.d_prime_rank(*k, cli.tol)))
                .put("reconstruction", Field::Num(rec))
                .put(
                    "orthogonality",
                    Field::Num(orthonormality_residual(&rot.u).max(orthonormality_residual(&rot.v))),
                )
                .put("u", Field::Mat(rot.u.clone()))
                .put("v", Field::Mat(rot.v.clone()))
                .put("m_prime", Field::Mat(rot.m_prime.clone()));
        }
        Command::Gap { input, other } => {
            let a = Subspace::span_of(&read_matrix(input)?, cli.tol)?;
            let b = Subspace::span_of(&read_matrix(other)?, cli.tol)?;
            out.put("dimension", Field::Int(a.dim()))
                .put("gap", Field::Num(gap_distance(&a, &b)?));
        }
        Command::Verify { suite, params } => return verify(cli, *suite, params),
    }
    Ok(out)
}

fn verify(cli: &Cli, suite: Suite, a: &VerifyArgs) -> Result<Output, Failure> {
    let p = LimitParams::new(a.m, a.n, a.rlow, a.r, a.rbar.unwrap_or(a.r));
    let rng = RandomSource::new(cli.seed);
    let exec = if a.sequential { Execution::Sequential } else { Execution::default() };
    let report: LimitReport = match suite {
        Suite::Main => verify_main_theorem(p, a.trials, a.n_len, &rng, exec)?,
        Suite::RegularTangent => verify_regular_tangent_limits(p, a.trials, a.n_len, &rng, exec)?,
        Suite::Normal => verify_normal_cone_limits(p, a.trials, a.n_len, &rng, exec)?,
        Suite::Whitney => whitney_a_regularity_check(p, a.n_len, a.trials, &rng, exec)?,
        Suite::Polar => polar_limit_check(p, a.trials, a.n_len, &rng, exec)?,
    };
    let (json_path, csv_path) = report.write_files(&a.output, &report.suite)?;
    let mut out = Output::default();
    out.put("suite", Field::Text(report.suite.clone()))
        .put("seed", Field::Int(report.seed as usize))
        .put("report", Field::Text(json_path.display().to_string()))
        .put("residuals", Field::Text(csv_path.display().to_string()));
    for c in &report.clauses {
        out.put(&c.name, Field::Text(verdict_name(c.verdict).to_string()));
    }
    out.put("passed", Field::Bool(report.passed()));
    if !report.passed() {
        print!("{}", out.render(cli.format));
        let failed: Vec<&str> = report
            .clauses
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Failure::Verification(format!("failed clauses: {}", failed.join(", "))));
    }
    Ok(out)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Vacuous => "vacuous",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARAMS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.render(cli.format));
            ExitCode::SUCCESS
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
