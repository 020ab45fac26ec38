use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use minsum::bounds::{
    bound_general, bound_quadratic, bound_quadratic_simplified, bound_simplified, check_trace,
    BoundKind, RateBound,
};
use minsum::check::{check_batch, run_check, CheckOptions};
use minsum::dominance::{
    certify_objective, certify_quadratic, dominance_margin, verify_quadratic, Certification,
    DominanceCertificate, DEFAULT_SAMPLES,
};
use minsum::general::{run_general, GeneralInit, GeneralRunOptions, GridOptions};
use minsum::generate::{generate_random_quartic, generate_random_sdd, generate_random_tree_sdd};
use minsum::io::{format_problem, read_certificate, read_problem, write_certificate, Problem};
use minsum::quadratic::{init_messages_quadratic, run_quadratic, QuadraticInit, RunOptions};
use minsum::reference::{solve_general_newton, solve_quadratic_direct, NewtonOptions};
use minsum::trace::Trace;
use minsum::tree::{
    build_tree, key_property_general, key_property_quadratic, projected_size, write_tree,
    MAX_TREE_NODES,
};
use minsum::{Error, Result};

/// Min-sum message passing for pairwise-separable convex objectives.
#[derive(Parser)]
#[command(name = "minsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run message passing and print the final estimate.
    Solve(SolveArgs),
    /// Certify or refute scaled diagonal dominance.
    Certify(CertifyArgs),
    /// Print the exact minimiser from the reference solvers.
    Exact(FileArg),
    /// Print a computation tree and compare its root with the loopy estimate.
    Tree(TreeArgs),
    /// Compare a run's weighted errors with a rate bound.
    Bound(BoundArgs),
    /// Write a random problem.
    Gen(GenArgs),
    /// Run the full invariant pipeline on a file or on generated problems.
    Check(CheckArgs),
}

#[derive(Args)]
struct FileArg {
    file: PathBuf,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Iteration cap.
    #[arg(long, default_value_t = 1000)]
    t_max: usize,
    /// Stop when max |x^(t) - x^(t-1)| falls to this.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Starting estimates: one value for every node, or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Grid points per node on the grid path (2^k + 1).
    #[arg(long, default_value_t = 1025)]
    grid_points: usize,
    /// Use the grid path even for quadratic input.
    #[arg(long)]
    force_general: bool,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[command(flatten)]
    run: RunFlags,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Include every x_i column in the trace.
    #[arg(long)]
    full_x: bool,
    /// Certificate file supplying (lambda, w) for the error and bound columns.
    #[arg(long)]
    cert: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    file: PathBuf,
    /// Sampling box `lo,hi` applied to every coordinate.
    #[arg(long, default_value = "-10,10", allow_hyphen_values = true)]
    r#box: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Write the certificate here when one is found.
    #[arg(long)]
    cert_out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    file: PathBuf,
    /// Root node (1-based).
    #[arg(long, default_value_t = 1)]
    root: usize,
    /// Tree depth; the root estimate after depth + 1 iterations is compared.
    #[arg(long)]
    depth: usize,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = 1025)]
    grid_points: usize,
    /// Print only the summary, not the edge list.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct BoundArgs {
    file: PathBuf,
    #[command(flatten)]
    run: RunFlags,
    /// general | general_simplified | quadratic | quadratic_simplified
    #[arg(long, default_value = "quadratic_simplified")]
    kind: String,
    /// Write the per-row report as CSV.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 0.8)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random tree instead of a near-regular graph (ignores --degree).
    #[arg(long)]
    tree: bool,
    /// Quartic node factors instead of quadratic ones.
    #[arg(long, conflicts_with = "tree")]
    quartic: bool,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Problem file; omit to check generated problems.
    file: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
    /// Largest t for the computation-tree comparison.
    #[arg(long, default_value_t = 5)]
    key_t_max: usize,
    /// Generated problems: seed range `a..b` (end exclusive).
    #[arg(long, default_value = "0..20")]
    seeds: String,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 0.8)]
    lambda: f64,
}

/// Exit status 1: a property, bound or certificate failed.
/// Exit status 2: the input could not be used.
enum Failure {
    Violation(String),
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IllPosed { .. }
            | Error::NonFinite(_)
            | Error::NoConvergence(_)
            | Error::DomainBoundary { .. }
            | Error::NotPositiveDefinite { .. } => Failure::Violation(e.to_string()),
            other => Failure::Input(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn parse_x0(spec: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let Some(spec) = spec else {
        return Ok(vec![0.0; n]);
    };
    let values = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidProblem(format!("bad --x0 value '{t}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values),
        len => Err(Error::Dimension { expected: n, got: len }),
    }
}

fn parse_box(spec: &str) -> Result<(f64, f64)> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidProblem(format!("bad --box '{spec}'")))?;
    match parts[..] {
        [lo, hi] if lo < hi && lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
        _ => Err(Error::InvalidProblem(format!("--box needs 'lo,hi' with lo < hi, got '{spec}'"))),
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidProblem(format!("--seeds needs 'a..b', got '{spec}'"));
    let (a, b) = spec.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a..b).collect())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(" ")
}

fn grid_options(points: usize) -> GridOptions {
    GridOptions {
        points,
        max_points: GridOptions::default().max_points.max(points),
        ..Default::default()
    }
}

/// Certificate for weighting errors: from `--cert`, else computed.
fn certificate_for(problem: &Problem, path: Option<&Path>) -> Result<Option<DominanceCertificate>> {
    if let Some(p) = path {
        let c = read_certificate(p)?;
        if c.w.len() != problem.n() {
            return Err(Error::Dimension {
                expected: problem.n(),
                got: c.w.len(),
            });
        }
        return Ok(Some(c));
    }
    let cert = match problem.quadratic() {
        Some(q) => certify_quadratic(&q),
        None => {
            let n = problem.n();
            certify_objective(&problem.objective(), &vec![(-10.0, 10.0); n], DEFAULT_SAMPLES)?
        }
    };
    Ok(cert.certificate().cloned())
}

struct Solved {
    trace: Trace,
    x0: Vec<f64>,
    general: bool,
}

fn solve_problem(problem: &Problem, run: &RunFlags) -> Result<Solved> {
    let x0 = parse_x0(run.x0.as_deref(), problem.n())?;
    match (problem.quadratic(), run.force_general) {
        (Some(q), false) => {
            let r = run_quadratic(
                &q,
                &QuadraticInit::Estimates(x0.clone()),
                RunOptions {
                    t_max: run.t_max,
                    tol: run.tol,
                },
            )?;
            Ok(Solved {
                trace: r.trace,
                x0,
                general: false,
            })
        }
        _ => {
            let r = run_general(
                &problem.objective(),
                &GeneralInit::Estimates(x0.clone()),
                GeneralRunOptions {
                    t_max: run.t_max,
                    tol: run.tol,
                    grid: grid_options(run.grid_points),
                },
            )?;
            Ok(Solved {
                trace: r.trace,
                x0,
                general: true,
            })
        }
    }
}

fn exact_minimiser(problem: &Problem, start: &[f64]) -> Result<Vec<f64>> {
    match problem.quadratic() {
        Some(q) => solve_quadratic_direct(&q),
        None => Ok(solve_general_newton(&problem.objective(), start, NewtonOptions::default())?.x),
    }
}

fn default_bound(problem: &Problem, c: &DominanceCertificate, x0: &[f64], x_star: &[f64]) -> Option<RateBound> {
    match problem.quadratic() {
        Some(q) => bound_quadratic_simplified(&q, c.lambda, &c.w, x0, x_star).ok(),
        None => bound_simplified(&problem.objective(), c.lambda, &c.w, x0, x_star)
            .or_else(|_| {
                let boxes = vec![(-10.0, 10.0); problem.n()];
                bound_general(
                    &problem.objective(),
                    &GeneralInit::Estimates(x0.to_vec()),
                    c.lambda,
                    &c.w,
                    x_star,
                    Some(&boxes),
                )
            })
            .ok(),
    }
}

fn write_trace(path: &Path, trace: &Trace, full_x: bool) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut out, full_x)?;
    out.flush()?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> CliResult {
    let problem = read_problem(&args.file)?;
    let cert = certificate_for(&problem, args.cert.as_deref())?;
    let mut solved = solve_problem(&problem, &args.run)?;
    let x_star = exact_minimiser(&problem, solved.trace.final_x())?;
    let w = cert.as_ref().map_or_else(|| vec![1.0; problem.n()], |c| c.w.clone());
    solved.trace.attach_error(&x_star, &w);
    if let Some(c) = &cert {
        if let Some(b) = default_bound(&problem, c, &solved.x0, &x_star) {
            check_trace(&mut solved.trace, &b, &x_star);
        }
    }
    let last = solved.trace.last();
    println!("path {}", if solved.general { "grid" } else { "parametric" });
    println!("iterations {}", solved.trace.rows.len());
    println!("converged {}", solved.trace.converged);
    println!("x {}", fmt_vec(solved.trace.final_x()));
    if let Some(r) = last {
        println!("step_inf {:e}", r.step_inf);
        println!("residual_inf {:e}", r.residual_inf);
        if let Some(e) = r.err_weighted {
            println!("err_weighted {e:e}");
        }
    }
    if let Some(path) = &args.trace_out {
        write_trace(path, &solved.trace, args.full_x)?;
    }
    Ok(())
}

fn cmd_certify(args: CertifyArgs) -> CliResult {
    let problem = read_problem(&args.file)?;
    let bx = parse_box(&args.r#box)?;
    let outcome = match problem.quadratic() {
        Some(q) => certify_quadratic(&q),
        None => certify_objective(&problem.objective(), &vec![bx; problem.n()], args.samples)?,
    };
    match &outcome {
        Certification::Certified(c) => {
            println!("certified");
            println!("kind {}", c.kind.name());
            println!("lambda {:.15e}", c.lambda);
            println!("w {}", fmt_vec(&c.w));
            if let Some(q) = problem.quadratic() {
                println!("margins {}", fmt_vec(&dominance_margin(&q, c.lambda, &c.w)));
                println!("rechecked {}", verify_quadratic(&q, c.lambda, &c.w));
            }
            if let Some(path) = &args.cert_out {
                write_certificate(path, c)?;
            }
            Ok(())
        }
        Certification::Refuted(r) => {
            println!("refuted");
            println!("lambda_star {:.15e}", r.lambda_star);
            println!("w {}", fmt_vec(&r.w));
            Err(Failure::Violation(format!(
                "no dominance certificate: best lambda is {}",
                r.lambda_star
            )))
        }
        Certification::Indeterminate { lower, upper } => {
            println!("indeterminate");
            println!("lambda_bracket {lower:.15e} {upper:.15e}");
            Err(Failure::Violation("power iteration did not settle the certificate".into()))
        }
    }
}

fn cmd_exact(args: FileArg) -> CliResult {
    let problem = read_problem(&args.file)?;
    let start = vec![0.0; problem.n()];
    let x = exact_minimiser(&problem, &start)?;
    println!("x {}", fmt_vec(&x));
    match problem.quadratic() {
        Some(q) => println!("residual_inf {:e}", q.residual_inf(&x)),
        None => {
            let g = problem.objective().gradient(&x)?;
            println!("gradient_inf {:e}", g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(())
}

fn cmd_tree(args: TreeArgs) -> CliResult {
    let problem = read_problem(&args.file)?;
    let n = problem.n();
    if args.root == 0 || args.root > n {
        return Err(Error::InvalidProblem(format!("--root must be in 1..={n}")).into());
    }
    let root = args.root - 1;
    let obj = problem.objective();
    let projected = projected_size(obj.graph(), root, args.depth);
    println!("projected_nodes {projected} (limit {MAX_TREE_NODES})");
    let tree = build_tree(obj.graph(), root, args.depth)?;
    tree.validate(obj.graph())?;
    if !args.quiet {
        let stdout = std::io::stdout();
        write_tree(&tree, stdout.lock())?;
    }
    let x0 = parse_x0(args.x0.as_deref(), n)?;
    let t = args.depth + 1;
    let kp = match problem.quadratic() {
        Some(q) => key_property_quadratic(&q, &QuadraticInit::Estimates(x0), &[root], t)?,
        None => key_property_general(
            &obj,
            &GeneralInit::Estimates(x0),
            &[root],
            t,
            grid_options(args.grid_points),
        )?,
    };
    let k = kp[0];
    println!("t {}", k.t);
    println!("tree_root {:.15e}", k.tree_value);
    println!("loopy_root {:.15e}", k.loopy_value);
    println!("diff {:e}", k.diff);
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> CliResult {
    let problem = read_problem(&args.file)?;
    let kind = BoundKind::parse(&args.kind)
        .ok_or_else(|| Error::InvalidProblem(format!("unknown bound kind '{}'", args.kind)))?;
    let cert = certificate_for(&problem, None)?
        .ok_or_else(|| Failure::Violation("no dominance certificate, so no bound".into()))?;
    let mut solved = solve_problem(&problem, &args.run)?;
    let x_star = exact_minimiser(&problem, solved.trace.final_x())?;
    let x0 = &solved.x0;
    let obj = problem.objective();
    let need_quadratic = || {
        problem
            .quadratic()
            .ok_or_else(|| Error::BoundInapplicable(format!("'{}' needs a quadratic problem", kind.name())))
    };
    let bound = match kind {
        BoundKind::QuadraticSimplified => {
            bound_quadratic_simplified(&need_quadratic()?, cert.lambda, &cert.w, x0, &x_star)?
        }
        BoundKind::Quadratic => {
            let q = need_quadratic()?;
            let s0 = init_messages_quadratic(&q, &QuadraticInit::Estimates(x0.clone()))?;
            bound_quadratic(&q, &s0.messages, cert.lambda, &cert.w, &x_star)?
        }
        BoundKind::GeneralSimplified => bound_simplified(&obj, cert.lambda, &cert.w, x0, &x_star)?,
        BoundKind::General => {
            let boxes = vec![(-10.0, 10.0); problem.n()];
            bound_general(
                &obj,
                &GeneralInit::Estimates(x0.clone()),
                cert.lambda,
                &cert.w,
                &x_star,
                Some(&boxes),
            )?
        }
    };
    let report = check_trace(&mut solved.trace, &bound, &x_star);
    if let Some(path) = &args.report_out {
        let mut out = BufWriter::new(File::create(path)?);
        report.write_csv(&mut out)?;
        out.flush()?;
    } else {
        report.write_csv(std::io::stdout().lock())?;
    }
    println!("{}", report.summary());
    if report.all_satisfied() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{} bound violations", report.violations())))
    }
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let problem = if args.tree {
        Problem::Quadratic(generate_random_tree_sdd(args.n, args.lambda, args.seed)?)
    } else if args.quartic {
        Problem::General(generate_random_quartic(args.n, args.degree, args.lambda, args.seed)?)
    } else {
        Problem::Quadratic(generate_random_sdd(args.n, args.degree, args.lambda, args.seed)?)
    };
    let text = format_problem(&problem)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> CliResult {
    let mut opts = CheckOptions {
        t_max: args.run.t_max,
        tol: args.run.tol,
        grid: grid_options(args.run.grid_points),
        force_general: args.run.force_general,
        key_t_max: args.key_t_max,
        ..Default::default()
    };
    if let Some(file) = &args.file {
        let problem = read_problem(file)?;
        opts.x0 = Some(parse_x0(args.run.x0.as_deref(), problem.n())?);
        let report = run_check(&problem, &opts)?;
        println!("{}", report.summary());
        return if report.passed() {
            Ok(())
        } else {
            Err(Failure::Violation("check failed".into()))
        };
    }
    let seeds = parse_seeds(&args.seeds)?;
    let (n, degree, lambda) = (args.n, args.degree, args.lambda);
    // Surface generator parameter errors as input errors before the batch.
    generate_random_sdd(n, degree, lambda, 0)?;
    let results = check_batch(
        &seeds,
        |s| generate_random_sdd(n, degree, lambda, s).map(Problem::Quadratic),
        &opts,
    );
    let mut failed = 0;
    for (seed, r) in results {
        match r {
            Ok(report) if report.passed() => println!("seed {seed}: PASS"),
            Ok(report) => {
                failed += 1;
                println!("seed {seed}: FAIL\n{}", report.summary());
            }
            Err(e) => {
                failed += 1;
                println!("seed {seed}: ERROR {e}");
            }
        }
    }
    println!("{} of {} seeds passed", seeds.len() - failed, seeds.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{failed} seeds failed")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Tree(a) => cmd_tree(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("minsum: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("minsum: {e}");
            ExitCode::from(2)
        }
    }
}
