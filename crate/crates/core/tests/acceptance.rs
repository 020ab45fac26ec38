//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use minsum::bounds::{bound_quadratic_simplified, check_trace};
use minsum::dominance::{certify_objective, certify_quadratic, Certification, DEFAULT_SAMPLES};
use minsum::general::{
    check_local_convexity, check_message_envelope, check_minimiser_slope, run_general_observed,
    GeneralInit, GeneralRunOptions, GridOptions,
};
use minsum::generate::{generate_random_sdd, generate_random_tree_sdd};
use minsum::io::read_problem;
use minsum::quadratic::{check_edge_invariants, run_quadratic, run_quadratic_observed, QuadraticInit, RunOptions};
use minsum::reference::{solve_general_newton, solve_quadratic_direct, NewtonOptions};
use minsum::trace::{inf_norm_diff, weighted_error};
use minsum::tree::{key_property_quadratic, projected_size, MAX_TREE_NODES};
use minsum::{Error, PairwiseObjective, QuadraticProblem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.3}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn lambda_of(c: &Certification) -> f64 {
    match c {
        Certification::Certified(c) => c.lambda,
        Certification::Refuted(r) => r.lambda_star,
        Certification::Indeterminate { upper, .. } => *upper,
    }
}

/// Runs until `t_max` unless the estimates stop moving entirely.
fn fixed_run(t_max: usize) -> RunOptions {
    RunOptions { t_max, tol: f64::MIN_POSITIVE }
}

fn criterion_1() -> Result<Outcome, Error> {
    let start = Instant::now();
    let q = QuadraticProblem::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 0.0])?;
    let run = run_quadratic(&q, &QuadraticInit::zero(2), fixed_run(2))?;
    let x2 = &run.trace.rows[1].x;
    let chain_err = inf_norm_diff(x2, &[2.0 / 3.0, -1.0 / 3.0]);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut exact_at_diameter = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..50 {
        let n = rng.gen_range(2..=30);
        let q = generate_random_tree_sdd(n, rng.gen_range(0.5..0.95), seed)?;
        let d = q.graph().diameter();
        let x_star = solve_quadratic_direct(&q)?;
        let run = run_quadratic(&q, &QuadraticInit::zero(n), fixed_run(d + 1))?;
        let at = |t: usize| run.trace.rows.get(t - 1).map_or(run.trace.final_x(), |r| &r.x[..]);
        let err = inf_norm_diff(at(d + 1), &x_star);
        if inf_norm_diff(at(d), &x_star) <= 1e-12 {
            exact_at_diameter += 1;
        }
        worst = worst.max(err);
        if err > 1e-12 {
            failures += 1;
        }
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(1));
    Ok(outcome(
        chain_err <= 1e-12 && failures == 0 && fast,
        format!(
            "chain error at t=2 {chain_err:.1e}; 50 trees exact at t=diameter+1 (worst {worst:.1e}, \
             {failures} failures; {exact_at_diameter}/50 already exact at t=diameter); {time}"
        ),
    ))
}

struct RateStats {
    runs: usize,
    bound_violations: usize,
    floor_rows: usize,
    p3_violations: usize,
    max_lambda: f64,
    /// `(seed, t, λ)` of every violating row.
    offending: Vec<(u64, usize, f64)>,
}

/// Criteria 2 and 4 share the same 100 runs.
fn rate_runs() -> Result<(RateStats, Duration), Error> {
    let start = Instant::now();
    let mut stats = RateStats {
        runs: 0,
        bound_violations: 0,
        floor_rows: 0,
        p3_violations: 0,
        max_lambda: 0.0,
        offending: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..100 {
        let n = rng.gen_range(3..=50);
        let degree = rng.gen_range(2..=4.min(n - 1));
        let target = rng.gen_range(0.5..0.9);
        let q = generate_random_sdd(n, degree, target, 1000 + seed)?;
        let Some(cert) = certify_quadratic(&q).certificate().cloned() else {
            stats.bound_violations += 1;
            continue;
        };
        stats.max_lambda = stats.max_lambda.max(cert.lambda);
        let x0 = vec![0.0; n];
        let mut p3 = 0;
        let run = run_quadratic_observed(&q, &QuadraticInit::Estimates(x0.clone()), fixed_run(60), |s| {
            if s.t >= 1 {
                p3 += check_edge_invariants(&q, s, cert.lambda, &cert.w).len();
            }
            Ok(())
        })?;
        let x_star = solve_quadratic_direct(&q)?;
        let bound = bound_quadratic_simplified(&q, cert.lambda, &cert.w, &x0, &x_star)?;
        let mut trace = run.trace;
        let report = check_trace(&mut trace, &bound, &x_star);
        stats.runs += 1;
        stats.bound_violations += report.violations();
        let seed = 1000 + seed;
        stats
            .offending
            .extend(report.rows.iter().filter(|r| !r.satisfied).map(|r| (seed, r.t, cert.lambda)));
        stats.floor_rows += report.floor_rows();
        stats.p3_violations += p3;
    }
    Ok((stats, start.elapsed()))
}

fn criterion_2(stats: &RateStats, elapsed: Duration) -> Outcome {
    let (fast, time) = within(elapsed, Duration::from_secs(10));
    let offending: Vec<String> = stats
        .offending
        .iter()
        .take(5)
        .map(|(seed, t, l)| format!("seed {seed} t={t} lambda={l:.3}"))
        .collect();
    outcome(
        stats.runs == 100 && stats.bound_violations == 0 && stats.max_lambda <= 0.9 && fast,
        format!(
            "{} runs, max lambda {:.4}, {} bound violations [{}] ({} rows judged at the rounding floor); {time}",
            stats.runs,
            stats.max_lambda,
            stats.bound_violations,
            offending.join(", "),
            stats.floor_rows
        ),
    )
}

fn criterion_4(stats: &RateStats) -> Outcome {
    outcome(
        stats.runs == 100 && stats.p3_violations == 0,
        format!("{} runs, {} violations of alpha < 0 or the edge dominance invariant", stats.runs, stats.p3_violations),
    )
}

fn key_property_on(q: &QuadraticProblem) -> Result<(f64, usize, bool), Error> {
    let g = q.graph();
    let roots: Vec<usize> = (0..q.n()).collect();
    let mut worst = 0.0f64;
    let mut checks = 0;
    let mut guarded = true;
    for t in 1..=5 {
        if roots.iter().any(|&r| projected_size(g, r, t - 1) > MAX_TREE_NODES) {
            guarded = false;
            break;
        }
        for k in key_property_quadratic(q, &QuadraticInit::zero(q.n()), &roots, t)? {
            worst = worst.max(k.diff);
            checks += 1;
        }
    }
    Ok((worst, checks, guarded))
}

fn criterion_3() -> Result<Outcome, Error> {
    let start = Instant::now();
    let fig = read_problem(&data("five_node.txt"))?
        .quadratic()
        .expect("five_node.txt is quadratic");
    let fig_certified = matches!(certify_quadratic(&fig), Certification::Certified(_));
    let (mut worst, mut checks, mut guarded) = key_property_on(&fig)?;
    let mut loopy = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..20 {
        let n = rng.gen_range(4..=15);
        let q = generate_random_sdd(n, 3, rng.gen_range(0.5..0.9), 3000 + seed)?;
        if !q.graph().is_forest() {
            loopy += 1;
        }
        let (w, c, g) = key_property_on(&q)?;
        worst = worst.max(w);
        checks += c;
        guarded &= g;
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(30));
    Ok(outcome(
        fig_certified && loopy == 20 && guarded && worst <= 1e-9 && fast,
        format!("{checks} root/t checks on the 5-node graph and {loopy} loopy graphs, max diff {worst:.1e}; {time}"),
    ))
}

/// Spectral radius of `D⁻¹|A_off|` from the symmetric similar matrix.
fn eigen_radius(q: &QuadraticProblem) -> f64 {
    let n = q.n();
    let d = q.diag();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            q.entry(i, j).abs() / (d[i] * d[j]).sqrt()
        }
    });
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |r, v| r.max(v.abs()))
}

/// `BBᵀ + εI` with a sparse random `B`: positive definite, often not
/// dominant.
fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> Result<QuadraticProblem, Error> {
    let per_row = rng.gen_range(1..=3);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = rng.gen_range(0.5..2.0);
        for _ in 0..per_row {
            b[(i, rng.gen_range(0..n))] += rng.gen_range(-1.0..1.0);
        }
    }
    let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
    let dense: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    QuadraticProblem::from_dense(&dense, vec![1.0; n])
}

fn criterion_5() -> Result<Outcome, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut refuted = 0;
    let mut indeterminate = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=100);
        let q = random_pd(n, &mut rng)?;
        let c = certify_quadratic(&q);
        match c {
            Certification::Refuted(_) => refuted += 1,
            Certification::Indeterminate { .. } => indeterminate += 1,
            Certification::Certified(_) => {}
        }
        worst = worst.max((lambda_of(&c) - eigen_radius(&q)).abs());
    }
    let dense = read_problem(&data("dense_06.txt"))?.quadratic().expect("quadratic");
    let (refutes, lambda_star) = match certify_quadratic(&dense) {
        Certification::Refuted(r) => (true, r.lambda_star),
        other => (false, lambda_of(&other)),
    };
    Ok(outcome(
        worst <= 1e-10 && indeterminate == 0 && refutes && (lambda_star - 1.2).abs() <= 1e-10,
        format!(
            "100 PD matrices ({refuted} refuted, {indeterminate} indeterminate), max |lambda - rho| {worst:.1e}; \
             0.6 instance refuted with lambda* = {lambda_star}"
        ),
    ))
}

#[derive(Default)]
struct GridStats {
    runs: usize,
    slope_violations: usize,
}

fn grid_run(
    obj: &PairwiseObjective,
    x0: Vec<f64>,
    opts: GeneralRunOptions,
    envelope: Option<(f64, &[f64])>,
    stats: &mut GridStats,
) -> Result<(minsum::general::GeneralRun, usize, usize), Error> {
    let (mut convexity, mut env, mut slope) = (0, 0, 0);
    let run = run_general_observed(obj, &GeneralInit::Estimates(x0), opts, |_, s| {
        convexity += check_local_convexity(obj, s).len();
        slope += check_minimiser_slope(obj, s).len();
        if let Some((lambda, w)) = envelope {
            env += check_message_envelope(obj, s, lambda, w).len();
        }
        Ok(())
    })?;
    stats.runs += 1;
    stats.slope_violations += slope;
    Ok((run, convexity, env))
}

fn criterion_6(stats: &mut GridStats) -> Result<Outcome, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut convexity = 0;
    for seed in 0..10 {
        let n = rng.gen_range(3..=10);
        let degree = rng.gen_range(1..=3.min(n - 1));
        let q = generate_random_sdd(n, degree, rng.gen_range(0.5..0.9), 6000 + seed)?;
        let para = run_quadratic(&q, &QuadraticInit::zero(n), fixed_run(20))?;
        let opts = GeneralRunOptions {
            t_max: 20,
            tol: f64::MIN_POSITIVE,
            grid: GridOptions {
                points: 1025,
                max_points: 1025,
                ..GridOptions::default()
            },
        };
        let (grid, conv, _) = grid_run(&q.to_pairwise(), vec![0.0; n], opts, None, stats)?;
        convexity += conv;
        for (a, b) in para.trace.rows.iter().zip(&grid.trace.rows) {
            worst = worst.max(inf_norm_diff(&a.x, &b.x));
            compared += 1;
        }
    }
    Ok(outcome(
        worst <= 1e-4 && compared > 0 && convexity == 0,
        format!("10 problems, {compared} iterates compared, max sup-norm gap {worst:.1e}"),
    ))
}

fn criterion_7(stats: &mut GridStats) -> Result<Outcome, Error> {
    let obj = read_problem(&data("quartic_cycle.txt"))?.objective();
    let n = obj.n();
    let boxes = vec![(-10.0, 10.0); n];
    let cert = certify_objective(&obj, &boxes, DEFAULT_SAMPLES)?
        .certificate()
        .cloned()
        .expect("quartic cycle certifies");
    let opts = GeneralRunOptions {
        t_max: 60,
        tol: 1e-12,
        grid: GridOptions {
            points: 1025,
            ..GridOptions::default()
        },
    };
    let x0 = vec![0.0; n];
    let x_star = solve_general_newton(&obj, &x0, NewtonOptions::default())?.x;
    let (run, convexity, envelope) = grid_run(&obj, x0.clone(), opts, Some((cert.lambda, &cert.w)), stats)?;
    let iterations = run.trace.rows.len();
    let error = inf_norm_diff(run.trace.final_x(), &x_star);

    // Geometric rate over the rows still above the grid resolution.
    let errors: Vec<f64> = std::iter::once(weighted_error(&x0, &x_star, &cert.w))
        .chain(run.trace.rows.iter().map(|r| weighted_error(&r.x, &x_star, &cert.w)))
        .take_while(|&e| e > 1e-8)
        .collect();
    let ratio = match errors.len() {
        0 | 1 => 0.0,
        k => (errors[k - 1] / errors[0]).powf(1.0 / (k - 1) as f64),
    };
    let limit = cert.lambda + 0.02;
    Ok(outcome(
        (cert.lambda - 0.6).abs() <= 1e-9
            && iterations <= 60
            && error <= 1e-6
            && ratio <= limit
            && convexity == 0
            && envelope == 0,
        format!(
            "lambda {:.3}, {iterations} iterations, |x - x*| {error:.1e}, ratio {ratio:.3} (limit {limit:.2}), \
             {convexity} curvature and {envelope} envelope violations",
            cert.lambda
        ),
    ))
}

fn criterion_8(stats: &GridStats) -> Outcome {
    outcome(
        stats.runs > 0 && stats.slope_violations == 0,
        format!("{} grid runs, {} minimiser slope violations", stats.runs, stats.slope_violations),
    )
}

fn criterion_9() -> Result<Outcome, Error> {
    let q = read_problem(&data("dense_06.txt"))?.quadratic().expect("quadratic");
    let opts = RunOptions { t_max: 1000, tol: 1e-12 };
    Ok(match run_quadratic(&q, &QuadraticInit::zero(q.n()), opts) {
        Ok(run) => {
            let finite = run.trace.rows.iter().all(|r| r.x.iter().all(|v| v.is_finite()));
            outcome(
                run.trace.converged && finite,
                format!("run ended after {} iterations, converged={}", run.trace.rows.len(), run.trace.converged),
            )
        }
        Err(e @ Error::IllPosed { .. }) => outcome(true, format!("aborted: {e}")),
        Err(e) => outcome(false, format!("aborted without a located diagnostic: {e}")),
    })
}

fn main() -> ExitCode {
    let report = |k: usize, r: Result<Outcome, Error>| -> bool {
        let o = r.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        println!("{} criterion {k}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        o.pass
    };
    let mut ok = true;
    ok &= report(1, criterion_1());
    match rate_runs() {
        Ok((stats, elapsed)) => {
            ok &= report(2, Ok(criterion_2(&stats, elapsed)));
            ok &= report(3, criterion_3());
            ok &= report(4, Ok(criterion_4(&stats)));
        }
        Err(e) => {
            let msg = e.to_string();
            ok &= report(2, Err(e));
            ok &= report(3, criterion_3());
            ok &= report(4, Ok(outcome(false, format!("error: {msg}"))));
        }
    }
    ok &= report(5, criterion_5());
    let mut stats = GridStats::default();
    ok &= report(6, criterion_6(&mut stats));
    ok &= report(7, criterion_7(&mut stats));
    ok &= report(8, Ok(criterion_8(&stats)));
    ok &= report(9, criterion_9());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
