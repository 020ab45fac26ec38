use minsum::dominance::{certify_quadratic, dominance_margin, verify_quadratic, Certification};
use minsum::generate::{generate_random_quartic, generate_random_sdd, random_graph};
use minsum::io::{format_problem, parse_problem, Problem};
use minsum::quadratic::{run_quadratic, QuadraticInit, RunOptions};
use minsum::reference::solve_quadratic_direct;
use minsum::tree::{build_tree, level_sizes, projected_size};
use minsum::{EdgeFactor, Graph, NodeFactor, PairwiseObjective, QuadraticProblem};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lambda_of(c: &Certification) -> f64 {
    match c {
        Certification::Certified(c) => c.lambda,
        Certification::Refuted(r) => r.lambda_star,
        Certification::Indeterminate { upper, .. } => *upper,
    }
}

/// Symmetric dense matrix with a positive diagonal, some zeros off it.
fn dense_problem() -> impl Strategy<Value = QuadraticProblem> {
    (2usize..9).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..4.0, n),
            prop::collection::vec(prop_oneof![Just(0.0), -1.0f64..1.0], n * (n - 1) / 2),
            prop::collection::vec(-2.0f64..2.0, n),
        )
            .prop_map(move |(d, off, b)| {
                let mut a = vec![vec![0.0; n]; n];
                let mut k = 0;
                for i in 0..n {
                    a[i][i] = d[i];
                    for j in i + 1..n {
                        a[i][j] = off[k];
                        a[j][i] = off[k];
                        k += 1;
                    }
                }
                QuadraticProblem::from_dense(&a, b).unwrap()
            })
    })
}

/// Spectral radius of `D⁻¹|A_off|` through the symmetric similar matrix
/// `D^{-1/2}|A_off|D^{-1/2}`.
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
    m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |r, v| r.max(v.abs()))
}

/// Counts non-backtracking walks of length `≤ depth` from `v`.
fn walk_count(g: &Graph, v: usize, parent: Option<usize>, depth: usize) -> usize {
    if depth == 0 {
        return 1;
    }
    1 + g
        .neighbours(v)
        .iter()
        .filter(|nb| Some(nb.node) != parent)
        .map(|nb| walk_count(g, nb.node, Some(v), depth - 1))
        .sum::<usize>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_and_pairwise_forms_agree(q in dense_problem(), x in prop::collection::vec(-3.0f64..3.0, 8)) {
        let x = &x[..q.n()];
        let f = q.to_pairwise();
        let fq = q.evaluate(x).unwrap();
        prop_assert!((fq - f.evaluate(x).unwrap()).abs() <= 1e-10 * (1.0 + fq.abs()));
        let r = q.matvec(x);
        let g = f.gradient(x).unwrap();
        for i in 0..q.n() {
            prop_assert!((r[i] - q.b()[i] - g[i]).abs() <= 1e-10);
            prop_assert!((f.hessian_diagonal(x, i) - q.diag()[i]).abs() <= 1e-12);
        }
        let back = f.as_quadratic().unwrap();
        prop_assert_eq!(back, q.clone());
        let dense = q.to_dense();
        let triplets: Vec<_> = (0..q.n())
            .flat_map(|i| (i..q.n()).map(move |j| (i, j)))
            .filter(|&(i, j)| dense[i][j] != 0.0)
            .map(|(i, j)| (i, j, dense[i][j]))
            .collect();
        prop_assert_eq!(QuadraticProblem::from_triplets(q.n(), &triplets, q.b().to_vec()).unwrap(), q);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences(
        seed in 0u64..1000,
        x in prop::collection::vec(-2.0f64..2.0, 6),
        s in 0.0f64..3.0,
    ) {
        let g = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let nodes = (0..6)
            .map(|i| match i % 3 {
                0 => NodeFactor::Quartic { c: rng.gen_range(0.5..2.0), b: rng.gen_range(-1.0..1.0) },
                1 => NodeFactor::LogCosh { s, c: rng.gen_range(0.5..2.0), b: rng.gen_range(-1.0..1.0) },
                _ => NodeFactor::Quadratic { a: rng.gen_range(0.5..2.0), b: rng.gen_range(-1.0..1.0) },
            })
            .collect();
        let edges = (0..7).map(|_| EdgeFactor::Bilinear { a: rng.gen_range(-1.0..1.0) }).collect();
        let f = PairwiseObjective::new(g, nodes, edges).unwrap();
        let grad = f.gradient(&x).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.evaluate(&xp).unwrap() - f.evaluate(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + grad[i].abs()), "grad {i}: {fd} vs {}", grad[i]);
            let fd2 = (f.gradient(&xp).unwrap()[i] - f.gradient(&xm).unwrap()[i]) / (2.0 * h);
            let d2 = f.hessian_diagonal(&x, i);
            prop_assert!((fd2 - d2).abs() <= 1e-5 * (1.0 + d2.abs()), "hess {i}: {fd2} vs {d2}");
        }
    }

    #[test]
    fn lambda_matches_the_eigen_oracle(q in dense_problem()) {
        let c = certify_quadratic(&q);
        let rho = eigen_radius(&q);
        prop_assert!((lambda_of(&c) - rho).abs() <= 1e-10, "{} vs {rho}", lambda_of(&c));
        if let Certification::Certified(cert) = &c {
            prop_assert!(verify_quadratic(&q, cert.lambda, &cert.w));
        }
    }

    #[test]
    fn margins_scale_and_lambda_is_scale_invariant(q in dense_problem(), c in 0.1f64..10.0, k in 0.1f64..10.0) {
        let dense: Vec<Vec<f64>> = q.to_dense().iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
        let scaled = QuadraticProblem::from_dense(&dense, q.b().iter().map(|v| c * v).collect()).unwrap();
        let l = lambda_of(&certify_quadratic(&q));
        prop_assert!((lambda_of(&certify_quadratic(&scaled)) - l).abs() <= 1e-10);
        let w: Vec<f64> = (0..q.n()).map(|i| 1.0 + i as f64 * 0.1).collect();
        let kw: Vec<f64> = w.iter().map(|v| k * v).collect();
        let m = dominance_margin(&q, 0.7, &w);
        let ms = dominance_margin(&scaled, 0.7, &kw);
        for i in 0..q.n() {
            prop_assert!((ms[i] - c * k * m[i]).abs() <= 1e-9 * (1.0 + (c * k * m[i]).abs()));
        }
    }

    #[test]
    fn verification_is_monotone_in_lambda(q in dense_problem(), l1 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        if let Certification::Certified(c) = certify_quadratic(&q) {
            if verify_quadratic(&q, lo, &c.w) {
                prop_assert!(verify_quadratic(&q, hi, &c.w));
            }
            let m_lo = dominance_margin(&q, lo, &c.w);
            let m_hi = dominance_margin(&q, hi, &c.w);
            prop_assert!(m_lo.iter().zip(&m_hi).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn relabelling_nodes_permutes_everything(seed in 0u64..500, n in 3usize..15) {
        let q = generate_random_sdd(n, 2, 0.8, seed).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
        let p = q.permuted(&perm).unwrap();
        let l = lambda_of(&certify_quadratic(&q));
        prop_assert!((lambda_of(&certify_quadratic(&p)) - l).abs() <= 1e-12);
        let x = solve_quadratic_direct(&q).unwrap();
        let y = solve_quadratic_direct(&p).unwrap();
        let opts = RunOptions { t_max: 30, tol: 1e-300 };
        let rx = run_quadratic(&q, &QuadraticInit::zero(n), opts).unwrap();
        let ry = run_quadratic(&p, &QuadraticInit::zero(n), opts).unwrap();
        for i in 0..n {
            prop_assert!((x[i] - y[perm[i]]).abs() <= 1e-10);
            for (a, b) in rx.trace.rows.iter().zip(&ry.trace.rows) {
                prop_assert!((a.x[i] - b.x[perm[i]]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn tree_size_matches_walk_count(seed in 0u64..500, n in 2usize..12, degree in 1usize..4, depth in 0usize..6) {
        prop_assume!(degree < n);
        let g = random_graph(n, degree, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let root = seed as usize % n;
        let t = build_tree(&g, root, depth).unwrap();
        let expected = walk_count(&g, root, None, depth);
        prop_assert_eq!(t.len(), expected);
        prop_assert_eq!(projected_size(&g, root, depth), expected);
        prop_assert_eq!(t.level_counts(), level_sizes(&g, root, depth));
        t.validate(&g).unwrap();
    }

    #[test]
    fn generated_problems_round_trip_and_certify(seed in 0u64..1000, n in 3usize..25, target in 0.3f64..0.95) {
        let q = generate_random_sdd(n, 2, target, seed).unwrap();
        let c = certify_quadratic(&q);
        let cert = c.certificate().expect("generated problem certifies");
        prop_assert!(cert.lambda <= target);
        let text = format_problem(&Problem::Quadratic(q.clone())).unwrap();
        match parse_problem(&text).unwrap() {
            Problem::Quadratic(back) => prop_assert_eq!(back, q),
            Problem::General(_) => prop_assert!(false, "quadratic came back general"),
        }

        let f = generate_random_quartic(n, 2, target, seed).unwrap();
        let text = format_problem(&Problem::General(f.clone())).unwrap();
        let back = parse_problem(&text).unwrap().objective();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        prop_assert_eq!(back.evaluate(&x).unwrap(), f.evaluate(&x).unwrap());
    }
}
