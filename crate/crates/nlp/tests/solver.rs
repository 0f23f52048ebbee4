use std::sync::Arc;

use adiff::{AVar, Scalar, Tape};
use nalgebra::{DMatrix, DVector};
use nlp::{
    AugmentedLagrangian, BlockNlp, BlockNlpBuilder, HessianMode, InteriorPoint, NlpModel, Solution, SolveStatus,
    SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Expr<'t> = AVar<'t>;

/// Small dense problem: one objective graph, one constraint graph over all
/// variables.
fn problem(
    n: usize,
    x0: &[f64],
    bounds: (&[f64], &[f64]),
    objective: impl for<'t> Fn(&[Expr<'t>]) -> Expr<'t>,
    constraints: impl for<'t> Fn(&[Expr<'t>]) -> Vec<Expr<'t>>,
    con_bounds: (&[f64], &[f64]),
) -> BlockNlp {
    let mut b = BlockNlpBuilder::new();
    let vars: Vec<usize> = b.add_variables(bounds.0, bounds.1, x0).collect();
    let t = Tape::new();
    let x = t.inputs(n);
    let f = Arc::new(t.compile(&x, &[objective(&x)]));
    b.add_objective(f, vars.clone());
    let t = Tape::new();
    let x = t.inputs(n);
    let c = constraints(&x);
    if !c.is_empty() {
        let g = Arc::new(t.compile(&x, &c));
        b.add_constraints(g, vars, con_bounds.0, con_bounds.1);
    }
    b.build()
}

fn ipm() -> InteriorPoint {
    InteriorPoint::new(SolverOptions::default())
}

/// ∇f + Jᵀλ − z_l + z_u at the solution.
fn stationarity(model: &dyn NlpModel, sol: &Solution) -> f64 {
    let n = model.n_vars();
    let mut g = vec![0.0; n];
    model.gradient(&sol.x, &mut g).unwrap();
    let js = model.jacobian_structure();
    let mut jv = vec![0.0; js.len()];
    model.jacobian_values(&sol.x, &mut jv).unwrap();
    for (k, &(r, c)) in js.iter().enumerate() {
        g[c] += jv[k] * sol.lambda[r];
    }
    (0..n).map(|j| (g[j] - sol.z_lower[j] + sol.z_upper[j]).abs()).fold(0.0, f64::max)
}

fn hs071() -> BlockNlp {
    problem(
        4,
        &[1.0, 5.0, 5.0, 1.0],
        (&[1.0; 4], &[5.0; 4]),
        |x| x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2],
        |x| vec![x[0] * x[1] * x[2] * x[3], x[0].square() + x[1].square() + x[2].square() + x[3].square()],
        (&[25.0, 40.0], &[f64::INFINITY, 40.0]),
    )
}

#[test]
fn active_general_inequality() {
    let inf = f64::INFINITY;
    let m = problem(1, &[0.0], (&[-inf], &[inf]), |x| (x[0] - 1.0).square(), |x| vec![x[0]], (&[2.0], &[inf]));
    let sol = ipm().solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 2.0).abs() < 1e-6, "x = {}", sol.x[0]);
    assert!((sol.report.objective - 1.0).abs() < 1e-6);
    // dL/dx = 2(x-1) + λ = 0 → λ = -2 with the c ≥ 2 convention
    assert!((sol.lambda[0] + 2.0).abs() < 1e-5, "lambda = {}", sol.lambda[0]);
}

#[test]
fn active_simple_bound() {
    let m = problem(1, &[5.0], (&[2.0], &[10.0]), |x| (x[0] - 1.0).square(), |_| vec![], (&[], &[]));
    let sol = ipm().solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 2.0).abs() < 1e-6);
    assert!((sol.z_lower[0] - 2.0).abs() < 1e-5);
    assert!(stationarity(&m, &sol) < 1e-6);
}

#[test]
fn rosenbrock_from_standard_start() {
    let inf = f64::INFINITY;
    let m = problem(
        2,
        &[-1.2, 1.0],
        (&[-inf, -inf], &[inf, inf]),
        |x| (x[0] - 1.0).square() + (x[1] - x[0].square()).square() * 100.0,
        |_| vec![],
        (&[], &[]),
    );
    let sol = ipm().solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 1.0).abs() < 1e-6, "{:?}", sol.x);
}

#[test]
fn hs071_reference_solution() {
    let m = hs071();
    let sol = ipm().solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    let expected = [1.0, 4.742_999_64, 3.821_149_98, 1.379_408_29];
    for (a, b) in sol.x.iter().zip(expected) {
        assert!((a - b).abs() < 1e-6, "{:?}", sol.x);
    }
    assert!((sol.report.objective - 17.014_017_29).abs() < 1e-6);
    assert!(stationarity(&m, &sol) < 1e-6);
}

#[test]
fn accepted_steps_decrease_barrier_objective_or_violation() {
    for m in [hs071()] {
        let sol = ipm().solve(&m);
        for rec in &sol.report.log {
            if let Some((before, after)) = rec.merit {
                assert!(after <= before + 1e-12 * before.abs().max(1.0), "iter {}: {before} -> {after}", rec.iter);
            }
        }
        assert!(sol.report.log.iter().any(|r| r.merit.is_some()));
    }
}

#[test]
fn random_equality_qps_match_kkt_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let n = rng.gen_range(3..9);
        let m = rng.gen_range(1..n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = &a * a.transpose() + DMatrix::identity(n, n);
        let cvec = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let amat = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let bvec = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));

        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&q);
        kkt.view_mut((n, 0), (m, n)).copy_from(&amat);
        kkt.view_mut((0, n), (n, m)).copy_from(&amat.transpose());
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&cvec));
        rhs.rows_mut(n, m).copy_from(&bvec);
        let exact = kkt.lu().solve(&rhs).unwrap();

        let (qc, cc, ac) = (q.clone(), cvec.clone(), amat.clone());
        let inf = vec![f64::INFINITY; n];
        let ninf = vec![f64::NEG_INFINITY; n];
        let bb: Vec<f64> = bvec.iter().copied().collect();
        let model = problem(
            n,
            &vec![0.0; n],
            (&ninf, &inf),
            move |x| {
                let mut s = AVar::Const(0.0);
                for i in 0..x.len() {
                    s = s + x[i] * cc[i];
                    for j in 0..x.len() {
                        s = s + x[i] * x[j] * (0.5 * qc[(i, j)]);
                    }
                }
                s
            },
            move |x| {
                (0..ac.nrows())
                    .map(|r| (0..x.len()).fold(AVar::Const(0.0), |s, j| s + x[j] * ac[(r, j)]))
                    .collect()
            },
            (&bb, &bb),
        );
        let sol = ipm().solve(&model);
        assert_eq!(sol.report.status, SolveStatus::Optimal);
        for i in 0..n {
            assert!((sol.x[i] - exact[i]).abs() < 1e-8, "x[{i}] {} vs {}", sol.x[i], exact[i]);
        }
        for i in 0..m {
            assert!((sol.lambda[i] - exact[n + i]).abs() < 1e-8, "lambda[{i}] {} vs {}", sol.lambda[i], exact[n + i]);
        }
    }
}

#[test]
fn backends_agree() {
    let m = hs071();
    let a = ipm().solve(&m);
    let b = AugmentedLagrangian::new(SolverOptions { tol: 1e-9, ..SolverOptions::default() }).solve(&m);
    assert_eq!(b.report.status, SolveStatus::Optimal);
    for (x, y) in a.x.iter().zip(&b.x) {
        assert!((x - y).abs() < 1e-6, "{:?} vs {:?}", a.x, b.x);
    }
    assert!((a.report.objective - b.report.objective).abs() < 1e-6);
}

#[test]
fn quasi_newton_mode_converges() {
    let m = hs071();
    let opts = SolverOptions { hessian: HessianMode::QuasiNewton, ..SolverOptions::default() };
    let sol = InteriorPoint::new(opts).solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    assert!((sol.report.objective - 17.014_017_29).abs() < 1e-5);
}

#[test]
fn contradictory_constraints_are_reported_infeasible() {
    let inf = f64::INFINITY;
    let m = problem(
        1,
        &[0.0],
        (&[-inf], &[inf]),
        |x| x[0].square(),
        |x| vec![x[0], x[0]],
        (&[2.0, -inf], &[inf, 1.0]),
    );
    let sol = ipm().solve(&m);
    assert_eq!(sol.report.status, SolveStatus::Infeasible);
}

#[test]
fn iteration_cap_is_respected() {
    let m = hs071();
    let sol = InteriorPoint::new(SolverOptions { max_iter: 2, ..SolverOptions::default() }).solve(&m);
    assert_eq!(sol.report.status, SolveStatus::MaxIterations);
    assert_eq!(sol.report.iterations, 2);
    assert!(sol.report.log_text().lines().count() >= 3);
}
