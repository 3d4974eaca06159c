use cfe_core::sqp::{
    fd_gradient, slsqp_solve, BoxConstraints, DampedBfgs, NlpProblem, SqpSettings, SqpStatus, EIGEN_FLOOR,
};
use proptest::prelude::*;

/// `f(w) = sum_i (a_i w_i^3 + b_i w_i^2 + c_i w_i) + d w_0 w_1`.
#[derive(Clone, Debug)]
struct Poly {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl Poly {
    fn value(&self, w: &[f64]) -> f64 {
        let mut v = self.d * w[0] * w[1];
        for i in 0..w.len() {
            v += self.a[i] * w[i].powi(3) + self.b[i] * w[i] * w[i] + self.c[i] * w[i];
        }
        v
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..w.len())
            .map(|i| 3.0 * self.a[i] * w[i] * w[i] + 2.0 * self.b[i] * w[i] + self.c[i])
            .collect();
        g[0] += self.d * w[1];
        g[1] += self.d * w[0];
        g
    }
}

fn poly_and_point() -> impl Strategy<Value = (Poly, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
            -3.0..3.0f64,
            prop::collection::vec(-2.0..2.0f64, n),
        )
            .prop_map(|(a, b, c, d, w)| (Poly { a, b, c, d }, w))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fd_gradient_matches_polynomial_gradient((poly, w) in poly_and_point()) {
        let bounds = BoxConstraints::unbounded(w.len());
        let fd = fd_gradient(|x: &[f64]| poly.value(x), &w, &bounds, 1e-4).unwrap();
        let exact = poly.gradient(&w);
        let norm = exact.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        for (f, e) in fd.iter().zip(&exact) {
            prop_assert!((f - e).abs() / norm <= 1e-5, "fd {f} vs exact {e}");
        }
    }

    #[test]
    fn fd_gradient_one_sided_at_box_faces((poly, w) in poly_and_point()) {
        let lower: Vec<f64> = w.clone();
        let upper: Vec<f64> = w.iter().map(|x| x + 1.0).collect();
        let bounds = BoxConstraints::new(lower, upper);
        let fd = fd_gradient(|x: &[f64]| {
            assert!(bounds.contains(x), "probe left the box");
            poly.value(x)
        }, &w, &bounds, 1e-6).unwrap();
        let exact = poly.gradient(&w);
        let norm = exact.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        for (f, e) in fd.iter().zip(&exact) {
            prop_assert!((f - e).abs() / norm <= 1e-4, "fd {f} vs exact {e}");
        }
    }

    #[test]
    fn bfgs_stays_positive_definite(
        pairs in prop::collection::vec(
            (prop::collection::vec(-1.0..1.0f64, 4), prop::collection::vec(-5.0..5.0f64, 4)),
            1..40,
        )
    ) {
        let mut bfgs = DampedBfgs::new(4);
        for (s, y) in &pairs {
            bfgs.update(s, y);
            let m = bfgs.matrix();
            prop_assert!((m - m.transpose()).amax() <= 1e-9 * m.amax().max(1.0));
            prop_assert!(bfgs.min_eigenvalue() >= EIGEN_FLOOR * 0.5, "min eigenvalue {}", bfgs.min_eigenvalue());
        }
    }
}

/// `min sum_i d_i (w_i - t_i)^2 + e^T w` over a box, optionally with a linear cut.
#[derive(Clone, Debug)]
struct Quadratic {
    d: Vec<f64>,
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cut: Option<(Vec<f64>, f64)>,
}

impl Quadratic {
    fn value(&self, w: &[f64]) -> f64 {
        (0..w.len()).map(|i| self.d[i] * (w[i] - self.t[i]).powi(2)).sum()
    }
}

fn box_quadratic() -> impl Strategy<Value = Quadratic> {
    (1usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1..10.0f64, n),
            prop::collection::vec(-1.0..2.0f64, n),
            prop::collection::vec(0.0..0.4f64, n),
            prop::collection::vec(0.6..1.0f64, n),
        )
            .prop_map(|(d, t, lower, upper)| Quadratic { d, t, lower, upper, cut: None })
    })
}

fn cut_quadratic() -> impl Strategy<Value = Quadratic> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5..5.0f64, n),
            prop::collection::vec(-0.5..0.5f64, n),
            prop::collection::vec(0.1..1.0f64, n),
            0.1..0.9f64,
        )
            .prop_map(move |(d, t, a, frac)| {
                let reach: f64 = a.iter().sum();
                Quadratic {
                    d,
                    t,
                    lower: vec![0.0; n],
                    upper: vec![1.0; n],
                    cut: Some((a, frac * reach)),
                }
            })
    })
}

fn problem(q: &Quadratic) -> NlpProblem<'_> {
    let bounds = BoxConstraints::new(q.lower.clone(), q.upper.clone());
    let mut p = NlpProblem::new(move |w: &[f64]| q.value(w), bounds).with_objective_gradient(move |w: &[f64]| {
        Ok((0..w.len()).map(|i| 2.0 * q.d[i] * (w[i] - q.t[i])).collect())
    });
    if let Some((a, b)) = &q.cut {
        p = p.constraint_with_gradient(
            move |w: &[f64]| a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() - b,
            move |_| Ok(a.clone()),
        );
    }
    p
}

fn settings(max_iterations: usize) -> SqpSettings {
    SqpSettings {
        max_iterations,
        ..SqpSettings::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn box_quadratic_reaches_projection(q in box_quadratic()) {
        let w0 = q.upper.clone();
        let result = slsqp_solve(&problem(&q), &w0, &settings(100)).unwrap();
        let optimum: Vec<f64> = (0..q.t.len()).map(|i| q.t[i].clamp(q.lower[i], q.upper[i])).collect();
        prop_assert!((result.objective - q.value(&optimum)).abs() <= 1e-6, "{} vs {}", result.objective, q.value(&optimum));
        prop_assert!(result.iterations <= 100);
        for i in 0..optimum.len() {
            prop_assert!(result.w[i] >= q.lower[i] && result.w[i] <= q.upper[i]);
        }
    }

    #[test]
    fn constrained_quadratic_iterates_are_monotone_and_boxed(q in cut_quadratic()) {
        let w0 = q.upper.clone();
        let s = settings(200);
        let result = slsqp_solve(&problem(&q), &w0, &s).unwrap();
        prop_assert!(result.status == SqpStatus::Converged, "{:?}", result.status);
        prop_assert!(result.max_violation <= s.violation_tol);
        for (i, &x) in result.w.iter().enumerate() {
            prop_assert!(x >= q.lower[i] && x <= q.upper[i], "w[{i}] = {x} outside the box");
        }
        for r in &result.trace {
            prop_assert!(r.merit_after <= r.merit_before + 1e-12, "merit rose at iteration {}: {} -> {}", r.iteration, r.merit_before, r.merit_after);
        }
    }
}

#[test]
fn constrained_quadratic_matches_kkt_solution() {
    // min (w0 - 0)^2 + (w1 - 0)^2 s.t. w0 + w1 >= 1: optimum (0.5, 0.5)
    let q = Quadratic {
        d: vec![1.0, 1.0],
        t: vec![0.0, 0.0],
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        cut: Some((vec![1.0, 1.0], 1.0)),
    };
    let r = slsqp_solve(&problem(&q), &[1.0, 1.0], &settings(100)).unwrap();
    assert!((r.objective - 0.5).abs() <= 1e-6, "{}", r.objective);
    assert!(r.iterations <= 100);
}

#[test]
fn trace_exports_as_csv() {
    let q = Quadratic {
        d: vec![1.0],
        t: vec![0.3],
        lower: vec![0.0],
        upper: vec![1.0],
        cut: None,
    };
    let r = slsqp_solve(&problem(&q), &[1.0], &settings(100)).unwrap();
    let csv = r.trace_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("iteration,objective"));
    assert_eq!(lines.len(), r.trace.len() + 1);
}
