use std::f64::consts::PI;

use lrcd::cases::{manufactured_2d, manufactured_3d, soliton_1d, CaseSpec, Manufactured};
use lrcd::diagnostics::ExactSolution;
use lrcd::mesh::Mesh;
use lrcd::stepper::SchemeParams;
use num_complex::Complex64;

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// Hand-expanded profiles: `u = e^{it} g`, `v = e^{it} k` with `Laplace g = -d g`.
fn profiles(x: &[f64]) -> (f64, f64) {
    let third = if x.len() == 3 { x[2].cos() } else { 1.0 };
    (
        x[0].cos() * x[1].sin() * third,
        0.5 * x[0].sin() * x[1].sin() * third,
    )
}

/// `i u_t + kappa Lap u + (|u|^2 + beta |v|^2) u` evaluated from the closed form.
fn continuum_lhs(params: &SchemeParams, x: &[f64], t: f64, which: usize) -> C {
    let (g, k) = profiles(x);
    let d = x.len() as f64;
    let e = C::from_polar(1.0, t);
    let (own, other) = if which == 0 { (g, k) } else { (k, g) };
    let w = e * own;
    let w_t = I * w;
    let lap = -d * w;
    I * w_t + params.kappa * lap + (own * own + params.beta * other * other) * w
}

fn gate(case: &CaseSpec, m: usize, params: SchemeParams) {
    let dim = case.dim();
    let case = case.clone().with_params(params);
    let source = case.source.as_ref().unwrap();
    let mesh = Mesh::cube(dim, (0.0, 2.0 * PI), m).unwrap();
    let mut worst = 0.0f64;
    for lin in 0..mesh.len() {
        let x = &mesh.node(lin)[..dim];
        for t in [0.0, 0.37, 1.0] {
            worst = worst.max(((source.f1)(x, t) - continuum_lhs(&params, x, t, 0)).norm());
            worst = worst.max(((source.f2)(x, t) - continuum_lhs(&params, x, t, 1)).norm());
        }
    }
    assert!(worst <= 1e-12, "dim {dim}: residual {worst:e}");
}

#[test]
fn residual_gate_2d() {
    gate(
        &manufactured_2d(),
        64,
        SchemeParams {
            kappa: 1.0,
            beta: 1.0,
        },
    );
    gate(
        &manufactured_2d(),
        64,
        SchemeParams {
            kappa: 0.4,
            beta: -1.5,
        },
    );
}

#[test]
fn residual_gate_3d() {
    gate(
        &manufactured_3d(),
        32,
        SchemeParams {
            kappa: 1.0,
            beta: 1.0,
        },
    );
    gate(
        &manufactured_3d(),
        32,
        SchemeParams {
            kappa: 2.5,
            beta: 0.25,
        },
    );
}

/// Fourth-order central differences of the exact solution itself.
fn numeric_lhs(
    exact: &dyn ExactSolution,
    params: &SchemeParams,
    x: &[f64],
    t: f64,
    which: usize,
) -> C {
    let f = |x: &[f64], t: f64| {
        if which == 0 {
            exact.u(x, t)
        } else {
            exact.v(x, t)
        }
    };
    let h = 1e-2;
    let d1 = |g: &dyn Fn(f64) -> C, s: f64| {
        (g(s - 2.0 * h) - 8.0 * g(s - h) + 8.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h)
    };
    let d2 = |g: &dyn Fn(f64) -> C, s: f64| {
        (-g(s - 2.0 * h) + 16.0 * g(s - h) - 30.0 * g(s) + 16.0 * g(s + h) - g(s + 2.0 * h))
            / (12.0 * h * h)
    };
    let w_t = d1(&|s| f(x, s), t);
    let mut lap = C::new(0.0, 0.0);
    for axis in 0..x.len() {
        let along = |s: f64| {
            let mut y = x.to_vec();
            y[axis] = s;
            f(&y, t)
        };
        lap += d2(&along, x[axis]);
    }
    let (u, v) = (exact.u(x, t), exact.v(x, t));
    let w = f(x, t);
    let coupling = if which == 0 {
        u.norm_sqr() + params.beta * v.norm_sqr()
    } else {
        v.norm_sqr() + params.beta * u.norm_sqr()
    };
    I * w_t + params.kappa * lap + coupling * w
}

#[test]
fn sources_agree_with_numerical_differentiation() {
    for case in [manufactured_2d(), manufactured_3d()] {
        let dim = case.dim();
        let exact = Manufactured { dim };
        let source = case.source.as_ref().unwrap();
        let params = case.params;
        for (j, t) in [0.0, 0.25, 0.9].into_iter().enumerate() {
            for s in 0..7 {
                let x: Vec<f64> = (0..dim)
                    .map(|i| 0.37 + 0.91 * (s * (i + 1) + j) as f64)
                    .collect();
                let n1 = numeric_lhs(&exact, &params, &x, t, 0);
                let n2 = numeric_lhs(&exact, &params, &x, t, 1);
                assert!(
                    ((source.f1)(&x, t) - n1).norm() < 1e-8,
                    "f1 dim {dim} at {x:?}"
                );
                assert!(
                    ((source.f2)(&x, t) - n2).norm() < 1e-8,
                    "f2 dim {dim} at {x:?}"
                );
            }
        }
    }
}

#[test]
fn documented_point_values() {
    let e2 = Manufactured { dim: 2 };
    assert!((e2.u(&[0.0, PI / 2.0], 0.0) - 1.0).norm() < 1e-15);
    let e3 = Manufactured { dim: 3 };
    assert!((e3.u(&[0.0, PI / 2.0, 0.0], 0.0) - 1.0).norm() < 1e-15);
    let case = manufactured_2d();
    assert_eq!(
        (case.points.clone(), case.steps, case.horizon),
        (vec![8, 8], 64, 1.0)
    );
    assert_eq!(manufactured_3d().with_resolution(12).steps, 144);
}

#[test]
fn soliton_peaks_sit_at_plus_minus_nine() {
    let case = soliton_1d(1.0, 1.0);
    let mesh = case.mesh().unwrap();
    let h = mesh.h();
    let s0 = case.initial_state(&mesh).unwrap();
    let argmax = |vals: &[C]| {
        let (i, z) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        (mesh.node(i)[0], z.norm())
    };
    let (xu, pu) = argmax(s0.u.values());
    let (xv, pv) = argmax(s0.v.values());
    assert!((xu + 9.0).abs() <= h / 2.0 + 1e-12);
    assert!((xv - 9.0).abs() <= h / 2.0 + 1e-12);
    assert!((pu - 2f64.sqrt()).abs() < 1e-12 && (pv - 2f64.sqrt()).abs() < 1e-12);
}
