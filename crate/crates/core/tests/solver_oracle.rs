use std::f64::consts::PI;
use std::sync::Arc;

use lrcd::linsolve::{solve, Method, SolverConfig, StepOperator};
use lrcd::mesh::{sample, Field, Mesh, RealField, TimeGrid};
use lrcd::operators::{inner, norm_l2, norm_l2_squared};
use lrcd::stepper::{PointSource, RelaxState, SchemeParams, SourceHook, Stepper};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;
const I: C = C::new(0.0, 1.0);

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// Dense periodic matrices `A` and `delta^2` on `m` points with spacing `h`.
fn dense_stencils(m: usize, h: f64) -> (DMatrix<C>, DMatrix<C>) {
    let mut a = DMatrix::zeros(m, m);
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        let (l, r) = ((i + m - 1) % m, (i + 1) % m);
        a[(i, i)] += c(10.0 / 12.0);
        a[(i, l)] += c(1.0 / 12.0);
        a[(i, r)] += c(1.0 / 12.0);
        d[(i, i)] += c(-2.0 / (h * h));
        d[(i, l)] += c(1.0 / (h * h));
        d[(i, r)] += c(1.0 / (h * h));
    }
    (a, d)
}

fn random_field(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng, scale: f64) -> Field {
    let vals = (0..mesh.len())
        .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
        .collect();
    Field::from_values(mesh, vals).unwrap()
}

fn random_real(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng, bound: f64) -> RealField {
    let vals = (0..mesh.len())
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    RealField::from_values(mesh, vals).unwrap()
}

fn to_vec(f: &Field) -> DVector<C> {
    DVector::from_column_slice(f.values())
}

fn rel_diff(a: &DVector<C>, b: &[C]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / a.norm()
}

#[test]
fn random_systems_match_dense_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = 16;
    let mesh = Mesh::new(&[(-3.0, 5.0)], &[m]).unwrap();
    let h = mesh.h();
    let (a, d) = dense_stencils(m, h);
    let q = a.clone().lu().solve(&d).unwrap();
    for trial in 0..40 {
        let sigma = if trial % 2 == 0 { 0.25 } else { 0.5 };
        let kappa = rng.gen_range(0.2..3.0);
        let tau = rng.gen_range(0.01..1.0);
        let nu = random_real(&mesh, &mut rng, 4.0);
        let rhs = random_field(&mesh, &mut rng, 1.0);

        let mut l = DMatrix::<C>::identity(m, m) - q.map(|x| x * I * sigma * kappa * tau);
        for i in 0..m {
            l[(i, i)] -= I * sigma * tau * nu.values()[i];
        }
        let dense = l.lu().solve(&to_vec(&rhs)).unwrap();

        let op = StepOperator::new(sigma, kappa, tau, nu.clone());
        for method in [Method::Bicgstab, Method::Gmres, Method::Direct1d] {
            let cfg = SolverConfig {
                method,
                tol: 1e-13,
                ..SolverConfig::default()
            };
            let (w, report) = solve(&op, &rhs, &cfg).unwrap();
            assert!(report.converged);
            let err = rel_diff(&dense, w.values());
            assert!(err < 1e-10, "{method:?} trial {trial}: {err:e}");
            let resid = &op.apply(&w).unwrap() - &rhs;
            assert!(norm_l2(&resid) <= 1e-13 * norm_l2(&rhs) * 1.000001);
        }
    }
}

#[test]
fn real_part_of_step_form_is_the_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let meshes = [
        Mesh::new(&[(0.0, 2.0 * PI)], &[32]).unwrap(),
        Mesh::new(&[(-1.0, 1.0), (0.0, 3.0)], &[12, 10]).unwrap(),
        Mesh::new(&[(0.0, 1.0); 3], &[6, 5, 4]).unwrap(),
    ];
    for mesh in &meshes {
        for _ in 0..50 {
            let sigma = if rng.gen_bool(0.5) { 0.25 } else { 0.5 };
            let nu = random_real(mesh, &mut rng, 10.0);
            let op = StepOperator::new(sigma, rng.gen_range(0.1..4.0), rng.gen_range(0.0..2.0), nu);
            let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
            let w = random_field(mesh, &mut rng, scale);
            let lw = op.apply(&w).unwrap();
            let n2 = norm_l2_squared(&w);
            assert!((inner(&lw, &w).unwrap().re - n2).abs() <= 1e-11 * n2);
        }
    }
}

#[test]
fn potential_free_systems_need_at_most_two_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = Mesh::new(&[(0.0, 2.0 * PI), (0.0, 2.0 * PI)], &[16, 16]).unwrap();
    for method in [Method::Bicgstab, Method::Gmres] {
        let op = StepOperator::new(0.5, 1.3, 0.7, RealField::zeros(&mesh));
        let rhs = random_field(&mesh, &mut rng, 1.0);
        let cfg = SolverConfig {
            method,
            ..SolverConfig::default()
        };
        let (w, report) = solve(&op, &rhs, &cfg).unwrap();
        assert!(report.iterations <= 2, "{method:?}: {report:?}");
        assert!(norm_l2(&(&op.apply(&w).unwrap() - &rhs)) <= 1e-12 * norm_l2(&rhs));
    }
}

/// Scheme in its original multiplied-through form
/// `i A (W' - W)/dt + kappa D (W' + W)/2 + A diag(nu) (W' + W)/2 = A f`.
fn dense_stage(
    a: &DMatrix<C>,
    d: &DMatrix<C>,
    kappa: f64,
    dt: f64,
    nu: &[f64],
    w: &DVector<C>,
    f: &DVector<C>,
) -> DVector<C> {
    let m = w.len();
    let mut nu_diag = DMatrix::<C>::zeros(m, m);
    for i in 0..m {
        nu_diag[(i, i)] = c(nu[i]);
    }
    let an = a * &nu_diag;
    let lhs = a.map(|x| x * I / dt) + d.map(|x| x * kappa / 2.0) + an.map(|x| x / 2.0);
    let rhs_op = a.map(|x| x * I / dt) - d.map(|x| x * kappa / 2.0) - an.map(|x| x / 2.0);
    lhs.lu().solve(&(rhs_op * w + a * f)).unwrap()
}

fn forcing(seed: f64) -> PointSource {
    Arc::new(move |x, t| {
        C::from_polar(1.0, t) * C::new((x[0] + seed).sin(), 0.3 * (2.0 * x[0]).cos())
    })
}

#[test]
fn first_steps_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let m = 16;
    let mesh = Mesh::new(&[(0.0, 2.0 * PI)], &[m]).unwrap();
    let (a, d) = dense_stencils(m, mesh.h());
    let params = SchemeParams {
        kappa: 0.8,
        beta: 1.7,
    };
    let grid = TimeGrid::new(0.3, 3).unwrap();
    let tau = grid.tau;
    let (f1, f2) = (forcing(0.4), forcing(-1.1));
    let u0 = random_field(&mesh, &mut rng, 1.0);
    let v0 = random_field(&mesh, &mut rng, 1.0);
    let fvec = |f: &PointSource, t: f64| to_vec(&sample(&mesh, |x| f(x, t)));

    for method in [Method::Bicgstab, Method::Gmres, Method::Direct1d] {
        let cfg = SolverConfig {
            method,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        let stepper = Stepper::new(params, grid, cfg).with_source(SourceHook {
            f1: f1.clone(),
            f2: f2.clone(),
        });
        let s0 = RelaxState::initial(u0.clone(), v0.clone()).unwrap();
        let s1 = stepper.step(&s0).unwrap();
        let s2 = stepper.step(&s1).unwrap();

        let mod2 = |w: &DVector<C>| w.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>();
        let (u, v) = (to_vec(&u0), to_vec(&v0));
        let (phi0, psi0) = (mod2(&u), mod2(&v));
        let pot = |p: &[f64], q: &[f64]| {
            p.iter()
                .zip(q)
                .map(|(a, b)| a + params.beta * b)
                .collect::<Vec<f64>>()
        };

        let t_q = tau / 4.0;
        let uh = dense_stage(
            &a,
            &d,
            params.kappa,
            tau / 2.0,
            &pot(&phi0, &psi0),
            &u,
            &fvec(&f1, t_q),
        );
        let vh = dense_stage(
            &a,
            &d,
            params.kappa,
            tau / 2.0,
            &pot(&psi0, &phi0),
            &v,
            &fvec(&f2, t_q),
        );
        let (phi_h, psi_h) = (mod2(&uh), mod2(&vh));
        let u1 = dense_stage(
            &a,
            &d,
            params.kappa,
            tau,
            &pot(&phi_h, &psi_h),
            &u,
            &fvec(&f1, tau / 2.0),
        );
        let v1 = dense_stage(
            &a,
            &d,
            params.kappa,
            tau,
            &pot(&psi_h, &phi_h),
            &v,
            &fvec(&f2, tau / 2.0),
        );

        assert!(rel_diff(&u1, s1.u.values()) < 1e-10, "{method:?}");
        assert!(rel_diff(&v1, s1.v.values()) < 1e-10, "{method:?}");
        for (x, y) in phi_h.iter().zip(s1.phi.values()) {
            assert!((x - y).abs() < 1e-10);
        }

        let relax = |w: &DVector<C>, old: &[f64]| {
            w.iter()
                .zip(old)
                .map(|(z, p)| 2.0 * z.norm_sqr() - p)
                .collect::<Vec<f64>>()
        };
        let (phi_3, psi_3) = (relax(&u1, &phi_h), relax(&v1, &psi_h));
        let u2 = dense_stage(
            &a,
            &d,
            params.kappa,
            tau,
            &pot(&phi_3, &psi_3),
            &u1,
            &fvec(&f1, 1.5 * tau),
        );
        let v2 = dense_stage(
            &a,
            &d,
            params.kappa,
            tau,
            &pot(&psi_3, &phi_3),
            &v1,
            &fvec(&f2, 1.5 * tau),
        );
        assert!(rel_diff(&u2, s2.u.values()) < 1e-10, "{method:?}");
        assert!(rel_diff(&v2, s2.v.values()) < 1e-10, "{method:?}");
    }
}
