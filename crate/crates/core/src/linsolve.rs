//! Linear solves for the per-step operator
//!
//! ```text
//! L w = w - i s k t A_h^{-1} Lambda_h w - i s t (nu * w)
//! ```
//!
//! with `s` the step fraction (1/4 in the predictor, 1/2 otherwise), `k` the
//! dispersion coefficient, `t` the time step and `nu` a frozen real potential.
//! Its Hermitian part is the identity, so `L` is always invertible.
//!
//! The circulant part `1 - i s k t q` is inverted exactly by FFT and serves as
//! a right preconditioner for BiCGStab or restarted GMRES. A cyclic tridiagonal
//! direct solve is available for one-dimensional meshes.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Field, GridFunction, Mesh, RealField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bicgstab,
    Gmres,
    Direct1d,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "bicgstab" => Ok(Method::Bicgstab),
            "gmres" => Ok(Method::Gmres),
            "direct1d" => Ok(Method::Direct1d),
            other => Err(Error::Config(format!("unknown solver method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative residual target `||L w - z|| <= tol ||z||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Krylov dimension between GMRES restarts.
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Bicgstab,
            tol: 1e-12,
            max_iter: 500,
            restart: 30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!(
                "solver.tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        if self.restart == 0 {
            return Err(Error::Config("solver.restart must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual, measured on the unpreconditioned system.
    pub residual: f64,
    pub converged: bool,
}

/// The operator `L` for one solve; `nu` is frozen for the whole step.
#[derive(Clone, Debug)]
pub struct StepOperator {
    sigma: f64,
    kappa: f64,
    tau: f64,
    nu: RealField,
    /// `1 - i sigma kappa tau q(k)` per frequency.
    symbol: Vec<Complex64>,
}

impl StepOperator {
    pub fn new(sigma: f64, kappa: f64, tau: f64, nu: RealField) -> StepOperator {
        let spectral = nu.mesh().spectral();
        let symbol = spectral
            .ratio()
            .iter()
            .map(|&q| Complex64::new(1.0, -sigma * kappa * tau * q))
            .collect();
        StepOperator {
            sigma,
            kappa,
            tau,
            nu,
            symbol,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.nu.mesh()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nu(&self) -> &RealField {
        &self.nu
    }

    /// Symbol of the potential-free part, indexed by frequency.
    pub fn circulant_symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    /// `L w`.
    pub fn apply(&self, w: &Field) -> Result<Field> {
        self.nu.check_mesh(w)?;
        GridFunction::from_values(self.mesh(), self.apply_values(w.values()))
    }

    fn apply_values(&self, w: &[Complex64]) -> Vec<Complex64> {
        let spectral = self.mesh().spectral();
        let mut out = spectral.apply_symbol(w, |k| self.symbol[k]);
        let coupling = I * (self.sigma * self.tau);
        for ((o, &x), &nu) in out.iter_mut().zip(w).zip(self.nu.values()) {
            *o -= coupling * nu * x;
        }
        out
    }

    /// Exact inverse of the circulant part.
    fn precondition(&self, r: &[Complex64]) -> Vec<Complex64> {
        let spectral = self.mesh().spectral();
        spectral.apply_symbol(r, |k| 1.0 / self.symbol[k])
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // conj(a) . b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(op: &StepOperator, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    op.apply_values(x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| bi - ax)
        .collect()
}

/// Solves `L w = rhs`. Failure to reach the tolerance is an error carrying the report.
pub fn solve(
    op: &StepOperator,
    rhs: &Field,
    config: &SolverConfig,
) -> Result<(Field, SolveReport)> {
    op.nu.check_mesh(rhs)?;
    config.validate()?;
    let b = rhs.values();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
        return Ok((Field::zeros(op.mesh()), report));
    }
    let (x, iterations) = match config.method {
        Method::Bicgstab => bicgstab(op, b, b_norm, config),
        Method::Gmres => gmres(op, b, b_norm, config),
        Method::Direct1d => (direct_1d(op, b)?, 0),
    };
    let rel = norm(&residual(op, &x, b)) / b_norm;
    let report = SolveReport {
        iterations,
        residual: rel,
        converged: rel <= config.tol,
    };
    if !report.converged {
        return Err(Error::NotConverged(report));
    }
    Ok((GridFunction::from_values(op.mesh(), x)?, report))
}

/// Right-preconditioned BiCGStab. The true residual is checked before
/// returning; if the recurrence drifted, iteration restarts from it.
fn bicgstab(
    op: &StepOperator,
    b: &[Complex64],
    b_norm: f64,
    config: &SolverConfig,
) -> (Vec<Complex64>, usize) {
    let n = b.len();
    let target = config.tol * b_norm;
    let mut x = op.precondition(b);
    let mut iterations = 0;

    'restart: while iterations < config.max_iter {
        let mut r = residual(op, &x, b);
        if norm(&r) <= target {
            break;
        }
        let r_hat = r.clone();
        let mut rho = Complex64::new(1.0, 0.0);
        let mut alpha = Complex64::new(1.0, 0.0);
        let mut omega = Complex64::new(1.0, 0.0);
        let mut v = vec![ZERO; n];
        let mut p = vec![ZERO; n];

        while iterations < config.max_iter {
            iterations += 1;
            let rho_next = dot(&r_hat, &r);
            if rho_next.norm() == 0.0 {
                continue 'restart;
            }
            let beta = (rho_next / rho) * (alpha / omega);
            rho = rho_next;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let y = op.precondition(&p);
            v = op.apply_values(&y);
            let denom = dot(&r_hat, &v);
            if denom.norm() == 0.0 {
                continue 'restart;
            }
            alpha = rho / denom;
            let s: Vec<Complex64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi += alpha * yi;
            }
            if norm(&s) <= target {
                continue 'restart;
            }
            let z = op.precondition(&s);
            let t = op.apply_values(&z);
            let tt = dot(&t, &t).re;
            if tt == 0.0 {
                continue 'restart;
            }
            omega = dot(&t, &s) / tt;
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += omega * zi;
            }
            r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
            if norm(&r) <= target || omega.norm() == 0.0 {
                continue 'restart;
            }
        }
    }
    (x, iterations)
}

/// Right-preconditioned restarted GMRES with Givens rotations.
fn gmres(
    op: &StepOperator,
    b: &[Complex64],
    b_norm: f64,
    config: &SolverConfig,
) -> (Vec<Complex64>, usize) {
    let n = b.len();
    let target = config.tol * b_norm;
    let m = config.restart.min(n);
    let mut x = op.precondition(b);
    let mut iterations = 0;

    while iterations < config.max_iter {
        let r = residual(op, &x, b);
        let beta = norm(&r);
        if beta <= target {
            break;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;

        for j in 0..m {
            iterations += 1;
            let mut w = op.apply_values(&op.precondition(&basis[j]));
            let mut h = vec![ZERO; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(vi, &w);
                h[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let w_norm = norm(&w);
            h[j + 1] = Complex64::new(w_norm, 0.0);

            for (i, &(c, s)) in rotations.iter().enumerate() {
                let a = h[i];
                let bb = h[i + 1];
                h[i] = c * a + s * bb;
                h[i + 1] = -s.conj() * a + c * bb;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = ZERO;
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            rotations.push((c, s));
            hess.push(h);
            k_used = j + 1;

            if g[j + 1].norm() <= target || w_norm == 0.0 || iterations >= config.max_iter {
                break;
            }
            basis.push(w.iter().map(|z| z / w_norm).collect());
        }

        // back substitution on the rotated upper-triangular system
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                acc -= hess[k][i] * yk;
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![ZERO; n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (u, v) in update.iter_mut().zip(vi) {
                *u += yi * v;
            }
        }
        for (xi, d) in x.iter_mut().zip(op.precondition(&update)) {
            *xi += d;
        }
    }
    (x, iterations)
}

/// Rotation `(c, s)` with real `c` zeroing `b` in `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let (an, bn) = (a.norm(), b.norm());
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Direct solve of `A_h L w = A_h z` on a 1D mesh, which is cyclic tridiagonal.
fn direct_1d(op: &StepOperator, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let mesh = op.mesh();
    if mesh.dim() != 1 {
        return Err(Error::Config(format!(
            "the direct1d solver needs a 1D mesh, got dimension {}",
            mesh.dim()
        )));
    }
    let n = b.len();
    let h = mesh.axes()[0].spacing;
    let st = op.sigma * op.tau;
    let disp = I * (st * op.kappa / (h * h));
    let nu = op.nu.values();
    let off = |j: usize| Complex64::new(1.0 / 12.0, 0.0) - disp - I * (st * nu[j] / 12.0);

    let mut sub = vec![ZERO; n];
    let mut diag = vec![ZERO; n];
    let mut sup = vec![ZERO; n];
    let mut rhs = vec![ZERO; n];
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        sub[i] = off(prev);
        sup[i] = off(next);
        diag[i] = Complex64::new(10.0 / 12.0, 0.0) + disp * 2.0 - I * (st * nu[i] * 10.0 / 12.0);
        rhs[i] = (b[prev] + b[i] * 10.0 + b[next]) / 12.0;
    }
    Ok(solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs))
}

/// Solves a periodic tridiagonal system by the Sherman-Morrison correction of
/// two ordinary tridiagonal solves. `sub[0]` couples row 0 to the last
/// unknown and `sup[n-1]` couples the last row to unknown 0.
pub fn solve_cyclic_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    assert!(n >= 3, "cyclic system needs at least three unknowns");
    let top_right = sub[0];
    let bottom_left = sup[n - 1];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= bottom_left * top_right / gamma;

    let mut x = solve_tridiagonal(sub, &d, sup, rhs);
    let mut u = vec![ZERO; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let z = solve_tridiagonal(sub, &d, sup, &u);
    let fact = (x[0] + top_right * x[n - 1] / gamma)
        / (Complex64::new(1.0, 0.0) + z[0] + top_right * z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= fact * zi;
    }
    x
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut x = vec![ZERO; n];
    let mut pivot = diag[0];
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i] * c[i];
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i + 1] * next;
    }
    x
}

/// Cayley map `C_h = T_h^{-1} S_h` with `T_h, S_h = I -/+ (i k t / 2) A_h^{-1} Lambda_h`.
pub fn apply_c_h(w: &Field, kappa: f64, tau: f64) -> Field {
    let spectral = w.mesh().spectral();
    let ratio = spectral.ratio();
    let values = spectral.apply_symbol(w.values(), |k| {
        let a = Complex64::new(0.0, kappa * tau / 2.0 * ratio[k]);
        (1.0 + a) / (1.0 - a)
    });
    GridFunction::from_values(w.mesh(), values).expect("same length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sample;
    use crate::operators::{inner, norm_l2, norm_l2_squared};
    use std::f64::consts::PI;

    fn test_field(mesh: &Arc<Mesh>) -> Field {
        sample(mesh, |x| {
            let s: f64 = x.iter().sum();
            Complex64::new((1.3 * s).sin() + 0.2, (0.7 * x[0]).cos() * s.cos())
        })
    }

    fn potential(mesh: &Arc<Mesh>) -> RealField {
        sample(mesh, |x| {
            2.0 + 1.5 * x.iter().map(|c| c.cos()).product::<f64>()
        })
    }

    #[test]
    fn zero_time_step_is_identity() {
        let mesh = Mesh::cube(2, (0.0, 2.0 * PI), 6).unwrap();
        let op = StepOperator::new(0.5, 1.0, 0.0, potential(&mesh));
        let w = test_field(&mesh);
        let out = op.apply(&w).unwrap();
        assert!(norm_l2(&(&out - &w)) < 1e-14);
        let (x, report) = solve(&op, &w, &SolverConfig::default()).unwrap();
        assert!(report.iterations <= 1);
        assert!(norm_l2(&(&x - &w)) < 1e-13);
        let c = apply_c_h(&w, 1.0, 0.0);
        assert!(norm_l2(&(&c - &w)) < 1e-14);
    }

    #[test]
    fn hermitian_part_is_identity() {
        let mesh = Mesh::new(&[(0.0, 3.0), (0.0, 5.0)], &[9, 7]).unwrap();
        let op = StepOperator::new(0.25, 0.8, 0.3, potential(&mesh));
        let w = test_field(&mesh);
        let lw = op.apply(&w).unwrap();
        let ip = inner(&lw, &w).unwrap();
        let nn = norm_l2_squared(&w);
        assert!((ip.re - nn).abs() <= 1e-12 * nn);
    }

    #[test]
    fn all_methods_agree() {
        let mesh = Mesh::new(&[(-3.0, 3.0)], &[24]).unwrap();
        let op = StepOperator::new(0.5, 1.0, 0.05, potential(&mesh));
        let rhs = test_field(&mesh);
        let mut solutions = Vec::new();
        for method in [Method::Bicgstab, Method::Gmres, Method::Direct1d] {
            let config = SolverConfig {
                method,
                ..SolverConfig::default()
            };
            let (x, report) = solve(&op, &rhs, &config).unwrap();
            assert!(
                report.converged && report.residual <= 1e-12,
                "{method:?}: {report:?}"
            );
            let check = &op.apply(&x).unwrap() - &rhs;
            assert!(norm_l2(&check) <= 1e-12 * norm_l2(&rhs));
            solutions.push(x);
        }
        for s in &solutions[1..] {
            assert!(norm_l2(&(s - &solutions[0])) < 1e-11);
        }
    }

    #[test]
    fn non_convergence_is_an_error() {
        let mesh = Mesh::cube(2, (0.0, 2.0 * PI), 16).unwrap();
        let nu = sample(&mesh, |x| 40.0 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let op = StepOperator::new(0.5, 1.0, 1.0, nu);
        let config = SolverConfig {
            max_iter: 1,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        match solve(&op, &test_field(&mesh), &config) {
            Err(Error::NotConverged(report)) => {
                assert!(!report.converged);
                assert!(report.residual > 1e-14);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn direct_rejects_multidimensional_meshes() {
        let mesh = Mesh::cube(2, (0.0, 1.0), 4).unwrap();
        let op = StepOperator::new(0.5, 1.0, 0.1, RealField::zeros(&mesh));
        let config = SolverConfig {
            method: Method::Direct1d,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(&op, &test_field(&mesh), &config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mesh = Mesh::cube(1, (0.0, 1.0), 8).unwrap();
        let op = StepOperator::new(0.5, 1.0, 0.1, potential(&mesh));
        let (x, report) = solve(&op, &Field::zeros(&mesh), &SolverConfig::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(x.values().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn cayley_fixes_constants() {
        let mesh = Mesh::cube(2, (0.0, 1.0), 5).unwrap();
        let k = Field::constant(&mesh, Complex64::new(0.3, -1.1));
        let out = apply_c_h(&k, 2.0, 0.7);
        assert!(norm_l2(&(&out - &k)) < 1e-14);
    }
}
