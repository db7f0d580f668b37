//! The relaxation time integrator.
//!
//! Primal unknowns `U, V` live at `t_n`, the relaxation variables
//! `Phi ~ |u|^2` and `Psi ~ |v|^2` at `t_{n-1/2}`. One run consists of
//!
//! 1. a predictor over `[0, tau/2]` with the potential frozen at `t_0`,
//!    giving `U^{1/2}, V^{1/2}`;
//! 2. `Phi^{1/2} = |U^{1/2}|^2`, `Psi^{1/2} = |V^{1/2}|^2`, then the first
//!    full Crank-Nicolson step to `t_1`;
//! 3. for every later step the explicit update
//!    `Phi^{n+1/2} = 2|U^n|^2 - Phi^{n-1/2}` followed by two independent
//!    linear solves for `U^{n+1}` and `V^{n+1}`.
//!
//! Every solve has the form `L w = Z` (see [`crate::linsolve`]); with the step
//! fraction `s`, `Z = w_old + i s k t A_h^{-1} Lambda_h w_old + i s t nu w_old`.
//! A source `f` on the right of the PDE adds `-2 i s t f` at the step midpoint.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{solve, SolverConfig, StepOperator};
use crate::mesh::{sample, Field, GridFunction, Mesh, RealField, TimeGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients of `i u_t + kappa Lap u + (|u|^2 + beta |v|^2) u = 0` and its twin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    pub kappa: f64,
    pub beta: f64,
}

/// State at time level `n`.
///
/// `phi`, `psi` hold `Phi^{n-1/2}`, `Psi^{n-1/2}` for `n >= 1` and the
/// initial `|u0|^2`, `|v0|^2` at `n = 0`.
#[derive(Clone, Debug)]
pub struct RelaxState {
    pub n: usize,
    pub u: Field,
    pub v: Field,
    pub phi: RealField,
    pub psi: RealField,
}

impl RelaxState {
    pub fn initial(u0: Field, v0: Field) -> Result<RelaxState> {
        u0.check_mesh(&v0)?;
        let phi = u0.modulus_squared();
        let psi = v0.modulus_squared();
        Ok(RelaxState {
            n: 0,
            u: u0,
            v: v0,
            phi,
            psi,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u.mesh()
    }
}

/// Pointwise source term of `(x, t)`.
pub type PointSource = Arc<dyn Fn(&[f64], f64) -> Complex64 + Send + Sync>;

/// Right-hand sides `(f1, f2)` of a forced system.
#[derive(Clone)]
pub struct SourceHook {
    pub f1: PointSource,
    pub f2: PointSource,
}

impl SourceHook {
    fn sample(&self, mesh: &Arc<Mesh>, t: f64) -> (Field, Field) {
        (
            sample(mesh, |x| (self.f1)(x, t)),
            sample(mesh, |x| (self.f2)(x, t)),
        )
    }
}

impl std::fmt::Debug for SourceHook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SourceHook")
    }
}

/// `Phi^{n+1/2} = 2|U^n|^2 - Phi^{n-1/2}` and its twin.
pub fn relax_update(state: &RelaxState) -> Result<(RealField, RealField)> {
    if state.n == 0 {
        return Err(Error::MissingLevel(
            "the explicit relaxation update starts at n = 1".into(),
        ));
    }
    let phi = state.u.zip_map(&state.phi, |u, p| 2.0 * u.norm_sqr() - p)?;
    let psi = state.v.zip_map(&state.psi, |v, p| 2.0 * v.norm_sqr() - p)?;
    Ok((phi, psi))
}

#[derive(Clone, Debug)]
pub struct Stepper {
    pub params: SchemeParams,
    pub grid: TimeGrid,
    pub solver: SolverConfig,
    pub source: Option<SourceHook>,
}

impl Stepper {
    pub fn new(params: SchemeParams, grid: TimeGrid, solver: SolverConfig) -> Stepper {
        Stepper {
            params,
            grid,
            solver,
            source: None,
        }
    }

    pub fn with_source(mut self, source: SourceHook) -> Stepper {
        self.source = Some(source);
        self
    }

    fn potentials(&self, phi: &RealField, psi: &RealField) -> Result<(RealField, RealField)> {
        let beta = self.params.beta;
        Ok((
            phi.zip_map(psi, |p, q| p + beta * q)?,
            psi.zip_map(phi, |q, p| q + beta * p)?,
        ))
    }

    /// One solve `L_s[nu] w_new = Z(w_old)` plus the optional source at the midpoint.
    pub fn solve_component(
        &self,
        sigma: f64,
        w_old: &Field,
        nu: &RealField,
        source: Option<&Field>,
    ) -> Result<Field> {
        let tau = self.grid.tau;
        let op = StepOperator::new(sigma, self.params.kappa, tau, nu.clone());
        let spectral = w_old.mesh().spectral();
        let symbol = op.circulant_symbol();
        // (1 + i s k t q) w_old: conjugate of the implicit symbol
        let mut rhs = spectral.apply_symbol(w_old.values(), |k| symbol[k].conj());
        let coupling = I * (sigma * tau);
        for ((z, &w), &p) in rhs.iter_mut().zip(w_old.values()).zip(nu.values()) {
            *z += coupling * p * w;
        }
        if let Some(f) = source {
            let forcing = I * (2.0 * sigma * tau);
            for (z, &fv) in rhs.iter_mut().zip(f.values()) {
                *z -= forcing * fv;
            }
        }
        let rhs = GridFunction::from_values(w_old.mesh(), rhs)?;
        let (w_new, _report) = solve(&op, &rhs, &self.solver)?;
        Ok(w_new)
    }

    /// The two decoupled solves of one stage, run concurrently.
    fn solve_pair(
        &self,
        sigma: f64,
        u: &Field,
        v: &Field,
        phi: &RealField,
        psi: &RealField,
        t: f64,
    ) -> Result<(Field, Field)> {
        let (nu_u, nu_v) = self.potentials(phi, psi)?;
        let forcing = self.source.as_ref().map(|s| s.sample(u.mesh(), t));
        let (fu, fv) = match &forcing {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let (u_new, v_new) = rayon::join(
            || self.solve_component(sigma, u, &nu_u, fu),
            || self.solve_component(sigma, v, &nu_v, fv),
        );
        Ok((u_new?, v_new?))
    }

    /// Predictor: `U^{1/2}, V^{1/2}` with the potential frozen at `t_0`.
    pub fn predict_half(&self, state: &RelaxState) -> Result<(Field, Field)> {
        if state.n != 0 {
            return Err(Error::MissingLevel(format!(
                "the predictor runs from n = 0, state is at n = {}",
                state.n
            )));
        }
        self.solve_pair(
            0.25,
            &state.u,
            &state.v,
            &state.phi,
            &state.psi,
            self.grid.quarter(),
        )
    }

    /// Sets `Phi^{1/2} = |U^{1/2}|^2` and takes the first full step to `n = 1`.
    pub fn correct_first(
        &self,
        state: &RelaxState,
        u_half: &Field,
        v_half: &Field,
    ) -> Result<RelaxState> {
        if state.n != 0 {
            return Err(Error::MissingLevel(format!(
                "the first correction runs from n = 0, state is at n = {}",
                state.n
            )));
        }
        let phi = u_half.modulus_squared();
        let psi = v_half.modulus_squared();
        let (u, v) = self.solve_pair(0.5, &state.u, &state.v, &phi, &psi, self.grid.half(0))?;
        Ok(RelaxState {
            n: 1,
            u,
            v,
            phi,
            psi,
        })
    }

    /// One step `n -> n+1` for `n >= 1`.
    pub fn advance(&self, state: &RelaxState) -> Result<RelaxState> {
        let (phi, psi) = relax_update(state)?;
        let (u, v) =
            self.solve_pair(0.5, &state.u, &state.v, &phi, &psi, self.grid.half(state.n))?;
        Ok(RelaxState {
            n: state.n + 1,
            u,
            v,
            phi,
            psi,
        })
    }

    /// Whichever of the first step or a regular step applies to `state`.
    pub fn step(&self, state: &RelaxState) -> Result<RelaxState> {
        if state.n == 0 {
            let (u_half, v_half) = self.predict_half(state)?;
            self.correct_first(state, &u_half, &v_half)
        } else {
            self.advance(state)
        }
    }

    /// Runs all steps of the time grid from `initial`, calling `observer`
    /// with each new state and its time.
    pub fn run<F>(&self, initial: RelaxState, mut observer: F) -> Result<RelaxState>
    where
        F: FnMut(&RelaxState, f64) -> Result<()>,
    {
        let mut state = initial;
        while state.n < self.grid.steps {
            let n = state.n;
            state = self.step(&state).map_err(|e| Error::Step {
                step: n,
                source: Box::new(e),
            })?;
            observer(&state, self.grid.node(state.n))?;
        }
        Ok(state)
    }
}
