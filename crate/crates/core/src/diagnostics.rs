//! Discrete invariants and error norms.
//!
//! The conserved quantities of a source-free run are
//!
//! * `M_u = ||U^n||^2` (and `M_v`),
//! * `R_u = ((Phi^{n+1/2} + Phi^{n-1/2}) / 2, 1)` for `1 <= n <= N-1`, `R_u = (Phi^0, 1)` at `n = 0`,
//! * the energy `E^n`, whose formula has separate branches at `n = 0`,
//!   interior levels and the final level `n = N`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{sample, Field, RealField};
use crate::operators::{
    inner_real, integral, norm_l2, norm_l2_real, norm_l2_squared, quadratic_a_inv_lambda,
    seminorm_h1_open,
};
use crate::stepper::{relax_update, RelaxState, SchemeParams};

/// One sample of the invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantRecord {
    pub n: usize,
    pub t: f64,
    pub m_u: f64,
    pub m_v: f64,
    /// `None` at the final level, where the half-sum mass is not defined.
    pub r_u: Option<f64>,
    pub r_v: Option<f64>,
    pub energy: f64,
}

/// Which branch of the energy formula to evaluate.
#[derive(Clone, Copy, Debug)]
pub enum EnergyCase<'a> {
    /// `n = 0`; needs the predicted `Phi^{1/2}`, `Psi^{1/2}`.
    Initial {
        phi_half: &'a RealField,
        psi_half: &'a RealField,
    },
    /// `1 <= n <= N-1`; `Phi^{n+1/2}` follows from the explicit update.
    Interior,
    /// `n = N`.
    Final,
}

pub fn mass(state: &RelaxState) -> (f64, f64) {
    (norm_l2_squared(&state.u), norm_l2_squared(&state.v))
}

/// Half-sum masses `(R_u, R_v)` of a state inside a run of `total_steps` steps.
pub fn mass_r(state: &RelaxState, total_steps: usize) -> Result<(f64, f64)> {
    if state.n == 0 {
        return Ok((integral(&state.phi), integral(&state.psi)));
    }
    if state.n >= total_steps {
        return Err(Error::MissingLevel(format!(
            "R is defined for n <= N-1 = {}, got n = {}",
            total_steps.saturating_sub(1),
            state.n
        )));
    }
    let (phi_next, psi_next) = relax_update(state)?;
    Ok((
        0.5 * (integral(&phi_next) + integral(&state.phi)),
        0.5 * (integral(&psi_next) + integral(&state.psi)),
    ))
}

fn dispersion(state: &RelaxState, params: &SchemeParams) -> f64 {
    -params.kappa * (quadratic_a_inv_lambda(&state.u) + quadratic_a_inv_lambda(&state.v))
}

fn ip(a: &RealField, b: &RealField) -> f64 {
    inner_real(a, b).expect("relaxation fields share the state mesh")
}

/// Discrete energy of `state` under the requested branch.
pub fn energy(state: &RelaxState, params: &SchemeParams, case: EnergyCase<'_>) -> Result<f64> {
    let beta = params.beta;
    let kinetic = dispersion(state, params);
    match case {
        EnergyCase::Initial { phi_half, psi_half } => {
            if state.n != 0 {
                return Err(Error::MissingLevel(format!(
                    "initial energy branch needs n = 0, got n = {}",
                    state.n
                )));
            }
            state.phi.check_mesh(phi_half)?;
            state.psi.check_mesh(psi_half)?;
            // 2 Phi^0 - Phi^{1/2}
            let phi_back = state.phi.zip_map(phi_half, |a, b| 2.0 * a - b)?;
            let psi_back = state.psi.zip_map(psi_half, |a, b| 2.0 * a - b)?;
            Ok(kinetic
                - 0.5 * (ip(&phi_back, phi_half) + ip(&psi_back, psi_half))
                - 0.5 * beta * (ip(&phi_back, psi_half) + ip(&psi_back, phi_half)))
        }
        EnergyCase::Interior => {
            if state.n == 0 {
                return Err(Error::MissingLevel(
                    "interior energy branch needs n >= 1".into(),
                ));
            }
            let (phi_next, psi_next) = relax_update(state)?;
            Ok(kinetic
                - 0.5 * (ip(&state.phi, &phi_next) + ip(&state.psi, &psi_next))
                - 0.5 * beta * (ip(&state.phi, &psi_next) + ip(&state.psi, &phi_next)))
        }
        EnergyCase::Final => {
            if state.n == 0 {
                return Err(Error::MissingLevel(
                    "final energy branch needs Phi^{N-1/2}, so n >= 1".into(),
                ));
            }
            // 2|U^N|^2 - Phi^{N-1/2}
            let u_term = state.u.zip_map(&state.phi, |u, p| 2.0 * u.norm_sqr() - p)?;
            let v_term = state.v.zip_map(&state.psi, |v, p| 2.0 * v.norm_sqr() - p)?;
            Ok(kinetic
                - 0.5 * (ip(&state.phi, &u_term) + ip(&state.psi, &v_term))
                - 0.5 * beta * (ip(&state.phi, &v_term) + ip(&state.psi, &u_term)))
        }
    }
}

/// Initial energy with `Phi^{1/2} = Phi^0`, i.e. without the predictor.
pub fn energy_reduced_initial(state: &RelaxState, params: &SchemeParams) -> f64 {
    let rho_u = state.u.modulus_squared();
    let rho_v = state.v.modulus_squared();
    dispersion(state, params)
        - 0.5 * (ip(&rho_u, &rho_u) + ip(&rho_v, &rho_v))
        - params.beta * ip(&rho_u, &rho_v)
}

/// Errors of one run against the exact solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorRecord {
    pub points: usize,
    pub steps: usize,
    pub u_l2: f64,
    pub u_h1: f64,
    pub v_l2: f64,
    pub v_h1: f64,
    /// Closing relaxation levels against `|u|^2, |v|^2`.
    pub phi_l2: f64,
    pub psi_l2: f64,
}

/// Closed-form reference solution as functions of `(x, t)`.
pub trait ExactSolution {
    fn u(&self, x: &[f64], t: f64) -> Complex64;
    fn v(&self, x: &[f64], t: f64) -> Complex64;
}

/// Errors of the final state of a run on `[0, horizon]`.
///
/// `U, V` are compared at `horizon`. For `Phi, Psi` the closing level
/// `2|U^N|^2 - Phi^{N-1/2}` is compared against `|u|^2, |v|^2`. H1 errors use
/// [`seminorm_h1_open`].
pub fn error_norms(
    state: &RelaxState,
    exact: &dyn ExactSolution,
    horizon: f64,
) -> Result<ErrorRecord> {
    let mesh = state.mesh();
    let eu = &state.u - &sample(mesh, |x| exact.u(x, horizon));
    let ev = &state.v - &sample(mesh, |x| exact.v(x, horizon));
    let (phi, psi) = relax_update(state)?;
    let ephi = &phi - &sample(mesh, |x| exact.u(x, horizon).norm_sqr());
    let epsi = &psi - &sample(mesh, |x| exact.v(x, horizon).norm_sqr());
    let h1 = |e: &Field| {
        let s = seminorm_h1_open(e);
        (norm_l2_squared(e) + s * s).sqrt()
    };
    Ok(ErrorRecord {
        points: mesh.shape()[0],
        steps: state.n,
        u_l2: norm_l2(&eu),
        u_h1: h1(&eu),
        v_l2: norm_l2(&ev),
        v_h1: h1(&ev),
        phi_l2: norm_l2_real(&ephi),
        psi_l2: norm_l2_real(&epsi),
    })
}

/// Observed order `ln(e_coarse / e_fine) / ln(M_fine / M_coarse)`; `None`
/// unless both errors are positive.
pub fn observed_order(coarse: f64, fine: f64, m_coarse: usize, m_fine: usize) -> Option<f64> {
    if coarse > 0.0 && fine > 0.0 && m_fine > m_coarse {
        Some((coarse / fine).ln() / (m_fine as f64 / m_coarse as f64).ln())
    } else {
        None
    }
}
