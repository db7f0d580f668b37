//! Built-in problems: manufactured solutions in 2D and 3D, the Gaussian
//! conservation test and the two-soliton collision family.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::ExactSolution;
use crate::error::{Error, Result};
use crate::linsolve::SolverConfig;
use crate::mesh::{sample, Mesh, TimeGrid};
use crate::stepper::{PointSource, RelaxState, SchemeParams, SourceHook, Stepper};

pub type InitialData = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct CaseSpec {
    pub name: String,
    pub extents: Vec<(f64, f64)>,
    pub points: Vec<usize>,
    pub horizon: f64,
    pub steps: usize,
    pub params: SchemeParams,
    pub u0: InitialData,
    pub v0: InitialData,
    pub exact: Option<Arc<dyn ExactSolution + Send + Sync>>,
    pub source: Option<SourceHook>,
}

impl fmt::Debug for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseSpec")
            .field("name", &self.name)
            .field("extents", &self.extents)
            .field("points", &self.points)
            .field("horizon", &self.horizon)
            .field("steps", &self.steps)
            .field("params", &self.params)
            .field("exact", &self.exact.is_some())
            .field("source", &self.source.is_some())
            .finish()
    }
}

impl CaseSpec {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Mesh::new(&self.extents, &self.points)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn initial_state(&self, mesh: &Arc<Mesh>) -> Result<RelaxState> {
        let u0 = sample(mesh, |x| (self.u0)(x));
        let v0 = sample(mesh, |x| (self.v0)(x));
        RelaxState::initial(u0, v0)
    }

    pub fn stepper(&self, solver: SolverConfig) -> Result<Stepper> {
        let stepper = Stepper::new(self.params, self.time_grid()?, solver);
        Ok(match &self.source {
            Some(source) => stepper.with_source(source.clone()),
            None => stepper,
        })
    }

    /// `M` points per axis with the paired step count `N = M^2`.
    pub fn with_resolution(mut self, m: usize) -> CaseSpec {
        self.points = vec![m; self.dim()];
        self.steps = m * m;
        self
    }

    pub fn with_points(mut self, points: Vec<usize>) -> CaseSpec {
        self.points = points;
        self
    }

    /// Changes the step count keeping the horizon.
    pub fn with_steps(mut self, steps: usize) -> CaseSpec {
        self.steps = steps;
        self
    }

    /// Changes the horizon keeping the time step.
    pub fn with_horizon(mut self, horizon: f64) -> CaseSpec {
        let tau = self.tau();
        self.horizon = horizon;
        self.steps = (horizon / tau).round().max(1.0) as usize;
        self
    }

    /// Overrides the coefficients. Manufactured cases rebuild their sources
    /// so the exact solution stays exact.
    pub fn with_params(self, params: SchemeParams) -> CaseSpec {
        match self.name.as_str() {
            "manufactured2d" => rebuild_manufactured(self, 2, params),
            "manufactured3d" => rebuild_manufactured(self, 3, params),
            _ => CaseSpec { params, ..self },
        }
    }

    /// Built-in case by name with its default parameters.
    pub fn by_name(name: &str) -> Result<CaseSpec> {
        match name {
            "manufactured2d" => Ok(manufactured_2d()),
            "manufactured3d" => Ok(manufactured_3d()),
            "gaussian2d" => Ok(gaussian_conservation_2d()),
            "soliton" => Ok(SolitonPreset::Elastic.case()),
            other => Err(Error::Config(format!(
                "unknown case `{other}` (expected manufactured2d, manufactured3d, gaussian2d or soliton)"
            ))),
        }
    }
}

/// `u = e^{it} g(x)`, `v = 0.5 e^{it} k(x)` with trigonometric profiles whose
/// Laplacian is `-dim` times themselves.
#[derive(Clone, Copy, Debug)]
pub struct Manufactured {
    pub dim: usize,
}

impl Manufactured {
    fn profile_u(&self, x: &[f64]) -> f64 {
        let base = x[0].cos() * x[1].sin();
        if self.dim == 3 {
            base * x[2].cos()
        } else {
            base
        }
    }

    fn profile_v(&self, x: &[f64]) -> f64 {
        let base = 0.5 * x[0].sin() * x[1].sin();
        if self.dim == 3 {
            base * x[2].cos()
        } else {
            base
        }
    }

    /// `f1 = i u_t + kappa Lap u + (|u|^2 + beta |v|^2) u = (-1 - kappa d + |u|^2 + beta |v|^2) u`.
    pub fn f1(&self, params: &SchemeParams, x: &[f64], t: f64) -> Complex64 {
        let (a, b) = (self.profile_u(x), self.profile_v(x));
        let factor = -1.0 - params.kappa * self.dim as f64 + a * a + params.beta * b * b;
        Complex64::from_polar(factor * a, t)
    }

    /// Twin of [`Manufactured::f1`] for `v`.
    pub fn f2(&self, params: &SchemeParams, x: &[f64], t: f64) -> Complex64 {
        let (a, b) = (self.profile_u(x), self.profile_v(x));
        let factor = -1.0 - params.kappa * self.dim as f64 + b * b + params.beta * a * a;
        Complex64::from_polar(factor * b, t)
    }
}

impl ExactSolution for Manufactured {
    fn u(&self, x: &[f64], t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t) * self.profile_u(x)
    }

    fn v(&self, x: &[f64], t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t) * self.profile_v(x)
    }
}

fn rebuild_manufactured(base: CaseSpec, dim: usize, params: SchemeParams) -> CaseSpec {
    let exact = Manufactured { dim };
    let f1: PointSource = Arc::new(move |x, t| exact.f1(&params, x, t));
    let f2: PointSource = Arc::new(move |x, t| exact.f2(&params, x, t));
    CaseSpec {
        params,
        u0: Arc::new(move |x| exact.u(x, 0.0)),
        v0: Arc::new(move |x| exact.v(x, 0.0)),
        exact: Some(Arc::new(exact)),
        source: Some(SourceHook { f1, f2 }),
        ..base
    }
}

fn manufactured(dim: usize) -> CaseSpec {
    let base = CaseSpec {
        name: format!("manufactured{dim}d"),
        extents: vec![(0.0, 2.0 * PI); dim],
        points: vec![8; dim],
        horizon: 1.0,
        steps: 64,
        params: SchemeParams {
            kappa: 1.0,
            beta: 1.0,
        },
        u0: Arc::new(|_| Complex64::new(0.0, 0.0)),
        v0: Arc::new(|_| Complex64::new(0.0, 0.0)),
        exact: None,
        source: None,
    };
    let params = base.params;
    rebuild_manufactured(base, dim, params)
}

/// `u = e^{it} cos x sin y`, `v = 0.5 e^{it} sin x sin y` on `(0, 2 pi)^2`, `T = 1`.
pub fn manufactured_2d() -> CaseSpec {
    manufactured(2)
}

/// `u = e^{it} cos x sin y cos z`, `v = 0.5 e^{it} sin x sin y cos z` on `(0, 2 pi)^3`, `T = 1`.
pub fn manufactured_3d() -> CaseSpec {
    manufactured(3)
}

/// Two Gaussians on `(-10, 10)^2` with `kappa = 0.5`, `beta = 1.5` and `tau = h = 0.2`.
pub fn gaussian_conservation_2d() -> CaseSpec {
    CaseSpec {
        name: "gaussian2d".into(),
        extents: vec![(-10.0, 10.0); 2],
        points: vec![100; 2],
        horizon: 100.0,
        steps: 500,
        params: SchemeParams {
            kappa: 0.5,
            beta: 1.5,
        },
        u0: Arc::new(|x| Complex64::new(0.5 * (-x[0] * x[0] - x[1] * x[1]).exp(), 0.0)),
        v0: Arc::new(|x| {
            let (dx, dy) = (x[0] - 5.0, x[1] - 5.0);
            Complex64::new(0.3 * (-dx * dx - dy * dy).exp(), 0.0)
        }),
        exact: None,
        source: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolitonPreset {
    Elastic,
    Reflection,
    Entangle,
}

impl SolitonPreset {
    /// `(alpha, beta)`.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            SolitonPreset::Elastic => (1.0, 1.0),
            SolitonPreset::Reflection => (1.15, 2.0 / 3.0),
            SolitonPreset::Entangle => (1.05, 2.0 / 3.0),
        }
    }

    pub fn case(self) -> CaseSpec {
        let (alpha, beta) = self.parameters();
        soliton_1d(alpha, beta)
    }
}

impl std::str::FromStr for SolitonPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<SolitonPreset> {
        match s {
            "elastic" => Ok(SolitonPreset::Elastic),
            "reflection" => Ok(SolitonPreset::Reflection),
            "entangle" | "entanglement" => Ok(SolitonPreset::Entangle),
            other => Err(Error::Config(format!(
                "unknown soliton preset `{other}` (expected elastic, reflection or entangle)"
            ))),
        }
    }
}

fn sech_soliton(r: f64, lambda: f64, velocity_phase: f64) -> InitialData {
    Arc::new(move |x| {
        let amp = 2f64.sqrt() * r / (r * x[0] + 0.5 * lambda).cosh();
        Complex64::from_polar(amp, velocity_phase * x[0])
    })
}

/// Two counter-propagating sech solitons on `(-40, 40)`, `T = 80`, `tau = 0.01`, `h = 0.1`.
///
/// `u` starts at `x = -9` with phase `e^{i alpha x / 4}`, `v` is its mirror image.
pub fn soliton_1d(alpha: f64, beta: f64) -> CaseSpec {
    let (r1, r2) = (1.0, 1.0);
    let (lambda1, lambda2) = (18.0, -18.0);
    CaseSpec {
        name: "soliton".into(),
        extents: vec![(-40.0, 40.0)],
        points: vec![800],
        horizon: 80.0,
        steps: 8000,
        params: SchemeParams { kappa: 1.0, beta },
        u0: sech_soliton(r1, lambda1, alpha / 4.0),
        v0: sech_soliton(r2, lambda2, -alpha / 4.0),
        exact: None,
        source: None,
    }
}
