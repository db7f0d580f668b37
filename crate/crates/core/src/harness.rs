//! Experiment drivers: convergence studies, conservation runs and collisions.

use rayon::prelude::*;

use crate::cases::CaseSpec;
use crate::diagnostics::{
    energy, error_norms, mass, mass_r, observed_order, EnergyCase, ErrorRecord, InvariantRecord,
};
use crate::error::{Error, Result};
use crate::linsolve::SolverConfig;
use crate::mesh::Field;
use crate::operators::norm_inf;
use crate::stepper::RelaxState;

/// Spatial resolution and step count of one run in a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rung {
    pub points: usize,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct StudyPlan {
    pub case: CaseSpec,
    pub ladder: Vec<Rung>,
    pub solver: SolverConfig,
    /// Smallest acceptable observed order; `None` disables the check.
    pub min_order: Option<f64>,
}

impl StudyPlan {
    /// Ladder of `M` values with `N = M^2`.
    pub fn paired(case: CaseSpec, points: &[usize], solver: SolverConfig) -> Result<StudyPlan> {
        let plan = StudyPlan {
            case,
            ladder: points
                .iter()
                .map(|&m| Rung {
                    points: m,
                    steps: m * m,
                })
                .collect(),
            solver,
            min_order: Some(3.8),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 2 {
            return Err(Error::Config(
                "a convergence ladder needs at least two rungs".into(),
            ));
        }
        if self.ladder.windows(2).any(|w| w[1].points <= w[0].points) {
            return Err(Error::Config("ladder must be strictly increasing".into()));
        }
        if self.case.exact.is_none() {
            return Err(Error::Config(format!(
                "case `{}` has no exact solution",
                self.case.name
            )));
        }
        self.solver.validate()
    }
}

/// Observed orders of one rung against the previous one.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OrderRow {
    pub u_l2: Option<f64>,
    pub u_h1: Option<f64>,
    pub v_l2: Option<f64>,
    pub v_h1: Option<f64>,
    pub phi_l2: Option<f64>,
    pub psi_l2: Option<f64>,
}

impl OrderRow {
    pub fn all(&self) -> [Option<f64>; 6] {
        [
            self.u_l2,
            self.u_h1,
            self.v_l2,
            self.v_h1,
            self.phi_l2,
            self.psi_l2,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorRecord>,
}

impl ConvergenceTable {
    /// One entry per row; the first row has no orders.
    pub fn orders(&self) -> Vec<OrderRow> {
        let mut out = vec![OrderRow::default()];
        for w in self.rows.windows(2) {
            let (c, f) = (&w[0], &w[1]);
            let o = |a: f64, b: f64| observed_order(a, b, c.points, f.points);
            out.push(OrderRow {
                u_l2: o(c.u_l2, f.u_l2),
                u_h1: o(c.u_h1, f.u_h1),
                v_l2: o(c.v_l2, f.v_l2),
                v_h1: o(c.v_h1, f.v_h1),
                phi_l2: o(c.phi_l2, f.phi_l2),
                psi_l2: o(c.psi_l2, f.psi_l2),
            });
        }
        out
    }

    /// Fails on the first observed order below `min`.
    pub fn check_orders(&self, min: f64) -> Result<()> {
        for (row, orders) in self.rows.iter().zip(self.orders()) {
            for order in orders.all().into_iter().flatten() {
                if order < min {
                    return Err(Error::OrderCheck {
                        points: row.points,
                        order,
                        min,
                    });
                }
            }
        }
        Ok(())
    }

    /// Plain-text table in the usual errors/orders layout.
    pub fn render(&self) -> String {
        let fmt_order = |o: Option<f64>| o.map_or_else(|| "--".to_string(), |v| format!("{v:.2}"));
        let mut s = format!(
            "{:>4} {:>11} {:>5} {:>11} {:>5} {:>11} {:>5} {:>11} {:>5} | {:>11} {:>5} {:>11} {:>5}\n",
            "M", "|U-u|", "C.O.", "|U-u|_1", "C.O.", "|V-v|", "C.O.", "|V-v|_1", "C.O.", "|Phi-phi|", "C.O.", "|Psi-psi|", "C.O."
        );
        for (r, o) in self.rows.iter().zip(self.orders()) {
            s.push_str(&format!(
                "{:>4} {:>11.4E} {:>5} {:>11.4E} {:>5} {:>11.4E} {:>5} {:>11.4E} {:>5} | {:>11.4E} {:>5} {:>11.4E} {:>5}\n",
                r.points,
                r.u_l2,
                fmt_order(o.u_l2),
                r.u_h1,
                fmt_order(o.u_h1),
                r.v_l2,
                fmt_order(o.v_l2),
                r.v_h1,
                fmt_order(o.v_h1),
                r.phi_l2,
                fmt_order(o.phi_l2),
                r.psi_l2,
                fmt_order(o.psi_l2),
            ));
        }
        s
    }
}

/// Runs one rung of a manufactured case to its horizon and measures errors.
pub fn run_rung(case: &CaseSpec, rung: Rung, solver: &SolverConfig) -> Result<ErrorRecord> {
    let exact = case
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("case `{}` has no exact solution", case.name)))?;
    let case = case
        .clone()
        .with_points(vec![rung.points; case.dim()])
        .with_steps(rung.steps);
    let mesh = case.mesh()?;
    let stepper = case.stepper(*solver)?;
    let last = stepper.run(case.initial_state(&mesh)?, |_, _| Ok(()))?;
    let mut record = error_norms(&last, exact.as_ref(), case.horizon)?;
    record.points = rung.points;
    Ok(record)
}

/// Runs every rung (in parallel) and checks the observed orders.
pub fn convergence_study(plan: &StudyPlan) -> Result<ConvergenceTable> {
    plan.validate()?;
    let rows = plan
        .ladder
        .par_iter()
        .map(|&rung| run_rung(&plan.case, rung, &plan.solver))
        .collect::<Result<Vec<_>>>()?;
    let table = ConvergenceTable { rows };
    if let Some(min) = plan.min_order {
        table.check_orders(min)?;
    }
    Ok(table)
}

/// Solution sample kept for plotting.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub n: usize,
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

/// What to record along a run.
#[derive(Clone, Copy, Debug)]
pub struct Cadence {
    /// Emit invariants every this many steps (the first and last level always).
    pub invariants: usize,
    /// Keep a snapshot every this many steps, if set.
    pub snapshots: Option<usize>,
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence {
            invariants: 1,
            snapshots: None,
        }
    }
}

/// Per-step sup norms of the two components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<InvariantRecord>,
    pub snapshots: Vec<Snapshot>,
    pub peaks: Vec<PeakSample>,
    pub final_state: RelaxState,
}

fn record(
    state: &RelaxState,
    t: f64,
    case: &CaseSpec,
    energy_case: EnergyCase<'_>,
) -> Result<InvariantRecord> {
    let (m_u, m_v) = mass(state);
    let r = if state.n < case.steps || state.n == 0 {
        Some(mass_r(state, case.steps)?)
    } else {
        None
    };
    Ok(InvariantRecord {
        n: state.n,
        t,
        m_u,
        m_v,
        r_u: r.map(|r| r.0),
        r_v: r.map(|r| r.1),
        energy: energy(state, &case.params, energy_case)?,
    })
}

/// Steps `case` to its horizon, emitting invariant rows at the cadence.
///
/// The initial row needs `Phi^{1/2}`, so it is emitted right after the first
/// step, followed by the row for `n = 1` when due. The final level uses the
/// closing energy branch and has no half-sum mass.
pub fn simulate<R, S>(
    case: &CaseSpec,
    solver: &SolverConfig,
    cadence: Cadence,
    mut on_record: R,
    mut on_snapshot: S,
) -> Result<RunOutput>
where
    R: FnMut(&InvariantRecord) -> Result<()>,
    S: FnMut(&Snapshot) -> Result<()>,
{
    if cadence.invariants == 0 || cadence.snapshots == Some(0) {
        return Err(Error::Config("cadence must be positive".into()));
    }
    let mesh = case.mesh()?;
    let stepper = case.stepper(*solver)?;
    let initial = case.initial_state(&mesh)?;
    let total = case.steps;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut peaks = vec![PeakSample {
        t: 0.0,
        u: norm_inf(&initial.u),
        v: norm_inf(&initial.v),
    }];
    let mut keep_snapshot =
        |state: &RelaxState, t: f64, snapshots: &mut Vec<Snapshot>| -> Result<()> {
            if let Some(every) = cadence.snapshots {
                if state.n.is_multiple_of(every) || state.n == total {
                    let snap = Snapshot {
                        n: state.n,
                        t,
                        u: state.u.clone(),
                        v: state.v.clone(),
                    };
                    on_snapshot(&snap)?;
                    snapshots.push(snap);
                }
            }
            Ok(())
        };
    keep_snapshot(&initial, 0.0, &mut snapshots)?;

    let first = initial.clone();
    let final_state = stepper.run(initial, |state, t| {
        peaks.push(PeakSample {
            t,
            u: norm_inf(&state.u),
            v: norm_inf(&state.v),
        });
        if state.n == 1 {
            let row = record(
                &first,
                0.0,
                case,
                EnergyCase::Initial {
                    phi_half: &state.phi,
                    psi_half: &state.psi,
                },
            )?;
            on_record(&row)?;
            records.push(row);
        }
        let due = state.n.is_multiple_of(cadence.invariants) || state.n == total;
        if due {
            let branch = if state.n == total {
                EnergyCase::Final
            } else {
                EnergyCase::Interior
            };
            let row = record(state, t, case, branch)?;
            on_record(&row)?;
            records.push(row);
        }
        keep_snapshot(state, t, &mut snapshots)
    })?;

    Ok(RunOutput {
        records,
        snapshots,
        peaks,
        final_state,
    })
}

/// Source-free run emitting invariants only.
pub fn conservation_run<R>(
    case: &CaseSpec,
    solver: &SolverConfig,
    cadence: usize,
    on_record: R,
) -> Result<RunOutput>
where
    R: FnMut(&InvariantRecord) -> Result<()>,
{
    if case.source.is_some() {
        return Err(Error::Config(format!(
            "case `{}` is forced; conservation runs need a source-free case",
            case.name
        )));
    }
    simulate(
        case,
        solver,
        Cadence {
            invariants: cadence,
            snapshots: None,
        },
        on_record,
        |_| Ok(()),
    )
}

/// Collision run keeping snapshots every `snapshot_every` time units.
pub fn collision_run<R, S>(
    case: &CaseSpec,
    solver: &SolverConfig,
    snapshot_every: f64,
    invariant_cadence: usize,
    on_record: R,
    on_snapshot: S,
) -> Result<RunOutput>
where
    R: FnMut(&InvariantRecord) -> Result<()>,
    S: FnMut(&Snapshot) -> Result<()>,
{
    if case.dim() != 1 {
        return Err(Error::Config("collision runs are one-dimensional".into()));
    }
    let every = (snapshot_every / case.tau()).round().max(1.0) as usize;
    simulate(
        case,
        solver,
        Cadence {
            invariants: invariant_cadence,
            snapshots: Some(every),
        },
        on_record,
        on_snapshot,
    )
}

/// Largest sampled peak within `[t0, t1]`.
pub fn window_peak(
    peaks: &[PeakSample],
    t0: f64,
    t1: f64,
    pick: impl Fn(&PeakSample) -> f64,
) -> Option<f64> {
    peaks
        .iter()
        .filter(|p| p.t >= t0 - 1e-9 && p.t <= t1 + 1e-9)
        .map(pick)
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{gaussian_conservation_2d, manufactured_2d};
    use num_complex::Complex64;
    use std::sync::Arc;

    #[test]
    fn ladder_validation() {
        let solver = SolverConfig::default();
        assert!(StudyPlan::paired(manufactured_2d(), &[8], solver).is_err());
        assert!(StudyPlan::paired(manufactured_2d(), &[16, 8], solver).is_err());
        assert!(StudyPlan::paired(gaussian_conservation_2d(), &[8, 16], solver).is_err());
        assert!(StudyPlan::paired(manufactured_2d(), &[8, 16], solver).is_ok());
    }

    #[test]
    fn zero_data_has_zero_invariants() {
        let mut case = gaussian_conservation_2d()
            .with_points(vec![10, 10])
            .with_horizon(1.0);
        case.u0 = Arc::new(|_| Complex64::new(0.0, 0.0));
        case.v0 = Arc::new(|_| Complex64::new(0.0, 0.0));
        let out = conservation_run(&case, &SolverConfig::default(), 1, |_| Ok(())).unwrap();
        assert_eq!(out.records.len(), case.steps + 1);
        for r in &out.records {
            assert_eq!(r.m_u + r.m_v + r.energy, 0.0);
            assert_eq!(r.r_u.unwrap_or(0.0) + r.r_v.unwrap_or(0.0), 0.0);
        }
        let last = out.records.last().unwrap();
        assert_eq!(last.n, case.steps);
        assert!(last.r_u.is_none());
    }

    #[test]
    fn cadence_keeps_first_and_last() {
        let case = gaussian_conservation_2d()
            .with_points(vec![12, 12])
            .with_horizon(1.4);
        assert_eq!(case.steps, 7);
        let out = conservation_run(&case, &SolverConfig::default(), 3, |_| Ok(())).unwrap();
        let steps: Vec<usize> = out.records.iter().map(|r| r.n).collect();
        assert_eq!(steps, vec![0, 3, 6, 7]);
    }

    #[test]
    fn forced_case_rejected_for_conservation() {
        assert!(
            conservation_run(&manufactured_2d(), &SolverConfig::default(), 1, |_| Ok(())).is_err()
        );
    }

    #[test]
    fn window_peaks() {
        let peaks: Vec<PeakSample> = (0..10)
            .map(|i| PeakSample {
                t: i as f64,
                u: i as f64,
                v: 0.0,
            })
            .collect();
        assert_eq!(window_peak(&peaks, 2.0, 5.0, |p| p.u), Some(5.0));
        assert_eq!(window_peak(&peaks, 20.0, 30.0, |p| p.u), None);
    }
}
