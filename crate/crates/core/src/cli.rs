//! Command-line front end: configuration, subcommands and file output.
//!
//! Every command writes the fully resolved configuration as `config.toml`
//! next to its artifacts; `lrcd run --config <that file>` repeats the run.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cases::{soliton_1d, CaseSpec, SolitonPreset};
use crate::diagnostics::InvariantRecord;
use crate::error::{Error, Result};
use crate::harness::{convergence_study, simulate, Cadence, ConvergenceTable, Snapshot, StudyPlan};
use crate::linsolve::{Method, SolverConfig};
use crate::stepper::SchemeParams;

/// Environment variable naming the directory relative output paths live under.
pub const OUTPUT_ROOT_ENV: &str = "LRCD_OUTPUT_ROOT";

pub const INVARIANTS_HEADER: &str =
    "step,time,M_u,M_v,R_u,R_v,E,absdrift_M_u,absdrift_M_v,absdrift_R_u,absdrift_R_v,absdrift_E";
pub const ORDERS_HEADER: &str = "M,err_U_L2,order,err_U_H1,order,err_V_L2,order,err_V_H1,order";
pub const RELAX_ORDERS_HEADER: &str = "M,err_Phi_L2,order,err_Psi_L2,order";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CadenceConfig {
    /// Steps between invariant rows.
    pub invariants: Option<usize>,
    /// Time between snapshots.
    pub snapshot_every: Option<f64>,
}

/// Contents of a config file. Unset optional keys take the case defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: String,
    pub output: Option<PathBuf>,
    /// Grid points per axis.
    pub points: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    /// Soliton velocity parameter.
    pub alpha: Option<f64>,
    /// Points per axis of each convergence rung, `N = M^2`.
    pub ladder: Vec<usize>,
    pub min_order: f64,
    pub solver: SolverConfig,
    pub cadence: CadenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: "gaussian2d".into(),
            output: None,
            points: None,
            steps: None,
            horizon: None,
            kappa: None,
            beta: None,
            alpha: None,
            ladder: Vec::new(),
            min_order: 3.8,
            solver: SolverConfig::default(),
            cadence: CadenceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks that need no case construction.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("horizon", self.horizon)?;
        positive("cadence.snapshot_every", self.cadence.snapshot_every)?;
        if let Some(k) = self.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Config(format!("kappa must be positive, got {k}")));
            }
        }
        for (name, v) in [("beta", self.beta), ("alpha", self.alpha)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.steps == Some(0) {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.cadence.invariants == Some(0) {
            return Err(Error::Config("cadence.invariants must be positive".into()));
        }
        if self.alpha.is_some() && self.case != "soliton" {
            return Err(Error::Config(
                "alpha only applies to the soliton case".into(),
            ));
        }
        self.solver.validate()
    }

    /// Builds the case and fills every unset key with the value actually used.
    pub fn resolve(&self) -> Result<(RunConfig, CaseSpec)> {
        self.validate()?;
        let mut case = if self.case == "soliton" {
            let (alpha0, beta0) = SolitonPreset::Elastic.parameters();
            soliton_1d(self.alpha.unwrap_or(alpha0), self.beta.unwrap_or(beta0))
        } else {
            CaseSpec::by_name(&self.case)?
        };
        if let Some(m) = self.points {
            let dim = case.dim();
            case = case.with_points(vec![m; dim]);
        }
        case = match (self.horizon, self.steps) {
            (Some(t), Some(n)) => {
                case.horizon = t;
                case.with_steps(n)
            }
            (Some(t), None) => case.with_horizon(t),
            (None, Some(n)) => case.with_steps(n),
            (None, None) => case,
        };
        let params = SchemeParams {
            kappa: self.kappa.unwrap_or(case.params.kappa),
            beta: self.beta.unwrap_or(case.params.beta),
        };
        if params != case.params {
            case = case.with_params(params);
        }
        case.mesh()?;
        case.time_grid()?;

        let one_d = case.dim() == 1;
        let mut resolved = self.clone();
        resolved.points = Some(case.points[0]);
        resolved.steps = Some(case.steps);
        resolved.horizon = Some(case.horizon);
        resolved.kappa = Some(case.params.kappa);
        resolved.beta = Some(case.params.beta);
        if self.case == "soliton" {
            resolved.alpha = Some(self.alpha.unwrap_or(SolitonPreset::Elastic.parameters().0));
        }
        resolved.cadence.invariants =
            Some(
                self.cadence
                    .invariants
                    .unwrap_or(if one_d { 1 } else { 10 }),
            );
        if resolved.cadence.snapshot_every.is_none() && one_d {
            resolved.cadence.snapshot_every = Some(0.5);
        }
        if resolved.ladder.is_empty() && case.exact.is_some() {
            resolved.ladder = if case.dim() == 3 {
                vec![8, 12]
            } else {
                vec![8, 16, 32]
            };
        }
        Ok((resolved, case))
    }

    /// Output directory, placed under `$LRCD_OUTPUT_ROOT` when relative.
    pub fn output_dir(&self, fallback: &str) -> PathBuf {
        let dir = self
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(fallback));
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lrcd",
    version,
    about = "Linearly implicit compact-difference solver for coupled NLS systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a case, writing invariants and snapshots.
    Run(Overrides),
    /// Run a refinement ladder on a manufactured case and write order tables.
    Convergence {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated points per axis, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<usize>>,
        #[arg(long)]
        min_order: Option<f64>,
    },
    /// Two-soliton collision with preset coefficients.
    Soliton {
        /// elastic, reflection or entangle.
        preset: SolitonPreset,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Flags shared by every subcommand; each overrides the config-file key.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub case: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Final time.
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub restart: Option<usize>,
    /// Steps between invariant rows.
    #[arg(long)]
    pub cadence: Option<usize>,
    /// Time between snapshots.
    #[arg(long)]
    pub snapshot_every: Option<f64>,
}

impl Overrides {
    pub fn apply(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($key:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($key).+ = v.clone().into(); })*
            };
        }
        set!(
            case => case, output => output, points => points, steps => steps,
            horizon => horizon, kappa => kappa, beta => beta, alpha => alpha,
            method => solver.method, tol => solver.tol, max_iter => solver.max_iter,
            restart => solver.restart, cadence => cadence.invariants,
            snapshot_every => cadence.snapshot_every,
        );
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status: 0 on success, 2 for usage or configuration errors, 1 otherwise.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lrcd: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Run(overrides) => cmd_run(&overrides.apply()?),
        Command::Convergence {
            overrides,
            ladder,
            min_order,
        } => {
            let mut cfg = overrides.apply()?;
            if let Some(l) = ladder {
                cfg.ladder = l.clone();
            }
            if let Some(m) = min_order {
                cfg.min_order = *m;
            }
            if overrides.case.is_none() && overrides.config.is_none() {
                cfg.case = "manufactured2d".into();
            }
            cmd_convergence(&cfg)
        }
        Command::Soliton { preset, overrides } => {
            let mut cfg = overrides.apply()?;
            let (alpha, beta) = preset.parameters();
            cfg.case = "soliton".into();
            cfg.alpha = overrides.alpha.or(Some(alpha));
            cfg.beta = overrides.beta.or(Some(beta));
            if cfg.output.is_none() {
                cfg.output = Some(PathBuf::from(format!("soliton-{}", preset_name(*preset))));
            }
            cmd_run(&cfg)
        }
    }
}

fn preset_name(preset: SolitonPreset) -> &'static str {
    match preset {
        SolitonPreset::Elastic => "elastic",
        SolitonPreset::Reflection => "reflection",
        SolitonPreset::Entangle => "entangle",
    }
}

fn prepare_dir(cfg: &RunConfig, resolved: &RunConfig, fallback: &str) -> Result<PathBuf> {
    let dir = cfg.output_dir(fallback);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), resolved.to_toml())?;
    Ok(dir)
}

/// Simulates the configured case; writes `invariants.csv` and, when a
/// snapshot cadence is set, `snapshots/`.
pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    let (resolved, case) = cfg.resolve()?;
    let dir = prepare_dir(cfg, &resolved, &format!("run-{}", case.name))?;
    let cadence = Cadence {
        invariants: resolved.cadence.invariants.unwrap_or(1),
        snapshots: resolved
            .cadence
            .snapshot_every
            .map(|dt| (dt / case.tau()).round().max(1.0) as usize),
    };
    let snap_dir = dir.join("snapshots");
    if cadence.snapshots.is_some() {
        fs::create_dir_all(&snap_dir)?;
    }
    let mut invariants =
        InvariantWriter::new(BufWriter::new(File::create(dir.join("invariants.csv"))?))?;
    let out = simulate(
        &case,
        &resolved.solver,
        cadence,
        |row| invariants.push(row),
        |snap| {
            let path = snap_dir.join(format!("snap_{:07}.csv", snap.n));
            write_snapshot(BufWriter::new(File::create(path)?), snap)
        },
    )?;
    invariants.finish()?;
    eprintln!(
        "wrote {} invariant rows and {} snapshots to {}",
        out.records.len(),
        out.snapshots.len(),
        dir.display()
    );
    Ok(())
}

/// Convergence study; prints the table and writes `orders.csv` and
/// `orders_relax.csv`.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<()> {
    let (resolved, case) = cfg.resolve()?;
    if resolved.ladder.len() < 2 {
        return Err(Error::Config(
            "ladder needs at least two values to define orders".into(),
        ));
    }
    let mut plan = StudyPlan::paired(case.clone(), &resolved.ladder, resolved.solver)?;
    plan.min_order = Some(resolved.min_order);
    let dir = prepare_dir(cfg, &resolved, &format!("convergence-{}", case.name))?;
    let table = convergence_study(&plan)?;
    print!("{}", table.render());
    table.check_orders(resolved.min_order)?;
    let (primal, relax) = (
        File::create(dir.join("orders.csv"))?,
        File::create(dir.join("orders_relax.csv"))?,
    );
    write_order_tables(BufWriter::new(primal), BufWriter::new(relax), &table)
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_sci(x: Option<f64>) -> String {
    sci(x.unwrap_or(f64::NAN))
}

/// Streams invariant rows, computing drifts against the first row.
pub struct InvariantWriter<W: Write> {
    out: W,
    first: Option<InvariantRecord>,
}

impl<W: Write> InvariantWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{INVARIANTS_HEADER}")?;
        Ok(InvariantWriter { out, first: None })
    }

    pub fn push(&mut self, row: &InvariantRecord) -> Result<()> {
        let first = *self.first.get_or_insert(*row);
        let drift = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| (a - b).abs());
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.n,
            sci(row.t),
            sci(row.m_u),
            sci(row.m_v),
            opt_sci(row.r_u),
            opt_sci(row.r_v),
            sci(row.energy),
            sci((row.m_u - first.m_u).abs()),
            sci((row.m_v - first.m_v).abs()),
            opt_sci(drift(row.r_u, first.r_u)),
            opt_sci(drift(row.r_v, first.r_v)),
            sci((row.energy - first.energy).abs()),
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// One snapshot as `# t=<time>` followed by `x[,y[,z]],re_u,im_u,re_v,im_v` rows.
pub fn write_snapshot<W: Write>(mut out: W, snap: &Snapshot) -> Result<()> {
    let mesh = snap.u.mesh();
    writeln!(out, "# t={}", snap.t)?;
    let coords = ["x", "y", "z"][..mesh.dim()].join(",");
    writeln!(out, "# {coords},re_u,im_u,re_v,im_v")?;
    for (lin, (u, v)) in snap.u.values().iter().zip(snap.v.values()).enumerate() {
        let node = mesh.node(lin);
        for x in &node[..mesh.dim()] {
            write!(out, "{},", sci(*x))?;
        }
        writeln!(
            out,
            "{},{},{},{}",
            sci(u.re),
            sci(u.im),
            sci(v.re),
            sci(v.im)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the `U, V` table and the `Phi, Psi` table. The first row's orders are NaN.
pub fn write_order_tables<W: Write, V: Write>(
    mut primal: W,
    mut relax: V,
    table: &ConvergenceTable,
) -> Result<()> {
    writeln!(primal, "{ORDERS_HEADER}")?;
    writeln!(relax, "{RELAX_ORDERS_HEADER}")?;
    for (r, o) in table.rows.iter().zip(table.orders()) {
        writeln!(
            primal,
            "{},{},{},{},{},{},{},{},{}",
            r.points,
            sci(r.u_l2),
            opt_sci(o.u_l2),
            sci(r.u_h1),
            opt_sci(o.u_h1),
            sci(r.v_l2),
            opt_sci(o.v_l2),
            sci(r.v_h1),
            opt_sci(o.v_h1),
        )?;
        writeln!(
            relax,
            "{},{},{},{},{}",
            r.points,
            sci(r.phi_l2),
            opt_sci(o.phi_l2),
            sci(r.psi_l2),
            opt_sci(o.psi_l2),
        )?;
    }
    primal.flush()?;
    relax.flush()?;
    Ok(())
}
