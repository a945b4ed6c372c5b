//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 failed verification.

mod emit;
mod selftest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use emit::{emit, emit_one, Format, Table, Tabular};

use crate::dynamics::{contractible_orbits_up_to, displacement_probe, entropy_threshold, lyapunov_exponent, LyapunovEstimate};
use crate::error::{Error, Result};
use crate::integrate::integrate_every;
use crate::lie::Family;
use crate::mane::{critical_value_bisection, ManeMethod};
use crate::par;
use crate::rabinowitz::{default_seeds, find_critical_many};
use crate::stability::{build_profiles, contact_diagnostic, verify_stabilizing, RecipeKind, StabilityReport};
use crate::systems::{closed_form_flow, MagneticSystem, PhaseState};

#[derive(Debug, Parser)]
#[command(name = "magshell", version, about = "Magnetic flows on twisted cotangent bundles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// heisenberg, psl2, sol, nil4 or torus
    #[arg(long, default_value = "heisenberg")]
    pub system: String,
    /// Torus dimension (standard symplectic blocks, last axis free when odd).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the module's trivial examples and exit.
    #[arg(long)]
    pub selftest: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate (rk4) or evaluate the exact flow from a state.
    Flow {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        energy: Option<f64>,
        /// Comma-separated chart coordinates.
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
        /// Comma-separated momenta (overrides --energy).
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        /// rk4 or exact
        #[arg(long, default_value = "rk4")]
        method: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed contractible orbits at one energy.
    Orbits {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.375)]
        energy: f64,
        #[arg(long, default_value_t = 5)]
        l_max: u32,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bracket the Mañé critical values.
    Mane {
        #[command(flatten)]
        sys: SystemArgs,
        /// circle-family or contact-obstruction
        #[arg(long, default_value = "circle-family")]
        method: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 10.0)]
        k_max: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Build and verify a stabilizing form.
    Stability {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.3)]
        energy: f64,
        /// Number of shell samples.
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Contact-type diagnosis (Heisenberg, PSL(2,R)).
    Contact {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.6)]
        energy: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Top Lyapunov exponent.
    Lyapunov {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.5)]
        energy: f64,
        /// Conserved momentum on Heisenberg and PSL(2,R).
        #[arg(long, allow_hyphen_values = true)]
        casimir: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Displacement certificate for the shell.
    Displace {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.2)]
        energy: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Critical points of the discretized Rabinowitz functional.
    Rabinowitz {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.5)]
        energy: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        seeds: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tabulate a diagnostic over an energy grid.
    Sweep {
        #[command(flatten)]
        sys: SystemArgs,
        /// entropy, contact, orbits, stability or displace
        #[arg(long)]
        what: String,
        #[arg(long)]
        k_min: f64,
        #[arg(long)]
        k_max: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a command described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

/// A TOML run description. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub system: Option<String>,
    pub dim: Option<usize>,
    pub energy: Option<f64>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub steps: Option<usize>,
    pub what: Option<String>,
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub points: Option<usize>,
    pub seeds: Option<usize>,
    pub grid: Option<usize>,
    pub casimir: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub l_max: Option<u32>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    /// Accepted for reproducibility records; every randomized routine in
    /// this crate already uses fixed internal seeds.
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Equivalent argument vector.
    pub fn to_argv(&self) -> Vec<String> {
        let mut argv = vec!["magshell".to_string(), self.command.clone()];
        let mut push = |flag: &str, v: Option<String>| {
            if let Some(v) = v {
                argv.push(format!("--{flag}"));
                argv.push(v);
            }
        };
        push("system", self.system.clone());
        push("dim", self.dim.map(|v| v.to_string()));
        push("energy", self.energy.map(|v| v.to_string()));
        push("k-min", self.k_min.map(|v| v.to_string()));
        push("k-max", self.k_max.map(|v| v.to_string()));
        push("steps", self.steps.map(|v| v.to_string()));
        push("what", self.what.clone());
        push("method", self.method.clone());
        push("tol", self.tol.map(|v| v.to_string()));
        push("points", self.points.map(|v| v.to_string()));
        push("seeds", self.seeds.map(|v| v.to_string()));
        push("grid", self.grid.map(|v| v.to_string()));
        push("casimir", self.casimir.map(|v| v.to_string()));
        push("t-max", self.t_max.map(|v| v.to_string()));
        push("dt", self.dt.map(|v| v.to_string()));
        push("l-max", self.l_max.map(|v| v.to_string()));
        push("format", self.format.map(|f| if f == Format::Csv { "csv".into() } else { "json".into() }));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        argv
    }
}

/// Builds a system from its CLI name.
pub fn parse_system(args: &SystemArgs) -> Result<MagneticSystem> {
    match args.system.as_str() {
        "heisenberg" => Ok(MagneticSystem::heisenberg()),
        "psl2" => Ok(MagneticSystem::psl2()),
        "sol" => Ok(MagneticSystem::sol()),
        "nil4" => Ok(MagneticSystem::nil4()),
        "torus" => {
            let d = args.dim;
            if d < 2 {
                return Err(Error::InvalidSystem(format!("torus dimension must be at least 2, got {d}")));
            }
            let mut j = DMatrix::zeros(d, d);
            for b in 0..d / 2 {
                j[(2 * b, 2 * b + 1)] = 1.0;
                j[(2 * b + 1, 2 * b)] = -1.0;
            }
            MagneticSystem::torus(j)
        }
        other => Err(Error::InvalidSystem(format!("unknown system `{other}`"))),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::PreconditionFailed(format!("not a number: `{t}`"))))
        .collect()
}

/// Start state: explicit momenta, or momenta of norm `sqrt(2k)` along
/// `(1, ..., 1)`; chart origin unless `q` is given.
fn start_state(sys: &MagneticSystem, q: Option<&str>, p: Option<&str>, energy: Option<f64>) -> Result<PhaseState> {
    let n = sys.dim();
    let p = match (p, energy) {
        (Some(p), _) => DVector::from_vec(parse_list(p)?),
        (None, Some(k)) => DVector::from_element(n, (2.0 * k / n as f64).sqrt()),
        (None, None) => return Err(Error::PreconditionFailed("give --p or --energy".into())),
    };
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let mut s = PhaseState::origin(sys, p);
    if let Some(q) = q {
        let q = DVector::from_vec(parse_list(q)?);
        if q.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: q.len() });
        }
        s.q = q;
    }
    s.check(sys)?;
    Ok(s)
}

/// Decimal energy grid `k_min + i (k_max - k_min) / steps`, rounded to 12
/// decimals so grid points such as 0.25 are hit exactly.
pub fn energy_grid(k_min: f64, k_max: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let k = k_min + (k_max - k_min) * i as f64 / steps as f64;
            (k * 1e12).round() / 1e12
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct StabilityOutput {
    system: Family,
    k: f64,
    recipe: RecipeKind,
    ode_residual: f64,
    report: StabilityReport,
}

impl Tabular for StabilityOutput {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "recipe", "min_pairing", "max_residual", "passed"]
    }
    fn row(&self) -> Vec<String> {
        let kind = serde_json::to_value(self.recipe).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default();
        vec![
            self.system.name().into(),
            emit::num(self.k),
            kind,
            emit::num(self.report.min_pairing),
            emit::num(self.report.max_residual),
            self.report.passed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
struct LyapunovOutput {
    system: Family,
    k: f64,
    start: PhaseState,
    t_max: f64,
    dt: f64,
    #[serde(flatten)]
    estimate: LyapunovEstimate,
}

impl Tabular for LyapunovOutput {
    fn header() -> Vec<&'static str> {
        vec!["system", "k", "t_max", "exponent", "std_error", "log_coefficient", "converged"]
    }
    fn row(&self) -> Vec<String> {
        vec![
            self.system.name().into(),
            emit::num(self.k),
            emit::num(self.t_max),
            emit::num(self.estimate.exponent),
            emit::num(self.estimate.std_error),
            emit::num(self.estimate.log_coefficient),
            self.estimate.converged.to_string(),
        ]
    }
}

#[derive(Debug, Serialize)]
struct FlowJson<'a> {
    system: Family,
    method: &'a str,
    times: &'a [f64],
    states: &'a [PhaseState],
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::VerificationFailed(_) | Error::NotStable { .. } | Error::NoConvergence { .. } | Error::EscapedShell { .. } => {
                Failure::Verification(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn write_out(bytes: &[u8], out: Option<&PathBuf>) -> std::result::Result<(), Failure> {
    let res = match out {
        Some(path) => std::fs::write(path, bytes),
        None => std::io::stdout().write_all(bytes),
    };
    res.map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
}

/// Parses `argv` (program name first) and runs the command.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    par::init_from_env();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            3
        }
    }
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Flow { sys, energy, q, p, t_max, dt, stride, method, out } => {
            if out.selftest {
                return selftest::report("flow", selftest::flow());
            }
            let system = parse_system(&sys)?;
            let s = start_state(&system, q.as_deref(), p.as_deref(), energy)?;
            let traj = match method.as_str() {
                "rk4" => integrate_every(&s, t_max, dt, stride, &system)?,
                "exact" => {
                    let step = dt * stride.max(1) as f64;
                    let n = (t_max / step).round().max(1.0) as usize;
                    let mut times = vec![0.0];
                    let mut states = vec![s.clone()];
                    for i in 1..=n {
                        let t = t_max * i as f64 / n as f64;
                        times.push(t);
                        states.push(closed_form_flow(&s, t, &system)?);
                    }
                    crate::integrate::Trajectory { times, states, method: "exact", dt: step, local_error: 0.0 }
                }
                other => return Err(Failure::Usage(format!("unknown method `{other}` (rk4 or exact)"))),
            };
            let bytes = match out.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    traj.write_csv(&system, &mut buf).map_err(|e| Failure::Usage(e.to_string()))?;
                    buf
                }
                Format::Json => {
                    let j = FlowJson { system: system.family(), method: traj.method, times: &traj.times, states: &traj.states };
                    let mut b = serde_json::to_vec_pretty(&j).map_err(|e| Failure::Usage(e.to_string()))?;
                    b.push(b'\n');
                    b
                }
            };
            write_out(&bytes, out.out.as_ref())
        }
        Command::Orbits { sys, energy, l_max, out } => {
            if out.selftest {
                return selftest::report("orbits", selftest::orbits());
            }
            let system = parse_system(&sys)?;
            let records = contractible_orbits_up_to(&system, energy, l_max)?;
            write_out(&emit(&records, out.format)?, out.out.as_ref())
        }
        Command::Mane { sys, method, tol, k_max, out } => {
            if out.selftest {
                return selftest::report("mane", selftest::mane());
            }
            let system = parse_system(&sys)?;
            let method: ManeMethod = method.parse()?;
            let est = critical_value_bisection(&system, method, k_max, tol)?;
            write_out(&emit_one(&est, out.format)?, out.out.as_ref())
        }
        Command::Stability { sys, energy, grid, out } => {
            if out.selftest {
                return selftest::report("stability", selftest::stability());
            }
            let system = parse_system(&sys)?;
            let recipe = build_profiles(&system, energy)?;
            let report = verify_stabilizing(&recipe, grid.max(1));
            let passed = report.passed;
            let o = StabilityOutput { system: system.family(), k: energy, recipe: recipe.kind, ode_residual: recipe.ode_residual(2048), report };
            write_out(&emit_one(&o, out.format)?, out.out.as_ref())?;
            if passed {
                Ok(())
            } else {
                Err(Failure::Verification(format!(
                    "stabilizing check failed: min pairing {:.3e}, residual {:.3e} at {:?}",
                    o.report.min_pairing, o.report.max_residual, o.report.worst_residual_point
                )))
            }
        }
        Command::Contact { sys, energy, out } => {
            if out.selftest {
                return selftest::report("contact", selftest::contact());
            }
            let system = parse_system(&sys)?;
            let d = contact_diagnostic(&system, energy)?;
            write_out(&emit_one(&d, out.format)?, out.out.as_ref())
        }
        Command::Lyapunov { sys, energy, casimir, t_max, dt, out } => {
            if out.selftest {
                return selftest::report("lyapunov", selftest::lyapunov());
            }
            let system = parse_system(&sys)?;
            let s = match (system.family(), casimir) {
                (Family::Heisenberg | Family::Psl2, Some(c)) => {
                    let a2 = 2.0 * energy - c * c;
                    if a2 < 0.0 {
                        return Err(Failure::Usage(format!("casimir {c} is off the shell at k = {energy}")));
                    }
                    PhaseState::origin(&system, DVector::from_vec(vec![a2.sqrt(), 0.0, c]))
                }
                (_, Some(_)) => return Err(Failure::Usage("--casimir applies to heisenberg and psl2".into())),
                _ => start_state(&system, None, None, Some(energy))?,
            };
            let estimate = lyapunov_exponent(&system, &s, t_max, dt)?;
            let o = LyapunovOutput { system: system.family(), k: energy, start: s, t_max, dt, estimate };
            write_out(&emit_one(&o, out.format)?, out.out.as_ref())
        }
        Command::Displace { sys, energy, out } => {
            if out.selftest {
                return selftest::report("displace", selftest::displace());
            }
            let system = parse_system(&sys)?;
            let cert = displacement_probe(&system, energy)?;
            let ok = cert.certified;
            write_out(&emit_one(&cert, out.format)?, out.out.as_ref())?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Verification("probe did not displace the shell within the bound".into()))
            }
        }
        Command::Rabinowitz { sys, energy, points, seeds, tol, out } => {
            if out.selftest {
                return selftest::report("rabinowitz", selftest::rabinowitz());
            }
            let system = parse_system(&sys)?;
            let seed_loops = default_seeds(&system, energy, points, seeds)?;
            let mut found = Vec::new();
            for (i, r) in find_critical_many(&seed_loops, &system, tol).into_iter().enumerate() {
                match r {
                    Ok(r) => found.push(r),
                    Err(e) => eprintln!("seed {i}: {e}"),
                }
            }
            write_out(&emit(&found, out.format)?, out.out.as_ref())
        }
        Command::Sweep { sys, what, k_min, k_max, steps, format, out } => {
            let system = parse_system(&sys)?;
            if !(k_min > 0.0 && k_max >= k_min) {
                return Err(Failure::Usage(format!("need 0 < k_min <= k_max, got [{k_min}, {k_max}]")));
            }
            let grid = energy_grid(k_min, k_max, steps);
            let table = sweep(&system, &what, &grid)?;
            write_out(&table.to_bytes(format)?, out.as_ref())
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            let cfg: RunConfig = toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            if cfg.command == "run" {
                return Err(Failure::Usage("a config cannot run another config".into()));
            }
            let cli = Cli::try_parse_from(cfg.to_argv()).map_err(|e| Failure::Usage(e.to_string()))?;
            run(cli.command)
        }
    }
}

/// One row per grid energy; rows are computed in parallel and assembled in
/// grid order.
pub fn sweep(system: &MagneticSystem, what: &str, grid: &[f64]) -> Result<Table> {
    use serde_json::Value;
    let header: &[&str] = match what {
        "entropy" => &["k", "holds", "min_value", "argmin"],
        "contact" => &["k", "verdict", "margin"],
        "orbits" => &["k", "count", "omega", "period"],
        "stability" => &["k", "status", "min_pairing", "max_residual"],
        "displace" => &["k", "certified", "exit_time_bound", "simulated_exit_time"],
        other => return Err(Error::PreconditionFailed(format!("unknown sweep `{other}`"))),
    };
    if what == "entropy" && system.family() != Family::Psl2 {
        return Err(Error::Unsupported { op: "entropy sweep", family: system.name() });
    }
    let rows = par::map(grid, |&k| -> Result<Vec<Value>> {
        Ok(match what {
            "entropy" => {
                let v = entropy_threshold(k)?;
                vec![k.into(), v.holds.into(), v.min_value.into(), v.argmin.into()]
            }
            "contact" => {
                let d = contact_diagnostic(system, k)?;
                vec![k.into(), serde_json::to_value(d.verdict).unwrap_or(Value::Null), d.margin.into()]
            }
            "orbits" => {
                let o = contractible_orbits_up_to(system, k, 1)?;
                let first = o.first();
                vec![k.into(), o.len().into(), first.map(|r| r.omega).into(), first.map(|r| r.period).into()]
            }
            "stability" => match build_profiles(system, k) {
                Ok(r) => {
                    let rep = verify_stabilizing(&r, 256);
                    let status = if rep.passed { "stable" } else { "failed" };
                    vec![k.into(), status.into(), rep.min_pairing.into(), rep.max_residual.into()]
                }
                Err(Error::NotStable { .. }) => vec![k.into(), "not_stable".into(), Value::Null, Value::Null],
                Err(e) => return Err(e),
            },
            _ => match displacement_probe(system, k) {
                Ok(c) => vec![k.into(), c.certified.into(), c.exit_time_bound.into(), c.simulated_exit_time.into()],
                Err(Error::PreconditionFailed(_)) => vec![k.into(), Value::Null, Value::Null, Value::Null],
                Err(e) => return Err(e),
            },
        })
    });
    let mut table = Table::new(header);
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}
