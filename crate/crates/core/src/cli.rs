//! `flare-lqt` command-line frontend: TOML run configs, the `design`,
//! `simulate` and `region` subcommands, and the output bundle.
//!
//! Exit codes:
//!
//! | code | meaning                                        |
//! |------|------------------------------------------------|
//! | 0    | success                                        |
//! | 1    | simulation ran but a landing constraint failed |
//! | 2    | config, parse or parameter error               |
//! | 3    | flare constraint system has no root            |
//! | 4    | gain (Riccati) solve failed                    |
//! | 5    | closed-loop simulation failed                  |
//! | 6    | file output failed                             |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::{admissible_region, symmetric_grid, ConstraintLimits, RegionResult};
use crate::error::{Error, Result};
use crate::io::KvText;
use crate::lqt::{Horizon, TrackingWeights};
use crate::model::{build_state_space, AircraftParams, StateVector};
use crate::ode::IntegratorSettings;
use crate::pipeline::{Prepared, Scenario};
use crate::plot::{feasibility_map, LinePlot, Series};
use crate::sim::{LimitMode, SimResult};
use crate::trajectory::{touchdown_time, ApproachPlate, DecayMode, FlareGeometry, FlareInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONSTRAINTS: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_ROOT: i32 = 3;
pub const EXIT_GAINS: i32 = 4;
pub const EXIT_SIMULATION: i32 = 5;
pub const EXIT_IO: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftSection {
    pub k_s: f64,
    pub t_s: f64,
    pub omega_s: f64,
    pub zeta: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSection {
    pub x_g0: f64,
    pub h_g0: f64,
    pub x_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlareSection {
    pub h_f0: f64,
    pub nu_deg: f64,
    pub mode: DecayMode,
    /// Forward ground speed; defaults to the aircraft speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_dot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub t0: f64,
    pub t_f: f64,
}

/// Either the diagonal shortcut or a full matrix for each of `P` and `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_diag: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_diag: Option<[f64; 4]>,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    pub h: f64,
    pub h_dot: f64,
    pub theta_deg: f64,
    /// rad/s
    pub theta_dot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rtol: f64,
    pub atol: f64,
    pub grid_points: usize,
    pub output_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub elevator_min_deg: f64,
    pub elevator_max_deg: f64,
    pub limit_mode: LimitMode,
}

/// On-disk run configuration. Angles named `*_deg` are degrees; everything
/// else is in feet, seconds and radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub aircraft: AircraftSection,
    pub plate: PlateSection,
    pub flare: FlareSection,
    pub horizon: HorizonSection,
    pub weights: WeightsSection,
    pub initial_state: InitialStateSection,
    pub solver: SolverSection,
    pub limits: LimitsSection,
}

fn weight_matrix(
    name: &str,
    diag: &Option<[f64; 4]>,
    full: &Option<Vec<Vec<f64>>>,
) -> Result<DMatrix<f64>> {
    match (diag, full) {
        (Some(d), None) => Ok(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(d),
        )),
        (None, Some(rows)) => {
            if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                return Err(Error::Config(format!("weights.{name} must be 4x4")));
            }
            Ok(DMatrix::from_fn(4, 4, |i, j| rows[i][j]))
        }
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give either weights.{name}_diag or weights.{name}, not both"
        ))),
        (None, None) => Err(Error::Config(format!("missing weights.{name}_diag"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.scenario()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The reference landing expressed in config units.
    pub fn reference_landing() -> Self {
        let s = Scenario::reference_landing();
        let diag = |m: &DMatrix<f64>| [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]];
        Self {
            aircraft: AircraftSection {
                k_s: s.aircraft.k_s,
                t_s: s.aircraft.t_s,
                omega_s: s.aircraft.omega_s,
                zeta: s.aircraft.zeta,
                v: s.aircraft.v,
            },
            plate: PlateSection {
                x_g0: s.plate.x_g0,
                h_g0: s.plate.h_g0,
                x_t: s.plate.x_t,
            },
            flare: FlareSection {
                h_f0: s.flare.h_f0,
                nu_deg: 3.0,
                mode: s.flare.mode,
                x_dot: None,
            },
            horizon: HorizonSection {
                t0: s.flare.t0,
                t_f: s.flare.t_f,
            },
            weights: WeightsSection {
                p_diag: Some(diag(&s.weights.p)),
                q_diag: Some(diag(&s.weights.q)),
                r: s.weights.r[(0, 0)],
                p: None,
                q: None,
            },
            initial_state: InitialStateSection {
                h: s.x0.h,
                h_dot: s.x0.h_dot,
                theta_deg: s.x0.theta.to_degrees(),
                theta_dot: s.x0.theta_dot,
            },
            solver: SolverSection {
                rtol: s.settings.rtol,
                atol: s.settings.atol,
                grid_points: s.grid_points,
                output_dt: s.output_dt,
            },
            limits: LimitsSection {
                elevator_min_deg: -35.0,
                elevator_max_deg: 15.0,
                limit_mode: s.limit_mode,
            },
        }
    }

    /// Convert to internal units and re-check every invariant that does not
    /// depend on the flare root solve.
    pub fn scenario(&self) -> Result<Scenario> {
        let a = &self.aircraft;
        let aircraft = AircraftParams {
            k_s: a.k_s,
            t_s: a.t_s,
            omega_s: a.omega_s,
            zeta: a.zeta,
            v: a.v,
        };
        build_state_space(aircraft)?;

        let plate = ApproachPlate {
            x_g0: self.plate.x_g0,
            h_g0: self.plate.h_g0,
            x_t: self.plate.x_t,
        };
        plate.validate()?;

        let flare = FlareInputs {
            h_f0: self.flare.h_f0,
            nu_d: self.flare.nu_deg.to_radians(),
            x_dot: self.flare.x_dot.unwrap_or(a.v),
            t0: self.horizon.t0,
            t_f: self.horizon.t_f,
            mode: self.flare.mode,
        };
        Horizon::new(flare.t0, flare.t_f)?;

        let w = &self.weights;
        let weights = TrackingWeights::new(
            weight_matrix("p", &w.p_diag, &w.p)?,
            weight_matrix("q", &w.q_diag, &w.q)?,
            DMatrix::from_element(1, 1, w.r),
        )?;

        let s = &self.initial_state;
        let x0 = StateVector::new(s.h, s.h_dot, s.theta_deg.to_radians(), s.theta_dot);
        if !x0.is_finite() {
            return Err(Error::InvalidParameter(
                "initial state must be finite".into(),
            ));
        }

        let settings = IntegratorSettings::with_tolerances(self.solver.rtol, self.solver.atol);
        settings.validate()?;
        if self.solver.grid_points < 2 {
            return Err(Error::InvalidParameter(
                "solver.grid_points must be at least 2".into(),
            ));
        }

        let l = &self.limits;
        let limits = ConstraintLimits::default().with_elevator_band(
            l.elevator_min_deg.to_radians(),
            l.elevator_max_deg.to_radians(),
        );
        limits.validate()?;

        let scenario = Scenario {
            aircraft,
            plate,
            flare,
            weights,
            x0,
            settings,
            grid_points: self.solver.grid_points,
            output_dt: self.solver.output_dt,
            limit_mode: l.limit_mode,
            limits,
        };
        scenario.sim_config(x0)?.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flare-lqt",
    version,
    about = "LQ tracking design and simulation of the landing flare"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the flare geometry and write geometry.txt.
    Design(RunArgs),
    /// Design, solve gains, simulate and check the landing constraints.
    Simulate(RunArgs),
    /// Sweep initial altitude and pitch offsets and map feasibility.
    Region(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Skip SVG output.
    #[arg(long)]
    pub no_plots: bool,
    /// Worker threads for the region sweep (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Altitude offset half-range (ft).
    #[arg(long, default_value_t = 40.0)]
    pub dh_max: f64,
    /// Pitch offset half-range (deg).
    #[arg(long, default_value_t = 2.0)]
    pub dtheta_max: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 21)]
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Config,
    Design,
    Gains,
    Simulate,
    Output,
}

/// Failure with the exit code its stage maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

fn fail(stage: Stage) -> impl Fn(Error) -> Failure {
    move |error| {
        let code = match (&error, stage) {
            (Error::Io(_), _) => EXIT_IO,
            (Error::Config(_) | Error::InvalidParameter(_) | Error::HorizonMismatch(_), _) => {
                EXIT_CONFIG
            }
            (Error::NoRoot { .. }, _) => EXIT_NO_ROOT,
            (_, Stage::Config) => EXIT_CONFIG,
            (_, Stage::Design) => EXIT_NO_ROOT,
            (_, Stage::Gains) => EXIT_GAINS,
            (_, Stage::Simulate) => EXIT_SIMULATION,
            (_, Stage::Output) => EXIT_IO,
        };
        Failure { code, error }
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, result) = match &cli.command {
        Command::Design(a) => ("design", cmd_design(a)),
        Command::Simulate(a) => ("simulate", cmd_simulate(a)),
        Command::Region(a) => ("region", cmd_region(a)),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("flare-lqt {name}: {f}");
            f.code
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(format!("{}: {e}", path.display()))
    })?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Key-value dump of the solved flare, with `K` and the touchdown time under
/// both decay modes.
pub fn geometry_text(geom: &FlareGeometry) -> KvText {
    let mut geo = *geom;
    geo.k = geom.geometric_k();
    let mut timed = *geom;
    timed.k = geom.timed_k();
    let i = &geom.inputs;
    let mut kv = KvText::new();
    kv.comment("solved flare geometry (ft, s, rad)")
        .num("h_f0", i.h_f0)
        .num("nu_d", i.nu_d)
        .num("x_dot", i.x_dot)
        .num("t0", i.t0)
        .num("t_f", i.t_f)
        .text("mode", i.mode)
        .num("x_f0", geom.x_f0)
        .num("k_x", geom.k_x)
        .num("h_c", geom.h_c)
        .num("k", geom.k)
        .num("k_geometric", geo.k)
        .num("k_timed", timed.k)
        .num("touchdown_time_geometric", touchdown_time(&geo))
        .num("touchdown_time_timed", touchdown_time(&timed))
        .num("touchdown_residual", geom.touchdown_residual());
    kv
}

fn load(args: &RunArgs) -> std::result::Result<(RunConfig, Scenario), Failure> {
    let cfg = RunConfig::load(&args.config).map_err(fail(Stage::Config))?;
    let scenario = cfg.scenario().map_err(fail(Stage::Config))?;
    Ok((cfg, scenario))
}

pub fn cmd_design(args: &RunArgs) -> Outcome {
    let (cfg, scenario) = load(args)?;
    let geom = scenario.design().map_err(fail(Stage::Design))?;
    let out = fail(Stage::Output);
    prepare_dir(&args.out).map_err(&out)?;
    write_text(
        &args.out.join("geometry.txt"),
        &geometry_text(&geom).render(),
    )
    .map_err(&out)?;
    write_text(&args.out.join("config.toml"), &cfg.to_toml().map_err(&out)?).map_err(&out)?;
    println!(
        "flare: X_f0 = {:.3} ft, K_x = {:.6e} 1/ft, h_c = {:.4} ft, K = {:.6} 1/s ({})",
        geom.x_f0, geom.k_x, geom.h_c, geom.k, geom.inputs.mode
    );
    println!(
        "K geometric = {:.6} 1/s, K timed = {:.6} 1/s",
        geom.geometric_k(),
        geom.timed_k()
    );
    Ok(EXIT_OK)
}

fn prepare(scenario: &Scenario) -> std::result::Result<Prepared, Failure> {
    // Split the stages so each failure gets its own exit code.
    scenario.design().map_err(fail(Stage::Design))?;
    scenario.prepare().map_err(fail(Stage::Gains))
}

/// Summary of a simulation, followed by the constraint section.
pub fn report_text(
    prepared: &Prepared,
    sim: &SimResult,
    report: &crate::constraints::ConstraintReport,
) -> String {
    let xf = sim.last_state();
    let mut kv = KvText::new();
    kv.comment("closed-loop landing report")
        .num("t_f", *sim.times.last().expect("non-empty result"))
        .num("terminal_h_ft", xf.h)
        .num("terminal_h_dot_ft_per_s", xf.h_dot)
        .num("terminal_theta_deg", xf.theta.to_degrees())
        .num("terminal_theta_dot_deg_per_s", xf.theta_dot.to_degrees())
        .num("terminal_error_h_ft", sim.terminal_error[0])
        .num("terminal_error_h_dot_ft_per_s", sim.terminal_error[1])
        .num("terminal_error_theta_rad", sim.terminal_error[2])
        .num("terminal_error_theta_dot_rad_per_s", sim.terminal_error[3])
        .num("performance_index", sim.j)
        .text("saturation_events", sim.saturation_events.len())
        .text(
            "ground_contact_s",
            sim.ground_contact
                .map_or_else(|| "none".to_string(), crate::io::num),
        )
        .num("k", prepared.geom.k);
    let mut text = kv.render();
    text.push_str(&report.to_kv().render());
    text
}

fn line(
    title: &str,
    y_label: &str,
    t: &[f64],
    y: Vec<f64>,
    name: &str,
    color: &'static str,
) -> LinePlot {
    LinePlot::new(title, "t (s)", y_label).with(Series::new(name, color, t, &y))
}

/// The SVG set for one simulation: file stem and contents.
pub fn simulation_plots(sim: &SimResult) -> Vec<(&'static str, String)> {
    let t = &sim.times;
    let col = |f: fn(&StateVector) -> f64| sim.states.iter().map(f).collect::<Vec<_>>();
    let err = |k: usize, scale: f64| sim.errors.iter().map(|e| e[k] * scale).collect::<Vec<_>>();
    let deg = 180.0 / std::f64::consts::PI;
    let h_ref: Vec<f64> = sim.references.iter().map(|r| r.h_d).collect();
    vec![
        (
            "h",
            line("Altitude", "h (ft)", t, col(|x| x.h), "h", "#1f77b4")
                .with(Series::new("h_ref", "#d62728", t, &h_ref).dashed())
                .render(),
        ),
        (
            "h_dot",
            line(
                "Vertical speed",
                "h_dot (ft/s)",
                t,
                col(|x| x.h_dot),
                "h_dot",
                "#1f77b4",
            )
            .render(),
        ),
        (
            "theta",
            line(
                "Pitch",
                "theta (deg)",
                t,
                col(|x| x.theta.to_degrees()),
                "theta",
                "#1f77b4",
            )
            .render(),
        ),
        (
            "delta_e",
            line(
                "Elevator",
                "delta_e (deg)",
                t,
                sim.controls.iter().map(|u| u * deg).collect(),
                "delta_e",
                "#2ca02c",
            )
            .render(),
        ),
        (
            "e_h",
            line(
                "Altitude error",
                "e_h (ft)",
                t,
                err(0, 1.0),
                "e_h",
                "#9467bd",
            )
            .render(),
        ),
        (
            "e_hdot",
            line(
                "Vertical speed error",
                "e_hdot (ft/s)",
                t,
                err(1, 1.0),
                "e_hdot",
                "#9467bd",
            )
            .render(),
        ),
        (
            "e_theta",
            line(
                "Pitch error",
                "e_theta (deg)",
                t,
                err(2, deg),
                "e_theta",
                "#9467bd",
            )
            .render(),
        ),
        (
            "e_thetadot",
            line(
                "Pitch rate error",
                "e_thetadot (deg/s)",
                t,
                err(3, deg),
                "e_thetadot",
                "#9467bd",
            )
            .render(),
        ),
    ]
}

pub fn cmd_simulate(args: &RunArgs) -> Outcome {
    let (_, scenario) = load(args)?;
    let prepared = prepare(&scenario)?;
    let (sim, report) = prepared.run_nominal().map_err(fail(Stage::Simulate))?;

    let out = fail(Stage::Output);
    prepare_dir(&args.out).map_err(&out)?;
    let csv = |name: &str, f: &dyn Fn(BufWriter<File>) -> Result<()>| -> Result<()> {
        f(create(&args.out.join(name))?)
    };
    csv("gains.csv", &|w| prepared.schedule.write_csv(w)).map_err(&out)?;
    csv("sim.csv", &|w| sim.write_csv(w)).map_err(&out)?;
    csv("constraints.csv", &|w| report.write_csv(w)).map_err(&out)?;
    write_text(
        &args.out.join("report.txt"),
        &report_text(&prepared, &sim, &report),
    )
    .map_err(&out)?;
    if !args.no_plots {
        let dir = args.out.join("plots");
        prepare_dir(&dir).map_err(&out)?;
        for (stem, svg) in simulation_plots(&sim) {
            write_text(&dir.join(format!("{stem}.svg")), &svg).map_err(&out)?;
        }
    }

    let xf = sim.last_state();
    println!(
        "touchdown: h = {:.3} ft, descent {:.1} ft/min, theta = {:.2} deg, J = {:.4}",
        xf.h,
        report.descent_rate_fpm,
        xf.theta.to_degrees(),
        sim.j
    );
    println!(
        "elevator range [{:.2}, {:.2}] deg, {} saturation event(s)",
        report.elevator_min_deg,
        report.elevator_max_deg,
        sim.saturation_events.len()
    );
    for row in report.rows() {
        println!(
            "  {:<14} {}",
            row.id,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    if report.all_pass() {
        Ok(EXIT_OK)
    } else {
        println!(
            "constraints: FAIL (first: {})",
            report.binding_constraint().unwrap_or("-")
        );
        Ok(EXIT_CONSTRAINTS)
    }
}

pub fn region_plot(region: &RegionResult) -> String {
    let nt = region.dtheta_grid.len();
    feasibility_map(
        "Admissible initial offsets",
        "delta h (ft)",
        "delta theta (deg)",
        &region.dh_grid,
        &region.dtheta_grid,
        |i, j| region.cells[i * nt + j].outcome.feasible(),
    )
}

pub fn cmd_region(args: &RunArgs) -> Outcome {
    let (_, scenario) = load(args)?;
    let cfg_err = fail(Stage::Config);
    if args.cells < 2 {
        return Err(cfg_err(Error::InvalidParameter(format!(
            "--cells must be at least 2, got {}",
            args.cells
        ))));
    }
    if !(args.dh_max.is_finite()
        && args.dh_max >= 0.0
        && args.dtheta_max.is_finite()
        && args.dtheta_max >= 0.0)
    {
        return Err(cfg_err(Error::InvalidParameter(
            "--dh-max and --dtheta-max must be finite and non-negative".into(),
        )));
    }
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(cfg_err(Error::InvalidParameter(
            "--jobs must be at least 1".into(),
        )));
    }

    let prepared = prepare(&scenario)?;
    let region = admissible_region(
        &prepared,
        &symmetric_grid(args.dh_max, args.cells),
        &symmetric_grid(args.dtheta_max, args.cells),
        jobs,
    )
    .map_err(cfg_err)?;

    let out = fail(Stage::Output);
    prepare_dir(&args.out).map_err(&out)?;
    region
        .write_csv(create(&args.out.join("region.csv")).map_err(&out)?)
        .map_err(&out)?;
    if !args.no_plots {
        let dir = args.out.join("plots");
        prepare_dir(&dir).map_err(&out)?;
        write_text(&dir.join("region.svg"), &region_plot(&region)).map_err(&out)?;
    }

    let feasible = region.cells.iter().filter(|c| c.outcome.feasible()).count();
    let show = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |d| format!("{d}"));
    println!(
        "region: {feasible} of {} cells feasible",
        region.cells.len()
    );
    println!(
        "axis boundaries: dh {} ft, dtheta {} deg",
        show(region.max_feasible_dh),
        show(region.max_feasible_dtheta)
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_round_trips() {
        let cfg = RunConfig::reference_landing();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn reference_config_matches_scenario() {
        let s = RunConfig::reference_landing().scenario().unwrap();
        let r = Scenario::reference_landing();
        assert_eq!(s.aircraft, r.aircraft);
        assert_eq!(s.weights, r.weights);
        assert!((s.x0.theta - r.x0.theta).abs() < 1e-15);
        assert!((s.flare.nu_d - r.flare.nu_d).abs() < 1e-15);
        assert!((s.limits.elevator_band.0 - r.limits.elevator_band.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = RunConfig::reference_landing().to_toml().unwrap();
        text = text.replace("[aircraft]\n", "[aircraft]\nwingspan = 3.0\n");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn full_weight_matrices() {
        let mut cfg = RunConfig::reference_landing();
        cfg.weights.q_diag = None;
        cfg.weights.q = Some(vec![
            vec![1.0, 0.5, 0.0, 0.0],
            vec![0.5, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        let s = cfg.scenario().unwrap();
        assert_eq!(s.weights.q[(0, 1)], 0.5);
        cfg.weights.q_diag = Some([1.0; 4]);
        assert!(matches!(cfg.scenario(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(
            fail(Stage::Design)(Error::NoRoot {
                lo: 0.0,
                hi: 1.0,
                f_lo: -1.0,
                f_hi: -1.0
            })
            .code,
            EXIT_NO_ROOT
        );
        assert_eq!(
            fail(Stage::Gains)(Error::RiccatiBlowUp { t: 1.0 }).code,
            EXIT_GAINS
        );
        assert_eq!(
            fail(Stage::Simulate)(Error::StepUnderflow { t: 1.0, h: 0.0 }).code,
            EXIT_SIMULATION
        );
        assert_eq!(fail(Stage::Output)(Error::Io("x".into())).code, EXIT_IO);
        assert_eq!(
            fail(Stage::Gains)(Error::InvalidParameter("x".into())).code,
            EXIT_CONFIG
        );
    }
}
