//! Landing constraint checks and the admissible initial-condition sweep.
//!
//! * C1: the reference is the exponential flare.
//! * C2: touchdown descent rate magnitude within 60..180 ft/min.
//! * C3: touchdown pitch within 0..10 deg, lower bound with a 0.5 deg dead-band.
//! * C4: |alpha| below 80% of an 18 deg stall, |d(alpha)/dt| below 20% of it
//!   per second, with `alpha = theta - atan(h_dot / X_dot)`.
//! * C5: elevator within -35..+15 deg.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{num, KvText};
use crate::pipeline::Prepared;
use crate::sim::SimResult;
use crate::trajectory::FlareGeometry;

/// Stall angle of attack (rad).
pub const STALL_ALPHA: f64 = 18.0 * std::f64::consts::PI / 180.0;

/// Constraint bands. Angles in radians, descent rate in ft/min.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintLimits {
    pub descent_band_fpm: (f64, f64),
    pub pitch_band: (f64, f64),
    /// Tolerance below the lower pitch bound.
    pub pitch_deadband: f64,
    pub alpha_max: f64,
    /// Per-second bound on the change of alpha.
    pub alpha_rate_max: f64,
    pub elevator_band: (f64, f64),
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self {
            descent_band_fpm: (60.0, 180.0),
            pitch_band: (0.0, 10f64.to_radians()),
            pitch_deadband: 0.5f64.to_radians(),
            alpha_max: 0.8 * STALL_ALPHA,
            alpha_rate_max: 0.2 * STALL_ALPHA,
            elevator_band: (-35f64.to_radians(), 15f64.to_radians()),
        }
    }
}

impl ConstraintLimits {
    pub fn with_elevator_band(mut self, lo: f64, hi: f64) -> Self {
        self.elevator_band = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo <= hi;
        if !(ordered(self.descent_band_fpm)
            && ordered(self.pitch_band)
            && ordered(self.elevator_band)
            && self.pitch_deadband >= 0.0
            && self.alpha_max >= 0.0
            && self.alpha_rate_max >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "constraint bands must be ordered".into(),
            ));
        }
        Ok(())
    }
}

/// Measured extremes and per-constraint verdicts. Angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub c1_exponential: bool,
    pub c2_descent: bool,
    pub c3_pitch: bool,
    pub c4_alpha: bool,
    pub c5_elevator: bool,
    pub descent_rate_fpm: f64,
    pub pitch_td_deg: f64,
    pub alpha_max_abs_deg: f64,
    pub alpha_rate_max_deg_s: f64,
    pub elevator_min_deg: f64,
    pub elevator_max_deg: f64,
    pub limits: ConstraintLimits,
}

/// One line of the constraint CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub id: &'static str,
    pub bound_lo: f64,
    pub bound_hi: f64,
    pub measured: f64,
    pub pass: bool,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.c1_exponential && self.c2_descent && self.c3_pitch && self.c4_alpha && self.c5_elevator
    }

    /// First failing constraint, in C1..C5 order.
    pub fn binding_constraint(&self) -> Option<&'static str> {
        [
            (self.c1_exponential, "C1"),
            (self.c2_descent, "C2"),
            (self.c3_pitch, "C3"),
            (self.c4_alpha, "C4"),
            (self.c5_elevator, "C5"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, id)| id)
    }

    pub fn rows(&self) -> Vec<ConstraintRow> {
        let l = &self.limits;
        let deg = f64::to_degrees;
        vec![
            ConstraintRow {
                id: "C1",
                bound_lo: 1.0,
                bound_hi: 1.0,
                measured: if self.c1_exponential { 1.0 } else { 0.0 },
                pass: self.c1_exponential,
            },
            ConstraintRow {
                id: "C2",
                bound_lo: l.descent_band_fpm.0,
                bound_hi: l.descent_band_fpm.1,
                measured: self.descent_rate_fpm,
                pass: self.c2_descent,
            },
            ConstraintRow {
                id: "C3",
                bound_lo: deg(l.pitch_band.0),
                bound_hi: deg(l.pitch_band.1),
                measured: self.pitch_td_deg,
                pass: self.c3_pitch,
            },
            ConstraintRow {
                id: "C4_alpha",
                bound_lo: 0.0,
                bound_hi: deg(l.alpha_max),
                measured: self.alpha_max_abs_deg,
                pass: self.alpha_max_abs_deg <= deg(l.alpha_max),
            },
            ConstraintRow {
                id: "C4_alpha_rate",
                bound_lo: 0.0,
                bound_hi: deg(l.alpha_rate_max),
                measured: self.alpha_rate_max_deg_s,
                pass: self.alpha_rate_max_deg_s <= deg(l.alpha_rate_max),
            },
            ConstraintRow {
                id: "C5_min",
                bound_lo: deg(l.elevator_band.0),
                bound_hi: deg(l.elevator_band.1),
                measured: self.elevator_min_deg,
                pass: self.elevator_min_deg >= deg(l.elevator_band.0),
            },
            ConstraintRow {
                id: "C5_max",
                bound_lo: deg(l.elevator_band.0),
                bound_hi: deg(l.elevator_band.1),
                measured: self.elevator_max_deg,
                pass: self.elevator_max_deg <= deg(l.elevator_band.1),
            },
        ]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["id", "bound_lo", "bound_hi", "measured", "verdict"])?;
        for r in self.rows() {
            out.write_record([
                r.id.to_string(),
                num(r.bound_lo),
                num(r.bound_hi),
                num(r.measured),
                verdict(r.pass).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_kv(&self) -> KvText {
        let l = &self.limits;
        let deg = |x: f64| round9(x.to_degrees());
        let mut kv = KvText::new();
        kv.comment("landing constraint validation")
            .text("C1.requirement", "exponential (smooth) flare path")
            .text(
                "C1.evidence",
                if self.c1_exponential {
                    "satisfied by design"
                } else {
                    "not an exponential flare"
                },
            )
            .text("C1.verdict", verdict(self.c1_exponential))
            .text(
                "C2.requirement",
                format!(
                    "{} <= |h_dot(t_f)| <= {} ft/min",
                    round9(l.descent_band_fpm.0),
                    round9(l.descent_band_fpm.1)
                ),
            )
            .num("C2.measured_ft_per_min", self.descent_rate_fpm)
            .text("C2.verdict", verdict(self.c2_descent))
            .text(
                "C3.requirement",
                format!(
                    "{} deg <= theta(t_f) <= {} deg (dead-band {} deg below)",
                    deg(l.pitch_band.0),
                    deg(l.pitch_band.1),
                    deg(l.pitch_deadband)
                ),
            )
            .num("C3.measured_deg", self.pitch_td_deg)
            .text("C3.verdict", verdict(self.c3_pitch))
            .text(
                "C4.requirement",
                format!(
                    "|alpha| <= {} deg, |d alpha/dt| <= {} deg/s",
                    deg(l.alpha_max),
                    deg(l.alpha_rate_max)
                ),
            )
            .text(
                "C4.note",
                "alpha reconstructed as theta - atan(h_dot / X_dot)",
            )
            .num("C4.max_abs_alpha_deg", self.alpha_max_abs_deg)
            .num("C4.max_abs_alpha_rate_deg_per_s", self.alpha_rate_max_deg_s)
            .text("C4.verdict", verdict(self.c4_alpha))
            .text(
                "C5.requirement",
                format!(
                    "{} deg <= delta_e <= {} deg",
                    deg(l.elevator_band.0),
                    deg(l.elevator_band.1)
                ),
            )
            .num("C5.min_deg", self.elevator_min_deg)
            .num("C5.max_deg", self.elevator_max_deg)
            .text("C5.verdict", verdict(self.c5_elevator))
            .text("all_pass", self.all_pass());
        kv
    }
}

/// Drops float noise such as `14.999999999999998` from display strings.
fn round9(x: f64) -> f64 {
    if x.is_finite() {
        (x * 1e9).round() / 1e9
    } else {
        x
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Angle of attack per sample: `theta - atan(h_dot / X_dot)`.
pub fn angle_of_attack(result: &SimResult, x_dot: f64) -> Vec<f64> {
    result
        .states
        .iter()
        .map(|x| x.theta - (x.h_dot / x_dot).atan())
        .collect()
}

/// Check a simulation against the landing constraints. Never fails on a
/// violated constraint; the verdicts carry that.
pub fn validate(
    result: &SimResult,
    geom: &FlareGeometry,
    limits: &ConstraintLimits,
    x_dot: f64,
) -> ConstraintReport {
    let last = result.last_state();
    let descent_rate_fpm = last.h_dot.abs() * 60.0;
    let pitch_td = last.theta;

    let alpha = angle_of_attack(result, x_dot);
    let alpha_max_abs = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let alpha_rate_max = alpha
        .windows(2)
        .zip(result.times.windows(2))
        .map(|(a, t)| ((a[1] - a[0]) / (t[1] - t[0])).abs())
        .fold(0.0f64, f64::max);

    let elevator_min = result
        .controls
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let elevator_max = result
        .controls
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    let within = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    ConstraintReport {
        c1_exponential: geom.exponential,
        c2_descent: within(descent_rate_fpm, limits.descent_band_fpm),
        c3_pitch: within(
            pitch_td,
            (
                limits.pitch_band.0 - limits.pitch_deadband,
                limits.pitch_band.1,
            ),
        ),
        c4_alpha: alpha_max_abs <= limits.alpha_max && alpha_rate_max <= limits.alpha_rate_max,
        c5_elevator: elevator_min >= limits.elevator_band.0
            && elevator_max <= limits.elevator_band.1,
        descent_rate_fpm,
        pitch_td_deg: pitch_td.to_degrees(),
        alpha_max_abs_deg: alpha_max_abs.to_degrees(),
        alpha_rate_max_deg_s: alpha_rate_max.to_degrees(),
        elevator_min_deg: elevator_min.to_degrees(),
        elevator_max_deg: elevator_max.to_degrees(),
        limits: *limits,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Evaluated {
        feasible: bool,
        /// First failing constraint, or `"saturation"` when only the raw
        /// command left the actuator band.
        binding: Option<String>,
    },
    Failed(String),
}

impl CellOutcome {
    pub fn feasible(&self) -> bool {
        matches!(self, CellOutcome::Evaluated { feasible: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub dh_ft: f64,
    pub dtheta_deg: f64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub dh_grid: Vec<f64>,
    pub dtheta_grid: Vec<f64>,
    /// Row-major: `dh` outer, `dtheta` inner.
    pub cells: Vec<RegionCell>,
    /// Largest `d` such that every cell with `|dh| <= d` on the `dtheta = 0`
    /// row is feasible. `None` when the row is absent or its centre fails.
    pub max_feasible_dh: Option<f64>,
    /// Same along the `dh = 0` column, in degrees.
    pub max_feasible_dtheta: Option<f64>,
}

impl RegionResult {
    pub fn cell(&self, i_dh: usize, i_dtheta: usize) -> &RegionCell {
        &self.cells[i_dh * self.dtheta_grid.len() + i_dtheta]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dh_ft", "dtheta_deg", "feasible", "binding_constraint"])?;
        for c in &self.cells {
            let (feasible, binding) = match &c.outcome {
                CellOutcome::Evaluated { feasible, binding } => {
                    (*feasible, binding.clone().unwrap_or_else(|| "none".into()))
                }
                CellOutcome::Failed(msg) => (false, format!("error: {msg}")),
            };
            out.write_record([
                num(c.dh_ft),
                num(c.dtheta_deg),
                if feasible { "1".into() } else { "0".into() },
                binding,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `n` points spread uniformly over `[-max, max]`, with an exact zero in the
/// middle for odd `n`.
pub fn symmetric_grid(max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| {
            let k = 2 * i as i64 - (n as i64 - 1);
            max * k as f64 / (n - 1) as f64
        })
        .collect()
}

fn axis_extent(values: &[f64], feasible: &[bool]) -> Option<f64> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let centre = values.iter().position(|v| v.abs() <= 1e-12 * scale)?;
    if !feasible[centre] {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].abs().total_cmp(&values[*b].abs()));
    let mut extent = 0.0;
    let mut k = 0;
    while k < order.len() {
        let d = values[order[k]].abs();
        let mut all = true;
        while k < order.len() && values[order[k]].abs() <= d + 1e-12 * scale {
            all &= feasible[order[k]];
            k += 1;
        }
        if !all {
            break;
        }
        extent = d;
    }
    Some(extent)
}

/// Sweep initial altitude and pitch deviations around the base initial state
/// and mark each cell feasible when every constraint passes and the command
/// never leaves the actuator band. `dtheta_grid` is in degrees. Cells are
/// evaluated on up to `jobs` threads; the output order follows the grids.
pub fn admissible_region(
    base: &Prepared,
    dh_grid: &[f64],
    dtheta_grid: &[f64],
    jobs: usize,
) -> Result<RegionResult> {
    if dh_grid.is_empty() || dtheta_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "region grids must be non-empty".into(),
        ));
    }
    if !dh_grid.iter().chain(dtheta_grid).all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter(
            "region grids must be finite".into(),
        ));
    }

    let pairs: Vec<(f64, f64)> = dh_grid
        .iter()
        .flat_map(|dh| dtheta_grid.iter().map(move |dt| (*dh, *dt)))
        .collect();

    let eval = |&(dh, dtheta): &(f64, f64)| {
        let mut x0 = base.scenario.x0;
        x0.h += dh;
        x0.theta += dtheta.to_radians();
        let outcome = match base.run(x0) {
            Ok((sim, report)) => {
                let saturated = !sim.saturation_events.is_empty();
                let feasible = report.all_pass() && !saturated;
                let binding = report
                    .binding_constraint()
                    .map(str::to_string)
                    .or_else(|| saturated.then(|| "saturation".to_string()));
                CellOutcome::Evaluated { feasible, binding }
            }
            Err(e) => CellOutcome::Failed(e.to_string()),
        };
        RegionCell {
            dh_ft: dh,
            dtheta_deg: dtheta,
            outcome,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let cells: Vec<RegionCell> = pool.install(|| pairs.par_iter().map(eval).collect());

    let nt = dtheta_grid.len();
    let scale_t = dtheta_grid.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let scale_h = dh_grid.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let max_feasible_dh = dtheta_grid
        .iter()
        .position(|v| v.abs() <= 1e-12 * scale_t)
        .and_then(|j| {
            let feas: Vec<bool> = (0..dh_grid.len())
                .map(|i| cells[i * nt + j].outcome.feasible())
                .collect();
            axis_extent(dh_grid, &feas)
        });
    let max_feasible_dtheta = dh_grid
        .iter()
        .position(|v| v.abs() <= 1e-12 * scale_h)
        .and_then(|i| {
            let feas: Vec<bool> = (0..nt)
                .map(|j| cells[i * nt + j].outcome.feasible())
                .collect();
            axis_extent(dtheta_grid, &feas)
        });

    Ok(RegionResult {
        dh_grid: dh_grid.to_vec(),
        dtheta_grid: dtheta_grid.to_vec(),
        cells,
        max_feasible_dh,
        max_feasible_dtheta,
    })
}
