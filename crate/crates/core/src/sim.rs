//! Closed-loop simulation of the aircraft under the tracking law.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::io::num;
use crate::lqt::{GainSchedule, Horizon, Reference, TrackingWeights};
use crate::model::{StateSpaceModel, StateVector};
use crate::ode::{integrate, IntegratorSettings};
use crate::trajectory::{FlareGeometry, ReferenceState};

/// Flare reference `(h_d, h_dot_d, 0, 0)` with a fixed terminal target.
///
/// The terminal cost pulls toward `terminal_target` (the touchdown boundary
/// state, all zeros by default) rather than toward `r(t_f)`.
#[derive(Debug, Clone, Copy)]
pub struct FlareReference {
    pub geom: FlareGeometry,
    pub terminal_target: [f64; 4],
}

impl FlareReference {
    pub fn new(geom: FlareGeometry) -> Self {
        Self {
            geom,
            terminal_target: [0.0; 4],
        }
    }
}

impl Reference for FlareReference {
    fn at(&self, t: f64) -> DVector<f64> {
        DVector::from_column_slice(&self.geom.reference_unchecked(t).as_array())
    }

    fn terminal(&self, _t_f: f64) -> DVector<f64> {
        DVector::from_column_slice(&self.terminal_target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitMode {
    /// Apply the raw command and log limit violations.
    #[default]
    Record,
    /// Saturate the command before it enters the plant.
    Clamp,
}

impl fmt::Display for LimitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitMode::Record => "record",
            LimitMode::Clamp => "clamp",
        })
    }
}

impl FromStr for LimitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "record" => Ok(LimitMode::Record),
            "clamp" => Ok(LimitMode::Clamp),
            other => Err(Error::Config(format!("unknown limit mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: StateVector,
    pub horizon: Horizon,
    /// Requested reporting interval (s); shrunk so the grid has an even
    /// number of intervals.
    pub output_dt: f64,
    /// Elevator limits (rad).
    pub elevator_limits: (f64, f64),
    pub limit_mode: LimitMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.output_dt > 0.0 && self.output_dt.is_finite()) {
            return Err(Error::InvalidParameter("output_dt must be positive".into()));
        }
        let (lo, hi) = self.elevator_limits;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "elevator limits ({lo}, {hi}) are not ordered"
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidParameter(
                "initial state must be finite".into(),
            ));
        }
        Horizon::new(self.horizon.t0, self.horizon.t_f)?;
        Ok(())
    }

    /// Uniform output grid with an even number of intervals (odd point count).
    pub fn output_grid(&self) -> Vec<f64> {
        let mut intervals = (self.horizon.length() / self.output_dt - 1e-9)
            .ceil()
            .max(2.0) as usize;
        if intervals % 2 == 1 {
            intervals += 1;
        }
        self.horizon.uniform_grid(intervals + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub references: Vec<ReferenceState>,
    /// Elevator actually applied (rad).
    pub controls: Vec<f64>,
    /// `x - r` per sample.
    pub errors: Vec<[f64; 4]>,
    /// Whether the raw command was outside the limits at each sample.
    pub saturated: Vec<bool>,
    pub saturation_events: Vec<f64>,
    /// `x(t_f)` minus the terminal target of the cost.
    pub terminal_error: [f64; 4],
    /// First sample time with `h <= 0`, if any.
    pub ground_contact: Option<f64>,
    pub j: f64,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &StateVector {
        self.states.last().expect("non-empty result")
    }

    pub const CSV_HEADER: [&'static str; 15] = [
        "t",
        "h",
        "h_dot",
        "theta",
        "theta_dot",
        "h_ref",
        "h_dot_ref",
        "theta_ref",
        "theta_dot_ref",
        "delta_e",
        "e_h",
        "e_hdot",
        "e_theta",
        "e_thetadot",
        "saturated",
    ];

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for i in 0..self.len() {
            let mut rec = vec![num(self.times[i])];
            rec.extend(self.states[i].as_array().iter().map(|x| num(*x)));
            rec.extend(self.references[i].as_array().iter().map(|x| num(*x)));
            rec.push(num(self.controls[i]));
            rec.extend(self.errors[i].iter().map(|x| num(*x)));
            rec.push(if self.saturated[i] {
                "1".into()
            } else {
                "0".into()
            });
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn reference_state(reference: &dyn Reference, t: f64) -> ReferenceState {
    let r = reference.at(t);
    ReferenceState {
        h_d: r[0],
        h_dot_d: r[1],
        theta_d: r[2],
        theta_dot_d: r[3],
    }
}

/// Simulate `x' = A x + B u(t, x)` with `u` from the gain schedule, against
/// an arbitrary 4-vector reference.
pub fn simulate_with_reference(
    model: &StateSpaceModel,
    schedule: &GainSchedule,
    reference: &dyn Reference,
    config: &SimConfig,
    settings: &IntegratorSettings,
) -> Result<SimResult> {
    config.validate()?;
    if schedule.states() != 4 {
        return Err(Error::HorizonMismatch(
            "schedule is not for a 4-state plant".into(),
        ));
    }
    let (h0, h1) = (config.horizon, schedule.horizon);
    if config.horizon.t0 < h1.t0 || config.horizon.t_f > h1.t_f {
        return Err(Error::HorizonMismatch(format!(
            "simulation horizon [{}, {}] is not covered by the schedule [{}, {}]",
            h0.t0, h0.t_f, h1.t0, h1.t_f
        )));
    }

    let (lo, hi) = config.elevator_limits;
    let applied = |raw: f64| match config.limit_mode {
        LimitMode::Record => raw,
        LimitMode::Clamp => raw.clamp(lo, hi),
    };
    let a = model.a;
    let b = model.b;

    let rhs = |t: f64, x: &[f64], dx: &mut [f64]| match schedule.control(x, t) {
        Ok(u) => {
            let xv = nalgebra::Vector4::new(x[0], x[1], x[2], x[3]);
            let d = a * xv + b * applied(u[0]);
            dx.copy_from_slice(d.as_slice());
        }
        Err(_) => dx.fill(f64::NAN),
    };
    let sol = integrate(rhs, &config.x0.as_array(), h0.t0, h0.t_f, settings)?;

    let times = config.output_grid();
    let n = times.len();
    let mut states = Vec::with_capacity(n);
    let mut references = Vec::with_capacity(n);
    let mut controls = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    let mut saturated = Vec::with_capacity(n);
    let mut saturation_events = Vec::new();
    let mut ground_contact = None;

    for &t in &times {
        let x = StateVector::from_slice(&sol.eval(t)?);
        let r = reference_state(reference, t);
        let raw = schedule.control(&x.as_array(), t)?[0];
        let sat = raw < lo || raw > hi;
        if sat {
            saturation_events.push(t);
        }
        if ground_contact.is_none() && x.h <= 0.0 {
            ground_contact = Some(t);
        }
        let xa = x.as_array();
        let ra = r.as_array();
        errors.push([xa[0] - ra[0], xa[1] - ra[1], xa[2] - ra[2], xa[3] - ra[3]]);
        states.push(x);
        references.push(r);
        controls.push(applied(raw));
        saturated.push(sat);
    }

    let target = reference.terminal(h0.t_f);
    let xf = states[n - 1].as_array();
    let terminal_error = [
        xf[0] - target[0],
        xf[1] - target[1],
        xf[2] - target[2],
        xf[3] - target[3],
    ];

    let mut result = SimResult {
        times,
        states,
        references,
        controls,
        errors,
        saturated,
        saturation_events,
        terminal_error,
        ground_contact,
        j: 0.0,
    };
    result.j = performance_index(&result, &schedule.weights);
    Ok(result)
}

/// Simulate the aircraft tracking the flare designed in `geom`.
pub fn simulate(
    model: &StateSpaceModel,
    schedule: &GainSchedule,
    geom: &FlareGeometry,
    config: &SimConfig,
    settings: &IntegratorSettings,
) -> Result<SimResult> {
    simulate_with_reference(
        model,
        schedule,
        &FlareReference::new(*geom),
        config,
        settings,
    )
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
/// Falls back to the trapezoid rule on the last interval otherwise.
pub fn simpson(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut sum = 0.0;
    for i in (0..even).step_by(2) {
        let h = times[i + 2] - times[i];
        sum += h / 6.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
    }
    if even < intervals {
        sum += 0.5 * (times[n - 1] - times[n - 2]) * (values[n - 1] + values[n - 2]);
    }
    sum
}

fn quad(m: &nalgebra::DMatrix<f64>, e: &[f64]) -> f64 {
    let v = DVector::from_column_slice(e);
    (v.transpose() * m * &v)[0]
}

/// `e(t_f)' P e(t_f) + ∫ e' Q e + u' R u dt`, the integral by Simpson's rule
/// on the output grid.
pub fn performance_index(result: &SimResult, weights: &TrackingWeights) -> f64 {
    let integrand: Vec<f64> = result
        .errors
        .iter()
        .zip(&result.controls)
        .map(|(e, u)| quad(&weights.q, e) + weights.r[(0, 0)] * u * u)
        .collect();
    quad(&weights.p, &result.terminal_error) + simpson(&result.times, &integrand)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrorNorms {
    /// Max over the grid of `|e_i|`, ordered `h, h_dot, theta, theta_dot`.
    pub max_abs: [f64; 4],
    /// `|e_i(t_f)|`.
    pub terminal: [f64; 4],
}

pub fn tracking_error_norms(result: &SimResult) -> TrackingErrorNorms {
    let mut max_abs = [0.0f64; 4];
    for e in &result.errors {
        for i in 0..4 {
            max_abs[i] = max_abs[i].max(e[i].abs());
        }
    }
    let last = result.errors.last().copied().unwrap_or([0.0; 4]);
    TrackingErrorNorms {
        max_abs,
        terminal: last.map(f64::abs),
    }
}
