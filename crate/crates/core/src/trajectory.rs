//! Glide-slope line and exponential flare-out reference.
//!
//! The flare is `h(X) = -h_c + (h_f0 + h_c) exp(-K_x (X - X_f0))`, joined to
//! the glide line with matching height and slope at `X_f0`, and crossing the
//! ground exactly at the touchdown abscissa `X_t`. In time, with constant
//! ground speed, it becomes `h(t) = -h_c + (h_f0 + h_c) exp(-K (t - t0))`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Residual tolerance of the flare constraint solve (ft).
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Geometric approach data read off the approach plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachPlate {
    /// Glide-slope start abscissa (ft).
    pub x_g0: f64,
    /// Glide-slope start altitude (ft).
    pub h_g0: f64,
    /// Touchdown abscissa (ft).
    pub x_t: f64,
}

impl ApproachPlate {
    pub fn validate(&self) -> Result<()> {
        if ![self.x_g0, self.h_g0, self.x_t]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidParameter(
                "approach plate values must be finite".into(),
            ));
        }
        if self.h_g0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "h_g0 must be positive, got {}",
                self.h_g0
            )));
        }
        if self.x_t <= self.x_g0 {
            return Err(Error::InvalidParameter(format!(
                "touchdown abscissa {} must lie past the glide-slope start {}",
                self.x_t, self.x_g0
            )));
        }
        Ok(())
    }
}

/// How the temporal decay constant `K` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMode {
    /// `K = K_x * X_dot`, the constant-ground-speed mapping.
    Geometric,
    /// `K` chosen so the reference touches down exactly at `t_f`.
    #[default]
    Timed,
}

impl fmt::Display for DecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayMode::Geometric => "geometric",
            DecayMode::Timed => "timed",
        })
    }
}

impl FromStr for DecayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(DecayMode::Geometric),
            "timed" => Ok(DecayMode::Timed),
            other => Err(Error::Config(format!("unknown flare mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlareInputs {
    /// Flare start altitude (ft).
    pub h_f0: f64,
    /// Desired flight path angle (rad).
    pub nu_d: f64,
    /// Forward ground speed (ft/s).
    pub x_dot: f64,
    /// Flare start time (s).
    pub t0: f64,
    /// Targeted touchdown time (s).
    pub t_f: f64,
    pub mode: DecayMode,
}

impl FlareInputs {
    /// Checks everything except the flight path angle, which is handled by
    /// the constraint solve (a non-positive angle has no touchdown root).
    fn validate(&self, plate: &ApproachPlate) -> Result<()> {
        if ![self.h_f0, self.nu_d, self.x_dot, self.t0, self.t_f]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidParameter(
                "flare inputs must be finite".into(),
            ));
        }
        if !(self.h_f0 > 0.0 && self.h_f0 < plate.h_g0) {
            return Err(Error::InvalidParameter(format!(
                "flare altitude {} must lie in (0, {})",
                self.h_f0, plate.h_g0
            )));
        }
        if self.nu_d >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidParameter(format!(
                "flight path angle {} rad must be below pi/2",
                self.nu_d
            )));
        }
        if self.x_dot <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "forward speed must be positive, got {}",
                self.x_dot
            )));
        }
        if self.t_f <= self.t0 {
            return Err(Error::InvalidParameter(format!(
                "touchdown time {} must follow flare start {}",
                self.t_f, self.t0
            )));
        }
        Ok(())
    }
}

/// Solved flare constants together with the inputs they came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlareGeometry {
    /// Flare start abscissa (ft).
    pub x_f0: f64,
    /// Spatial decay constant (1/ft).
    pub k_x: f64,
    /// Depth of the asymptote below ground (ft).
    pub h_c: f64,
    /// Temporal decay constant in use (1/s).
    pub k: f64,
    pub inputs: FlareInputs,
    pub plate: ApproachPlate,
    /// Set when the geometry came out of [`solve_flare_geometry`], i.e. the
    /// path is the exponential flare by construction.
    pub exponential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceState {
    pub h_d: f64,
    pub h_dot_d: f64,
    pub theta_d: f64,
    pub theta_dot_d: f64,
}

impl ReferenceState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.h_d, self.h_dot_d, self.theta_d, self.theta_dot_d]
    }
}

/// Altitude of the straight glide line at abscissa `x`.
pub fn glide_altitude(plate: &ApproachPlate, nu_d: f64, x: f64) -> f64 {
    -nu_d.tan() * (x - plate.x_g0) + plate.h_g0
}

/// Bracketed scalar root: bisection to a narrow bracket, then a few
/// secant steps. Returns the abscissa with the smallest residual seen.
pub fn bracketed_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return Err(Error::NoRoot {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }

    let mut best = if fa.abs() < fb.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm.abs() < best.1.abs() {
            best = (m, fm);
        }
        if fm == 0.0 || (b - a) <= 1e-9 * (1.0 + m.abs()) {
            break;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }

    // secant polish from the final bracket
    let (mut x0, mut x1) = (a, b);
    let (mut f0, mut f1) = (f(x0), f(x1));
    for _ in 0..8 {
        if best.1.abs() < tol * 1e-3 || f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > lo && x2 <= hi) {
            break;
        }
        let f2 = f(x2);
        if f2.abs() < best.1.abs() {
            best = (x2, f2);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
    }

    if best.1.abs() < tol {
        Ok(best.0)
    } else {
        Err(Error::NoRoot {
            lo,
            hi,
            f_lo: f(lo),
            f_hi: f(hi),
        })
    }
}

/// Solve the slope-continuity, path-continuity and touchdown constraints.
///
/// `X_f0` is closed-form. `h_c` comes from a root solve over `[0, h_g0]` on
/// `f(c) = c - (h_f0 + c) exp(-tan(nu) (X_t - X_f0) / (h_f0 + c))`, then
/// `K_x = tan(nu) / (h_f0 + h_c)`. Solving for `h_c` itself, not for
/// `h_f0 + h_c`, keeps tiny biases from cancelling to zero.
pub fn solve_flare_geometry(plate: &ApproachPlate, inputs: &FlareInputs) -> Result<FlareGeometry> {
    plate.validate()?;
    inputs.validate(plate)?;

    let (lo, hi) = (0.0, plate.h_g0);
    if inputs.nu_d <= 0.0 {
        // Level or climbing glide line: the residual is the constant -h_f0.
        return Err(Error::NoRoot {
            lo,
            hi,
            f_lo: -inputs.h_f0,
            f_hi: -inputs.h_f0,
        });
    }

    let tan_nu = inputs.nu_d.tan();
    let x_f0 = (plate.h_g0 - inputs.h_f0) / tan_nu + plate.x_g0;
    let run = plate.x_t - x_f0;
    if !x_f0.is_finite() {
        return Err(Error::NoRoot {
            lo,
            hi,
            f_lo: f64::NAN,
            f_hi: f64::NAN,
        });
    }

    let residual = |c: f64| {
        let u = inputs.h_f0 + c;
        c - u * (-tan_nu * run / u).exp()
    };
    let mut h_c = bracketed_root(residual, lo, hi, ROOT_TOLERANCE)?;
    // Newton polish. f' = 1 - e^-s (1 + s) > 0 with s = tan(nu) run / u, and
    // the absolute tolerance alone would accept h_c = 0 when h_c is tiny.
    for _ in 0..4 {
        let f = residual(h_c);
        if f == 0.0 {
            break;
        }
        let s = tan_nu * run / (inputs.h_f0 + h_c);
        let next = h_c - f / (1.0 - (-s).exp() * (1.0 + s));
        if !(next > lo && next <= hi) || residual(next).abs() > f.abs() {
            break;
        }
        h_c = next;
    }
    // still zero only when the decay underflows
    if h_c <= 0.0 {
        return Err(Error::NoRoot {
            lo,
            hi,
            f_lo: residual(lo),
            f_hi: residual(hi),
        });
    }
    let k_x = tan_nu / (inputs.h_f0 + h_c);

    let mut geom = FlareGeometry {
        x_f0,
        k_x,
        h_c,
        k: 0.0,
        inputs: *inputs,
        plate: *plate,
        exponential: true,
    };
    geom.k = match inputs.mode {
        DecayMode::Geometric => geom.geometric_k(),
        DecayMode::Timed => geom.timed_k(),
    };
    Ok(geom)
}

impl FlareGeometry {
    /// `K = K_x * X_dot`.
    pub fn geometric_k(&self) -> f64 {
        self.k_x * self.inputs.x_dot
    }

    /// `K` that puts the touchdown exactly at `t_f`.
    pub fn timed_k(&self) -> f64 {
        ((self.inputs.h_f0 + self.h_c) / self.h_c).ln() / (self.inputs.t_f - self.inputs.t0)
    }

    /// Flare altitude as a function of forward distance.
    pub fn flare_altitude(&self, x: f64) -> f64 {
        -self.h_c + (self.inputs.h_f0 + self.h_c) * (-self.k_x * (x - self.x_f0)).exp()
    }

    /// `dh/dX` of the flare path.
    pub fn flare_slope(&self, x: f64) -> f64 {
        -self.k_x * (self.inputs.h_f0 + self.h_c) * (-self.k_x * (x - self.x_f0)).exp()
    }

    /// Residual of the touchdown constraint (ft).
    pub fn touchdown_residual(&self) -> f64 {
        self.flare_altitude(self.plate.x_t)
    }

    /// Reference without the start-time check; continues the analytic
    /// formula on both sides of the flare window.
    pub fn reference_unchecked(&self, t: f64) -> ReferenceState {
        let amp = self.inputs.h_f0 + self.h_c;
        let decay = (-self.k * (t - self.inputs.t0)).exp();
        ReferenceState {
            h_d: -self.h_c + amp * decay,
            h_dot_d: -self.k * amp * decay,
            theta_d: 0.0,
            theta_dot_d: 0.0,
        }
    }
}

pub fn reference_state(geom: &FlareGeometry, t: f64) -> Result<ReferenceState> {
    if t < geom.inputs.t0 {
        return Err(Error::TimeBeforeStart {
            t,
            t0: geom.inputs.t0,
        });
    }
    Ok(geom.reference_unchecked(t))
}

/// Root of `h_d(t) = 0`.
pub fn touchdown_time(geom: &FlareGeometry) -> f64 {
    geom.inputs.t0 + ((geom.inputs.h_f0 + geom.h_c) / geom.h_c).ln() / geom.k
}
