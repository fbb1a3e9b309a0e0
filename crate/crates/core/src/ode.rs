//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! Works on plain `f64` slices of any length and integrates in either time
//! direction: `t_end < t_start` takes negative steps.

use crate::error::{Error, Result};

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus the embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; `None` picks one from the local derivative.
    pub h_init: Option<f64>,
    /// Step magnitude ceiling; `None` means the whole span.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(
                "rtol and atol must be positive".into(),
            ));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidParameter(
                "max_steps must be at least 1".into(),
            ));
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter("h_init must be positive".into()));
            }
        }
        if let Some(h) = self.h_max {
            if h.is_nan() || h <= 0.0 {
                return Err(Error::InvalidParameter("h_max must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Dense-output coefficients for one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct StepInterpolant {
    t_old: f64,
    h: f64,
    // five coefficient vectors laid out back to back
    rcont: Vec<f64>,
}

impl StepInterpolant {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        for i in 0..n {
            out[i] = r[i]
                + s * (r[n + i] + s1 * (r[2 * n + i] + s * (r[3 * n + i] + s1 * r[4 * n + i])));
        }
    }
}

/// Output of [`integrate`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    interpolants: Vec<StepInterpolant>,
    pub stats: SolverStats,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn forward(&self) -> bool {
        self.t_end() > self.t_start()
    }

    /// Dense evaluation; see [`dense_eval`].
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (lo, hi) = if self.forward() {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfSpan {
                t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }

        // index of the first stored time not before t (in integration order)
        let fwd = self.forward();
        let idx = self
            .times
            .partition_point(|&x| if fwd { x < t } else { x > t });
        if idx < self.times.len() && self.times[idx] == t {
            out.copy_from_slice(&self.states[idx]);
            return Ok(());
        }
        // t lies strictly inside step idx-1 -> idx
        self.interpolants[idx - 1].eval(t, out);
        Ok(())
    }
}

/// Evaluate the continuous extension of the step containing `t`. Accepted
/// step times return the stored state exactly.
pub fn dense_eval(solution: &OdeSolution, t: f64) -> Result<Vec<f64>> {
    solution.eval(t)
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

/// Integrate `y' = f(t, y)` from `t_start` to `t_end`.
///
/// `f(t, y, dy)` writes the derivative into `dy`. Steps are accepted when
/// the scaled RMS of the embedded error estimate is at most one, with
/// per-component scale `atol + rtol * |y|`.
pub fn integrate<F>(
    mut f: F,
    y0: &[f64],
    t_start: f64,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    settings.validate()?;
    if !(t_start.is_finite() && t_end.is_finite()) || t_start == t_end {
        return Err(Error::InvalidParameter(format!(
            "integration span [{t_start}, {t_end}] must be finite and non-empty"
        )));
    }
    if y0.is_empty() || !y0.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial state must be non-empty and finite".into(),
        ));
    }

    let n = y0.len();
    let dir = (t_end - t_start).signum();
    let span = (t_end - t_start).abs();
    let h_max = settings.h_max.unwrap_or(span).min(span);
    let h_min = 1e-14 * span;

    let mut stats = SolverStats::default();
    let mut eval = |t: f64, y: &[f64], dy: &mut [f64], stats: &mut SolverStats| -> Result<()> {
        f(t, y, dy);
        stats.rhs_evals += 1;
        if dy.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteRhs { t })
        }
    };

    let mut t = t_start;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    eval(t, &y, &mut k1, &mut stats)?;

    let mut h = match settings.h_init {
        Some(h) => h.min(h_max),
        None => initial_step(&mut eval, t, &y, &k1, dir, h_max, settings, &mut stats)?,
    };

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut interpolants = Vec::new();
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= settings.max_steps {
            return Err(Error::StepBudgetExceeded {
                max_steps: settings.max_steps,
                t,
            });
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        } else if h > 0.5 * remaining && h < remaining {
            // avoid a sliver step at the end
            h = 0.5 * remaining;
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let hs = dir * h;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        eval(t + C2 * hs, &ytmp, &mut k2, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(t + C3 * hs, &ytmp, &mut k3, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(t + C4 * hs, &ytmp, &mut k4, &mut stats)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(t + C5 * hs, &ytmp, &mut k5, &mut stats)?;
        for i in 0..n {
            ytmp[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t_end } else { t + hs };
        eval(t_new, &ytmp, &mut k6, &mut stats)?;
        for i in 0..n {
            ynew[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        eval(t_new, &ynew, &mut k7, &mut stats)?;
        for i in 0..n {
            err[i] =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&err, &y, &ynew, settings.rtol, settings.atol);

        if !en.is_finite() {
            stats.rejected += 1;
            h *= MIN_FACTOR;
            last_rejected = true;
            continue;
        }

        if en <= 1.0 {
            stats.accepted += 1;
            let mut rcont = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rcont[i] = y[i];
                rcont[n + i] = ydiff;
                rcont[2 * n + i] = bspl;
                rcont[3 * n + i] = ydiff - hs * k7[i] - bspl;
                rcont[4 * n + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            interpolants.push(StepInterpolant {
                t_old: t,
                h: hs,
                rcont,
            });

            t = t_new;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            times.push(t);
            states.push(y.clone());

            if last {
                break;
            }
            let mut factor = if en == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            last_rejected = true;
        }
    }

    Ok(OdeSolution {
        times,
        states,
        interpolants,
        stats,
    })
}

/// Starting step from the size of the solution and its derivatives
/// (Hairer, Norsett and Wanner, algorithm II.4.14).
#[allow(clippy::too_many_arguments)]
fn initial_step<E>(
    eval: &mut E,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    h_max: f64,
    settings: &IntegratorSettings,
    stats: &mut SolverStats,
) -> Result<f64>
where
    E: FnMut(f64, &[f64], &mut [f64], &mut SolverStats) -> Result<()>,
{
    let n = y.len();
    let scale: Vec<f64> = y
        .iter()
        .map(|v| settings.atol + settings.rtol * v.abs())
        .collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(x, s)| (x / s).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(h_max);

    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; n];
    eval(t + dir * h0, &y1, &mut f1, stats)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    #[test]
    fn constant_field_is_preserved() {
        let s = IntegratorSettings::default();
        for (a, b) in [(0.0, 3.0), (5.0, -2.0)] {
            let sol = integrate(|_, _, dy| dy.fill(0.0), &[1.5, -2.0], a, b, &s).unwrap();
            assert_eq!(sol.last_state(), &[1.5, -2.0]);
            assert_eq!(sol.t_end(), b);
        }
    }

    #[test]
    fn exponential_decay() {
        let s = IntegratorSettings::with_tolerances(1e-10, 1e-12);
        let sol = integrate(decay, &[1.0], 0.0, 1.0, &s).unwrap();
        assert!((sol.last_state()[0] - (-1f64).exp()).abs() < 1e-8);
        assert_eq!(sol.t_start(), 0.0);
        assert_eq!(sol.t_end(), 1.0);
    }

    #[test]
    fn cosine_quadrature() {
        let s = IntegratorSettings::with_tolerances(1e-10, 1e-12);
        let sol = integrate(|t, _, dy| dy[0] = t.cos(), &[0.0], 0.0, FRAC_PI_2, &s).unwrap();
        assert!((sol.last_state()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn backward_span() {
        let s = IntegratorSettings::with_tolerances(1e-10, 1e-12);
        let sol = integrate(decay, &[1.0 / E], 1.0, 0.0, &s).unwrap();
        assert!((sol.last_state()[0] - 1.0).abs() < 1e-8);
        assert!(sol.times.windows(2).all(|w| w[1] < w[0]));
        assert!((sol.eval(0.0).unwrap()[0] - 1.0).abs() < 1e-8);
        assert!((sol.eval(0.5).unwrap()[0] - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_matches_stored_and_analytic() {
        let rtol = 1e-8;
        let s = IntegratorSettings::with_tolerances(rtol, 1e-12);
        let sol = integrate(decay, &[1.0], 0.0, 2.0, &s).unwrap();
        assert!(sol.times.windows(2).all(|w| w[1] > w[0]));
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert_eq!(&dense_eval(&sol, *t).unwrap(), y);
        }
        for w in sol.times.windows(2) {
            let tm = 0.5 * (w[0] + w[1]);
            let got = dense_eval(&sol, tm).unwrap()[0];
            let want = (-tm).exp();
            assert!(
                (got - want).abs() <= 10.0 * rtol * want.max(1e-3),
                "t = {tm}"
            );
        }
        assert!(matches!(
            dense_eval(&sol, 2.5),
            Err(Error::OutOfSpan { .. })
        ));
        assert!(matches!(
            dense_eval(&sol, -1e-9),
            Err(Error::OutOfSpan { .. })
        ));
    }

    #[test]
    fn step_budget_and_nonfinite() {
        let s = IntegratorSettings {
            max_steps: 3,
            ..IntegratorSettings::default()
        };
        assert!(matches!(
            integrate(|t, _, dy| dy[0] = (50.0 * t).sin(), &[0.0], 0.0, 100.0, &s),
            Err(Error::StepBudgetExceeded { .. })
        ));
        let s = IntegratorSettings::default();
        assert!(matches!(
            integrate(|_, _, dy| dy[0] = f64::NAN, &[0.0], 0.0, 1.0, &s),
            Err(Error::NonFiniteRhs { .. })
        ));
    }

    #[test]
    fn finite_time_blowup_underflows() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let s = IntegratorSettings::default();
        let r = integrate(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], 0.0, 2.0, &s);
        assert!(r.is_err(), "{r:?}");
    }

    #[test]
    fn rejects_bad_settings_and_span() {
        let s = IntegratorSettings {
            rtol: 0.0,
            ..Default::default()
        };
        assert!(integrate(decay, &[1.0], 0.0, 1.0, &s).is_err());
        let s = IntegratorSettings::default();
        assert!(integrate(decay, &[1.0], 1.0, 1.0, &s).is_err());
        assert!(integrate(decay, &[], 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn deterministic() {
        let s = IntegratorSettings::default();
        let a = integrate(|t, y, dy| dy[0] = t.sin() * y[0], &[1.0], 0.0, 7.0, &s).unwrap();
        let b = integrate(|t, y, dy| dy[0] = t.sin() * y[0], &[1.0], 0.0, 7.0, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_h_max() {
        let s = IntegratorSettings {
            h_max: Some(0.01),
            ..Default::default()
        };
        let sol = integrate(decay, &[1.0], 0.0, 1.0, &s).unwrap();
        assert!(sol.times.windows(2).all(|w| w[1] - w[0] <= 0.01 + 1e-15));
        assert!(sol.stats.accepted >= 100);
    }
}
