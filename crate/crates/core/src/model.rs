//! Linearized longitudinal (short-period) aircraft model.
//!
//! The state is `x = [h, h_dot, theta, theta_dot]` in feet, seconds and
//! radians; the single input is the elevator deflection in radians.

use nalgebra::{DMatrix, Matrix4, Vector4};

use crate::error::{Error, Result};

/// Physical short-period parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AircraftParams {
    /// Short-period gain (1/s).
    pub k_s: f64,
    /// Path time constant (s).
    pub t_s: f64,
    /// Short-period resonant frequency (rad/s).
    pub omega_s: f64,
    /// Short-period damping factor.
    pub zeta: f64,
    /// Approach airspeed (ft/s).
    pub v: f64,
}

impl AircraftParams {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.k_s, self.t_s, self.omega_s, self.zeta, self.v]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter(
                "aircraft parameters must be finite".into(),
            ));
        }
        if self.t_s <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "T_s must be positive, got {}",
                self.t_s
            )));
        }
        if self.omega_s <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_s must be positive, got {}",
                self.omega_s
            )));
        }
        if self.v <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "V must be positive, got {}",
                self.v
            )));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta must lie in (0, 1), got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub h: f64,
    pub h_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl StateVector {
    pub const ZERO: StateVector = StateVector {
        h: 0.0,
        h_dot: 0.0,
        theta: 0.0,
        theta_dot: 0.0,
    };

    pub fn new(h: f64, h_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            h,
            h_dot,
            theta,
            theta_dot,
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.h, self.h_dot, self.theta, self.theta_dot)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.h, self.h_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }
}

impl From<Vector4<f64>> for StateVector {
    fn from(v: Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// `x_dot = A x + B delta_e`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub c: Matrix4<f64>,
    pub params: AircraftParams,
}

/// Build the state-space model from the short-period parameters.
///
/// Rows 1 and 3 of `A` are the kinematic shift rows; row 2 is the
/// path relation `h_ddot = (V/T_s) theta - h_dot / T_s`, row 4 closes the
/// fourth-order altitude dynamics.
pub fn build_state_space(params: AircraftParams) -> Result<StateSpaceModel> {
    params.validate()?;
    let AircraftParams {
        k_s,
        t_s,
        omega_s,
        zeta,
        v,
    } = params;
    let zw = zeta * omega_s;
    let w2 = omega_s * omega_s;

    let a22 = -1.0 / t_s;
    let a23 = v / t_s;
    let a42 = 1.0 / (v * t_s * t_s) - 2.0 * zw / (v * t_s) + w2 / v;
    let a43 = 2.0 * zw / t_s - w2 - 1.0 / (t_s * t_s);
    let a44 = 1.0 / t_s - 2.0 * zw;
    let b4 = w2 * k_s * t_s;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        0.0, a22, a23, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, a42, a43, a44,
    );
    let b = Vector4::new(0.0, 0.0, 0.0, b4);
    Ok(StateSpaceModel {
        a,
        b,
        c: Matrix4::identity(),
        params,
    })
}

impl StateSpaceModel {
    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 4, self.a.iter().copied())
    }

    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 1, self.b.iter().copied())
    }

    pub fn c_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 4, self.c.iter().copied())
    }
}

/// State derivative `A x + B delta_e`.
pub fn dynamics(model: &StateSpaceModel, x: &StateVector, delta_e: f64) -> Result<StateVector> {
    if !x.is_finite() || !delta_e.is_finite() {
        return Err(Error::InvalidParameter(
            "state and elevator input must be finite".into(),
        ));
    }
    Ok((model.a * x.to_vector() + model.b * delta_e).into())
}

/// Coefficients of `det(sI - A)`, highest power first.
///
/// Evaluated with the Faddeev-LeVerrier recursion so it works for any
/// 4x4 matrix, not only the structured one produced by [`build_state_space`].
pub fn characteristic_coefficients(model: &StateSpaceModel) -> [f64; 5] {
    characteristic_polynomial(&model.a)
}

pub fn characteristic_polynomial(a: &Matrix4<f64>) -> [f64; 5] {
    let n = 4;
    let mut coeffs = [0.0; 5];
    coeffs[0] = 1.0;
    let mut m = Matrix4::<f64>::zeros();
    for k in 1..=n {
        m = a * m + Matrix4::identity() * coeffs[k - 1];
        coeffs[k] = -(a * m).trace() / k as f64;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_params() -> AircraftParams {
        AircraftParams {
            k_s: -0.95,
            t_s: 40.0,
            omega_s: 1.0,
            zeta: 0.5,
            v: 256.0,
        }
    }

    #[test]
    fn coefficients_for_reference_aircraft() {
        let m = build_state_space(table_params()).unwrap();
        assert_eq!(m.a[(1, 1)], -0.025);
        assert_eq!(m.a[(1, 2)], 6.4);
        assert_eq!(m.a[(3, 3)], -0.975);
        assert_eq!(m.b[3], -38.0);
        // 0.975625 / 256 and 0.025 - 1 - 1/1600
        assert!((m.a[(3, 1)] - 0.975625 / 256.0).abs() < 1e-15);
        assert!((m.a[(3, 2)] + 0.975625).abs() < 1e-15);
        assert_eq!(m.c, Matrix4::identity());
    }

    #[test]
    fn sparsity_pattern() {
        let m = build_state_space(table_params()).unwrap();
        let nonzero = [(0, 1), (1, 1), (1, 2), (2, 3), (3, 1), (3, 2), (3, 3)];
        for i in 0..4 {
            for j in 0..4 {
                if !nonzero.contains(&(i, j)) {
                    assert_eq!(m.a[(i, j)], 0.0, "a[{i},{j}]");
                }
            }
        }
        assert_eq!(m.a[(0, 1)], 1.0);
        assert_eq!(m.a[(2, 3)], 1.0);
        assert_eq!(&m.b.as_slice()[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_gain_gives_zero_input_column() {
        let p = AircraftParams {
            k_s: 0.0,
            ..table_params()
        };
        let m = build_state_space(p).unwrap();
        assert_eq!(m.b, Vector4::zeros());
    }

    #[test]
    fn rejects_bad_params() {
        let base = table_params();
        for p in [
            AircraftParams { t_s: 0.0, ..base },
            AircraftParams {
                omega_s: -1.0,
                ..base
            },
            AircraftParams { v: 0.0, ..base },
            AircraftParams { zeta: 1.0, ..base },
            AircraftParams { zeta: 0.0, ..base },
            AircraftParams {
                k_s: f64::NAN,
                ..base
            },
        ] {
            assert!(matches!(
                build_state_space(p),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn dynamics_examples() {
        let m = build_state_space(table_params()).unwrap();
        assert_eq!(
            dynamics(&m, &StateVector::ZERO, 0.0).unwrap(),
            StateVector::ZERO
        );

        let d = dynamics(&m, &StateVector::new(10.0, -5.0, 0.0, 0.0), 0.0).unwrap();
        assert_eq!(d.h, -5.0);
        assert!((d.h_dot - 0.125).abs() < 1e-15);
        assert_eq!(d.theta, 0.0);
        assert!((d.theta_dot + 0.019_055_175_781_25).abs() < 1e-15);

        let d = dynamics(&m, &StateVector::ZERO, 1.0).unwrap();
        assert_eq!(d, StateVector::new(0.0, 0.0, 0.0, -38.0));

        assert!(dynamics(&m, &StateVector::new(f64::INFINITY, 0.0, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn characteristic_examples() {
        let m = build_state_space(table_params()).unwrap();
        let c = characteristic_coefficients(&m);
        let expected = [1.0, 1.0, 1.0, 0.0, 0.0];
        for (got, want) in c.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{c:?}");
        }

        let p = AircraftParams {
            zeta: 0.7,
            omega_s: 2.0,
            ..table_params()
        };
        let c = characteristic_coefficients(&build_state_space(p).unwrap());
        let expected = [1.0, 2.8, 4.0, 0.0, 0.0];
        for (got, want) in c.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{c:?}");
        }

        assert_eq!(
            characteristic_polynomial(&Matrix4::zeros()),
            [1.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn row_two_is_path_relation() {
        let p = table_params();
        let m = build_state_space(p).unwrap();
        assert_eq!(m.a[(1, 1)], -1.0 / p.t_s);
        assert_eq!(m.a[(1, 2)], p.v / p.t_s);
    }
}
