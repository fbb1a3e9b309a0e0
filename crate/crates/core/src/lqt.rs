//! Finite-horizon linear-quadratic tracking.
//!
//! Minimizes `(Cx(t_f) - r_f)' P (Cx(t_f) - r_f) + ∫ (Cx - r)' Q (Cx - r) + u' R u dt`
//! for `x' = Ax + Bu`. The optimal law is `u = -K(t) x + R⁻¹ B' v(t)` with
//! `K = R⁻¹ B' S`, where `S` and `v` solve
//!
//! ```text
//! -S' = A'S + SA - S B R⁻¹ B' S + C'QC,   S(t_f) = C'PC
//! -v' = (A - BK)' v + C'Q r,              v(t_f) = C'P r_f
//! ```
//!
//! Both are integrated backward together as one packed ODE.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ode::{integrate, IntegratorSettings, OdeSolution};

/// Default number of points on the reporting grid.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Eigenvalue floor used when checking positive semidefiniteness.
pub const PSD_TOLERANCE: f64 = -1e-8;

/// `x' = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || b.ncols() == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "inconsistent shapes: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "system matrices must be finite".into(),
            ));
        }
        Ok(Self { a, b, c })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

impl From<&crate::model::StateSpaceModel> for LinearSystem {
    fn from(m: &crate::model::StateSpaceModel) -> Self {
        LinearSystem {
            a: m.a_dyn(),
            b: m.b_dyn(),
            c: m.c_dyn(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingWeights {
    /// Terminal weight on the output error.
    pub p: DMatrix<f64>,
    /// Running weight on the output error.
    pub q: DMatrix<f64>,
    /// Control weight; 1x1 for the elevator-only aircraft.
    pub r: DMatrix<f64>,
}

fn check_symmetric_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!("{name} must be square")));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be finite")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
    }
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-12 * scale {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

impl TrackingWeights {
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let w = Self { p, q, r };
        w.validate()?;
        Ok(w)
    }

    /// Diagonal `P`, `Q` and a scalar `R`.
    pub fn diagonal(p: &[f64], q: &[f64], r: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(p)),
            DMatrix::from_diagonal(&DVector::from_column_slice(q)),
            DMatrix::from_element(1, 1, r),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_symmetric_psd("P", &self.p)?;
        check_symmetric_psd("Q", &self.q)?;
        check_symmetric_psd("R", &self.r)?;
        if self.p.nrows() != self.q.nrows() {
            return Err(Error::InvalidParameter(
                "P and Q must have the same size".into(),
            ));
        }
        if self.r.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "R must be positive definite".into(),
            ));
        }
        Ok(())
    }

    fn check_against(&self, sys: &LinearSystem) -> Result<()> {
        if self.q.nrows() != sys.outputs() || self.r.nrows() != sys.inputs() {
            return Err(Error::InvalidParameter(format!(
                "weights sized for {} outputs / {} inputs, system has {} / {}",
                self.q.nrows(),
                self.r.nrows(),
                sys.outputs(),
                sys.inputs()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t0: f64,
    pub t_f: f64,
}

impl Horizon {
    pub fn new(t0: f64, t_f: f64) -> Result<Self> {
        if !(t0.is_finite() && t_f.is_finite() && t_f > t0) {
            return Err(Error::InvalidParameter(format!(
                "horizon [{t0}, {t_f}] is empty"
            )));
        }
        Ok(Self { t0, t_f })
    }

    pub fn length(&self) -> f64 {
        self.t_f - self.t0
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t_f
    }

    /// `n` uniformly spaced points, ending exactly on `t_f`.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        let dt = self.length() / (n - 1) as f64;
        let mut g: Vec<f64> = (0..n).map(|i| self.t0 + i as f64 * dt).collect();
        g[n - 1] = self.t_f;
        g
    }
}

/// Time-indexed output reference `r(t)`.
pub trait Reference: Sync {
    fn at(&self, t: f64) -> DVector<f64>;

    /// Target for the terminal cost; the running reference at `t_f` unless
    /// overridden.
    fn terminal(&self, t_f: f64) -> DVector<f64> {
        self.at(t_f)
    }
}

impl<F> Reference for F
where
    F: Fn(f64) -> DVector<f64> + Sync,
{
    fn at(&self, t: f64) -> DVector<f64> {
        self(t)
    }
}

/// `r ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroReference(pub usize);

impl Reference for ZeroReference {
    fn at(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.0)
    }
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn pack(s: &DMatrix<f64>, v: &DVector<f64>, out: &mut [f64]) {
    let n = s.nrows();
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = s[(i, j)];
            k += 1;
        }
    }
    out[k..k + n].copy_from_slice(v.as_slice());
}

/// Unpack into a symmetric `S` (mirrored upper triangle) and `v`.
fn unpack(y: &[f64], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut s = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            s[(i, j)] = y[k];
            s[(j, i)] = y[k];
            k += 1;
        }
    }
    let v = DVector::from_column_slice(&y[k..k + n]);
    (s, v)
}

fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Riccati solution, feedforward and feedback gains over the horizon.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub horizon: Horizon,
    pub grid: Vec<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub v: Vec<DVector<f64>>,
    pub k_fb: Vec<DMatrix<f64>>,
    /// Backward solution of the packed `(S, v)` system.
    pub dense: OdeSolution,
    pub weights: TrackingWeights,
    b: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    /// `R⁻¹ B'`, shared by the gain and the feedforward term.
    r_inv_bt: DMatrix<f64>,
}

/// Integrate the Riccati and feedforward equations backward from `t_f` and
/// sample them on a uniform grid of `grid_points` values.
pub fn solve_gains(
    system: &LinearSystem,
    weights: &TrackingWeights,
    reference: &dyn Reference,
    horizon: Horizon,
    settings: &IntegratorSettings,
    grid_points: usize,
) -> Result<GainSchedule> {
    weights.validate()?;
    weights.check_against(system)?;
    Horizon::new(horizon.t0, horizon.t_f)?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least two points".into(),
        ));
    }

    let n = system.states();
    let a = &system.a;
    let b = &system.b;
    let c = &system.c;
    let ct = c.transpose();
    let r_inv = weights
        .r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("R is singular".into()))?;
    let r_inv_bt = &r_inv * b.transpose();
    let b_rinv_bt = b * &r_inv_bt;
    let ctqc = &ct * &weights.q * c;
    let ctq = &ct * &weights.q;

    let r_f = reference.terminal(horizon.t_f);
    if r_f.len() != system.outputs() {
        return Err(Error::InvalidParameter(
            "reference dimension does not match C".into(),
        ));
    }
    let s_f = &ct * &weights.p * c;
    let v_f = &ct * &weights.p * &r_f;
    let m = packed_len(n) + n;
    let mut y_f = vec![0.0; m];
    pack(&s_f, &v_f, &mut y_f);

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (s, v) = unpack(y, n);
        let sa = &s * a;
        let s_dot = -(&sa.transpose() + &sa - &s * &b_rinv_bt * &s + &ctqc);
        let k = &r_inv_bt * &s;
        let closed = a - b * &k;
        let v_dot = -(closed.transpose() * &v + &ctq * reference.at(t));
        pack(&s_dot, &v_dot, dy);
    };

    let dense = integrate(rhs, &y_f, horizon.t_f, horizon.t0, settings).map_err(|e| match e {
        Error::NonFiniteRhs { t } => Error::RiccatiBlowUp { t },
        other => other,
    })?;
    if !dense.last_state().iter().all(|x| x.is_finite()) {
        return Err(Error::RiccatiBlowUp { t: horizon.t0 });
    }

    let mut schedule = GainSchedule {
        horizon,
        grid: horizon.uniform_grid(grid_points),
        s: Vec::with_capacity(grid_points),
        v: Vec::with_capacity(grid_points),
        k_fb: Vec::with_capacity(grid_points),
        dense,
        weights: weights.clone(),
        b: b.clone(),
        r_inv,
        r_inv_bt,
    };
    for i in 0..grid_points {
        let (s, v) = schedule.riccati_at(schedule.grid[i])?;
        schedule.k_fb.push(&schedule.r_inv_bt * &s);
        schedule.s.push(s);
        schedule.v.push(v);
    }
    Ok(schedule)
}

impl GainSchedule {
    pub fn states(&self) -> usize {
        self.b.nrows()
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn r_inverse(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if self.horizon.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfSpan {
                t,
                start: self.horizon.t0,
                end: self.horizon.t_f,
            })
        }
    }

    /// Symmetrized `S(t)` and `v(t)` from the dense solution.
    pub fn riccati_at(&self, t: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_time(t)?;
        let y = self.dense.eval(t)?;
        let (s, v) = unpack(&y, self.states());
        Ok((symmetrize(&s), v))
    }

    /// `K(t) = R⁻¹ B' S(t)`.
    pub fn feedback_gain(&self, t: f64) -> Result<DMatrix<f64>> {
        let (s, _) = self.riccati_at(t)?;
        Ok(&self.r_inv_bt * s)
    }

    /// `-K(t) x + R⁻¹ B' v(t)`.
    pub fn control(&self, x: &[f64], t: f64) -> Result<DVector<f64>> {
        if x.len() != self.states() || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "state must be finite and sized to the system".into(),
            ));
        }
        let (s, v) = self.riccati_at(t)?;
        let x = DVector::from_column_slice(x);
        Ok(&self.r_inv_bt * (v - s * x))
    }
}

impl GainSchedule {
    /// CSV header: `t`, the upper triangle of `S` row by row, `v`, then the
    /// gain rows.
    pub fn csv_header(&self) -> Vec<String> {
        let n = self.states();
        let mut h = vec!["t".to_string()];
        for i in 1..=n {
            for j in i..=n {
                h.push(format!("s{i}{j}"));
            }
        }
        h.extend((1..=n).map(|i| format!("v{i}")));
        for row in 1..=self.b.ncols() {
            for i in 1..=n {
                h.push(if self.b.ncols() == 1 {
                    format!("k{i}")
                } else {
                    format!("k{row}_{i}")
                });
            }
        }
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let n = self.states();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.csv_header())?;
        for i in 0..self.grid.len() {
            let mut rec = vec![crate::io::num(self.grid[i])];
            for r in 0..n {
                for c in r..n {
                    rec.push(crate::io::num(self.s[i][(r, c)]));
                }
            }
            rec.extend(self.v[i].iter().map(|x| crate::io::num(*x)));
            for r in 0..self.k_fb[i].nrows() {
                rec.extend(self.k_fb[i].row(r).iter().map(|x| crate::io::num(*x)));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Free-function form of [`GainSchedule::feedback_gain`].
pub fn feedback_gain(schedule: &GainSchedule, t: f64) -> Result<DMatrix<f64>> {
    schedule.feedback_gain(t)
}

/// Optimal elevator command for the single-input aircraft.
pub fn control_law(schedule: &GainSchedule, x: &crate::model::StateVector, t: f64) -> Result<f64> {
    Ok(schedule.control(&x.as_array(), t)?[0])
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    s.clone().symmetric_eigen().eigenvalues.min()
}
