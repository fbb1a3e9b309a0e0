//! Helpers shared by the integration tests.
#![allow(dead_code)]

use flare_lqt::lqt::{Horizon, LinearSystem, Reference, TrackingWeights};
use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Frobenius distance relative to the norm of `want`.
pub fn rel_norm(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}

pub fn rel_vec(got: &DVector<f64>, want: &DVector<f64>) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
}

/// `L L' + floor I` with `L` uniform.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let l = uniform(rng, n, n, 1.0);
    &l * l.transpose() + DMatrix::identity(n, n) * floor
}

/// Sum-of-sines reference, one channel per output.
#[derive(Debug, Clone)]
pub struct SineReference {
    pub amp: Vec<f64>,
    pub freq: Vec<f64>,
    pub phase: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Reference for SineReference {
    fn at(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.amp.len(), |i, _| {
            self.offset[i] + self.amp[i] * (self.freq[i] * t + self.phase[i]).sin()
        })
    }
}

pub struct RandomProblem {
    pub system: LinearSystem,
    pub weights: TrackingWeights,
    pub reference: SineReference,
    pub horizon: Horizon,
    pub x0: DVector<f64>,
}

/// LTI system with 2..=4 states, 1..=2 inputs and 1..=n outputs, PSD
/// weights and a smooth reference.
pub fn random_problem(rng: &mut ChaCha8Rng) -> RandomProblem {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=2);
    let p = rng.gen_range(1..=n);
    let system = LinearSystem::new(
        uniform(rng, n, n, 1.0),
        uniform(rng, n, m, 1.0),
        uniform(rng, p, n, 1.0),
    )
    .expect("consistent sizes");
    let weights = TrackingWeights::new(
        random_psd(rng, p, 0.1),
        random_psd(rng, p, 0.1),
        random_psd(rng, m, 0.5),
    )
    .expect("valid weights");
    let reference = SineReference {
        amp: (0..p).map(|_| rng.gen_range(0.2..2.0)).collect(),
        freq: (0..p).map(|_| rng.gen_range(0.2..2.0)).collect(),
        phase: (0..p)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect(),
        offset: (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let t0 = rng.gen_range(-1.0..1.0);
    let horizon = Horizon::new(t0, t0 + rng.gen_range(1.0..3.0)).expect("ordered");
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    RandomProblem {
        system,
        weights,
        reference,
        horizon,
        x0,
    }
}

pub struct DpSolution {
    pub s0: DMatrix<f64>,
    pub v0: DVector<f64>,
    /// Optimal held input over the first step.
    pub u_hold: DVector<f64>,
}

/// Backward dynamic programming over inputs held constant on steps of about
/// `dt`. Each step's cost `int (Cx - r)' Q (Cx - r) + u' R u` is integrated
/// exactly in `x, u` through the augmented flow `exp([[A, B], [0, 0]] s)`,
/// with three-point Gauss-Legendre in time. The value function is
/// `x' S x - 2 v' x + c`, the convention of the continuous solver.
pub fn dp_oracle(
    system: &LinearSystem,
    weights: &TrackingWeights,
    reference: &dyn Reference,
    horizon: Horizon,
    x0: &DVector<f64>,
    dt_target: f64,
) -> DpSolution {
    let steps = (horizon.length() / dt_target).round().max(1.0) as usize;
    let dt = horizon.length() / steps as f64;
    let (n, m) = (system.states(), system.inputs());
    let nz = n + m;

    let mut f = DMatrix::zeros(nz, nz);
    f.view_mut((0, 0), (n, n)).copy_from(&system.a);
    f.view_mut((0, n), (n, m)).copy_from(&system.b);
    let c_hat = {
        let mut c = DMatrix::zeros(system.outputs(), nz);
        c.view_mut((0, 0), (system.outputs(), n))
            .copy_from(&system.c);
        c
    };
    let chat_q = c_hat.transpose() * &weights.q;

    let r3 = (0.6f64).sqrt();
    let nodes = [
        (0.5 * (1.0 - r3), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + r3), 5.0 / 18.0),
    ];
    let psi: Vec<(f64, f64, DMatrix<f64>)> = nodes
        .iter()
        .map(|(x, w)| (x * dt, w * dt, (&f * (x * dt)).exp()))
        .collect();

    let mut w_stage = DMatrix::zeros(nz, nz);
    for (_, w, p) in &psi {
        w_stage += p.transpose() * &chat_q * &c_hat * p * *w;
    }
    w_stage
        .view_mut((n, n), (m, m))
        .add_assign(&(&weights.r * dt));
    let g_full = (&f * dt).exp();
    let g = g_full.view((0, 0), (n, nz)).into_owned();

    let c = &system.c;
    let mut s = c.transpose() * &weights.p * c;
    let mut v = c.transpose() * &weights.p * reference.terminal(horizon.t_f);
    let mut u_hold = DVector::zeros(m);
    for k in (0..steps).rev() {
        let t_k = horizon.t0 + k as f64 * dt;
        let mut h_lin = g.transpose() * &v;
        for (s_node, w, p) in &psi {
            h_lin += p.transpose() * &chat_q * reference.at(t_k + s_node) * *w;
        }
        let h = &w_stage + g.transpose() * &s * &g;
        let hxx = h.view((0, 0), (n, n));
        let hxu = h.view((0, n), (n, m));
        let huu_inv = h
            .view((n, n), (m, m))
            .into_owned()
            .try_inverse()
            .expect("R > 0");
        let (hx, hu) = (h_lin.rows(0, n), h_lin.rows(n, m));
        if k == 0 {
            u_hold = &huu_inv * (hu - hxu.transpose() * x0);
        }
        let s_next = hxx - hxu * &huu_inv * hxu.transpose();
        v = hx - hxu * &huu_inv * hu;
        s = (&s_next + s_next.transpose()) * 0.5;
    }
    DpSolution {
        s0: s,
        v0: v,
        u_hold,
    }
}
