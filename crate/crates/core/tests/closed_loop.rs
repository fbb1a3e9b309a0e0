use std::sync::OnceLock;

use flare_lqt::constraints::{admissible_region, symmetric_grid, validate, ConstraintLimits};
use flare_lqt::lqt::TrackingWeights;
use flare_lqt::model::StateVector;
use flare_lqt::pipeline::{Prepared, Scenario};
use flare_lqt::sim::{simpson, LimitMode, SimResult};
use proptest::prelude::*;

fn case1() -> &'static Prepared {
    static P: OnceLock<Prepared> = OnceLock::new();
    P.get_or_init(|| Scenario::reference_landing().prepare().unwrap())
}

fn soft(output_dt: f64) -> Prepared {
    let mut s = Scenario::reference_landing();
    s.weights = TrackingWeights::diagonal(&[0.9, 0.01, 1.0, 1.0], &[0.01; 4], 1.0).unwrap();
    s.output_dt = output_dt;
    s.prepare().unwrap()
}

/// Reference landing with descent and alpha-rate checks relaxed and a wide
/// elevator band, so the region has both feasible and infeasible cells.
fn relaxed() -> Prepared {
    let mut p = case1().clone();
    p.scenario.limits.descent_band_fpm = (0.0, 1e4);
    p.scenario.limits.alpha_rate_max = 1.0;
    p.scenario.limits.elevator_band = (-3.0, 1.0);
    p
}

#[test]
fn simpson_is_exact_on_cubics() {
    let t: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
    let want = 2f64.powi(4) / 4.0 - 4.0 + 2.0;
    assert!((simpson(&t, &y) - want).abs() < 1e-12);
}

#[test]
fn performance_index_converges_under_grid_halving() {
    let j1 = soft(0.01).run_nominal().unwrap().0.j;
    let j2 = soft(0.005).run_nominal().unwrap().0.j;
    assert!((j1 - j2).abs() <= 1e-6 * j2, "{j1} vs {j2}");
}

#[test]
fn clamp_mode_keeps_the_elevator_in_band() {
    let mut p = case1().clone();
    p.scenario.limit_mode = LimitMode::Clamp;
    let sim = p.simulate(p.scenario.x0).unwrap();
    let (lo, hi) = p.scenario.limits.elevator_band;
    assert!(sim.controls.iter().all(|u| *u >= lo && *u <= hi));
    assert!(!sim.saturation_events.is_empty());
    let recorded = case1().simulate(p.scenario.x0).unwrap();
    assert_eq!(
        recorded.saturation_events,
        recorded
            .times
            .iter()
            .zip(&recorded.saturated)
            .filter(|(_, s)| **s)
            .map(|(t, _)| *t)
            .collect::<Vec<_>>()
    );
}

#[test]
fn output_grid_and_csv_shape() {
    let sim = case1().run_nominal().unwrap().0;
    assert_eq!(sim.len(), 2001);
    assert_eq!(*sim.times.last().unwrap(), 20.0);
    let mut buf = Vec::new();
    sim.write_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rdr.headers().unwrap().len(), 15);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), sim.len());
    for (row, (t, x)) in rows.iter().zip(sim.times.iter().zip(&sim.states)) {
        assert_eq!(row[0].parse::<f64>().unwrap(), *t);
        assert_eq!(row[1].parse::<f64>().unwrap(), x.h);
        assert_eq!(row[4].parse::<f64>().unwrap(), x.theta_dot);
    }
}

#[test]
fn region_is_nested_under_tighter_elevator_limits() {
    let loose = relaxed();
    let mut tight = loose.clone();
    let (lo, hi) = tight.scenario.limits.elevator_band;
    tight.scenario.limits.elevator_band = (0.5 * lo, 0.5 * hi);
    let (dh, dt) = (symmetric_grid(40.0, 5), symmetric_grid(2.0, 5));
    let a = admissible_region(&loose, &dh, &dt, 2).unwrap();
    let b = admissible_region(&tight, &dh, &dt, 2).unwrap();
    let count = |r: &flare_lqt::constraints::RegionResult| {
        r.cells.iter().filter(|c| c.outcome.feasible()).count()
    };
    assert!(count(&a) > count(&b), "tightening should remove cells");
    assert!(count(&a) > 0 && count(&a) < a.cells.len());
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert!(!cb.outcome.feasible() || ca.outcome.feasible());
    }
}

#[test]
fn region_order_does_not_depend_on_threads() {
    let p = relaxed();
    let (dh, dt) = (symmetric_grid(30.0, 4), symmetric_grid(1.5, 3));
    let a = admissible_region(&p, &dh, &dt, 1).unwrap();
    let b = admissible_region(&p, &dh, &dt, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 12);
    assert_eq!(a.cell(3, 0).dh_ft, 30.0);
    assert_eq!(a.cell(3, 0).dtheta_deg, -1.5);
}

#[test]
fn infinite_elevator_band_never_binds_c5() {
    let mut p = case1().clone();
    p.scenario.limits.elevator_band = (f64::NEG_INFINITY, f64::INFINITY);
    let r = admissible_region(&p, &symmetric_grid(40.0, 3), &symmetric_grid(2.0, 3), 2).unwrap();
    for c in &r.cells {
        let (sim, rep) = p
            .run(StateVector {
                h: p.scenario.x0.h + c.dh_ft,
                theta: p.scenario.x0.theta + c.dtheta_deg.to_radians(),
                ..p.scenario.x0
            })
            .unwrap();
        assert!(rep.c5_elevator && sim.saturation_events.is_empty());
    }
}

fn combine(a: f64, x: &StateVector, y: &StateVector) -> StateVector {
    StateVector::from(x.to_vector() * a + y.to_vector() * (1.0 - a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn closed_loop_is_affine_in_initial_state(
        dh1 in -30.0..30.0f64, dth1 in -0.05..0.05f64,
        dh2 in -30.0..30.0f64, dth2 in -0.05..0.05f64,
        a in -1.0..2.0f64,
    ) {
        let p = case1();
        let x0 = p.scenario.x0;
        let x1 = StateVector { h: x0.h + dh1, theta: x0.theta + dth1, ..x0 };
        let x2 = StateVector { h: x0.h + dh2, theta: x0.theta + dth2, ..x0 };
        let run = |x: StateVector| -> SimResult { p.simulate(x).unwrap() };
        let (s1, s2, sm) = (run(x1), run(x2), run(combine(a, &x1, &x2)));
        for i in (0..sm.len()).step_by(50) {
            let want = combine(a, &s1.states[i], &s2.states[i]).to_vector();
            let got = sm.states[i].to_vector();
            prop_assert!((got - want).amax() <= 1e-6 * (1.0 + want.amax()));
        }
    }

    #[test]
    fn widening_bands_never_fails_a_passing_check(
        d_lo in 0.0..50.0f64, d_hi in 0.0..50.0f64, p_lo in 0.0..0.05f64, p_hi in 0.0..0.05f64,
        dead in 0.0..0.01f64, alpha in 0.0..0.1f64, rate in 0.0..0.3f64, e_lo in 0.0..2.0f64, e_hi in 0.0..2.0f64,
        dh in -20.0..20.0f64,
    ) {
        let p = case1();
        let sim = p.simulate(StateVector { h: p.scenario.x0.h + dh, ..p.scenario.x0 }).unwrap();
        let base = ConstraintLimits::default();
        let mut wide = base;
        wide.descent_band_fpm = (base.descent_band_fpm.0 - d_lo, base.descent_band_fpm.1 + d_hi);
        wide.pitch_band = (base.pitch_band.0 - p_lo, base.pitch_band.1 + p_hi);
        wide.pitch_deadband += dead;
        wide.alpha_max += alpha;
        wide.alpha_rate_max += rate;
        wide.elevator_band = (base.elevator_band.0 - e_lo, base.elevator_band.1 + e_hi);
        let x_dot = p.scenario.flare.x_dot;
        let a = validate(&sim, &p.geom, &base, x_dot);
        let b = validate(&sim, &p.geom, &wide, x_dot);
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            prop_assert!(!ra.pass || rb.pass, "{} flipped", ra.id);
        }
    }
}
