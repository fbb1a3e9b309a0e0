//! End-to-end scenario: design, gain solve, simulation and validation.

use crate::constraints::{validate, ConstraintLimits, ConstraintReport};
use crate::error::Result;
use crate::lqt::{solve_gains, GainSchedule, Horizon, LinearSystem, TrackingWeights};
use crate::model::{build_state_space, AircraftParams, StateSpaceModel, StateVector};
use crate::ode::IntegratorSettings;
use crate::sim::{simulate, FlareReference, LimitMode, SimConfig, SimResult};
use crate::trajectory::{
    solve_flare_geometry, ApproachPlate, DecayMode, FlareGeometry, FlareInputs,
};

/// Everything needed to run one landing, in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub aircraft: AircraftParams,
    pub plate: ApproachPlate,
    pub flare: FlareInputs,
    pub weights: TrackingWeights,
    pub x0: StateVector,
    pub settings: IntegratorSettings,
    pub grid_points: usize,
    pub output_dt: f64,
    pub limit_mode: LimitMode,
    pub limits: ConstraintLimits,
}

impl Scenario {
    /// The San Francisco 10L approach with the reference aircraft and
    /// weights, starting 5 ft low and 0.05 rad nose-down.
    pub fn reference_landing() -> Self {
        Self {
            aircraft: AircraftParams {
                k_s: -0.95,
                t_s: 40.0,
                omega_s: 1.0,
                zeta: 0.5,
                v: 256.0,
            },
            plate: ApproachPlate {
                x_g0: -34346.0,
                h_g0: 1800.0,
                x_t: 3957.0,
            },
            flare: FlareInputs {
                h_f0: 100.0,
                nu_d: 3f64.to_radians(),
                x_dot: 256.0,
                t0: 0.0,
                t_f: 20.0,
                mode: DecayMode::Timed,
            },
            weights: TrackingWeights::diagonal(
                &[0.9, 0.01, 1.0, 1.0],
                &[0.00067, 0.0265, 150.0, 65.0],
                1.0,
            )
            .expect("reference weights are valid"),
            x0: StateVector::new(95.0, -14.0, -0.05, 0.0),
            settings: IntegratorSettings::default(),
            grid_points: crate::lqt::DEFAULT_GRID_POINTS,
            output_dt: 0.01,
            limit_mode: LimitMode::Record,
            limits: ConstraintLimits::default(),
        }
    }

    pub fn horizon(&self) -> Result<Horizon> {
        Horizon::new(self.flare.t0, self.flare.t_f)
    }

    pub fn design(&self) -> Result<FlareGeometry> {
        solve_flare_geometry(&self.plate, &self.flare)
    }

    pub fn sim_config(&self, x0: StateVector) -> Result<SimConfig> {
        Ok(SimConfig {
            x0,
            horizon: self.horizon()?,
            output_dt: self.output_dt,
            elevator_limits: self.limits.elevator_band,
            limit_mode: self.limit_mode,
        })
    }

    /// Design the flare and solve the gains; the result can simulate any
    /// number of initial states.
    pub fn prepare(&self) -> Result<Prepared> {
        self.limits.validate()?;
        let model = build_state_space(self.aircraft)?;
        let geom = self.design()?;
        let schedule = solve_gains(
            &LinearSystem::from(&model),
            &self.weights,
            &FlareReference::new(geom),
            self.horizon()?,
            &self.settings,
            self.grid_points,
        )?;
        Ok(Prepared {
            scenario: self.clone(),
            model,
            geom,
            schedule,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub model: StateSpaceModel,
    pub geom: FlareGeometry,
    pub schedule: GainSchedule,
}

impl Prepared {
    pub fn simulate(&self, x0: StateVector) -> Result<SimResult> {
        simulate(
            &self.model,
            &self.schedule,
            &self.geom,
            &self.scenario.sim_config(x0)?,
            &self.scenario.settings,
        )
    }

    pub fn run(&self, x0: StateVector) -> Result<(SimResult, ConstraintReport)> {
        let sim = self.simulate(x0)?;
        let report = validate(
            &sim,
            &self.geom,
            &self.scenario.limits,
            self.scenario.flare.x_dot,
        );
        Ok((sim, report))
    }

    pub fn run_nominal(&self) -> Result<(SimResult, ConstraintReport)> {
        self.run(self.scenario.x0)
    }
}
