//! The shipped case studies as ready-to-run problem instances.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lti::{
    building_defaults, builtin_model, generate_data, Disturbance, InputBox, Signal, StateSpaceModel, Trajectory,
};
use crate::milp::CostKind;
use crate::stl::{parse_with_schedules, Schedule, Schedules, StlFormula};
use crate::synthesis::{self, ClosedLoop, SynthesisConfig, SynthesisResult, DEFAULT_INIT_TOL};

pub const SCENARIO1_SPEC: &str = "G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)";
pub const SCENARIO2_SPEC: &str = "F[0,10] G[0,3] abs(y1) <= 2";
pub const HVAC_SPEC: &str = "G[0,23] (occ > 0.5 -> y1 > comf)";

/// Data length for the car scenarios; enough for PE of order 20.
pub const CAR_STEPS: usize = 200;
/// Data length for the building; eight exogenous channels need PE of order
/// 34, i.e. at least 305 samples.
pub const BUILDING_STEPS: usize = 400;
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    Scenario1,
    Scenario2,
    Hvac,
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scenario1" => Ok(ScenarioName::Scenario1),
            "scenario2" => Ok(ScenarioName::Scenario2),
            "hvac" => Ok(ScenarioName::Hvac),
            _ => Err(Error::invalid(format!("unknown scenario `{s}` (valid: scenario1, scenario2, hvac)"))),
        }
    }
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Scenario1 => "scenario1",
            ScenarioName::Scenario2 => "scenario2",
            ScenarioName::Hvac => "hvac",
        }
    }
}

/// A complete problem instance together with the true system.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub model: StateSpaceModel,
    pub data: Trajectory,
    pub w_ini: Trajectory,
    pub spec: String,
    pub phi: StlFormula,
    pub schedules: Schedules,
    pub d_future: Option<Signal>,
    pub config: SynthesisConfig,
}

fn car_init(u: [f64; 3], y: [f64; 3]) -> Result<Trajectory> {
    Trajectory::new(Signal::scalar(&u)?, Signal::scalar(&y)?, None)
}

impl Scenario {
    /// Builds the instance; `steps` overrides the data length.
    pub fn build(name: ScenarioName, seed: u64, steps: Option<usize>) -> Result<Scenario> {
        match name {
            ScenarioName::Scenario1 | ScenarioName::Scenario2 => {
                let model = builtin_model("car")?;
                let input_box = InputBox::uniform(1, -2.0, 2.0)?;
                let data = generate_data(&model, steps.unwrap_or(CAR_STEPS), &input_box, seed, None)?;
                let (w_ini, spec) = if name == ScenarioName::Scenario1 {
                    (car_init([0.6058, 0.0, 0.0], [-0.1636, 0.0, 0.0])?, SCENARIO1_SPEC)
                } else {
                    (car_init([1.2224, 0.0, 0.0], [2.12, 2.45, 2.45])?, SCENARIO2_SPEC)
                };
                let schedules = Schedules::new();
                let phi = parse_with_schedules(spec, 1, &schedules)?;
                Ok(Scenario {
                    name,
                    model,
                    data,
                    w_ini,
                    spec: spec.to_string(),
                    phi,
                    schedules,
                    d_future: None,
                    config: SynthesisConfig::new(3, input_box),
                })
            }
            ScenarioName::Hvac => {
                let model = builtin_model("building")?;
                let defaults = building_defaults()?;
                let disturbance = Disturbance::Random(defaults.data_disturbance_box.clone());
                let data = generate_data(
                    &model,
                    steps.unwrap_or(BUILDING_STEPS),
                    &defaults.input_box,
                    seed,
                    Some(&disturbance),
                )?;
                let mut schedules = Schedules::new();
                schedules.insert("occ".into(), Schedule::new("occ", defaults.occupancy.clone()));
                schedules.insert("comf".into(), Schedule::new("comf", defaults.comfort.clone()));
                let phi = parse_with_schedules(HVAC_SPEC, 1, &schedules)?;
                let horizon = synthesis::compute_l(&phi);
                Ok(Scenario {
                    name,
                    model,
                    data,
                    w_ini: defaults.init.clone(),
                    spec: HVAC_SPEC.to_string(),
                    phi,
                    schedules,
                    d_future: Some(defaults.disturbance.slice(0, horizon + 1)),
                    config: SynthesisConfig::new(5, defaults.input_box.clone()),
                })
            }
        }
    }

    pub fn with_cost(mut self, cost: CostKind) -> Self {
        self.config.cost = cost;
        self
    }

    pub fn synthesize(&self) -> Result<SynthesisResult> {
        synthesis::synthesize_with_disturbance(&self.data, &self.w_ini, self.d_future.as_ref(), &self.phi, &self.config)
    }

    /// Closed-loop check of a feasible result on the true model.
    pub fn verify(&self, result: &SynthesisResult) -> Result<Option<ClosedLoop>> {
        let Some(plan) = &result.plan else { return Ok(None) };
        synthesis::verify_closed_loop(
            &self.model,
            &result.w_ini,
            &plan.u_opt,
            self.d_future.as_ref(),
            &self.phi,
            DEFAULT_INIT_TOL,
        )
        .map(Some)
    }

    /// `occ_t · comf_t` over the plan horizon (HVAC only).
    pub fn reference(&self, len: usize) -> Option<Vec<f64>> {
        let occ = self.schedules.get("occ")?;
        let comf = self.schedules.get("comf")?;
        Some((0..len).map(|t| occ.at(t) * comf.at(t)).collect())
    }
}
