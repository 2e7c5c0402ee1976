use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{InputBox, Signal, StateSpaceModel, Trajectory};

pub const BUILTIN_MODELS: &[&str] = &["car", "building"];

/// Returns one of the shipped data-generating systems.
///
/// * `car`: two-car platoon, state (distance, follower speed, leader speed),
///   output the distance. Order bound 3.
/// * `building`: five-node thermal network of a room, output the room
///   temperature, with a seven-channel known disturbance. The printed output
///   row `[1 0 0 0 0 0 0]` is truncated to the five states, i.e.
///   `C = [1 0 0 0 0]`. Order bound 5.
pub fn builtin_model(name: &str) -> Result<StateSpaceModel> {
    match name {
        "car" => car(),
        "building" => building(),
        _ => Err(Error::UnknownModel { name: name.to_string(), valid: BUILTIN_MODELS.join(", ") }),
    }
}

/// Upper bound on the state dimension used for PE certification.
pub fn default_order_bound(name: &str) -> Option<usize> {
    match name {
        "car" => Some(3),
        "building" => Some(5),
        _ => None,
    }
}

fn car() -> Result<StateSpaceModel> {
    let a = Matrix::from_rows(&[[1.0, -0.3, 0.3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])?;
    let b = Matrix::from_rows(&[[-0.03], [1.0], [0.0]])?;
    let c = Matrix::from_rows(&[[1.0, 0.0, 0.0]])?;
    Ok(StateSpaceModel::new(a, b, c, None, None)?.named("car"))
}

fn building() -> Result<StateSpaceModel> {
    let a = Matrix::from_rows(&[
        [0.9233, 0.00135, 0.0009377, 0.002662, 0.03775],
        [0.0009377, 0.9606, 0.0004754, 0.00135, 0.01928],
        [0.0009377, 0.0006846, 0.9604, 0.00135, 0.01928],
        [0.001849, 0.00135, 0.0009377, 0.9241, 0.03775],
        [0.07636, 0.05617, 0.039, 0.11, 0.7142],
    ])?;
    let b = Matrix::from_rows(&[[3.1194e-4], [1.5815e-4], [1.5815e-4], [3.1194e-4], [0.0131]])?;
    let c = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0, 0.0]])?;
    let bd = Matrix::from_rows(&[
        [-8.0390e-6, 0.0340, 1.9696e-5, 3.2720e-5, 0.0014, 0.0, 0.0],
        [-4.0756e-6, 1.1479e-5, 0.0173, 1.6530e-5, 0.0230, 0.0, 0.0],
        [-4.0756e-6, 1.1479e-5, 0.0173, 1.6530e-5, 0.0007, 0.0, 0.0],
        [-8.0390e-6, 2.2722e-5, 1.9696e-5, 0.0340, 0.0014, 0.0, 0.0],
        [-3.3691e-4, 0.0014, 0.0011, 0.0021, 0.0568, 0.0, 0.0],
    ])?;
    Ok(StateSpaceModel::new(a, b, c, None, Some(bd))?.named("building"))
}

const DISTURBANCE_CSV: &str = include_str!("../../data/building_disturbance.csv");
const OCCUPANCY_CSV: &str = include_str!("../../data/building_occupancy.csv");
const COMFORT_CSV: &str = include_str!("../../data/building_comfort.csv");

/// Shipped scenario data for the building case.
///
/// The disturbance schedule holds channel 1 at zero and channels 2..5
/// (ambient temperatures) at the constant that makes `u = 43.65`, `y = 20`
/// an equilibrium, so the five-sample initialization is an exact
/// trajectory. Occupancy is a step profile (occupied for t in 9..=17) and
/// the comfort level steps from 21 to 21.5 at t = 13.
#[derive(Debug, Clone)]
pub struct BuildingDefaults {
    pub disturbance: Signal,
    pub occupancy: Vec<f64>,
    pub comfort: Vec<f64>,
    pub init: Trajectory,
    pub input_box: InputBox,
    /// Box for the disturbance channels during data collection.
    pub data_disturbance_box: InputBox,
}

pub fn building_defaults() -> Result<BuildingDefaults> {
    let disturbance = super::csv::parse_signal_table(DISTURBANCE_CSV, "building_disturbance.csv")?;
    let occupancy = super::csv::parse_schedule(OCCUPANCY_CSV, "building_occupancy.csv")?;
    let comfort = super::csv::parse_schedule(COMFORT_CSV, "building_comfort.csv")?;
    let n_ini = 5;
    let init = Trajectory::new(
        Signal::constant(&[43.65], n_ini)?,
        Signal::constant(&[20.0], n_ini)?,
        Some(Signal::constant(disturbance.sample(0), n_ini)?),
    )?;
    let nominal = disturbance.sample(0);
    let data_disturbance_box =
        InputBox::new(nominal.iter().map(|v| v - 5.0).collect(), nominal.iter().map(|v| v + 5.0).collect())?;
    Ok(BuildingDefaults {
        disturbance,
        occupancy,
        comfort,
        init,
        input_box: InputBox::uniform(1, 0.0, 200.0)?,
        data_disturbance_box,
    })
}
