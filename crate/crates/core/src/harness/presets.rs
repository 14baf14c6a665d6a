//! Floor-certified initial conditions.

use serde::{Deserialize, Serialize};

use crate::dynamics::{min_vorticity_magnitude, FluidState};
use crate::error::{HvbkError, Result};
use crate::random::{analytic_solenoidal, trial_rng};
use crate::vector::ZERO3;
use crate::verifier::{beltrami_vorticity, draw_floor_certified};

pub const PRESETS: [&str; 3] = ["beltrami_shear", "counterflow", "random_analytic"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcParams {
    /// Mean counterflow speed added to the normal fluid along `x`.
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_sigma_draw")]
    pub sigma_draw: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_sigma_draw() -> f64 {
    0.3
}

impl Default for IcParams {
    fn default() -> Self {
        IcParams {
            u: None,
            epsilon: default_epsilon(),
            sigma_draw: default_sigma_draw(),
        }
    }
}

/// Smallest vorticity minimum accepted for the random preset before redrawing.
const RANDOM_FLOOR: f64 = 1e-3;

/// Build the named initial state. `counterflow` defaults to `U = 1`; the others to `U = 0`.
pub fn init_preset(name: &str, params: &IcParams, n: usize, seed: u64) -> Result<FluidState> {
    if n == 0 {
        return Err(HvbkError::Input("presets need N >= 1".into()));
    }
    let core = beltrami_vorticity(n);
    match name {
        "beltrami_shear" => FluidState::new(core.clone(), core, ZERO3, offset(params.u.unwrap_or(0.0)), 0.0),
        "counterflow" => FluidState::new(core.clone(), core, ZERO3, offset(params.u.unwrap_or(1.0)), 0.0),
        "random_analytic" => {
            if !(params.epsilon >= 0.0) || !(params.sigma_draw >= 0.0) {
                return Err(HvbkError::Input("epsilon and sigma_draw must be >= 0".into()));
            }
            let mut rng = trial_rng(seed, 0);
            let (ws, _, _) = draw_floor_certified(n, params.epsilon, params.sigma_draw, RANDOM_FLOOR, 2, &mut rng)?;
            let mut wn = core;
            wn.axpy(params.epsilon, &analytic_solenoidal(n, params.sigma_draw, &mut trial_rng(seed, 1)))?;
            FluidState::new(ws, wn, ZERO3, offset(params.u.unwrap_or(0.0)), 0.0)
        }
        other => Err(HvbkError::Input(format!(
            "unknown preset {other:?}; expected one of {}",
            PRESETS.join(", ")
        ))),
    }
}

fn offset(u: f64) -> [f64; 3] {
    [u, 0.0, 0.0]
}

/// Realized `inf |ω_s|` of a state on the friction grid.
pub fn measured_floor(state: &FluidState, oversample: usize) -> Result<f64> {
    Ok(min_vorticity_magnitude(&state.omega_s, oversample)?.0)
}
