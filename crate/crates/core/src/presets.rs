//! Reference plants: unit diffusion, no potential, decay rate 0.5.

use crate::homogenize::{Measurement, PlantSpec};
use crate::sturm_liouville::{CoefficientPair, Profile};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub plant: PlantSpec,
    /// Initial profile, compatible with `u0` and the measurement.
    pub z0: Profile,
    pub u0: f64,
}

/// Point measurement `z(t, 0)`, reaction `q_c = 3`, `z0 = 1 + x²`.
pub fn dirichlet_example() -> Result<Preset> {
    Ok(Preset {
        name: "dirichlet-example",
        plant: PlantSpec::new(CoefficientPair::constant(1.0, 0.0)?, 3.0, Measurement::DirichletAt0, 0.5)?,
        z0: Profile::Polynomial(vec![1.0, 0.0, 1.0]),
        u0: 2.0,
    })
}

/// Flux measurement `z_x(t, 0)`, reaction `q_c = 10`, `z0 = x(x - 2/3)`.
pub fn neumann_example() -> Result<Preset> {
    Ok(Preset {
        name: "neumann-example",
        plant: PlantSpec::new(CoefficientPair::constant(1.0, 0.0)?, 10.0, Measurement::NeumannAt0, 0.5)?,
        z0: Profile::Polynomial(vec![0.0, -2.0 / 3.0, 1.0]),
        u0: 1.0 / 3.0,
    })
}

pub fn by_name(name: &str) -> Option<Result<Preset>> {
    match name {
        "dirichlet-example" => Some(dirichlet_example()),
        "neumann-example" => Some(neumann_example()),
        _ => None,
    }
}
