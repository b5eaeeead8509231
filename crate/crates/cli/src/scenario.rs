//! Scenario files (TOML) and built-in presets.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use specstab::certificate::DEFAULT_ALPHAS;
use specstab::homogenize::{Measurement, PlantSpec, DEFAULT_EPS};
use specstab::presets;
use specstab::simulate::{DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_SIM_MODES};
use specstab::sturm_liouville::{CoefficientPair, Profile, Smoothness, DEFAULT_GRID_SIZE};
use specstab::synthesis::PoleRule;

use crate::CliError;

pub const DEFAULT_N_MAX: usize = 10;
pub const DEFAULT_OUTPUT: &str = "specstab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderChoice {
    /// Smallest certified order up to `n_max`.
    Auto,
    Fixed(usize),
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub poles: PoleRule,
    pub order: OrderChoice,
    pub n_max: usize,
    pub alphas: Vec<f64>,
    pub eps: f64,
    pub grid_size: usize,
    pub n_sim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub z0: Profile,
    pub u0: f64,
    pub fit_window: (f64, f64),
    pub output: PathBuf,
}

impl Scenario {
    fn from_preset(p: presets::Preset) -> Self {
        Self {
            name: p.name.to_string(),
            plant: p.plant,
            poles: PoleRule::Shifted,
            order: OrderChoice::Auto,
            n_max: DEFAULT_N_MAX,
            alphas: DEFAULT_ALPHAS.to_vec(),
            eps: DEFAULT_EPS,
            grid_size: DEFAULT_GRID_SIZE,
            n_sim: DEFAULT_SIM_MODES,
            dt: DEFAULT_DT,
            t_end: DEFAULT_HORIZON,
            z0: p.z0,
            u0: p.u0,
            fit_window: (DEFAULT_HORIZON / 3.0, DEFAULT_HORIZON),
            output: PathBuf::from(DEFAULT_OUTPUT),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Coefficient {
    Constant(f64),
    Polynomial(Vec<f64>),
}

impl Coefficient {
    fn profile(self) -> Profile {
        match self {
            Coefficient::Constant(v) => Profile::Constant(v),
            Coefficient::Polynomial(c) => Profile::Polynomial(c),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OrderField {
    Fixed(usize),
    Keyword(String),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasurementField {
    Bounded,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantSection {
    p: Coefficient,
    q: Coefficient,
    q_c: f64,
    measurement: MeasurementField,
    /// Polynomial kernel of a bounded measurement.
    c: Option<Coefficient>,
    /// Kernel samples on a uniform grid of `[0, 1]`.
    c_samples: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoleSection {
    controller: Vec<f64>,
    observer: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateSection {
    alphas: Option<Vec<f64>>,
    eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumSection {
    grid_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    n_sim: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    /// Ascending polynomial coefficients of the initial profile.
    z0: Option<Coefficient>,
    z0_samples: Option<Vec<f64>>,
    u0: f64,
    fit_window: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    delta: f64,
    order: Option<OrderField>,
    n_max: Option<usize>,
    output: Option<PathBuf>,
    plant: PlantSection,
    poles: Option<PoleSection>,
    #[serde(default)]
    certificate: CertificateSection,
    #[serde(default)]
    spectrum: SpectrumSection,
    simulation: SimulationSection,
}

fn parse(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let plant = file.plant;
    let coeffs = CoefficientPair::new(plant.p.profile(), None, plant.q.profile(), Smoothness::C2)?;
    let measurement = match (plant.measurement, plant.c, plant.c_samples) {
        (MeasurementField::Dirichlet, None, None) => Measurement::DirichletAt0,
        (MeasurementField::Neumann, None, None) => Measurement::NeumannAt0,
        (MeasurementField::Bounded, Some(c), None) => Measurement::Bounded(c.profile()),
        (MeasurementField::Bounded, None, Some(s)) if s.len() >= 2 => Measurement::Bounded(Profile::Sampled(s)),
        (MeasurementField::Bounded, _, _) => {
            return Err(CliError::Config(
                "bounded measurement needs exactly one of `c` or `c_samples` (at least two samples)".into(),
            ))
        }
        _ => return Err(CliError::Config("`c` and `c_samples` apply to bounded measurements only".into())),
    };
    let plant_spec = PlantSpec::new(coeffs, plant.q_c, measurement, file.delta)?;

    let order = match file.order {
        None => OrderChoice::Auto,
        Some(OrderField::Fixed(n)) => OrderChoice::Fixed(n),
        Some(OrderField::Keyword(k)) if k == "auto" => OrderChoice::Auto,
        Some(OrderField::Keyword(k)) => {
            return Err(CliError::Config(format!("order must be an integer or \"auto\", got {k:?}")))
        }
    };
    let sim = file.simulation;
    let z0 = match (sim.z0, sim.z0_samples) {
        (Some(c), None) => c.profile(),
        (None, Some(s)) if s.len() >= 2 => Profile::Sampled(s),
        _ => return Err(CliError::Config("simulation needs exactly one of `z0` or `z0_samples`".into())),
    };
    let t_end = sim.t_end.unwrap_or(DEFAULT_HORIZON);
    let fit_window = sim.fit_window.map(|[a, b]| (a, b)).unwrap_or((t_end / 3.0, t_end));
    Ok(Scenario {
        name: file.name,
        plant: plant_spec,
        poles: file
            .poles
            .map(|p| PoleRule::Explicit {
                controller: p.controller,
                observer: p.observer,
            })
            .unwrap_or(PoleRule::Shifted),
        order,
        n_max: file.n_max.unwrap_or(DEFAULT_N_MAX),
        alphas: file.certificate.alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
        eps: file.certificate.eps.unwrap_or(DEFAULT_EPS),
        grid_size: file.spectrum.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
        n_sim: sim.n_sim.unwrap_or(DEFAULT_SIM_MODES),
        dt: sim.dt.unwrap_or(DEFAULT_DT),
        t_end,
        z0,
        u0: sim.u0,
        fit_window,
        output: file.output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
    })
}

/// Resolves a preset name or reads a scenario file.
pub fn load_scenario(target: &str) -> Result<Scenario, CliError> {
    if let Some(preset) = presets::by_name(target) {
        return Ok(Scenario::from_preset(preset?));
    }
    let path = Path::new(target);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "{target:?} is neither a preset (dirichlet-example, neumann-example) nor an existing file"
        )));
    }
    parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUNDED: &str = r#"
name = "bounded"
delta = 0.5
order = 4

[plant]
p = [1.0, 0.1]
q = 0.0
q_c = 3.0
measurement = "bounded"
c = 1.0

[simulation]
z0 = [2.0, 0.0, 0.0]
u0 = 2.0
"#;

    #[test]
    fn parses_bounded_scenario() {
        let s = parse(BOUNDED).unwrap();
        assert_eq!(s.order, OrderChoice::Fixed(4));
        assert_eq!(s.plant.coeffs.p_prime, Some(Profile::Polynomial(vec![0.1])));
        assert!(matches!(s.plant.measurement, Measurement::Bounded(Profile::Constant(_))));
        assert_eq!(s.n_sim, DEFAULT_SIM_MODES);
        assert_eq!(s.fit_window, (1.0, 3.0));
    }

    #[test]
    fn rejects_bad_configs() {
        for (needle, replacement) in [
            ("order = 4", "order = \"fast\""),
            ("c = 1.0", ""),
            ("q_c = 3.0", "q_c = 3.0\nbogus = 1"),
            ("measurement = \"bounded\"", "measurement = \"robin\""),
        ] {
            let text = BOUNDED.replace(needle, replacement);
            assert!(matches!(parse(&text), Err(CliError::Config(_))), "{replacement}");
        }
        let text = BOUNDED.replace("delta = 0.5", "delta = -1.0");
        assert!(matches!(parse(&text), Err(CliError::Core(_))));
    }

    #[test]
    fn presets_resolve() {
        let s = load_scenario("dirichlet-example").unwrap();
        assert_eq!(s.plant.q_c, 3.0);
        assert_eq!(s.u0, 2.0);
        let s = load_scenario("neumann-example").unwrap();
        assert_eq!(s.plant.q_c, 10.0);
        assert!(matches!(load_scenario("no-such-thing"), Err(CliError::Config(_))));
    }
}
