#![allow(dead_code)]

use specstab::homogenize::{reduce, ReducedPlant};
use specstab::presets::{self, Preset};
use specstab::sturm_liouville::analytic_spectrum;
use specstab::synthesis::{synthesize_gains, GainSet, PoleRule};

pub fn dirichlet() -> Preset {
    presets::dirichlet_example().unwrap()
}

pub fn neumann() -> Preset {
    presets::neumann_example().unwrap()
}

/// Reduced preset on a closed-form spectrum with `modes` modes, plus default gains.
pub fn reduced(preset: &Preset, modes: usize) -> (ReducedPlant, GainSet) {
    let s = analytic_spectrum(preset.plant.boundary(), modes, 2000).unwrap();
    let r = reduce(&preset.plant, s, modes - 1).unwrap();
    let g = synthesize_gains(&r, &PoleRule::Shifted).unwrap();
    (r, g)
}
