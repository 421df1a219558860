//! Population inversion in a driven three-level giant atom.
//!
//! An equidistant atom with spacing `d` has `φ_{1,0} = ω_{1,0} d/v` and,
//! through the anharmonicity `α`, `φ_{2,1} = φ_{1,0} + α d/v`. Choosing `φ`
//! where `Γ_{1,0}` sits at an interference zero while `Γ_{2,1}` is large
//! lets a drive on `0 ↔ 2` pile population into `|1⟩`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::{build_giant_atom_system, steady_state, Drive, GiantAtomOptions};
use crate::error::{Error, Result};
use crate::model::{equidistant_layout, AtomSpec, TransitionScaling, Waveguide};
use crate::spectral::level_shifts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionOptions {
    pub points: usize,
    pub spacing: f64,
    /// `α = anharmonicity_factor · 2πv/d`.
    pub anharmonicity_factor: f64,
    pub scaling: TransitionScaling,
    /// Drive detuning from the Lamb-shifted `0 ↔ 2` transition.
    pub detuning: f64,
    pub waveguide: Waveguide,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            points: 10,
            spacing: 1.0,
            anharmonicity_factor: -0.1,
            scaling: TransitionScaling::Bosonic,
            detuning: 0.0,
            waveguide: Waveguide::dimensionless(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionRow {
    pub phi: f64,
    pub omega_d: f64,
    pub gamma_10: f64,
    pub gamma_21: f64,
    pub populations: [f64; 3],
    pub inverted: bool,
}

impl InversionOptions {
    pub fn anharmonicity(&self) -> f64 {
        self.anharmonicity_factor * TAU * self.waveguide.velocity() / self.spacing
    }

    /// Three-level atom whose lower transition has phase `phi`.
    pub fn atom(&self, phi: f64) -> Result<AtomSpec> {
        let omega10 = self.waveguide.frequency_for_phase(phi, self.spacing);
        AtomSpec::three_level(omega10, self.anharmonicity())
            .map_err(|_| Error::invalid(format!("phase {phi} leaves a non-positive transition frequency")))
    }
}

/// Steady-state populations on every `(φ, Ω_d)` pair, φ-major.
pub fn inversion_scan(options: &InversionOptions, omega_d: &[f64], phi: &[f64]) -> Result<Vec<InversionRow>> {
    if options.points < 2 {
        return Err(Error::invalid("inversion scan needs N >= 2 coupling points"));
    }
    let layout = equidistant_layout(options.points, options.spacing, 1.0)?;
    let cells: Vec<(f64, f64)> = phi.iter().flat_map(|&p| omega_d.iter().map(move |&w| (p, w))).collect();
    cells
        .par_iter()
        .map(|&(p, w)| {
            let atom = options.atom(p)?;
            let drive = Drive { lower: 0, upper: 2, strength: w, detuning: options.detuning };
            let opts = GiantAtomOptions { drive: Some(drive), scaling: options.scaling, rotating_frame: true };
            let system = build_giant_atom_system(&layout, &atom, &options.waveguide, &opts)?;
            let gamma_10 = system.jumps()[0].rate;
            let gamma_21 = system.jumps()[1].rate;
            let populations = if w == 0.0 {
                // Nothing excites an atom that starts in its ground state.
                [1.0, 0.0, 0.0]
            } else {
                let rho = steady_state(&system)?;
                [rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re]
            };
            Ok(InversionRow {
                phi: p,
                omega_d: w,
                gamma_10,
                gamma_21,
                populations,
                inverted: populations[1] > populations[0],
            })
        })
        .collect()
}

/// Lamb-shifted `0 ↔ 2` transition frequency, for converting a detuning to
/// an absolute drive frequency.
pub fn shifted_two_photon_frequency(options: &InversionOptions, phi: f64) -> Result<f64> {
    let atom = options.atom(phi)?;
    let layout = equidistant_layout(options.points, options.spacing, 1.0)?.with_transition_scaling(2, options.scaling);
    let shifts = level_shifts(&layout, &atom, &options.waveguide);
    Ok(atom.transition_between(2, 0) + shifts[2] - shifts[0])
}
