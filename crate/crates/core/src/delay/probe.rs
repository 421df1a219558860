//! Weak-probe spectrum and the one-to-two resonance threshold.
//!
//! Laplace-transforming the delay equation gives the transfer function
//!
//! ```text
//! χ(δ) = 1 / [−iδ + (γ/2) Σ_{k,n} g_k g_n e^{i(ω_a + δ)τ_kn}]
//! ```
//!
//! which is also `∫_0^∞ c(t) e^{iδt} dt` for the free decay from `c(0) = 1`.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{AmplitudeTrajectory, DelayKernel};
use crate::error::{Error, Result};
use crate::model::{equidistant_layout, Layout, Waveguide};
use crate::peaks::prominent_peaks;

/// Minimum peak prominence as a fraction of the spectrum maximum.
pub const PROMINENCE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSpectrum {
    pub delta: Vec<f64>,
    pub chi2: Vec<f64>,
    pub n_peaks: usize,
    /// Detunings of the counted peaks.
    pub peak_positions: Vec<f64>,
}

/// `|χ(δ)|²` on a detuning grid, with its prominent peaks.
pub fn probe_response(layout: &Layout, waveguide: &Waveguide, omega_a: f64, deltas: &[f64]) -> Result<ProbeSpectrum> {
    let kernel = DelayKernel::new(layout, waveguide, omega_a)?;
    Ok(spectrum_from_kernel(&kernel, deltas))
}

fn spectrum_from_kernel(kernel: &DelayKernel, deltas: &[f64]) -> ProbeSpectrum {
    let chi2: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let denom = Complex64::new(0.0, -d) + kernel.symbol(d);
            1.0 / denom.norm_sqr()
        })
        .collect();
    let peaks = prominent_peaks(&chi2, PROMINENCE_FRACTION);
    ProbeSpectrum {
        delta: deltas.to_vec(),
        n_peaks: peaks.len(),
        peak_positions: peaks.iter().map(|p| deltas[p.index]).collect(),
        chi2,
    }
}

/// `∫_0^T c(t) e^{iδt} dt` over a computed trajectory, integrating the
/// Hermite interpolant step by step.
pub fn fourier_response(traj: &AmplitudeTrajectory, deltas: &[f64]) -> Vec<Complex64> {
    let rule = GaussLegendre::new(NonZeroUsize::new(4).expect("nonzero"));
    deltas
        .par_iter()
        .map(|&d| {
            let mut acc = Complex64::new(0.0, 0.0);
            for w in traj.times.windows(2) {
                let re = rule.integrate(w[0], w[1], |t| (traj.history.at(t) * Complex64::from_polar(1.0, d * t)).re);
                let im = rule.integrate(w[0], w[1], |t| (traj.history.at(t) * Complex64::from_polar(1.0, d * t)).im);
                acc += Complex64::new(re, im);
            }
            acc
        })
        .collect()
}

/// Equidistant uniform atoms parameterized by `Γ_0 τ`, with the
/// nearest-neighbour phase `ω_a τ` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdFamily {
    pub points: usize,
    /// `ω_a τ` (mod 2π).
    pub phase: f64,
    /// Half-width of the detuning window in units of `Γ_0`.
    pub window: f64,
    pub samples: usize,
}

impl Default for ThresholdFamily {
    fn default() -> Self {
        ThresholdFamily { points: 2, phase: 0.0, window: 3.0, samples: 4001 }
    }
}

impl ThresholdFamily {
    /// Layout, waveguide (`v = γ = 1`) and `ω_a` for one member.
    pub fn member(&self, gamma_tau: f64) -> Result<(Layout, Waveguide, f64)> {
        if self.points == 0 {
            return Err(Error::invalid("family needs at least one point"));
        }
        if !(gamma_tau.is_finite() && gamma_tau > 0.0) {
            return Err(Error::invalid(format!("Γτ must be > 0, got {gamma_tau}")));
        }
        let wg = Waveguide::dimensionless();
        let gamma0 = self.points as f64;
        let tau = gamma_tau / gamma0;
        let layout = equidistant_layout(self.points, tau, 1.0)?;
        let omega_a = self.phase.rem_euclid(TAU) / tau;
        Ok((layout, wg, omega_a))
    }

    pub fn spectrum(&self, gamma_tau: f64) -> Result<ProbeSpectrum> {
        let (layout, wg, omega_a) = self.member(gamma_tau)?;
        let gamma0 = wg.unit_rate() * layout.strength_norm_sq(0);
        let half = self.window * gamma0;
        let deltas = crate::grid::linspace(-half, half, self.samples.max(3));
        probe_response(&layout, &wg, omega_a, &deltas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub gamma_tau: Vec<f64>,
    pub peaks: Vec<usize>,
    /// `Γ_0 τ` where the count first rises from one, refined by bisection.
    pub transition: Option<f64>,
}

/// Peak count for each `Γ_0 τ` and the location of the first 1 → 2 change.
pub fn threshold_scan(family: &ThresholdFamily, gamma_taus: &[f64]) -> Result<ThresholdScan> {
    let peaks: Vec<usize> =
        gamma_taus.par_iter().map(|&g| family.spectrum(g).map(|s| s.n_peaks)).collect::<Result<_>>()?;
    let mut transition = None;
    for i in 1..gamma_taus.len() {
        if peaks[i - 1] == 1 && peaks[i] >= 2 {
            let (mut lo, mut hi) = (gamma_taus[i - 1], gamma_taus[i]);
            while hi - lo > 1e-4 * hi {
                let mid = 0.5 * (lo + hi);
                if family.spectrum(mid)?.n_peaks >= 2 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            transition = Some(0.5 * (lo + hi));
            break;
        }
    }
    Ok(ThresholdScan { gamma_tau: gamma_taus.to_vec(), peaks, transition })
}
