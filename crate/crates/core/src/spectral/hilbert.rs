//! Lamb shift from the relaxation profile through the Kramers-Kronig
//! relation `Δ = ½ H[Γ]`.
//!
//! The transform uses the periodic FFT multiplier `−i·sgn(k)`, so a grid
//! covering whole periods of `Γ` is exact. Otherwise the wrap-around jump
//! pollutes the edges; the output carries a flag when that jump is large.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::SpectralResponse;
use crate::error::{Error, Result};

/// Minimum sample count for a trustworthy transform.
const MIN_SAMPLES: usize = 64;

/// Relative endpoint mismatch above which edge effects are flagged.
const EDGE_MISMATCH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KramersKronig {
    pub omega: Vec<f64>,
    pub lamb: Vec<f64>,
    /// Set when edge effects are expected to be significant.
    pub edge_warning: bool,
    /// `|f(ω_end + h) − f(ω_0)| / max|f|` with the first value linearly
    /// extrapolated.
    pub endpoint_mismatch: f64,
}

/// Discrete Hilbert transform `H[f](x) = (1/π) P∫ f(t)/(x − t) dt` of
/// uniformly spaced samples, treating them as one period.
pub fn hilbert_transform(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let factor = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            Complex64::new(0.0, 0.0)
        } else if k < n.div_ceil(2) {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        *z *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// `Δ(ω) = ½ H[Γ](ω)` from a sampled rate profile.
///
/// The grid must be uniform to 1e−9 relative.
pub fn lamb_from_kramers_kronig(response: &SpectralResponse) -> Result<KramersKronig> {
    let omega = response.omega();
    let gamma = response.gamma();
    let n = omega.len();
    if n < 3 {
        return Err(Error::invalid("Hilbert transform needs at least three samples"));
    }
    let h = (omega[n - 1] - omega[0]) / (n - 1) as f64;
    if omega.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(Error::invalid("Hilbert transform needs a uniform frequency grid"));
    }
    let lamb: Vec<f64> = hilbert_transform(gamma).into_iter().map(|x| 0.5 * x).collect();
    let peak = gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let extrapolated = 2.0 * gamma[n - 1] - gamma[n - 2];
    let endpoint_mismatch = if peak > 0.0 { (extrapolated - gamma[0]).abs() / peak } else { 0.0 };
    Ok(KramersKronig {
        omega: omega.to_vec(),
        lamb,
        edge_warning: n < MIN_SAMPLES || endpoint_mismatch > EDGE_MISMATCH,
        endpoint_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::model::{equidistant_layout, Waveguide};
    use crate::spectral::lamb_shift_equidistant;
    use std::f64::consts::{PI, TAU};

    fn uniform(start: f64, stop: f64, n: usize) -> Vec<f64> {
        // Endpoint excluded so the samples tile one period.
        let h = (stop - start) / n as f64;
        (0..n).map(|i| start + h * i as f64).collect()
    }

    #[test]
    fn cosine_maps_to_sine() {
        let x = uniform(0.0, TAU, 256);
        let f: Vec<f64> = x.iter().map(|t| (3.0 * t).cos()).collect();
        let hf = hilbert_transform(&f);
        for (t, h) in x.iter().zip(&hf) {
            assert!((h - (3.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_zero_transform() {
        let r = SpectralResponse::from_rates(linspace(0.0, 10.0, 101), vec![2.5; 101]).unwrap();
        let kk = lamb_from_kramers_kronig(&r).unwrap();
        assert!(kk.lamb.iter().all(|d| d.abs() < 1e-14));
        assert!(!kk.edge_warning);
    }

    #[test]
    fn two_point_profile() {
        let l = equidistant_layout(2, 1.0, 1.0).unwrap();
        let w = uniform(0.0, 8.0 * PI, 2048);
        let r = SpectralResponse::sample(&l, &Waveguide::dimensionless(), 0, &w).unwrap();
        let kk = lamb_from_kramers_kronig(&r).unwrap();
        for (phi, d) in w.iter().zip(&kk.lamb) {
            assert!((d - lamb_shift_equidistant(2, *phi, 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn lorentzian_is_dispersive() {
        let w0 = 50.0;
        let width = 0.5;
        let w = linspace(0.0, 100.0, 8001);
        let g: Vec<f64> = w.iter().map(|x| width * width / ((x - w0).powi(2) + width * width)).collect();
        let r = SpectralResponse::from_rates(w.clone(), g).unwrap();
        let kk = lamb_from_kramers_kronig(&r).unwrap();
        assert!(!kk.edge_warning);
        // Analytic pair: ½·width·(ω−ω0)/((ω−ω0)² + width²).
        for (x, d) in w.iter().zip(&kk.lamb) {
            if (x - w0).abs() < 10.0 {
                let exact = 0.5 * width * (x - w0) / ((x - w0).powi(2) + width * width);
                assert!((d - exact).abs() < 5e-3, "x={x} {d} {exact}");
            }
        }
        let i_above = w.iter().position(|x| *x >= w0 + width).unwrap();
        let i_below = w.iter().position(|x| *x >= w0 - width).unwrap();
        assert!(kk.lamb[i_above] > 0.0 && kk.lamb[i_below] < 0.0);
        assert!((kk.lamb[i_above] + kk.lamb[i_below]).abs() < 1e-3);
    }

    #[test]
    fn mismatched_edges_are_flagged() {
        let w = linspace(0.0, 10.0, 200);
        let g: Vec<f64> = w.iter().map(|x| 1.0 + x).collect();
        let r = SpectralResponse::from_rates(w, g).unwrap();
        assert!(lamb_from_kramers_kronig(&r).unwrap().edge_warning);
    }
}
