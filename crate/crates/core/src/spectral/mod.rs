//! Frequency-dependent relaxation rates and Lamb shifts of a single giant
//! atom.
//!
//! With coupling factor `A_m(ω) = Σ_k g_km e^{iωx_k/v}` the relaxation rate
//! of transition `m → m+1` is `Γ(ω) = 4πJ0 |A_m(ω)|²`. Keeping only the
//! dominant term of the shift integral and extending its lower limit to
//! `−∞`, the shift is half the Hilbert transform of `Γ`:
//!
//! ```text
//! Δ(ω) = −(1/2π) P∫ Γ(ω')/(ω' − ω) dω'
//!      = 2πJ0 Σ_{k≠n} g_k g_n sin(ω|x_k − x_n|/v)
//! ```
//!
//! The closed sum is exact under those approximations; [`lamb_shift_integral`]
//! and [`lamb_from_kramers_kronig`] evaluate the same quantity numerically.

mod hilbert;
mod pv;

pub use hilbert::{hilbert_transform, lamb_from_kramers_kronig, KramersKronig};
pub use pv::{default_window, lamb_shift_integral, principal_value, PvEstimate, PvOptions};

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AtomSpec, Layout, Waveguide};

/// `A_m(ω) = Σ_k g_km e^{iωx_k/v}`.
///
/// Any finite `ω` is accepted; negative frequencies are needed when the
/// shift integral is extended to `−∞`.
pub fn coupling_factor(layout: &Layout, waveguide: &Waveguide, m: usize, omega: f64) -> Complex64 {
    let v = waveguide.velocity();
    layout.points().iter().map(|p| Complex64::from_polar(p.strength(m), omega * p.position / v)).sum()
}

/// `Γ(ω) = 4πJ0 |A_m(ω)|²`.
pub fn relaxation_rate(layout: &Layout, waveguide: &Waveguide, m: usize, omega: f64) -> f64 {
    waveguide.unit_rate() * coupling_factor(layout, waveguide, m, omega).norm_sqr()
}

/// `Γ_{m+1,m}` at the atom's own transition frequency.
pub fn transition_rate(layout: &Layout, atom: &AtomSpec, waveguide: &Waveguide, m: usize) -> f64 {
    relaxation_rate(layout, waveguide, m, atom.transition(m))
}

/// Dominant-term Lamb shift of transition `m` evaluated at `ω`.
pub fn lamb_shift(layout: &Layout, waveguide: &Waveguide, m: usize, omega: f64) -> f64 {
    let pts = layout.points();
    let v = waveguide.velocity();
    let mut acc = 0.0;
    for k in 0..pts.len() {
        for n in (k + 1)..pts.len() {
            let phase = omega * (pts[k].position - pts[n].position).abs() / v;
            acc += pts[k].strength(m) * pts[n].strength(m) * phase.sin();
        }
    }
    // Each unordered pair appears twice in Σ_{k≠n}; (γ/2)·2 = γ.
    waveguide.unit_rate() * acc
}

/// Level shifts `Δ_m` for every level: `Δ_0 = 0` and `Δ_m` is the shift of
/// transition `m−1` evaluated at `ω_{m,m−1}`.
pub fn level_shifts(layout: &Layout, atom: &AtomSpec, waveguide: &Waveguide) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((1..atom.level_count()).map(|m| lamb_shift(layout, waveguide, m - 1, atom.transition(m - 1))))
        .collect()
}

/// Offset of `φ` from the nearest multiple of `2π`.
fn reduce_phase(phi: f64) -> f64 {
    phi - TAU * (phi / TAU).round()
}

/// `sin(πx)`, exactly zero at integer `x`.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r == 0.0 || r.abs() == 1.0 {
        0.0
    } else {
        (PI * r).sin()
    }
}

/// Below this `N·|δ|` the closed forms switch to their limit expansions.
const LIMIT_THRESHOLD: f64 = 1e-4;

/// `γ(1 − cos Nφ)/(1 − cos φ)`, continued to `N²γ` at `φ ∈ 2πZ`.
pub fn relaxation_rate_equidistant(n: usize, phi: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    let delta = reduce_phase(phi);
    if nf * delta.abs() < LIMIT_THRESHOLD {
        return gamma * nf * nf * (1.0 - (nf * nf - 1.0) * delta * delta / 12.0);
    }
    // sin² form avoids the cancellation in 1 − cos.
    // Dark phases (Nφ ∈ 2πZ) come out as exact zeros.
    let num = sin_pi(nf * delta / TAU);
    let den = (0.5 * delta).sin();
    gamma * (num * num) / (den * den)
}

/// `γ[N sin φ − sin Nφ] / (2[1 − cos φ])`, continued to `0` at `φ ∈ 2πZ`.
pub fn lamb_shift_equidistant(n: usize, phi: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    let delta = reduce_phase(phi);
    if nf * delta.abs() < LIMIT_THRESHOLD {
        return gamma * (nf * nf * nf - nf) * delta / 6.0;
    }
    let s = (0.5 * delta).sin();
    gamma * (nf * delta.sin() - (nf * delta).sin()) / (4.0 * s * s)
}

/// Sampled coupling factor, relaxation rate and Lamb shift on a frequency
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResponse {
    omega: Vec<f64>,
    coupling: Option<Vec<Complex64>>,
    gamma: Vec<f64>,
    lamb: Vec<f64>,
}

impl SpectralResponse {
    /// Evaluate transition `m` of `layout` on a grid (in parallel).
    pub fn sample(layout: &Layout, waveguide: &Waveguide, m: usize, omega: &[f64]) -> Result<Self> {
        check_grid(omega)?;
        let rows: Vec<(Complex64, f64, f64)> = omega
            .par_iter()
            .map(|&w| {
                let a = coupling_factor(layout, waveguide, m, w);
                (a, waveguide.unit_rate() * a.norm_sqr(), lamb_shift(layout, waveguide, m, w))
            })
            .collect();
        Ok(SpectralResponse {
            omega: omega.to_vec(),
            coupling: Some(rows.iter().map(|r| r.0).collect()),
            gamma: rows.iter().map(|r| r.1).collect(),
            lamb: rows.iter().map(|r| r.2).collect(),
        })
    }

    /// Wrap an externally supplied rate profile; the shift is left at zero
    /// until filled in by [`lamb_from_kramers_kronig`].
    pub fn from_rates(omega: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        check_grid(&omega)?;
        if gamma.len() != omega.len() {
            return Err(Error::Dimension { expected: omega.len(), got: gamma.len() });
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("relaxation rates must be finite and >= 0"));
        }
        let lamb = vec![0.0; omega.len()];
        Ok(SpectralResponse { omega, coupling: None, gamma, lamb })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn coupling(&self) -> Option<&[Complex64]> {
        self.coupling.as_deref()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn lamb(&self) -> &[f64] {
        &self.lamb
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

fn check_grid(omega: &[f64]) -> Result<()> {
    if omega.is_empty() {
        return Err(Error::invalid("frequency grid is empty"));
    }
    if omega.iter().any(|w| !w.is_finite()) || omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("frequency grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Qualitative reading of the Markovian-validity ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovRegime {
    /// Single point or zero extent: always Markovian at fixed rate.
    SmallAtom,
    /// `r < 0.1`
    Markovian,
    /// `0.1 ≤ r < 1`
    Marginal,
    /// `r ≥ 1`
    NonMarkovian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovDiagnostic {
    /// `r = Γ_{1,0}·2πN/ω_{1,0}`.
    pub ratio: f64,
    /// `Γ_{1,0}` times the travel time between the outermost points.
    pub gamma_tau: f64,
    pub regime: MarkovRegime,
}

/// `r = Γ·2πN/ω`.
pub fn markovian_ratio(gamma: f64, n: usize, omega: f64) -> f64 {
    gamma * TAU * n as f64 / omega
}

/// Compare the linewidth of the lowest transition to the width
/// `ω_{1,0}/2πN` of the central interference peak.
pub fn markovian_validity(layout: &Layout, atom: &AtomSpec, waveguide: &Waveguide) -> Result<MarkovDiagnostic> {
    if layout.equidistant_spacing(1e-9).is_none() {
        return Err(Error::invalid("the Markovian-validity ratio is defined for equidistant layouts"));
    }
    let gamma = transition_rate(layout, atom, waveguide, 0);
    let gamma_tau = gamma * waveguide.delay(layout.extent());
    if layout.len() == 1 || layout.extent() == 0.0 {
        return Ok(MarkovDiagnostic { ratio: 0.0, gamma_tau, regime: MarkovRegime::SmallAtom });
    }
    let ratio = markovian_ratio(gamma, layout.len(), atom.transition(0));
    let regime = if ratio < 0.1 {
        MarkovRegime::Markovian
    } else if ratio < 1.0 {
        MarkovRegime::Marginal
    } else {
        MarkovRegime::NonMarkovian
    };
    Ok(MarkovDiagnostic { ratio, gamma_tau, regime })
}

/// Full width at half maximum of the equidistant rate peak centred at
/// `φ = 2π`, located by bisection on the closed form.
pub fn central_peak_width(n: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let half = 0.5 * (n * n) as f64;
    // First zero sits at 2π/N from the centre; the half point lies inside.
    let (mut lo, mut hi) = (0.0, TAU / n as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if relaxation_rate_equidistant(n, TAU + mid, 1.0) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * 0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{equidistant_layout, CouplingPoint};

    fn wg() -> Waveguide {
        Waveguide::dimensionless()
    }

    #[test]
    fn coupling_factor_examples() {
        let single = Layout::from_positions("a", &[0.3], 1.0).unwrap();
        for w in [0.1, 1.0, 17.0] {
            let a = coupling_factor(&single, &wg(), 0, w);
            assert!((a.norm() - 1.0).abs() < 1e-15);
            assert!((a.arg() - w * 0.3).rem_euclid(TAU).min((w * 0.3 - a.arg()).rem_euclid(TAU)) < 1e-12);
        }
        // Half a wavelength apart: λ = 2π at ω = 1.
        let half = Layout::from_positions("a", &[0.0, PI], 1.0).unwrap();
        assert!(coupling_factor(&half, &wg(), 0, 1.0).norm() < 1e-15);
        let coincident = Layout::from_positions("a", &[0.5, 0.5], 0.7).unwrap();
        let a = coupling_factor(&coincident, &wg(), 0, 2.0);
        assert!((a - Complex64::from_polar(1.4, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn relaxation_rate_examples() {
        let two = equidistant_layout(2, 1.0, 1.0).unwrap();
        assert!(relaxation_rate(&two, &wg(), 0, PI) < 1e-30);
        assert!((relaxation_rate(&two, &wg(), 0, TAU) - 4.0).abs() < 1e-12);
        let one = equidistant_layout(1, 1.0, 1.0).unwrap();
        for w in [0.2, 3.0, 40.0] {
            assert!((relaxation_rate(&one, &wg(), 0, w) - 1.0).abs() < 1e-15);
        }
        let wg3 = Waveguide::with_unit_rate(1.0, 3.0).unwrap();
        assert!((relaxation_rate(&one, &wg3, 0, 1.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn equidistant_closed_forms() {
        assert!(relaxation_rate_equidistant(2, PI, 1.0).abs() < 1e-30);
        assert!(relaxation_rate_equidistant(3, TAU / 3.0, 1.0).abs() < 1e-28);
        assert_eq!(relaxation_rate_equidistant(10, TAU, 1.0), 100.0);
        assert_eq!(relaxation_rate_equidistant(10, 0.0, 2.0), 200.0);
        assert_eq!(lamb_shift_equidistant(2, TAU, 1.0), 0.0);
        assert!(lamb_shift_equidistant(1, 0.7, 1.0).abs() < 1e-15);
        assert!(lamb_shift_equidistant(2, PI, 1.0).abs() < 1e-15);
        assert!((lamb_shift_equidistant(2, PI / 2.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dark_phases_are_exact_zeros() {
        assert_eq!(relaxation_rate_equidistant(2, PI, 1.0), 0.0);
        assert_eq!(relaxation_rate_equidistant(2, 3.0 * PI, 1.0), 0.0);
        assert_eq!(relaxation_rate_equidistant(4, PI / 2.0, 1.0), 0.0);
    }

    #[test]
    fn limits_are_continuous() {
        for n in [2usize, 3, 10, 50] {
            for eps in [1e-3, 1e-5, 1e-7] {
                let phi = TAU + eps / n as f64;
                let direct = equidistant_layout(n, 1.0, 1.0).unwrap();
                let g = relaxation_rate(&direct, &wg(), 0, phi);
                let d = lamb_shift(&direct, &wg(), 0, phi);
                let gn = relaxation_rate_equidistant(n, phi, 1.0);
                let dn = lamb_shift_equidistant(n, phi, 1.0);
                assert!((g - gn).abs() <= 1e-10 * g, "n={n} eps={eps} {g} {gn}");
                assert!((d - dn).abs() <= 1e-9 * (n * n) as f64, "n={n} eps={eps} {d} {dn}");
            }
        }
    }

    #[test]
    fn general_layout_matches_closed_forms() {
        for n in [1usize, 2, 3, 7, 10] {
            let l = equidistant_layout(n, 1.0, 1.0).unwrap();
            for i in 0..400 {
                let phi = 0.013 + i as f64 * 0.0311;
                let g = relaxation_rate(&l, &wg(), 0, phi);
                let gc = relaxation_rate_equidistant(n, phi, 1.0);
                assert!((g - gc).abs() <= 1e-12 * gc.max(1.0), "n={n} phi={phi}");
                let d = lamb_shift(&l, &wg(), 0, phi);
                let dc = lamb_shift_equidistant(n, phi, 1.0);
                assert!((d - dc).abs() <= 1e-11 * (n * n) as f64, "n={n} phi={phi} {d} {dc}");
            }
        }
    }

    #[test]
    fn level_shifts_use_lower_transition() {
        let l = equidistant_layout(2, 1.0, 1.0).unwrap();
        let atom = AtomSpec::new(vec![0.0, PI / 2.0, PI]).unwrap();
        let s = level_shifts(&l, &atom, &wg());
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 1.0).abs() < 1e-15);
        assert!((s[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn markovian_examples() {
        assert!((markovian_ratio(1e-3, 10, 1.0) - 0.0628).abs() < 1e-3);
        let atom = AtomSpec::two_level(5.0).unwrap();
        let one = equidistant_layout(1, 0.0, 1.0).unwrap();
        let d = markovian_validity(&one, &atom, &wg()).unwrap();
        assert_eq!(d.regime, MarkovRegime::SmallAtom);
        assert_eq!(d.ratio, 0.0);
        let wide = Layout::new(
            "a",
            vec![CouplingPoint::new(0.0, 1.0), CouplingPoint::new(1.0, 1.0), CouplingPoint::new(3.0, 1.0)],
        )
        .unwrap();
        assert!(markovian_validity(&wide, &atom, &wg()).is_err());
    }

    #[test]
    fn central_width_scales_inversely() {
        for n in [5usize, 10, 20] {
            let r = central_peak_width(n) / central_peak_width(2 * n);
            assert!((1.8..=2.2).contains(&r), "n={n} ratio {r}");
        }
    }
}
