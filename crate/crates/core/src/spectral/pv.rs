//! Principal-value quadrature of the Lamb-shift integral.
//!
//! The singular integral is folded about the pole,
//!
//! ```text
//! P∫ f(ω)/(ω − ω0) dω = ∫_0^∞ [f(ω0 + u) − f(ω0 − u)] / u du,
//! ```
//!
//! which has a regular integrand at `u = 0`. The oscillatory tail is summed
//! with a raised-cosine taper on `[W/2, W]`, and the remaining finite
//! integral uses composite Gauss-Legendre panels, doubled until two
//! successive estimates agree.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Layout, Waveguide};

use super::relaxation_rate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvOptions {
    /// Half-width `W` of the folded integration range; `None` picks
    /// [`default_window`].
    pub window: Option<f64>,
    /// Relative change between panel doublings that counts as converged.
    pub tolerance: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
}

impl Default for PvOptions {
    fn default() -> Self {
        PvOptions { window: None, tolerance: 1e-8, initial_panels: 32, max_panels: 1 << 22, order: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PvEstimate {
    pub value: f64,
    /// Change in the last panel doubling.
    pub last_change: f64,
    pub panels: usize,
    pub window: f64,
}

/// Smooth cutoff: 1 on `[0, W/2]`, raised cosine down to 0 at `W`.
fn taper(u: f64, w: f64) -> f64 {
    let start = 0.5 * w;
    if u <= start {
        1.0
    } else if u >= w {
        0.0
    } else {
        0.5 * (1.0 + (PI * (u - start) / (w - start)).cos())
    }
}

/// `P∫ f(ω)/(ω − ω0) dω` over the whole real line, with the tail beyond
/// `|ω − ω0| > W` tapered away.
///
/// `min_panels` lets the caller guarantee that each panel spans at most a
/// fraction of the fastest oscillation.
pub fn principal_value<F>(f: F, omega0: f64, window: f64, min_panels: usize, opts: &PvOptions) -> Result<PvEstimate>
where
    F: Fn(f64) -> f64,
{
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid(format!("integration window must be > 0, got {window}")));
    }
    let order = NonZeroUsize::new(opts.order.max(2)).expect("order >= 2");
    let rule = GaussLegendre::new(order);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        (f(omega0 + u) - f(omega0 - u)) / u * taper(u, window)
    };
    let integrate = |panels: usize| -> (f64, f64) {
        let h = window / panels as f64;
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for p in 0..panels {
            let a = p as f64 * h;
            let part = rule.integrate(a, a + h, integrand);
            sum += part;
            abs_sum += part.abs();
        }
        (sum, abs_sum)
    };

    // Absolute floor for integrals that vanish by symmetry.
    let f_scale = (0..=64)
        .map(|i| window * i as f64 / 64.0)
        .map(|u| f(omega0 + u).abs().max(f(omega0 - u).abs()))
        .fold(0.0, f64::max);
    let floor = 1e-6 * f_scale;
    let mut panels = opts.initial_panels.max(min_panels).max(1);
    let (mut prev, _) = integrate(panels);
    let mut last_change = f64::INFINITY;
    while panels < opts.max_panels {
        panels *= 2;
        let (cur, scale) = integrate(panels);
        last_change = (cur - prev).abs();
        if last_change <= opts.tolerance * cur.abs().max(scale).max(floor).max(f64::MIN_POSITIVE) {
            return Ok(PvEstimate { value: cur, last_change, panels, window });
        }
        prev = cur;
    }
    Err(Error::convergence(format!(
        "principal-value quadrature did not converge: {panels} panels, window {window}, \
         last change {last_change:e}, estimate {prev}"
    )))
}

/// `W = max(100 ω0, 200/τ_min)` with `τ_min` the shortest nonzero pair delay.
pub fn default_window(layout: &Layout, waveguide: &Waveguide, omega0: f64) -> f64 {
    let (tau_min, _) = delay_range(layout, waveguide);
    let mut w = 100.0 * omega0.abs();
    if let Some(t) = tau_min {
        w = w.max(200.0 / t);
    }
    w.max(1.0)
}

fn delay_range(layout: &Layout, waveguide: &Waveguide) -> (Option<f64>, Option<f64>) {
    let pos: Vec<f64> = layout.positions().collect();
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    for k in 0..pos.len() {
        for n in (k + 1)..pos.len() {
            let t = waveguide.delay(pos[k] - pos[n]);
            if t > 0.0 {
                lo = Some(lo.map_or(t, |x| x.min(t)));
                hi = Some(hi.map_or(t, |x| x.max(t)));
            }
        }
    }
    (lo, hi)
}

/// Lamb shift of transition `m` at `ω0` from the principal-value integral
/// `Δ(ω0) = −(1/2π) P∫ Γ(ω)/(ω − ω0) dω`.
pub fn lamb_shift_integral(
    layout: &Layout,
    waveguide: &Waveguide,
    m: usize,
    omega0: f64,
    opts: &PvOptions,
) -> Result<PvEstimate> {
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::invalid(format!("transition frequency must be > 0, got {omega0}")));
    }
    let window = opts.window.unwrap_or_else(|| default_window(layout, waveguide, omega0));
    // At least two panels per period of the fastest oscillation.
    let min_panels = match delay_range(layout, waveguide).1 {
        Some(t) => (window * t / PI).ceil() as usize,
        None => 1,
    };
    let est = principal_value(|w| relaxation_rate(layout, waveguide, m, w), omega0, window, min_panels, opts)?;
    Ok(PvEstimate { value: -est.value / (2.0 * PI), last_change: est.last_change / (2.0 * PI), ..est })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equidistant_layout;
    use crate::spectral::{lamb_shift, lamb_shift_equidistant};

    #[test]
    fn two_points_quarter_wave() {
        let l = equidistant_layout(2, 1.0, 1.0).unwrap();
        let wg = Waveguide::dimensionless();
        let est = lamb_shift_integral(&l, &wg, 0, PI / 2.0, &PvOptions::default()).unwrap();
        assert!((est.value - 1.0).abs() < 1e-2, "{est:?}");
    }

    #[test]
    fn symmetric_zero_converges() {
        // Γ is even about φ = π for three points, so the integrand is pure rounding noise.
        let l = equidistant_layout(3, 1.0, 1.0).unwrap();
        let est = lamb_shift_integral(&l, &Waveguide::dimensionless(), 0, PI, &PvOptions::default()).unwrap();
        assert!(est.value.abs() < 1e-10);
    }

    #[test]
    fn single_point_has_no_shift() {
        let l = equidistant_layout(1, 1.0, 1.0).unwrap();
        let est = lamb_shift_integral(&l, &Waveguide::dimensionless(), 0, 3.0, &PvOptions::default()).unwrap();
        assert!(est.value.abs() < 1e-6);
    }

    #[test]
    fn three_point_sweep() {
        let l = equidistant_layout(3, 1.0, 1.0).unwrap();
        let wg = Waveguide::dimensionless();
        for i in 1..12 {
            let phi = 0.5 * i as f64;
            let est = lamb_shift_integral(&l, &wg, 0, phi, &PvOptions::default()).unwrap();
            let exact = lamb_shift_equidistant(3, phi, 1.0);
            assert!((est.value - exact).abs() < 0.01 * 9.0, "phi={phi} {} {exact}", est.value);
        }
    }

    #[test]
    fn irregular_layout_matches_sum() {
        let l = Layout::from_positions("a", &[0.0, 0.7, 2.9], 1.0).unwrap();
        let wg = Waveguide::with_unit_rate(1.3, 2.0).unwrap();
        let est = lamb_shift_integral(&l, &wg, 0, 4.1, &PvOptions::default()).unwrap();
        let exact = lamb_shift(&l, &wg, 0, 4.1);
        assert!((est.value - exact).abs() < 1e-3 * exact.abs().max(1.0), "{} {exact}", est.value);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let l = equidistant_layout(2, 1.0, 1.0).unwrap();
        let opts = PvOptions { max_panels: 2, initial_panels: 1, order: 2, ..PvOptions::default() };
        let wg = Waveguide::dimensionless();
        let err = lamb_shift_integral(&l, &wg, 0, 1.0, &PvOptions { window: Some(500.0), ..opts });
        assert!(matches!(err, Err(Error::Convergence(_))));
    }
}
