//! Energy held by the atom and by the field travelling between its
//! coupling points.
//!
//! Between the points, the right- and left-moving fields are retarded
//! copies of the atomic amplitude:
//!
//! ```text
//! R(x, t) = Σ_{x_k < x} g_k e^{iω_a(x − x_k)/v} c(t − (x − x_k)/v)
//! L(x, t) = Σ_{x_k > x} g_k e^{iω_a(x_k − x)/v} c(t − (x_k − x)/v)
//! E(t)    = |c(t)|² + (γ/2v) ∫_{x_1}^{x_N} (|R|² + |L|²) dx
//! ```
//!
//! Field exactly at a coupling point carries no weight, so the open
//! interval between the outermost points is what counts. `E(0) = 1` and
//! `dE/dt` equals minus the flux leaving through the outermost points.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{dde_evolve, AmplitudeTrajectory};
use crate::error::{Error, Result};
use crate::model::{Layout, Waveguide};

/// Distinct positions with coincident strengths summed.
fn merged_points(layout: &Layout) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in layout.points() {
        match out.last_mut() {
            Some(last) if last.0 == p.position => last.1 += p.strength(0),
            _ => out.push((p.position, p.strength(0))),
        }
    }
    out
}

/// `E(t)` at every recorded time.
pub fn total_energy(traj: &AmplitudeTrajectory, layout: &Layout, waveguide: &Waveguide) -> Result<Vec<f64>> {
    let pts = merged_points(layout);
    let v = waveguide.velocity();
    let wa = traj.omega_a;
    let dt = traj.dt();
    let half_gamma = 0.5 * waveguide.unit_rate();
    let rule = GaussLegendre::new(NonZeroUsize::new(4).expect("nonzero"));

    // Segment geometry: length in time and the phase-weighted sources on
    // each side.
    struct Segment {
        span: f64,
        subdivisions: usize,
        /// (strength·e^{iω_a·lag}, lag) for right movers at the segment start.
        right: Vec<(Complex64, f64)>,
        /// Same for left movers at the segment end.
        left: Vec<(Complex64, f64)>,
    }
    let mut segments = Vec::new();
    for a in 0..pts.len().saturating_sub(1) {
        let x0 = pts[a].0;
        let x1 = pts[a + 1].0;
        let span = (x1 - x0) / v;
        let right = pts[..=a]
            .iter()
            .map(|&(x, s)| {
                let lag = (x0 - x) / v;
                (Complex64::from_polar(s, wa * lag), lag)
            })
            .collect();
        let left = pts[a + 1..]
            .iter()
            .map(|&(x, s)| {
                let lag = (x - x1) / v;
                (Complex64::from_polar(s, wa * lag), lag)
            })
            .collect();
        let subdivisions = ((span / dt).ceil() as usize).max(1);
        segments.push(Segment { span, subdivisions, right, left });
    }

    let hist = &traj.history;
    let energies: Vec<f64> = traj
        .times
        .par_iter()
        .zip(traj.amplitude.par_iter())
        .map(|(&t, c)| {
            let mut field = 0.0;
            for seg in &segments {
                let h = seg.span / seg.subdivisions as f64;
                let density = |u: f64| -> f64 {
                    // u runs from the segment start; right movers have
                    // travelled u further, left movers span − u less.
                    let phase_r = Complex64::from_polar(1.0, wa * u);
                    let r: Complex64 =
                        seg.right.iter().map(|&(w, lag)| w * hist.at(t - lag - u)).sum::<Complex64>() * phase_r;
                    let phase_l = Complex64::from_polar(1.0, wa * (seg.span - u));
                    let l: Complex64 =
                        seg.left.iter().map(|&(w, lag)| w * hist.at(t - lag - (seg.span - u))).sum::<Complex64>()
                            * phase_l;
                    r.norm_sqr() + l.norm_sqr()
                };
                for k in 0..seg.subdivisions {
                    let a = k as f64 * h;
                    field += rule.integrate(a, a + h, density);
                }
            }
            c.norm_sqr() + half_gamma * field
        })
        .collect();
    Ok(energies)
}

/// `1 − (γ/2)∫_0^t (|R_out|² + |L_out|²)`: the energy balance implied by
/// the flux through the outermost points, for cross-checking
/// [`total_energy`].
pub fn energy_outflux(traj: &AmplitudeTrajectory, layout: &Layout, waveguide: &Waveguide) -> Vec<f64> {
    let pts = merged_points(layout);
    let v = waveguide.velocity();
    let wa = traj.omega_a;
    let first = pts[0].0;
    let last = pts[pts.len() - 1].0;
    let right: Vec<(Complex64, f64)> =
        pts.iter().map(|&(x, s)| (Complex64::from_polar(s, wa * (last - x) / v), (last - x) / v)).collect();
    let left: Vec<(Complex64, f64)> =
        pts.iter().map(|&(x, s)| (Complex64::from_polar(s, wa * (x - first) / v), (x - first) / v)).collect();
    let hist = &traj.history;
    let flux = |t: f64| -> f64 {
        let r: Complex64 = right.iter().map(|&(w, lag)| w * hist.at(t - lag)).sum();
        let l: Complex64 = left.iter().map(|&(w, lag)| w * hist.at(t - lag)).sum();
        0.5 * waveguide.unit_rate() * (r.norm_sqr() + l.norm_sqr())
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(4).expect("nonzero"));
    let mut out = Vec::with_capacity(traj.times.len());
    let mut acc = 0.0;
    out.push(1.0);
    for w in traj.times.windows(2) {
        acc += rule.integrate(w[0], w[1], flux);
        out.push(1.0 - acc);
    }
    out
}

/// Least-squares slope of `ln y` against `ln t` over `t0 ≤ t ≤ t1`.
pub fn loglog_slope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let t_last = times.last().copied().unwrap_or(0.0);
    if t1 > t_last * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("trajectory ends at {t_last}, before the window end {t1}")));
    }
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::invalid("log-log window needs 0 < t0 < t1"));
    }
    let pts: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(t, _)| **t >= t0 && **t <= t1).map(|(t, y)| (t.ln(), *y)).collect();
    if pts.len() < 3 {
        return Err(Error::invalid("fewer than three samples in the log-log window"));
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::invalid("non-positive value in the log-log window"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// First time the series drops to `level`, linearly interpolated.
pub fn time_to_reach(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    for i in 1..values.len() {
        if values[i] <= level && values[i - 1] > level {
            let f = (values[i - 1] - level) / (values[i - 1] - values[i]);
            return Some(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    None
}

/// Total energy averaged over `count` atomic frequencies spaced so the
/// nearest-neighbour phase `ω_a x_{12}/v` steps evenly through `2π`.
///
/// At fixed phase the long-time energy depends strongly on `ω_a τ`; the
/// average over a phase period isolates the generic power law.
pub fn phase_averaged_energy(
    layout: &Layout,
    waveguide: &Waveguide,
    omega_base: f64,
    count: usize,
    t_end: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau = waveguide.delay(layout.first_spacing());
    if tau <= 0.0 {
        return Err(Error::invalid("phase averaging needs two distinct coupling points"));
    }
    if count == 0 {
        return Err(Error::invalid("phase averaging needs at least one phase"));
    }
    let runs: Vec<AmplitudeTrajectory> = (0..count)
        .into_par_iter()
        .map(|j| dde_evolve(layout, waveguide, omega_base + TAU * j as f64 / (count as f64 * tau), t_end, dt))
        .collect::<Result<_>>()?;
    let times = runs[0].times.clone();
    let mut avg = vec![0.0; times.len()];
    for r in &runs {
        for (a, e) in avg.iter_mut().zip(&r.energy) {
            *a += e / count as f64;
        }
    }
    Ok((times, avg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equidistant_layout;

    #[test]
    fn two_point_energy_matches_closed_form() {
        // E = |c|² + γ ∫_0^τ |c(t − u)|² du for two unit points.
        let tau = 1.0;
        let l = equidistant_layout(2, tau, 1.0).unwrap();
        let wg = Waveguide::dimensionless();
        let traj = dde_evolve(&l, &wg, 0.7, 6.0, 0.01).unwrap();
        let rule = GaussLegendre::new(NonZeroUsize::new(8).unwrap());
        for i in (0..traj.times.len()).step_by(37) {
            let t = traj.times[i];
            let mut acc = 0.0;
            for k in 0..100 {
                let a = k as f64 * 0.01;
                acc += rule.integrate(a, a + 0.01, |u| traj.history.at(t - u).norm_sqr());
            }
            let expect = traj.amplitude[i].norm_sqr() + acc;
            assert!((traj.energy[i] - expect).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn energy_is_bounded_and_balanced() {
        let l = Layout::from_positions("a", &[0.0, 0.8, 2.0], 1.0).unwrap();
        let wg = Waveguide::dimensionless();
        let traj = dde_evolve(&l, &wg, 2.1, 10.0, 0.01).unwrap();
        assert!((traj.energy[0] - 1.0).abs() < 1e-15);
        assert!(traj.energy.iter().all(|e| *e >= 0.0 && *e <= 1.0 + 1e-9));
        let flux = energy_outflux(&traj, &l, &wg);
        let worst = traj.energy.iter().zip(&flux).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn slope_of_power_law() {
        let t: Vec<f64> = (1..1000).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        assert!((loglog_slope(&t, &y, 1.0, 90.0).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&t, &y, 1.0, 200.0).is_err());
    }

    #[test]
    fn reach_time() {
        let t = [0.0, 1.0, 2.0];
        let y = [1.0, 0.5, 0.0];
        assert_eq!(time_to_reach(&t, &y, 0.25), Some(1.5));
        assert_eq!(time_to_reach(&t, &y, -1.0), None);
    }
}
