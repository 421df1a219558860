//! Oscillating bound states: two real poles of the transfer function.
//!
//! A real pole at `ω` needs `A(ω) = 0` (no emission) and
//! `ω = ω_a + Δ(ω)`. With two such poles `ω_1`, `ω_2` the late-time
//! amplitude is `r_1 e^{−iω_1 t} + r_2 e^{−iω_2 t}` (rotating frame aside),
//! so `|c|²` keeps oscillating between `(|r_1| − |r_2|)²` and
//! `(|r_1| + |r_2|)²`, with `r = 1/F′(ω)` and
//! `F′(ω) = 1 − (γ/2) Σ_{k,n} g_k g_n τ_kn e^{iωτ_kn}`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{integrate_kernel, AmplitudeTrajectory, DelayKernel};
use crate::error::{Error, Result};
use crate::model::{CouplingPoint, Layout, Waveguide};
use crate::optim::{finite_difference_jacobian, levenberg_marquardt, LmOptions};

/// Population floor a persistent state must keep over the last quarter.
pub const FLOOR_THRESHOLD: f64 = 1e-3;
/// Shortest run, in units of `1/γ`.
pub const MIN_RUN: f64 = 100.0;

/// Verdict on the last quarter of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Persistence {
    pub persistent: bool,
    /// `min |c|²` over the window.
    pub floor: f64,
    /// Angular frequency of the dominant nonzero component of `|c|²`.
    pub frequency: f64,
    pub peak_to_peak: f64,
    pub oscillating: bool,
    /// Rotating-frame frequencies of the transfer-function poles that lose
    /// less than 1% of their weight over the run.
    pub bound_poles: Vec<f64>,
}

/// Classify `|c(t)|²` over the last quarter of the run.
///
/// Persistent means a floor above [`FLOOR_THRESHOLD`], a dominant nonzero
/// frequency with a swing above 5% of the window maximum, and at least two
/// bound poles behind it. Long-lived but decaying modes (two points near
/// a dark phase with long delays) pass the first two tests at any finite
/// run length; the pole count tells them apart.
pub fn classify_persistence(traj: &AmplitudeTrajectory) -> Persistence {
    let pop = traj.population();
    let n = pop.len();
    let start = n - n / 4;
    let window = &pop[start..];
    let m = window.len();
    let floor = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = window.iter().cloned().fold(0.0, f64::max);
    let peak_to_peak = if m > 0 { max - floor } else { 0.0 };

    let mut frequency = 0.0;
    if m >= 4 {
        let mean = window.iter().sum::<f64>() / m as f64;
        let mut buf: Vec<Complex64> = window.iter().map(|p| Complex64::new(p - mean, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let (k, amp) = (1..=m / 2).map(|k| (k, buf[k].norm())).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if amp > 0.0 {
            let span = traj.dt() * m as f64;
            frequency = std::f64::consts::TAU * k as f64 / span;
        }
    }
    let oscillating = frequency > 0.0 && peak_to_peak > 0.05 * max;
    let bound_poles = if floor > FLOOR_THRESHOLD && oscillating {
        bound_poles(&traj.kernel, 0.005 / traj.t_end())
    } else {
        Vec::new()
    };
    let persistent = floor > FLOOR_THRESHOLD && oscillating && bound_poles.len() >= 2;
    Persistence { persistent, floor, frequency, peak_to_peak, oscillating, bound_poles }
}

/// Real parts of the roots of `F(δ) = −iδ + K(δ)` with `|Im δ| ≤ kappa`.
///
/// Every root with `Im δ = 0` obeys `|δ| = |K(δ)| ≤ B = |K_0| + Σ|w|`, so
/// local minima of `|F|` on a grid over `[−B, B]` fine enough to resolve
/// the longest delay seed a complex Newton iteration.
pub fn bound_poles(kernel: &DelayKernel, kappa: f64) -> Vec<f64> {
    let bound = kernel.instantaneous.norm() + kernel.terms.iter().map(|t| t.weight.norm()).sum::<f64>();
    if !(bound > 0.0) {
        return Vec::new();
    }
    let tau_max = kernel.max_delay().unwrap_or(0.0);
    let step = (bound / 2000.0).min(if tau_max > 0.0 { 0.05 / tau_max } else { f64::INFINITY });
    let count = (2.0 * bound / step).ceil() as usize + 1;
    let f = |d: Complex64| -> Complex64 {
        let i = Complex64::i();
        -i * d
            + kernel.instantaneous
            + kernel.terms.iter().map(|t| t.weight * (i * d * t.delay).exp()).sum::<Complex64>()
    };
    let df = |d: Complex64| -> Complex64 {
        let i = Complex64::i();
        -i + kernel.terms.iter().map(|t| t.weight * i * t.delay * (i * d * t.delay).exp()).sum::<Complex64>()
    };
    let grid: Vec<f64> = (0..count).map(|k| -bound + k as f64 * step).collect();
    let mag: Vec<f64> = grid.iter().map(|&d| f(Complex64::new(d, 0.0)).norm()).collect();

    let mut roots: Vec<f64> = Vec::new();
    for k in 1..count.saturating_sub(1) {
        if !(mag[k] <= mag[k - 1] && mag[k] <= mag[k + 1]) {
            continue;
        }
        let mut d = Complex64::new(grid[k], 0.0);
        let mut converged = false;
        for _ in 0..60 {
            let slope = df(d);
            if slope.norm() == 0.0 {
                break;
            }
            let dx = f(d) / slope;
            d -= dx;
            if dx.norm() <= 1e-13 * (1.0 + d.norm()) {
                converged = true;
                break;
            }
        }
        let near = (d.re - grid[k]).abs() <= 2.0 * step;
        if converged && near && d.im.abs() <= kappa && !roots.iter().any(|r| (r - d.re).abs() < 1e-8 * (1.0 + bound)) {
            roots.push(d.re);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn check_waveguide(waveguide: &Waveguide) -> Result<()> {
    if !(waveguide.unit_rate() > 0.0) {
        return Err(Error::invalid("bound-state scan needs γ > 0"));
    }
    Ok(())
}

fn distinct_points(layout: &Layout) -> usize {
    let mut xs: Vec<f64> = layout.positions().collect();
    xs.dedup();
    xs.len()
}

/// Step for a persistence run: resolves the shortest delay and the fastest
/// decay.
fn default_step(kernel: &DelayKernel) -> f64 {
    let by_delay = kernel.min_delay().map_or(f64::INFINITY, |t| t / 20.0);
    by_delay.min(0.02 / kernel.initial_rate.max(f64::MIN_POSITIVE))
}

/// Evolve from the excited state for `t_end` and classify the tail.
pub fn oscillating_bound_state_scan(
    layout: &Layout,
    waveguide: &Waveguide,
    omega_a: f64,
    t_end: f64,
) -> Result<Persistence> {
    check_waveguide(waveguide)?;
    if distinct_points(layout) < 3 {
        return Err(Error::invalid("oscillating bound states require at least three coupling points"));
    }
    let min_t = MIN_RUN / waveguide.unit_rate();
    if t_end < min_t {
        return Err(Error::invalid(format!("run must last at least 100/γ = {min_t}, got {t_end}")));
    }
    let kernel = DelayKernel::new(layout, waveguide, omega_a)?;
    let traj = integrate_kernel(&kernel, omega_a, t_end, default_step(&kernel))?;
    Ok(classify_persistence(&traj))
}

/// Options for [`bound_state_search`]. Lengths are in units of `v/γ` and
/// frequencies in units of `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundStateSearch {
    pub points: usize,
    /// Let the coupling strengths (relative to the first) vary as well.
    pub free_strengths: bool,
    pub starts: usize,
    pub seed: u64,
    pub min_gap: f64,
    pub max_gap: f64,
    /// Least admissible `|ω_1 − ω_2|`.
    pub min_split: f64,
    pub min_strength: f64,
    /// Candidates checked by direct integration, best predicted floor first.
    pub verify: usize,
    /// Run length in units of `1/γ`.
    pub run: f64,
}

impl Default for BoundStateSearch {
    fn default() -> Self {
        BoundStateSearch {
            points: 4,
            free_strengths: false,
            starts: 256,
            seed: 7,
            min_gap: 0.2,
            max_gap: 3.0,
            min_split: 0.2,
            min_strength: 0.1,
            verify: 3,
            run: MIN_RUN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStateCandidate {
    pub layout: Layout,
    pub omega_a: f64,
    pub poles: [f64; 2],
    /// `|r_1|`, `|r_2|`.
    pub residues: [f64; 2],
    /// `(|r_1| − |r_2|)²`.
    pub predicted_floor: f64,
    pub residual: f64,
    /// Present for the candidates that were integrated.
    pub persistence: Option<Persistence>,
}

struct Geometry {
    x: Vec<f64>,
    s: Vec<f64>,
}

fn coupling(g: &Geometry, v: f64, w: f64) -> Complex64 {
    g.x.iter().zip(&g.s).map(|(x, s)| Complex64::from_polar(*s, w * x / v)).sum()
}

fn shift(g: &Geometry, half: f64, v: f64, w: f64) -> f64 {
    let mut acc = 0.0;
    for (xk, sk) in g.x.iter().zip(&g.s) {
        for (xn, sn) in g.x.iter().zip(&g.s) {
            acc += sk * sn * (w * (xk - xn).abs() / v).sin();
        }
    }
    half * acc
}

fn residue(g: &Geometry, half: f64, v: f64, w: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (xk, sk) in g.x.iter().zip(&g.s) {
        for (xn, sn) in g.x.iter().zip(&g.s) {
            let tau = (xk - xn).abs() / v;
            acc += Complex64::from_polar(sk * sn * tau, w * tau);
        }
    }
    1.0 / (Complex64::new(1.0, 0.0) - half * acc).norm()
}

/// Randomized multi-start solve for layouts with two real poles, then
/// direct integration of the most promising ones.
///
/// Unknowns are the gaps (and optionally the strengths) together with
/// `ω_1`, `ω_2`; the residuals are `A(ω_1)`, `A(ω_2)` and
/// `ω_1 − Δ(ω_1) − ω_2 + Δ(ω_2)`. Results are sorted by predicted floor.
pub fn bound_state_search(options: &BoundStateSearch, waveguide: &Waveguide) -> Result<Vec<BoundStateCandidate>> {
    check_waveguide(waveguide)?;
    let n = options.points;
    if n < 3 {
        return Err(Error::invalid("oscillating bound states require at least three coupling points"));
    }
    if !(options.min_gap > 0.0 && options.max_gap > options.min_gap) {
        return Err(Error::invalid("need 0 < min_gap < max_gap"));
    }
    let gamma = waveguide.unit_rate();
    let half = 0.5 * gamma;
    let v = waveguide.velocity();
    let length = v / gamma;
    let ns = if options.free_strengths { n - 1 } else { 0 };
    let dim = (n - 1) + ns + 2;

    let unpack = move |p: &DVector<f64>| -> (Geometry, f64, f64) {
        let mut x = vec![0.0; n];
        for k in 1..n {
            x[k] = x[k - 1] + p[k - 1].abs() * length;
        }
        let mut s = vec![1.0; n];
        for k in 0..ns {
            s[k + 1] = p[n - 1 + k];
        }
        (Geometry { x, s }, p[dim - 2] * gamma, p[dim - 1] * gamma)
    };
    let residual = move |p: &DVector<f64>| -> DVector<f64> {
        let (g, w1, w2) = unpack(p);
        let a1 = coupling(&g, v, w1);
        let a2 = coupling(&g, v, w2);
        let eq = ((w1 - shift(&g, half, v, w1)) - (w2 - shift(&g, half, v, w2))) / gamma;
        DVector::from_vec(vec![a1.re, a1.im, a2.re, a2.im, eq])
    };

    let lm = LmOptions { max_iterations: 300, ..LmOptions::default() };
    let mut found: Vec<BoundStateCandidate> = (0..options.starts)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(i as u64));
            let mut p0 = DVector::zeros(dim);
            for k in 0..n - 1 {
                p0[k] = rng.random_range(options.min_gap..options.max_gap);
            }
            for k in 0..ns {
                p0[n - 1 + k] = rng.random_range(0.3..2.0);
            }
            p0[dim - 2] = rng.random_range(-6.0..6.0);
            p0[dim - 1] = rng.random_range(-6.0..6.0);
            let out = levenberg_marquardt(residual, |p| finite_difference_jacobian(&residual, p, 1e-7), p0, &lm);
            let worst = residual(&out.params).amax();
            if !(worst < 1e-10) {
                return None;
            }
            let (g, w1, w2) = unpack(&out.params);
            let gaps_ok = g.x.windows(2).all(|w| w[1] - w[0] >= options.min_gap * length);
            let strengths_ok = g.s.iter().all(|s| *s >= options.min_strength);
            if !gaps_ok || !strengths_ok || (w1 - w2).abs() < options.min_split * gamma {
                return None;
            }
            let r1 = residue(&g, half, v, w1);
            let r2 = residue(&g, half, v, w2);
            let points: Vec<CouplingPoint> = g.x.iter().zip(&g.s).map(|(x, s)| CouplingPoint::new(*x, *s)).collect();
            let layout = Layout::new(format!("bound-{i}"), points).ok()?;
            let (lo, hi) = if w1 < w2 { (w1, w2) } else { (w2, w1) };
            let (rl, rh) = if w1 < w2 { (r1, r2) } else { (r2, r1) };
            Some(BoundStateCandidate {
                layout,
                omega_a: w1 - shift(&g, half, v, w1),
                poles: [lo, hi],
                residues: [rl, rh],
                predicted_floor: (r1 - r2).powi(2),
                residual: worst,
                persistence: None,
            })
        })
        .collect();
    found.sort_by(|a, b| b.predicted_floor.total_cmp(&a.predicted_floor));

    let t_end = options.run / gamma;
    let verified: Vec<Option<Persistence>> = found
        .par_iter()
        .take(options.verify)
        .map(|c| oscillating_bound_state_scan(&c.layout, waveguide, c.omega_a, t_end).map(Some))
        .collect::<Result<_>>()?;
    for (c, p) in found.iter_mut().zip(verified) {
        c.persistence = p;
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_four_point_state_persists() {
        let x = [0.0, 1.55920309, 5.34466189, 6.90386498];
        let l = Layout::from_positions("b", &x, 1.0).unwrap();
        let wg = Waveguide::dimensionless();
        let g = Geometry { x: x.to_vec(), s: vec![1.0; 4] };
        // Refine ω_1 so A(ω_1) = 0 holds to the precision of the positions.
        let w1 = -1.7634;
        let wa = w1 - shift(&g, 0.5, 1.0, w1);
        let p = oscillating_bound_state_scan(&l, &wg, wa, 100.0).unwrap();
        assert!(p.persistent, "{p:?}");
        assert!(p.floor > FLOOR_THRESHOLD);
        assert!((p.frequency - (0.5878 + 1.7634)).abs() < 0.1, "{}", p.frequency);
    }

    #[test]
    fn long_lived_two_point_modes_are_not_bound() {
        // Near the dark phase with long delays the swing outlives a 100/γ
        // run, but every pole decays.
        let wg = Waveguide::dimensionless();
        for (gap, k) in [(1.7, 7.0), (3.0, 7.0), (3.0, 6.0)] {
            let l = Layout::from_positions("p", &[0.0, gap], 1.0).unwrap();
            let phase = std::f64::consts::PI * k / 8.0;
            let traj = super::super::dde_evolve(&l, &wg, phase / gap, 100.0, 0.01).unwrap();
            let p = classify_persistence(&traj);
            assert!(p.floor > FLOOR_THRESHOLD && p.oscillating, "{p:?}");
            assert!(!p.persistent && p.bound_poles.len() < 2, "{p:?}");
        }
    }

    #[test]
    fn dark_two_point_pole_is_real() {
        let l = Layout::from_positions("p", &[0.0, 2.0], 1.0).unwrap();
        let k = DelayKernel::new(&l, &Waveguide::dimensionless(), std::f64::consts::PI / 2.0).unwrap();
        let poles = bound_poles(&k, 1e-9);
        assert_eq!(poles.len(), 1, "{poles:?}");
        assert!(poles[0].abs() < 1e-9);
    }

    #[test]
    fn guards() {
        let wg = Waveguide::dimensionless();
        let two = Layout::from_positions("t", &[0.0, 1.0], 1.0).unwrap();
        assert!(oscillating_bound_state_scan(&two, &wg, 0.0, 100.0).is_err());
        let three = Layout::from_positions("t", &[0.0, 1.0, 2.5], 1.0).unwrap();
        assert!(oscillating_bound_state_scan(&three, &wg, 0.0, 10.0).is_err());
        // γ = 0 is refused when the waveguide is built.
        assert!(Waveguide::with_unit_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn search_finds_four_point_state() {
        let opts = BoundStateSearch { starts: 96, verify: 1, ..Default::default() };
        let found = bound_state_search(&opts, &Waveguide::dimensionless()).unwrap();
        let best = &found[0];
        assert!(best.predicted_floor > 2.0 * FLOOR_THRESHOLD, "{best:?}");
        assert!(best.persistence.as_ref().unwrap().persistent, "{best:?}");
    }
}
