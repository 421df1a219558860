//! Single-excitation dynamics of one giant atom when the travel time
//! between coupling points is not negligible.
//!
//! Eliminating the waveguide from the single-excitation sector leaves a
//! delay equation for the atomic amplitude in the frame rotating at `ω_a`:
//!
//! ```text
//! dc/dt = −(γ/2) Σ_{k,n} g_k g_n e^{iω_a τ_kn} c(t − τ_kn),   τ_kn = |x_k − x_n|/v,
//! ```
//!
//! with `c(0) = 1` and `c(t < 0) = 0`. Terms with `τ_kn = 0` act
//! instantaneously; for a single point the equation is plain exponential
//! decay at `γ g²`.
//!
//! Rates in this module are quoted against `Γ_0 = γ Σ_k g_k²`, the initial
//! decay rate before any emitted light returns to the atom.

mod bound_state;
mod energy;
mod probe;

pub use bound_state::{
    bound_poles, bound_state_search, classify_persistence, oscillating_bound_state_scan, BoundStateCandidate,
    BoundStateSearch, Persistence,
};
pub use energy::{energy_outflux, loglog_slope, phase_averaged_energy, time_to_reach, total_energy};
pub use probe::{fourier_response, probe_response, threshold_scan, ProbeSpectrum, ThresholdFamily, ThresholdScan};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Layout, Waveguide};

/// Relative tolerance for treating a delay as a whole number of steps.
const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelTerm {
    pub delay: f64,
    /// `(γ/2) Σ g_k g_n e^{iω_a τ}` over all ordered pairs sharing this delay.
    pub weight: Complex64,
}

/// Delays and weights of the delay equation, with equal delays merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayKernel {
    /// Coefficient of the undelayed `c(t)`.
    pub instantaneous: Complex64,
    /// Terms with `τ > 0`, sorted by delay.
    pub terms: Vec<KernelTerm>,
    /// `Γ_0 = γ Σ g_k²`.
    pub initial_rate: f64,
}

impl DelayKernel {
    pub fn new(layout: &Layout, waveguide: &Waveguide, omega_a: f64) -> Result<Self> {
        if !omega_a.is_finite() {
            return Err(Error::invalid("atomic frequency must be finite"));
        }
        let half = 0.5 * waveguide.unit_rate();
        let pts = layout.points();
        let scale = layout.extent().abs().max(1.0);
        let mut instantaneous = Complex64::new(0.0, 0.0);
        let mut terms: Vec<KernelTerm> = Vec::new();
        for p in pts {
            for q in pts {
                let w = half * p.strength(0) * q.strength(0);
                let tau = waveguide.delay(p.position - q.position);
                if tau == 0.0 {
                    instantaneous += w;
                    continue;
                }
                let weight = Complex64::from_polar(w, omega_a * tau);
                match terms.iter_mut().find(|t| (t.delay - tau).abs() <= 1e-12 * scale) {
                    Some(t) => t.weight += weight,
                    None => terms.push(KernelTerm { delay: tau, weight }),
                }
            }
        }
        terms.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        let initial_rate = waveguide.unit_rate() * layout.strength_norm_sq(0);
        Ok(DelayKernel { instantaneous, terms, initial_rate })
    }

    pub fn min_delay(&self) -> Option<f64> {
        self.terms.first().map(|t| t.delay)
    }

    pub fn max_delay(&self) -> Option<f64> {
        self.terms.last().map(|t| t.delay)
    }

    /// `K(δ) = instantaneous + Σ w e^{iδτ}`: the transfer function is
    /// `1/(−iδ + K(δ))`.
    pub fn symbol(&self, delta: f64) -> Complex64 {
        self.instantaneous
            + self.terms.iter().map(|t| t.weight * Complex64::from_polar(1.0, delta * t.delay)).sum::<Complex64>()
    }
}

/// One-sided derivative jump of `c` strictly inside a step, stored so the
/// interpolant reproduces the kink.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Knot {
    /// Fraction of the step.
    theta: f64,
    c: Complex64,
    d_left: Complex64,
    d_right: Complex64,
}

/// Piecewise-cubic record of `c(t)` on a uniform grid, with one-sided
/// derivatives so kinks at grid points are represented exactly. Kinks
/// between grid points are kept as knots.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct History {
    dt: f64,
    c: Vec<Complex64>,
    /// `ċ` just after each grid point.
    d_right: Vec<Complex64>,
    /// `ċ` just before each grid point.
    d_left: Vec<Complex64>,
    /// Knots by interval index, sorted by interval then `theta`.
    knots: Vec<(usize, Knot)>,
}

fn hermite(c0: Complex64, d0: Complex64, c1: Complex64, d1: Complex64, h: f64, u: f64) -> Complex64 {
    let u2 = u * u;
    let u3 = u2 * u;
    c0 * (2.0 * u3 - 3.0 * u2 + 1.0)
        + d0 * ((u3 - 2.0 * u2 + u) * h)
        + c1 * (-2.0 * u3 + 3.0 * u2)
        + d1 * ((u3 - u2) * h)
}

impl History {
    /// Value at the start of interval `j` (right limit).
    fn c_right(&self, j: isize) -> Complex64 {
        if j < 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.c[j as usize]
        }
    }

    /// Value at the end of interval `j − 1` (left limit); zero at `t = 0`
    /// because the history before the start is empty.
    fn c_left(&self, j: isize) -> Complex64 {
        if j <= 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.c[j as usize]
        }
    }

    fn dr(&self, j: isize) -> Complex64 {
        if j < 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.d_right[j as usize]
        }
    }

    fn dl(&self, j: isize) -> Complex64 {
        if j <= 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.d_left[j as usize]
        }
    }

    fn knots_of(&self, j: usize) -> &[(usize, Knot)] {
        if self.knots.is_empty() {
            return &[];
        }
        let lo = self.knots.partition_point(|(k, _)| *k < j);
        let hi = self.knots.partition_point(|(k, _)| *k <= j);
        &self.knots[lo..hi]
    }

    /// Cubic Hermite interpolant on interval `j` at fraction `theta`.
    fn on_interval(&self, j: isize, theta: f64) -> Complex64 {
        if j < 0 {
            return Complex64::new(0.0, 0.0);
        }
        let knots = self.knots_of(j as usize);
        if knots.is_empty() {
            return hermite(self.c_right(j), self.dr(j), self.c_left(j + 1), self.dl(j + 1), self.dt, theta);
        }
        let k = knots.partition_point(|(_, n)| n.theta < theta);
        let (t0, c0, d0) = if k == 0 {
            (0.0, self.c_right(j), self.dr(j))
        } else {
            let n = knots[k - 1].1;
            (n.theta, n.c, n.d_right)
        };
        let (t1, c1, d1) = if k == knots.len() {
            (1.0, self.c_left(j + 1), self.dl(j + 1))
        } else {
            let n = knots[k].1;
            (n.theta, n.c, n.d_left)
        };
        let width = t1 - t0;
        hermite(c0, d0, c1, d1, width * self.dt, (theta - t0) / width)
    }

    /// `c(s)` for any `s` inside the recorded range; zero for `s < 0`.
    pub(crate) fn at(&self, s: f64) -> Complex64 {
        if s < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = s / self.dt;
        let last = (self.c.len() - 1) as isize;
        let mut j = x.floor() as isize;
        if j >= last {
            j = last - 1;
        }
        if j < 0 {
            return self.c[0];
        }
        self.on_interval(j, x - j as f64)
    }
}

/// Sampled amplitude and total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    /// Atom plus in-transit field energy between the outermost points.
    pub energy: Vec<f64>,
    pub kernel: DelayKernel,
    pub omega_a: f64,
    pub(crate) history: History,
}

impl AmplitudeTrajectory {
    pub fn dt(&self) -> f64 {
        self.history.dt
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn population(&self) -> Vec<f64> {
        self.amplitude.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Interpolated amplitude at an arbitrary time.
    pub fn amplitude_at(&self, t: f64) -> Complex64 {
        self.history.at(t)
    }
}

/// How a delay enters the RK4 stages.
enum Lag {
    /// Whole number of steps: stage values come from one fixed interval.
    Snapped(isize),
    Interpolated(f64),
}

/// Integrate the delay equation with RK4 and cubic Hermite history.
///
/// Delays within 1e−9 (relative) of a whole number of steps are snapped to
/// the grid; the others are interpolated. `dt` may not exceed a tenth of
/// the shortest delay.
pub fn dde_evolve(
    layout: &Layout,
    waveguide: &Waveguide,
    omega_a: f64,
    t_end: f64,
    dt: f64,
) -> Result<AmplitudeTrajectory> {
    let kernel = DelayKernel::new(layout, waveguide, omega_a)?;
    let mut traj = integrate_kernel(&kernel, omega_a, t_end, dt)?;
    traj.energy = total_energy(&traj, layout, waveguide)?;
    Ok(traj)
}

/// Derivative orders whose jumps are tracked; the rest are smooth enough
/// for RK4.
const BREAKPOINT_LEVELS: usize = 4;
const MAX_BREAKPOINTS: usize = 1 << 16;

/// Amplitude only; the energy series is left empty.
pub(crate) fn integrate_kernel(kernel: &DelayKernel, omega_a: f64, t_end: f64, dt: f64) -> Result<AmplitudeTrajectory> {
    if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(format!("need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")));
    }
    if let Some(tmin) = kernel.min_delay() {
        if dt > tmin / 10.0 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "dt = {dt} exceeds a tenth of the shortest delay {tmin}; use dt <= {}",
                tmin / 10.0
            )));
        }
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let on_grid = |t: f64| {
        let ratio = t / dt;
        (ratio - ratio.round()).abs() <= SNAP_TOLERANCE * ratio.max(1.0)
    };
    let lags: Vec<(Complex64, Lag)> = kernel
        .terms
        .iter()
        .map(|t| {
            let lag = if on_grid(t.delay) {
                Lag::Snapped((t.delay / dt).round() as isize)
            } else {
                Lag::Interpolated(t.delay)
            };
            (t.weight, lag)
        })
        .collect();

    // The onset of each delayed term makes ċ jump at τ, c̈ at τ + τ', and so
    // on. Off-grid ones split their step.
    let horizon = steps as f64 * dt;
    let dedup = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * dt.max(*b));
    };
    let mut delays: Vec<f64> = kernel.terms.iter().map(|t| t.delay).filter(|t| *t < horizon).collect();
    dedup(&mut delays);
    let mut breaks = delays.clone();
    let mut level = delays.clone();
    for _ in 1..BREAKPOINT_LEVELS {
        let mut next: Vec<f64> =
            level.iter().flat_map(|a| delays.iter().map(move |b| a + b)).filter(|t| *t < horizon).collect();
        dedup(&mut next);
        if next.is_empty() || breaks.len() + next.len() > MAX_BREAKPOINTS {
            break;
        }
        breaks.extend_from_slice(&next);
        level = next;
    }
    breaks.retain(|b| !on_grid(*b));
    dedup(&mut breaks);

    let zero = Complex64::new(0.0, 0.0);
    let mut hist = History {
        dt,
        c: Vec::with_capacity(steps + 1),
        d_right: Vec::with_capacity(steps + 1),
        d_left: Vec::with_capacity(steps + 1),
        knots: Vec::new(),
    };
    hist.c.push(Complex64::new(1.0, 0.0));
    hist.d_right.push(-kernel.instantaneous);
    hist.d_left.push(zero);

    let inst = kernel.instantaneous;
    // Delayed sum at step i, fraction theta. `left` picks the left limit
    // where a term switches on.
    let delayed = |hist: &History, i: usize, theta: f64, left: bool| -> Complex64 {
        let mut acc = zero;
        for (w, lag) in &lags {
            let v = match lag {
                Lag::Snapped(m) => {
                    let j = i as isize - m;
                    if theta == 0.0 && !left {
                        hist.c_right(j)
                    } else if theta == 1.0 && left {
                        hist.c_left(j + 1)
                    } else {
                        hist.on_interval(j, theta)
                    }
                }
                Lag::Interpolated(tau) => {
                    let s = (i as f64 + theta) * dt - tau;
                    if s.abs() <= 1e-12 * dt {
                        if left {
                            zero
                        } else {
                            hist.c[0]
                        }
                    } else {
                        hist.at(s)
                    }
                }
            };
            acc += w * v;
        }
        acc
    };

    let mut next_break = 0;
    for i in 0..steps {
        let t0 = i as f64 * dt;
        let mut cuts = vec![0.0];
        while next_break < breaks.len() && breaks[next_break] < t0 + dt {
            let theta = (breaks[next_break] - t0) / dt;
            if theta > 1e-12 && theta < 1.0 - 1e-12 {
                cuts.push(theta);
            }
            next_break += 1;
        }
        cuts.push(1.0);

        let mut y = hist.c[i];
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let h = (b - a) * dt;
            let ha = delayed(&hist, i, a, false);
            let hm = delayed(&hist, i, 0.5 * (a + b), false);
            let hb = delayed(&hist, i, b, true);
            let f = |y: Complex64, h: Complex64| -inst * y - h;
            let k1 = f(y, ha);
            let k2 = f(y + k1 * (0.5 * h), hm);
            let k3 = f(y + k2 * (0.5 * h), hm);
            let k4 = f(y + k3 * h, hb);
            y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            if !(y.re.is_finite() && y.im.is_finite()) {
                return Err(Error::convergence(format!("amplitude diverged at t = {}", t0 + b * dt)));
            }
            if b < 1.0 {
                let knot = Knot { theta: b, c: y, d_left: f(y, hb), d_right: f(y, delayed(&hist, i, b, false)) };
                hist.knots.push((i, knot));
            }
        }
        hist.c.push(y);
        let dl = -inst * y - delayed(&hist, i, 1.0, true);
        let dr = -inst * y - delayed(&hist, i + 1, 0.0, false);
        hist.d_left.push(dl);
        hist.d_right.push(dr);
    }

    let times = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok(AmplitudeTrajectory {
        times,
        amplitude: hist.c.clone(),
        energy: Vec::new(),
        kernel: kernel.clone(),
        omega_a,
        history: hist,
    })
}

/// Observed convergence order from runs at `dt`, `dt/2` and `dt/4`:
/// `log2(e1/e2)` with `e1 = max|c_dt − c_{dt/2}|` and `e2 = max|c_{dt/2} − c_{dt/4}|`
/// on the coarse grid.
pub fn step_halving_order(layout: &Layout, waveguide: &Waveguide, omega_a: f64, t_end: f64, dt: f64) -> Result<f64> {
    let kernel = DelayKernel::new(layout, waveguide, omega_a)?;
    // Whole number of coarse steps, so the finer grids nest.
    let t_end = (t_end / dt).round().max(1.0) * dt;
    let runs: Vec<AmplitudeTrajectory> = [dt, 0.5 * dt, 0.25 * dt]
        .iter()
        .map(|h| integrate_kernel(&kernel, omega_a, t_end, *h))
        .collect::<Result<_>>()?;
    let n = runs[0].amplitude.len();
    let diff = |fine: usize, step: usize| {
        (0..n)
            .map(|i| (runs[fine - 1].amplitude[i * step / 2] - runs[fine].amplitude[i * step]).norm())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (diff(1, 2), diff(2, 4));
    if !(e2 > 0.0) {
        return Err(Error::convergence("step-halving differences vanished; increase dt"));
    }
    Ok((e1 / e2).log2())
}
