//! Brute-force reference: the waveguide as a finite set of ring modes.
//!
//! In the single-excitation sector the state is one amplitude per atom plus
//! one per mode. Modes sit on the ring lattice `ω_j = v|k_j|`,
//! `k_j = ±2πj/L`, restricted to a window around a centre frequency, and
//! couple to atom `a` through
//!
//! ```text
//! V_{a,j} = √(J0 Δω) Σ_k g_k e^{−i k_j x_k},   Δω = 2πv/L,
//! ```
//!
//! which reproduces `Γ = 4πJ0|A|²` for a dense lattice. Everything is in the
//! rotating-wave approximation.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::CMatrix;
use crate::model::{Layout, Waveguide};

/// Largest state dimension [`OracleHamiltonian::to_dense`] will build.
pub const MAX_DENSE: usize = 4096;
/// Fits only use `t < FIT_FRACTION · L/v`, before light circles the ring.
pub const FIT_FRACTION: f64 = 0.4;

/// A two-level atom for the oracle: its coupling points and bare frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleAtom {
    pub layout: Layout,
    pub frequency: f64,
}

impl OracleAtom {
    pub fn new(layout: Layout, frequency: f64) -> Self {
        OracleAtom { layout, frequency }
    }

    /// `γ (Σ|g_k|)²`: the largest rate the layout can reach.
    pub fn rate_bound(&self, waveguide: &Waveguide) -> f64 {
        let s: f64 = self.layout.strengths(0).map(f64::abs).sum();
        waveguide.unit_rate() * s * s
    }
}

/// Ring modes in a window of width `W` around `center`, `count/2` in each
/// direction. The spacing is adjusted slightly so `center` lies midway
/// between two modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeBasis {
    velocity: f64,
    spacing: f64,
    center: f64,
    first_index: u64,
    per_direction: usize,
}

impl ModeBasis {
    pub fn new(waveguide: &Waveguide, center: f64, window: f64, count: usize) -> Result<Self> {
        if count < 2 || !count.is_multiple_of(2) {
            return Err(Error::invalid(format!("mode count must be even and ≥ 2, got {count}")));
        }
        if !(window.is_finite() && window > 0.0) || !center.is_finite() {
            return Err(Error::invalid("mode window must be positive and centred at a finite frequency"));
        }
        let per_direction = count / 2;
        // Nudge the spacing so the centre falls midway between two modes.
        let nominal = window / per_direction as f64;
        let below = (center / nominal - 0.5).round();
        let spacing = center / (below + 0.5);
        let lowest = below + 1.0 - (per_direction / 2) as f64;
        if below < 0.0 || lowest < 1.0 {
            return Err(Error::invalid(format!(
                "window {window} around {center} reaches zero frequency; move the centre up"
            )));
        }
        Ok(ModeBasis { velocity: waveguide.velocity(), spacing, center, first_index: lowest as u64, per_direction })
    }

    /// Default sizing: `M = 4096` modes over a window of `100·rate`.
    pub fn for_rate(waveguide: &Waveguide, center: f64, rate: f64) -> Result<Self> {
        Self::new(waveguide, center, 100.0 * rate, 4096)
    }

    pub fn count(&self) -> usize {
        2 * self.per_direction
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn window(&self) -> f64 {
        self.spacing * self.per_direction as f64
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn ring_length(&self) -> f64 {
        std::f64::consts::TAU * self.velocity / self.spacing
    }

    /// `L/v`: when emitted light first returns around the ring.
    pub fn revival_time(&self) -> f64 {
        self.ring_length() / self.velocity
    }

    /// Frequencies of one direction's modes, ascending.
    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.per_direction).map(move |i| (self.first_index + i as u64) as f64 * self.spacing)
    }
}

/// The single-excitation Hamiltonian in the frame rotating at the basis
/// centre: atoms first, then right movers, then left movers.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleHamiltonian {
    /// Atom detunings from the centre.
    atom_detunings: Vec<f64>,
    /// Mode detunings from the centre.
    mode_detunings: Vec<f64>,
    /// `V[a][j]`.
    couplings: Vec<Vec<Complex64>>,
    center: f64,
    revival_time: f64,
    window: f64,
    spacing: f64,
    first_frequency: f64,
}

/// Build the Hamiltonian for `atoms` on `basis`.
///
/// Each atom's frequency must lie in the middle half of the window, and the
/// window must be at least `50·γ(Σ|g|)²` wide.
pub fn build_hamiltonian(atoms: &[OracleAtom], waveguide: &Waveguide, basis: &ModeBasis) -> Result<OracleHamiltonian> {
    if atoms.is_empty() {
        return Err(Error::invalid("oracle needs at least one atom"));
    }
    let w = basis.window();
    for (a, atom) in atoms.iter().enumerate() {
        let bound = atom.rate_bound(waveguide);
        if w < 50.0 * bound {
            return Err(Error::invalid(format!(
                "mode window {w} is narrower than 50× the rate bound {bound} of atom {a}"
            )));
        }
        if (atom.frequency - basis.center).abs() > 0.25 * w {
            return Err(Error::invalid(format!(
                "atom {a} frequency {} lies outside the mode window core",
                atom.frequency
            )));
        }
    }
    let v = waveguide.velocity();
    let amp = (waveguide.density_of_states() * basis.spacing).sqrt();
    let freqs: Vec<f64> = basis.frequencies().collect();
    let mut couplings = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let pts: Vec<(f64, f64)> = atom.layout.points().iter().map(|p| (p.position, p.strength(0))).collect();
        let mut row = Vec::with_capacity(basis.count());
        for sign in [1.0, -1.0] {
            for &om in &freqs {
                let k = sign * om / v;
                let s: Complex64 = pts.iter().map(|&(x, g)| Complex64::from_polar(g, -k * x)).sum();
                row.push(amp * s);
            }
        }
        couplings.push(row);
    }
    let mode_detunings = freqs.iter().chain(freqs.iter()).map(|om| om - basis.center).collect();
    Ok(OracleHamiltonian {
        atom_detunings: atoms.iter().map(|a| a.frequency - basis.center).collect(),
        mode_detunings,
        couplings,
        center: basis.center,
        revival_time: basis.revival_time(),
        window: basis.window(),
        spacing: basis.spacing,
        first_frequency: freqs[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    /// Atom amplitudes at each recorded time, in the frame rotating at
    /// `center`.
    pub atoms: Vec<Vec<Complex64>>,
    /// Largest `|‖ψ‖² − 1|` seen.
    pub norm_error: f64,
    pub center: f64,
    pub revival_time: f64,
}

impl OracleHamiltonian {
    pub fn atom_count(&self) -> usize {
        self.atom_detunings.len()
    }

    pub fn dim(&self) -> usize {
        self.atom_count() + self.mode_detunings.len()
    }

    pub fn revival_time(&self) -> f64 {
        self.revival_time
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// The full matrix, for small bases.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let n = self.dim();
        if n > MAX_DENSE {
            return Err(Error::invalid(format!("dense oracle limited to dimension {MAX_DENSE}, got {n}")));
        }
        let na = self.atom_count();
        let mut h = CMatrix::zeros(n, n);
        for (a, e) in self.atom_detunings.iter().enumerate() {
            h[(a, a)] = Complex64::new(*e, 0.0);
        }
        for (j, w) in self.mode_detunings.iter().enumerate() {
            h[(na + j, na + j)] = Complex64::new(*w, 0.0);
            for a in 0..na {
                h[(a, na + j)] = self.couplings[a][j];
                h[(na + j, a)] = self.couplings[a][j].conj();
            }
        }
        Ok(h)
    }

    /// Self-energy the modes give the atoms at lab frequency `energy`,
    /// `Σ_ab = g_ab − iΓ_ab/2` (with `Δ_a` on the diagonal).
    ///
    /// The real part is the lattice sum `Σ_j V_aj V*_bj / (E − ω_j)`, a
    /// midpoint-rule principal value when `E` sits between two modes; the
    /// imaginary part is the golden rule with couplings interpolated
    /// between the neighbouring modes.
    pub fn effective_block(&self, energy: f64) -> Result<CMatrix> {
        let na = self.atom_count();
        let per = self.mode_detunings.len() / 2;
        let pos = (energy - self.first_frequency) / self.spacing;
        if !(pos >= 0.0 && pos < (per - 1) as f64) {
            return Err(Error::invalid(format!("energy {energy} is outside the mode window")));
        }
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let e = energy - self.center;
        let denom: Vec<f64> = self.mode_detunings.iter().map(|w| 1.0 / (e - w)).collect();
        if denom.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid(format!("energy {energy} coincides with a mode")));
        }
        let weights = [(i0, 1.0 - frac), (i0 + 1, frac), (per + i0, 1.0 - frac), (per + i0 + 1, frac)];
        let golden = std::f64::consts::PI / self.spacing;
        Ok(CMatrix::from_fn(na, na, |a, b| {
            let (va, vb) = (&self.couplings[a], &self.couplings[b]);
            let re: Complex64 = va.iter().zip(vb).zip(&denom).map(|((x, y), d)| x * y.conj() * *d).sum();
            let im: Complex64 = weights.iter().map(|&(j, w)| va[j] * vb[j].conj() * w).sum();
            re - Complex64::new(0.0, golden) * im
        }))
    }

    /// Crank-Nicolson evolution from an atomic state with the field empty.
    ///
    /// The implicit solve eliminates the (diagonal) mode block, leaving an
    /// atom-sized system that is factored once. Steps should keep
    /// `dt·W/2 ≲ 0.1` so the far modes are not distorted.
    pub fn evolve(&self, initial: &[Complex64], dt: f64, t_end: f64, record_every: usize) -> Result<OracleTrajectory> {
        let na = self.atom_count();
        if initial.len() != na {
            return Err(Error::Dimension { expected: na, got: initial.len() });
        }
        if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
            return Err(Error::invalid("need dt > 0 and t_end > 0"));
        }
        let norm0: f64 = initial.iter().map(|c| c.norm_sqr()).sum();
        if (norm0 - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("initial state must be normalized, got ‖ψ‖² = {norm0}")));
        }
        let every = record_every.max(1);
        let theta = 0.5 * dt;
        let i_theta = Complex64::new(0.0, theta);
        let inv: Vec<Complex64> = self.mode_detunings.iter().map(|w| 1.0 / (1.0 + i_theta * w)).collect();

        let mut k = CMatrix::from_fn(na, na, |a, b| {
            let s: Complex64 = self.couplings[a]
                .iter()
                .zip(&self.couplings[b])
                .zip(&inv)
                .map(|((va, vb), d)| va * vb.conj() * d)
                .sum();
            theta * theta * s
        });
        for a in 0..na {
            k[(a, a)] += 1.0 + i_theta * self.atom_detunings[a];
        }
        let lu = k.lu();

        let steps = (t_end / dt).round().max(1.0) as usize;
        let mut c: Vec<Complex64> = initial.to_vec();
        let mut b = vec![Complex64::new(0.0, 0.0); self.mode_detunings.len()];
        let mut rb = b.clone();
        let mut times = vec![0.0];
        let mut atoms = vec![c.clone()];
        let mut norm_error: f64 = 0.0;

        for step in 1..=steps {
            // r = (1 − iθH)ψ
            let mut ra: Vec<Complex64> = (0..na)
                .map(|a| {
                    let vb: Complex64 = self.couplings[a].iter().zip(&b).map(|(v, x)| v * x).sum();
                    c[a] - i_theta * (self.atom_detunings[a] * c[a] + vb)
                })
                .collect();
            for (j, w) in self.mode_detunings.iter().enumerate() {
                let vc: Complex64 = (0..na).map(|a| self.couplings[a][j].conj() * c[a]).sum();
                rb[j] = b[j] - i_theta * (w * b[j] + vc);
            }
            for (a, r) in ra.iter_mut().enumerate() {
                let s: Complex64 = self.couplings[a].iter().zip(&rb).zip(&inv).map(|((v, x), d)| v * x * d).sum();
                *r -= i_theta * s;
            }
            let sol = lu
                .solve(&nalgebra::DVector::from_vec(ra))
                .ok_or_else(|| Error::convergence("Crank-Nicolson atom block is singular"))?;
            c = sol.iter().copied().collect();
            for j in 0..b.len() {
                let vc: Complex64 = (0..na).map(|a| self.couplings[a][j].conj() * c[a]).sum();
                b[j] = (rb[j] - i_theta * vc) * inv[j];
            }
            if step % every == 0 || step == steps {
                let norm: f64 = c.iter().chain(&b).map(|x| x.norm_sqr()).sum();
                norm_error = norm_error.max((norm - 1.0).abs());
                times.push(step as f64 * dt);
                atoms.push(c.clone());
            }
        }
        if norm_error > 1e-9 {
            return Err(Error::convergence(format!("oracle norm drifted by {norm_error:e}")));
        }
        Ok(OracleTrajectory { times, atoms, norm_error, center: self.center, revival_time: self.revival_time })
    }
}

/// Exponential fit of one atom's decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub gamma: f64,
    /// Frequency shift relative to the bare atomic frequency.
    pub lamb: f64,
    /// RMS deviation of `ln|c|²` from the fitted line.
    pub residual: f64,
    pub t_start: f64,
    pub t_stop: f64,
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Fit `|c_a(t)|² ∝ e^{−Γt}` and the phase drift of atom `atom` (bare
/// frequency `frequency`) over `t ∈ [10/W, min(0.4 L/v, t_max)]`, stopping
/// early once `|c|²` falls below 1e−6.
pub fn extract_rates(traj: &OracleTrajectory, atom: usize, frequency: f64, window: f64, t_max: f64) -> Result<RateFit> {
    let t_start = 10.0 / window;
    let t_stop = t_max.min(FIT_FRACTION * traj.revival_time);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ph = Vec::new();
    let mut last_phase: Option<f64> = None;
    let mut unwrapped = 0.0;
    for (t, cs) in traj.times.iter().zip(&traj.atoms) {
        let c = *cs.get(atom).ok_or(Error::Dimension { expected: atom + 1, got: cs.len() })?;
        if *t < t_start || *t > t_stop {
            continue;
        }
        if c.norm_sqr() < 1e-6 {
            break;
        }
        let p = c.arg();
        unwrapped = match last_phase {
            None => p,
            Some(q) => {
                unwrapped + (p - q + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
            }
        };
        last_phase = Some(p);
        xs.push(*t);
        ys.push(c.norm_sqr().ln());
        ph.push(unwrapped);
    }
    if xs.len() < 8 {
        return Err(Error::convergence(format!(
            "only {} samples in the fit window [{t_start}, {t_stop}]; enlarge the basis or shorten dt",
            xs.len()
        )));
    }
    let (slope, _, residual) = line_fit(&xs, &ys);
    let (phase_slope, _, _) = line_fit(&xs, &ph);
    if residual > 0.05 {
        return Err(Error::convergence(format!("decay is not exponential (rms {residual:.3} in ln|c|²)")));
    }
    Ok(RateFit {
        gamma: -slope,
        lamb: -phase_slope - (frequency - traj.center),
        residual,
        t_start,
        t_stop: *xs.last().expect("non-empty"),
    })
}

/// Exchange coupling from a swap started in `|e, g⟩`.
///
/// Fits `atan(|c_1|/|c_0|) = |g|t` until the swap is about three quarters
/// done; the sign comes from `c_1/c_0 ≈ −i g t`.
pub fn extract_coupling(traj: &OracleTrajectory) -> Result<f64> {
    let t_stop = FIT_FRACTION * traj.revival_time;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sign_acc = 0.0;
    for (t, cs) in traj.times.iter().zip(&traj.atoms).skip(1) {
        if cs.len() < 2 {
            return Err(Error::Dimension { expected: 2, got: cs.len() });
        }
        if *t > t_stop {
            break;
        }
        let angle = cs[1].norm().atan2(cs[0].norm());
        if angle > 1.2 {
            break;
        }
        if cs[0].norm() > 0.0 {
            sign_acc += -(cs[1] / cs[0]).im;
        }
        xs.push(*t);
        ys.push(angle);
    }
    if xs.len() < 8 || ys.last().copied().unwrap_or(0.0) < 0.5 {
        return Err(Error::convergence("swap did not progress far enough before the ring revival"));
    }
    let (slope, icpt, residual) = line_fit(&xs, &ys);
    if residual > 0.01 || icpt.abs() > 0.05 {
        return Err(Error::convergence(format!("swap is not a clean rotation (rms {residual:.3} rad)")));
    }
    Ok(slope * sign_acc.signum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub modes: usize,
    pub spacing: f64,
    pub gamma: f64,
    pub lamb: f64,
    pub norm_error: f64,
}

/// Single-atom decay fitted with each mode count in `counts` at a fixed
/// window of `100·rate` centred on the atom.
pub fn convergence_table(atom: &OracleAtom, waveguide: &Waveguide, counts: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let rate = atom.rate_bound(waveguide);
    let window = 100.0 * rate;
    let dt = 0.2 / window;
    counts
        .iter()
        .map(|&m| {
            let basis = ModeBasis::new(waveguide, atom.frequency, window, m)?;
            let h = build_hamiltonian(std::slice::from_ref(atom), waveguide, &basis)?;
            let t_end = (FIT_FRACTION * basis.revival_time()).min(20.0 / rate);
            let traj = h.evolve(&[Complex64::new(1.0, 0.0)], dt, t_end, 10)?;
            let fit = extract_rates(&traj, 0, atom.frequency, window, t_end)?;
            Ok(ConvergenceRow {
                modes: m,
                spacing: basis.spacing(),
                gamma: fit.gamma,
                lamb: fit.lamb,
                norm_error: traj.norm_error,
            })
        })
        .collect()
}

/// Decay rate and shift of one atom from a default-sized oracle run.
pub fn oracle_decay(atom: &OracleAtom, waveguide: &Waveguide) -> Result<RateFit> {
    let rate = atom.rate_bound(waveguide);
    let basis = ModeBasis::for_rate(waveguide, atom.frequency, rate)?;
    let h = build_hamiltonian(std::slice::from_ref(atom), waveguide, &basis)?;
    let window = basis.window();
    let t_end = (FIT_FRACTION * basis.revival_time()).min(20.0 / rate);
    let traj = h.evolve(&[Complex64::new(1.0, 0.0)], 0.2 / window, t_end, 10)?;
    extract_rates(&traj, 0, atom.frequency, window, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{equidistant_layout, Topology};
    use std::f64::consts::PI;

    fn small_atom() -> OracleAtom {
        OracleAtom::new(Layout::from_positions("s", &[0.0], 1.0).unwrap(), 500.0)
    }

    #[test]
    fn single_point_calibration() {
        let wg = Waveguide::dimensionless();
        let fit = oracle_decay(&small_atom(), &wg).unwrap();
        assert!((fit.gamma - 1.0).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn two_points_at_pi_are_dark() {
        let wg = Waveguide::dimensionless();
        let d = 1e-3;
        let atom = OracleAtom::new(equidistant_layout(2, d, 1.0).unwrap(), PI / d);
        let fit = oracle_decay(&atom, &wg).unwrap();
        assert!(fit.gamma.abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn three_points_at_third_turn_are_dark() {
        let wg = Waveguide::dimensionless();
        let d = 1e-3;
        let atom = OracleAtom::new(equidistant_layout(3, d, 1.0).unwrap(), 2.0 * PI / 3.0 / d);
        let fit = oracle_decay(&atom, &wg).unwrap();
        assert!(fit.gamma.abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn dense_matrix_is_hermitian_and_norm_is_kept() {
        let wg = Waveguide::dimensionless();
        let basis = ModeBasis::new(&wg, 500.0, 100.0, 256).unwrap();
        let h = build_hamiltonian(&[small_atom()], &wg, &basis).unwrap();
        let m = h.to_dense().unwrap();
        assert!((&m - m.adjoint()).camax() == 0.0);
        let traj = h.evolve(&[Complex64::new(1.0, 0.0)], 0.002, 5.0, 50).unwrap();
        assert!(traj.norm_error < 1e-9);
    }

    #[test]
    fn braided_block_matches_exchange() {
        let wg = Waveguide::dimensionless();
        let (a, b) = Topology::Braided.canonical_pair().unwrap();
        let w = PI / 2.0 + 2.0 * PI * 200.0;
        let atoms = [OracleAtom::new(a, w), OracleAtom::new(b, w)];
        let basis = ModeBasis::new(&wg, w, 1000.0, 200_000).unwrap();
        let h = build_hamiltonian(&atoms, &wg, &basis).unwrap();
        let s = h.effective_block(w).unwrap();
        assert!((s[(0, 1)].re - 1.0).abs() < 0.02, "{}", s[(0, 1)]);
        assert!(s[(0, 1)].im.abs() < 0.01 && s[(0, 0)].im.abs() < 0.01);
    }

    #[test]
    fn window_guards() {
        let wg = Waveguide::dimensionless();
        assert!(ModeBasis::new(&wg, 1.0, 100.0, 64).is_err());
        assert!(ModeBasis::new(&wg, 100.0, 10.0, 63).is_err());
        let basis = ModeBasis::new(&wg, 500.0, 20.0, 256).unwrap();
        assert!(build_hamiltonian(&[small_atom()], &wg, &basis).is_err());
    }
}
