//! Master-equation coefficients for several giant atoms sharing one
//! waveguide: Lamb-shifted frequencies, exchange couplings and the
//! individual and collective relaxation rates.
//!
//! All atoms are two-level and degenerate at the common frequency `ω`. With
//! `A_j = Σ_k g_k e^{iωx_k/v}` over the points of atom `j`:
//!
//! ```text
//! Γ_j  = 4πJ0 |A_j|²
//! Γ_jl = 4πJ0 Re(A_j A_l*)            = γ Σ_{k∈j, n∈l} g_k g_n cos(ω|x_k − x_n|/v)
//! g_jl = 2πJ0 Σ_{k∈j, n∈l} g_k g_n sin(ω|x_k − x_n|/v)
//! ```
//!
//! The sign of `g` follows the effective non-Hermitian single-excitation
//! Hamiltonian `Δ − iΓ/2` obtained by eliminating the waveguide; the mode
//! summation in [`crate::oracle`] reproduces it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_topology, Layout, PhaseGrid, Topology, Waveguide};
use crate::spectral::{coupling_factor, lamb_shift};

/// Hilbert-space guard for downstream master-equation use.
pub const MAX_ATOMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiAtomCoefficients {
    pub omega: f64,
    /// `ω_j' = ω + Δ_j`.
    pub shifted: Vec<f64>,
    /// `Γ_j`.
    pub rates: Vec<f64>,
    /// `g_jl`, symmetric with zero diagonal.
    pub exchange: Vec<Vec<f64>>,
    /// `Γ_jl`, symmetric; the diagonal repeats `Γ_j`.
    pub collective: Vec<Vec<f64>>,
}

impl MultiAtomCoefficients {
    pub fn atom_count(&self) -> usize {
        self.rates.len()
    }

    /// Relaxation (Kossakowski) matrix with `Γ_j` on the diagonal.
    pub fn relaxation_matrix(&self) -> DMatrix<f64> {
        let n = self.rates.len();
        DMatrix::from_fn(n, n, |j, l| self.collective[j][l])
    }

    /// Coherent part: `ω_j'` on the diagonal, `g_jl` off it.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.rates.len();
        DMatrix::from_fn(n, n, |j, l| if j == l { self.shifted[j] } else { self.exchange[j][l] })
    }

    /// Smallest eigenvalue of the relaxation matrix.
    pub fn min_relaxation_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.relaxation_matrix()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Two-atom view of atoms `j` and `l`.
    pub fn pair(&self, j: usize, l: usize) -> TwoAtomCoefficients {
        TwoAtomCoefficients {
            omega_a: self.shifted[j],
            omega_b: self.shifted[l],
            g: self.exchange[j][l],
            gamma_a: self.rates[j],
            gamma_b: self.rates[l],
            gamma_coll: self.collective[j][l],
        }
    }
}

/// The coefficients of the two-atom master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoAtomCoefficients {
    pub omega_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_coll: f64,
}

fn pair_sums(a: &Layout, b: &Layout, waveguide: &Waveguide, omega: f64) -> (f64, f64) {
    let v = waveguide.velocity();
    let (mut c, mut s) = (0.0, 0.0);
    for p in a.points() {
        for q in b.points() {
            let w = p.strength(0) * q.strength(0);
            let phase = omega * (p.position - q.position).abs() / v;
            c += w * phase.cos();
            s += w * phase.sin();
        }
    }
    (c, s)
}

pub fn two_atom_coefficients(a: &Layout, b: &Layout, waveguide: &Waveguide, omega: f64) -> Result<TwoAtomCoefficients> {
    Ok(many_atom_coefficients(&[a.clone(), b.clone()], waveguide, omega)?.pair(0, 1))
}

/// Coefficients for every atom and every pair.
pub fn many_atom_coefficients(layouts: &[Layout], waveguide: &Waveguide, omega: f64) -> Result<MultiAtomCoefficients> {
    if layouts.is_empty() {
        return Err(Error::invalid("need at least one atom"));
    }
    if layouts.len() > MAX_ATOMS {
        return Err(Error::invalid(format!("{} atoms exceed the limit of {MAX_ATOMS}", layouts.len())));
    }
    if !omega.is_finite() {
        return Err(Error::invalid("frequency must be finite"));
    }
    let gamma = waveguide.unit_rate();
    let n = layouts.len();
    let amps: Vec<Complex64> = layouts.iter().map(|l| coupling_factor(l, waveguide, 0, omega)).collect();
    let rates: Vec<f64> = amps.iter().map(|a| gamma * a.norm_sqr()).collect();
    let shifted: Vec<f64> = layouts.iter().map(|l| omega + lamb_shift(l, waveguide, 0, omega)).collect();

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| ((j + 1)..n).map(move |l| (j, l))).collect();
    let values: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(j, l)| {
            let (c, s) = pair_sums(&layouts[j], &layouts[l], waveguide, omega);
            (gamma * c, 0.5 * gamma * s)
        })
        .collect();

    let mut exchange = vec![vec![0.0; n]; n];
    let mut collective = vec![vec![0.0; n]; n];
    for j in 0..n {
        collective[j][j] = rates[j];
    }
    for (&(j, l), &(c, g)) in pairs.iter().zip(&values) {
        collective[j][l] = c;
        collective[l][j] = c;
        exchange[j][l] = g;
        exchange[l][j] = g;
    }
    Ok(MultiAtomCoefficients { omega, shifted, rates, exchange, collective })
}

/// Reference spacing that turns phase into frequency: the first gap of the
/// merged, sorted coordinates of both atoms.
pub fn reference_spacing(a: &Layout, b: &Layout) -> Result<f64> {
    let mut xs: Vec<f64> = a.positions().chain(b.positions()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::invalid("layouts need two distinct coordinates to define a phase"));
    }
    Ok(xs[1] - xs[0])
}

/// A point where both atoms and their collective channel are decoupled
/// from the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoherenceFreePoint {
    pub phi: f64,
    pub g: f64,
}

/// Phases where `max(Γ_a, Γ_b, |Γ_coll|) < 1e−8 γ`, refined to 1e−10 rad.
///
/// `φ = ω·d/v` with `d` from [`reference_spacing`]. Candidates are minima
/// of `Γ_a + Γ_b` bracketed by sign changes of its derivative on the grid;
/// since the relaxation matrix is positive semidefinite, `Γ_coll` vanishes
/// wherever both individual rates do.
pub fn decoherence_free_points(
    a: &Layout,
    b: &Layout,
    waveguide: &Waveguide,
    grid: &PhaseGrid,
) -> Result<Vec<DecoherenceFreePoint>> {
    let d = reference_spacing(a, b)?;
    let v = waveguide.velocity();
    let gamma = waveguide.unit_rate();
    let to_omega = |phi: f64| phi * v / d;

    let slope = |phi: f64| -> f64 {
        let w = to_omega(phi);
        rate_derivative(a, waveguide, w) + rate_derivative(b, waveguide, w)
    };
    let phis = grid.values();
    let slopes: Vec<f64> = phis.par_iter().map(|&p| slope(p)).collect();

    let mut found: Vec<DecoherenceFreePoint> = Vec::new();
    let mut consider = |phi: f64| -> Result<()> {
        let c = two_atom_coefficients(a, b, waveguide, to_omega(phi))?;
        let worst = c.gamma_a.max(c.gamma_b).max(c.gamma_coll.abs());
        if worst < 1e-8 * gamma && !found.iter().any(|p| (p.phi - phi).abs() < 1e-6) {
            found.push(DecoherenceFreePoint { phi, g: c.g });
        }
        Ok(())
    };

    for i in 0..phis.len() {
        if slopes[i] == 0.0 {
            consider(phis[i])?;
        }
        if i + 1 < phis.len() && slopes[i] < 0.0 && slopes[i + 1] > 0.0 {
            let (mut lo, mut hi) = (phis[i], phis[i + 1]);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            consider(0.5 * (lo + hi))?;
        }
    }
    found.sort_by(|p, q| p.phi.total_cmp(&q.phi));
    Ok(found)
}

/// `dΓ/dω = 4πJ0 · 2 Re(A* dA/dω)`.
fn rate_derivative(layout: &Layout, waveguide: &Waveguide, omega: f64) -> f64 {
    let v = waveguide.velocity();
    let mut a = Complex64::new(0.0, 0.0);
    let mut da = Complex64::new(0.0, 0.0);
    for p in layout.points() {
        let e = Complex64::from_polar(p.strength(0), omega * p.position / v);
        a += e;
        da += e * Complex64::new(0.0, p.position / v);
    }
    waveguide.unit_rate() * 2.0 * (a.conj() * da).re
}

/// One row of the two-atom phase sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopologyRow {
    pub phi: f64,
    pub topology: Topology,
    pub g: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_coll: f64,
}

/// Sweep the canonical unit-spacing pair for one topology.
pub fn topology_sweep(topology: Topology, phis: &[f64], waveguide: &Waveguide) -> Result<Vec<TopologyRow>> {
    let (a, b) = topology.canonical_pair()?;
    debug_assert_eq!(classify_topology(&a, &b)?, topology);
    phis.par_iter()
        .map(|&phi| {
            let c = two_atom_coefficients(&a, &b, waveguide, waveguide.frequency_for_phase(phi, 1.0))?;
            Ok(TopologyRow { phi, topology, g: c.g, gamma_a: c.gamma_a, gamma_b: c.gamma_b, gamma_coll: c.gamma_coll })
        })
        .collect()
}
