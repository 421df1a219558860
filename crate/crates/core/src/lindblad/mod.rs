//! Lindblad master equations for driven multilevel giant atoms and for
//! several two-level giant atoms sharing a waveguide.
//!
//! `dρ/dt = −i[H, ρ] + Σ_i γ_i D[L_i]ρ` with
//! `D[X]ρ = XρX† − ½X†Xρ − ½ρX†X`, integrated with fixed-step RK4.

mod inversion;
mod steady;

pub use inversion::{inversion_scan, shifted_two_photon_frequency, InversionOptions, InversionRow};
pub use steady::{liouvillian, steady_state, MAX_STEADY_DIM};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AtomSpec, Layout, TransitionScaling, Waveguide};
use crate::multiatom::MultiAtomCoefficients;
use crate::spectral::{level_shifts, relaxation_rate};

pub type CMatrix = DMatrix<Complex64>;

/// Largest Hilbert-space dimension accepted by [`LindbladSystem::new`].
pub const MAX_DIM: usize = 4096;

const HERMITIAN_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub op: CMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSystem {
    hamiltonian: CMatrix,
    jumps: Vec<JumpOperator>,
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

impl LindbladSystem {
    pub fn new(hamiltonian: CMatrix, jumps: Vec<JumpOperator>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(Error::Dimension { expected: d, got: hamiltonian.ncols() });
        }
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(format!("Hilbert-space dimension {d} outside 1..={MAX_DIM}")));
        }
        let scale = hamiltonian.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        if hermitian_defect(&hamiltonian) > HERMITIAN_TOL * scale {
            return Err(Error::invalid("Hamiltonian is not Hermitian"));
        }
        for (i, j) in jumps.iter().enumerate() {
            if j.op.nrows() != d || j.op.ncols() != d {
                return Err(Error::Dimension { expected: d, got: j.op.nrows() });
            }
            if !(j.rate.is_finite() && j.rate >= 0.0) {
                return Err(Error::invalid(format!("jump {i} has invalid rate {}", j.rate)));
            }
        }
        Ok(LindbladSystem { hamiltonian, jumps })
    }

    /// Jump operators from a Kossakowski matrix `K` over the operators
    /// `ops`: `Σ_jl K_jl (X_j ρ X_l† − ½{X_l†X_j, ρ})`, diagonalized into
    /// independent channels. `K` must be symmetric positive semidefinite.
    pub fn from_kossakowski(hamiltonian: CMatrix, ops: &[CMatrix], k: &DMatrix<f64>) -> Result<Self> {
        let n = ops.len();
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::Dimension { expected: n, got: k.nrows() });
        }
        let scale = k.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if (k - k.transpose()).amax() > 1e-12 * scale.max(1.0) {
            return Err(Error::invalid("relaxation matrix is not symmetric"));
        }
        let eig = SymmetricEigen::new(k.clone());
        let mut jumps = Vec::new();
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -1e-10 * scale - 1e-14 {
                return Err(Error::invalid(format!(
                    "relaxation matrix is not positive semidefinite (eigenvalue {lambda:e})"
                )));
            }
            if lambda <= 0.0 {
                continue;
            }
            let d = hamiltonian.nrows();
            let mut op = CMatrix::zeros(d, d);
            for (j, x) in ops.iter().enumerate() {
                op += x * c(eig.eigenvectors[(j, i)]);
            }
            jumps.push(JumpOperator { op, rate: lambda });
        }
        Self::new(hamiltonian, jumps)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    /// Right-hand side of the master equation.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * Complex64::new(0.0, -1.0);
        for j in &self.jumps {
            if j.rate > 0.0 {
                out += dissipator_unchecked(&j.op, rho) * c(j.rate);
            }
        }
        out
    }
}

fn dissipator_unchecked(x: &CMatrix, rho: &CMatrix) -> CMatrix {
    let xd = x.adjoint();
    let xdx = &xd * x;
    x * rho * &xd - (&xdx * rho + rho * &xdx) * c(0.5)
}

/// `D[X]ρ = XρX† − ½X†Xρ − ½ρX†X`.
pub fn dissipator(x: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    if !x.is_square() || !rho.is_square() || x.nrows() != rho.nrows() {
        return Err(Error::Dimension { expected: x.nrows(), got: rho.nrows() });
    }
    Ok(dissipator_unchecked(x, rho))
}

/// Coherent drive of one transition, treated in its rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drive {
    pub lower: usize,
    pub upper: usize,
    /// Drive strength `Ω_d`; the coupling term is `(Ω_d/2)(|l⟩⟨u| + h.c.)`.
    pub strength: f64,
    /// Drive frequency minus the Lamb-shifted transition frequency.
    pub detuning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GiantAtomOptions {
    pub drive: Option<Drive>,
    pub scaling: TransitionScaling,
    /// Without a drive, drop the level energies (a frame rotating with
    /// every level); populations are unaffected.
    pub rotating_frame: bool,
}

/// Rates `Γ_{m+1,m}` at `ω_{m+1,m}` for every transition, with strengths
/// expanded by `scaling`.
pub fn transition_rates(
    layout: &Layout,
    atom: &AtomSpec,
    waveguide: &Waveguide,
    scaling: TransitionScaling,
) -> Vec<f64> {
    let scaled = layout.with_transition_scaling(atom.level_count() - 1, scaling);
    (0..atom.level_count() - 1).map(|m| relaxation_rate(&scaled, waveguide, m, atom.transition(m))).collect()
}

/// Master equation of one giant atom: level energies `ω_m + Δ_m`, decay
/// `Γ_{m+1,m} D[σ_−^(m)]`, and an optional drive in its rotating frame.
pub fn build_giant_atom_system(
    layout: &Layout,
    atom: &AtomSpec,
    waveguide: &Waveguide,
    options: &GiantAtomOptions,
) -> Result<LindbladSystem> {
    let d = atom.level_count();
    if d > 12 {
        return Err(Error::invalid(format!("{d} levels exceed the limit of 12")));
    }
    let scaled = layout.with_transition_scaling(d - 1, options.scaling);
    let rates = transition_rates(layout, atom, waveguide, options.scaling);
    let shifts = level_shifts(&scaled, atom, waveguide);

    let mut h = CMatrix::zeros(d, d);
    match options.drive {
        Some(drive) => {
            if drive.lower >= drive.upper || drive.upper >= d {
                return Err(Error::invalid(format!(
                    "drive on undefined transition {} <-> {} of a {d}-level atom",
                    drive.lower, drive.upper
                )));
            }
            if !(drive.strength.is_finite() && drive.detuning.is_finite()) {
                return Err(Error::invalid("drive parameters must be finite"));
            }
            h[(drive.upper, drive.upper)] = c(-drive.detuning);
            h[(drive.lower, drive.upper)] = c(0.5 * drive.strength);
            h[(drive.upper, drive.lower)] = c(0.5 * drive.strength);
        }
        None if options.rotating_frame => {}
        None => {
            for m in 0..d {
                h[(m, m)] = c(atom.energy(m) + shifts[m]);
            }
        }
    }
    let jumps = rates.iter().enumerate().map(|(m, &rate)| JumpOperator { op: atom.lowering(m), rate }).collect();
    LindbladSystem::new(h, jumps)
}

/// `σ_−` of atom `j` in a register of `n` two-level atoms (bit `j` set
/// means atom `j` excited).
pub fn register_lowering(n: usize, j: usize) -> CMatrix {
    let d = 1usize << n;
    let mut op = CMatrix::zeros(d, d);
    for s in 0..d {
        if s & (1 << j) != 0 {
            op[(s & !(1 << j), s)] = c(1.0);
        }
    }
    op
}

/// Master equation of several two-level atoms: `H = Σ (ω_j' − frame) σ_+σ_−
/// + Σ g_jl (σ_+^j σ_−^l + h.c.)` and the full relaxation matrix.
pub fn multi_atom_system(coeffs: &MultiAtomCoefficients, frame: f64) -> Result<LindbladSystem> {
    let n = coeffs.atom_count();
    if n > crate::multiatom::MAX_ATOMS {
        return Err(Error::invalid("too many atoms for a dense master equation"));
    }
    let lowering: Vec<CMatrix> = (0..n).map(|j| register_lowering(n, j)).collect();
    let d = 1usize << n;
    let mut h = CMatrix::zeros(d, d);
    for j in 0..n {
        let sm = &lowering[j];
        h += sm.adjoint() * sm * c(coeffs.shifted[j] - frame);
        for l in (j + 1)..n {
            let hop = lowering[j].adjoint() * &lowering[l];
            h += (&hop + hop.adjoint()) * c(coeffs.exchange[j][l]);
        }
    }
    LindbladSystem::from_kossakowski(h, &lowering, &coeffs.relaxation_matrix())
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<CMatrix>,
    pub populations: Vec<Vec<f64>>,
    pub trace_errors: Vec<f64>,
    /// Smallest eigenvalue of each recorded state (NaN above 64 levels).
    pub min_eigenvalues: Vec<f64>,
}

impl DensityTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &CMatrix {
        self.states.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Keep every `record_every`-th step (the last step is always kept).
    pub record_every: usize,
    /// Largest tolerated `|tr ρ − 1|`.
    pub trace_tolerance: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { record_every: 1, trace_tolerance: 1e-9 }
    }
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    if rho.nrows() > 64 {
        return f64::NAN;
    }
    let herm = (rho + rho.adjoint()) * c(0.5);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Check that `rho` is a density matrix of the right size.
pub fn validate_density(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Dimension { expected: dim, got: rho.nrows() });
    }
    if hermitian_defect(rho) > 1e-10 {
        return Err(Error::invalid("initial state is not Hermitian"));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::invalid(format!("initial state has trace {tr}")));
    }
    let lo = min_eigenvalue(rho);
    if lo < -1e-10 {
        return Err(Error::invalid(format!("initial state has negative eigenvalue {lo:e}")));
    }
    Ok(())
}

/// `|ψ⟩⟨ψ|` for basis state `k`.
pub fn basis_state(dim: usize, k: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(dim, dim);
    rho[(k, k)] = c(1.0);
    rho
}

/// Fixed-step RK4 from `rho0` to `t_end`.
///
/// `t_end/dt` is rounded to whole steps. Fails when the trace drifts beyond
/// `trace_tolerance` or the state norm grows, both signs that `dt` is too
/// large.
pub fn evolve(system: &LindbladSystem, rho0: &CMatrix, t_end: f64, dt: f64) -> Result<DensityTrajectory> {
    evolve_with(system, rho0, t_end, dt, &EvolveOptions::default())
}

pub fn evolve_with(
    system: &LindbladSystem,
    rho0: &CMatrix,
    t_end: f64,
    dt: f64,
    options: &EvolveOptions,
) -> Result<DensityTrajectory> {
    if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid(format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")));
    }
    validate_density(rho0, system.dim())?;
    let steps = (t_end / dt).round() as usize;
    let record_every = options.record_every.max(1);
    let d = system.dim();

    let mut traj = DensityTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        populations: Vec::new(),
        trace_errors: Vec::new(),
        min_eigenvalues: Vec::new(),
    };
    let mut record = |t: f64, rho: &CMatrix| {
        traj.times.push(t);
        traj.populations.push((0..d).map(|k| rho[(k, k)].re).collect());
        traj.trace_errors.push((rho.trace().re - 1.0).abs());
        traj.min_eigenvalues.push(min_eigenvalue(rho));
        traj.states.push(rho.clone());
    };

    let mut rho = rho0.clone();
    record(0.0, &rho);
    let half = c(0.5 * dt);
    let full = c(dt);
    let sixth = c(dt / 6.0);
    for step in 1..=steps {
        let k1 = system.rhs(&rho);
        let k2 = system.rhs(&(&rho + &k1 * half));
        let k3 = system.rhs(&(&rho + &k2 * half));
        let k4 = system.rhs(&(&rho + &k3 * full));
        rho += (k1 + (k2 + k3) * c(2.0) + k4) * sixth;

        let drift = (rho.trace() - c(1.0)).norm();
        let norm = rho.norm();
        if !norm.is_finite() || drift > options.trace_tolerance || norm > 1.0 + 1e-6 {
            return Err(Error::convergence(format!(
                "integration unstable at t = {:.6e} (trace drift {drift:e}, norm {norm:e}); reduce dt below {dt}",
                step as f64 * dt
            )));
        }
        if step % record_every == 0 || step == steps {
            record(step as f64 * dt, &rho);
        }
    }
    Ok(traj)
}

/// Largest population difference between runs at `dt` and `dt/2`, compared
/// on the coarse run's time grid.
pub fn step_halving_check(system: &LindbladSystem, rho0: &CMatrix, t_end: f64, dt: f64) -> Result<f64> {
    let coarse = evolve(system, rho0, t_end, dt)?;
    let fine = evolve_with(system, rho0, t_end, 0.5 * dt, &EvolveOptions { record_every: 2, ..Default::default() })?;
    let mut worst = 0.0f64;
    for (a, b) in coarse.states.iter().zip(&fine.states) {
        worst = worst.max((a - b).iter().fold(0.0f64, |m, z| m.max(z.norm())));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{equidistant_layout, Topology};
    use crate::multiatom::many_atom_coefficients;
    use std::f64::consts::PI;

    fn sigma_minus() -> CMatrix {
        AtomSpec::two_level(1.0).unwrap().lowering(0)
    }

    #[test]
    fn dissipator_examples() {
        let rho = basis_state(2, 1);
        let d = dissipator(&sigma_minus(), &rho).unwrap();
        assert_eq!(d[(0, 0)].re, 1.0);
        assert_eq!(d[(1, 1)].re, -1.0);
        assert!(d[(0, 1)].norm() == 0.0 && d[(1, 0)].norm() == 0.0);
        let id = CMatrix::identity(3, 3);
        let rho3 = CMatrix::from_fn(3, 3, |i, j| c(if i == j { 1.0 / 3.0 } else { 0.1 }));
        assert!(dissipator(&id, &rho3).unwrap().norm() < 1e-16);
        assert!(dissipator(&id, &rho).is_err());
    }

    #[test]
    fn two_level_decay() {
        let atom = AtomSpec::two_level(PI / 3.0).unwrap();
        let l = equidistant_layout(1, 0.0, 1.0).unwrap();
        let wg = Waveguide::with_unit_rate(1.0, 0.8).unwrap();
        let sys = build_giant_atom_system(&l, &atom, &wg, &GiantAtomOptions::default()).unwrap();
        let traj = evolve(&sys, &basis_state(2, 1), 5.0 / 0.8, 1e-3).unwrap();
        let last = traj.populations.last().unwrap()[1];
        assert!((last - (-5.0f64).exp()).abs() < 1e-6, "{last}");
    }

    #[test]
    fn protected_atom_has_zero_rate() {
        let atom = AtomSpec::two_level(PI).unwrap();
        let l = equidistant_layout(2, 1.0, 1.0).unwrap();
        let sys =
            build_giant_atom_system(&l, &atom, &Waveguide::dimensionless(), &GiantAtomOptions::default()).unwrap();
        assert!(sys.jumps()[0].rate < 1e-30);
    }

    #[test]
    fn fig4_anharmonicity_shifts_phase() {
        let d = 1.0;
        let omega10 = 2.2 * PI;
        let atom = AtomSpec::three_level(omega10, -0.1 * 2.0 * PI / d).unwrap();
        let l = equidistant_layout(10, d, 1.0).unwrap();
        let rates = transition_rates(&l, &atom, &Waveguide::dimensionless(), TransitionScaling::Flat);
        assert!(rates[0] < 1e-20);
        assert!((rates[1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn undefined_drive_rejected() {
        let atom = AtomSpec::two_level(1.0).unwrap();
        let l = equidistant_layout(1, 0.0, 1.0).unwrap();
        let drive = Drive { lower: 0, upper: 2, strength: 1.0, detuning: 0.0 };
        let opts = GiantAtomOptions { drive: Some(drive), ..Default::default() };
        assert!(build_giant_atom_system(&l, &atom, &Waveguide::dimensionless(), &opts).is_err());
    }

    #[test]
    fn pure_hamiltonian_preserves_purity() {
        let h =
            CMatrix::from_fn(
                3,
                3,
                |i, j| if i == j { c(i as f64) } else { Complex64::new(0.3, 0.1 * (i as f64 - j as f64)) },
            );
        let sys = LindbladSystem::new(h, vec![]).unwrap();
        let traj = evolve(&sys, &basis_state(3, 0), 10.0, 1e-3).unwrap();
        let rho = traj.final_state();
        let purity = (rho * rho).trace().re;
        assert!((purity - 1.0).abs() < 1e-9, "{purity}");
    }

    #[test]
    fn braided_swap() {
        let (a, b) = Topology::Braided.canonical_pair().unwrap();
        let coeffs = many_atom_coefficients(&[a, b], &Waveguide::dimensionless(), PI / 2.0).unwrap();
        let sys = multi_atom_system(&coeffs, coeffs.shifted[0]).unwrap();
        // Bit 0 is atom a: |e,g⟩ = state 1, |g,e⟩ = state 2.
        let g = coeffs.exchange[0][1];
        let t = PI / (2.0 * g.abs());
        let dt = t / 4000.0;
        let traj = evolve(&sys, &basis_state(4, 1), t, dt).unwrap();
        let p = traj.populations.last().unwrap();
        assert!(p[2] >= 1.0 - 1e-6, "{p:?}");
    }

    #[test]
    fn dark_state_with_maximal_collective_decay() {
        let coeffs = MultiAtomCoefficients {
            omega: 0.0,
            shifted: vec![0.0, 0.0],
            rates: vec![1.0, 1.0],
            exchange: vec![vec![0.0; 2]; 2],
            collective: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        };
        let sys = multi_atom_system(&coeffs, 0.0).unwrap();
        let mut psi = CMatrix::zeros(4, 1);
        psi[(1, 0)] = c(1.0 / 2f64.sqrt());
        psi[(2, 0)] = c(-1.0 / 2f64.sqrt());
        let rho = &psi * psi.adjoint();
        let traj = evolve(&sys, &rho, 5.0, 1e-3).unwrap();
        let p = traj.populations.last().unwrap();
        assert!((p[1] + p[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_psd_relaxation_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let ops = vec![register_lowering(2, 0), register_lowering(2, 1)];
        assert!(LindbladSystem::from_kossakowski(CMatrix::zeros(4, 4), &ops, &k).is_err());
    }

    #[test]
    fn oversized_step_is_reported() {
        let h = CMatrix::from_fn(2, 2, |i, j| if i == j { c(0.0) } else { c(1.0) });
        let sys = LindbladSystem::new(h * c(100.0), vec![JumpOperator { op: sigma_minus(), rate: 1.0 }]).unwrap();
        let err = evolve(&sys, &basis_state(2, 1), 10.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }

    #[test]
    fn halving_check_is_small() {
        let h = CMatrix::from_fn(2, 2, |i, j| if i == j { c(0.0) } else { c(0.5) });
        let sys = LindbladSystem::new(h, vec![JumpOperator { op: sigma_minus(), rate: 0.3 }]).unwrap();
        let diff = step_halving_check(&sys, &basis_state(2, 1), 5.0, 0.01).unwrap();
        assert!(diff < 1e-9, "{diff}");
    }
}
