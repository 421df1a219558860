//! Closed-form and delay-equation results against the ring-mode oracle.

use std::f64::consts::PI;

use giant_atoms::delay::dde_evolve;
use giant_atoms::model::{equidistant_layout, CouplingPoint, Layout, Topology, Waveguide};
use giant_atoms::multiatom::{many_atom_coefficients, two_atom_coefficients};
use giant_atoms::oracle::{
    build_hamiltonian, convergence_table, extract_coupling, oracle_decay, ModeBasis, OracleAtom,
};
use giant_atoms::spectral::{lamb_shift, relaxation_rate};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two atoms on unit spacing at `ω = φ + 2πm` so the window clears zero.
fn block_for(topology: Topology, phi: f64) -> (giant_atoms::lindblad::CMatrix, f64) {
    let wg = Waveguide::dimensionless();
    let (a, b) = topology.canonical_pair().unwrap();
    let w = phi + 2.0 * PI * 200.0;
    let atoms = [OracleAtom::new(a, w), OracleAtom::new(b, w)];
    let basis = ModeBasis::new(&wg, w, 1000.0, 200_000).unwrap();
    let h = build_hamiltonian(&atoms, &wg, &basis).unwrap();
    (h.effective_block(w).unwrap(), w)
}

#[test]
fn pair_coefficients_match_self_energy() {
    let wg = Waveguide::dimensionless();
    for topology in [Topology::Small, Topology::Separate, Topology::Braided, Topology::Nested] {
        for phi in [0.3, PI / 2.0, 1.9, PI, 4.0] {
            let (s, w) = block_for(topology, phi);
            let (a, b) = topology.canonical_pair().unwrap();
            let c = two_atom_coefficients(&a, &b, &wg, w).unwrap();
            let tol = 0.01 * (1.0 + c.gamma_a.abs().max(c.g.abs()));
            assert!((s[(0, 1)].re - c.g).abs() < tol, "{topology} φ={phi}: g {} vs {}", s[(0, 1)].re, c.g);
            assert!((-2.0 * s[(0, 1)].im - c.gamma_coll).abs() < tol, "{topology} φ={phi}: Γcoll");
            assert!((-2.0 * s[(0, 0)].im - c.gamma_a).abs() < tol, "{topology} φ={phi}: Γa");
            assert!((-2.0 * s[(1, 1)].im - c.gamma_b).abs() < tol, "{topology} φ={phi}: Γb");
            assert!((s[(0, 0)].re - lamb_shift(&a, &wg, 0, w)).abs() < tol, "{topology} φ={phi}: Δa");
        }
    }
}

#[test]
fn braided_exchange_sign() {
    let (s, _) = block_for(Topology::Braided, PI / 2.0);
    assert!((s[(0, 1)].re - 1.0).abs() < 0.02);
    let (s, _) = block_for(Topology::Braided, 1.5 * PI);
    assert!((s[(0, 1)].re + 1.0).abs() < 0.02);
}

#[test]
fn three_braided_atoms_chain() {
    let wg = Waveguide::dimensionless();
    // a = {0, 2}, b = {1, 4}, c = {3, 5}: each neighbouring pair is braided.
    let lay = |xs: &[f64], l: &str| Layout::from_positions(l, xs, 1.0).unwrap();
    let layouts = [lay(&[0.0, 2.0], "a"), lay(&[1.0, 4.0], "b"), lay(&[3.0, 5.0], "c")];
    let w = PI / 2.0 + 2.0 * PI * 200.0;
    let atoms: Vec<OracleAtom> = layouts.iter().map(|l| OracleAtom::new(l.clone(), w)).collect();
    let basis = ModeBasis::new(&wg, w, 1000.0, 200_000).unwrap();
    let s = build_hamiltonian(&atoms, &wg, &basis).unwrap().effective_block(w).unwrap();
    let c = many_atom_coefficients(&layouts, &wg, w).unwrap();
    for j in 0..3 {
        for l in 0..3 {
            if j != l {
                assert!((s[(j, l)].re - c.exchange[j][l]).abs() < 0.02, "g[{j}][{l}]");
                assert!((-2.0 * s[(j, l)].im - c.collective[j][l]).abs() < 0.02);
            }
        }
        assert!((-2.0 * s[(j, j)].im - c.rates[j]).abs() < 0.02);
    }
}

#[test]
fn random_layout_rates() {
    let wg = Waveguide::dimensionless();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let n = rng.random_range(1..=4);
        let extent = 2e-4;
        let pts: Vec<CouplingPoint> =
            (0..n).map(|_| CouplingPoint::new(rng.random_range(0.0..extent), rng.random_range(0.3..1.5))).collect();
        let layout = Layout::new("r", pts).unwrap();
        let w = rng.random_range(2e4..4e4);
        let expect = relaxation_rate(&layout, &wg, 0, w);
        let atom = OracleAtom::new(layout, w);
        let bound = atom.rate_bound(&wg);
        let fit = oracle_decay(&atom, &wg).unwrap();
        if expect > 0.1 * bound {
            assert!((fit.gamma - expect).abs() < 0.01 * expect, "{} vs {expect}", fit.gamma);
        } else {
            assert!((fit.gamma - expect).abs() < 1e-3 * bound, "{} vs {expect}", fit.gamma);
        }
    }
}

#[test]
fn doubling_modes_changes_rate_little() {
    let wg = Waveguide::dimensionless();
    let atom = OracleAtom::new(Layout::from_positions("s", &[0.0], 1.0).unwrap(), 500.0);
    let rows = convergence_table(&atom, &wg, &[2048, 4096, 8192]).unwrap();
    for w in rows.windows(2) {
        assert!((w[1].gamma - w[0].gamma).abs() < 0.005 * w[1].gamma, "{rows:?}");
    }
}

#[test]
fn swap_period_for_braided_pair() {
    // Weak coupling keeps the retardation correction to g near 1%.
    let gamma = 0.005;
    let wg = Waveguide::with_unit_rate(1.0, gamma).unwrap();
    let (a, b) = Topology::Braided.canonical_pair().unwrap();
    let w = PI / 2.0 + 2.0 * PI * 10.0;
    let atoms = [OracleAtom::new(a, w), OracleAtom::new(b, w)];
    let basis = ModeBasis::new(&wg, w, 60.0, 16_384).unwrap();
    let h = build_hamiltonian(&atoms, &wg, &basis).unwrap();
    let t_end = 0.4 * basis.revival_time();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let traj = h.evolve(&[one, zero], 0.2 / basis.window(), t_end, 20).unwrap();
    let g = extract_coupling(&traj).unwrap();
    let period = PI / g.abs();
    assert!((period - PI / gamma).abs() < 0.02 * PI / gamma, "period {period}");
    assert!(g > 0.0);
}

#[test]
fn delay_equation_matches_oracle() {
    let wg = Waveguide::dimensionless();
    for gamma_tau in [0.5, 1.0, 2.0] {
        let tau = gamma_tau / 2.0;
        let layout = equidistant_layout(2, tau, 1.0).unwrap();
        let w = 500.0 + 0.7 / tau;
        let atom = OracleAtom::new(layout.clone(), w);
        let basis = ModeBasis::for_rate(&wg, w, atom.rate_bound(&wg)).unwrap();
        let h = build_hamiltonian(&[atom], &wg, &basis).unwrap();
        let t_end = 0.4 * basis.revival_time();
        let oracle = h.evolve(&[Complex64::new(1.0, 0.0)], 0.2 / basis.window(), t_end, 10).unwrap();
        let dde = dde_evolve(&layout, &wg, w, t_end, tau / 50.0).unwrap();
        let worst = oracle
            .times
            .iter()
            .zip(&oracle.atoms)
            .map(|(t, c)| (c[0].norm() - dde.amplitude_at(*t).norm()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "Γτ={gamma_tau}: {worst}");
    }
}
