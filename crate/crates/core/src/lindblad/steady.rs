//! Liouvillian superoperator and its null vector.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{CMatrix, LindbladSystem};
use crate::error::{Error, Result};

/// Largest Hilbert-space dimension for the dense steady-state solve
/// (Liouvillian of size 256 × 256).
pub const MAX_STEADY_DIM: usize = 16;

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Liouvillian `L` acting on column-stacked `vec(ρ)`, using
/// `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn liouvillian(system: &LindbladSystem) -> CMatrix {
    let d = system.dim();
    let id = CMatrix::identity(d, d);
    let h = system.hamiltonian();
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * Complex64::new(0.0, -1.0);
    for j in system.jumps() {
        if j.rate == 0.0 {
            continue;
        }
        let x = &j.op;
        let xdx = x.adjoint() * x;
        let term =
            kron(&x.map(|z| z.conj()), x) - (kron(&id, &xdx) + kron(&xdx.transpose(), &id)) * Complex64::new(0.5, 0.0);
        l += term * Complex64::new(j.rate, 0.0);
    }
    l
}

/// Unique stationary state from the null vector of the Liouvillian.
///
/// Errors if the null space is degenerate or the residual `‖Lρ‖` exceeds
/// 1e−10.
pub fn steady_state(system: &LindbladSystem) -> Result<CMatrix> {
    let d = system.dim();
    if d > MAX_STEADY_DIM {
        return Err(Error::invalid(format!(
            "steady state is limited to {MAX_STEADY_DIM} levels (Liouvillian {}x{}), got {d}",
            MAX_STEADY_DIM * MAX_STEADY_DIM,
            MAX_STEADY_DIM * MAX_STEADY_DIM
        )));
    }
    let l = liouvillian(system);
    let svd = l.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let zero_tol = 1e-9 * smax.max(1e-300);
    let null: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= zero_tol).collect();
    if null.len() > 1 {
        let vals: Vec<String> = null.iter().map(|&i| format!("{:e}", sv[i])).collect();
        return Err(Error::invalid(format!(
            "steady state is not unique: null space of dimension {} (singular values {})",
            null.len(),
            vals.join(", ")
        )));
    }
    let imin = (0..sv.len()).min_by(|&a, &b| sv[a].total_cmp(&sv[b])).expect("nonempty");
    let x: DVector<Complex64> = v_t.row(imin).adjoint();
    let mut rho = CMatrix::from_column_slice(d, d, x.as_slice());
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::convergence("null vector has vanishing trace"));
    }
    rho /= tr;
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);

    let residual = (&l * DVector::from_column_slice(rho.as_slice())).norm();
    let tol = 1e-10f64.max(1e-13 * smax);
    if residual > tol {
        return Err(Error::convergence(format!("steady-state residual {residual:e} exceeds {tol:e}")));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::super::{basis_state, JumpOperator};
    use super::*;
    use crate::model::AtomSpec;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn liouvillian_matches_rhs() {
        let atom = AtomSpec::new(vec![0.0, 1.0, 2.5]).unwrap();
        let h = CMatrix::from_fn(3, 3, |i, j| if i == j { c(atom.energy(i)) } else { c(0.2) });
        let jumps =
            vec![JumpOperator { op: atom.lowering(0), rate: 0.7 }, JumpOperator { op: atom.lowering(1), rate: 1.3 }];
        let sys = LindbladSystem::new(h, jumps).unwrap();
        let rho = CMatrix::from_fn(3, 3, |i, j| Complex64::new(0.1 * (i + j) as f64, 0.05 * (i as f64 - j as f64)));
        let direct = sys.rhs(&rho);
        let via_l = liouvillian(&sys) * DVector::from_column_slice(rho.as_slice());
        let diff = (DVector::from_column_slice(direct.as_slice()) - via_l).norm();
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn decaying_atom_relaxes_to_ground() {
        let atom = AtomSpec::two_level(3.0).unwrap();
        let h = CMatrix::from_fn(2, 2, |i, j| if i == j { c(atom.energy(i)) } else { c(0.0) });
        let sys = LindbladSystem::new(h, vec![JumpOperator { op: atom.lowering(0), rate: 1.0 }]).unwrap();
        let rho = steady_state(&sys).unwrap();
        assert!((rho - basis_state(2, 0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_null_space_reported() {
        let sys = LindbladSystem::new(CMatrix::zeros(2, 2), vec![]).unwrap();
        let err = steady_state(&sys).unwrap_err();
        assert!(err.to_string().contains("not unique"), "{err}");
    }

    #[test]
    fn dimension_cap() {
        let sys = LindbladSystem::new(CMatrix::zeros(17, 17), vec![]).unwrap();
        assert!(steady_state(&sys).is_err());
    }
}
