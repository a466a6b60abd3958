//! Dense master-equation integrator for small systems.
//!
//! dρ/dt = −i[H, ρ] + Σ_k (C_k ρ C_k† − ½{C_k†C_k, ρ}) is vectorized by
//! column stacking, vec(AρB) = (Bᵀ ⊗ A) vec(ρ), and propagated with the
//! matrix exponential of the Liouvillian. Intended as an oracle for the
//! Monte Carlo engine at spin dimension 4 and small Fock truncations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantum::C64;

/// Largest Hilbert dimension accepted (Liouvillian of size 1024²).
pub const MAX_DIM: usize = 32;

#[derive(Clone, Debug)]
pub struct Lindblad {
    dim: usize,
    liouvillian: DMatrix<C64>,
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

impl Lindblad {
    pub fn new(h: &DMatrix<C64>, collapse: &[DMatrix<C64>]) -> Result<Self> {
        let n = h.nrows();
        if n == 0 || h.ncols() != n || n > MAX_DIM {
            return Err(Error::Dimension(format!(
                "Hamiltonian must be square with dimension in 1..={MAX_DIM}, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if let Some(c) = collapse.iter().find(|c| c.shape() != (n, n)) {
            return Err(Error::Dimension(format!(
                "collapse operator {}x{} does not match dimension {n}",
                c.nrows(),
                c.ncols()
            )));
        }
        let id = DMatrix::<C64>::identity(n, n);
        let minus_i = C64::new(0.0, -1.0);
        let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * minus_i;
        for c in collapse {
            let cdc = c.adjoint() * c;
            l += kron(&c.map(|z| z.conj()), c);
            l -= kron(&id, &cdc) * C64::from(0.5);
            l -= kron(&cdc.transpose(), &id) * C64::from(0.5);
        }
        Ok(Lindblad {
            dim: n,
            liouvillian: l,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn liouvillian(&self) -> &DMatrix<C64> {
        &self.liouvillian
    }

    /// ρ(t) for each requested time (non-negative, any order).
    pub fn evolve(&self, rho0: &DMatrix<C64>, times: &[f64]) -> Result<Vec<DMatrix<C64>>> {
        let n = self.dim;
        if rho0.shape() != (n, n) {
            return Err(Error::Dimension(format!("density matrix must be {n}x{n}")));
        }
        let v0 = DVector::from_column_slice(rho0.as_slice());
        times
            .iter()
            .map(|&t| {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "time",
                        reason: format!("must be finite and non-negative, got {t}"),
                    });
                }
                let v = (&self.liouvillian * C64::from(t)).exp() * &v0;
                Ok(DMatrix::from_column_slice(n, n, v.as_slice()))
            })
            .collect()
    }
}

/// |ψ⟩⟨ψ|
pub fn projector(psi: &DVector<C64>) -> DMatrix<C64> {
    psi * psi.adjoint()
}

/// ⟨ψ|ρ|ψ⟩
pub fn population(rho: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

/// Tr(ρ A)
pub fn expectation(rho: &DMatrix<C64>, a: &DMatrix<C64>) -> C64 {
    (rho * a).trace()
}
