use nalgebra::DMatrix;

use super::{Factor, StateVector, C64};
use crate::{Error, Result};

/// A density matrix over an ordered list of factors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    factors: Vec<Factor>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub(crate) fn from_parts(factors: Vec<Factor>, matrix: DMatrix<C64>) -> Self {
        DensityMatrix { factors, matrix }
    }

    /// `|s⟩⟨s|`.
    pub fn projector(s: &StateVector) -> Self {
        let v = DMatrix::from_column_slice(s.dim(), 1, s.amps());
        DensityMatrix {
            factors: s.factors().to_vec(),
            matrix: &v * v.adjoint(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `⟨i|ρ|j⟩`.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::Invariant(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Invariant(format!("density matrix trace is {tr}")));
        }
        if let Some(&min) = self.eigenvalues().first() {
            if min < -1e-10 {
                return Err(Error::Invariant(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }
}
