//! Density matrices, qubit Bloch vectors and the trace distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pauli, tol, ComplexMatrix, C64};

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates with the default tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, tol::HERM, tol::TRACE, tol::PSD)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol_herm: f64, tol_trace: f64, tol_psd: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotAState(format!(
                "{}x{} matrix is not square",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let defect = matrix.hermitian_defect();
        if defect > tol_herm {
            return Err(Error::NotAState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol_trace {
            return Err(Error::NotAState(format!("trace {tr} != 1")));
        }
        let matrix = matrix.hermitian_part();
        let min = linalg::min_eigenvalue(&matrix);
        if min < -tol_psd {
            return Err(Error::NotAState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NotAState("zero vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self {
            matrix: ComplexMatrix::outer(&v, &v),
        })
    }

    /// `|k><k|` in dimension `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        Self {
            matrix: ComplexMatrix::unit(n, k, k),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(n).scale_re(1.0 / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigs(&self.matrix, f64::INFINITY)
            .map(|e| e.values)
            .unwrap_or_default()
    }
}

/// Bloch coordinates of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl BlochVector {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn norm(&self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        Self::new(self.x1 - other.x1, self.x2 - other.x2, self.x3 - other.x3).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }
}

/// `ρ = ½(I + Σ x_k σ_k)`
pub fn bloch_to_state(v: BlochVector) -> Result<DensityMatrix> {
    let r = v.norm();
    if r > 1.0 + tol::PSD {
        return Err(Error::NotAState(format!("Bloch vector length {r} exceeds 1")));
    }
    let [_, sx, sy, sz] = pauli::all();
    let m = &(&(&ComplexMatrix::identity(2) + &sx.scale_re(v.x1)) + &sy.scale_re(v.x2)) + &sz.scale_re(v.x3);
    Ok(DensityMatrix {
        matrix: m.scale_re(0.5),
    })
}

/// `x_k = Tr(ρ σ_k)`
pub fn state_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::Dimension(format!("Bloch vector needs a qubit, got dim {}", rho.dim())));
    }
    Ok(bloch_of(rho.matrix()))
}

/// Bloch coordinates of any 2x2 matrix (no validation).
pub fn bloch_of(m: &ComplexMatrix) -> BlochVector {
    let [_, sx, sy, sz] = pauli::all();
    BlochVector::new(
        (m * &sx).trace().re,
        (m * &sy).trace().re,
        (m * &sz).trace().re,
    )
}

/// `D[ρ, σ] = ½ ||ρ - σ||_1`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "trace distance between dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(0.5 * linalg::trace_norm(&(rho.matrix() - sigma.matrix()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn origin_is_maximally_mixed() {
        let rho = bloch_to_state(BlochVector::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(rho, DensityMatrix::maximally_mixed(2));
    }

    #[test]
    fn north_pole_is_first_basis_state() {
        let rho = bloch_to_state(BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(rho, DensityMatrix::basis(2, 0));
    }

    #[test]
    fn eigenvalues_are_half_one_plus_minus_length() {
        let rho = bloch_to_state(BlochVector::new(0.6, 0.0, 0.0)).unwrap();
        let ev = rho.eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn outside_ball_rejected() {
        assert!(matches!(
            bloch_to_state(BlochVector::new(0.8, 0.8, 0.0)),
            Err(Error::NotAState(_))
        ));
    }

    #[test]
    fn validation_catches_each_failure() {
        let not_herm = ComplexMatrix::from_real(&[&[0.5, 0.2], &[0.0, 0.5]]);
        assert!(DensityMatrix::new(not_herm).is_err());
        let bad_trace = ComplexMatrix::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = ComplexMatrix::from_real(&[&[1.2, 0.0], &[0.0, -0.2]]);
        assert!(DensityMatrix::new(negative).is_err());
    }

    #[test]
    fn trace_norm_of_states_is_one() {
        for v in [(0.1, 0.2, 0.3), (0.0, 0.0, 1.0), (0.6, -0.8, 0.0)] {
            let rho = bloch_to_state(BlochVector::new(v.0, v.1, v.2)).unwrap();
            assert_abs_diff_eq!(linalg::trace_norm(rho.matrix()).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn trace_distance_cases() {
        let a = DensityMatrix::basis(3, 0);
        let b = DensityMatrix::basis(3, 1);
        assert_abs_diff_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-15);

        let x = BlochVector::new(0.3, -0.2, 0.5);
        let y = BlochVector::new(-0.1, 0.4, 0.1);
        let d = trace_distance(&bloch_to_state(x).unwrap(), &bloch_to_state(y).unwrap()).unwrap();
        assert_abs_diff_eq!(d, 0.5 * x.distance(&y), epsilon = 1e-14);
    }

    #[test]
    fn trace_distance_dimension_mismatch() {
        let a = DensityMatrix::basis(2, 0);
        let b = DensityMatrix::basis(3, 0);
        assert!(matches!(trace_distance(&a, &b), Err(Error::Dimension(_))));
    }
}
