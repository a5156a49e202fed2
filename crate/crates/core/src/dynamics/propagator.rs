use super::{DynamicsError, DEGENERACY_GAP};
use crate::model::ComplexMatrix;
use crate::spectral::dense_eigen;
use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat};

/// `ψ(t) = Σ_m c_m e^{-iE_m t} r_m` with `c = R⁻¹ ψ(0)`.
pub struct SpectralPropagator {
    energies: Vec<c64>,
    right: Mat<c64>,
    coeffs: Vec<c64>,
    condition: f64,
}

impl SpectralPropagator {
    pub fn new(h: &ComplexMatrix, psi0: &[c64]) -> Result<Self, DynamicsError> {
        let (energies, right) = dense_eigen(h)?;
        let inverse = right.partial_piv_lu().inverse();
        let dim = psi0.len();
        let coeffs = (0..dim)
            .map(|m| (0..dim).map(|i| inverse[(m, i)] * psi0[i]).sum())
            .collect();
        let condition = right.norm_l2() * inverse.norm_l2();
        Ok(Self { energies, right, coeffs, condition })
    }

    pub fn energies(&self) -> &[c64] {
        &self.energies
    }

    pub fn coefficients(&self) -> &[c64] {
        &self.coeffs
    }

    /// Frobenius-norm condition number of the right eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn state_at(&self, t: f64) -> Vec<c64> {
        let dim = self.right.nrows();
        let phases: Vec<c64> = self
            .energies
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * (c64::new(0.0, -t) * e).exp())
            .collect();
        (0..dim)
            .map(|i| phases.iter().enumerate().map(|(m, p)| self.right[(i, m)] * p).sum())
            .collect()
    }

    /// `2 V_j ∫_0^∞ |ψ_j|² dt` for every flat site, zero where `V_j = 0`.
    pub fn decay_integrals(&self, losses: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        self.integrals(losses, None)
    }

    /// `2 V_j ∫_0^T |ψ_j|² dt`.
    pub fn decay_integrals_until(&self, losses: &[f64], t: f64) -> Result<Vec<f64>, DynamicsError> {
        self.integrals(losses, Some(t))
    }

    fn integrals(&self, losses: &[f64], horizon: Option<f64>) -> Result<Vec<f64>, DynamicsError> {
        let dim = self.energies.len();
        let mut gram = Mat::<c64>::zeros(dim, dim);
        for m in 0..dim {
            for n in 0..dim {
                let weight = self.coeffs[m] * self.coeffs[n].conj();
                let w = self.energies[m] - self.energies[n].conj();
                if w.norm() < DEGENERACY_GAP {
                    match horizon {
                        Some(t) => gram[(m, n)] = weight * t,
                        None if weight.norm() > 1e-14 => {
                            return Err(DynamicsError::DegeneracyHazard { gap: w.norm() })
                        }
                        None => {}
                    }
                    continue;
                }
                let iw = c64::new(0.0, 1.0) * w;
                let window = match horizon {
                    Some(t) => c64::new(1.0, 0.0) - (-iw * t).exp(),
                    None => c64::new(1.0, 0.0),
                };
                gram[(m, n)] = weight * window / iw;
            }
        }
        let lossy: Vec<usize> = (0..dim).filter(|&i| losses[i] > 0.0).collect();
        let rows = Mat::from_fn(lossy.len(), dim, |r, m| self.right[(lossy[r], m)]);
        let mixed = &rows * &gram;
        let mut out = vec![0.0; dim];
        for (r, &i) in lossy.iter().enumerate() {
            let x: c64 = (0..dim).map(|n| mixed[(r, n)] * self.right[(i, n)].conj()).sum();
            out[i] = 2.0 * losses[i] * x.re;
        }
        Ok(out)
    }
}
