use crate::error::{Error, Result};
use crate::C64;

/// 2×2 density matrix in the basis `(|g⟩, |e⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub [[C64; 2]; 2]);

impl DensityMatrix {
    pub fn ground() -> Self {
        Self::from_parts(1.0, 0.0, C64::new(0.0, 0.0))
    }

    pub fn excited() -> Self {
        Self::from_parts(0.0, 1.0, C64::new(0.0, 0.0))
    }

    /// Build from populations and the `⟨e|ρ|g⟩` coherence.
    pub fn from_parts(p_g: f64, p_e: f64, eg: C64) -> Self {
        DensityMatrix([
            [C64::new(p_g, 0.0), eg.conj()],
            [eg, C64::new(p_e, 0.0)],
        ])
    }

    pub(crate) fn from_flat(v: &[C64; 4]) -> Self {
        DensityMatrix([[v[0], v[1]], [v[2], v[3]]])
    }

    /// `|ψ⟩⟨ψ|`.
    pub(crate) fn from_state_vector(psi: [C64; 2]) -> Self {
        DensityMatrix([
            [psi[0] * psi[0].conj(), psi[0] * psi[1].conj()],
            [psi[1] * psi[0].conj(), psi[1] * psi[1].conj()],
        ])
    }

    /// A state vector of a pure ρ, up to global phase: the column with the
    /// larger diagonal element, normalized.
    pub(crate) fn state_vector(&self) -> [C64; 2] {
        let j = if self.0[0][0].re >= self.0[1][1].re { 0 } else { 1 };
        let s = self.0[j][j].re.sqrt();
        [self.0[0][j] / s, self.0[1][j] / s]
    }

    pub(crate) fn flat(&self) -> [C64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn p_g(&self) -> f64 {
        self.0[0][0].re
    }

    pub fn p_e(&self) -> f64 {
        self.0[1][1].re
    }

    /// `⟨e|ρ|g⟩`.
    pub fn coherence(&self) -> C64 {
        self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let off = (self.0[0][1] - self.0[1][0].conj()).norm();
        off.max(self.0[0][0].im.abs()).max(self.0[1][1].im.abs())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[0][0] + m[0][1] * m[1][0] + m[1][0] * m[0][1] + m[1][1] * m[1][1]).re
    }

    /// Population of the (real) state vector `v`: `⟨v|ρ|v⟩`.
    pub fn population_of(&self, v: [f64; 2]) -> f64 {
        let m = &self.0;
        (m[0][0] * v[0] * v[0] + (m[0][1] + m[1][0]) * v[0] * v[1] + m[1][1] * v[1] * v[1]).re
    }

    /// Check Hermiticity, unit trace and positivity within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::InvariantViolation { t_ps: f64::NAN, what: "hermiticity error", value: herm });
        }
        let tr = (self.trace() - 1.0).norm();
        if tr > tol {
            return Err(Error::InvariantViolation { t_ps: f64::NAN, what: "trace error", value: tr });
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvariantViolation { t_ps: f64::NAN, what: "min eigenvalue", value: min });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_states() {
        let g = DensityMatrix::ground();
        assert_eq!(g.p_g(), 1.0);
        assert_eq!(g.purity(), 1.0);
        assert_eq!(g.eigenvalues(), [0.0, 1.0]);
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::from_parts(0.5, 0.5, C64::new(0.5, 0.0));
        assert!((plus.purity() - 1.0).abs() < 1e-15);
        assert!((plus.population_of([s, s]) - 1.0).abs() < 1e-15);
        assert!(plus.population_of([s, -s]).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_physical() {
        let bad = DensityMatrix::from_parts(0.5, 0.5, C64::new(0.7, 0.0));
        assert!(matches!(bad.validate(1e-9), Err(Error::InvariantViolation { what: "min eigenvalue", .. })));
        let bad = DensityMatrix::from_parts(0.6, 0.5, C64::new(0.0, 0.0));
        assert!(bad.validate(1e-9).is_err());
        assert!(DensityMatrix::excited().validate(1e-12).is_ok());
    }
}
