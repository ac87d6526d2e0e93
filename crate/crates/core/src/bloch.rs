//! Optical Bloch equations for ⟨σ₋⟩, ⟨σ₊⟩, ⟨σ_z⟩ in the laser frame.
//!
//! Population decay runs at Γ = 2πγ₀, coherence decay at γ⊥ = πγ, so pure
//! dephasing is the excess of γ over γ₀.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::physics::MoleculeParams;
use crate::units::angular;

pub(crate) type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Linear system dX/dt = M X + b for X = (⟨σ₋⟩, ⟨σ₊⟩, ⟨σ_z⟩), rates in rad/µs.
#[derive(Debug, Clone)]
pub(crate) struct BlochSystem {
    pub m: Matrix3<C64>,
    pub b: Vector3<C64>,
}

impl BlochSystem {
    /// `rabi` and `detuning` are cyclic MHz.
    pub fn new(mol: &MoleculeParams, rabi: f64, detuning: f64) -> Self {
        let gpop = angular(mol.gamma0);
        let gcoh = angular(mol.gamma) / 2.0;
        let om = angular(rabi);
        let d = angular(detuning);
        let re = |x: f64| C64::new(x, 0.0);
        #[rustfmt::skip]
        let m = Matrix3::new(
            re(-gcoh) - I * d, re(0.0),           I * (om / 2.0),
            re(0.0),           re(-gcoh) + I * d, -I * (om / 2.0),
            I * om,            -I * om,           re(-gpop),
        );
        Self {
            m,
            b: Vector3::new(re(0.0), re(0.0), re(-gpop)),
        }
    }

    /// Stationary (⟨σ₋⟩, ⟨σ₊⟩, ⟨σ_z⟩).
    pub fn steady_state(&self) -> Vector3<C64> {
        self.m
            .lu()
            .solve(&(-self.b))
            .expect("Bloch matrix is non-singular for positive decay rates")
    }

    /// ∫₀^∞ ⟨δσ₊(τ) δσ₋(0)⟩ e^{iωτ} dτ at angular frequency `omega` (rad/µs).
    pub fn fluctuation_transform(&self, steady: &Vector3<C64>, omega: f64) -> C64 {
        let s = steady[0];
        let sz = steady[2].re;
        let excited = 0.5 * (1.0 + sz);
        let x0 = Vector3::new(-s * s, C64::new(excited - s.norm_sqr(), 0.0), -s * (1.0 + sz));
        let shifted = self.m + Matrix3::from_diagonal_element(I * omega);
        let laplace = shifted
            .lu()
            .solve(&x0)
            .expect("shifted Bloch matrix is non-singular");
        -laplace[1]
    }
}
