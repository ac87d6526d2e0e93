//! Brute-force two-level master equation in the rotating frame, integrated
//! with fixed-step RK4. Basis index 0 is the ground state, 1 the excited state.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use std::f64::consts::PI;

pub type M2 = [[C; 2]; 2];

const Z: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

fn zero() -> M2 {
    [[Z; 2]; 2]
}

fn add(a: &M2, b: &M2, k: f64) -> M2 {
    let mut out = zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] + b[i][j] * k;
        }
    }
    out
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Liouvillian with H = δ σ₊σ₋ + (Ω/2)(σ₊ + σ₋), spontaneous decay Γ and
/// pure dephasing through a σ_z jump operator. Rates in rad/µs.
pub struct Lindblad {
    pub decay: f64,
    pub dephasing: f64,
    pub rabi: f64,
    pub detuning: f64,
}

impl Lindblad {
    /// Linewidths (FWHM) and Rabi frequency in cyclic MHz.
    pub fn new(gamma0: f64, gamma: f64, rabi: f64, detuning: f64) -> Self {
        let decay = 2.0 * PI * gamma0;
        let coherence = PI * gamma;
        Self {
            decay,
            dephasing: (coherence - decay / 2.0) / 2.0,
            rabi: 2.0 * PI * rabi,
            detuning: 2.0 * PI * detuning,
        }
    }

    fn hamiltonian(&self) -> M2 {
        let h = C::new(self.rabi / 2.0, 0.0);
        [[Z, h], [h, C::new(self.detuning, 0.0)]]
    }

    pub fn apply(&self, x: &M2) -> M2 {
        let h = self.hamiltonian();
        let hx = mul(&h, x);
        let xh = mul(x, &h);
        let mut out = zero();
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = -I * (hx[i][j] - xh[i][j]);
            }
        }
        // Γ(σ₋ x σ₊ − ½{σ₊σ₋, x}); σ₋ = |0⟩⟨1|
        let g = self.decay;
        out[0][0] += x[1][1] * g;
        out[1][1] -= x[1][1] * g;
        out[0][1] -= x[0][1] * (g / 2.0);
        out[1][0] -= x[1][0] * (g / 2.0);
        // γ_d(σ_z x σ_z − x) flips the sign of the coherences
        out[0][1] -= x[0][1] * (2.0 * self.dephasing);
        out[1][0] -= x[1][0] * (2.0 * self.dephasing);
        out
    }

    fn fastest_rate(&self) -> f64 {
        self.rabi.abs().max(self.detuning.abs()).max(self.decay)
    }

    /// Slowest decay of any transient.
    fn slowest_rate(&self) -> f64 {
        self.decay / 2.0
    }

    /// RK4 step of dX/dt = (L + s)X.
    fn step(&self, x: &M2, dt: f64, shift: C) -> M2 {
        let f = |y: &M2| {
            let mut d = self.apply(y);
            for row in d.iter_mut().zip(y) {
                for (a, b) in row.0.iter_mut().zip(row.1) {
                    *a += shift * b;
                }
            }
            d
        };
        let k1 = f(x);
        let k2 = f(&add(x, &k1, dt / 2.0));
        let k3 = f(&add(x, &k2, dt / 2.0));
        let k4 = f(&add(x, &k3, dt));
        let mut out = *x;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += (k1[i][j] + k2[i][j] * 2.0 + k3[i][j] * 2.0 + k4[i][j]) * (dt / 6.0);
            }
        }
        out
    }

    pub fn ground() -> M2 {
        let mut r = zero();
        r[0][0] = C::new(1.0, 0.0);
        r
    }

    /// Density matrix after evolving from the ground state for 40 slowest decay times.
    pub fn steady_state(&self) -> M2 {
        let dt = 0.01 / self.fastest_rate();
        let t_end = 40.0 / self.slowest_rate();
        let n = (t_end / dt).ceil() as usize;
        let mut x = Self::ground();
        for _ in 0..n {
            x = self.step(&x, dt, Z);
        }
        x
    }

    /// g²(τ) by quantum regression: excited population after a photon
    /// detection (ground-state start) over its stationary value. `taus_ns`
    /// must be sorted and non-negative.
    pub fn g2(&self, taus_ns: &[f64]) -> Vec<f64> {
        let p_inf = self.steady_state()[1][1].re;
        let dt_max = 0.005 / self.fastest_rate();
        let mut x = Self::ground();
        let mut t = 0.0;
        taus_ns
            .iter()
            .map(|&tau_ns| {
                let target = tau_ns * 1e-3;
                let span = target - t;
                if span > 0.0 {
                    let n = (span / dt_max).ceil() as usize;
                    let dt = span / n as f64;
                    for _ in 0..n {
                        x = self.step(&x, dt, Z);
                    }
                    t = target;
                }
                x[1][1].re / p_inf
            })
            .collect()
    }

    /// 4·Re ∫₀^∞ ⟨δσ₊(τ) δσ₋(0)⟩ e^{iωτ} dτ at emission detuning `nu` (MHz),
    /// integrated in the time domain with an accumulator.
    pub fn mollow_density(&self, steady: &M2, nu: f64) -> f64 {
        let omega = 2.0 * PI * nu;
        let s_minus = steady[1][0];
        // δX(0) = σ₋ρ − ⟨σ₋⟩ρ
        let mut y = zero();
        for j in 0..2 {
            y[0][j] = steady[1][j] - s_minus * steady[0][j];
            y[1][j] = -s_minus * steady[1][j];
        }
        let dt = 0.01 / self.fastest_rate().max(omega.abs());
        let t_end = 36.0 / self.slowest_rate();
        let n = (t_end / dt).ceil() as usize;
        let shift = C::new(0.0, omega);
        // Simpson-weighted accumulation of Tr[σ₊ Y] = Y[0][1] on the RK4 grid
        let mut acc = C::new(0.0, 0.0);
        let mut prev = y[0][1];
        for _ in 0..n {
            let mid = self.step(&y, dt / 2.0, shift);
            let next = self.step(&mid, dt / 2.0, shift);
            acc += (prev + mid[0][1] * 4.0 + next[0][1]) * (dt / 6.0);
            prev = next[0][1];
            y = next;
        }
        4.0 * acc.re
    }
}
