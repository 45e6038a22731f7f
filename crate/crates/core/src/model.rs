//! The linearly swept spin-j Hamiltonian `H(t) = kappa t Jz + Omega sqrt(2) Jx`
//! and its exact instantaneous eigenframe.
//!
//! `H(t) = omega(t) J_theta` with `tan theta = Omega sqrt(2) / (kappa t)` and
//! `omega(t) = sqrt((kappa t)^2 + 2 Omega^2)`. The eigenvectors are the columns
//! of `U_y(-theta) = exp(-i theta Jy)` applied to the Jz basis, with eigenvalue
//! `m omega(t)` for the column carrying label `m`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::spin::{rotation_y, HalfInteger, SpinSet};

/// Physical parameters in units where `Omega` sets the frequency scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Transverse coupling `Omega`.
    pub omega_rabi: f64,
    /// Sweep rate `kappa` (units of `Omega^2`).
    pub kappa: f64,
    /// Half-width of the integration window `[-t0, t0]` (units of `1/Omega`).
    pub t0: f64,
    /// Spin quantum number.
    pub j: f64,
}

impl ModelParams {
    /// Parameters of the transfer-efficiency figures: `kappa / Omega^2 = 0.1`,
    /// `kappa t0 / Omega = 25`.
    pub fn figure(j: f64) -> Self {
        Self {
            omega_rabi: 1.0,
            kappa: 0.1,
            t0: 250.0,
            j,
        }
    }

    pub fn with_j(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_rabi", self.omega_rabi),
            ("kappa", self.kappa),
            ("t0", self.t0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        HalfInteger::spin(self.j)?;
        Ok(())
    }

    pub fn spin_number(&self) -> Result<HalfInteger> {
        HalfInteger::spin(self.j)
    }

    /// The symmetric sweep window `(-t0, t0)`.
    pub fn window(&self) -> (f64, f64) {
        (-self.t0, self.t0)
    }

    /// Transverse field `Omega sqrt(2)`.
    #[inline]
    pub fn transverse(&self) -> f64 {
        self.omega_rabi * SQRT_2
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::figure(1.0)
    }
}

/// Mixing angle `theta(t) = atan2(Omega sqrt 2, kappa t)`, in `(0, pi)`.
pub fn mixing_angle(t: f64, p: &ModelParams) -> f64 {
    p.transverse().atan2(p.kappa * t)
}

/// Instantaneous gap `omega(t) = sqrt((kappa t)^2 + 2 Omega^2)`.
pub fn gap(t: f64, p: &ModelParams) -> f64 {
    (p.kappa * t).hypot(p.transverse())
}

/// `d theta / dt = -sqrt(2) Omega kappa / omega(t)^2`.
pub fn mixing_rate(t: f64, p: &ModelParams) -> f64 {
    let w = gap(t, p);
    -p.transverse() * p.kappa / (w * w)
}

/// Dynamical phase `int_0^t omega(s) ds`, an odd function of `t`.
pub fn dynamical_phase(t: f64, p: &ModelParams) -> f64 {
    let a = p.transverse();
    0.5 * t * gap(t, p) + a * a / (2.0 * p.kappa) * (p.kappa * t / a).asinh()
}

fn check_spin(p: &ModelParams, s: &SpinSet) -> Result<()> {
    let j = HalfInteger::spin(p.j)?;
    if j != s.j {
        return Err(Error::DimensionMismatch(format!(
            "model is spin {j} but operators are spin {}",
            s.j
        )));
    }
    Ok(())
}

/// `H(t) = kappa t Jz + Omega sqrt(2) Jx`
pub fn hamiltonian(t: f64, p: &ModelParams, s: &SpinSet) -> Result<ComplexMatrix> {
    check_spin(p, s)?;
    Ok(hamiltonian_unchecked(t, p, s))
}

pub(crate) fn hamiltonian_unchecked(t: f64, p: &ModelParams, s: &SpinSet) -> ComplexMatrix {
    let mut h = s.jz.scale_real(p.kappa * t);
    h += &s.jx.scale_real(p.transverse());
    h
}

/// Eigenframe of `H(t)` at one instant.
#[derive(Debug, Clone)]
pub struct InstantaneousFrame {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub j: HalfInteger,
    /// Column `i` is `|j, m>_theta` with `m = j - i`.
    pub eigvecs: ComplexMatrix,
}

impl InstantaneousFrame {
    /// Label `m` of eigenvector column `i`.
    pub fn label(&self, i: usize) -> f64 {
        self.j.m_of_index(i)
    }

    /// Energies `m omega(t)` in column order.
    pub fn energies(&self) -> Vec<f64> {
        (0..self.j.dim()).map(|i| self.label(i) * self.omega).collect()
    }

    /// Rank-one projector onto column `i`.
    pub fn projector(&self, i: usize) -> ComplexMatrix {
        let v = self.eigvecs.column(i);
        ComplexMatrix::outer(&v, &v)
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        (0..self.j.dim()).map(|i| self.projector(i)).collect()
    }

    /// `E^dagger A E`: an operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.eigvecs.adjoint().matmul(&a.matmul(&self.eigvecs))
    }

    /// `E A E^dagger`: back to the Jz basis.
    pub fn from_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.eigvecs.matmul(&a.matmul(&self.eigvecs.adjoint()))
    }
}

/// Analytic eigenframe `U_y(-theta(t))` of `H(t)`.
pub fn frame(t: f64, p: &ModelParams, s: &SpinSet) -> Result<InstantaneousFrame> {
    check_spin(p, s)?;
    let theta = mixing_angle(t, p);
    Ok(InstantaneousFrame {
        t,
        theta,
        omega: gap(t, p),
        j: s.j,
        eigvecs: rotation_y(s, -theta)?,
    })
}
