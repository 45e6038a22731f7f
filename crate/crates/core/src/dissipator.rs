//! Davies-Spohn generator for the swept spin: jump operators that connect
//! instantaneous eigenspaces, thermal rates for a flat bath spectrum, and the
//! full master-equation right-hand side.
//!
//! With `H(t) Pi_m = m omega(t) Pi_m`, the coupling operator splits into
//! `X(nu) = sum_{m' - m = nu} Pi_m X Pi_m'`, which lowers the adiabatic label by
//! `nu`. Emission (`nu > 0`) happens at rate `gamma (N(nu omega, T) + 1)` and
//! absorption (`nu < 0`) at `gamma N(|nu| omega, T)`, with the Bose occupation
//! `N(w, T) = 1 / (exp(w / T) - 1)`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, I};
use crate::model::{frame, hamiltonian, InstantaneousFrame, ModelParams};
use crate::spin::SpinSet;

/// System operator coupled to the bath.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Longitudinal coupling, dephasing-dominated.
    Jz,
    /// Transverse coupling, dissipation-dominated.
    Jx,
    /// Any Hermitian operator on the spin-j space.
    Custom(ComplexMatrix),
}

impl Coupling {
    /// Channel tag used in CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            Coupling::Jz => "Jz",
            Coupling::Jx => "Jx",
            Coupling::Custom(_) => "custom",
        }
    }

    /// The coupling operator for a given spin.
    pub fn operator(&self, s: &SpinSet) -> Result<ComplexMatrix> {
        match self {
            Coupling::Jz => Ok(s.jz.clone()),
            Coupling::Jx => Ok(s.jx.clone()),
            Coupling::Custom(m) => {
                if m.rows() != s.dim() || m.cols() != s.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "custom coupling is {}x{} but spin {} needs {}x{}",
                        m.rows(),
                        m.cols(),
                        s.j,
                        s.dim(),
                        s.dim()
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Jz" | "jz" | "JZ" => Ok(Coupling::Jz),
            "Jx" | "jx" | "JX" => Ok(Coupling::Jx),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel '{other}' (expected Jz or Jx)"
            ))),
        }
    }
}

/// Bath coupling, flat rate and temperature (all in units of `Omega`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub coupling: Coupling,
    pub gamma_flat: f64,
    /// `k_B T`.
    pub temperature: f64,
    /// Keep the `nu = 0` term (pure dephasing in the instantaneous basis).
    pub include_nu_zero: bool,
    /// Rate of the `nu = 0` term when it is included.
    pub nu_zero_rate: f64,
}

impl NoiseConfig {
    pub fn new(coupling: Coupling, gamma_flat: f64, temperature: f64) -> Self {
        Self {
            coupling,
            gamma_flat,
            temperature,
            include_nu_zero: false,
            nu_zero_rate: 0.0,
        }
    }

    /// No bath at all.
    pub fn noiseless() -> Self {
        Self::new(Coupling::Jz, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_flat.is_finite() && self.gamma_flat >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma_flat
            )));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.nu_zero_rate.is_finite() && self.nu_zero_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nu = 0 rate must be finite and >= 0, got {}",
                self.nu_zero_rate
            )));
        }
        if let Coupling::Custom(m) = &self.coupling {
            if !m.is_hermitian(1e-10) {
                return Err(Error::InvalidParameter(
                    "custom coupling operator must be Hermitian".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One jump operator `X(nu)` with its rate.
#[derive(Debug, Clone)]
pub struct LindbladTerm {
    pub nu: i32,
    pub x_nu: ComplexMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LindbladTerms {
    pub terms: Vec<LindbladTerm>,
}

impl LindbladTerms {
    pub fn get(&self, nu: i32) -> Option<&LindbladTerm> {
        self.terms.iter().find(|t| t.nu == nu)
    }

    /// `sum_nu X(nu)` over the stored terms.
    pub fn sum(&self, dim: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for t in &self.terms {
            acc += &t.x_nu;
        }
        acc
    }
}

/// Band `nu` of an operator written in the eigenbasis (descending labels):
/// the entries `(a, b)` with `a - b = nu`, i.e. `m_b - m_a = nu`.
pub(crate) fn eigenbasis_band(x_eig: &ComplexMatrix, nu: i32) -> ComplexMatrix {
    let n = x_eig.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for b in 0..n {
        let a = b as i64 + i64::from(nu);
        if (0..n as i64).contains(&a) {
            out[(a as usize, b)] = x_eig[(a as usize, b)];
        }
    }
    out
}

/// Splits the coupling into `X(nu)` blocks in the given frame. Rates are left at
/// zero; see [`lindblad_terms`].
pub fn jump_operators(f: &InstantaneousFrame, n: &NoiseConfig, s: &SpinSet) -> Result<LindbladTerms> {
    if f.j != s.j {
        return Err(Error::DimensionMismatch(format!(
            "frame is spin {} but operators are spin {}",
            f.j, s.j
        )));
    }
    let x = n.coupling.operator(s)?;
    let x_eig = f.to_eigenbasis(&x);
    let two_j = s.j.twice() as i32;
    let mut terms = Vec::new();
    for nu in -two_j..=two_j {
        if nu == 0 && !n.include_nu_zero {
            continue;
        }
        let band = eigenbasis_band(&x_eig, nu);
        terms.push(LindbladTerm {
            nu,
            x_nu: f.from_eigenbasis(&band),
            rate: 0.0,
        });
    }
    Ok(LindbladTerms { terms })
}

/// Jump operators with their rates at the frame's instantaneous gap.
pub fn lindblad_terms(f: &InstantaneousFrame, n: &NoiseConfig, s: &SpinSet) -> Result<LindbladTerms> {
    let mut terms = jump_operators(f, n, s)?;
    for t in &mut terms.terms {
        t.rate = rates(t.nu, f.omega, n)?;
    }
    Ok(terms)
}

/// Mean thermal occupation `1 / (exp(nu_bar / T) - 1)`; zero at `T = 0`.
pub fn bose_occupation(nu_bar: f64, temperature: f64) -> Result<f64> {
    if !(nu_bar.is_finite() && nu_bar > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Bose occupation needs a positive frequency, got {nu_bar}"
        )));
    }
    if temperature.is_nan() || temperature < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (nu_bar / temperature).exp_m1())
}

/// Rate of the `X(nu)` channel at gap `omega_gap`.
pub fn rates(nu: i32, omega_gap: f64, n: &NoiseConfig) -> Result<f64> {
    if nu == 0 {
        if !n.include_nu_zero {
            return Err(Error::InvalidParameter(
                "the nu = 0 channel is disabled in this noise configuration".into(),
            ));
        }
        return Ok(n.nu_zero_rate);
    }
    if n.gamma_flat == 0.0 {
        return Ok(0.0);
    }
    let occupation = bose_occupation(f64::from(nu.unsigned_abs()) * omega_gap, n.temperature)?;
    Ok(if nu > 0 {
        n.gamma_flat * (occupation + 1.0)
    } else {
        n.gamma_flat * occupation
    })
}

/// `L rho L^dagger - 1/2 {L^dagger L, rho}`
pub fn dissipator(l: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ldag = l.adjoint();
    let ldl = ldag.matmul(l);
    let mut out = l.matmul(&rho.matmul(&ldag));
    out.axpy(Complex64::new(-0.5, 0.0), &ldl.anticommutator(rho));
    out
}

/// `-i [H(t), rho] + sum_nu gamma(nu) D[X(nu)](rho)` in the Jz basis.
pub fn lindblad_rhs(
    t: f64,
    rho: &ComplexMatrix,
    p: &ModelParams,
    n: &NoiseConfig,
    s: &SpinSet,
) -> Result<ComplexMatrix> {
    if rho.rows() != s.dim() || rho.cols() != s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density matrix is {}x{} but spin {} needs {}x{}",
            rho.rows(),
            rho.cols(),
            s.j,
            s.dim(),
            s.dim()
        )));
    }
    let h = hamiltonian(t, p, s)?;
    let mut out = h.commutator(rho).scale(-I);
    if n.gamma_flat > 0.0 || (n.include_nu_zero && n.nu_zero_rate > 0.0) {
        let f = frame(t, p, s)?;
        for term in lindblad_terms(&f, n, s)?.terms {
            if term.rate > 0.0 {
                out.axpy(Complex64::new(term.rate, 0.0), &dissipator(&term.x_nu, rho));
            }
        }
    }
    Ok(out)
}
