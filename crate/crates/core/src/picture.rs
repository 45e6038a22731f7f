//! Right-hand sides for the propagators, in the lab frame and in the adiabatic
//! interaction picture.
//!
//! The adiabatic picture uses `rho_I = T(t)^dagger rho T(t)` with
//! `T(t) = U_y(-theta(t)) exp(-i phi(t) Jz)` and `phi(t) = int_0^t omega`.
//! There the coherent part reduces to the non-adiabatic coupling
//! `K(t) = -theta'(t) exp(i phi Jz) Jy exp(-i phi Jz)` and every `X(nu)` becomes
//! a single band of the rotated coupling. The phases `exp(i nu phi)` picked up
//! by `X(nu)` cancel inside each dissipator term, so nothing in the picture
//! oscillates faster than `omega(t)` and only with amplitude `theta'(t)`.

use num_complex::Complex64;

use crate::dissipator::{lindblad_rhs, rates, Coupling, NoiseConfig};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, I};
use crate::model::{dynamical_phase, gap, hamiltonian_unchecked, mixing_angle, mixing_rate, ModelParams};
use crate::spin::{build_spin_exact, rotation_y, Component, SpinSet};

/// A linear matrix ODE `dY/dt = F(t, Y)`.
pub trait MatrixOde {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix);
}

/// Sparse square operator as a list of `(row, col, value)` entries.
#[derive(Debug, Clone, Default)]
pub struct SparseOp {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn push(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries.push((row, col, value));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, dim: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `L^dagger L` as another sparse operator.
    fn gram(&self) -> SparseOp {
        let mut out = SparseOp::default();
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                if r1 == r2 {
                    out.push(c1, c2, v1.conj() * v2);
                }
            }
        }
        out
    }

    /// `out += factor * (self y)`
    fn left_mul_acc(&self, factor: Complex64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = y.cols();
        for &(r, c, v) in &self.entries {
            let w = factor * v;
            for k in 0..n {
                let yk = y[(c, k)];
                out[(r, k)] += w * yk;
            }
        }
    }

    /// `out += factor * (y self)`
    fn right_mul_acc(&self, factor: Complex64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = y.rows();
        for &(r, c, v) in &self.entries {
            let w = factor * v;
            for k in 0..n {
                let yk = y[(k, r)];
                out[(k, c)] += w * yk;
            }
        }
    }

    /// `out += rate * (L y L^dagger - 1/2 {L^dagger L, y})`
    fn dissipator_acc(&self, rate: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        for &(r1, c1, v1) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                out[(r1, r2)] += rate * v1 * y[(c1, c2)] * v2.conj();
            }
        }
        let gram = self.gram();
        let half = Complex64::new(-0.5 * rate, 0.0);
        gram.left_mul_acc(half, y, out);
        gram.right_mul_acc(half, y, out);
    }

    /// Embeds a single-site operator into site `site` of `n_sites` qubits.
    fn embed_qubit(&self, site: usize, n_sites: usize) -> SparseOp {
        let shift = n_sites - 1 - site;
        let mut out = SparseOp::default();
        for rest in 0..(1usize << (n_sites - 1)) {
            let low = rest & ((1 << shift) - 1);
            let high = (rest >> shift) << (shift + 1);
            for &(r, c, v) in &self.entries {
                out.push(high | (r << shift) | low, high | (c << shift) | low, v);
            }
        }
        out
    }
}

/// Generator of the interaction-picture dynamics at one instant.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    /// Hamiltonian part `K(t)`.
    pub coherent: SparseOp,
    /// `(rate, L)` pairs.
    pub jumps: Vec<(f64, SparseOp)>,
}

impl Snapshot {
    /// `-i [K, y] + sum rate D[L](y)`
    pub fn apply(&self, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        out.fill_zero();
        self.coherent.left_mul_acc(-I, y, out);
        self.coherent.right_mul_acc(I, y, out);
        for (rate, l) in &self.jumps {
            l.dissipator_acc(*rate, y, out);
        }
    }

    /// `-i K y` for propagators.
    pub fn apply_unitary(&self, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        out.fill_zero();
        self.coherent.left_mul_acc(-I, y, out);
    }
}

/// Coupling written in the eigenbasis, `E^dagger X E`, as a function of theta.
#[derive(Debug, Clone)]
enum RotatedCoupling {
    /// `cos(theta) a + sin(theta) b`.
    Trig { a: ComplexMatrix, b: ComplexMatrix },
    /// `R diag(e^{i theta m}) Y diag(e^{-i theta m}) R^dagger` with `Y = R^dagger X R`.
    Generic {
        r: ComplexMatrix,
        y: ComplexMatrix,
        m: Vec<f64>,
    },
}

impl RotatedCoupling {
    fn new(coupling: &Coupling, s: &SpinSet) -> Result<Self> {
        Ok(match coupling {
            // U_y(theta) Jz U_y(-theta) = cos Jz - sin Jx
            Coupling::Jz => RotatedCoupling::Trig {
                a: s.jz.clone(),
                b: s.jx.scale_real(-1.0),
            },
            // U_y(theta) Jx U_y(-theta) = cos Jx + sin Jz
            Coupling::Jx => RotatedCoupling::Trig {
                a: s.jx.clone(),
                b: s.jz.clone(),
            },
            Coupling::Custom(_) => {
                let x = coupling.operator(s)?;
                let (r, m) = s.jy_eigenbasis();
                RotatedCoupling::Generic {
                    y: r.adjoint().matmul(&x.matmul(r)),
                    r: r.clone(),
                    m: m.to_vec(),
                }
            }
        })
    }

    fn at(&self, theta: f64) -> ComplexMatrix {
        match self {
            RotatedCoupling::Trig { a, b } => {
                let mut out = a.scale_real(theta.cos());
                out.axpy(Complex64::new(theta.sin(), 0.0), b);
                out
            }
            RotatedCoupling::Generic { r, y, m } => {
                let n = m.len();
                let phases: Vec<Complex64> = m.iter().map(|&mk| (I * (mk * theta)).exp()).collect();
                let mut scaled = y.clone();
                for a in 0..n {
                    for b in 0..n {
                        scaled[(a, b)] *= phases[a] * phases[b].conj();
                    }
                }
                r.matmul(&scaled.matmul(&r.adjoint()))
            }
        }
    }
}

/// Master equation of the swept spin-j in the adiabatic interaction picture.
#[derive(Debug, Clone)]
pub struct AdiabaticSpinOde {
    params: ModelParams,
    noise: NoiseConfig,
    spin: SpinSet,
    coupling: RotatedCoupling,
    band_cutoff: f64,
}

impl AdiabaticSpinOde {
    pub fn new(params: &ModelParams, noise: &NoiseConfig) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        let spin = build_spin_exact(params.spin_number()?)?;
        let coupling = RotatedCoupling::new(&noise.coupling, &spin)?;
        let band_cutoff = 1e-15 * noise.coupling.operator(&spin)?.max_abs();
        Ok(Self {
            params: *params,
            noise: noise.clone(),
            spin,
            coupling,
            band_cutoff,
        })
    }

    pub fn spin(&self) -> &SpinSet {
        &self.spin
    }

    /// `T(t) = U_y(-theta) exp(-i phi Jz)`, mapping the picture to the lab frame.
    pub fn frame_transform(&self, t: f64) -> ComplexMatrix {
        let theta = mixing_angle(t, &self.params);
        let phi = dynamical_phase(t, &self.params);
        let mut e = rotation_y(&self.spin, -theta).expect("theta is finite");
        let n = self.spin.dim();
        for b in 0..n {
            let ph = (-I * (self.spin.j.m_of_index(b) * phi)).exp();
            for a in 0..n {
                e[(a, b)] *= ph;
            }
        }
        e
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        let dim = self.spin.dim();
        let j = self.spin.j;
        let theta_dot = mixing_rate(t, &self.params);
        let phi = dynamical_phase(t, &self.params);
        let mut coherent = SparseOp::default();
        // Jy is tridiagonal; entry (a, a+1) picks up exp(i (m_a - m_{a+1}) phi) = exp(i phi)
        let ph = (I * phi).exp();
        for a in 0..dim.saturating_sub(1) {
            let upper = self.spin.jy[(a, a + 1)] * ph * (-theta_dot);
            coherent.push(a, a + 1, upper);
            coherent.push(a + 1, a, upper.conj());
        }

        let mut jumps = Vec::new();
        let active = self.noise.gamma_flat > 0.0
            || (self.noise.include_nu_zero && self.noise.nu_zero_rate > 0.0);
        if active {
            let theta = mixing_angle(t, &self.params);
            let omega = gap(t, &self.params);
            let x_eig = self.coupling.at(theta);
            let two_j = j.twice() as i32;
            for nu in -two_j..=two_j {
                if nu == 0 && !self.noise.include_nu_zero {
                    continue;
                }
                let rate = rates(nu, omega, &self.noise).expect("validated noise");
                if rate == 0.0 {
                    continue;
                }
                let mut l = SparseOp::default();
                for b in 0..dim {
                    let a = b as i64 + i64::from(nu);
                    if (0..dim as i64).contains(&a) {
                        let v = x_eig[(a as usize, b)];
                        if v.norm() > self.band_cutoff {
                            l.push(a as usize, b, v);
                        }
                    }
                }
                if !l.is_empty() {
                    jumps.push((rate, l));
                }
            }
        }
        Snapshot { coherent, jumps }
    }
}

impl MatrixOde for AdiabaticSpinOde {
    fn dim(&self) -> usize {
        self.spin.dim()
    }

    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        self.snapshot(t).apply(y, out);
    }
}

/// Propagator `W` in the adiabatic picture of the noiseless spin-j model.
#[derive(Debug, Clone)]
pub struct AdiabaticUnitaryOde(pub AdiabaticSpinOde);

impl MatrixOde for AdiabaticUnitaryOde {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        self.0.snapshot(t).apply_unitary(y, out);
    }
}

/// The master equation in the Jz basis, straight from [`lindblad_rhs`].
#[derive(Debug, Clone)]
pub struct LabSpinOde {
    params: ModelParams,
    noise: NoiseConfig,
    spin: SpinSet,
}

impl LabSpinOde {
    pub fn new(params: &ModelParams, noise: &NoiseConfig) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        Ok(Self {
            params: *params,
            noise: noise.clone(),
            spin: build_spin_exact(params.spin_number()?)?,
        })
    }
}

impl MatrixOde for LabSpinOde {
    fn dim(&self) -> usize {
        self.spin.dim()
    }

    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        *out = lindblad_rhs(t, y, &self.params, &self.noise, &self.spin)
            .expect("dimensions checked at construction");
    }
}

/// `dU/dt = -i H(t) U` for an arbitrary Hamiltonian.
pub struct LabUnitaryOde<F: Fn(f64) -> ComplexMatrix> {
    pub dim: usize,
    pub hamiltonian: F,
}

impl<F: Fn(f64) -> ComplexMatrix> MatrixOde for LabUnitaryOde<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        let h = (self.hamiltonian)(t);
        crate::linalg::matmul_into(&h, y, out);
        for z in out.as_mut_slice() {
            *z *= -I;
        }
    }
}

/// Hamiltonian of the swept spin as a closure, for [`LabUnitaryOde`].
pub fn majorana_hamiltonian(params: &ModelParams) -> Result<impl Fn(f64) -> ComplexMatrix> {
    params.validate()?;
    let spin = build_spin_exact(params.spin_number()?)?;
    let p = *params;
    Ok(move |t| hamiltonian_unchecked(t, &p, &spin))
}

/// `2j` independent spin-1/2 copies of the swept model, each with its own
/// bath coupled through the matching single-spin component.
#[derive(Debug, Clone)]
pub struct QubitArrayOde {
    n_qubits: usize,
    single: AdiabaticSpinOde,
}

impl QubitArrayOde {
    pub fn new(params: &ModelParams, noise: &NoiseConfig, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("need at least one qubit".into()));
        }
        let component = match &noise.coupling {
            Coupling::Jz => Component::Z,
            Coupling::Jx => Component::X,
            Coupling::Custom(_) => {
                return Err(Error::InvalidParameter(
                    "independent-spin model supports only Jz and Jx couplings".into(),
                ))
            }
        };
        let mut single_noise = noise.clone();
        single_noise.coupling = match component {
            Component::Z => Coupling::Jz,
            _ => Coupling::Jx,
        };
        let single = AdiabaticSpinOde::new(&params.with_j(0.5), &single_noise)?;
        Ok(Self { n_qubits, single })
    }

    /// `T(t)` tensored over all qubits.
    pub fn frame_transform(&self, t: f64) -> ComplexMatrix {
        let t1 = self.single.frame_transform(t);
        let factors = vec![&t1; self.n_qubits];
        crate::linalg::kron_all(factors)
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        let one = self.single.snapshot(t);
        let n = self.n_qubits;
        let mut coherent = SparseOp::default();
        let mut jumps = Vec::new();
        for site in 0..n {
            coherent
                .entries
                .extend(one.coherent.embed_qubit(site, n).entries);
            for (rate, l) in &one.jumps {
                jumps.push((*rate, l.embed_qubit(site, n)));
            }
        }
        Snapshot { coherent, jumps }
    }
}

impl MatrixOde for QubitArrayOde {
    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
        self.snapshot(t).apply(y, out);
    }
}

/// `T rho T^dagger`
pub fn conjugate(t: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    t.matmul(&rho.matmul(&t.adjoint()))
}

/// `T^dagger rho T`
pub fn conjugate_inverse(t: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    t.adjoint().matmul(&rho.matmul(t))
}
