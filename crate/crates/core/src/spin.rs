//! Angular momentum algebra for a single spin-j and for 2j spin-1/2 particles.
//!
//! Basis ordering is descending m throughout: index `i` carries `m = j - i`,
//! so `|j, j>` is the first basis vector. For qubits `|up>` is index 0 and the
//! first tensor factor varies slowest.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigensystem, kron_all, ComplexMatrix, I, ONE, ZERO};

/// Largest number of qubits the Dicke embedding will build by default.
pub const DEFAULT_QUBIT_CAP: usize = 6;

/// A non-negative half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInteger(u32);

impl HalfInteger {
    /// Spin quantum number `j` from a float; `2j` must be a positive integer.
    pub fn spin(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        let rounded = twice.round();
        if !j.is_finite() || (twice - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "spin quantum number j = {j} must be a positive half-integer (2j a positive integer)"
            )));
        }
        Ok(Self(rounded as u32))
    }

    pub fn from_twice(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::InvalidParameter(
                "spin quantum number j must be positive".into(),
            ));
        }
        Ok(Self(two_j))
    }

    #[inline]
    pub fn twice(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Hilbert space dimension `2j + 1`.
    #[inline]
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum number of basis index `i`.
    #[inline]
    pub fn m_of_index(self, i: usize) -> f64 {
        self.value() - i as f64
    }

    /// All m values in basis order (descending).
    pub fn m_values(self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m_of_index(i)).collect()
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Spin component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::X, Component::Y, Component::Z];
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Component::X),
            "y" => Ok(Component::Y),
            "z" => Ok(Component::Z),
            other => Err(Error::InvalidParameter(format!(
                "unknown spin component '{other}' (expected x, y or z)"
            ))),
        }
    }
}

/// The angular momentum operators of a spin-j.
#[derive(Debug, Clone)]
pub struct SpinSet {
    pub j: HalfInteger,
    pub jx: ComplexMatrix,
    pub jy: ComplexMatrix,
    pub jz: ComplexMatrix,
    pub jplus: ComplexMatrix,
    pub jminus: ComplexMatrix,
    /// Eigenvectors of `jy`; column `k` has eigenvalue `jy_spectrum[k]`.
    jy_vectors: ComplexMatrix,
    jy_spectrum: Vec<f64>,
}

impl SpinSet {
    #[inline]
    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    pub fn component(&self, c: Component) -> &ComplexMatrix {
        match c {
            Component::X => &self.jx,
            Component::Y => &self.jy,
            Component::Z => &self.jz,
        }
    }

    /// `Jx^2 + Jy^2 + Jz^2`
    pub fn casimir(&self) -> ComplexMatrix {
        let mut c = self.jx.matmul(&self.jx);
        c += &self.jy.matmul(&self.jy);
        c += &self.jz.matmul(&self.jz);
        c
    }

    /// Eigenvectors of `Jy` (columns) and the exact spectrum they carry.
    pub fn jy_eigenbasis(&self) -> (&ComplexMatrix, &[f64]) {
        (&self.jy_vectors, &self.jy_spectrum)
    }

    /// `R diag(f(m)) R^dagger` where `Jy = R diag(m) R^dagger`.
    pub(crate) fn jy_function(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.dim();
        let r = &self.jy_vectors;
        let fs: Vec<Complex64> = self.jy_spectrum.iter().map(|&m| f(m)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += r[(i, k)] * fs[k] * r[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Builds `Jx, Jy, Jz, J+, J-` for spin `j` in the descending-m basis.
pub fn build_spin(j: f64) -> Result<SpinSet> {
    build_spin_exact(HalfInteger::spin(j)?)
}

pub fn build_spin_exact(j: HalfInteger) -> Result<SpinSet> {
    let n = j.dim();
    let jj = j.value();
    let mut jz = ComplexMatrix::zeros(n, n);
    let mut jplus = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let m = j.m_of_index(i);
        jz[(i, i)] = Complex64::new(m, 0.0);
        if i > 0 {
            // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and |m+1> sits at index i-1
            let amp = (jj * (jj + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
            jplus[(i - 1, i)] = Complex64::new(amp, 0.0);
        }
    }
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus).scale_real(0.5);
    let jy = (&jplus - &jminus).scale(Complex64::new(0.0, -0.5));

    let es = hermitian_eigensystem(&jy)?;
    // the spectrum of any component is exactly {-j, ..., j}
    let jy_spectrum = es.values.iter().map(|v| (2.0 * v).round() / 2.0).collect();

    Ok(SpinSet {
        j,
        jx,
        jy,
        jz,
        jplus,
        jminus,
        jy_vectors: es.vectors,
        jy_spectrum,
    })
}

/// `exp(i theta Jy)`, evaluated through the exact spectrum of `Jy`.
pub fn rotation_y(spin: &SpinSet, theta: f64) -> Result<ComplexMatrix> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rotation angle must be finite, got {theta}"
        )));
    }
    Ok(spin.jy_function(|m| (I * (m * theta)).exp()))
}

/// Isometry from the spin-j space onto the symmetric subspace of 2j qubits.
#[derive(Debug, Clone)]
pub struct DickeIsometry {
    pub j: HalfInteger,
    /// Shape `2^(2j) x (2j + 1)`.
    pub v: ComplexMatrix,
}

impl DickeIsometry {
    pub fn n_qubits(&self) -> usize {
        self.j.twice() as usize
    }

    /// Projector onto the maximal-S^2 subspace, `V V^dagger`.
    pub fn symmetric_projector(&self) -> ComplexMatrix {
        self.v.matmul(&self.v.adjoint())
    }

    /// `V^dagger A V`: restricts a qubit operator to the spin-j space.
    pub fn compress(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.v.adjoint().matmul(&a.matmul(&self.v))
    }

    /// `V A V^dagger`: embeds a spin-j operator into the qubit space.
    pub fn embed(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.v.matmul(&a.matmul(&self.v.adjoint()))
    }
}

pub fn dicke_isometry(j: f64) -> Result<DickeIsometry> {
    dicke_isometry_with_cap(j, DEFAULT_QUBIT_CAP)
}

pub fn dicke_isometry_with_cap(j: f64, qubit_cap: usize) -> Result<DickeIsometry> {
    let j = HalfInteger::spin(j)?;
    let n = j.twice() as usize;
    check_qubit_cap(n, qubit_cap)?;
    let full = 1usize << n;
    let mut v = ComplexMatrix::zeros(full, j.dim());
    for col in 0..j.dim() {
        // |j, m> with m = j - col has j + m = 2j - col up-spins; up = bit 0
        let ups = n - col;
        let members: Vec<usize> = (0..full)
            .filter(|&b| n - (b.count_ones() as usize) == ups)
            .collect();
        let amp = Complex64::new(1.0 / (members.len() as f64).sqrt(), 0.0);
        for b in members {
            v[(b, col)] = amp;
        }
    }
    Ok(DickeIsometry { j, v })
}

pub(crate) fn check_qubit_cap(n_qubits: usize, cap: usize) -> Result<()> {
    if n_qubits > cap {
        return Err(Error::ResourceLimit(format!(
            "{n_qubits} qubits exceed the configured cap of {cap} (2^{n_qubits}-dimensional space)"
        )));
    }
    Ok(())
}

/// Spin-1/2 operators `S = sigma / 2`.
pub fn spin_half() -> SpinSet {
    build_spin_exact(HalfInteger(1)).expect("spin-1/2 is always valid")
}

/// `I (x) ... (x) op (x) ... (x) I` with `op` on factor `site` of `n_sites`
/// identical `d`-dimensional factors.
pub fn embed_local(op: &ComplexMatrix, site: usize, n_sites: usize) -> ComplexMatrix {
    let d = op.rows();
    let id = ComplexMatrix::identity(d);
    let factors: Vec<&ComplexMatrix> = (0..n_sites)
        .map(|k| if k == site { op } else { &id })
        .collect();
    kron_all(factors)
}

/// `sum_k S_{k,c}` on `n_spins` qubits.
pub fn collective_operator(component: Component, n_spins: usize) -> Result<ComplexMatrix> {
    collective_operator_with_cap(component, n_spins, DEFAULT_QUBIT_CAP)
}

pub fn collective_operator_with_cap(
    component: Component,
    n_spins: usize,
    qubit_cap: usize,
) -> Result<ComplexMatrix> {
    if n_spins == 0 {
        return Err(Error::InvalidParameter("need at least one spin".into()));
    }
    check_qubit_cap(n_spins, qubit_cap)?;
    let half = spin_half();
    let s = half.component(component);
    let dim = 1usize << n_spins;
    let mut total = ComplexMatrix::zeros(dim, dim);
    for k in 0..n_spins {
        total += &embed_local(s, k, n_spins);
    }
    Ok(total)
}

/// `|+> (x) ... ` style product state from per-qubit amplitudes.
pub fn product_state(factors: &[[Complex64; 2]]) -> Vec<Complex64> {
    factors.iter().fold(vec![ONE], |acc, f| {
        acc.iter()
            .flat_map(|&a| f.iter().map(move |&b| a * b))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigensystem;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let s = build_spin(0.5).unwrap();
        assert_eq!(s.jz, ComplexMatrix::from_real_diag(&[0.5, -0.5]));
        assert_eq!(
            s.jx,
            ComplexMatrix::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]])
        );
        let expected_y = ComplexMatrix::from_rows(&[
            vec![ZERO, Complex64::new(0.0, -0.5)],
            vec![Complex64::new(0.0, 0.5), ZERO],
        ]);
        assert!(s.jy.approx_eq(&expected_y, 1e-15));
    }

    #[test]
    fn spin_one_jz() {
        let s = build_spin(1.0).unwrap();
        assert_eq!(s.jz, ComplexMatrix::from_real_diag(&[1.0, 0.0, -1.0]));
    }

    #[test]
    fn invalid_spin_values() {
        for j in [0.0, -0.5, 0.75, 1.2, f64::NAN, f64::INFINITY] {
            assert!(matches!(build_spin(j), Err(Error::InvalidParameter(_))), "j = {j}");
        }
    }

    #[test]
    fn spin_five_halves_commutator_entrywise() {
        let s = build_spin(2.5).unwrap();
        // direct entrywise evaluation of [Jx, Jy]_{ab} = sum_k Jx_ak Jy_kb - Jy_ak Jx_kb
        let n = s.dim();
        for a in 0..n {
            for b in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += s.jx[(a, k)] * s.jy[(k, b)] - s.jy[(a, k)] * s.jx[(k, b)];
                }
                let expected = I * s.jz[(a, b)];
                assert!((acc - expected).norm() < 1e-12, "entry ({a},{b})");
            }
        }
    }

    #[test]
    fn ladder_matrix_elements() {
        let s = build_spin(1.5).unwrap();
        let jj: f64 = 1.5;
        for i in 1..s.dim() {
            let m = s.j.m_of_index(i);
            let expected = (jj * (jj + 1.0) - m * (m + 1.0)).sqrt();
            assert!((s.jplus[(i - 1, i)].re - expected).abs() < 1e-15);
            assert!((s.jminus[(i, i - 1)].re - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn component_spectra_are_m_values() {
        for j in [0.5, 1.0, 2.0] {
            let s = build_spin(j).unwrap();
            let mut expected = s.j.m_values();
            expected.reverse();
            for c in Component::ALL {
                let es = hermitian_eigensystem(s.component(c)).unwrap();
                for (v, e) in es.values.iter().zip(&expected) {
                    assert!((v - e).abs() < 1e-12, "j={j} {c:?}");
                }
            }
        }
    }

    #[test]
    fn rotation_identity_and_inverse() {
        let s = build_spin(2.0).unwrap();
        let id = ComplexMatrix::identity(5);
        assert!(rotation_y(&s, 0.0).unwrap().approx_eq(&id, 1e-14));
        for theta in [0.3, -1.7, 4.0] {
            let u = rotation_y(&s, theta).unwrap();
            let v = rotation_y(&s, -theta).unwrap();
            assert!(u.matmul(&v).approx_eq(&id, 1e-13));
        }
        assert!(rotation_y(&s, f64::NAN).is_err());
    }

    /// Taylor series of exp(A) truncated at `terms`.
    fn expm_series(a: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let n = a.rows();
        let mut sum = ComplexMatrix::identity(n);
        let mut term = ComplexMatrix::identity(n);
        for k in 1..=terms {
            term = term.matmul(a).scale_real(1.0 / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn rotation_half_pi_matches_series_oracle() {
        let s = build_spin(0.5).unwrap();
        let theta = std::f64::consts::FRAC_PI_2;
        let oracle = expm_series(&s.jy.scale(I * theta), 20);
        let u = rotation_y(&s, theta).unwrap();
        assert!(u.approx_eq(&oracle, 1e-13));
        // exp(i pi/2 sigma_y / 2) = [[cos, sin], [-sin, cos]] at pi/4
        let (cs, sn) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
        let expected = ComplexMatrix::from_real_rows(&[vec![cs, sn], vec![-sn, cs]]);
        assert!(u.approx_eq(&expected, 1e-14));
    }

    #[test]
    fn rotation_matches_series_for_larger_spin() {
        let s = build_spin(2.5).unwrap();
        for theta in [0.4, -2.2] {
            let oracle = expm_series(&s.jy.scale(I * theta), 60);
            assert!(rotation_y(&s, theta).unwrap().approx_eq(&oracle, 1e-12));
        }
    }

    #[test]
    fn dicke_spin_half_is_identity() {
        let d = dicke_isometry(0.5).unwrap();
        assert_eq!(d.v, ComplexMatrix::identity(2));
    }

    #[test]
    fn dicke_spin_one_middle_column_is_triplet() {
        let d = dicke_isometry(1.0).unwrap();
        let r = 1.0 / 2f64.sqrt();
        // basis |uu>, |ud>, |du>, |dd>
        assert_eq!(d.v.column(1), vec![c(0.0), c(r), c(r), c(0.0)]);
        assert_eq!(d.v.column(0), vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(d.v.column(2), vec![c(0.0), c(0.0), c(0.0), c(1.0)]);
    }

    #[test]
    fn dicke_three_halves_sz_by_symmetrization() {
        // oracle: symmetric states assembled from explicit product states
        let up = [ONE, ZERO];
        let dn = [ZERO, ONE];
        let groups: [Vec<[[Complex64; 2]; 3]>; 4] = [
            vec![[up, up, up]],
            vec![[up, up, dn], [up, dn, up], [dn, up, up]],
            vec![[up, dn, dn], [dn, up, dn], [dn, dn, up]],
            vec![[dn, dn, dn]],
        ];
        let mut v = ComplexMatrix::zeros(8, 4);
        for (col, group) in groups.iter().enumerate() {
            let norm = (group.len() as f64).sqrt();
            for p in group {
                for (row, amp) in product_state(p).into_iter().enumerate() {
                    v[(row, col)] += amp / norm;
                }
            }
        }
        let d = dicke_isometry(1.5).unwrap();
        assert!(d.v.approx_eq(&v, 1e-15));

        let sz = collective_operator(Component::Z, 3).unwrap();
        let restricted = v.adjoint().matmul(&sz.matmul(&v));
        let expected = ComplexMatrix::from_real_diag(&[1.5, 0.5, -0.5, -1.5]);
        assert!(restricted.approx_eq(&expected, 1e-14));
    }

    #[test]
    fn dicke_cap_is_enforced() {
        assert!(matches!(dicke_isometry(3.5), Err(Error::ResourceLimit(_))));
        assert!(dicke_isometry_with_cap(3.5, 7).is_ok());
    }

    #[test]
    fn collective_z_two_spins() {
        let sz = collective_operator(Component::Z, 2).unwrap();
        let es = hermitian_eigensystem(&sz).unwrap();
        let expected = [-1.0, 0.0, 0.0, 1.0];
        for (v, e) in es.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn collective_casimir_two_spins() {
        let mut s2 = ComplexMatrix::zeros(4, 4);
        for c in Component::ALL {
            let s = collective_operator(c, 2).unwrap();
            s2 += &s.matmul(&s);
        }
        let es = hermitian_eigensystem(&s2).unwrap();
        let expected = [0.0, 2.0, 2.0, 2.0];
        for (v, e) in es.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-13);
        }
    }
}
