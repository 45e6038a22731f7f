//! Classical RK4 with step-doubling error control, plus the density-matrix and
//! propagator drivers built on it.
//!
//! The default picture integrates in the adiabatic interaction frame (see
//! [`crate::picture`]); the lab picture integrates the Jz-basis equation
//! directly and is kept for cross-checks. Trace and Hermiticity are monitored,
//! never restored.

use serde::{Deserialize, Serialize};

use crate::dissipator::NoiseConfig;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, ComplexMatrix};
use crate::model::ModelParams;
use crate::picture::{
    conjugate, conjugate_inverse, majorana_hamiltonian, AdiabaticSpinOde, AdiabaticUnitaryOde,
    LabSpinOde, LabUnitaryOde, MatrixOde,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fixed step `dt`.
    Rk4Fixed,
    /// Adaptive step from comparing one step of `h` with two of `h/2`.
    #[default]
    Rk4Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    #[default]
    Adiabatic,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub picture: Picture,
    /// Initial (adaptive) or constant (fixed) step.
    pub dt: f64,
    /// Local error target relative to `max(1, max|y|)`.
    pub rel_tol: f64,
    /// Local error target for propagators, which must come out unitary to 1e-8.
    pub unitary_rel_tol: f64,
    pub max_steps: usize,
    /// Largest tolerated trace drift, Hermiticity defect and negative eigenvalue.
    pub validity_tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Accepted steps between eigenvalue checks.
    pub positivity_interval: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Doubling,
            picture: Picture::Adiabatic,
            dt: 0.01,
            rel_tol: 1e-8,
            unitary_rel_tol: 1e-10,
            max_steps: 20_000_000,
            validity_tol: 1e-7,
            dt_min: 1e-5,
            dt_max: 1.0,
            positivity_interval: 100,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed(dt: f64) -> Self {
        Self {
            method: Method::Rk4Fixed,
            dt,
            ..Self::default()
        }
    }

    fn for_unitary(&self) -> Self {
        Self {
            rel_tol: self.unitary_rel_tol,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("rel_tol", self.rel_tol)?;
        positive("unitary_rel_tol", self.unitary_rel_tol)?;
        positive("validity_tol", self.validity_tol)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        if self.dt_min > self.dt_max {
            return Err(Error::InvalidParameter("dt_min exceeds dt_max".into()));
        }
        if self.max_steps == 0 || self.positivity_interval == 0 {
            return Err(Error::InvalidParameter(
                "max_steps and positivity_interval must be nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`propagate_density`]. A validity violation stops the run and is
/// reported in `failure` rather than as an error.
#[derive(Debug, Clone)]
pub struct PropagationReport {
    /// Lab-frame state at the last time reached.
    pub final_state: ComplexMatrix,
    pub final_time: f64,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub min_eigenvalue_seen: f64,
    pub failure: Option<String>,
}

impl PropagationReport {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

struct Workspace {
    k2: ComplexMatrix,
    k3: ComplexMatrix,
    k4: ComplexMatrix,
    stage: ComplexMatrix,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let z = ComplexMatrix::zeros(dim, dim);
        Self {
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z,
        }
    }
}

fn stage_into(y: &ComplexMatrix, h: f64, k: &ComplexMatrix, out: &mut ComplexMatrix) {
    for ((o, &a), &b) in out.as_mut_slice().iter_mut().zip(y.as_slice()).zip(k.as_slice()) {
        *o = a + b * h;
    }
}

/// One RK4 step whose first slope `k1 = F(t, y)` is already known.
fn rk4_from_slope<O: MatrixOde + ?Sized>(
    ode: &O,
    t: f64,
    h: f64,
    y: &ComplexMatrix,
    k1: &ComplexMatrix,
    ws: &mut Workspace,
) -> ComplexMatrix {
    stage_into(y, 0.5 * h, k1, &mut ws.stage);
    ode.eval(t + 0.5 * h, &ws.stage, &mut ws.k2);
    stage_into(y, 0.5 * h, &ws.k2, &mut ws.stage);
    ode.eval(t + 0.5 * h, &ws.stage, &mut ws.k3);
    stage_into(y, h, &ws.k3, &mut ws.stage);
    ode.eval(t + h, &ws.stage, &mut ws.k4);
    let mut out = y.clone();
    let w = h / 6.0;
    for i in 0..out.as_slice().len() {
        let inc = k1.as_slice()[i]
            + (ws.k2.as_slice()[i] + ws.k3.as_slice()[i]) * 2.0
            + ws.k4.as_slice()[i];
        out.as_mut_slice()[i] += inc * w;
    }
    out
}

/// What a step monitor wants the driver to do next.
pub enum Flow {
    Continue,
    Stop,
}

/// Statistics of a raw integration run.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub final_time: f64,
}

/// Integrates `dY/dt = F(t, Y)` from `t_start` to `t_end`, calling `monitor`
/// after every accepted step.
pub fn integrate<O, M>(
    ode: &O,
    y0: &ComplexMatrix,
    (t_start, t_end): (f64, f64),
    cfg: &IntegratorConfig,
    mut monitor: M,
) -> Result<(ComplexMatrix, StepStats)>
where
    O: MatrixOde + ?Sized,
    M: FnMut(f64, &ComplexMatrix, usize) -> Flow,
{
    cfg.validate()?;
    if !(t_start.is_finite() && t_end.is_finite() && t_end >= t_start) {
        return Err(Error::InvalidParameter(format!(
            "invalid time span [{t_start}, {t_end}]"
        )));
    }
    let dim = ode.dim();
    if y0.rows() != dim || y0.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial matrix is {}x{}, generator acts on dimension {dim}",
            y0.rows(),
            y0.cols()
        )));
    }
    let mut ws = Workspace::new(dim);
    let mut y = y0.clone();
    let mut t = t_start;
    let mut h = cfg.dt.min(cfg.dt_max);
    let mut stats = StepStats::default();
    let span = t_end - t_start;
    // Steps shorter than this are rounding leftovers at the end of the span.
    let tiny = 1e-12 * span.abs().max(1.0);
    let mut k1 = ComplexMatrix::zeros(dim, dim);

    while t_end - t > tiny {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::Integration(format!(
                "step budget of {} exhausted at t = {t}",
                cfg.max_steps
            )));
        }
        let last = h >= t_end - t;
        let step = if last { t_end - t } else { h };
        ode.eval(t, &y, &mut k1);
        match cfg.method {
            Method::Rk4Fixed => {
                y = rk4_from_slope(ode, t, step, &y, &k1, &mut ws);
            }
            Method::Rk4Doubling => {
                let full = rk4_from_slope(ode, t, step, &y, &k1, &mut ws);
                let mid = rk4_from_slope(ode, t, 0.5 * step, &y, &k1, &mut ws);
                let mut k1_mid = ComplexMatrix::zeros(dim, dim);
                ode.eval(t + 0.5 * step, &mid, &mut k1_mid);
                let half = rk4_from_slope(ode, t + 0.5 * step, 0.5 * step, &mid, &k1_mid, &mut ws);
                let err = (&half - &full).max_abs() / 15.0;
                let scale = cfg.rel_tol * y.max_abs().max(1.0);
                if !err.is_finite() {
                    return Err(Error::Integration(format!("non-finite state at t = {t}")));
                }
                if err > scale {
                    stats.rejected += 1;
                    h = 0.5 * step;
                    if h < cfg.dt_min {
                        return Err(Error::Integration(format!(
                            "step size fell below {} at t = {t}",
                            cfg.dt_min
                        )));
                    }
                    continue;
                }
                y = half;
                if err < scale / 64.0 && !last {
                    h = (2.0 * h).min(cfg.dt_max);
                }
            }
        }
        t = if last { t_end } else { t + step };
        stats.accepted += 1;
        if y.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration(format!("non-finite state at t = {t}")));
        }
        if let Flow::Stop = monitor(t, &y, stats.accepted) {
            break;
        }
    }
    stats.final_time = t;
    Ok((y, stats))
}

/// Checks that `rho` is a density matrix within `tol`.
pub fn check_density(rho: &ComplexMatrix, dim: usize, tol: f64) -> Result<()> {
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "density matrix is {}x{}, expected {dim}x{dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    if rho.hermiticity_defect() > tol {
        return Err(Error::InvalidParameter("initial state is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidParameter(format!("initial state has trace {tr}")));
    }
    let lam = min_eigenvalue(&rho.hermitian_part())?;
    if lam < -tol {
        return Err(Error::InvalidParameter(format!(
            "initial state has eigenvalue {lam}"
        )));
    }
    Ok(())
}

/// Integrates a density matrix with validity monitoring. `to_lab` maps the
/// integration variable at time `t` back to the lab frame (unitary, so the
/// monitored quantities are the same in both).
fn run_density<O: MatrixOde + ?Sized>(
    ode: &O,
    y0: &ComplexMatrix,
    span: (f64, f64),
    cfg: &IntegratorConfig,
    to_lab: impl Fn(f64, &ComplexMatrix) -> ComplexMatrix,
) -> Result<PropagationReport> {
    let mut max_trace_drift = 0.0_f64;
    let mut max_herm = 0.0_f64;
    let mut min_eig = min_eigenvalue(&y0.hermitian_part())?;
    let mut failure: Option<String> = None;
    let mut eig_error: Option<Error> = None;
    let tol = cfg.validity_tol;
    let (y, stats) = integrate(ode, y0, span, cfg, |t, y, n| {
        let tr = y.trace();
        max_trace_drift = max_trace_drift.max((tr - 1.0).norm());
        max_herm = max_herm.max(y.hermiticity_defect());
        if n % cfg.positivity_interval == 0 || t >= span.1 {
            match min_eigenvalue(&y.hermitian_part()) {
                Ok(l) => min_eig = min_eig.min(l),
                Err(e) => {
                    eig_error = Some(e);
                    return Flow::Stop;
                }
            }
        }
        if max_trace_drift > tol {
            failure = Some(format!("trace drift {max_trace_drift:e} at t = {t}"));
        } else if max_herm > tol {
            failure = Some(format!("Hermiticity defect {max_herm:e} at t = {t}"));
        } else if min_eig < -tol {
            failure = Some(format!("eigenvalue {min_eig:e} at t = {t}"));
        }
        if failure.is_some() {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    if let Some(e) = eig_error {
        return Err(e);
    }
    Ok(PropagationReport {
        final_state: to_lab(stats.final_time, &y),
        final_time: stats.final_time,
        steps_taken: stats.accepted,
        rejected_steps: stats.rejected,
        max_trace_drift,
        max_hermiticity_drift: max_herm,
        min_eigenvalue_seen: min_eig,
        failure,
    })
}

/// Evolves a lab-frame density matrix of the swept spin under the master
/// equation over `span`.
pub fn propagate_density(
    params: &ModelParams,
    noise: &NoiseConfig,
    rho0: &ComplexMatrix,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<PropagationReport> {
    params.validate()?;
    noise.validate()?;
    cfg.validate()?;
    let dim = params.spin_number()?.dim();
    check_density(rho0, dim, cfg.validity_tol)?;
    match cfg.picture {
        Picture::Adiabatic => {
            let ode = AdiabaticSpinOde::new(params, noise)?;
            let y0 = conjugate_inverse(&ode.frame_transform(span.0), rho0);
            run_density(&ode, &y0, span, cfg, |t, y| conjugate(&ode.frame_transform(t), y))
        }
        Picture::Lab => {
            let ode = LabSpinOde::new(params, noise)?;
            run_density(&ode, rho0, span, cfg, |_, y| y.clone())
        }
    }
}

/// Density-matrix evolution for any generator already expressed in its own
/// picture; `frame` maps that picture to the lab frame at time `t`.
pub fn propagate_density_in<O: MatrixOde + ?Sized>(
    ode: &O,
    frame: impl Fn(f64) -> ComplexMatrix,
    rho0: &ComplexMatrix,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<PropagationReport> {
    cfg.validate()?;
    check_density(rho0, ode.dim(), cfg.validity_tol)?;
    let y0 = conjugate_inverse(&frame(span.0), rho0);
    run_density(ode, &y0, span, cfg, |t, y| conjugate(&frame(t), y))
}

/// Largest deviation of `U^dagger U` from the identity.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.rows();
    let g = u.adjoint().matmul(u);
    (&g - &ComplexMatrix::identity(n)).max_abs()
}

const UNITARITY_TOL: f64 = 1e-8;

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    let d = unitarity_defect(u);
    if d > UNITARITY_TOL {
        return Err(Error::Integration(format!("propagator lost unitarity: {d:e}")));
    }
    Ok(())
}

/// Time-ordered propagator of `H(t)` over `span`, integrated in the lab frame.
pub fn propagate_unitary<F>(
    hamiltonian: F,
    dim: usize,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let mid = 0.5 * (span.0 + span.1);
    for t in [span.0, mid, span.1] {
        let h = hamiltonian(t);
        if h.rows() != dim || h.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "H({t}) is {}x{}, expected {dim}x{dim}",
                h.rows(),
                h.cols()
            )));
        }
        if !h.is_hermitian(1e-12) {
            return Err(Error::ContractViolation(format!("H({t}) is not Hermitian")));
        }
    }
    let ode = LabUnitaryOde { dim, hamiltonian };
    let (u, _) = integrate(&ode, &ComplexMatrix::identity(dim), span, &cfg.for_unitary(), |_, _, _| {
        Flow::Continue
    })?;
    check_unitary(&u)?;
    Ok(u)
}

/// Noiseless propagator of the swept spin over `span`, in the configured picture.
pub fn majorana_propagator(
    params: &ModelParams,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<ComplexMatrix> {
    params.validate()?;
    let dim = params.spin_number()?.dim();
    match cfg.picture {
        Picture::Lab => propagate_unitary(majorana_hamiltonian(params)?, dim, span, cfg),
        Picture::Adiabatic => {
            let ode = AdiabaticUnitaryOde(AdiabaticSpinOde::new(params, &NoiseConfig::noiseless())?);
            let (w, _) = integrate(&ode, &ComplexMatrix::identity(dim), span, &cfg.for_unitary(), |_, _, _| {
                Flow::Continue
            })?;
            check_unitary(&w)?;
            // U = T(t1) W T(t0)^dagger
            let u = ode
                .0
                .frame_transform(span.1)
                .matmul(&w.matmul(&ode.0.frame_transform(span.0).adjoint()));
            Ok(u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::Coupling;
    use crate::linalg::{trace_distance, I, ONE};
    use crate::spin::{build_spin, rotation_y};
    use num_complex::Complex64;

    struct Decay;
    impl MatrixOde for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, t: f64, y: &ComplexMatrix, out: &mut ComplexMatrix) {
            out[(0, 0)] = y[(0, 0)] * Complex64::new(-1.0, t.cos());
        }
    }

    fn decay_exact(t: f64) -> Complex64 {
        (Complex64::new(-t, t.sin())).exp()
    }

    #[test]
    fn fixed_rk4_is_fourth_order() {
        let y0 = ComplexMatrix::identity(1);
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let (y, _) =
                    integrate(&Decay, &y0, (0.0, 2.0), &IntegratorConfig::fixed(dt), |_, _, _| Flow::Continue)
                        .unwrap();
                (y[(0, 0)] - decay_exact(2.0)).norm()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((3.7..4.3).contains(&order), "order {order}");
        }
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let y0 = ComplexMatrix::identity(1);
        for tol in [1e-6, 1e-9] {
            let cfg = IntegratorConfig {
                rel_tol: tol,
                dt: 0.5,
                ..IntegratorConfig::default()
            };
            let (y, stats) = integrate(&Decay, &y0, (0.0, 5.0), &cfg, |_, _, _| Flow::Continue).unwrap();
            assert!((y[(0, 0)] - decay_exact(5.0)).norm() < 50.0 * tol);
            assert!(stats.accepted > 0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let y0 = ComplexMatrix::identity(1);
        let cfg = IntegratorConfig::default();
        assert!(integrate(&Decay, &y0, (1.0, 0.0), &cfg, |_, _, _| Flow::Continue).is_err());
        assert!(integrate(&Decay, &ComplexMatrix::identity(2), (0.0, 1.0), &cfg, |_, _, _| Flow::Continue).is_err());
        let bad = IntegratorConfig { dt: 0.0, ..cfg };
        assert!(integrate(&Decay, &y0, (0.0, 1.0), &bad, |_, _, _| Flow::Continue).is_err());
        let tight = IntegratorConfig { max_steps: 3, ..IntegratorConfig::fixed(0.01) };
        assert!(matches!(
            integrate(&Decay, &y0, (0.0, 1.0), &tight, |_, _, _| Flow::Continue),
            Err(Error::Integration(_))
        ));
    }

    #[test]
    fn rabi_cycle_of_static_field() {
        // H = w Jx for spin 1/2: |up> returns after 2 pi / w, population flips at pi / w.
        let s = build_spin(0.5).unwrap();
        let w = 1.3;
        let h = s.jx.scale_real(w);
        let cfg = IntegratorConfig { unitary_rel_tol: 1e-11, ..IntegratorConfig::default() };
        let half = propagate_unitary(|_| h.clone(), 2, (0.0, std::f64::consts::PI / w), &cfg).unwrap();
        assert!(half[(0, 0)].norm() < 1e-8);
        let full = propagate_unitary(|_| h.clone(), 2, (0.0, 2.0 * std::f64::consts::PI / w), &cfg).unwrap();
        assert!(full.approx_eq(&ComplexMatrix::identity(2).scale_real(-1.0), 1e-8));
        // against exp(-i w t Jx) = U_x rotation, written via U_y conjugated by exp(-i pi/2 Jz)
        let t = 0.7;
        let u = propagate_unitary(|_| h.clone(), 2, (0.0, t), &cfg).unwrap();
        let (c, sn) = ((w * t / 2.0).cos(), (w * t / 2.0).sin());
        let exact = ComplexMatrix::from_rows(&[
            vec![ONE * c, -I * sn],
            vec![-I * sn, ONE * c],
        ]);
        assert!(u.approx_eq(&exact, 1e-9));
    }

    #[test]
    fn propagate_unitary_checks_hamiltonian() {
        let cfg = IntegratorConfig::default();
        let bad = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![-ONE, ONE]]);
        assert!(matches!(
            propagate_unitary(|_| bad.clone(), 2, (0.0, 1.0), &cfg),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            propagate_unitary(|_| ComplexMatrix::identity(3), 2, (0.0, 1.0), &cfg),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn adiabatic_and_lab_propagators_agree() {
        for j in [0.5, 1.0, 1.5] {
            let p = ModelParams::figure(j);
            let span = (-8.0, 5.0);
            let tight = IntegratorConfig { unitary_rel_tol: 1e-11, ..IntegratorConfig::default() };
            let lab = majorana_propagator(&p, span, &IntegratorConfig { picture: Picture::Lab, ..tight }).unwrap();
            let adi = majorana_propagator(&p, span, &tight).unwrap();
            assert!((&lab - &adi).max_abs() < 1e-7, "j={j}");
        }
    }

    #[test]
    fn noiseless_density_is_unitary_conjugation() {
        let p = ModelParams::figure(1.0);
        let span = (-6.0, 6.0);
        let cfg = IntegratorConfig { rel_tol: 1e-11, unitary_rel_tol: 1e-11, ..IntegratorConfig::default() };
        let u = majorana_propagator(&p, span, &cfg).unwrap();
        let s = build_spin(1.0).unwrap();
        let r = rotation_y(&s, 0.4).unwrap();
        let rho0 = conjugate(&r, &ComplexMatrix::from_real_diag(&[0.6, 0.3, 0.1]));
        let rep = propagate_density(&p, &NoiseConfig::noiseless(), &rho0, span, &cfg).unwrap();
        assert!(!rep.failed());
        let expected = conjugate(&u, &rho0);
        assert!((&rep.final_state - &expected).max_abs() < 1e-8);
        // purity is conserved
        let purity = |m: &ComplexMatrix| m.matmul(m).trace().re;
        assert!((purity(&rep.final_state) - purity(&rho0)).abs() < 1e-8);
    }

    #[test]
    fn open_evolution_agrees_between_pictures() {
        let p = ModelParams::figure(1.0);
        let span = (-10.0, 10.0);
        let rho0 = ComplexMatrix::basis_projector(3, 2);
        for coupling in [Coupling::Jz, Coupling::Jx] {
            let noise = NoiseConfig::new(coupling, 0.05, 0.8);
            let cfg = IntegratorConfig { rel_tol: 1e-10, ..IntegratorConfig::default() };
            let adi = propagate_density(&p, &noise, &rho0, span, &cfg).unwrap();
            let lab = propagate_density(&p, &noise, &rho0, span, &IntegratorConfig { picture: Picture::Lab, ..cfg }).unwrap();
            assert!(!adi.failed() && !lab.failed());
            assert!(trace_distance(&adi.final_state, &lab.final_state).unwrap() < 1e-7);
            assert!(adi.max_trace_drift < 1e-9);
            assert!(adi.min_eigenvalue_seen > -1e-9);
        }
    }

    #[test]
    fn self_convergence_under_step_refinement() {
        let p = ModelParams::figure(1.5);
        let noise = NoiseConfig::new(Coupling::Jx, 0.02, 0.5);
        let rho0 = ComplexMatrix::basis_projector(4, 3);
        let span = (-20.0, 20.0);
        let run = |dt: f64| {
            let cfg = IntegratorConfig { max_steps: 10_000_000, ..IntegratorConfig::fixed(dt) };
            propagate_density(&p, &noise, &rho0, span, &cfg).unwrap().final_state
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let e1 = (&a - &c).max_abs();
        let e2 = (&b - &c).max_abs();
        assert!(e2 < e1 / 8.0, "{e1} {e2}");
    }

    #[test]
    fn rejects_invalid_initial_state() {
        let p = ModelParams::figure(0.5);
        let cfg = IntegratorConfig::default();
        let not_normalized = ComplexMatrix::identity(2);
        assert!(propagate_density(&p, &NoiseConfig::noiseless(), &not_normalized, (0.0, 1.0), &cfg).is_err());
        let wrong_dim = ComplexMatrix::basis_projector(3, 0);
        assert!(matches!(
            propagate_density(&p, &NoiseConfig::noiseless(), &wrong_dim, (0.0, 1.0), &cfg),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn validity_violation_is_reported_not_raised() {
        let p = ModelParams::figure(0.5);
        // an absurdly large fixed step makes the strongly damped run go unphysical
        let noise = NoiseConfig::new(Coupling::Jx, 1000.0, 0.0);
        let cfg = IntegratorConfig {
            picture: Picture::Lab,
            positivity_interval: 1,
            ..IntegratorConfig::fixed(0.5)
        };
        let rep = propagate_density(&p, &noise, &ComplexMatrix::basis_projector(2, 0), (-5.0, 5.0), &cfg).unwrap();
        assert!(rep.failed(), "{rep:?}");
    }
}
