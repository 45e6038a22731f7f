//! Does the spin-j evolution reduce to `2j` independent spin-1/2 evolutions?
//!
//! For the Hamiltonian it does: `U_j = V^dagger u^{(x)2j} V` with `V` the Dicke
//! isometry. For a Davies-Spohn bath per spin, or a shared classical white
//! noise, it does not, and this module measures by how much.

use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dissipator::{dissipator, Coupling, NoiseConfig};
use crate::error::{Error, Result};
use crate::integrator::{majorana_propagator, propagate_density, propagate_density_in, IntegratorConfig};
use crate::linalg::{kron_all, trace_distance, ComplexMatrix, I};
use crate::model::ModelParams;
use crate::picture::{majorana_hamiltonian, QubitArrayOde};
use crate::spin::{check_qubit_cap, dicke_isometry_with_cap, spin_half, Component, DEFAULT_QUBIT_CAP};

/// Residuals at one time of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub unitary_residual: f64,
    pub lindblad_trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub j: f64,
    pub channel: String,
    pub gamma: f64,
    pub temperature: f64,
    /// `||U_j - V^dagger u^{(x)2j} V||_F` at the end of the window.
    pub unitary_residual: f64,
    /// Trace distance between the spin-j state and the independent-qubit state
    /// at the end of the window.
    pub lindblad_trace_distance: f64,
    pub checkpoints: Vec<Checkpoint>,
}

fn equal_segments((a, b): (f64, f64), n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 })
        .collect()
}

fn n_qubits_for(j: f64, cap: usize) -> Result<usize> {
    let n = crate::spin::HalfInteger::spin(j)?.twice() as usize;
    check_qubit_cap(n, cap)?;
    Ok(n)
}

/// `||U_j - V^dagger u^{(x)2j} V||_F` for the noiseless sweep over the window.
pub fn unitary_factorization_check(j: f64, p: &ModelParams, cfg: &IntegratorConfig) -> Result<f64> {
    let pj = p.with_j(j);
    let n = n_qubits_for(j, DEFAULT_QUBIT_CAP)?;
    let v = dicke_isometry_with_cap(j, DEFAULT_QUBIT_CAP)?;
    let span = pj.window();
    let big = majorana_propagator(&pj, span, cfg)?;
    let small = majorana_propagator(&p.with_j(0.5), span, cfg)?;
    let product = kron_all(vec![&small; n]);
    Ok((&big - &v.compress(&product)).frobenius_norm())
}

/// `D[a1 + a2](rho) - D[a1](rho) - D[a2](rho)`
pub fn dissipator_identity_gap(
    a1: &ComplexMatrix,
    a2: &ComplexMatrix,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let d = rho.rows();
    for (name, m) in [("a1", a1), ("a2", a2), ("rho", rho)] {
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols()
            )));
        }
    }
    let sum = a1 + a2;
    let mut gap = dissipator(&sum, rho);
    gap -= &dissipator(a1, rho);
    gap -= &dissipator(a2, rho);
    Ok(gap)
}

fn composite_coupling_check(n: &NoiseConfig) -> Result<()> {
    match n.coupling {
        Coupling::Jz | Coupling::Jx => Ok(()),
        Coupling::Custom(_) => Err(Error::InvalidParameter(
            "factorization runs support only Jz and Jx couplings".into(),
        )),
    }
}

fn density_failure(what: &str, failure: Option<String>) -> Result<()> {
    match failure {
        Some(f) => Err(Error::Integration(format!("{what}: {f}"))),
        None => Ok(()),
    }
}

/// Trace distance at `+t0` between the spin-j master equation started in
/// `|j,-j>` (embedded as `V rho V^dagger`) and `2j` qubits started all down,
/// each damped by its own single-spin Davies-Spohn bath.
pub fn lindblad_factorization_residual(
    j: f64,
    n: &NoiseConfig,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let report = factorization_report(j, n, p, cfg, 1)?;
    Ok(report.lindblad_trace_distance)
}

/// Both residuals at `n_checkpoints` equally spaced times ending at `+t0`.
pub fn factorization_report(
    j: f64,
    noise: &NoiseConfig,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    n_checkpoints: usize,
) -> Result<FactorizationReport> {
    composite_coupling_check(noise)?;
    noise.validate()?;
    if n_checkpoints == 0 {
        return Err(Error::InvalidParameter("need at least one checkpoint".into()));
    }
    let pj = p.with_j(j);
    pj.validate()?;
    let nq = n_qubits_for(j, DEFAULT_QUBIT_CAP)?;
    let v = dicke_isometry_with_cap(j, DEFAULT_QUBIT_CAP)?;
    let dj = pj.spin_number()?.dim();
    let dq = 1usize << nq;
    let times = equal_segments(pj.window(), n_checkpoints);
    let half = p.with_j(0.5);
    let array = QubitArrayOde::new(p, noise, nq)?;

    let mut big_u = ComplexMatrix::identity(dj);
    let mut small_u = ComplexMatrix::identity(2);
    let mut rho_j = ComplexMatrix::basis_projector(dj, dj - 1);
    let mut rho_q = ComplexMatrix::basis_projector(dq, dq - 1);
    let mut checkpoints = Vec::with_capacity(n_checkpoints);
    for w in times.windows(2) {
        let span = (w[0], w[1]);
        big_u = majorana_propagator(&pj, span, cfg)?.matmul(&big_u);
        small_u = majorana_propagator(&half, span, cfg)?.matmul(&small_u);
        let rep_j = propagate_density(&pj, noise, &rho_j, span, cfg)?;
        density_failure("spin-j run", rep_j.failure)?;
        rho_j = rep_j.final_state;
        let rep_q = propagate_density_in(&array, |t| array.frame_transform(t), &rho_q, span, cfg)?;
        density_failure("independent-qubit run", rep_q.failure)?;
        rho_q = rep_q.final_state;

        let product = kron_all(vec![&small_u; nq]);
        checkpoints.push(Checkpoint {
            t: span.1,
            unitary_residual: (&big_u - &v.compress(&product)).frobenius_norm(),
            lindblad_trace_distance: trace_distance(&v.embed(&rho_j), &rho_q.hermitian_part())?,
        });
    }
    let last = *checkpoints.last().expect("at least one checkpoint");
    Ok(FactorizationReport {
        j,
        channel: noise.coupling.tag().to_string(),
        gamma: noise.gamma_flat,
        temperature: noise.temperature,
        unitary_residual: last.unitary_residual,
        lindblad_trace_distance: last.lindblad_trace_distance,
        checkpoints,
    })
}

impl FactorizationReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "j = {}", self.j);
        let _ = writeln!(s, "channel = \"{}\"", self.channel);
        let _ = writeln!(s, "gamma_over_omega = {}", self.gamma);
        let _ = writeln!(s, "kBT_over_omega = {}", self.temperature);
        let _ = writeln!(s, "unitary_residual = {:e}", self.unitary_residual);
        let _ = writeln!(s, "lindblad_trace_distance = {:e}", self.lindblad_trace_distance);
        s
    }

    pub fn write_checkpoints_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "unitary_residual", "lindblad_trace_distance"])?;
        for c in &self.checkpoints {
            out.write_record([
                c.t.to_string(),
                c.unitary_residual.to_string(),
                c.lindblad_trace_distance.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Classical white noise

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalNoiseConfig {
    pub n_spins: usize,
    pub component: Component,
    pub alpha: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Trajectory time step; the noise is constant over each step.
    pub dt: f64,
    pub span: (f64, f64),
    /// Worker threads; `None` uses all available cores.
    pub workers: Option<usize>,
    pub qubit_cap: usize,
}

impl Default for ClassicalNoiseConfig {
    fn default() -> Self {
        Self {
            n_spins: 2,
            component: Component::Z,
            alpha: 0.05,
            n_traj: 10_000,
            seed: 1,
            dt: 0.02,
            span: (-10.0, 10.0),
            workers: None,
            qubit_cap: DEFAULT_QUBIT_CAP,
        }
    }
}

impl ClassicalNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::InvalidParameter("need at least one spin".into()));
        }
        check_qubit_cap(self.n_spins, self.qubit_cap)?;
        if self.n_traj < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 trajectories, got {}",
                self.n_traj
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        let (a, b) = self.span;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidParameter(format!("invalid time span [{a}, {b}]")));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("worker count must be positive".into()));
        }
        Ok(())
    }

    fn steps(&self) -> (usize, f64) {
        let len = self.span.1 - self.span.0;
        let n = (len / self.dt).round().max(1.0) as usize;
        (n, len / n as f64)
    }
}

#[derive(Debug, Clone)]
pub struct ClassicalNoiseReport {
    pub alpha: f64,
    pub n_traj: usize,
    pub n_spins: usize,
    pub seed: u64,
    /// `<U> - (x)_k <U_k>`.
    pub mc_difference: ComplexMatrix,
    /// Second-order prediction for `mc_difference`.
    pub analytic_cross_term: ComplexMatrix,
    /// Standard error of each entry of `mc_difference`, row-major.
    pub entry_standard_error: Vec<f64>,
    /// Frobenius norm of the per-entry standard errors.
    pub statistical_error: f64,
    pub warnings: Vec<String>,
}

impl ClassicalNoiseReport {
    /// Largest `|mc - analytic|` measured in standard errors of that entry.
    pub fn max_entry_z_score(&self) -> f64 {
        self.mc_difference
            .as_slice()
            .iter()
            .zip(self.analytic_cross_term.as_slice())
            .zip(&self.entry_standard_error)
            .map(|((m, a), se)| (m - a).norm() / se)
            .fold(0.0, f64::max)
    }

    pub fn deviation(&self) -> f64 {
        (&self.mc_difference - &self.analytic_cross_term).frobenius_norm()
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "n_traj = {}", self.n_traj);
        let _ = writeln!(s, "n_spins = {}", self.n_spins);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mc_difference_norm = {:e}", self.mc_difference.frobenius_norm());
        let _ = writeln!(s, "analytic_cross_term_norm = {:e}", self.analytic_cross_term.frobenius_norm());
        let _ = writeln!(s, "deviation_norm = {:e}", self.deviation());
        let _ = writeln!(s, "statistical_error = {:e}", self.statistical_error);
        let _ = writeln!(s, "max_entry_z_score = {}", self.max_entry_z_score());
        for w in &self.warnings {
            let _ = writeln!(s, "# warning: {w}");
        }
        s
    }

    /// One row per matrix entry.
    pub fn write_entries_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "col", "mc_re", "mc_im", "analytic_re", "analytic_im", "standard_error"])?;
        let d = self.mc_difference.cols();
        for (i, (m, a)) in self
            .mc_difference
            .as_slice()
            .iter()
            .zip(self.analytic_cross_term.as_slice())
            .enumerate()
        {
            out.write_record([
                (i / d).to_string(),
                (i % d).to_string(),
                m.re.to_string(),
                m.im.to_string(),
                a.re.to_string(),
                a.im.to_string(),
                self.entry_standard_error[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

type Op2 = [Complex64; 4];

fn op2(m: &ComplexMatrix) -> Op2 {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// `out = sum_k op_k y` with the same 2x2 `op` on every one of `n` qubits.
fn apply_site_sum(op: &Op2, n: usize, y: &ComplexMatrix, out: &mut ComplexMatrix) {
    out.fill_zero();
    let cols = y.cols();
    let [a, b, c, d] = *op;
    for site in 0..n {
        let bit = 1usize << (n - 1 - site);
        for r0 in (0..(1usize << n)).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for k in 0..cols {
                let (y0, y1) = (y[(r0, k)], y[(r1, k)]);
                out[(r0, k)] += a * y0 + b * y1;
                out[(r1, k)] += c * y0 + d * y1;
            }
        }
    }
}

/// `-i H(t)` of the single spin at the RK4 stage times of every step.
struct StageGenerators {
    start: Vec<Op2>,
    mid: Vec<Op2>,
    h: f64,
}

fn add_op2(a: &Op2, b: &Op2) -> Op2 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn stage_into(y: &ComplexMatrix, h: f64, k: &ComplexMatrix, out: &mut ComplexMatrix) {
    for ((o, &a), &b) in out.as_mut_slice().iter_mut().zip(y.as_slice()).zip(k.as_slice()) {
        *o = a + b * h;
    }
}

/// One fixed-step RK4 run of `dU/dt = -i sum_k (H(t) + alpha eta V)_k U`.
fn noisy_propagator(stages: &StageGenerators, v: &Op2, alpha: f64, eta: &[f64], n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let mut y = ComplexMatrix::identity(dim);
    let mut k1 = ComplexMatrix::zeros(dim, dim);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut stage = k1.clone();
    let h = stages.h;
    for (step, &e) in eta.iter().enumerate() {
        let w = -I * (alpha * e);
        let kick = [v[0] * w, v[1] * w, v[2] * w, v[3] * w];
        let g0 = add_op2(&stages.start[step], &kick);
        let gm = add_op2(&stages.mid[step], &kick);
        let g1 = add_op2(&stages.start[step + 1], &kick);
        apply_site_sum(&g0, n, &y, &mut k1);
        stage_into(&y, 0.5 * h, &k1, &mut stage);
        apply_site_sum(&gm, n, &stage, &mut k2);
        stage_into(&y, 0.5 * h, &k2, &mut stage);
        apply_site_sum(&gm, n, &stage, &mut k3);
        stage_into(&y, h, &k3, &mut stage);
        apply_site_sum(&g1, n, &stage, &mut k4);
        let sixth = h / 6.0;
        for (i, out) in y.as_mut_slice().iter_mut().enumerate() {
            *out += (k1.as_slice()[i] + (k2.as_slice()[i] + k3.as_slice()[i]) * 2.0 + k4.as_slice()[i]) * sixth;
        }
    }
    y
}

struct BatchSums {
    count: usize,
    full: ComplexMatrix,
    single: ComplexMatrix,
}

/// `sum_k A (x) ... (x) B_k (x) ... (x) A` with `B` at one site and `A` elsewhere.
fn linearized_product(mean: &ComplexMatrix, b: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let mut total = ComplexMatrix::zeros(dim, dim);
    for site in 0..n {
        let factors: Vec<&ComplexMatrix> = (0..n).map(|k| if k == site { b } else { mean }).collect();
        total += &kron_all(factors);
    }
    total
}

/// Monte Carlo estimate of `<U> - (x)_k <U_k>` for `n_spins` copies of the
/// swept spin-1/2 driven by one shared white noise `alpha eta(t) sum_k V_k`,
/// together with the second-order prediction.
///
/// Each trajectory uses the same noise samples for the composite and the
/// single-spin run. Trajectories are grouped into at most 100 batches processed
/// in a fixed order, so results do not depend on the worker count; standard
/// errors come from the batch means of the linearized difference.
pub fn classical_noise_ensemble(
    p: &ModelParams,
    nc: &ClassicalNoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<ClassicalNoiseReport> {
    p.validate()?;
    nc.validate()?;
    let n = nc.n_spins;
    let half = p.with_j(0.5);
    let h1 = majorana_hamiltonian(&half)?;
    let v = op2(spin_half().component(nc.component));
    let (n_steps, h) = nc.steps();
    let t0 = nc.span.0;
    let gen = |t: f64| op2(&h1(t).scale(-I));
    let stages = StageGenerators {
        start: (0..=n_steps).map(|k| gen(t0 + k as f64 * h)).collect(),
        mid: (0..n_steps).map(|k| gen(t0 + (k as f64 + 0.5) * h)).collect(),
        h,
    };
    let mut warnings = Vec::new();
    let strength = nc.alpha * nc.alpha * (nc.span.1 - nc.span.0);
    if strength > 0.1 {
        warnings.push(format!(
            "alpha^2 * span = {strength:.3} exceeds 0.1; second-order prediction may be inaccurate"
        ));
    }

    let n_batches = nc.n_traj.min(100);
    let bounds: Vec<(usize, usize)> = (0..n_batches)
        .map(|b| (b * nc.n_traj / n_batches, (b + 1) * nc.n_traj / n_batches))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(nc.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?;
    let dim = 1usize << n;
    let batches: Vec<BatchSums> = pool.install(|| {
        bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut sums = BatchSums {
                    count: hi - lo,
                    full: ComplexMatrix::zeros(dim, dim),
                    single: ComplexMatrix::zeros(2, 2),
                };
                let mut eta = vec![0.0; n_steps];
                let scale = 1.0 / h.sqrt();
                for traj in lo..hi {
                    let mut rng = ChaCha8Rng::seed_from_u64(nc.seed);
                    rng.set_stream(traj as u64);
                    for e in eta.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *e = z * scale;
                    }
                    sums.full += &noisy_propagator(&stages, &v, nc.alpha, &eta, n);
                    sums.single += &noisy_propagator(&stages, &v, nc.alpha, &eta, 1);
                }
                sums
            })
            .collect()
    });

    let total = nc.n_traj as f64;
    let mut full_mean = ComplexMatrix::zeros(dim, dim);
    let mut single_mean = ComplexMatrix::zeros(2, 2);
    for b in &batches {
        full_mean += &b.full;
        single_mean += &b.single;
    }
    let full_mean = full_mean.scale_real(1.0 / total);
    let single_mean = single_mean.scale_real(1.0 / total);
    let mc_difference = &full_mean - &kron_all(vec![&single_mean; n]);

    // z_b = F_b - L(S_b), with L linearizing the tensor power around the mean
    let z_mean = &full_mean - &linearized_product(&single_mean, &single_mean, n);
    let mut var = vec![0.0; dim * dim];
    for b in &batches {
        let c = b.count as f64;
        let w = c / total;
        let z_b = &b.full.scale_real(1.0 / c)
            - &linearized_product(&single_mean, &b.single.scale_real(1.0 / c), n);
        for (acc, (zb, zm)) in var.iter_mut().zip(z_b.as_slice().iter().zip(z_mean.as_slice())) {
            *acc += w * w * (zb - zm).norm_sqr();
        }
    }
    let correction = n_batches as f64 / (n_batches as f64 - 1.0);
    let entry_standard_error: Vec<f64> = var.iter().map(|v| (v * correction).sqrt()).collect();
    let statistical_error = entry_standard_error.iter().map(|s| s * s).sum::<f64>().sqrt();

    let analytic_cross_term = second_order_cross_term(p, n, nc.component, nc.alpha, nc.span, cfg)?;
    Ok(ClassicalNoiseReport {
        alpha: nc.alpha,
        n_traj: nc.n_traj,
        n_spins: n,
        seed: nc.seed,
        mc_difference,
        analytic_cross_term,
        entry_standard_error,
        statistical_error,
        warnings,
    })
}

/// Embeds a two-qubit operator on sites `(k, l)`, `k < l`, of `n` qubits.
fn embed_pair(m: &ComplexMatrix, k: usize, l: usize, n: usize) -> ComplexMatrix {
    let dim = 1usize << n;
    let (bk, bl) = (n - 1 - k, n - 1 - l);
    let mask = (1usize << bk) | (1usize << bl);
    let local = |x: usize| (((x >> bk) & 1) << 1) | ((x >> bl) & 1);
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            if r & !mask == c & !mask {
                out[(r, c)] = m[(local(r), local(c))];
            }
        }
    }
    out
}

/// Adaptive composite Simpson settings for [`second_order_cross_term`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub initial_intervals: usize,
    pub tol: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            initial_intervals: 64,
            tol: 1e-11,
            max_refinements: 12,
        }
    }
}

/// `-alpha^2 U(t) sum_{k<l} int V'_k V'_l ds` for the swept spin-1/2 copies,
/// with `V'(s) = u(s)^dagger V u(s)`.
pub fn second_order_cross_term(
    p: &ModelParams,
    n_spins: usize,
    component: Component,
    alpha: f64,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<ComplexMatrix> {
    let half = p.with_j(0.5);
    half.validate()?;
    let v = spin_half().component(component).clone();
    second_order_cross_term_with(
        majorana_hamiltonian(&half)?,
        &v,
        n_spins,
        alpha,
        span,
        cfg,
        &QuadratureConfig::default(),
    )
}

/// [`second_order_cross_term`] for any single-spin Hamiltonian `h1` and noise
/// operator `v`.
pub fn second_order_cross_term_with<F>(
    h1: F,
    v: &ComplexMatrix,
    n_spins: usize,
    alpha: f64,
    (a, b): (f64, f64),
    cfg: &IntegratorConfig,
    quad: &QuadratureConfig,
) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    if n_spins == 0 {
        return Err(Error::InvalidParameter("need at least one spin".into()));
    }
    check_qubit_cap(n_spins, DEFAULT_QUBIT_CAP)?;
    if v.rows() != 2 || v.cols() != 2 {
        return Err(Error::DimensionMismatch("noise operator must be 2x2".into()));
    }
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::InvalidParameter(format!("invalid time span [{a}, {b}]")));
    }
    let dim = 1usize << n_spins;
    if n_spins == 1 || b == a {
        return Ok(ComplexMatrix::zeros(dim, dim));
    }
    if quad.initial_intervals < 2 || !quad.initial_intervals.is_multiple_of(2) {
        return Err(Error::InvalidParameter("Simpson needs an even number of intervals".into()));
    }

    // u(s) on a grid refined by halving; even points are reused.
    let step_unitary = |s0: f64, s1: f64| crate::integrator::propagate_unitary(&h1, 2, (s0, s1), cfg);
    let mut n_int = quad.initial_intervals;
    let mut grid = vec![ComplexMatrix::identity(2)];
    for k in 0..n_int {
        let s0 = a + (b - a) * k as f64 / n_int as f64;
        let s1 = a + (b - a) * (k + 1) as f64 / n_int as f64;
        let u = step_unitary(s0, s1)?.matmul(&grid[k]);
        grid.push(u);
    }
    let integrand = |u: &ComplexMatrix| {
        let vp = u.adjoint().matmul(&v.matmul(u));
        vp.kron(&vp)
    };
    let simpson = |values: &[ComplexMatrix]| {
        let n = values.len() - 1;
        let hh = (b - a) / n as f64;
        let mut acc = ComplexMatrix::zeros(4, 4);
        for (i, f) in values.iter().enumerate() {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.axpy(Complex64::new(w * hh / 3.0, 0.0), f);
        }
        acc
    };
    let mut values: Vec<ComplexMatrix> = grid.iter().map(integrand).collect();
    let mut estimate = simpson(&values);
    let mut converged = false;
    for _ in 0..quad.max_refinements {
        let mut finer_grid = Vec::with_capacity(2 * n_int + 1);
        let mut finer_values = Vec::with_capacity(2 * n_int + 1);
        for k in 0..n_int {
            let s0 = a + (b - a) * k as f64 / n_int as f64;
            let sm = a + (b - a) * (2 * k + 1) as f64 / (2 * n_int) as f64;
            let mid = step_unitary(s0, sm)?.matmul(&grid[k]);
            finer_values.push(values[k].clone());
            finer_values.push(integrand(&mid));
            finer_grid.push(grid[k].clone());
            finer_grid.push(mid);
        }
        finer_grid.push(grid[n_int].clone());
        finer_values.push(values[n_int].clone());
        grid = finer_grid;
        values = finer_values;
        n_int *= 2;
        let refined = simpson(&values);
        let change = (&refined - &estimate).max_abs();
        estimate = refined;
        if change <= quad.tol * estimate.max_abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Quadrature(format!(
            "cross-term integral did not converge after {} refinements",
            quad.max_refinements
        )));
    }

    let mut pairs = ComplexMatrix::zeros(dim, dim);
    for k in 0..n_spins {
        for l in (k + 1)..n_spins {
            pairs += &embed_pair(&estimate, k, l, n_spins);
        }
    }
    let u_end = grid.last().expect("grid is nonempty");
    let product = kron_all(vec![u_end; n_spins]);
    Ok(product.matmul(&pairs).scale_real(-alpha * alpha))
}
