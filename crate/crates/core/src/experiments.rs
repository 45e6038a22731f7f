//! Population-transfer experiments: one sweep from `|j,-j>` to `|j,j>` per grid
//! point, and parameter sweeps over `(j, channel, T, gamma)` written to CSV.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dissipator::{Coupling, NoiseConfig};
use crate::error::{Error, Result};
use crate::integrator::{propagate_density, IntegratorConfig};
use crate::linalg::ComplexMatrix;
use crate::model::ModelParams;
use crate::spin::HalfInteger;

pub const CSV_HEADER: [&str; 9] = [
    "j",
    "gamma_over_omega",
    "kBT_over_omega",
    "channel",
    "efficiency",
    "trace_drift",
    "min_eigenvalue",
    "failed",
    "wall_time_s",
];

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo <= hi and n > 0, got [{lo}, {hi}] x {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// 25 points from 1e-4 to 1.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(1e-4, 1.0, 25).expect("static grid")
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub j_list: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub channels: Vec<Coupling>,
    pub temperatures: Vec<f64>,
    pub model: ModelParams,
    pub integrator: IntegratorConfig,
}

impl SweepSpec {
    /// Five spins, two temperatures and the default gamma grid for one channel.
    pub fn figure(channel: Coupling) -> Self {
        Self {
            j_list: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            gamma_grid: default_gamma_grid(),
            channels: vec![channel],
            temperatures: vec![0.001, 10.0],
            model: ModelParams::default(),
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::InvalidParameter(format!("{name} is empty")))
            } else {
                Ok(())
            }
        };
        nonempty("j_list", self.j_list.len())?;
        nonempty("gamma_grid", self.gamma_grid.len())?;
        nonempty("channels", self.channels.len())?;
        nonempty("temperatures", self.temperatures.len())?;
        for &j in &self.j_list {
            HalfInteger::spin(j)?;
        }
        for &g in &self.gamma_grid {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {g}")));
            }
        }
        for &t in &self.temperatures {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {t}")));
            }
        }
        self.model.validate()?;
        self.integrator.validate()?;
        for c in &self.channels {
            NoiseConfig::new(c.clone(), 0.0, 0.0).validate()?;
            for &j in &self.j_list {
                c.operator(&crate::spin::build_spin(j)?)?;
            }
        }
        Ok(())
    }

    /// Grid points in output order: j, then channel, then T, then gamma.
    pub fn points(&self) -> Vec<(f64, Coupling, f64, f64)> {
        let mut out = Vec::new();
        for &j in &self.j_list {
            for c in &self.channels {
                for &t in &self.temperatures {
                    for &g in &self.gamma_grid {
                        out.push((j, c.clone(), t, g));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub j: f64,
    pub gamma: f64,
    pub temperature: f64,
    pub channel: String,
    /// Final population of `|j,j>`; NaN if the run aborted.
    pub efficiency: f64,
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    pub failed: bool,
    pub failure: Option<String>,
    pub steps: usize,
    pub wall_time_s: f64,
}

impl ResultRecord {
    fn aborted(j: f64, noise: &NoiseConfig, message: String) -> Self {
        Self {
            j,
            gamma: noise.gamma_flat,
            temperature: noise.temperature,
            channel: noise.coupling.tag().to_string(),
            efficiency: f64::NAN,
            trace_drift: f64::NAN,
            hermiticity_drift: f64::NAN,
            min_eigenvalue: f64::NAN,
            failed: true,
            failure: Some(message),
            steps: 0,
            wall_time_s: 0.0,
        }
    }
}

/// Starts in `|j,-j>` at `-t0` and returns the population of `|j,j>` at `+t0`,
/// both in the Jz basis. A run stopped by the validity monitor comes back as
/// a record with `failed` set.
pub fn transfer_efficiency(
    j: f64,
    noise: &NoiseConfig,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<ResultRecord> {
    let start = Instant::now();
    let p = params.with_j(j);
    let dim = p.spin_number()?.dim();
    let rho0 = ComplexMatrix::basis_projector(dim, dim - 1);
    let rep = propagate_density(&p, noise, &rho0, p.window(), cfg)?;
    Ok(ResultRecord {
        j,
        gamma: noise.gamma_flat,
        temperature: noise.temperature,
        channel: noise.coupling.tag().to_string(),
        efficiency: rep.final_state[(0, 0)].re,
        trace_drift: rep.max_trace_drift,
        hermiticity_drift: rep.max_hermiticity_drift,
        min_eigenvalue: rep.min_eigenvalue_seen,
        failed: rep.failed(),
        failure: rep.failure,
        steps: rep.steps_taken,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Worker threads; `None` uses all available cores.
    pub workers: Option<usize>,
    /// Record wall-clock time per point. Off gives byte-identical reruns.
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            workers: None,
            timing: true,
        }
    }
}

/// Runs every grid point (in parallel) and returns the records in grid order.
/// Failed points are recorded, not raised. With `output`, also writes the CSV.
pub fn run_sweep(spec: &SweepSpec, output: Option<&Path>, opts: SweepOptions) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    if opts.workers == Some(0) {
        return Err(Error::InvalidParameter("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?;
    let points = spec.points();
    let records: Vec<ResultRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|(j, channel, t, g)| {
                let noise = NoiseConfig::new(channel.clone(), *g, *t);
                let mut rec = match transfer_efficiency(*j, &noise, &spec.model, &spec.integrator) {
                    Ok(r) => r,
                    Err(e) => ResultRecord::aborted(*j, &noise, e.to_string()),
                };
                if !opts.timing {
                    rec.wall_time_s = 0.0;
                }
                rec
            })
            .collect()
    });
    if let Some(path) = output {
        let file = std::fs::File::create(path)?;
        write_records(file, &records)?;
    }
    Ok(records)
}

pub fn write_records<W: Write>(w: W, records: &[ResultRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            format_f64(r.j),
            format_f64(r.gamma),
            format_f64(r.temperature),
            r.channel.clone(),
            format_f64(r.efficiency),
            format_f64(r.trace_drift),
            format_f64(r.min_eigenvalue),
            r.failed.to_string(),
            format_f64(r.wall_time_s),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads records back from the sweep CSV. Columns not in the CSV come back
/// as NaN / `None` / 0.
pub fn read_records<R: Read>(r: R) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str, col: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("column {col}: not a number: {s:?}")))
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push(ResultRecord {
            j: num(&row[0], "j")?,
            gamma: num(&row[1], "gamma_over_omega")?,
            temperature: num(&row[2], "kBT_over_omega")?,
            channel: row[3].to_string(),
            efficiency: num(&row[4], "efficiency")?,
            trace_drift: num(&row[5], "trace_drift")?,
            hermiticity_drift: f64::NAN,
            min_eigenvalue: num(&row[6], "min_eigenvalue")?,
            failed: row[7]
                .parse()
                .map_err(|_| Error::Config(format!("column failed: not a bool: {:?}", &row[7])))?,
            failure: None,
            steps: 0,
            wall_time_s: num(&row[8], "wall_time_s")?,
        });
    }
    Ok(out)
}
