//! Monte-Carlo sweeps over signal power or user count, and spectrum dumps.

use rayon::prelude::*;
use std::sync::Arc;

use crate::{Error, Result};

use super::config::{Power, ScenarioConfig};
use super::output::RmseRecord;
use super::stats::{rmse_from_squared, trial_squared_error};
use super::trial::{Method, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Total transmit power σ_s², linear.
    Power(Vec<f64>),
    /// User count K.
    Users(Vec<usize>),
}

impl Sweep {
    pub fn var_name(&self) -> &'static str {
        match self {
            Sweep::Power(_) => "sigma_s_sq",
            Sweep::Users(_) => "K",
        }
    }

    fn points(&self, base: &ScenarioConfig) -> Vec<(f64, ScenarioConfig)> {
        match self {
            Sweep::Power(values) => values
                .iter()
                .map(|&p| {
                    let mut cfg = base.clone();
                    cfg.power.sigma_s_sq = Power(p);
                    (p, cfg)
                })
                .collect(),
            Sweep::Users(values) => values
                .iter()
                .map(|&k| {
                    let mut cfg = base.clone();
                    cfg.users.count = k;
                    (k as f64, cfg)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub record: RmseRecord,
    /// Squared angle error (deg², summed over users) per trial id; `None`
    /// where the trial failed.
    pub trial_sq_errors: Vec<Option<f64>>,
}

impl SweepPoint {
    pub fn users(&self) -> usize {
        self.record.k
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))
}

/// Runs every trial of `sim`'s configuration for one method. Parallel over
/// trials in the current rayon pool; aggregation follows trial id order.
pub fn run_point(sim: &Simulator, method: Method, sweep_var: &str, sweep_value: f64) -> Result<SweepPoint> {
    let cfg = sim.config();
    let outcomes: Vec<_> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| sim.run_trial(t, method))
        .collect();

    let mut trial_sq_errors = Vec::with_capacity(outcomes.len());
    let mut flagged = 0;
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                flagged += o.estimate.padded as usize;
                let sq = trial_squared_error(&o.estimate.angles, &o.truths, cfg.solver.pairing)?;
                trial_sq_errors.push(Some(sq));
            }
            Err(e) => {
                log::warn!("{method} at {sweep_var}={sweep_value}: {e}");
                trial_sq_errors.push(None);
                last_error = Some(e);
            }
        }
    }
    let used: Vec<f64> = trial_sq_errors.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::invalid("no trials to run")));
    }
    let record = RmseRecord {
        sweep_var: sweep_var.to_owned(),
        sweep_value,
        method: method.as_str().to_owned(),
        k: cfg.users.count,
        m: cfg.array.elements,
        p: cfg.pilots.snapshots,
        n: cfg.solver.iterations,
        sigma_s_sq: cfg.power.sigma_s_sq.0,
        sigma_n_sq: cfg.power.sigma_n_sq.0,
        sigma_t_sq: cfg.power.sigma_t_sq.0,
        trials: used.len(),
        rmse_deg: rmse_from_squared(&used, cfg.users.count),
        flagged_trials: flagged,
        seed: cfg.seed,
    };
    Ok(SweepPoint {
        record,
        trial_sq_errors,
    })
}

/// Runs `methods` at every sweep point, in order: point-major, then method.
pub fn run_sweep(base: &ScenarioConfig, sweep: &Sweep, methods: &[Method], workers: usize) -> Result<Vec<SweepPoint>> {
    let base_sim = Simulator::new(base.clone())?;
    let steering = Arc::clone(base_sim.steering());
    let pool = thread_pool(workers)?;
    let mut points = Vec::new();
    for (value, cfg) in sweep.points(base) {
        let sim = Simulator::with_steering(cfg, Arc::clone(&steering))?;
        for &method in methods {
            let point = pool.install(|| run_point(&sim, method, sweep.var_name(), value))?;
            log::info!(
                "{} {}={value:e}: rmse {:.6} deg over {} trials",
                method,
                sweep.var_name(),
                point.record.rmse_deg,
                point.record.trials
            );
            points.push(point);
        }
    }
    Ok(points)
}

/// One pseudospectrum realization.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    pub k: usize,
    pub method: Method,
    pub sigma_s_sq: f64,
    /// Degrees, ascending.
    pub truths_deg: Vec<f64>,
    pub estimate_deg: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub values: Vec<f64>,
}

/// Transmit power giving `snr_db` of mean per-cell noiseless signal power
/// over σ_n², with unit-variance polarization gains.
pub fn power_for_snr(cfg: &ScenarioConfig, snr_db: f64) -> f64 {
    cfg.power.sigma_n_sq.0 * 10f64.powf(snr_db / 10.0) / cfg.users.alpha.powi(2)
}

/// One seeded quantum realization (trial 0) per user count, at `snr_db`.
pub fn spectrum_dump(base: &ScenarioConfig, users: &[usize], snr_db: f64, workers: usize) -> Result<Vec<SpectrumTable>> {
    let mut base = base.clone();
    base.power.sigma_s_sq = Power(power_for_snr(&base, snr_db));
    let base_sim = Simulator::new(base.clone())?;
    let steering = Arc::clone(base_sim.steering());
    let pool = thread_pool(workers)?;
    pool.install(|| {
        users
            .par_iter()
            .map(|&k| {
                let mut cfg = base.clone();
                cfg.users.count = k;
                let sim = Simulator::with_steering(cfg, Arc::clone(&steering))?;
                let o = sim.run_trial(0, Method::QuantumMusic)?;
                Ok(SpectrumTable {
                    k,
                    method: o.method,
                    sigma_s_sq: sim.config().power.sigma_s_sq.0,
                    truths_deg: o.truths.iter().map(|t| t.to_degrees()).collect(),
                    estimate_deg: o.estimate.angles.iter().map(|t| t.to_degrees()).collect(),
                    theta_deg: steering.grid().angles_deg(),
                    values: o.spectrum.values,
                })
            })
            .collect()
    })
}
