//! One Monte-Carlo draw: scene, measurements, recovery and AoA estimation.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::measurement::{
    generate_pilots, noiseless_rf, panel_rms, synth_quantum_measurements, synth_rf_snapshots, NoiseModel,
    PilotMatrix,
};
use crate::music::{estimate_aoa, AngleGrid, AoAEstimate, CovarianceSource, Pseudospectrum, SteeringGrid};
use crate::numerics::RngStream;
use crate::phase_retrieval::{recover_channel_matrix, PilotSystem};
use crate::scene::{
    generate_bias, generate_channel, sample_angles, ArrayGeometry, AtomicConstants, ChannelMatrix, UserSet,
};
use crate::Result;

use super::config::ScenarioConfig;

/// Per-trial random stream purposes. Scene draws are shared by both methods
/// so the comparison uses common random numbers.
mod purpose {
    pub const ANGLES: u64 = 0;
    pub const POLARIZATION: u64 = 1;
    pub const PILOTS: u64 = 2;
    pub const BIAS: u64 = 3;
    pub const QSN: u64 = 4;
    pub const JNTN: u64 = 5;
}

fn stream(seed: u64, trial_id: u64, purpose: u64) -> RngStream {
    RngStream::new(seed, trial_id << 8 | purpose)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QuantumMusic,
    RfMusic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::QuantumMusic => "quantum_music",
            Method::RfMusic => "rf_music",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// `‖Â − conj(A)‖_F / ‖A‖_F`; quantum method only.
    pub channel_relative_error: Option<f64>,
    /// Mean final GS objective over cells; quantum method only.
    pub mean_final_objective: Option<f64>,
    /// RMS of the noiseless interior, which sets the bias magnitude.
    pub signal_rms: f64,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub method: Method,
    /// Radians, ascending.
    pub truths: Vec<f64>,
    pub estimate: AoAEstimate,
    pub diagnostics: Diagnostics,
    pub spectrum: Pseudospectrum,
}

struct Scene {
    angles: Vec<f64>,
    channel: ChannelMatrix,
    pilots: PilotMatrix,
}

/// A validated configuration with its precomputed steering grid.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ScenarioConfig,
    consts: AtomicConstants,
    geometry: ArrayGeometry,
    steering: Arc<SteeringGrid>,
}

impl Simulator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let consts = AtomicConstants::default();
        let geometry = ArrayGeometry::uniform(
            cfg.array.elements,
            cfg.array.d_over_lambda,
            consts.wavelength(),
            cfg.array.convention,
        )?;
        let [lo, hi] = cfg.users.angle_range;
        let grid = AngleGrid::new(lo, hi, cfg.solver.grid_size)?;
        let steering = Arc::new(SteeringGrid::new(&geometry, grid));
        Ok(Self {
            cfg,
            consts,
            geometry,
            steering,
        })
    }

    /// Reuses an already computed steering grid; the caller guarantees it
    /// matches the array and grid settings of `cfg`.
    pub fn with_steering(cfg: ScenarioConfig, steering: Arc<SteeringGrid>) -> Result<Self> {
        cfg.validate()?;
        let consts = AtomicConstants::default();
        let geometry = ArrayGeometry::uniform(
            cfg.array.elements,
            cfg.array.d_over_lambda,
            consts.wavelength(),
            cfg.array.convention,
        )?;
        Ok(Self {
            cfg,
            consts,
            geometry,
            steering,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn steering(&self) -> &Arc<SteeringGrid> {
        &self.steering
    }

    /// Draws the trial's user angles (radians).
    pub fn trial_angles(&self, trial_id: u64) -> Result<Vec<f64>> {
        let users = &self.cfg.users;
        let mut rng = stream(self.cfg.seed, trial_id, purpose::ANGLES);
        sample_angles(
            &mut rng,
            users.count,
            users.angle_range[0].to_radians(),
            users.angle_range[1].to_radians(),
            users.min_separation_deg.to_radians(),
        )
    }

    pub fn run_trial(&self, trial_id: u64, method: Method) -> Result<TrialOutcome> {
        self.trial_angles(trial_id)
            .and_then(|angles| self.run_with_angles(trial_id, method, angles))
            .map_err(|e| e.in_trial(trial_id))
    }

    /// Runs a trial at fixed user angles (radians); every other draw comes
    /// from the trial's streams.
    pub fn run_with_angles(&self, trial_id: u64, method: Method, angles: Vec<f64>) -> Result<TrialOutcome> {
        let scene = self.scene(trial_id, angles)?;
        let noise = NoiseModel::new(self.cfg.power.sigma_n_sq.0, self.cfg.power.sigma_t_sq.0)?;
        let clean = noiseless_rf(&scene.channel, &scene.pilots)?;
        let signal_rms = panel_rms(&clean);
        let k = scene.channel.users();
        let seed = self.cfg.seed;

        let (music, diagnostics) = match method {
            Method::QuantumMusic => {
                let mut rng = stream(seed, trial_id, purpose::BIAS);
                let bias = generate_bias(&mut rng, &self.geometry, &self.consts, self.cfg.solver.bias_ratio, signal_rms)?;
                let mut rng = stream(seed, trial_id, purpose::QSN);
                let panel = synth_quantum_measurements(&scene.channel, &scene.pilots, &bias, &noise, &mut rng)?;
                let system = PilotSystem::new(&scene.pilots)?;
                let est = recover_channel_matrix(&system, &bias, &panel, &self.cfg.recovery_options())?;
                let truth = scene.channel.entries.map(|x| x.conj());
                let rel = (&est.matrix - &truth).norm() / truth.norm();
                let mean_obj = est.final_objectives.iter().sum::<f64>() / est.final_objectives.len() as f64;
                let music = estimate_aoa(
                    CovarianceSource::Channel {
                        a_hat: &est.matrix,
                        snapshots: scene.pilots.snapshots(),
                    },
                    k,
                    &self.steering,
                )?;
                (
                    music,
                    Diagnostics {
                        channel_relative_error: Some(rel),
                        mean_final_objective: Some(mean_obj),
                        signal_rms,
                    },
                )
            }
            Method::RfMusic => {
                let mut rng = stream(seed, trial_id, purpose::JNTN);
                let panel = synth_rf_snapshots(&scene.channel, &scene.pilots, &noise, &mut rng)?;
                let music = estimate_aoa(CovarianceSource::Snapshots(&panel), k, &self.steering)?;
                (
                    music,
                    Diagnostics {
                        signal_rms,
                        ..Diagnostics::default()
                    },
                )
            }
        };

        let mut truths = scene.angles;
        truths.sort_by(f64::total_cmp);
        Ok(TrialOutcome {
            trial_id,
            method,
            truths,
            estimate: music.estimate,
            diagnostics,
            spectrum: music.spectrum,
        })
    }

    fn scene(&self, trial_id: u64, angles: Vec<f64>) -> Result<Scene> {
        let cfg = &self.cfg;
        let seed = cfg.seed;
        let users = UserSet::with_total_power(
            angles.clone(),
            cfg.power.sigma_s_sq.0,
            cfg.users.alpha,
            cfg.users.min_separation_deg.to_radians() * (1.0 - 1e-9),
        )?;
        let mut rng = stream(seed, trial_id, purpose::POLARIZATION);
        let channel = generate_channel(
            &mut rng,
            &self.geometry,
            &users,
            &self.consts,
            cfg.users.polarization_mode,
            cfg.power.units,
        )?;
        let mut rng = stream(seed, trial_id, purpose::PILOTS);
        let pilots = generate_pilots(&mut rng, users.len(), cfg.pilots.snapshots, cfg.pilots.pilot_kind)?;
        Ok(Scene {
            angles,
            channel,
            pilots,
        })
    }
}
