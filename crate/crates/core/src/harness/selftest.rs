//! Quick invariant checks runnable from the CLI.

use crate::measurement::{generate_pilots, synth_quantum_measurements, NoiseModel, PilotKind};
use crate::music::{channel_covariance, subspace_split};
use crate::numerics::RngStream;
use crate::phase_retrieval::{gs_step, spectral_init, ExpandedSystem, GsState, PilotSystem};
use crate::scene::{
    generate_bias, generate_channel, rabi_excitation_probability, steering_vector, AtomicConstants, PolarizationMode,
    UnitSystem, UserSet,
};
use crate::Result;

use super::config::ScenarioConfig;
use super::stats::{rmse_deg, Pairing};
use super::trial::{Method, Simulator};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn run(base: &ScenarioConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let mut cfg = base.clone();
    cfg.power.sigma_n_sq.0 = 0.0;
    cfg.power.sigma_t_sq.0 = 0.0;
    let sim = Simulator::new(cfg)?;
    let step = sim.steering().grid().step_deg();
    for method in [Method::QuantumMusic, Method::RfMusic] {
        let o = sim.run_trial(0, method)?;
        let worst = o
            .estimate
            .angles
            .iter()
            .zip(&o.truths)
            .map(|(e, t)| (e - t).to_degrees().abs())
            .fold(0.0, f64::max);
        checks.push(check(
            "noiseless trial within one grid step",
            worst <= step,
            format!("{method}: worst error {worst:.3e} deg, step {step:.3e} deg"),
        ));
    }

    let consts = AtomicConstants::default();
    let geom = sim.geometry().clone();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_orth: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = RngStream::new(seed, 0xC0FFEE);
        let k = 1 + (seed as usize % 4);
        let angles: Vec<f64> = (0..k).map(|i| (40.0 + 25.0 * i as f64).to_radians()).collect();
        let users = UserSet::with_total_power(angles.clone(), 1.0, 1.0, 0.0)?;
        let channel = generate_channel(&mut rng, &geom, &users, &consts, PolarizationMode::PerUser, UnitSystem::Normalized)?;
        let pilots = generate_pilots(&mut rng, k, 100, PilotKind::UnitModulusRandomPhase)?;
        let bias = generate_bias(&mut rng, &geom, &consts, 5.0, 1.0)?;
        let noise = NoiseModel::new(if seed % 2 == 0 { 0.0 } else { 0.1 }, 0.0)?;
        let panel = synth_quantum_measurements(&channel, &pilots, &bias, &noise, &mut rng)?;
        let system = PilotSystem::new(&pilots)?;
        let z: Vec<f64> = panel.entries.row(0).iter().copied().collect();
        let b = bias.entries[0];
        let init = spectral_init(&ExpandedSystem::new(&pilots.entries, b), &z, Default::default())?;
        let mut state = GsState::start(&system, b, &z, init.channel)?;
        for _ in 0..20 {
            let next = gs_step(&state, &system, b, &z)?;
            worst_rise = worst_rise.max(next.objective - state.objective);
            state = next;
        }

        let truth = channel.entries.map(|x| x.conj());
        let split = subspace_split(&channel_covariance(&truth, 100)?, k)?;
        for &t in &angles {
            let a = steering_vector(t, &geom);
            worst_orth = worst_orth.max((split.noise_basis.adjoint() * a).norm());
        }
    }
    checks.push(check(
        "GS objective non-increasing",
        worst_rise <= 1e-12,
        format!("largest per-step increase {worst_rise:.3e}"),
    ));
    checks.push(check(
        "steering vectors orthogonal to noise subspace",
        worst_orth <= 1e-8,
        format!("max |a^H U_N| {worst_orth:.3e}"),
    ));

    let r = rmse_deg(
        &[vec![61f64.to_radians(), 92f64.to_radians()]],
        &[vec![60f64.to_radians(), 90f64.to_radians()]],
        Pairing::Sorted,
    )?;
    checks.push(check("RMSE hand case", (r - 1.5811).abs() <= 1e-4, format!("{r:.6}")));

    let mut rng = RngStream::new(1, 0);
    let worst = (0..1000)
        .map(|_| {
            let (om, t) = (rng.uniform_in(0.0, 1e3), rng.uniform_in(0.0, 1.0));
            (rabi_excitation_probability(om, t) - (om * t / 2.0).sin().powi(2)).abs()
        })
        .fold(0.0, f64::max);
    checks.push(check("Rabi population formula", worst <= 1e-15, format!("{worst:.3e}")));

    Ok(checks)
}
