use proptest::prelude::*;
use qmusic::harness::{read_records, write_records, Method, OutputFormat, RmseRecord, ScenarioConfig, Simulator};

fn noiseless() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.power.sigma_n_sq.0 = 0.0;
    cfg.power.sigma_t_sq.0 = 0.0;
    cfg
}

fn worst_error_deg(est: &[f64], truth: &[f64]) -> f64 {
    est.iter()
        .zip(truth)
        .map(|(e, t)| (e - t).to_degrees().abs())
        .fold(0.0, f64::max)
}

#[test]
fn noiseless_three_users_end_to_end() {
    let sim = Simulator::new(noiseless()).unwrap();
    let step = sim.steering().grid().step_deg();
    assert!((step - 120.0 / 16384.0).abs() < 1e-15);
    let angles: Vec<f64> = [60.0f64, 90.0, 120.0].iter().map(|d| d.to_radians()).collect();
    for method in [Method::QuantumMusic, Method::RfMusic] {
        let o = sim.run_with_angles(0, method, angles.clone()).unwrap();
        assert!(!o.estimate.padded);
        let worst = worst_error_deg(&o.estimate.angles, &o.truths);
        assert!(worst <= step, "{method}: {worst}");
    }
}

#[test]
fn noiseless_random_trials_within_grid_bound() {
    let sim = Simulator::new(noiseless()).unwrap();
    let step = sim.steering().grid().step_deg();
    for t in 0..10 {
        for method in [Method::QuantumMusic, Method::RfMusic] {
            let o = sim.run_trial(t, method).unwrap();
            let worst = worst_error_deg(&o.estimate.angles, &o.truths);
            assert!(worst <= step, "trial {t} {method}: {worst}");
        }
        let q = sim.run_trial(t, Method::QuantumMusic).unwrap();
        assert!(q.diagnostics.channel_relative_error.unwrap() < 1e-6);
    }
}

#[test]
fn run_trial_is_reproducible() {
    let sim = Simulator::new(ScenarioConfig::default()).unwrap();
    let again = Simulator::new(ScenarioConfig::default()).unwrap();
    for method in [Method::QuantumMusic, Method::RfMusic] {
        let a = sim.run_trial(17, method).unwrap();
        let b = again.run_trial(17, method).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.spectrum.values, b.spectrum.values);
    }
}

#[test]
fn grid_refinement_does_not_hurt_noiseless_rmse() {
    let mut coarse = noiseless();
    coarse.solver.grid_size = 4096;
    let mut fine = coarse.clone();
    fine.solver.grid_size = 8192;
    let (c, f) = (Simulator::new(coarse).unwrap(), Simulator::new(fine).unwrap());
    for t in 0..5 {
        let ec = c.run_trial(t, Method::QuantumMusic).unwrap();
        let ef = f.run_trial(t, Method::QuantumMusic).unwrap();
        let sq = |o: &qmusic::harness::TrialOutcome| -> f64 {
            o.estimate.angles.iter().zip(&o.truths).map(|(e, t)| (e - t).powi(2)).sum()
        };
        assert!(sq(&ef) <= sq(&ec) + 1e-24, "trial {t}");
    }
}

#[test]
fn empty_record_file_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_records(&path, &[], OutputFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text,
        "sweep_var,sweep_value,method,K,M,P,N,sigma_s_sq,sigma_n_sq,sigma_t_sq,trials,rmse_deg,flagged_trials,seed\n"
    );
    assert!(read_records(&path, OutputFormat::Csv).unwrap().is_empty());
}

fn record_strategy() -> impl Strategy<Value = RmseRecord> {
    (
        prop::bool::ANY,
        1e-22f64..1e-14,
        prop::bool::ANY,
        (1usize..8, 8usize..64, 8usize..200, 0usize..100),
        (0.0f64..1e-17, 0.0f64..1e-16),
        (1usize..2000, 0.0f64..90.0, 0usize..50, any::<u64>()),
    )
        .prop_map(|(power, value, quantum, (k, m, p, n), (sn, st), (trials, rmse, flagged, seed))| RmseRecord {
            sweep_var: if power { "sigma_s_sq".into() } else { "K".into() },
            sweep_value: value,
            method: if quantum { "quantum_music".into() } else { "rf_music".into() },
            k,
            m,
            p,
            n,
            sigma_s_sq: value,
            sigma_n_sq: sn,
            sigma_t_sq: st,
            trials,
            rmse_deg: rmse,
            flagged_trials: flagged,
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn records_round_trip(records in prop::collection::vec(record_strategy(), 100)) {
        let dir = tempfile::tempdir().unwrap();
        for format in [OutputFormat::Csv, OutputFormat::Jsonl] {
            let path = dir.path().join("records");
            write_records(&path, &records, format).unwrap();
            prop_assert_eq!(&read_records(&path, format).unwrap(), &records);
        }
    }
}
