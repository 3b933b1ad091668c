use nats_core::experiments::{
    fit_power_law, run_fig2, run_robustness, run_tomography_demo, ExperimentConfig, Predictions,
};
use nats_core::hamiltonian::build_hamiltonian;
use nats_core::propagation::evolve;
use nats_core::state_prep::{product_state, seeded_rng};
use nats_core::thermal::{partial_trace_state, system_charges, system_hamiltonian, thermal_state};
use nats_core::tomography::{
    outcome_probabilities, reconstruct_from_records, simulate_basis_measurement, simulate_full_tomography,
};
use nats_core::{Boundary, ChainSpec, Ensemble, PauliString, PrepPattern, PropagatorConfig, ThermalParams};
use rand_distr::{Distribution, Normal};

fn sized(sizes: &[usize]) -> ExperimentConfig {
    ExperimentConfig { sizes: Some(sizes.to_vec()), ..Default::default() }
}

#[test]
fn echo_suppresses_charge_drift() {
    let with = run_robustness(&sized(&[8])).unwrap();
    let without = run_robustness(&ExperimentConfig { echo: false, ..sized(&[8]) }).unwrap();
    assert!(without[0].charge_drift > with[0].charge_drift, "{} vs {}", without[0].charge_drift, with[0].charge_drift);
}

#[test]
fn closed_chain_uses_closed_formula() {
    let mut cfg = sized(&[6]);
    cfg.chain.boundary = Boundary::Closed;
    let row = &run_fig2(&cfg).unwrap()[0];
    let spec = ChainSpec::pairs(6, Boundary::Closed);
    let psi = product_state(&PrepPattern::standard(6).unwrap()).unwrap();
    let p = Predictions::for_state(&psi, &spec).unwrap();
    assert_eq!(row.beta, p.params.beta);
    let e = nats_core::hamiltonian::energy_expectation(&psi, &build_hamiltonian(&spec).unwrap()).unwrap();
    assert!((row.beta + e / (3.0 * 9.0)).abs() < 1e-12);
}

#[test]
fn tomography_at_a_million_shots() {
    let report = run_tomography_demo(&ExperimentConfig { shots: 1_000_000, seed: 5, ..sized(&[8]) }).unwrap();
    assert!(report.trace_distance <= 5e-3, "{}", report.trace_distance);
    assert!((report.d_reconstructed_nats - report.d_exact_nats).abs() < 5e-3);
}

#[test]
fn reconstructed_distance_converges() {
    let gap = |shots| {
        let r = run_tomography_demo(&ExperimentConfig { shots, seed: 3, ..sized(&[6]) }).unwrap();
        (r.d_reconstructed_nats - r.d_exact_nats).abs()
    };
    assert!(gap(10_000_000) < gap(1_000));
}

#[test]
fn noisy_power_law_slope() {
    let mut rng = seeded_rng(12);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let pts: Vec<(f64, f64)> = (0..10)
        .map(|k| {
            let x = 1.0 + k as f64;
            (x, 3.0 * x.powf(-1.7) * (noise.sample(&mut rng) as f64).exp())
        })
        .collect();
    let fit = fit_power_law(&pts).unwrap();
    assert!((fit.exponent + 1.7).abs() < 0.1);
}

#[test]
fn nats_frequencies_match_born_rule() {
    let h = system_hamiltonian(&ChainSpec::default(), &[0, 1]).unwrap();
    let rho = thermal_state(&h, &system_charges(2), &ThermalParams { beta: 0.4, mu: [-1.0, 0.5, 2.0] }, Ensemble::Nats)
        .unwrap();
    let shots = 200_000u64;
    let mut rng = seeded_rng(8);
    for basis in PauliString::all_bases(2) {
        let p = outcome_probabilities(&rho, &basis).unwrap();
        let rec = simulate_basis_measurement(&rho, &basis, shots, &mut rng).unwrap();
        for (c, q) in rec.counts.iter().zip(&p) {
            let sigma = (shots as f64 * q * (1.0 - q)).sqrt().max(1.0);
            assert!((*c as f64 - shots as f64 * q).abs() <= 4.0 * sigma, "{basis}");
        }
    }
}

#[test]
fn estimator_mean_approaches_truth() {
    let spec = ChainSpec::pairs(6, Boundary::Periodic);
    let psi0 = product_state(&PrepPattern::standard(6).unwrap()).unwrap();
    let psi = evolve(&psi0, &build_hamiltonian(&spec).unwrap(), &PropagatorConfig::dense(64.0)).unwrap();
    let rho = partial_trace_state(&psi, &[0, 1]).unwrap();
    let bias = |shots| {
        let mut mean = nats_core::linalg::CMatrix::zeros(4, 4);
        for seed in 0..100 {
            let rec = simulate_full_tomography(&rho, shots, seed).unwrap();
            mean += reconstruct_from_records(&rec).unwrap().matrix();
        }
        (mean.unscale(100.0) - rho.matrix()).norm()
    };
    assert!(bias(100_000) < bias(100));
}
