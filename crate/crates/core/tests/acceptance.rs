//! Acceptance suite. Each test checks one criterion and writes a single
//! `PASS`/`FAIL` line to stderr, visible even when output is captured.

mod common;

use std::io::Write;

use common::*;
use nats_core::experiments::{
    fit_fig2, fit_power_law, run_fig2, run_robustness, run_stddev_scaling, write_fig2_csv, ExperimentConfig, Prep,
};
use nats_core::hamiltonian::{build_hamiltonian, dense_hamiltonian, energy_expectation};
use nats_core::linalg::CMatrix;
use nats_core::propagation::{evolve, SpectrumCache};
use nats_core::spin::{apply_pauli, global_axis_cycle, total_spin_apply};
use nats_core::state_prep::{
    binomial_envelope, kraus_apply, product_state, random_state, random_state_with, seeded_rng,
};
use nats_core::thermal::{
    analytic_params, partial_trace, partial_trace_state, small_parameter_report, system_charges, system_hamiltonian,
    thermal_state,
};
use nats_core::tomography::{
    expectations_from_frequencies, reconstruct_from_records, reconstruct_state, simulate_full_tomography,
};
use nats_core::{
    Boundary, ChainSpec, CycleDirection, DensityMatrix, Ensemble, FrequencyTable, PauliAxis, PrepPattern,
    PropagatorConfig, StateVector, ThermalParams, C64,
};
use rand::Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {id:>2}] {verdict} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn sized(sizes: &[usize]) -> ExperimentConfig {
    ExperimentConfig { sizes: Some(sizes.to_vec()), ..Default::default() }
}

fn charges(psi: &StateVector) -> [f64; 3] {
    PauliAxis::ALL.map(|a| psi.inner(&total_spin_apply(psi, a)).re)
}

#[test]
fn criterion_01_hamiltonian_traces() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for boundary in [Boundary::Closed, Boundary::Periodic] {
        for nq in [4, 6, 8] {
            let spec = ChainSpec::pairs(nq, boundary).with_coupling(1.3);
            let oracle = dense_h(&spec);
            let lib = dense_hamiltonian(&spec).unwrap();
            let diff = oracle.iter().zip(lib.iter()).map(|(a, b)| (a - real(*b)).norm()).fold(0.0, f64::max);
            let tr = oracle.trace().re;
            let tr2 = (&oracle * &oracle).trace().re;
            let j2 = spec.coupling * spec.coupling;
            let d = (1u64 << nq) as f64;
            let expected = match boundary {
                Boundary::Closed => 3.0 * (2.0 * nq as f64 - 3.0) * d * j2,
                Boundary::Periodic => 6.0 * nq as f64 * d * j2,
            };
            let rel = (tr2 - expected).abs() / expected;
            worst = worst.max(rel);
            if diff > 1e-12 || tr.abs() > 1e-9 || rel > 1e-9 {
                failures.push(format!("{boundary:?} Nn={nq}: Tr(H^2)={tr2} expected {expected}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("Tr(H)=0 and Tr(H^2) formulas hold, max rel err {worst:.1e}")
    } else {
        failures.join("; ")
    };
    report(1, "Hamiltonian trace identities", failures.is_empty(), &detail);
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

#[test]
fn criterion_02_conservation() {
    let mut worst = [0.0f64; 3];
    for nq in [4, 6, 8, 10] {
        let spec = ChainSpec::pairs(nq, Boundary::Periodic);
        let h = build_hamiltonian(&spec).unwrap();
        let mut starts = vec![random_state(nq, 17 + nq as u64)];
        if nq >= 6 {
            starts.push(product_state(&PrepPattern::standard(nq).unwrap()).unwrap());
        }
        for psi0 in starts {
            let e0 = energy_expectation(&psi0, &h).unwrap();
            let s0 = charges(&psi0);
            for t in [1.0, 37.5, (1u64 << nq) as f64] {
                let psi = evolve(&psi0, &h, &PropagatorConfig::dense(t)).unwrap();
                worst[0] = worst[0].max((psi.norm() - 1.0).abs());
                worst[1] = worst[1].max((energy_expectation(&psi, &h).unwrap() - e0).abs());
                let s = charges(&psi);
                worst[2] = worst[2].max((0..3).map(|a| (s[a] - s0[a]).abs()).fold(0.0, f64::max));
            }
        }
    }
    let ok = worst[0] <= 1e-10 && worst[1] <= 1e-8 && worst[2] <= 1e-8;
    report(
        2,
        "conservation under isotropic evolution",
        ok,
        &format!("norm drift {:.1e}, energy drift {:.1e}, charge drift {:.1e}", worst[0], worst[1], worst[2]),
    );
}

#[test]
fn criterion_03_thermalization_distances() {
    let rows = run_fig2(&sized(&[6, 8, 10, 12])).unwrap();
    let ordered = rows.iter().all(|r| r.d_nats < r.d_can && r.d_nats < r.d_gc);
    let decreasing = rows.windows(2).all(|w| w[1].d_nats < w[0].d_nats);
    let fit = fit_fig2(&rows).unwrap();
    let series: Vec<String> =
        rows.iter().map(|r| format!("Nn={} nats={:.4} can={:.4} gc={:.4}", r.nn, r.d_nats, r.d_can, r.d_gc)).collect();
    report(
        3,
        "NATS closest, shrinking with size",
        ordered && decreasing && fit.exponent <= -1.5,
        &format!("{}; slope in R {:.2}", series.join(", "), fit.exponent),
    );
}

#[test]
fn criterion_04_footnote_small_parameter() {
    let mut values = Vec::new();
    for nq in [6, 8] {
        let spec = ChainSpec::pairs(nq, Boundary::Periodic);
        let psi = product_state(&PrepPattern::standard(nq).unwrap()).unwrap();
        let e = energy_expectation(&psi, &build_hamiltonian(&spec).unwrap()).unwrap();
        let params = analytic_params(charges(&psi), e, &spec).unwrap();
        let report = small_parameter_report(&params, &spec);
        let p = report.iter().find(|p| p.name == "(2/3)|beta| sum mu^2/J").unwrap();
        values.push(p.value);
    }
    let ok = (values[0] - 0.667).abs() <= 0.005 && (values[1] - 0.500).abs() <= 0.005;
    report(4, "footnote small parameter", ok, &format!("Nn=6: {:.4}, Nn=8: {:.4}", values[0], values[1]));
}

#[test]
fn criterion_05_soft_measurement_scaling() {
    let cfg = ExperimentConfig { sizes: Some(vec![4, 6, 8, 10, 12]), trials: 100, seed: 2024, ..Default::default() };
    let rep = run_stddev_scaling(&cfg).unwrap();
    let e: Vec<f64> = rep.fits.iter().map(|f| f.exponent).collect();
    let targets = [0.277, 0.381, 0.566];
    let ok = e.iter().zip(targets).all(|(x, t)| (x - t).abs() <= 0.15) && e[0] <= 0.5 && e[1] <= 0.5;
    report(5, "soft-measurement std-dev exponents", ok, &format!("x {:.3}, y {:.3}, z {:.3}", e[0], e[1], e[2]));
}

#[test]
fn criterion_06_envelope_and_kraus_completeness() {
    let mut env_err: f64 = 0.0;
    for n in 1..=20usize {
        for st in (-(n as i32)..=n as i32).step_by(2) {
            let sum: f64 = (-(n as i32)..=n as i32).step_by(2).map(|s| binomial_envelope(n, s, st).unwrap()).sum();
            env_err = env_err.max((sum - 1.0).abs());
        }
    }
    let mut kraus_err: f64 = 0.0;
    let mut rng = seeded_rng(6);
    for n in 1..=10usize {
        for axis in PauliAxis::ALL {
            let phi = random_state_with(n, &mut rng);
            let psi = random_state_with(n, &mut rng);
            let mut acc = C64::new(0.0, 0.0);
            for s in (-(n as i32)..=n as i32).step_by(2) {
                acc += kraus_apply(&phi, axis, s).unwrap().inner(&kraus_apply(&psi, axis, s).unwrap());
            }
            kraus_err = kraus_err.max((acc - phi.inner(&psi)).norm());
        }
    }
    report(
        6,
        "envelope normalization and Kraus completeness",
        env_err <= 1e-12 && kraus_err <= 1e-12,
        &format!("envelope {env_err:.1e}, Kraus {kraus_err:.1e}"),
    );
}

#[test]
fn criterion_07_robustness() {
    let rows = run_robustness(&sized(&[6, 8, 10])).unwrap();
    let ok = rows.iter().all(|r| r.d_nats < r.d_can && r.d_nats < r.d_gc);
    let series: Vec<String> =
        rows.iter().map(|r| format!("Nn={} nats={:.4} can={:.4} gc={:.4}", r.nn, r.d_nats, r.d_can, r.d_gc)).collect();
    report(7, "NATS closest under anisotropy with echo", ok, &series.join(", "));
}

#[test]
fn criterion_08_tomography() {
    let spec = ChainSpec::pairs(8, Boundary::Periodic);
    let h = build_hamiltonian(&spec).unwrap();
    let psi0 = product_state(&PrepPattern::standard(8).unwrap()).unwrap();
    let psi = evolve(&psi0, &h, &PropagatorConfig::dense(256.0)).unwrap();
    let rho = partial_trace_state(&psi, &[0, 1]).unwrap();
    let exact = reconstruct_state(&expectations_from_frequencies(&FrequencyTable::exact(&rho)).unwrap()).unwrap();
    let exact_err = exact.trace_distance(&rho);

    let seeds = 24u64;
    let mut points = Vec::new();
    for shots in [1_000u64, 10_000, 100_000, 1_000_000] {
        let mean = (0..seeds)
            .map(|s| {
                let recs = simulate_full_tomography(&rho, shots, 1000 + s).unwrap();
                reconstruct_from_records(&recs).unwrap().trace_distance(&rho)
            })
            .sum::<f64>()
            / seeds as f64;
        points.push((shots as f64, mean));
    }
    let slope = fit_power_law(&points).unwrap().exponent;
    report(
        8,
        "tomography exact and shot-noise scaling",
        exact_err <= 1e-10 && (slope + 0.5).abs() <= 0.1,
        &format!("exact {exact_err:.1e}, error slope {slope:.3}, 1e6-shot error {:.1e}", points[3].1),
    );
}

fn random_spec<R: Rng>(rng: &mut R) -> ChainSpec {
    let (copies, spc) = [(2, 2), (3, 2), (2, 3), (1, 4), (1, 5), (1, 6)][rng.random_range(0..6)];
    ChainSpec {
        copies,
        sites_per_copy: spc,
        coupling: rng.random_range(0.5..1.5),
        boundary: if rng.random::<bool>() { Boundary::Periodic } else { Boundary::Closed },
        delta: rng.random_range(0.5..1.5),
        overall_sign: if rng.random::<bool>() { 1 } else { -1 },
        next_nearest: rng.random::<bool>(),
    }
}

fn state_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.distance(b)
}

#[test]
fn criterion_09_oracle_equivalence() {
    let mut worst: [(f64, &str); 8] = [
        (0.0, "matvec"),
        (0.0, "dense H"),
        (0.0, "Pauli/total spin"),
        (0.0, "axis cycle"),
        (0.0, "dense propagator"),
        (0.0, "Krylov propagator"),
        (0.0, "partial trace"),
        (0.0, "thermal state"),
    ];
    let s3 = 1.0 / 3f64.sqrt();
    let (cs, sn) = ((std::f64::consts::PI / 3.0).cos(), (std::f64::consts::PI / 3.0).sin());
    let cycle1 = M::identity(2, 2).scale(cs) - (pauli(1) + pauli(2) + pauli(3)).map(|v| v * c(0.0, sn * s3));
    for seed in 0..60u64 {
        let mut rng = seeded_rng(9000 + seed);
        let spec = random_spec(&mut rng);
        let n = spec.num_qubits();
        let oracle = dense_h(&spec);
        let h = build_hamiltonian(&spec).unwrap();
        let psi = random_state_with(n, &mut rng);
        let v = to_vec(&psi);

        let hv = h.apply(&psi).unwrap();
        let ov = &oracle * &v;
        worst[0].0 =
            worst[0].0.max(hv.amplitudes().iter().zip(ov.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        let lib = dense_hamiltonian(&spec).unwrap();
        worst[1].0 =
            worst[1].0.max(oracle.iter().zip(lib.iter()).map(|(a, b)| (a - real(*b)).norm()).fold(0.0, f64::max));

        for (k, axis) in PauliAxis::ALL.into_iter().enumerate() {
            let site = rng.random_range(0..n);
            let lib = apply_pauli(&psi, axis, site).unwrap();
            let orc = embed(n, site, &pauli(k + 1)) * &v;
            let tot = total_spin_apply(&psi, axis);
            let orc_tot = total_spin(n, k + 1) * &v;
            let e = lib.amplitudes().iter().zip(orc.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let e2 = tot.amplitudes().iter().zip(orc_tot.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst[2].0 = worst[2].0.max(e.max(e2));
        }

        let cycled = global_axis_cycle(&psi, CycleDirection::Forward);
        let u = (0..n).fold(M::identity(1, 1), |acc, _| acc.kronecker(&cycle1));
        let orc = u * &v;
        worst[3].0 =
            worst[3].0.max(cycled.amplitudes().iter().zip(orc.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));

        let t = rng.random_range(0.0..4.0);
        let reference = propagate(&oracle, &psi, t, 1);
        let dense = evolve(&psi, &h, &PropagatorConfig::dense(t)).unwrap();
        let krylov = evolve(&psi, &h, &PropagatorConfig::krylov(t)).unwrap();
        worst[4].0 = worst[4].0.max(state_diff(&dense, &reference));
        worst[5].0 = worst[5].0.max(state_diff(&krylov, &reference));

        let lib_pt = partial_trace_state(&psi, &[0, 1]).unwrap();
        let from_rho = partial_trace(&DensityMatrix::from_pure(&psi).unwrap(), &[0, 1]).unwrap();
        let orc_pt = leading_partial_trace(&psi, 2);
        worst[6].0 =
            worst[6].0.max(max_abs_diff(lib_pt.matrix(), &orc_pt)).max(max_abs_diff(from_rho.matrix(), &orc_pt));

        let h_s = system_hamiltonian(&spec, &[0, 1]).unwrap();
        let pre = spec.overall_sign as f64 * spec.coupling;
        let mut h2 = M::zeros(4, 4);
        for (k, w) in [(1, 1.0), (2, 1.0), (3, spec.delta)] {
            h2 += pauli(k).kronecker(&pauli(k)).scale(pre * w);
        }
        let q: [CMatrix; 3] = [1, 2, 3].map(|k| total_spin(2, k));
        let params = ThermalParams {
            beta: rng.random_range(-1.0..1.0),
            mu: [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        };
        let lib_th = thermal_state(&h_s, &system_charges(2), &params, Ensemble::Nats).unwrap();
        let orc_th = thermal_oracle(&h2, &q, params.beta, params.mu);
        worst[7].0 = worst[7].0.max(max_abs_diff(lib_th.matrix(), &orc_th)).max(max_abs_diff(&h_s, &h2));
    }
    SpectrumCache::global().clear();
    let ok = worst.iter().all(|(e, _)| *e <= 1e-8);
    let detail: Vec<String> = worst.iter().map(|(e, n)| format!("{n} {e:.1e}")).collect();
    report(9, "kernels match brute-force oracles over 60 seeds", ok, &detail.join(", "));
}

#[test]
fn criterion_10_determinism() {
    let render = |prep| {
        let cfg = ExperimentConfig { sizes: Some(vec![6, 8]), prep, seed: 42, ..Default::default() };
        let mut buf = Vec::new();
        write_fig2_csv(&run_fig2(&cfg).unwrap(), &mut buf).unwrap();
        buf
    };
    let mut ok = true;
    for prep in [Prep::ProductSiii, Prep::SoftMeasurement] {
        let a = render(prep);
        SpectrumCache::global().clear();
        let b = render(prep);
        ok &= a == b && !a.is_empty();
    }
    report(10, "byte-identical CSV for a fixed seed", ok, "two preparations, two runs each");
}
