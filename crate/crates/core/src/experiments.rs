//! Drivers for the numerical studies: thermalization distances versus chain
//! size, soft-measurement standard-deviation scaling, robustness to an
//! anisotropic coupling, and tomography of the reduced state.

use std::io::Write;

use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, energy_expectation, Boundary, ChainSpec};
use crate::propagation::{
    default_echo_steps, evolve_with_report, evolve_with_rotation_echo_guarded, Engine, PropagatorConfig,
    DEFAULT_DENSE_LIMIT,
};
use crate::spin::{total_spin_apply, PauliAxis, StateVector};
use crate::state_prep::{
    amc_prep_sequence, charge_statistics, product_state, random_state_with, seeded_rng, PrepPattern,
};
use crate::thermal::{
    analytic_params, max_small_parameter, partial_trace_state, relative_entropy, small_parameter_report,
    system_charges, system_hamiltonian, thermal_state, DensityMatrix, Ensemble, SmallParameter, ThermalParams,
};
use crate::tomography::{
    expectations_from_frequencies, reconstruct_from_records, reconstruct_state, simulate_full_tomography,
    FrequencyTable,
};

/// Qubits forming the system of interest.
pub const SYSTEM_SITES: [usize; 2] = [0, 1];
/// Largest size run without `long_run`.
pub const DEFAULT_MAX_SIZE: usize = 12;
pub const DEFAULT_SIZES: [usize; 4] = [6, 8, 10, 12];
pub const DEFAULT_STDDEV_SIZES: [usize; 5] = [4, 6, 8, 10, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prep {
    /// the fixed product state
    ProductSiii,
    /// the product state followed by soft x, y, z measurements
    SoftMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// `t = 2^Nn / |J|`
    Exponential,
    /// `t = c · Nn / |J|`
    Linear,
}

impl std::str::FromStr for TimeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(TimeMode::Exponential),
            "linear" | "lin" => Ok(TimeMode::Linear),
            other => Err(Error::Config(format!("unknown time mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Chain sizes; each study has its own default when unset.
    pub sizes: Option<Vec<usize>>,
    /// Geometry and couplings; `copies` is overridden by each size.
    pub chain: ChainSpec,
    /// Boundary assumed by the β, μ formulas. Must match `chain.boundary`.
    pub beta_formula: Option<Boundary>,
    pub prep: Prep,
    pub time_mode: TimeMode,
    pub linear_coefficient: f64,
    pub seed: u64,
    pub trials: usize,
    /// Forces an engine; by default the dense engine is used up to
    /// `dense_qubit_limit` qubits and Krylov beyond.
    pub engine: Option<Engine>,
    pub dense_qubit_limit: usize,
    pub krylov_dim: usize,
    pub step_tolerance: f64,
    /// Allows sizes above 12.
    pub long_run: bool,
    /// Isotropy parameter of the robustness study.
    pub delta: f64,
    pub echo: bool,
    pub echo_steps: Option<usize>,
    /// Shots per basis in the tomography demo; 0 uses exact probabilities.
    pub shots: u64,
    pub output: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sizes: None,
            chain: ChainSpec::default(),
            beta_formula: None,
            prep: Prep::ProductSiii,
            time_mode: TimeMode::Exponential,
            linear_coefficient: 100.0,
            seed: 0,
            trials: 100,
            engine: None,
            dense_qubit_limit: DEFAULT_DENSE_LIMIT,
            krylov_dim: 30,
            step_tolerance: 1e-12,
            long_run: false,
            delta: 0.99,
            echo: true,
            echo_steps: None,
            shots: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn sizes_or(&self, default: &[usize]) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Checks shared by every study.
    pub fn validate(&self) -> Result<()> {
        if let Some(formula) = self.beta_formula {
            if formula != self.chain.boundary {
                return Err(Error::Config(format!(
                    "β formula for {formula:?} boundaries requested on a {:?} chain",
                    self.chain.boundary
                )));
            }
        }
        if self.chain.coupling == 0.0 || !self.chain.coupling.is_finite() {
            return Err(Error::Config("coupling J must be finite and nonzero".into()));
        }
        if self.time_mode == TimeMode::Linear && (self.linear_coefficient.is_nan() || self.linear_coefficient <= 0.0) {
            return Err(Error::Config("linear time coefficient must be positive".into()));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("Δ must be finite".into()));
        }
        self.propagator(0.0, 2).validate()
    }

    fn check_chain_sizes(&self, sizes: &[usize]) -> Result<()> {
        if sizes.is_empty() {
            return Err(Error::Config("no sizes given".into()));
        }
        for &nq in sizes {
            if nq < 6 || nq % self.chain.sites_per_copy != 0 || nq % 2 != 0 {
                return Err(Error::Config(format!(
                    "size {nq} is not an even multiple of {} with at least 6 qubits",
                    self.chain.sites_per_copy
                )));
            }
            self.check_size_guard(nq)?;
        }
        Ok(())
    }

    fn check_size_guard(&self, nq: usize) -> Result<()> {
        if nq > DEFAULT_MAX_SIZE && !self.long_run {
            return Err(Error::Resource(format!("size {nq} exceeds {DEFAULT_MAX_SIZE}; enable long_run to allow it")));
        }
        Ok(())
    }

    fn spec_for(&self, nq: usize) -> ChainSpec {
        ChainSpec { copies: nq / self.chain.sites_per_copy, ..self.chain.clone() }
    }

    pub fn time_for(&self, nq: usize) -> f64 {
        let j = self.chain.coupling.abs();
        match self.time_mode {
            TimeMode::Exponential => (1u64 << nq) as f64 / j,
            TimeMode::Linear => self.linear_coefficient * nq as f64 / j,
        }
    }

    fn propagator(&self, time: f64, nq: usize) -> PropagatorConfig {
        let engine =
            self.engine.unwrap_or(if nq <= self.dense_qubit_limit { Engine::DenseEig } else { Engine::Krylov });
        PropagatorConfig {
            engine,
            time,
            krylov_dim: self.krylov_dim,
            step_tolerance: self.step_tolerance,
            dense_qubit_limit: self.dense_qubit_limit,
        }
    }

    fn rng_for(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = seeded_rng(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// One chain size of the thermalization study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    #[serde(rename = "Nn")]
    pub nn: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub beta: f64,
    pub mu: [f64; 3],
    #[serde(rename = "D_nats")]
    pub d_nats: f64,
    #[serde(rename = "D_can")]
    pub d_can: f64,
    #[serde(rename = "D_gc")]
    pub d_gc: f64,
    pub smallparam_max: f64,
    pub small_parameters: Vec<SmallParameter>,
    pub t: f64,
    pub engine: String,
}

#[derive(Serialize)]
struct Fig2CsvRow<'a> {
    #[serde(rename = "Nn")]
    nn: usize,
    #[serde(rename = "R")]
    r: usize,
    beta: f64,
    mu_x: f64,
    mu_y: f64,
    mu_z: f64,
    #[serde(rename = "D_nats")]
    d_nats: f64,
    #[serde(rename = "D_can")]
    d_can: f64,
    #[serde(rename = "D_gc")]
    d_gc: f64,
    smallparam_max: f64,
    t: f64,
    engine: &'a str,
}

impl Fig2Row {
    fn csv(&self) -> Fig2CsvRow<'_> {
        Fig2CsvRow {
            nn: self.nn,
            r: self.r,
            beta: self.beta,
            mu_x: self.mu[0],
            mu_y: self.mu[1],
            mu_z: self.mu[2],
            d_nats: self.d_nats,
            d_can: self.d_can,
            d_gc: self.d_gc,
            smallparam_max: self.smallparam_max,
            t: self.t,
            engine: &self.engine,
        }
    }
}

pub fn write_fig2_csv<W: Write>(rows: &[Fig2Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row.csv())?;
    }
    if rows.is_empty() {
        w.write_record([
            "Nn",
            "R",
            "beta",
            "mu_x",
            "mu_y",
            "mu_z",
            "D_nats",
            "D_can",
            "D_gc",
            "smallparam_max",
            "t",
            "engine",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `D(ρ‖σ)`, with a support mismatch reported as `+∞`.
pub fn distance_or_infinite(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    match relative_entropy(rho, sigma) {
        Ok(d) => Ok(d),
        Err(Error::Support { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Thermal predictions for the system of interest.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub params: ThermalParams,
    pub small_parameters: Vec<SmallParameter>,
    pub nats: DensityMatrix,
    pub canonical: DensityMatrix,
    pub grand_canonical: DensityMatrix,
}

impl Predictions {
    /// First-order β, μ from the conserved quantities of `initial` under
    /// `spec`, and the three ensembles on [`SYSTEM_SITES`].
    pub fn for_state(initial: &StateVector, spec: &ChainSpec) -> Result<Self> {
        let h = build_hamiltonian(spec)?;
        let e = energy_expectation(initial, &h)?;
        let s = total_charges(initial);
        let params = analytic_params(s, e, spec)?;
        let h_s = system_hamiltonian(spec, &SYSTEM_SITES)?;
        let q = system_charges(SYSTEM_SITES.len());
        Ok(Predictions {
            small_parameters: small_parameter_report(&params, spec),
            nats: thermal_state(&h_s, &q, &params, Ensemble::Nats)?,
            canonical: thermal_state(&h_s, &q, &params, Ensemble::Canonical)?,
            grand_canonical: thermal_state(&h_s, &q, &params, Ensemble::GrandCanonicalZ)?,
            params,
        })
    }

    /// Distances to the NATS, canonical and grand-canonical predictions.
    pub fn distances(&self, rho_s: &DensityMatrix) -> Result<[f64; 3]> {
        Ok([
            distance_or_infinite(rho_s, &self.nats)?,
            distance_or_infinite(rho_s, &self.canonical)?,
            distance_or_infinite(rho_s, &self.grand_canonical)?,
        ])
    }
}

/// `<σ_α^tot>` for α = x, y, z.
pub fn total_charges(state: &StateVector) -> [f64; 3] {
    PauliAxis::ALL.map(|a| state.inner(&total_spin_apply(state, a)).re)
}

fn initial_state(cfg: &ExperimentConfig, nq: usize) -> Result<StateVector> {
    let psi = product_state(&PrepPattern::standard(nq)?)?;
    match cfg.prep {
        Prep::ProductSiii => Ok(psi),
        Prep::SoftMeasurement => {
            let mut rng = cfg.rng_for(nq as u64);
            Ok(amc_prep_sequence(&psi, &mut rng)?.1)
        }
    }
}

fn fig2_row(cfg: &ExperimentConfig, nq: usize) -> Result<Fig2Row> {
    let spec = cfg.spec_for(nq);
    let psi0 = initial_state(cfg, nq)?;
    let predictions = Predictions::for_state(&psi0, &spec)?;
    let t = cfg.time_for(nq);
    let pc = cfg.propagator(t, nq);
    let h = build_hamiltonian(&spec)?;
    let (psi_t, _) = evolve_with_report(&psi0, &h, &pc)?;
    let rho_s = partial_trace_state(&psi_t, &SYSTEM_SITES)?;
    let [d_nats, d_can, d_gc] = predictions.distances(&rho_s)?;
    Ok(Fig2Row {
        nn: nq,
        r: spec.copies,
        beta: predictions.params.beta,
        mu: predictions.params.mu,
        d_nats,
        d_can,
        d_gc,
        smallparam_max: max_small_parameter(&predictions.small_parameters),
        small_parameters: predictions.small_parameters,
        t,
        engine: pc.engine.name().to_string(),
    })
}

/// Prepare, evolve, reduce to the first two qubits and compare with the
/// three thermal predictions, for every configured size.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<Fig2Row>> {
    cfg.validate()?;
    let sizes = cfg.sizes_or(&DEFAULT_SIZES);
    cfg.check_chain_sizes(&sizes)?;
    let mut rows = sizes.par_iter().map(|&nq| fig2_row(cfg, nq)).collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.nn);
    Ok(rows)
}

/// Power law `coefficient · x^exponent` fitted on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficient: f64,
    pub exponent: f64,
    /// Root-sum-square of the log residuals.
    pub residual: f64,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("power-law fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain(format!("power-law fit needs positive finite points, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    Ok(FitResult { coefficient: intercept.exp(), exponent: slope, residual })
}

/// Fit of the NATS distance against the number of copies R.
pub fn fit_fig2(rows: &[Fig2Row]) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.r as f64, r.d_nats)).collect();
    fit_power_law(&points)
}

/// Average post-measurement standard deviations at one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StddevRow {
    #[serde(rename = "Nn")]
    pub nn: usize,
    pub trials: usize,
    pub std_x: f64,
    pub std_y: f64,
    pub std_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StddevReport {
    pub rows: Vec<StddevRow>,
    /// Fits of the averaged std in Nn, for x, y, z.
    pub fits: [FitResult; 3],
}

pub fn write_stddev_csv<W: Write>(rows: &[StddevRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn stddev_row(cfg: &ExperimentConfig, nq: usize) -> Result<StddevRow> {
    let mut sums = [0.0; 3];
    for trial in 0..cfg.trials {
        let mut rng = cfg.rng_for(((nq as u64) << 32) | trial as u64);
        let psi = random_state_with(nq, &mut rng);
        let (_, post) = amc_prep_sequence(&psi, &mut rng)?;
        let stats = charge_statistics(&post);
        (0..3).for_each(|a| sums[a] += stats.std[a]);
    }
    let m = cfg.trials as f64;
    Ok(StddevRow { nn: nq, trials: cfg.trials, std_x: sums[0] / m, std_y: sums[1] / m, std_z: sums[2] / m })
}

/// Random state, soft x, y, z measurements, charge standard deviations;
/// averaged over `trials` states per size and fitted against Nn.
pub fn run_stddev_scaling(cfg: &ExperimentConfig) -> Result<StddevReport> {
    cfg.validate()?;
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let sizes = cfg.sizes_or(&DEFAULT_STDDEV_SIZES);
    if sizes.contains(&0) {
        return Err(Error::Config("sizes must be positive".into()));
    }
    for &nq in &sizes {
        cfg.check_size_guard(nq)?;
    }
    let mut rows = sizes.par_iter().map(|&nq| stddev_row(cfg, nq)).collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.nn);
    let fit = |f: fn(&StddevRow) -> f64| fit_power_law(&rows.iter().map(|r| (r.nn as f64, f(r))).collect::<Vec<_>>());
    let fits = [fit(|r| r.std_x)?, fit(|r| r.std_y)?, fit(|r| r.std_z)?];
    Ok(StddevReport { rows, fits })
}

/// One size of the robustness study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    #[serde(rename = "Nn")]
    pub nn: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub delta: f64,
    pub echo: bool,
    pub echo_steps: usize,
    pub beta: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_z: f64,
    #[serde(rename = "D_nats")]
    pub d_nats: f64,
    #[serde(rename = "D_can")]
    pub d_can: f64,
    #[serde(rename = "D_gc")]
    pub d_gc: f64,
    /// `max_α |<σ_α^tot>(t) - <σ_α^tot>(0)|`
    pub charge_drift: f64,
    pub smallparam_max: f64,
    pub t: f64,
    pub engine: String,
}

pub fn write_robustness_csv<W: Write>(rows: &[RobustnessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn robustness_row(cfg: &ExperimentConfig, nq: usize) -> Result<RobustnessRow> {
    let ideal = cfg.spec_for(nq);
    let actual = ChainSpec { delta: cfg.delta, overall_sign: -1, ..ideal.clone() };
    let ideal = ideal.isotropic();
    let psi0 = initial_state(cfg, nq)?;
    let predictions = Predictions::for_state(&psi0, &ideal)?;
    let t = cfg.time_for(nq);
    let h = build_hamiltonian(&actual)?;
    let steps = cfg.echo_steps.unwrap_or_else(|| default_echo_steps(nq));
    let (psi_t, engine) = if cfg.echo {
        (evolve_with_rotation_echo_guarded(&psi0, &h, t, steps, cfg.dense_qubit_limit)?, Engine::DenseEig)
    } else {
        let pc = cfg.propagator(t, nq);
        (evolve_with_report(&psi0, &h, &pc)?.0, pc.engine)
    };
    let before = total_charges(&psi0);
    let after = total_charges(&psi_t);
    let charge_drift = (0..3).map(|a| (after[a] - before[a]).abs()).fold(0.0, f64::max);
    let rho_s = partial_trace_state(&psi_t, &SYSTEM_SITES)?;
    let [d_nats, d_can, d_gc] = predictions.distances(&rho_s)?;
    let mu = predictions.params.mu;
    Ok(RobustnessRow {
        nn: nq,
        r: ideal.copies,
        delta: cfg.delta,
        echo: cfg.echo,
        echo_steps: if cfg.echo { steps } else { 0 },
        beta: predictions.params.beta,
        mu_x: mu[0],
        mu_y: mu[1],
        mu_z: mu[2],
        d_nats,
        d_can,
        d_gc,
        charge_drift,
        smallparam_max: max_small_parameter(&predictions.small_parameters),
        t,
        engine: engine.name().to_string(),
    })
}

/// Evolution under `-J Σ (σσ + σσ + Δ σσ)`, optionally with the rotation
/// echo, scored against predictions built from the isotropic chain.
pub fn run_robustness(cfg: &ExperimentConfig) -> Result<Vec<RobustnessRow>> {
    cfg.validate()?;
    let sizes = cfg.sizes_or(&DEFAULT_SIZES[..3]);
    cfg.check_chain_sizes(&sizes)?;
    if cfg.echo && sizes.iter().any(|&n| n > cfg.dense_qubit_limit) {
        return Err(Error::Resource(format!(
            "the rotation echo needs the dense engine, limited to {} qubits",
            cfg.dense_qubit_limit
        )));
    }
    let mut rows = sizes.par_iter().map(|&nq| robustness_row(cfg, nq)).collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.nn);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    #[serde(rename = "Nn")]
    pub nn: usize,
    pub shots: u64,
    /// Trace distance between the reconstructed and exact reduced states.
    pub trace_distance: f64,
    pub d_reconstructed_nats: f64,
    pub d_exact_nats: f64,
}

/// Reduced state of the thermalization run at one size, tomographed with
/// `cfg.shots` shots per basis.
pub fn run_tomography_demo(cfg: &ExperimentConfig) -> Result<TomographyReport> {
    cfg.validate()?;
    let sizes = cfg.sizes_or(&[8]);
    let &[nq] = sizes.as_slice() else {
        return Err(Error::Config(format!("tomography runs one size, got {sizes:?}")));
    };
    cfg.check_chain_sizes(&sizes)?;
    let spec = cfg.spec_for(nq);
    let psi0 = initial_state(cfg, nq)?;
    let predictions = Predictions::for_state(&psi0, &spec)?;
    let h = build_hamiltonian(&spec)?;
    let (psi_t, _) = evolve_with_report(&psi0, &h, &cfg.propagator(cfg.time_for(nq), nq))?;
    let rho_s = partial_trace_state(&psi_t, &SYSTEM_SITES)?;
    let rebuilt = if cfg.shots == 0 {
        reconstruct_state(&expectations_from_frequencies(&FrequencyTable::exact(&rho_s))?)?
    } else {
        reconstruct_from_records(&simulate_full_tomography(&rho_s, cfg.shots, cfg.seed)?)?
    };
    Ok(TomographyReport {
        nn: nq,
        shots: cfg.shots,
        trace_distance: rebuilt.trace_distance(&rho_s),
        d_reconstructed_nats: distance_or_infinite(&rebuilt, &predictions.nats)?,
        d_exact_nats: distance_or_infinite(&rho_s, &predictions.nats)?,
    })
}
