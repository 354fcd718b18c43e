//! Experiment configuration and the seeded, trial-parallel driver.
//!
//! Trial `i` draws everything from substream `derive_seed(seed, i)`, trials
//! run on a dedicated rayon pool and are merged in index order, so a report
//! depends only on the config and the master seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{convolve_grid, young_check_mixed, AveragingKernel};
use crate::bounds::{thm32_constants, thm33_constants, BoundInputs, Thm32Report, Thm33Report};
use crate::domain::{seq_mixed_norm, Axis, MixedExponents, ProductDomain};
use crate::error::{Error, Result};
use crate::reconstruction::{
    assemble_matrix, beta_estimate, reconstruct, sample_values, solve_dual, BetaEstimate, ReconstructionReport, SampleMatrix,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{draw_sample_set, DensityKind, Quadrature, SamplingDensity, SamplingMode, YStatistic};
use crate::space::{analyze_space, random_unit_element, CoefficientArray, Membership, QsisSpace, SpaceAnalysis};

/// Attempts at drawing an element of the membership set before a trial is
/// recorded as a membership failure.
pub const MEMBERSHIP_ATTEMPTS: u64 = 64;

/// Relative error below which a reconstruction trial counts as exact.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "verify-lemmas")]
    VerifyLemmas,
    #[serde(rename = "sampling-inequality-32")]
    SamplingInequality32,
    #[serde(rename = "sampling-inequality-33")]
    SamplingInequality33,
    #[serde(rename = "reconstruct")]
    Reconstruct,
    #[serde(rename = "bounds")]
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub axes: [Axis; 2],
    pub k: [[f64; 2]; 2],
    pub w: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// B-spline order, 0..=3.
    pub order: u32,
    pub scale: f64,
    pub generators: usize,
    pub lattice: [f64; 2],
    pub jitter: f64,
    /// Seed of the lattice perturbation.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Box,
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(flatten)]
    pub kind: DensityKind,
    #[serde(default)]
    pub mode: SamplingMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub mu: f64,
    /// Defaults to `μ C_{ρ,1} / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Defaults to `θ/α`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

impl Params {
    pub fn zeta(&self) -> f64 {
        self.zeta.unwrap_or(self.theta / self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub seed: u64,
    /// Random probes for the non-spectral constant estimates.
    pub probes: usize,
    pub domain: DomainSpec,
    pub space: SpaceSpec,
    pub kernel: KernelSpec,
    pub density: DensitySpec,
    pub exponents: MixedExponents,
    pub params: Params,
}

impl ExperimentConfig {
    /// Unit square sampled through a box kernel on `[−1/4, 1/4]²`, hat
    /// generators on a jittered half-step lattice, 128 nodes per axis.
    pub fn reference() -> Self {
        let axis = Axis::interval(-0.5, 1.5, 128).expect("valid axis");
        ExperimentConfig {
            kind: ExperimentKind::Reconstruct,
            trials: 100,
            seed: 7,
            probes: 32,
            domain: DomainSpec { axes: [axis, axis], k: [[0.0, 1.0]; 2], w: [[-0.25, 0.25]; 2] },
            space: SpaceSpec { order: 1, scale: 0.5, generators: 1, lattice: [0.5, 0.5], jitter: 0.25, seed: 3 },
            kernel: KernelSpec::Box,
            density: DensitySpec { kind: DensityKind::Uniform, mode: SamplingMode::Joint },
            exponents: MixedExponents::L2,
            params: Params { n: 16, m: 16, gamma: 0.5, theta: 0.1, alpha: 1.0, mu: 0.1, eta: None, zeta: None },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|x| x == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks that do not need the space to be built.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if self.kind != ExperimentKind::Bounds && self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if p.n == 0 || p.m == 0 {
            return Err(Error::Config("n and m must be at least 1".into()));
        }
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", p.gamma)));
        }
        if !(p.theta > 0.0 && p.alpha > 0.0) {
            return Err(Error::Config("theta and alpha must be positive".into()));
        }
        if !(p.mu > 0.0 && p.mu <= 1.0) {
            return Err(Error::Config(format!("mu must lie in (0, 1], got {}", p.mu)));
        }
        if p.eta.is_some_and(|e| !(e > 0.0)) || p.zeta.is_some_and(|z| !(z > 0.0)) {
            return Err(Error::Config("eta and zeta must be positive".into()));
        }
        MixedExponents::new(self.exponents.p, self.exponents.q)?;
        Ok(())
    }
}

/// Everything built from a config once, shared by all trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub space: QsisSpace,
    pub kernel: AveragingKernel,
    pub density: SamplingDensity,
    pub analysis: SpaceAnalysis,
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let d = &config.domain;
        let domain = ProductDomain::new(d.axes, d.k, d.w)?;
        let s = &config.space;
        let space = QsisSpace::bspline_lattice(domain, s.order, s.scale, s.generators, s.lattice, s.jitter, s.seed)?;
        let kernel = match config.kernel {
            KernelSpec::Box => AveragingKernel::boxed(domain.w()),
            KernelSpec::Gaussian { sigma } => AveragingKernel::truncated_gaussian(domain.w(), sigma)?,
        };
        let density = SamplingDensity::new(config.density.kind, domain.k(), config.density.mode)?;
        let analysis = analyze_space(&space, config.exponents, config.probes, derive_seed(config.seed, u64::MAX))?;
        Ok(Experiment { config: config.clone(), space, kernel, density, analysis })
    }

    pub fn bound_inputs(&self) -> BoundInputs {
        let (mu1, mu2) = self.space.domain().mu();
        BoundInputs {
            d: self.analysis.d,
            c_phi_tilde: self.analysis.c_phi_tilde,
            a1: self.analysis.a1,
            omega_l1: self.kernel.l1_norm(),
            mu1,
            mu2,
            c_rho_1: self.density.c_rho_1(),
            c_rho_2: self.density.c_rho_2(),
            p: self.config.exponents.p,
            q: self.config.exponents.q,
        }
    }

    pub fn eta(&self) -> f64 {
        let p = &self.config.params;
        p.eta.unwrap_or(0.5 * p.mu * self.density.c_rho_1())
    }

    pub fn thm32(&self) -> Result<Thm32Report> {
        let p = &self.config.params;
        thm32_constants(&self.bound_inputs(), p.zeta(), p.gamma, p.n, p.m)
    }

    pub fn thm33(&self) -> Result<Thm33Report> {
        let p = &self.config.params;
        thm33_constants(&self.bound_inputs(), p.mu, self.eta(), p.n, p.m)
    }

    fn sample_norm(&self, s: &[f64]) -> f64 {
        let m = self.config.params.m;
        let rows: Vec<Vec<f64>> = s.chunks(m).map(|r| r.to_vec()).collect();
        seq_mixed_norm(&rows, self.config.exponents)
    }

    /// First draw (of up to [`MEMBERSHIP_ATTEMPTS`]) accepted by `accept`.
    fn draw_member(
        &self,
        seed: u64,
        scale: f64,
        accept: impl Fn(&Membership) -> bool,
    ) -> Result<Option<(CoefficientArray, Membership, u64)>> {
        let e = self.config.exponents;
        let p = &self.config.params;
        for attempt in 0..MEMBERSHIP_ATTEMPTS {
            let (f, c) = random_unit_element(&self.space, e, derive_seed(seed, attempt))?;
            let (f, c) = (f.scale(scale), c.scale(scale));
            let conv = convolve_grid(&f, &self.kernel, self.space.domain().k())?;
            let mem = Membership::from_norms(
                f.norm(e),
                conv.norm(e),
                conv.norm(MixedExponents::L1),
                self.kernel.l1_norm(),
                p.theta,
                p.alpha,
                p.mu,
            )?;
            if accept(&mem) {
                return Ok(Some((c, mem, attempt + 1)));
            }
        }
        Ok(None)
    }

    fn samples_seed(trial_seed: u64) -> u64 {
        derive_seed(trial_seed, 1 << 20)
    }

    fn trial_32(&self, index: usize, seed: u64, thm: &Thm32Report) -> Result<TrialOutcome> {
        let alpha = self.config.params.alpha;
        let Some((c, mem, attempts)) = self.draw_member(seed, alpha, |m| m.in_v_pq_alpha_theta)? else {
            return Ok(TrialOutcome::membership_failure(index, seed));
        };
        let p = &self.config.params;
        let samples = draw_sample_set(&self.density, p.n, p.m, Self::samples_seed(seed))?;
        let s = sample_values(&self.space, &self.kernel, &c, &samples)?;
        let norm = self.sample_norm(&s);
        let (lo, hi) = (thm.a_tilde * mem.f_norm, thm.b_tilde * mem.f_norm);
        let mut diag = BTreeMap::new();
        diag.insert("f_norm".into(), mem.f_norm);
        diag.insert("conv_pq".into(), mem.conv_pq);
        diag.insert("sample_norm".into(), norm);
        diag.insert("lower".into(), lo);
        diag.insert("upper".into(), hi);
        diag.insert("attempts".into(), attempts as f64);
        Ok(TrialOutcome::new(index, seed, lo <= norm && norm <= hi, diag))
    }

    fn trial_33(&self, index: usize, seed: u64, thm: &Thm33Report) -> Result<TrialOutcome> {
        let Some((c, mem, attempts)) = self.draw_member(seed, 1.0, |m| m.in_v_omega_mu)? else {
            return Ok(TrialOutcome::membership_failure(index, seed));
        };
        let p = &self.config.params;
        let samples = draw_sample_set(&self.density, p.n, p.m, Self::samples_seed(seed))?;
        let s = sample_values(&self.space, &self.kernel, &c, &samples)?;
        let sum: f64 = s.iter().map(|x| x.abs()).sum();
        let (lo, hi) = thm.sum_bounds(self.kernel.l1_norm(), mem.f_norm);
        let mut diag = BTreeMap::new();
        diag.insert("f_norm".into(), mem.f_norm);
        diag.insert("conv_l1".into(), mem.conv_l1);
        diag.insert("sample_sum".into(), sum);
        diag.insert("lower".into(), lo);
        diag.insert("upper".into(), hi);
        diag.insert("attempts".into(), attempts as f64);
        Ok(TrialOutcome::new(index, seed, lo <= sum && sum <= hi, diag))
    }

    /// The sample matrix, samples and outcome of one reconstruct trial, for
    /// export. `Err(NotInjective)` when that trial's matrix is rank deficient.
    pub fn reconstruction_instance(&self, index: usize) -> Result<ReconstructionInstance> {
        let seed = derive_seed(self.config.seed, index as u64);
        let e = self.config.exponents;
        let p = &self.config.params;
        let (_, c) = random_unit_element(&self.space, e, derive_seed(seed, 0))?;
        let samples = draw_sample_set(&self.density, p.n, p.m, Self::samples_seed(seed))?;
        let matrix = assemble_matrix(&self.space, &self.kernel, &samples)?;
        let dual = solve_dual(&matrix)?;
        let s = sample_values(&self.space, &self.kernel, &c, &samples)?;
        let report = reconstruct(&s, &dual, &self.space)?.with_truth(&self.space, &c, e)?;
        Ok(ReconstructionInstance { matrix, samples: s, truth: c, report })
    }

    fn trial_reconstruct(&self, index: usize, seed: u64) -> Result<TrialOutcome> {
        let mut diag = BTreeMap::new();
        let inst = match self.reconstruction_instance(index) {
            Ok(i) => i,
            Err(Error::NotInjective { sigma_min, sigma_max }) => {
                diag.insert("sigma_min".into(), sigma_min);
                diag.insert("sigma_max".into(), sigma_max);
                diag.insert("injective".into(), 0.0);
                return Ok(TrialOutcome::new(index, seed, false, diag));
            }
            Err(e) => return Err(e),
        };
        let rep = &inst.report;
        let err = rep.errors.expect("truth supplied");
        diag.insert("injective".into(), 1.0);
        diag.insert("condition".into(), rep.condition);
        diag.insert("residual".into(), rep.residual);
        diag.insert("rel_pq".into(), err.rel_pq);
        diag.insert("rel_inf".into(), err.rel_inf);
        diag.insert("rel_coeff".into(), err.rel_coeff);
        let pass = err.rel_pq <= EXACT_TOL && err.rel_coeff <= EXACT_TOL;
        Ok(TrialOutcome::new(index, seed, pass, diag))
    }

    fn trial_lemmas(&self, index: usize, seed: u64) -> Result<TrialOutcome> {
        let e = self.config.exponents;
        let p = &self.config.params;
        let (f, c) = random_unit_element(&self.space, e, derive_seed(seed, 0))?;
        let d = self.space.domain();
        let w1 = self.kernel.l1_norm();
        let ceiling = self.analysis.c_phi_tilde / self.analysis.a1;
        let mut diag = BTreeMap::new();

        let sup = self.space.sup_norm(&c);
        diag.insert("sup_slack".into(), ceiling - sup);
        let young = young_check_mixed(&f, &self.kernel, d.k(), e)?;
        diag.insert("young_pq_slack".into(), young.pq);
        diag.insert("young_inf_slack".into(), young.inf);
        let conv = convolve_grid(&f, &self.kernel, d.k())?;
        let (mu1, mu2) = d.mu();
        let holder = mu2.powf((e.q - 1.0) / e.q) * mu1.powf((e.p - 1.0) / e.p) * w1;
        diag.insert("holder_slack".into(), holder - conv.norm(MixedExponents::L1));
        let y = YStatistic::new(&self.space, &self.kernel, &self.density, &c, Quadrature::Grid)?;
        let samples = draw_sample_set(&self.density, p.n, p.m, Self::samples_seed(seed))?;
        let max_y = samples
            .points()
            .iter()
            .map(|&(u, v)| y.value(u, v).map(f64::abs))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        diag.insert("y_slack".into(), ceiling * w1 - max_y);

        // the sup bound is only a theorem when a1 is exact
        let sup_ok = !self.analysis.a_exact || ceiling - sup >= -1e-9;
        let pass = sup_ok
            && young.pq >= -1e-12
            && young.inf >= -1e-12
            && diag["holder_slack"] >= -1e-12
            && (!self.analysis.a_exact || diag["y_slack"] >= -1e-12);
        Ok(TrialOutcome::new(index, seed, pass, diag))
    }
}

/// Everything one reconstruct trial computed.
#[derive(Debug, Clone)]
pub struct ReconstructionInstance {
    pub matrix: SampleMatrix,
    /// `S`, row-major in `(j, k)`.
    pub samples: Vec<f64>,
    pub truth: CoefficientArray,
    pub report: ReconstructionReport,
}

/// One trial's result; `pass` is `None` when no member of the tested set was
/// found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub pass: Option<bool>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TrialOutcome {
    fn new(index: usize, seed: u64, pass: bool, diagnostics: BTreeMap<String, f64>) -> Self {
        TrialOutcome { index, seed, pass: Some(pass), diagnostics }
    }

    fn membership_failure(index: usize, seed: u64) -> Self {
        TrialOutcome { index, seed, pass: None, diagnostics: BTreeMap::new() }
    }
}

/// Constants the experiment was run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub analysis: SpaceAnalysis,
    pub inputs: BoundInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm32: Option<Thm32Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thm33: Option<Thm33Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub constants: Constants,
    /// Trials with a verdict (excludes membership failures).
    pub evaluated: usize,
    pub successes: usize,
    pub membership_failures: usize,
    pub injectivity_failures: usize,
    pub success_rate: f64,
    /// Wilson 95% interval for the success rate.
    pub ci95: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vacuous: Option<bool>,
    /// `success_rate >= max(prob_lower, 0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_meets_bound: Option<bool>,
    /// Per-diagnostic maxima and minima over the trials.
    pub summary: BTreeMap<String, f64>,
    pub outcomes: Vec<TrialOutcome>,
    pub wall_clock_seconds: f64,
}

impl MonteCarloReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Same report with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        MonteCarloReport { wall_clock_seconds: 0.0, ..self.clone() }
    }

    /// Header and rows of the per-trial table.
    pub fn outcome_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let keys: BTreeSet<&String> = self.outcomes.iter().flat_map(|o| o.diagnostics.keys()).collect();
        let mut header = vec!["index".to_string(), "seed".into(), "pass".into()];
        header.extend(keys.iter().map(|k| k.to_string()));
        let rows = self
            .outcomes
            .iter()
            .map(|o| {
                let mut row = vec![
                    o.index.to_string(),
                    o.seed.to_string(),
                    o.pass.map_or("membership_failure".to_string(), |p| p.to_string()),
                ];
                row.extend(keys.iter().map(|k| o.diagnostics.get(*k).map_or(String::new(), |x| format!("{x:?}"))));
                row
            })
            .collect();
        (header, rows)
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    [(center - half).max(0.0), (center + half).min(1.0)]
}

fn summarize(outcomes: &[TrialOutcome]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for o in outcomes {
        for (k, &v) in &o.diagnostics {
            let hi = out.entry(format!("max_{k}")).or_insert(f64::NEG_INFINITY);
            *hi = f64::max(*hi, v);
            let lo = out.entry(format!("min_{k}")).or_insert(f64::INFINITY);
            *lo = f64::min(*lo, v);
        }
    }
    out
}

/// Runs every trial of `config` on `workers` threads.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<MonteCarloReport> {
    let start = Instant::now();
    let exp = Experiment::build(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(&exp, start))
}

fn run_in_pool(exp: &Experiment, start: Instant) -> Result<MonteCarloReport> {
    let config = &exp.config;
    let mut constants = Constants {
        analysis: exp.analysis.clone(),
        inputs: exp.bound_inputs(),
        thm32: None,
        thm33: None,
        beta: None,
    };
    let bounds_ok = exp.bound_inputs().validate().is_ok();
    if bounds_ok {
        constants.thm32 = exp.thm32().ok();
        constants.thm33 = exp.thm33().ok();
    }
    let mut prob_lower = None;
    match config.kind {
        ExperimentKind::SamplingInequality32 => {
            let t = exp.thm32()?;
            constants.thm32 = Some(t);
            prob_lower = Some(t.prob_lower);
        }
        ExperimentKind::SamplingInequality33 => {
            let t = exp.thm33()?;
            constants.thm33 = Some(t);
            prob_lower = Some(t.prob_lower);
        }
        ExperimentKind::Reconstruct => {
            constants.beta = Some(beta_estimate(&exp.space, &exp.kernel, config.exponents, config.probes, config.seed)?);
        }
        _ => {}
    }

    let trials = if config.kind == ExperimentKind::Bounds { 0 } else { config.trials };
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i as u64);
            let r = match config.kind {
                ExperimentKind::SamplingInequality32 => exp.trial_32(i, seed, constants.thm32.as_ref().expect("set above")),
                ExperimentKind::SamplingInequality33 => exp.trial_33(i, seed, constants.thm33.as_ref().expect("set above")),
                ExperimentKind::Reconstruct => exp.trial_reconstruct(i, seed),
                ExperimentKind::VerifyLemmas => exp.trial_lemmas(i, seed),
                ExperimentKind::Bounds => unreachable!("no trials"),
            };
            r.map_err(|e| Error::Trial { index: i, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let evaluated = outcomes.iter().filter(|o| o.pass.is_some()).count();
    let successes = outcomes.iter().filter(|o| o.pass == Some(true)).count();
    let injectivity_failures = outcomes.iter().filter(|o| o.diagnostics.get("injective") == Some(&0.0)).count();
    let success_rate = if evaluated == 0 { 0.0 } else { successes as f64 / evaluated as f64 };
    Ok(MonteCarloReport {
        kind: config.kind,
        seed: config.seed,
        trials,
        constants,
        evaluated,
        successes,
        membership_failures: trials - evaluated,
        injectivity_failures,
        success_rate,
        ci95: wilson_interval(successes, evaluated),
        prob_lower,
        vacuous: prob_lower.map(|p| p <= 0.0),
        rate_meets_bound: prob_lower.map(|p| success_rate >= p.max(0.0)),
        summary: summarize(&outcomes),
        outcomes,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reseeds a config's master seed deterministically (used for seed suites).
pub fn seed_suite(seed: u64, count: usize) -> Vec<u64> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| rng.random()).collect()
}
