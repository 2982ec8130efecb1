//! Synthetic matrix-predictor regressions (settings I–IV × designs A–C) and the
//! replicated experiment behind the response and structure tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_gsir, tune_gsir};
use crate::cp::CpConfig;
use crate::error::{NtsdrError, Result};
use crate::feature::{scaled_factors, PreparedData, SampleSet};
use crate::linalg::{Mat, Vector};
use crate::link::LogLink;
use crate::metrics::{distance_correlation_vec, structure_dcor, ScoreReport};
use crate::model::FittedModel;
use crate::tucker::TuckerConfig;
use crate::tuning::{grid_search_prepared, Method, TuningGrid};

/// Generated sums at or below `-1` are clipped to `-1 + LOG_GUARD` before the log link.
pub const LOG_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Setting {
    I,
    II,
    III,
    IV,
}

impl TryFrom<String> for Setting {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "I" => Ok(Setting::I),
            "II" => Ok(Setting::II),
            "III" => Ok(Setting::III),
            "IV" => Ok(Setting::IV),
            other => Err(format!("setting: unknown value `{other}`, expected I, II, III or IV")),
        }
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> String {
        s.to_string()
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setting::I => "I",
            Setting::II => "II",
            Setting::III => "III",
            Setting::IV => "IV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Design {
    A,
    B,
    C,
}

impl TryFrom<String> for Design {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "A" => Ok(Design::A),
            "B" => Ok(Design::B),
            "C" => Ok(Design::C),
            other => Err(format!("design: unknown value `{other}`, expected A, B or C")),
        }
    }
}

impl From<Design> for String {
    fn from(d: Design) -> String {
        d.to_string()
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::A => "A",
            Design::B => "B",
            Design::C => "C",
        })
    }
}

/// A nonzero entry of the mean matrix `Θ` (zero-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

fn default_n_test() -> usize {
    100
}
fn default_n_reps() -> usize {
    20
}
fn default_snr() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub setting: Setting,
    pub design: Design,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_n_reps")]
    pub n_reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// `var(signal) / var(ε)`.
    #[serde(default = "default_snr")]
    pub snr_ratio: f64,
    /// Overrides the setting's default `Θ` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<ThetaEntry>>,
}

impl SimConfig {
    pub fn new(setting: Setting, design: Design, n: usize, p: usize, q: usize) -> Self {
        SimConfig {
            setting,
            design,
            n,
            p,
            q,
            n_test: default_n_test(),
            n_reps: default_n_reps(),
            seed: 0,
            snr_ratio: default_snr(),
            theta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(NtsdrError::validation("n", "need at least 2 training samples"));
        }
        if self.n_test < 2 {
            return Err(NtsdrError::validation("n_test", "need at least 2 test samples"));
        }
        if self.n_reps == 0 {
            return Err(NtsdrError::validation("n_reps", "need at least one replication"));
        }
        let min_dim = if self.setting == Setting::I { 1 } else { 2 };
        if self.p < min_dim || self.q < min_dim {
            return Err(NtsdrError::validation(
                "p",
                format!("setting {} needs p, q >= {min_dim}", self.setting),
            ));
        }
        if !(self.snr_ratio > 0.0 && self.snr_ratio.is_finite()) {
            return Err(NtsdrError::validation("snr_ratio", "must be positive and finite"));
        }
        for e in self.theta_entries() {
            if e.row >= self.p || e.col >= self.q || !e.value.is_finite() {
                return Err(NtsdrError::validation(
                    "theta",
                    format!("entry ({}, {}) outside {}x{} or non-finite", e.row, e.col, self.p, self.q),
                ));
            }
        }
        Ok(())
    }

    pub fn theta_entries(&self) -> Vec<ThetaEntry> {
        match &self.theta {
            Some(t) => t.clone(),
            None => {
                let mut out = vec![ThetaEntry { row: 0, col: 0, value: 5.0 }];
                if self.setting != Setting::I {
                    out.push(ThetaEntry { row: 1, col: 1, value: 5.0 });
                }
                out
            }
        }
    }

    pub fn theta(&self) -> Mat {
        let mut t = Mat::zeros(self.p, self.q);
        for e in self.theta_entries() {
            if e.row < self.p && e.col < self.q {
                t[(e.row, e.col)] = e.value;
            }
        }
        t
    }
}

fn rep_rng(seed: u64, rep: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 * 4 + stream);
    rng
}

/// `n + n_test` predictor matrices for replication `rep`.
pub fn gen_predictors(cfg: &SimConfig, rep: usize) -> Vec<Mat> {
    let mut rng = rep_rng(cfg.seed, rep, 0);
    let theta = cfg.theta();
    let (p, q) = (cfg.p, cfg.q);
    (0..cfg.n + cfg.n_test)
        .map(|_| {
            let z = Mat::from_fn(p, q, |_, _| StandardNormal.sample(&mut rng));
            match cfg.design {
                Design::A => &theta + z,
                Design::B => {
                    let shift = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    theta.add_scalar(shift) + z * 2f64.sqrt()
                }
                Design::C => {
                    let common: f64 = StandardNormal.sample(&mut rng);
                    (&theta + z * 0.8f64.sqrt()).add_scalar(0.2f64.sqrt() * common)
                }
            }
        })
        .collect()
}

type Component = fn(&Vector) -> f64;

fn cube1(u: &Vector) -> f64 {
    u[0].powi(3)
}
fn fifth1(v: &Vector) -> f64 {
    v[0].powi(5)
}
fn exp2(u: &Vector) -> f64 {
    (1.0 + u[1]).exp()
}
fn cube_exp(u: &Vector) -> f64 {
    u[0].powi(3) * (1.0 + u[1]).exp()
}
fn fifth_exp(v: &Vector) -> f64 {
    v[0].powi(5) * (1.0 + v[1]).exp()
}
fn log1(u: &Vector) -> f64 {
    (1.0 + u[0]).max(LOG_GUARD).ln()
}
fn sum12(u: &Vector) -> f64 {
    u[0] + u[1]
}

/// True component functions and whether they combine as all pairs (Tucker) or matched
/// pairs (CP).
pub struct TrueModel {
    pub f: Vec<Component>,
    pub g: Vec<Component>,
    pub tucker: bool,
}

impl TrueModel {
    pub fn of(setting: Setting) -> Self {
        match setting {
            Setting::I => TrueModel { f: vec![cube1], g: vec![fifth1], tucker: true },
            Setting::II => TrueModel { f: vec![cube_exp], g: vec![fifth_exp], tucker: true },
            Setting::III => TrueModel { f: vec![cube1, exp2], g: vec![fifth1, exp2], tucker: true },
            Setting::IV => TrueModel {
                f: vec![cube1, exp2, log1, sum12],
                g: vec![fifth1, exp2, log1, sum12],
                tucker: false,
            },
        }
    }

    pub fn n_features(&self) -> usize {
        if self.tucker {
            self.f.len() * self.g.len()
        } else {
            self.f.len()
        }
    }

    /// Interaction features of one factor pair, ordered as [`FittedModel::structure_features`].
    pub fn features(&self, u: &Vector, v: &Vector) -> Vec<f64> {
        let fu: Vec<f64> = self.f.iter().map(|f| f(u)).collect();
        let gv: Vec<f64> = self.g.iter().map(|g| g(v)).collect();
        if self.tucker {
            fu.iter().flat_map(|a| gv.iter().map(move |b| a * b)).collect()
        } else {
            fu.iter().zip(&gv).map(|(a, b)| a * b).collect()
        }
    }
}

/// `Σ_i Σ f_k(U_i) g_l(V_i)` for one matrix.
pub fn signal_sum(setting: Setting, x: &Mat) -> Result<f64> {
    let model = TrueModel::of(setting);
    let (us, vs, _) = scaled_factors(x)?;
    Ok(us.iter().zip(&vs).map(|(u, v)| model.features(u, v).iter().sum::<f64>()).sum())
}

/// Rows `(sample, i)` of true interaction features.
pub fn true_structure(setting: Setting, xs: &[Mat]) -> Result<Mat> {
    let model = TrueModel::of(setting);
    let mut rows = Vec::new();
    for x in xs {
        let (us, vs, _) = scaled_factors(x)?;
        for (u, v) in us.iter().zip(&vs) {
            rows.push(model.features(u, v));
        }
    }
    let k = model.n_features();
    Ok(Mat::from_fn(rows.len(), k, |a, c| rows[a][c]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub y: Vec<f64>,
    pub signal: Vec<f64>,
    pub sigma2: f64,
    /// Samples whose sum was clipped below the log singularity.
    pub clipped: usize,
}

/// Noiseless `log(1 + S)` per matrix and the clip count.
pub fn noiseless_signal(setting: Setting, xs: &[Mat]) -> Result<(Vec<f64>, usize)> {
    let sums: Vec<f64> = xs
        .par_iter()
        .map(|x| signal_sum(setting, x))
        .collect::<Result<_>>()?;
    let mut clipped = 0;
    let signal = sums
        .into_iter()
        .map(|s| {
            let s = if s <= -1.0 + LOG_GUARD {
                clipped += 1;
                -1.0 + LOG_GUARD
            } else {
                s
            };
            (1.0 + s).ln()
        })
        .collect();
    Ok((signal, clipped))
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

/// Responses with Gaussian noise of variance `sigma2`, or `var_n(signal) / snr_ratio` when
/// `sigma2` is `None`.
pub fn gen_response(cfg: &SimConfig, xs: &[Mat], sigma2: Option<f64>, rep: usize) -> Result<Response> {
    let (signal, clipped) = noiseless_signal(cfg.setting, xs)?;
    if clipped > 0 {
        log::warn!("{clipped} generated sums clipped below the log singularity");
    }
    let sigma2 = sigma2.unwrap_or_else(|| variance(&signal) / cfg.snr_ratio);
    let mut rng = rep_rng(cfg.seed, rep, 1);
    let sd = sigma2.sqrt();
    let y = signal
        .iter()
        .map(|s| {
            let e: f64 = StandardNormal.sample(&mut rng);
            s + sd * e
        })
        .collect();
    Ok(Response { y, signal, sigma2, clipped })
}

/// One replication: training samples and an independent test split.
#[derive(Debug, Clone)]
pub struct SimData {
    pub train: SampleSet,
    pub train_signal: Vec<f64>,
    pub test_x: Vec<Mat>,
    pub test_y: Vec<f64>,
    pub test_signal: Vec<f64>,
    pub sigma2: f64,
    pub clipped: usize,
}

/// Noise variance calibrated on the training signal and applied to both splits.
pub fn generate(cfg: &SimConfig, rep: usize) -> Result<SimData> {
    generate_with_noise(cfg, rep, None)
}

pub fn generate_with_noise(cfg: &SimConfig, rep: usize, sigma2: Option<f64>) -> Result<SimData> {
    cfg.validate()?;
    let mut xs = gen_predictors(cfg, rep);
    let test_x = xs.split_off(cfg.n);
    let (train_signal, _) = noiseless_signal(cfg.setting, &xs)?;
    let sigma2 = sigma2.unwrap_or_else(|| variance(&train_signal) / cfg.snr_ratio);
    let all: Vec<Mat> = xs.iter().chain(&test_x).cloned().collect();
    let resp = gen_response(cfg, &all, Some(sigma2), rep)?;
    let (y_train, y_test) = resp.y.split_at(cfg.n);
    let (s_train, s_test) = resp.signal.split_at(cfg.n);
    Ok(SimData {
        train: SampleSet::new(xs, y_train.to_vec())?,
        train_signal: s_train.to_vec(),
        test_x,
        test_y: y_test.to_vec(),
        test_signal: s_test.to_vec(),
        sigma2,
        clipped: resp.clipped,
    })
}

/// An estimator entry of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodSpec {
    Tucker { s: usize, t: usize },
    Cp { d: usize },
    Gsir { d: usize },
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Tucker { .. } => "ntsdr-tu",
            MethodSpec::Cp { .. } => "ntsdr-cp",
            MethodSpec::Gsir { .. } => "gsir",
        }
    }

    /// Dimensions used by the benchmark for each setting.
    pub fn defaults_for(setting: Setting) -> Vec<MethodSpec> {
        let (st, d) = match setting {
            Setting::I | Setting::II => (1, 1),
            Setting::III => (2, 2),
            Setting::IV => (4, 4),
        };
        vec![
            MethodSpec::Tucker { s: st, t: st },
            MethodSpec::Cp { d },
            MethodSpec::Gsir { d: 1 },
        ]
    }
}

/// Fitting controls shared by every replication of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    #[serde(default)]
    pub grid: TuningGrid,
    #[serde(default = "default_tucker_iter")]
    pub tucker_max_iter: usize,
    #[serde(default = "default_tucker_tol")]
    pub tucker_tol: f64,
    #[serde(default = "default_cp_iter")]
    pub cp_max_iter: usize,
    #[serde(default = "default_cp_tol")]
    pub cp_tol: f64,
}

fn default_tucker_iter() -> usize {
    100
}
fn default_tucker_tol() -> f64 {
    1e-6
}
fn default_cp_iter() -> usize {
    200
}
fn default_cp_tol() -> f64 {
    1e-8
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            grid: TuningGrid::default(),
            tucker_max_iter: default_tucker_iter(),
            tucker_tol: default_tucker_tol(),
            cp_max_iter: default_cp_iter(),
            cp_tol: default_cp_tol(),
        }
    }
}

/// Scores of one method in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepScores {
    pub response_dcor: f64,
    pub structure_dcor: Option<f64>,
}

fn run_ntsdr(
    method: &Method,
    opts: &ExperimentOptions,
    data: &SimData,
    prepared: &PreparedData,
    setting: Setting,
) -> Result<RepScores> {
    let tuned = grid_search_prepared(method, &opts.grid, prepared)?;
    score_model(&tuned.model, prepared, data, setting)
}

/// Response and structure scores of a fitted model on the replication's test split.
pub fn score_model(model: &FittedModel, prepared: &PreparedData, data: &SimData, setting: Setting) -> Result<RepScores> {
    let train_pred = model.predict_in_sample(&prepared.gram)?;
    let link = LogLink::fit(&train_pred, &data.train.y)?;
    let test_pred = model.predict(&data.test_x)?;
    let y_hat = link.predict(&test_pred)?;
    let response_dcor = distance_correlation_vec(&y_hat, &data.test_signal)?;
    let truth = true_structure(setting, &data.test_x)?;
    let est = model.structure_features(&data.test_x)?;
    Ok(RepScores {
        response_dcor,
        structure_dcor: Some(structure_dcor(&truth, &est)?),
    })
}

fn run_method(spec: &MethodSpec, opts: &ExperimentOptions, data: &SimData, prepared: &PreparedData, setting: Setting, seed: u64) -> Result<RepScores> {
    match *spec {
        MethodSpec::Tucker { s, t } => {
            let mut cfg = TuckerConfig::new(s, t);
            cfg.seed = seed;
            cfg.max_iter = opts.tucker_max_iter;
            cfg.tol = opts.tucker_tol;
            run_ntsdr(&Method::Tucker(cfg), opts, data, prepared, setting)
        }
        MethodSpec::Cp { d } => {
            let mut cfg = CpConfig::new(d);
            cfg.max_iter = opts.cp_max_iter;
            cfg.tol = opts.cp_tol;
            run_ntsdr(&Method::Cp(cfg), opts, data, prepared, setting)
        }
        MethodSpec::Gsir { d } => {
            let grid = opts.grid.normalized()?;
            let model = tune_gsir(&data.train, d, grid.rho[0], grid.rho[2], &grid.eps_grid)?;
            let train_pred = evaluate_gsir(&model, &data.train.xs)?;
            let link = LogLink::fit(&train_pred, &data.train.y)?;
            let y_hat = link.predict(&evaluate_gsir(&model, &data.test_x)?)?;
            Ok(RepScores {
                response_dcor: distance_correlation_vec(&y_hat, &data.test_signal)?,
                structure_dcor: None,
            })
        }
    }
}

/// Aggregated scores of one method over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub response: Option<ScoreReport>,
    pub structure: Option<ScoreReport>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    pub methods: Vec<MethodReport>,
}

/// Runs `cfg.n_reps` replications in parallel; per-replication failures are counted.
pub fn run_experiment(cfg: &SimConfig, methods: &[MethodSpec], opts: &ExperimentOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(NtsdrError::validation("methods", "at least one method is required"));
    }
    let per_rep: Vec<Vec<Result<RepScores>>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            let prepared = generate(cfg, rep).and_then(|data| {
                let prep = PreparedData::new(&data.train, opts.grid.rho)?;
                Ok((data, prep))
            });
            match prepared {
                Ok((data, prep)) => methods
                    .iter()
                    .map(|m| {
                        let seed = cfg.seed.wrapping_add(rep as u64);
                        let out = run_method(m, opts, &data, &prep, cfg.setting, seed);
                        if let Err(e) = &out {
                            log::warn!("replication {rep}, {}: {e}", m.label());
                        }
                        out
                    })
                    .collect(),
                Err(e) => {
                    log::warn!("replication {rep}: data generation failed: {e}");
                    methods
                        .iter()
                        .map(|_| Err(NtsdrError::DegenerateData(format!("replication {rep} data: {e}"))))
                        .collect()
                }
            }
        })
        .collect();
    let methods = methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let mut response = Vec::new();
            let mut structure = Vec::new();
            let mut failures = 0;
            for rep in &per_rep {
                match &rep[mi] {
                    Ok(s) => {
                        response.push(s.response_dcor);
                        if let Some(v) = s.structure_dcor {
                            structure.push(v);
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            MethodReport {
                method: m.label().to_string(),
                response: ScoreReport::from_values(response).ok(),
                structure: ScoreReport::from_values(structure).ok(),
                failures,
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        methods,
    })
}
