//! Data generation for the three reference scenarios and the Monte Carlo
//! campaign that scores every estimator against the true AUC and ROC.
//!
//! Covariates: `X ~ Uniform[-1, 1]`, `V1 ~ N(0, 1)`, `V2 ~ Bernoulli(0.5)`,
//! mutually independent. For each subject `R` is drawn first from the
//! induced selection probability and `Y` then from the posterior
//! `P(Y=1 | x, v, r)`; this factorization is exactly the joint law implied
//! by the disease model among verified subjects and the verification model.
//!
//! Randomness: ChaCha8 seeded with the campaign seed; replicate `i` draws
//! its dataset seed from stream `i + 1`, the truth sample uses stream 0.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparators::{
    full_estimates, ig_estimates, ipw_bootstrap_ci, ipw_estimates, ver_estimates,
    Method, PointEstimates,
};
use crate::curve::{estimate_auc, estimate_roc, WeightedEcdf};
use crate::data::{Dataset, DatasetBuilder};
use crate::error::{Error, Result};
use crate::inference::PluginContext;
use crate::likelihood::{fit_mle, FitOptions, FitResult};
use crate::model::{c_from_predictor, expit_neg, ParameterVector};

/// `intercept + x * x_coef + v1 * v1_coef + v1^2 * v1_sq + v2 * v2_coef`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub intercept: f64,
    pub x: f64,
    pub v1: f64,
    #[serde(default)]
    pub v1_sq: f64,
    pub v2: f64,
}

impl Predictor {
    pub fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        self.intercept + self.x * x + self.v1 * v1 + self.v1_sq * v1 * v1 + self.v2 * v2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// `P(Y=1 | x, v, R=1) = expit_neg(disease)`.
    pub disease: Predictor,
    /// `P(R=1 | x, v, y) = expit_neg(verification + beta * y)`.
    pub verification: Predictor,
    pub beta: f64,
}

impl Scenario {
    const DISEASE: Predictor = Predictor {
        intercept: 1.7,
        x: -2.5,
        v1: -1.5,
        v1_sq: 0.0,
        v2: -1.5,
    };
    const VERIFICATION: Predictor = Predictor {
        intercept: 1.3,
        x: -1.5,
        v1: -1.2,
        v1_sq: 0.0,
        v2: 1.0,
    };

    /// Missing at random.
    pub fn scenario1() -> Self {
        Self {
            name: "1".into(),
            disease: Self::DISEASE,
            verification: Self::VERIFICATION,
            beta: 0.0,
        }
    }

    /// Non-ignorable verification.
    pub fn scenario2() -> Self {
        Self {
            name: "2".into(),
            beta: -2.0,
            ..Self::scenario1()
        }
    }

    /// Non-ignorable with a `v1^2` term in both models; misspecified for
    /// the linear fit.
    pub fn scenario3() -> Self {
        Self {
            name: "3".into(),
            disease: Predictor {
                v1_sq: 0.5,
                ..Self::DISEASE
            },
            verification: Predictor {
                v1_sq: 0.5,
                ..Self::VERIFICATION
            },
            beta: -2.0,
        }
    }

    /// Built-in scenario by name (`1`, `2`, `3`) or a JSON scenario file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "1" | "scenario1" => Ok(Self::scenario1()),
            "2" | "scenario2" => Ok(Self::scenario2()),
            "3" | "scenario3" => Ok(Self::scenario3()),
            path if Path::new(path).exists() => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidArgument(format!("cannot read {path}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("bad scenario file {path}: {e}")))
            }
            other => Err(Error::InvalidArgument(format!("unknown scenario '{other}'"))),
        }
    }

    /// Generating parameter vector when both predictors are linear.
    pub fn true_eta(&self) -> Option<ParameterVector> {
        if self.disease.v1_sq != 0.0 || self.verification.v1_sq != 0.0 {
            return None;
        }
        let d = self.disease;
        let v = self.verification;
        ParameterVector::new(
            2,
            vec![d.intercept, d.x, d.v1, d.v2, self.beta, v.intercept, v.x, v.v1, v.v2],
        )
        .ok()
    }
}

/// Simulated sample: the observed data plus the true status of every record.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub data: Dataset,
    pub oracle_y: Vec<bool>,
}

struct Draw {
    x: f64,
    v: [f64; 2],
    r: bool,
    y: bool,
}

fn draw_subject(sc: &Scenario, rng: &mut ChaCha8Rng) -> Draw {
    let x = Uniform::new(-1.0, 1.0).expect("valid range").sample(rng);
    let v1: f64 = StandardNormal.sample(rng);
    let v2 = Bernoulli::new(0.5).expect("valid p").sample(rng) as u8 as f64;
    let hd = sc.disease.eval(x, v1, v2);
    let hs = sc.verification.eval(x, v1, v2);
    let pi = expit_neg(hs + c_from_predictor(hd, sc.beta));
    let r = rng.random::<f64>() < pi;
    let g = expit_neg(hd + if r { 0.0 } else { -sc.beta });
    let y = rng.random::<f64>() < g;
    Draw { x, v: [v1, v2], r, y }
}

/// Draws `n` subjects; identical output for identical `(scenario, n, seed)`.
pub fn simulate_dataset(scenario: &Scenario, n: usize, seed: u64) -> SimulatedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DatasetBuilder::with_capacity(2, n);
    let mut oracle_y = Vec::with_capacity(n);
    for _ in 0..n {
        let d = draw_subject(scenario, &mut rng);
        b.push(d.x, &d.v, d.r, d.r.then_some(d.y))
            .expect("generated records are valid");
        oracle_y.push(d.y);
    }
    SimulatedSample {
        data: b.finish().expect("n >= 1"),
        oracle_y,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub s: f64,
    pub value: f64,
    pub se: f64,
}

/// Monte Carlo reference values with batch-means standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueTargets {
    pub n_mc: usize,
    pub auc: f64,
    pub auc_se: f64,
    pub roc: Vec<TruthPoint>,
    pub p_disease: f64,
    pub p_verified: f64,
}

impl TrueTargets {
    pub fn roc_at(&self, s: f64) -> Option<f64> {
        self.roc.iter().find(|p| p.s == s).map(|p| p.value)
    }
}

const TRUTH_BATCHES: usize = 10;

fn oracle_curve(x: &[f64], y: &[bool], s_grid: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (x1, x0): (Vec<(f64, bool)>, Vec<(f64, bool)>) =
        x.iter().zip(y).map(|(&a, &b)| (a, b)).partition(|p| p.1);
    let x1: Vec<f64> = x1.into_iter().map(|p| p.0).collect();
    let x0: Vec<f64> = x0.into_iter().map(|p| p.0).collect();
    let f1 = WeightedEcdf::unweighted(&x1)?;
    let f0 = WeightedEcdf::unweighted(&x0)?;
    let auc = estimate_auc(&f0, &f1);
    let roc = s_grid
        .iter()
        .map(|&s| estimate_roc(&f0, &f1, s))
        .collect::<Result<_>>()?;
    Ok((auc, roc))
}

/// Reference AUC and ROC from the true-status ECDFs of `n_mc` draws.
pub fn true_targets(scenario: &Scenario, n_mc: usize, s_grid: &[f64], seed: u64) -> Result<TrueTargets> {
    if n_mc < 100_000 {
        return Err(Error::InvalidArgument(format!(
            "truth needs at least 1e5 draws, got {n_mc}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n_mc);
    let mut y = Vec::with_capacity(n_mc);
    let (mut n_y, mut n_r) = (0usize, 0usize);
    for _ in 0..n_mc {
        let d = draw_subject(scenario, &mut rng);
        n_y += d.y as usize;
        n_r += d.r as usize;
        x.push(d.x);
        y.push(d.y);
    }
    let (auc, roc) = oracle_curve(&x, &y, s_grid)?;
    let batch = n_mc / TRUTH_BATCHES;
    let batches = (0..TRUTH_BATCHES)
        .map(|b| oracle_curve(&x[b * batch..(b + 1) * batch], &y[b * batch..(b + 1) * batch], s_grid))
        .collect::<Result<Vec<_>>>()?;
    let se = |vals: Vec<f64>| -> f64 {
        let k = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
        // batch means of size n/k estimate the full-sample error scaled by 1/sqrt(k)
        (var / k).sqrt()
    };
    let auc_se = se(batches.iter().map(|b| b.0).collect());
    let roc = s_grid
        .iter()
        .enumerate()
        .map(|(j, &s)| TruthPoint {
            s,
            value: roc[j],
            se: se(batches.iter().map(|b| b.1[j]).collect()),
        })
        .collect();
    Ok(TrueTargets {
        n_mc,
        auc,
        auc_se,
        roc,
        p_disease: n_y as f64 / n_mc as f64,
        p_verified: n_r as f64 / n_mc as f64,
    })
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub s_points: Vec<f64>,
    pub seed: u64,
    pub alpha: f64,
    pub truth_n: usize,
    /// Bootstrap replicates for IPW percentile intervals; 0 disables them.
    pub ipw_bootstrap: usize,
    pub fit: FitOptions,
}

impl CampaignConfig {
    pub fn new(scenario: Scenario, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            replicates,
            methods: Method::ALL.to_vec(),
            s_points: vec![0.1, 0.2],
            seed,
            alpha: 0.05,
            truth_n: 2_000_000,
            ipw_bootstrap: 0,
            fit: FitOptions::default(),
        }
    }
}

/// Seed of replicate `index`'s dataset.
pub fn replicate_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    /// `AUC` or `ROC(s)`.
    pub target: String,
    pub truth: f64,
    pub replicates_used: usize,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub rb_percent: f64,
    pub mse: f64,
    pub cp: Option<f64>,
    pub al: Option<f64>,
    /// Mean plug-in `sigma^2` (asymptotic variance of `sqrt(n)` times the error).
    pub mean_sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: String,
    pub failures: usize,
    pub failure_rate: f64,
    /// Failure rate above 5%.
    pub flagged: bool,
    pub targets: Vec<TargetSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub truth: TrueTargets,
    pub methods: Vec<MethodSummary>,
}

impl McReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn target(&self, m: Method, target: &str) -> Option<&TargetSummary> {
        self.method(m)?.targets.iter().find(|t| t.target == target)
    }
}

pub fn target_label(s: Option<f64>) -> String {
    match s {
        None => "AUC".into(),
        Some(s) => format!("ROC({s})"),
    }
}

/// One method's output for one replicate: per target the estimate, and
/// optionally an interval and `sigma^2`.
#[derive(Debug, Clone)]
struct ReplicateOutcome {
    values: Vec<f64>,
    intervals: Option<Vec<(f64, f64)>>,
    sigma2: Option<Vec<f64>>,
}

fn from_points(p: PointEstimates) -> ReplicateOutcome {
    let mut values = vec![p.auc];
    values.extend(p.roc.iter().map(|r| r.1));
    ReplicateOutcome {
        values,
        intervals: None,
        sigma2: None,
    }
}

fn run_our(data: &Dataset, fit: &FitResult, cfg: &CampaignConfig) -> Result<ReplicateOutcome> {
    let ctx = PluginContext::new(data, fit)?;
    let auc = ctx.auc(cfg.alpha)?;
    let mut values = vec![auc.point];
    let mut intervals = vec![auc.ci];
    let mut sigma2 = vec![auc.sigma2];
    for &s in &cfg.s_points {
        let roc = ctx.roc(s, cfg.alpha)?;
        values.push(roc.point);
        intervals.push(roc.ci);
        sigma2.push(roc.sigma2);
    }
    Ok(ReplicateOutcome {
        values,
        intervals: Some(intervals),
        sigma2: Some(sigma2),
    })
}

fn run_replicate(cfg: &CampaignConfig, index: usize) -> Vec<Option<ReplicateOutcome>> {
    let seed = replicate_seed(cfg.seed, index);
    let sample = simulate_dataset(&cfg.scenario, cfg.n, seed);
    let data = &sample.data;
    let s = &cfg.s_points;
    let needs_fit = cfg.methods.iter().any(|m| matches!(m, Method::Our | Method::Ipw));
    let fit = if needs_fit {
        fit_mle(data, None, &cfg.fit).ok().filter(|f| f.converged)
    } else {
        None
    };
    cfg.methods
        .iter()
        .map(|m| {
            let out = match m {
                Method::Our => fit.as_ref().map(|f| run_our(data, f, cfg)),
                Method::Ipw => fit.as_ref().map(|f| {
                    let mut out = from_points(ipw_estimates(data, f, s)?);
                    if cfg.ipw_bootstrap > 0 {
                        out.intervals = Some(ipw_bootstrap_ci(
                            data,
                            f,
                            s,
                            cfg.ipw_bootstrap,
                            seed,
                            cfg.alpha,
                            &cfg.fit,
                        )?);
                    }
                    Ok(out)
                }),
                Method::Ig => Some(ig_estimates(data, s).map(from_points)),
                Method::Ver => Some(ver_estimates(data, s).map(from_points)),
                Method::Full => Some(full_estimates(data, &sample.oracle_y, s).map(from_points)),
            };
            match out {
                Some(Ok(o)) => Some(o),
                Some(Err(e)) => {
                    log::debug!("replicate {index}, {}: {e}", m.label());
                    None
                }
                None => None,
            }
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    crate::summation::pairwise_sum(&v) / v.len() as f64
}

/// Runs `replicates` independent datasets through every configured method
/// and aggregates RB, MSE, CP and AL against Monte Carlo truth.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<McReport> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("campaign needs at least one replicate".into()));
    }
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let mut truth_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    truth_rng.set_stream(0);
    let truth = true_targets(&cfg.scenario, cfg.truth_n, &cfg.s_points, truth_rng.random())?;
    let outcomes: Vec<Vec<Option<ReplicateOutcome>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| run_replicate(cfg, i))
        .collect();

    let mut truths = vec![truth.auc];
    truths.extend(truth.roc.iter().map(|p| p.value));
    let labels: Vec<String> = std::iter::once(target_label(None))
        .chain(cfg.s_points.iter().map(|&s| target_label(Some(s))))
        .collect();

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|o| o[mi].as_ref()).collect();
            let failures = cfg.replicates - ok.len();
            let failure_rate = failures as f64 / cfg.replicates as f64;
            let targets = if ok.is_empty() {
                Vec::new()
            } else {
                truths
                    .iter()
                    .enumerate()
                    .map(|(t, &a0)| summarize(&ok, t, a0, &labels[t]))
                    .collect()
            };
            MethodSummary {
                method,
                label: method.label().into(),
                failures,
                failure_rate,
                flagged: failure_rate > 0.05,
                targets,
            }
        })
        .collect();

    Ok(McReport {
        scenario: cfg.scenario.name.clone(),
        n: cfg.n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        alpha: cfg.alpha,
        truth,
        methods,
    })
}

fn summarize(ok: &[&ReplicateOutcome], t: usize, a0: f64, label: &str) -> TargetSummary {
    let est = || ok.iter().map(move |o| o.values[t]);
    let m = mean(est());
    let b = ok.len() as f64;
    let sd = if ok.len() > 1 {
        (est().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
    } else {
        0.0
    };
    let has_ci = ok.iter().all(|o| o.intervals.is_some());
    let (cp, al) = if has_ci {
        let ci = || ok.iter().map(move |o| o.intervals.as_ref().unwrap()[t]);
        (
            Some(mean(ci().map(|(lo, hi)| (lo <= a0 && a0 <= hi) as u8 as f64))),
            Some(mean(ci().map(|(lo, hi)| hi - lo))),
        )
    } else {
        (None, None)
    };
    let mean_sigma2 = ok
        .iter()
        .all(|o| o.sigma2.is_some())
        .then(|| mean(ok.iter().map(|o| o.sigma2.as_ref().unwrap()[t])));
    TargetSummary {
        target: label.to_string(),
        truth: a0,
        replicates_used: ok.len(),
        mean_estimate: m,
        sd_estimate: sd,
        rb_percent: mean(est().map(|v| (v - a0) / a0 * 100.0)),
        mse: mean(est().map(|v| (v - a0).powi(2))),
        cp,
        al,
        mean_sigma2,
    }
}

/// RB (%) and MSE of a set of estimates against `a0`.
pub fn relative_bias_and_mse(estimates: &[f64], a0: f64) -> (f64, f64) {
    let rb = mean(estimates.iter().map(|v| (v - a0) / a0 * 100.0));
    let mse = mean(estimates.iter().map(|v| (v - a0).powi(2)));
    (rb, mse)
}
