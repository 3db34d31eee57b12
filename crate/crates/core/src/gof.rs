//! Two-step model check with unweighted-sum-of-squares statistics.
//!
//! Step one tests the disease model on verified records with
//! `T1 = sum_{r=1} (y - p)^2 - p (1 - p)`; step two tests the induced
//! verification probability on all records with
//! `T2 = sum (r - pi)^2 - pi (1 - pi)`. Each statistic is standardized by a
//! case-resampling bootstrap standard error and referred to N(0, 1)
//! (two-sided). The second test is meaningful once the first passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, FitOptions, FitResult};
use crate::logistic::{design_matrix, fit_logistic};
use crate::model::{expit_neg, linear_predictor, pi_fn, ParameterVector};

pub const DEFAULT_REPLICATES: usize = 200;
const MAX_FAILURE_RATE: f64 = 0.10;
const MIN_VERIFIED: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct GofResult {
    /// `T / se(T)`.
    pub statistic: f64,
    pub raw_t: f64,
    pub se_boot: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub failed: usize,
    pub replicate_ts: Vec<f64>,
}

fn sum_of_squares_stat(outcomes: impl Iterator<Item = (bool, f64)>) -> f64 {
    outcomes
        .map(|(o, p)| {
            let d = o as u8 as f64 - p;
            d * d - p * (1.0 - p)
        })
        .sum()
}

fn two_sided_p(z: f64) -> f64 {
    (2.0 * (1.0 - Normal::standard().cdf(z.abs()))).clamp(0.0, 1.0)
}

fn bootstrap<F>(replicates: usize, seed: u64, n: usize, stat: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if replicates < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 replicates".into()));
    }
    let draws: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&rows).filter(|t| t.is_finite())
        })
        .collect();
    let ts: Vec<f64> = draws.iter().flatten().copied().collect();
    let failed = replicates - ts.len();
    if failed as f64 > MAX_FAILURE_RATE * replicates as f64 || ts.len() < 2 {
        return Err(Error::Bootstrap {
            failed,
            total: replicates,
        });
    }
    Ok((ts, failed))
}

fn finish(raw_t: f64, ts: Vec<f64>, failed: usize, replicates: usize) -> Result<GofResult> {
    let k = ts.len() as f64;
    let m = ts.iter().sum::<f64>() / k;
    let se = (ts.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    if !(se > 0.0) {
        return Err(Error::Numerical("bootstrap standard error is zero".into()));
    }
    let statistic = raw_t / se;
    Ok(GofResult {
        statistic,
        raw_t,
        se_boot: se,
        p_value: two_sided_p(statistic),
        replicates,
        failed,
        replicate_ts: ts,
    })
}

fn complete_case_stat(data: &Dataset, rows: &[usize]) -> Option<f64> {
    let m = data.p() + 2;
    let design = design_matrix(data, rows.iter().copied());
    let y: Vec<bool> = rows.iter().map(|&i| data.yi(i) == Some(true)).collect();
    let fit = fit_logistic(&design, m, &y).ok()?;
    Some(sum_of_squares_stat(
        design.chunks_exact(m).zip(&y).map(|(z, &yi)| (yi, fit.prob(z))),
    ))
}

/// Disease-model check on verified records.
pub fn gof_disease(data: &Dataset, replicates: usize, seed: u64) -> Result<GofResult> {
    let rows = data.verified_rows();
    let (pos, neg) = data.verified_class_counts();
    if rows.len() < MIN_VERIFIED || pos == 0 || neg == 0 {
        return Err(Error::DegenerateGroup(format!(
            "disease-model test needs at least {MIN_VERIFIED} verified records with both classes"
        )));
    }
    let raw_t = complete_case_stat(data, &rows)
        .ok_or_else(|| Error::Numerical("complete-case logistic fit failed".into()))?;
    let (ts, failed) = bootstrap(replicates, seed, rows.len(), |idx| {
        let picked: Vec<usize> = idx.iter().map(|&k| rows[k]).collect();
        complete_case_stat(data, &picked)
    })?;
    finish(raw_t, ts, failed, replicates)
}

/// `T2` at `eta` over all records.
pub fn verification_statistic(data: &Dataset, eta: &ParameterVector) -> f64 {
    sum_of_squares_stat((0..data.n()).map(|i| {
        let pi = pi_fn(data.xi(i), data.vi(i), eta).expect("dimensions checked by caller");
        (data.ri(i), pi)
    }))
}

/// Check of the induced verification probability given a converged fit.
/// Each bootstrap replicate refits the joint model starting from `fit`.
pub fn gof_verification(
    data: &Dataset,
    fit: &FitResult,
    replicates: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<GofResult> {
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: fit.iterations,
            score_norm: fit.score_norm,
        });
    }
    if fit.eta_hat.p() != data.p() {
        return Err(Error::Dimension {
            expected: data.p(),
            got: fit.eta_hat.p(),
        });
    }
    let raw_t = verification_statistic(data, &fit.eta_hat);
    let (ts, failed) = bootstrap(replicates, seed, data.n(), |rows| {
        let sample = data.subset(rows).ok()?;
        let refit = fit_mle(&sample, Some(&fit.eta_hat), opts).ok()?;
        refit
            .converged
            .then(|| verification_statistic(&sample, &refit.eta_hat))
    })?;
    finish(raw_t, ts, failed, replicates)
}

/// Disease-model `T1` for given coefficients, without bootstrap.
pub fn disease_statistic(data: &Dataset, mu_coefs: &[f64]) -> f64 {
    sum_of_squares_stat((0..data.n()).filter_map(|i| {
        let y = data.yi(i)?;
        Some((y, expit_neg(linear_predictor(mu_coefs, data.xi(i), data.vi(i)))))
    }))
}
