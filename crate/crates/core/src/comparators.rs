//! The proposed estimator and the four reference estimators it is compared
//! against: inverse probability weighting, the ignorable (MAR) plug-in,
//! verified-only, and full-data (simulation only).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{estimate_auc, estimate_cdfs, estimate_roc, WeightedEcdf};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, FitOptions, FitResult};
use crate::logistic::fit_disease_complete_case;
use crate::model::{expit_neg, linear_predictor, ParameterVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Joint likelihood under the non-ignorable verification model.
    Our,
    /// Inverse probability weighted Mann-Whitney (approximate IPW).
    Ipw,
    /// Posterior weighting with `beta` fixed at 0.
    Ig,
    /// Verified subjects only.
    Ver,
    /// All subjects with their true status.
    Full,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Our, Method::Ipw, Method::Ig, Method::Ver, Method::Full];

    pub fn label(self) -> &'static str {
        match self {
            Method::Our => "Our",
            Method::Ipw => "IPW (approx.)",
            Method::Ig => "IG",
            Method::Ver => "VER",
            Method::Full => "Full",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Our => "our",
            Method::Ipw => "ipw",
            Method::Ig => "ig",
            Method::Ver => "ver",
            Method::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "our" => Ok(Method::Our),
            "ipw" => Ok(Method::Ipw),
            "ig" => Ok(Method::Ig),
            "ver" => Ok(Method::Ver),
            "full" => Ok(Method::Full),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEstimates {
    pub auc: f64,
    /// `(s, ROC(s))` in the requested order.
    pub roc: Vec<(f64, f64)>,
}

/// Weighted Mann-Whitney `P(X1 > X0) + P(X1 = X0) / 2` over two weighted
/// samples, in `O(n log n)`.
pub fn weighted_mann_whitney(x1: &[f64], w1: &[f64], x0: &[f64], w0: &[f64]) -> Result<f64> {
    let t1: f64 = w1.iter().sum();
    let t0: f64 = w0.iter().sum();
    if !(t1 > 0.0 && t0 > 0.0) {
        return Err(Error::DegenerateGroup("Mann-Whitney needs both groups".into()));
    }
    let mut all: Vec<(f64, bool, f64)> = x1
        .iter()
        .zip(w1)
        .map(|(&x, &w)| (x, true, w))
        .chain(x0.iter().zip(w0).map(|(&x, &w)| (x, false, w)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below0 = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut tie1, mut tie0) = (0.0, 0.0);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                tie1 += all[j].2;
            } else {
                tie0 += all[j].2;
            }
            j += 1;
        }
        acc += tie1 * (below0 + 0.5 * tie0);
        below0 += tie0;
        i = j;
    }
    Ok(acc / (t1 * t0))
}

fn split_by_label<'a>(
    x: impl Iterator<Item = (f64, bool, f64)> + 'a,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut x1, mut w1, mut x0, mut w0) = (vec![], vec![], vec![], vec![]);
    for (xi, yi, wi) in x {
        if yi {
            x1.push(xi);
            w1.push(wi);
        } else {
            x0.push(xi);
            w0.push(wi);
        }
    }
    (x1, w1, x0, w0)
}

/// AUC by weighted Mann-Whitney, ROC from the weighted class ECDFs.
fn labelled_estimates(
    samples: impl Iterator<Item = (f64, bool, f64)>,
    s_points: &[f64],
) -> Result<PointEstimates> {
    let (x1, w1, x0, w0) = split_by_label(samples);
    if x1.is_empty() || x0.is_empty() {
        return Err(Error::DegenerateGroup(format!(
            "need both classes (diseased {}, healthy {})",
            x1.len(),
            x0.len()
        )));
    }
    let auc = weighted_mann_whitney(&x1, &w1, &x0, &w0)?;
    let f1 = WeightedEcdf::new(&x1, &w1)?;
    let f0 = WeightedEcdf::new(&x0, &w0)?;
    let roc = s_points
        .iter()
        .map(|&s| Ok((s, estimate_roc(&f0, &f1, s)?)))
        .collect::<Result<_>>()?;
    Ok(PointEstimates { auc, roc })
}

fn posterior_estimates(data: &Dataset, theta: &[f64], s_points: &[f64]) -> Result<PointEstimates> {
    let (pair, _) = estimate_cdfs(data, theta)?;
    let auc = estimate_auc(&pair.f0, &pair.f1);
    let roc = s_points
        .iter()
        .map(|&s| Ok((s, estimate_roc(&pair.f0, &pair.f1, s)?)))
        .collect::<Result<_>>()?;
    Ok(PointEstimates { auc, roc })
}

/// Proposed estimator given a fitted joint model.
pub fn our_estimates(data: &Dataset, fit: &FitResult, s_points: &[f64]) -> Result<PointEstimates> {
    posterior_estimates(data, fit.eta_hat.theta(), s_points)
}

/// Ignorable plug-in: complete-case `mu`, `beta = 0`.
pub fn ig_estimates(data: &Dataset, s_points: &[f64]) -> Result<PointEstimates> {
    let mut theta = fit_disease_complete_case(data)?.coef;
    theta.push(0.0);
    posterior_estimates(data, &theta, s_points)
}

pub fn ver_estimates(data: &Dataset, s_points: &[f64]) -> Result<PointEstimates> {
    labelled_estimates(
        (0..data.n()).filter_map(|i| data.yi(i).map(|y| (data.xi(i), y, 1.0))),
        s_points,
    )
}

pub fn full_estimates(data: &Dataset, oracle_y: &[bool], s_points: &[f64]) -> Result<PointEstimates> {
    if oracle_y.len() != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: oracle_y.len(),
        });
    }
    labelled_estimates(
        data.x().iter().zip(oracle_y).map(|(&x, &y)| (x, y, 1.0)),
        s_points,
    )
}

/// `1 / P(R=1 | y, x, v)` under the fitted verification model.
pub fn ipw_weights(data: &Dataset, eta: &ParameterVector) -> Vec<(usize, f64)> {
    (0..data.n())
        .filter_map(|i| {
            let y = data.yi(i)?;
            let t = linear_predictor(eta.psi_coefs(), data.xi(i), data.vi(i))
                + eta.beta() * y as u8 as f64;
            Some((i, 1.0 / expit_neg(t)))
        })
        .collect()
}

pub fn ipw_estimates(data: &Dataset, fit: &FitResult, s_points: &[f64]) -> Result<PointEstimates> {
    let w = ipw_weights(data, &fit.eta_hat);
    labelled_estimates(
        w.into_iter().map(|(i, wi)| (data.xi(i), data.yi(i).unwrap(), wi)),
        s_points,
    )
}

/// Point estimates for one method. `Full` needs the true status of every
/// record (`oracle_y`); `Our` and `Ipw` fit the joint model.
pub fn comparator_estimate(
    data: &Dataset,
    oracle_y: Option<&[bool]>,
    method: Method,
    s_points: &[f64],
    opts: &FitOptions,
) -> Result<PointEstimates> {
    let fitted = || -> Result<FitResult> {
        let fit = fit_mle(data, None, opts)?;
        if !fit.converged {
            return Err(Error::NonConvergence {
                iterations: fit.iterations,
                score_norm: fit.score_norm,
            });
        }
        Ok(fit)
    };
    match method {
        Method::Our => our_estimates(data, &fitted()?, s_points),
        Method::Ipw => ipw_estimates(data, &fitted()?, s_points),
        Method::Ig => ig_estimates(data, s_points),
        Method::Ver => ver_estimates(data, s_points),
        Method::Full => {
            let y = oracle_y.ok_or_else(|| {
                Error::InvalidArgument("the full-data method needs the true status of every record".into())
            })?;
            full_estimates(data, y, s_points)
        }
    }
}

/// Percentile bootstrap intervals for the IPW estimates: AUC first, then
/// each `s` in order. Replicate `b` uses ChaCha8 stream `b` of `seed`.
pub fn ipw_bootstrap_ci(
    data: &Dataset,
    fit: &FitResult,
    s_points: &[f64],
    replicates: usize,
    seed: u64,
    alpha: f64,
    opts: &FitOptions,
) -> Result<Vec<(f64, f64)>> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 replicates".into()));
    }
    let draws: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..data.n())).collect();
            let sample = data.subset(&rows).ok()?;
            let refit = fit_mle(&sample, Some(&fit.eta_hat), opts).ok()?;
            if !refit.converged {
                return None;
            }
            let est = ipw_estimates(&sample, &refit, s_points).ok()?;
            let mut out = vec![est.auc];
            out.extend(est.roc.iter().map(|(_, r)| *r));
            Some(out)
        })
        .collect();
    let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    if ok.len() * 10 < replicates * 9 {
        return Err(Error::Bootstrap {
            failed: replicates - ok.len(),
            total: replicates,
        });
    }
    let width = 1 + s_points.len();
    (0..width)
        .map(|j| {
            let mut col: Vec<f64> = ok.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let f = WeightedEcdf::unweighted(&col)?;
            Ok((f.quantile(alpha / 2.0)?, f.quantile(1.0 - alpha / 2.0)?))
        })
        .collect()
}
