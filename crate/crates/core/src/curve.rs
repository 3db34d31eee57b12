//! Weighted empirical CDFs of the biomarker in the healthy and diseased
//! groups, and the ROC / AUC functionals built on them.
//!
//! Each subject contributes to both CDFs: to `F1` with weight `g_i` and to
//! `F0` with weight `1 - g_i`, where `g_i = P(Y=1 | x_i, v_i, r_i)` under
//! the fitted model.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::g_raw;
use crate::summation::pairwise_sum;

/// Distance of the `quantile(0)` sentinel below the smallest atom.
const SENTINEL_OFFSET: f64 = 1.0;

/// Step CDF with finitely many weighted atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedEcdf {
    support: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
}

impl WeightedEcdf {
    /// Builds from unnormalized nonnegative weights. Tied values are merged.
    pub fn new(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid ECDF weight {w}")));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite ECDF support value".into()));
        }
        let total = pairwise_sum(weights);
        if !(total > 0.0) {
            return Err(Error::DegenerateGroup("ECDF weights sum to zero".into()));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        let mut support = Vec::with_capacity(values.len());
        let mut merged = Vec::with_capacity(values.len());
        for &i in &order {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            match support.last() {
                Some(&last) if last == values[i] => *merged.last_mut().unwrap() += w,
                _ => {
                    support.push(values[i]);
                    merged.push(w);
                }
            }
        }
        let weights: Vec<f64> = merged.iter().map(|w| w / total).collect();
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        // pin the last step to exactly 1 so quantile(1) stays on the support
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            support,
            weights,
            cum,
        })
    }

    /// Plain empirical CDF with equal weights.
    pub fn unweighted(values: &[f64]) -> Result<Self> {
        Self::new(values, &vec![1.0; values.len()])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn min_support(&self) -> f64 {
        self.support[0]
    }

    pub fn max_support(&self) -> f64 {
        *self.support.last().unwrap()
    }

    /// `F(x)`: total weight on atoms `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// `inf { x : F(x) >= q }`. `quantile(0)` is a sentinel one unit below
    /// the smallest atom, where `F` is 0.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "quantile level {q} outside [0, 1]"
            )));
        }
        if q == 0.0 {
            return Ok(self.support[0] - SENTINEL_OFFSET);
        }
        let k = self.cum.partition_point(|&c| c < q);
        Ok(self.support[k.min(self.support.len() - 1)])
    }

    /// Weighted mean and frequency-weighted variance (`sum w (x - m)^2 / (W - 1)`)
    /// given the unnormalized total weight `total`.
    pub fn mean_var(&self, total: f64) -> (f64, f64) {
        let mean: f64 = self.support.iter().zip(&self.weights).map(|(x, w)| x * w).sum();
        let ss: f64 = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - mean) * (x - mean))
            .sum();
        let var = if total > 1.0 { ss * total / (total - 1.0) } else { ss };
        (mean, var)
    }
}

/// Fitted posterior disease probabilities and their totals.
#[derive(Debug, Clone, Serialize)]
pub struct GWeights {
    pub g: Vec<f64>,
    pub sum_g: f64,
    pub sum_1mg: f64,
}

impl GWeights {
    pub fn compute(data: &Dataset, theta: &[f64]) -> Result<Self> {
        if theta.len() != data.p() + 3 {
            return Err(Error::Dimension {
                expected: data.p() + 3,
                got: theta.len(),
            });
        }
        let g: Vec<f64> = (0..data.n())
            .map(|i| g_raw(theta, data.xi(i), data.vi(i), data.ri(i)))
            .collect();
        Ok(Self::from_values(g))
    }

    pub fn from_values(g: Vec<f64>) -> Self {
        let sum_g = pairwise_sum(&g);
        let comp: Vec<f64> = g.iter().map(|gi| 1.0 - gi).collect();
        let sum_1mg = pairwise_sum(&comp);
        Self { g, sum_g, sum_1mg }
    }

    /// `lambda = mean(g)`, the estimated prevalence.
    pub fn prevalence(&self) -> f64 {
        self.sum_g / self.g.len() as f64
    }
}

/// Healthy and diseased CDF estimates.
#[derive(Debug, Clone, Serialize)]
pub struct CdfPair {
    pub f0: WeightedEcdf,
    pub f1: WeightedEcdf,
}

/// `F0` weighted by `1 - g`, `F1` weighted by `g`.
pub fn estimate_cdfs(data: &Dataset, theta: &[f64]) -> Result<(CdfPair, GWeights)> {
    let gw = GWeights::compute(data, theta)?;
    let pair = cdfs_from_weights(data.x(), &gw)?;
    Ok((pair, gw))
}

pub fn cdfs_from_weights(x: &[f64], gw: &GWeights) -> Result<CdfPair> {
    if !(gw.sum_g > 0.0) {
        return Err(Error::DegenerateGroup("all g_i are 0: no diseased weight".into()));
    }
    if !(gw.sum_1mg > 0.0) {
        return Err(Error::DegenerateGroup("all g_i are 1: no healthy weight".into()));
    }
    let comp: Vec<f64> = gw.g.iter().map(|g| 1.0 - g).collect();
    Ok(CdfPair {
        f0: WeightedEcdf::new(x, &comp)?,
        f1: WeightedEcdf::new(x, &gw.g)?,
    })
}

/// `integral F0 dF1 = sum_j w1_j F0(x1_j)` in one merged pass over the two
/// sorted supports.
pub fn estimate_auc(f0: &WeightedEcdf, f1: &WeightedEcdf) -> f64 {
    let mut k = 0;
    let mut f0_at = 0.0;
    let mut terms = Vec::with_capacity(f1.support.len());
    for (&x1, &w1) in f1.support.iter().zip(&f1.weights) {
        while k < f0.support.len() && f0.support[k] <= x1 {
            f0_at = f0.cum[k];
            k += 1;
        }
        terms.push(w1 * f0_at);
    }
    pairwise_sum(&terms)
}

/// `1 - F1(F0^{-1}(1 - s))`.
pub fn estimate_roc(f0: &WeightedEcdf, f1: &WeightedEcdf, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("ROC abscissa {s} outside [0, 1]")));
    }
    let xi = f0.quantile(1.0 - s)?;
    Ok(1.0 - f1.eval(xi))
}
