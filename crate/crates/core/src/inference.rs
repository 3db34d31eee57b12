//! Plug-in asymptotic variances and Wald intervals for the AUC and ROC
//! estimators.
//!
//! Both variances are quadratic forms `H' Sigma_Z H` where `Sigma_Z` is the
//! covariance of the stacked per-record influence terms
//!
//! ```text
//! U_i = ( score_i(eta),
//!         g_i {F0(X_i) - AUC},
//!         (1 - g_i) {1 - F1(X_i) - AUC},
//!         (1 - g_i) {1(X_i <= xi) - F0(xi)},
//!         g_i {1(X_i <= xi) - F1(xi)} )
//! ```
//!
//! with `xi = F0^{-1}(1 - s)`, and `H` carries the derivative of the
//! functional with respect to the model parameters mapped through `J^{-1}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curve::{cdfs_from_weights, estimate_auc, estimate_roc, CdfPair, GWeights, WeightedEcdf};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{invert_information, score_contributions, FitResult};
use crate::model::g_gradient_into;

const DENSITY_FLOOR: f64 = 1e-8;

/// Gaussian kernel density `sum_j w_j K((x_j - x) / h) / h`.
pub fn kde_eval(f: &WeightedEcdf, h: f64, x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    f.support()
        .iter()
        .zip(f.weights())
        .map(|(xj, wj)| {
            let u = (xj - x) / h;
            wj * INV_SQRT_2PI * (-0.5 * u * u).exp()
        })
        .sum::<f64>()
        / h
}

#[derive(Debug, Clone, Serialize)]
pub struct Bandwidths {
    pub h0: f64,
    pub h1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub iqr0: f64,
    pub iqr1: f64,
    pub warnings: Vec<String>,
}

fn rule_of_thumb(
    f: &WeightedEcdf,
    total_weight: f64,
    n: usize,
    group: &str,
    warnings: &mut Vec<String>,
) -> Result<(f64, f64, f64)> {
    let (_, var) = f.mean_var(total_weight);
    let sigma = var.max(0.0).sqrt();
    let iqr = f.quantile(0.75)? - f.quantile(0.25)?;
    let factor = 1.06 * (n as f64).powf(-0.2);
    let spread = match (sigma > 0.0, iqr > 0.0) {
        (true, true) => sigma.min(iqr / 1.34),
        (true, false) => sigma,
        (false, true) => iqr / 1.34,
        (false, false) => {
            let range = f.max_support() - f.min_support();
            if range <= 0.0 {
                return Err(Error::DegenerateGroup(format!(
                    "{group} biomarker distribution is a single point"
                )));
            }
            warnings.push(format!(
                "zero weighted spread in {group} group; bandwidth from range/4"
            ));
            range / 4.0
        }
    };
    Ok((factor * spread, sigma, iqr))
}

/// `h = 1.06 n^{-1/5} min(sigma, IQR / 1.34)` per group, with group
/// moments weighted by `1 - g` (healthy) and `g` (diseased) and `n` the
/// full sample size.
pub fn bandwidths(data: &Dataset, gw: &GWeights) -> Result<Bandwidths> {
    let pair = cdfs_from_weights(data.x(), gw)?;
    bandwidths_for(&pair, gw, data.n())
}

pub(crate) fn bandwidths_for(pair: &CdfPair, gw: &GWeights, n: usize) -> Result<Bandwidths> {
    let mut warnings = Vec::new();
    let (h0, sigma0, iqr0) = rule_of_thumb(&pair.f0, gw.sum_1mg, n, "healthy", &mut warnings)?;
    let (h1, sigma1, iqr1) = rule_of_thumb(&pair.f1, gw.sum_g, n, "diseased", &mut warnings)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Bandwidths {
        h0,
        h1,
        sigma0,
        sigma1,
        iqr0,
        iqr1,
        warnings,
    })
}

/// `[point - z sigma / sqrt(n), point + z sigma / sqrt(n)]`, untruncated.
pub fn wald_ci(point: f64, sigma2: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative variance {sigma2}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let half = z * (sigma2 / n as f64).sqrt();
    Ok((point - half, point + half))
}

/// Point estimate with its plug-in asymptotic variance and Wald interval.
#[derive(Debug, Clone, Serialize)]
pub struct CurveEstimate {
    pub point: f64,
    /// Asymptotic variance of `sqrt(n) (estimate - truth)`.
    pub sigma2: f64,
    /// `sqrt(sigma2 / n)`.
    pub se: f64,
    pub ci: (f64, f64),
}

/// Stacked influence terms and their second-moment matrix.
#[derive(Debug, Clone)]
pub struct InfluenceComponents {
    /// Row-major `n x (k2 + 4)`.
    pub rows: Vec<f64>,
    pub width: usize,
    /// `n^{-1} sum U_i U_i'`.
    pub sigma_z: DMatrix<f64>,
}

impl InfluenceComponents {
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows.len() / self.width;
        let mut m = vec![0.0; self.width];
        for row in self.rows.chunks_exact(self.width) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m.iter().map(|s| s / n as f64).collect()
    }
}

/// Everything the variance formulas need, computed once per fit.
#[derive(Debug, Clone)]
pub struct PluginContext<'a> {
    data: &'a Dataset,
    k1: usize,
    k2: usize,
    pub cdfs: CdfPair,
    pub gweights: GWeights,
    pub lambda_hat: f64,
    pub auc_hat: f64,
    pub bandwidths: Bandwidths,
    /// `J^{-1}` with `J` the observed information per record.
    pub j_inv: DMatrix<f64>,
    /// Reciprocal condition number of `J`.
    pub j_rcond: f64,
    scores: Vec<f64>,
    grad_g: Vec<f64>,
    f0_at_x: Vec<f64>,
    f1_at_x: Vec<f64>,
}

impl<'a> PluginContext<'a> {
    pub fn new(data: &'a Dataset, fit: &FitResult) -> Result<Self> {
        let eta = &fit.eta_hat;
        if eta.p() != data.p() {
            return Err(Error::Dimension {
                expected: data.p(),
                got: eta.p(),
            });
        }
        let (k1, k2) = (eta.k1(), eta.k2());
        let theta = eta.theta();
        let gweights = GWeights::compute(data, theta)?;
        let lambda_hat = gweights.prevalence();
        if !(lambda_hat > 0.0 && lambda_hat < 1.0) {
            return Err(Error::DegenerateGroup(format!(
                "estimated prevalence {lambda_hat} outside (0, 1)"
            )));
        }
        let cdfs = cdfs_from_weights(data.x(), &gweights)?;
        let auc_hat = estimate_auc(&cdfs.f0, &cdfs.f1);
        let bandwidths = bandwidths_for(&cdfs, &gweights, data.n())?;

        let eig = fit.obs_info.clone().symmetric_eigen();
        let j_rcond = eig.eigenvalues.min() / eig.eigenvalues.amax();
        let j_inv = invert_information(&fit.obs_info)?;

        let scores = score_contributions(data, eta)?;
        let mut grad_g = vec![0.0; data.n() * k1];
        for (i, row) in grad_g.chunks_exact_mut(k1).enumerate() {
            g_gradient_into(theta, data.xi(i), data.vi(i), data.ri(i), row);
        }
        let f0_at_x = data.x().iter().map(|&x| cdfs.f0.eval(x)).collect();
        let f1_at_x = data.x().iter().map(|&x| cdfs.f1.eval(x)).collect();
        Ok(Self {
            data,
            k1,
            k2,
            cdfs,
            gweights,
            lambda_hat,
            auc_hat,
            bandwidths,
            j_inv,
            j_rcond,
            scores,
            grad_g,
            f0_at_x,
            f1_at_x,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// `xi = F0^{-1}(1 - s)`.
    pub fn xi_hat(&self, s: f64) -> Result<f64> {
        self.cdfs.f0.quantile(1.0 - s)
    }

    pub fn f0_density(&self, x: f64) -> f64 {
        kde_eval(&self.cdfs.f0, self.bandwidths.h0, x)
    }

    pub fn f1_density(&self, x: f64) -> f64 {
        kde_eval(&self.cdfs.f1, self.bandwidths.h1, x)
    }

    /// Sample average of `dg/dtheta * weight_i`.
    fn grad_g_average(&self, weight: impl Fn(usize) -> f64) -> DVector<f64> {
        let mut e = DVector::zeros(self.k1);
        for (i, row) in self.grad_g.chunks_exact(self.k1).enumerate() {
            let w = weight(i);
            for (a, d) in row.iter().enumerate() {
                e[a] += d * w;
            }
        }
        e / self.n() as f64
    }

    /// `(E1, E2)` for the AUC.
    pub fn e_auc(&self) -> (DVector<f64>, DVector<f64>) {
        let auc = self.auc_hat;
        let e1 = self.grad_g_average(|i| self.f0_at_x[i] - auc);
        let e2 = self.grad_g_average(|i| 1.0 - self.f1_at_x[i] - auc);
        (e1, e2)
    }

    /// `(E3, E4)` for the ROC at `xi`.
    pub fn e_roc(&self, xi: f64) -> (DVector<f64>, DVector<f64>) {
        let f0x = self.cdfs.f0.eval(xi);
        let f1x = self.cdfs.f1.eval(xi);
        let ind = |i: usize| (self.data.xi(i) <= xi) as u8 as f64;
        let e3 = self.grad_g_average(|i| ind(i) - f0x);
        let e4 = self.grad_g_average(|i| ind(i) - f1x);
        (e3, e4)
    }

    /// `J^{-1} I_{k2,k1} a`.
    fn lift(&self, a: &DVector<f64>) -> DVector<f64> {
        self.j_inv.columns(0, self.k1) * a
    }

    fn influence_row(&self, i: usize, xi: f64, f0x: f64, f1x: f64, out: &mut [f64]) {
        let k2 = self.k2;
        out[..k2].copy_from_slice(&self.scores[i * k2..(i + 1) * k2]);
        let g = self.gweights.g[i];
        let ind = (self.data.xi(i) <= xi) as u8 as f64;
        out[k2] = g * (self.f0_at_x[i] - self.auc_hat);
        out[k2 + 1] = (1.0 - g) * (1.0 - self.f1_at_x[i] - self.auc_hat);
        out[k2 + 2] = (1.0 - g) * (ind - f0x);
        out[k2 + 3] = g * (ind - f1x);
    }

    /// Influence terms with the ROC blocks evaluated at `s`.
    pub fn influence(&self, s: f64) -> Result<InfluenceComponents> {
        let xi = self.xi_hat(s)?;
        let (f0x, f1x) = (self.cdfs.f0.eval(xi), self.cdfs.f1.eval(xi));
        let width = self.k2 + 4;
        let mut rows = vec![0.0; self.n() * width];
        for (i, row) in rows.chunks_exact_mut(width).enumerate() {
            self.influence_row(i, xi, f0x, f1x, row);
        }
        let u = DMatrix::from_row_slice(self.n(), width, &rows);
        let sigma_z = u.transpose() * &u / self.n() as f64;
        Ok(InfluenceComponents {
            rows,
            width,
            sigma_z,
        })
    }

    /// `H' Sigma_Z H` computed as the mean of `(U_i . H)^2`.
    fn quadratic_form(&self, h: &DVector<f64>, xi: f64) -> f64 {
        let (f0x, f1x) = (self.cdfs.f0.eval(xi), self.cdfs.f1.eval(xi));
        let width = self.k2 + 4;
        let mut row = vec![0.0; width];
        let mut acc = 0.0;
        for i in 0..self.n() {
            self.influence_row(i, xi, f0x, f1x, &mut row);
            let t: f64 = row.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
            acc += t * t;
        }
        acc / self.n() as f64
    }

    /// `H1` for the AUC.
    pub fn h_auc(&self) -> DVector<f64> {
        let lam = self.lambda_hat;
        let (e1, e2) = self.e_auc();
        let top = self.lift(&(e1 / lam - e2 / (1.0 - lam)));
        let mut h = DVector::zeros(self.k2 + 4);
        h.rows_mut(0, self.k2).copy_from(&top);
        h[self.k2] = 1.0 / lam;
        h[self.k2 + 1] = 1.0 / (1.0 - lam);
        h
    }

    /// `H2` for `ROC(s)`.
    pub fn h_roc(&self, s: f64) -> Result<DVector<f64>> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("ROC variance needs s in (0, 1), got {s}")));
        }
        let xi = self.xi_hat(s)?;
        let f0 = self.f0_density(xi);
        if !(f0 > DENSITY_FLOOR) {
            return Err(Error::VanishingDensity { s });
        }
        let ratio = self.f1_density(xi) / f0;
        let lam = self.lambda_hat;
        let (e3, e4) = self.e_roc(xi);
        let top = self.lift(&(-e4 / lam - e3 * (ratio / (1.0 - lam))));
        let mut h = DVector::zeros(self.k2 + 4);
        h.rows_mut(0, self.k2).copy_from(&top);
        h[self.k2 + 2] = ratio / (1.0 - lam);
        h[self.k2 + 3] = -1.0 / lam;
        Ok(h)
    }

    pub fn sigma2_auc(&self) -> f64 {
        // the ROC blocks carry zero weight, any xi works
        self.quadratic_form(&self.h_auc(), self.cdfs.f0.max_support())
    }

    pub fn sigma2_roc(&self, s: f64) -> Result<f64> {
        let h = self.h_roc(s)?;
        Ok(self.quadratic_form(&h, self.xi_hat(s)?))
    }

    pub fn auc(&self, alpha: f64) -> Result<CurveEstimate> {
        self.finish(self.auc_hat, self.sigma2_auc(), alpha)
    }

    pub fn roc_point(&self, s: f64) -> Result<f64> {
        estimate_roc(&self.cdfs.f0, &self.cdfs.f1, s)
    }

    pub fn roc(&self, s: f64, alpha: f64) -> Result<CurveEstimate> {
        let point = self.roc_point(s)?;
        self.finish(point, self.sigma2_roc(s)?, alpha)
    }

    fn finish(&self, point: f64, sigma2: f64, alpha: f64) -> Result<CurveEstimate> {
        if !sigma2.is_finite() {
            return Err(Error::Numerical("non-finite variance estimate".into()));
        }
        let ci = wald_ci(point, sigma2, self.n(), alpha)?;
        Ok(CurveEstimate {
            point,
            sigma2,
            se: (sigma2 / self.n() as f64).sqrt(),
            ci,
        })
    }
}

/// `sigma^2_AUC` for a fitted model.
pub fn variance_auc(data: &Dataset, fit: &FitResult) -> Result<f64> {
    Ok(PluginContext::new(data, fit)?.sigma2_auc())
}

/// `sigma^2_s` for a fitted model.
pub fn variance_roc(data: &Dataset, fit: &FitResult, s: f64) -> Result<f64> {
    PluginContext::new(data, fit)?.sigma2_roc(s)
}
