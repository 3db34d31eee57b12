//! Observed-data log-likelihood of the joint model and its maximizer.
//!
//! `l_n = l_n1 + l_n2` where `l_n1` is the disease log-likelihood over
//! verified records and `l_n2` the Bernoulli log-likelihood of the
//! verification flags under the induced selection probability `pi`.
//!
//! With `hd = mu . z`, `g0 = expit_neg(hd - beta)` and `hr = psi . z + c`,
//! the derivatives used below are
//!
//! ```text
//! d c / d hd   = p1 - g0          d c / d beta = g0
//! d l_n1 / d hd = r (p1 - y)      d l_n2 / d hr = pi - r
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logistic::{design_matrix, fit_disease_complete_case, fit_verification_mar};
use crate::model::{c_from_predictor, expit_neg, linear_predictor, DiseaseParams, ParameterVector};
use crate::summation::{add_into, chunked_reduce};

const PROB_FLOOR: f64 = 1e-12;
const LOG_FLOOR: f64 = 1e-300;
const PREDICTOR_BOUND: f64 = 40.0;

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).max(LOG_FLOOR).ln()
}

/// `ln P(outcome)` for a Bernoulli outcome with success probability
/// `expit_neg(t)`; the complement is evaluated as `expit_neg(-t)`.
#[inline]
fn bernoulli_ln(t: f64, outcome: bool) -> f64 {
    if outcome {
        clamped_ln(expit_neg(t))
    } else {
        clamped_ln(expit_neg(-t))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

struct Accum {
    ll: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Accum {
    fn new(k: usize, order: Order) -> Self {
        Self {
            ll: 0.0,
            grad: if order >= Order::Gradient { vec![0.0; k] } else { Vec::new() },
            hess: if order >= Order::Hessian { vec![0.0; k * k] } else { Vec::new() },
        }
    }

    fn merge(&mut self, other: Self) {
        self.ll += other.ll;
        add_into(&mut self.grad, &other.grad);
        add_into(&mut self.hess, &other.hess);
    }
}

/// Per-record contribution. `grad_hr` is scratch of length k2.
fn record_terms(
    eta: &ParameterVector,
    x: f64,
    v: &[f64],
    r: bool,
    y: Option<bool>,
    order: Order,
    acc: &mut Accum,
    grad_hr: &mut [f64],
) {
    let p = eta.p();
    let m = p + 2;
    let k = 2 * m + 1;
    let beta = eta.beta();
    let hd = linear_predictor(eta.mu_coefs(), x, v);
    let hs = linear_predictor(eta.psi_coefs(), x, v);
    let z = |j: usize| match j {
        0 => 1.0,
        1 => x,
        _ => v[j - 2],
    };

    if r {
        let yi = y.unwrap_or(false);
        acc.ll += bernoulli_ln(hd, yi);
        if order >= Order::Gradient {
            let p1 = expit_neg(hd);
            let resid = p1 - yi as u8 as f64;
            for a in 0..m {
                acc.grad[a] += resid * z(a);
            }
            if order == Order::Hessian {
                let w = p1 * (1.0 - p1);
                for a in 0..m {
                    for b in 0..=a {
                        acc.hess[a * k + b] -= w * z(a) * z(b);
                    }
                }
            }
        }
    }

    let c = c_from_predictor(hd, beta);
    let hr = hs + c;
    acc.ll += bernoulli_ln(hr, r);
    if order < Order::Gradient {
        return;
    }
    let pi = expit_neg(hr);
    let resid = pi - r as u8 as f64;
    let p1 = expit_neg(hd);
    let g0 = expit_neg(hd - beta);
    let dc_dhd = p1 - g0;
    for a in 0..m {
        grad_hr[a] = dc_dhd * z(a);
        grad_hr[m + 1 + a] = z(a);
    }
    grad_hr[m] = g0;
    for a in 0..k {
        acc.grad[a] += resid * grad_hr[a];
    }
    if order < Order::Hessian {
        return;
    }
    let w = pi * (1.0 - pi);
    for a in 0..k {
        let ga = grad_hr[a];
        if ga == 0.0 {
            continue;
        }
        for b in 0..=a {
            acc.hess[a * k + b] -= w * ga * grad_hr[b];
        }
    }
    // second derivatives of c live in the (mu, beta) block
    let v0 = g0 * (1.0 - g0);
    let d2_hd = -p1 * (1.0 - p1) + v0;
    for a in 0..m {
        for b in 0..=a {
            acc.hess[a * k + b] += resid * d2_hd * z(a) * z(b);
        }
        acc.hess[m * k + a] += resid * (-v0) * z(a);
    }
    acc.hess[m * k + m] += resid * v0;
}

fn evaluate(data: &Dataset, eta: &ParameterVector, order: Order) -> Accum {
    let k = eta.k2();
    let mut acc = chunked_reduce(
        data.n(),
        || (Accum::new(k, order), vec![0.0; k]),
        |(acc, scratch), i| {
            record_terms(
                eta,
                data.xi(i),
                data.vi(i),
                data.ri(i),
                data.yi(i),
                order,
                acc,
                scratch,
            )
        },
        |(a, _), (b, _)| a.merge(b),
    )
    .0;
    if order == Order::Hessian {
        for a in 0..k {
            for b in 0..a {
                acc.hess[b * k + a] = acc.hess[a * k + b];
            }
        }
    }
    acc
}

fn check_dims(data: &Dataset, eta: &ParameterVector) -> Result<()> {
    if data.p() != eta.p() {
        return Err(Error::Dimension {
            expected: data.p(),
            got: eta.p(),
        });
    }
    Ok(())
}

/// `l_n1`: disease log-likelihood over verified records.
pub fn loglik_disease(data: &Dataset, mu: &DiseaseParams) -> Result<f64> {
    if mu.mu3.len() != data.p() {
        return Err(Error::Dimension {
            expected: data.p(),
            got: mu.mu3.len(),
        });
    }
    let mut coef = vec![mu.mu1, mu.mu2];
    coef.extend_from_slice(&mu.mu3);
    Ok(chunked_reduce(
        data.n(),
        || 0.0,
        |acc, i| {
            if let Some(y) = data.yi(i) {
                *acc += bernoulli_ln(linear_predictor(&coef, data.xi(i), data.vi(i)), y);
            }
        },
        |a, b| *a += b,
    ))
}

/// `l_n2`: log-likelihood of the verification flags under `pi`.
pub fn loglik_missing(data: &Dataset, eta: &ParameterVector) -> Result<f64> {
    check_dims(data, eta)?;
    Ok(chunked_reduce(
        data.n(),
        || 0.0,
        |acc, i| {
            let (x, v) = (data.xi(i), data.vi(i));
            let hd = linear_predictor(eta.mu_coefs(), x, v);
            let hr = linear_predictor(eta.psi_coefs(), x, v) + c_from_predictor(hd, eta.beta());
            *acc += bernoulli_ln(hr, data.ri(i));
        },
        |a, b| *a += b,
    ))
}

/// Full observed-data log-likelihood `l_n`.
pub fn loglik(data: &Dataset, eta: &ParameterVector) -> Result<f64> {
    check_dims(data, eta)?;
    Ok(evaluate(data, eta, Order::Value).ll)
}

/// Gradient of [`loglik`] with respect to `eta` (a sum, not an average).
pub fn score(data: &Dataset, eta: &ParameterVector) -> Result<Vec<f64>> {
    check_dims(data, eta)?;
    Ok(evaluate(data, eta, Order::Gradient).grad)
}

/// Hessian of [`loglik`], row-major `k2 x k2`.
pub fn hessian(data: &Dataset, eta: &ParameterVector) -> Result<DMatrix<f64>> {
    check_dims(data, eta)?;
    let k = eta.k2();
    Ok(DMatrix::from_row_slice(k, k, &evaluate(data, eta, Order::Hessian).hess))
}

/// Per-record score vectors, row-major `n x k2`.
pub fn score_contributions(data: &Dataset, eta: &ParameterVector) -> Result<Vec<f64>> {
    check_dims(data, eta)?;
    let k = eta.k2();
    let mut out = vec![0.0; data.n() * k];
    let mut scratch = vec![0.0; k];
    for (i, row) in out.chunks_exact_mut(k).enumerate() {
        let mut acc = Accum {
            ll: 0.0,
            grad: vec![0.0; k],
            hess: Vec::new(),
        };
        record_terms(
            eta,
            data.xi(i),
            data.vi(i),
            data.ri(i),
            data.yi(i),
            Order::Gradient,
            &mut acc,
            &mut scratch,
        );
        row.copy_from_slice(&acc.grad);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    /// Smallest singular value of the `(1, x, v)` design scaled by `1/sqrt(n)`.
    pub min_singular_value: f64,
    pub full_rank: bool,
    pub distinct_x: usize,
    pub continuous_x: bool,
    /// `Some(true)` once a fit shows a biomarker coefficient near zero.
    pub weak_biomarker_coefficient: Option<bool>,
    pub warnings: Vec<String>,
}

impl IdentifiabilityReport {
    pub const RANK_THRESHOLD: f64 = 1e-8;
    pub const MIN_DISTINCT_X: usize = 10;
    pub const MU2_THRESHOLD: f64 = 1e-3;

    /// Adds the post-fit check on the biomarker coefficient.
    pub fn with_fit(mut self, fit: &FitResult) -> Self {
        let mu2 = fit.eta_hat.as_slice()[1];
        let weak = mu2.abs() < Self::MU2_THRESHOLD;
        self.weak_biomarker_coefficient = Some(weak);
        if weak {
            self.warnings.push(format!(
                "fitted biomarker coefficient mu2 = {mu2:.3e} is near zero; identifiability is doubtful"
            ));
        }
        self
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Checks the checkable parts of the identifiability condition: linear
/// independence of `(1, x, v)` and a continuous-looking biomarker.
pub fn check_identifiability(data: &Dataset) -> IdentifiabilityReport {
    let m = data.p() + 2;
    let n = data.n();
    let design = design_matrix(data, 0..n);
    let min_sv = if n < m {
        0.0
    } else {
        let scale = 1.0 / (n as f64).sqrt();
        let x = DMatrix::from_row_slice(n, m, &design) * scale;
        let r = x.qr().r();
        r.singular_values().min()
    };
    let mut xs = data.x().to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let distinct = xs.len();

    let full_rank = min_sv > IdentifiabilityReport::RANK_THRESHOLD;
    let continuous = distinct > IdentifiabilityReport::MIN_DISTINCT_X;
    let mut warnings = Vec::new();
    if !full_rank {
        warnings.push(format!(
            "design (1, x, v) is rank deficient (smallest singular value {min_sv:.3e})"
        ));
    }
    if !continuous {
        warnings.push(format!(
            "biomarker takes only {distinct} distinct values; a continuous biomarker is assumed"
        ));
    }
    IdentifiabilityReport {
        min_singular_value: min_sv,
        full_rank,
        distinct_x: distinct,
        continuous_x: continuous,
        weak_biomarker_coefficient: None,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on `max |score| / n`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub eta_hat: ParameterVector,
    pub loglik: f64,
    /// `max |score| / n` at `eta_hat`.
    pub score_norm: f64,
    /// Observed information `-H / n` at `eta_hat`.
    pub obs_info: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Some coefficient exceeded 50 in absolute value.
    pub separation_warning: bool,
    pub n: usize,
}

impl FitResult {
    /// Standard errors `sqrt(diag(J^-1) / n)`.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let inv = invert_information(&self.obs_info)?;
        let n = self.n as f64;
        Ok((0..inv.nrows()).map(|j| (inv[(j, j)].max(0.0) / n).sqrt()).collect())
    }
}

/// Inverts a symmetric information matrix, refusing near-singular input.
pub fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = info.clone().symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond > 1e-12) {
        return Err(Error::SingularInformation { rcond });
    }
    info.clone()
        .try_inverse()
        .ok_or(Error::SingularInformation { rcond })
}

/// Starting values: complete-case logistic fit for `mu`, `beta = 0`, and a
/// logistic fit of `R` on `(1, x, v)` for `psi`.
pub fn initial_values(data: &Dataset) -> Result<ParameterVector> {
    let mu = fit_disease_complete_case(data)?;
    let psi = fit_verification_mar(data)?;
    let mut values = mu.coef;
    values.push(0.0);
    values.extend(psi.coef);
    ParameterVector::new(data.p(), values)
}

fn preflight(data: &Dataset) -> Result<()> {
    let (pos, neg) = data.verified_class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateGroup(format!(
            "verified records need both disease classes (y=1: {pos}, y=0: {neg})"
        )));
    }
    if data.n1() == data.n() {
        return Err(Error::InvalidDataset(
            "no unverified records; the verification model is not estimable".into(),
        ));
    }
    Ok(())
}

/// Maximum likelihood fit by damped Newton ascent with backtracking.
///
/// A non-converged run is returned with `converged == false` rather than
/// as an error; callers decide how to treat it.
pub fn fit_mle(
    data: &Dataset,
    init: Option<&ParameterVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    preflight(data)?;
    let mut eta = match init {
        Some(e) => {
            check_dims(data, e)?;
            e.clone()
        }
        None => initial_values(data)?,
    };
    let n = data.n() as f64;
    let k = eta.k2();
    let mut iterations = 0;
    let mut converged = false;
    let mut current = evaluate(data, &eta, Order::Hessian);

    loop {
        let norm = sup_norm(&current.grad) / n;
        if norm < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter || !current.ll.is_finite() {
            break;
        }
        let info = -DMatrix::from_row_slice(k, k, &current.hess);
        let grad = DVector::from_column_slice(&current.grad);
        let Some(next) = newton_step(data, &eta, current.ll, &info, &grad) else {
            break;
        };
        eta = next;
        iterations += 1;
        current = evaluate(data, &eta, Order::Hessian);
    }

    let score_norm = sup_norm(&current.grad) / n;
    let obs_info = -DMatrix::from_row_slice(k, k, &current.hess) / n;
    let separation_warning = (0..data.n()).any(|i| {
        let (x, v) = (data.xi(i), data.vi(i));
        linear_predictor(eta.mu_coefs(), x, v).abs() > PREDICTOR_BOUND
            || linear_predictor(eta.psi_coefs(), x, v).abs() > PREDICTOR_BOUND
    });
    if separation_warning {
        log::warn!("fitted linear predictors exceed {PREDICTOR_BOUND} in absolute value; possible separation");
    }
    Ok(FitResult {
        eta_hat: eta,
        loglik: current.ll,
        score_norm,
        obs_info,
        converged,
        iterations,
        separation_warning,
        n: data.n(),
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One ascent step. Tries the Newton direction first and falls back to
/// Levenberg-damped directions when the line search cannot make progress.
fn newton_step(
    data: &Dataset,
    eta: &ParameterVector,
    ll: f64,
    info: &DMatrix<f64>,
    grad: &DVector<f64>,
) -> Option<ParameterVector> {
    let k = eta.k2();
    let scale = info.diagonal().amax().max(1e-12);
    let mut ridge = 0.0;
    for _ in 0..25 {
        let mut a = info.clone();
        for j in 0..k {
            a[(j, j)] += ridge;
        }
        if let Some(ch) = a.cholesky() {
            let dir = ch.solve(grad);
            let slope = grad.dot(&dir);
            let mut t = 1.0;
            for _ in 0..30 {
                let mut trial = eta.clone();
                for (e, d) in trial.as_mut_slice().iter_mut().zip(dir.iter()) {
                    *e += t * d;
                }
                let ll_trial = evaluate(data, &trial, Order::Value).ll;
                let armijo = ll_trial >= ll + 1e-4 * t * slope;
                // near the optimum the gain is below rounding of ll itself
                let flat = ridge == 0.0
                    && t == 1.0
                    && ll_trial >= ll - 1e-12 * ll.abs().max(1.0);
                if ll_trial.is_finite() && (armijo || flat) {
                    return Some(trial);
                }
                t *= 0.5;
            }
        }
        ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
    }
    None
}
