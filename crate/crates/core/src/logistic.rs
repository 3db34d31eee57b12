//! Plain logistic regression with the `1 / (1 + exp(b . z))` link, used for
//! starting values, the ignorable comparator and the disease-model test.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::expit_neg;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn prob(&self, z: &[f64]) -> f64 {
        expit_neg(self.coef.iter().zip(z).map(|(c, zj)| c * zj).sum())
    }
}

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
/// Largest fitted `|linear predictor|` before the fit is treated as diverging.
const PREDICTOR_BOUND: f64 = 40.0;

fn safe_ln(p: f64) -> f64 {
    p.max(1e-300).ln()
}

fn loglik(design: &[f64], m: usize, y: &[bool], coef: &[f64]) -> f64 {
    design
        .chunks_exact(m)
        .zip(y)
        .map(|(z, &yi)| {
            let t: f64 = coef.iter().zip(z).map(|(c, zj)| c * zj).sum();
            if yi {
                safe_ln(expit_neg(t))
            } else {
                safe_ln(expit_neg(-t))
            }
        })
        .sum()
}

/// Newton-Raphson fit on a row-major design with `m` columns.
pub fn fit_logistic(design: &[f64], m: usize, y: &[bool]) -> Result<LogisticFit> {
    let n = y.len();
    if design.len() != n * m {
        return Err(Error::Dimension {
            expected: n * m,
            got: design.len(),
        });
    }
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateGroup(
            "logistic fit needs both outcome classes".into(),
        ));
    }
    let mut coef = vec![0.0; m];
    let mut ll = loglik(design, m, y, &coef);
    for iter in 0..MAX_ITER {
        let mut grad = DVector::<f64>::zeros(m);
        let mut info = DMatrix::<f64>::zeros(m, m);
        let mut worst = 0.0f64;
        let mut max_t = 0.0f64;
        for (z, &yi) in design.chunks_exact(m).zip(y) {
            let t: f64 = coef.iter().zip(z).map(|(c, zj)| c * zj).sum();
            max_t = max_t.max(t.abs());
            let p = expit_neg(t);
            let resid = p - yi as u8 as f64;
            let w = p * (1.0 - p);
            worst = worst.max(resid.abs());
            for a in 0..m {
                grad[a] += resid * z[a];
                for b in 0..=a {
                    info[(a, b)] += w * z[a] * z[b];
                }
            }
        }
        if max_t > PREDICTOR_BOUND {
            break;
        }
        if grad.amax() / n as f64 <= TOL {
            if worst < 1e-6 {
                return Err(Error::Numerical("complete separation in logistic fit".into()));
            }
            return Ok(LogisticFit {
                coef,
                loglik: ll,
                iterations: iter,
            });
        }
        info.fill_upper_triangle_with_lower_triangle();
        let step = solve_damped(&info, &grad)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = coef.iter().zip(step.iter()).map(|(c, d)| c + t * d).collect();
            let ll_trial = loglik(design, m, y, &trial);
            if ll_trial >= ll - 1e-12 * ll.abs().max(1.0) {
                coef = trial;
                ll = ll_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        score_norm: f64::NAN,
    })
}

/// Solves `info * d = grad` for the ascent direction, adding a ridge when
/// the information is not numerically positive definite.
pub(crate) fn solve_damped(info: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = info.diagonal().amax().max(1e-12);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut a = info.clone();
        for j in 0..a.nrows() {
            a[(j, j)] += ridge;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.solve(grad));
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 10.0 };
    }
    Err(Error::Numerical("information matrix not positive definite".into()))
}

/// Row-major `(1, x, v)` design over the selected rows.
pub fn design_matrix(data: &Dataset, rows: impl Iterator<Item = usize>) -> Vec<f64> {
    let m = data.p() + 2;
    let mut out = Vec::with_capacity(data.n() * m);
    for i in rows {
        out.push(1.0);
        out.push(data.xi(i));
        out.extend_from_slice(data.vi(i));
    }
    out
}

/// Complete-case fit of `Y` on `(1, x, v)` over verified records.
pub fn fit_disease_complete_case(data: &Dataset) -> Result<LogisticFit> {
    let rows = data.verified_rows();
    let design = design_matrix(data, rows.iter().copied());
    let y: Vec<bool> = rows.iter().map(|&i| data.yi(i) == Some(true)).collect();
    fit_logistic(&design, data.p() + 2, &y)
}

/// Fit of `R` on `(1, x, v)` over all records.
pub fn fit_verification_mar(data: &Dataset) -> Result<LogisticFit> {
    let design = design_matrix(data, 0..data.n());
    fit_logistic(&design, data.p() + 2, data.verified())
}
