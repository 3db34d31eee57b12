//! Parameters and closed-form probabilities of the joint disease and
//! verification model.
//!
//! Every probability uses the link `1 / (1 + exp(t))`: a larger linear
//! predictor means a *smaller* probability. With `z = (1, x, v)`:
//!
//! - disease among verified: `P(Y=1 | x, v, R=1) = expit_neg(mu . z)`
//! - verification: `P(R=1 | x, v, y) = expit_neg(psi . z + beta * y)`
//! - induced selection: `P(R=1 | x, v) = expit_neg(psi . z + c(x, v))`
//!   with `c = log E(exp(beta * Y) | x, v, R=1)`
//! - posterior disease: `P(Y=1 | x, v, r) = expit_neg(mu . z + (r - 1) beta)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 / (1 + exp(t))`, saturating cleanly in both tails.
#[inline]
pub fn expit_neg(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `log(1 + exp(t))`.
#[inline]
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// `coef[0] + coef[1] * x + coef[2..] . v`. Callers guarantee lengths.
#[inline]
pub(crate) fn linear_predictor(coef: &[f64], x: f64, v: &[f64]) -> f64 {
    let mut acc = coef[0] + coef[1] * x;
    for (c, vj) in coef[2..].iter().zip(v) {
        acc += c * vj;
    }
    acc
}

/// `c` as a function of the disease linear predictor `hd = mu . z`.
///
/// `log(e^beta p1 + 1 - p1)` with `p1 = expit_neg(hd)` equals
/// `logaddexp(beta, hd) - softplus(hd)`, which stays finite for any `beta`.
#[inline]
pub(crate) fn c_from_predictor(hd: f64, beta: f64) -> f64 {
    log_add_exp(beta, hd) - softplus(hd)
}

#[inline]
fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// Coefficients of the disease model among verified subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: Vec<f64>,
}

impl DiseaseParams {
    pub fn new(mu1: f64, mu2: f64, mu3: Vec<f64>) -> Self {
        Self { mu1, mu2, mu3 }
    }

    fn coefs(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.mu3.len() + 2);
        c.push(self.mu1);
        c.push(self.mu2);
        c.extend_from_slice(&self.mu3);
        c
    }

    fn predictor(&self, x: f64, v: &[f64]) -> Result<f64> {
        check_dim(self.mu3.len(), v.len())?;
        Ok(linear_predictor(&self.coefs(), x, v))
    }
}

/// Coefficients of the verification model. `beta = 0` is the ignorable
/// (missing at random) submodel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationParams {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: Vec<f64>,
    pub beta: f64,
}

impl VerificationParams {
    pub fn new(psi1: f64, psi2: f64, psi3: Vec<f64>, beta: f64) -> Self {
        Self {
            psi1,
            psi2,
            psi3,
            beta,
        }
    }
}

/// Flat parameter vector ordered `(mu1, mu2, mu3, beta, psi1, psi2, psi3)`.
///
/// The leading `k1 = p + 3` entries form `theta = (mu, beta)`, the
/// parameters of the posterior disease probability. The full length is
/// `k2 = 2p + 5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    p: usize,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(2 * p + 5, values.len())?;
        Ok(Self { p, values })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            values: vec![0.0; 2 * p + 5],
        }
    }

    pub fn from_parts(mu: &DiseaseParams, phi: &VerificationParams) -> Result<Self> {
        let p = mu.mu3.len();
        check_dim(p, phi.psi3.len())?;
        let mut values = Vec::with_capacity(2 * p + 5);
        values.push(mu.mu1);
        values.push(mu.mu2);
        values.extend_from_slice(&mu.mu3);
        values.push(phi.beta);
        values.push(phi.psi1);
        values.push(phi.psi2);
        values.extend_from_slice(&phi.psi3);
        Ok(Self { p, values })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k1(&self) -> usize {
        self.p + 3
    }

    pub fn k2(&self) -> usize {
        2 * self.p + 5
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `(mu1, mu2, mu3, beta)`.
    pub fn theta(&self) -> &[f64] {
        &self.values[..self.p + 3]
    }

    /// `(mu1, mu2, mu3)`.
    pub fn mu_coefs(&self) -> &[f64] {
        &self.values[..self.p + 2]
    }

    pub fn beta(&self) -> f64 {
        self.values[self.p + 2]
    }

    /// `(psi1, psi2, psi3)`.
    pub fn psi_coefs(&self) -> &[f64] {
        &self.values[self.p + 3..]
    }

    pub fn disease_params(&self) -> DiseaseParams {
        let mu = self.mu_coefs();
        DiseaseParams::new(mu[0], mu[1], mu[2..].to_vec())
    }

    pub fn verification_params(&self) -> VerificationParams {
        let psi = self.psi_coefs();
        VerificationParams::new(psi[0], psi[1], psi[2..].to_vec(), self.beta())
    }

    /// Coordinate names in vector order, e.g. `mu1, mu2, mu3[age], beta, ...`.
    pub fn names(&self, covariates: &[String]) -> Vec<String> {
        let cov = |prefix: &str, j: usize| match covariates.get(j) {
            Some(name) => format!("{prefix}[{name}]"),
            None => format!("{prefix}[{}]", j + 1),
        };
        let mut out = vec!["mu1".to_string(), "mu2".to_string()];
        out.extend((0..self.p).map(|j| cov("mu3", j)));
        out.push("beta".into());
        out.push("psi1".into());
        out.push("psi2".into());
        out.extend((0..self.p).map(|j| cov("psi3", j)));
        out
    }
}

/// `P(Y=1 | x, v, R=1)`.
pub fn p1(x: f64, v: &[f64], mu: &DiseaseParams) -> Result<f64> {
    Ok(expit_neg(mu.predictor(x, v)?))
}

/// `log E(exp(beta Y) | x, v, R=1)`.
pub fn c_fn(x: f64, v: &[f64], mu: &DiseaseParams, beta: f64) -> Result<f64> {
    Ok(c_from_predictor(mu.predictor(x, v)?, beta))
}

/// Induced verification probability `P(R=1 | x, v)`.
pub fn pi_fn(x: f64, v: &[f64], eta: &ParameterVector) -> Result<f64> {
    check_dim(eta.p(), v.len())?;
    let hd = linear_predictor(eta.mu_coefs(), x, v);
    let hs = linear_predictor(eta.psi_coefs(), x, v);
    Ok(expit_neg(hs + c_from_predictor(hd, eta.beta())))
}

#[inline]
pub(crate) fn g_raw(theta: &[f64], x: f64, v: &[f64], r: bool) -> f64 {
    let p = v.len();
    let hd = linear_predictor(&theta[..p + 2], x, v);
    let shift = if r { 0.0 } else { -theta[p + 2] };
    expit_neg(hd + shift)
}

/// Posterior disease probability `P(Y=1 | x, v, r)` given
/// `theta = (mu1, mu2, mu3, beta)`.
pub fn g_fn(x: f64, v: &[f64], r: bool, theta: &[f64]) -> Result<f64> {
    check_dim(v.len() + 3, theta.len())?;
    Ok(g_raw(theta, x, v, r))
}

/// Writes the gradient of `g` with respect to theta into `out`.
#[inline]
pub(crate) fn g_gradient_into(theta: &[f64], x: f64, v: &[f64], r: bool, out: &mut [f64]) {
    let g = g_raw(theta, x, v, r);
    let d = -g * (1.0 - g);
    out[0] = d;
    out[1] = d * x;
    for (o, vj) in out[2..2 + v.len()].iter_mut().zip(v) {
        *o = d * vj;
    }
    out[2 + v.len()] = if r { 0.0 } else { -d };
}

/// Gradient of [`g_fn`] with respect to `theta`: `-g(1-g) (1, x, v, r-1)`.
pub fn g_gradient(x: f64, v: &[f64], r: bool, theta: &[f64]) -> Result<Vec<f64>> {
    check_dim(v.len() + 3, theta.len())?;
    let mut out = vec![0.0; theta.len()];
    g_gradient_into(theta, x, v, r, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scenario1_mu() -> DiseaseParams {
        DiseaseParams::new(1.7, -2.5, vec![-1.5, -1.5])
    }

    #[test]
    fn expit_neg_values() {
        assert_eq!(expit_neg(0.0), 0.5);
        assert_eq!(expit_neg(750.0), 0.0);
        assert_eq!(expit_neg(-750.0), 1.0);
        assert!((expit_neg(1.7) - 1.0 / (1.0 + 1.7f64.exp())).abs() < 1e-15);
        assert!((expit_neg(1.7) - 0.154465).abs() < 1e-6);
        assert!(expit_neg(700.0).is_finite() && expit_neg(-700.0).is_finite());
    }

    #[test]
    fn p1_examples() {
        let p = p1(0.0, &[0.0, 0.0], &scenario1_mu()).unwrap();
        assert!((p - 0.154465).abs() < 1e-6);
        let zero = DiseaseParams::new(0.0, 0.0, vec![0.0, 0.0]);
        assert_eq!(p1(3.0, &[1.0, 2.0], &zero).unwrap(), 0.5);
        let slope = DiseaseParams::new(0.0, 1.0, vec![0.0, 0.0]);
        assert!(p1(1e4, &[0.0, 0.0], &slope).unwrap() < 1e-300);
        assert!(matches!(
            p1(0.0, &[0.0], &scenario1_mu()),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn c_fn_examples() {
        let mu = scenario1_mu();
        assert_eq!(c_fn(0.3, &[0.1, 1.0], &mu, 0.0).unwrap(), 0.0);
        let flat = DiseaseParams::new(0.0, 0.0, vec![0.0, 0.0]);
        let c = c_fn(0.0, &[0.0, 0.0], &flat, 2f64.ln()).unwrap();
        assert!((c - 1.5f64.ln()).abs() < 1e-15);
        // p1 -> 1 as the predictor -> -inf
        let sure = DiseaseParams::new(-60.0, 0.0, vec![0.0, 0.0]);
        assert!((c_fn(0.0, &[0.0, 0.0], &sure, 1.3).unwrap() - 1.3).abs() < 1e-12);
        // large |beta| does not overflow
        assert!(c_fn(0.0, &[0.0, 0.0], &flat, 800.0).unwrap().is_finite());
        assert!(c_fn(0.0, &[0.0, 0.0], &flat, -800.0).unwrap().is_finite());
    }

    #[test]
    fn pi_fn_examples() {
        let mu = DiseaseParams::new(0.0, 0.0, vec![0.0, 0.0]);
        let phi = VerificationParams::new(0.0, 0.0, vec![0.0, 0.0], 2f64.ln());
        let eta = ParameterVector::from_parts(&mu, &phi).unwrap();
        assert!((pi_fn(0.0, &[0.0, 0.0], &eta).unwrap() - 0.4).abs() < 1e-15);

        let mu = scenario1_mu();
        let phi = VerificationParams::new(1.3, -1.5, vec![-1.2, 1.0], 0.0);
        let eta = ParameterVector::from_parts(&mu, &phi).unwrap();
        let direct = expit_neg(1.3 - 1.5 * 0.2 - 1.2 * 0.4 + 1.0);
        assert!((pi_fn(0.2, &[0.4, 1.0], &eta).unwrap() - direct).abs() < 1e-15);

        let phi = VerificationParams::new(1e4, 0.0, vec![0.0, 0.0], -2.0);
        let eta = ParameterVector::from_parts(&mu, &phi).unwrap();
        assert_eq!(pi_fn(0.0, &[0.0, 0.0], &eta).unwrap(), 0.0);
    }

    #[test]
    fn g_fn_examples() {
        let theta = [0.0, 0.0, 0.0, 0.0, 2.0];
        let g0 = g_fn(0.0, &[0.0, 0.0], false, &theta).unwrap();
        assert!((g0 - 0.880797).abs() < 1e-6);
        let theta = [1.7, -2.5, -1.5, -1.5, -2.0];
        let g1 = g_fn(0.4, &[0.3, 1.0], true, &theta).unwrap();
        let p = p1(0.4, &[0.3, 1.0], &scenario1_mu()).unwrap();
        assert_eq!(g1, p);
        let mar = [1.7, -2.5, -1.5, -1.5, 0.0];
        assert_eq!(
            g_fn(0.4, &[0.3, 1.0], true, &mar).unwrap(),
            g_fn(0.4, &[0.3, 1.0], false, &mar).unwrap()
        );
    }

    #[test]
    fn g_gradient_saturation_and_last_component() {
        let theta = [800.0, 0.0, 0.0, 0.0, 1.0];
        assert!(g_gradient(0.0, &[0.0, 0.0], false, &theta)
            .unwrap()
            .iter()
            .all(|d| *d == 0.0));
        let theta = [0.3, -1.0, 0.5, 0.2, 1.0];
        let grad = g_gradient(0.1, &[0.2, 1.0], true, &theta).unwrap();
        assert_eq!(grad[4], 0.0);
    }

    #[test]
    fn parameter_vector_layout() {
        let mu = DiseaseParams::new(1.0, 2.0, vec![3.0, 4.0]);
        let phi = VerificationParams::new(6.0, 7.0, vec![8.0, 9.0], 5.0);
        let eta = ParameterVector::from_parts(&mu, &phi).unwrap();
        assert_eq!(eta.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(eta.k1(), 5);
        assert_eq!(eta.k2(), 9);
        assert_eq!(eta.theta(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(eta.disease_params(), mu);
        assert_eq!(eta.verification_params(), phi);
        assert!(ParameterVector::new(2, vec![0.0; 8]).is_err());
    }

    /// `(g, 1 - g)`, the complement taken as `g` at `-theta` to avoid cancellation.
    fn g_and_complement(x: f64, v: &[f64], r: bool, theta: &[f64]) -> (f64, f64) {
        let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
        (g_fn(x, v, r, theta).unwrap(), g_fn(x, v, r, &neg).unwrap())
    }

    fn arb_point() -> impl Strategy<Value = (f64, [f64; 2], [f64; 9])> {
        (
            -3.0..3.0f64,
            prop::array::uniform2(-3.0..3.0f64),
            prop::array::uniform9(-3.0..3.0f64),
        )
    }

    proptest! {
        #[test]
        fn probabilities_in_unit_interval((x, v, eta) in arb_point()) {
            let eta = ParameterVector::new(2, eta.to_vec()).unwrap();
            let p = p1(x, &v, &eta.disease_params()).unwrap();
            let pi = pi_fn(x, &v, &eta).unwrap();
            let g0 = g_fn(x, &v, false, eta.theta()).unwrap();
            let g1 = g_fn(x, &v, true, eta.theta()).unwrap();
            for q in [p, pi, g0, g1] {
                prop_assert!((0.0..=1.0).contains(&q));
            }
        }

        #[test]
        fn posterior_odds_shift_by_exp_beta((x, v, eta) in arb_point()) {
            let theta = &eta[..5];
            let (g0, g0c) = g_and_complement(x, &v, false, theta);
            let (g1, g1c) = g_and_complement(x, &v, true, theta);
            let lhs = (g0 / g0c).ln();
            let rhs = theta[4] + (g1 / g1c).ln();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }

        #[test]
        fn joint_law_recovers_verification_model((x, v, eta) in arb_point()) {
            let eta = ParameterVector::new(2, eta.to_vec()).unwrap();
            let pi = pi_fn(x, &v, &eta).unwrap();
            prop_assume!((1e-5..=1.0 - 1e-5).contains(&pi));
            let (g0, g0c) = g_and_complement(x, &v, false, eta.theta());
            let (g1, g1c) = g_and_complement(x, &v, true, eta.theta());
            let hs = linear_predictor(eta.psi_coefs(), x, &v);
            for y in [0.0, 1.0] {
                let (gy1, gy0) = if y == 1.0 { (g1, g0) } else { (g1c, g0c) };
                let joint_r1 = pi * gy1;
                let recovered = joint_r1 / (joint_r1 + (1.0 - pi) * gy0);
                let direct = expit_neg(hs + eta.beta() * y);
                prop_assert!((recovered - direct).abs() < 1e-10);
            }
        }

        #[test]
        fn c_increasing_in_beta(hd in -5.0..5.0f64, b in -5.0..5.0f64, db in 1e-3..2.0f64) {
            prop_assert!(c_from_predictor(hd, b + db) > c_from_predictor(hd, b));
        }

        #[test]
        fn g_gradient_matches_finite_differences((x, v, eta) in arb_point(), r in any::<bool>()) {
            let theta = &eta[..5];
            let grad = g_gradient(x, &v, r, theta).unwrap();
            let h = 1e-6;
            for j in 0..5 {
                let mut up = theta.to_vec();
                let mut dn = theta.to_vec();
                up[j] += h;
                dn[j] -= h;
                let fd = (g_raw(&up, x, &v, r) - g_raw(&dn, x, &v, r)) / (2.0 * h);
                let scale = grad[j].abs().max(1e-3);
                prop_assert!((fd - grad[j]).abs() / scale < 1e-6, "j={} fd={} an={}", j, fd, grad[j]);
            }
        }
    }
}
