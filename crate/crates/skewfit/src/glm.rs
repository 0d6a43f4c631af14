//! Logistic-regression core: sigmoid scoring, plain/weighted/cost-sensitive
//! cross-entropy with an L2 penalty, a soft-F surrogate objective, and a
//! deterministic quasi-Newton fitter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Clamp bound applied to sigmoid outputs before they reach a logarithm.
pub const SIGMOID_EPS: f64 = 1e-12;

/// Numerically stable sigmoid, clamped into `[SIGMOID_EPS, 1 - SIGMOID_EPS]`.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)
}

/// Coefficients of a (possibly weighted) logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Coefficient vector; the intercept, when enabled, is the first entry.
    pub beta: DVector<f64>,
    pub lambda_beta: f64,
    pub fitted: bool,
    pub include_intercept: bool,
}

impl ModelParams {
    pub fn new(beta: DVector<f64>, lambda_beta: f64, include_intercept: bool) -> Result<Self> {
        if lambda_beta < 0.0 || !lambda_beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda_beta must be finite and >= 0, got {lambda_beta}"
            )));
        }
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        Ok(Self {
            beta,
            lambda_beta,
            fitted: false,
            include_intercept,
        })
    }

    /// Zero coefficients for `d` raw features.
    pub fn zeros(d: usize, lambda_beta: f64, include_intercept: bool) -> Self {
        let len = d + usize::from(include_intercept);
        Self {
            beta: DVector::zeros(len),
            lambda_beta,
            fitted: false,
            include_intercept,
        }
    }

    /// Number of raw features the model expects.
    pub fn input_dim(&self) -> usize {
        self.beta.len() - usize::from(self.include_intercept)
    }
}

/// Per-sample non-negative loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    /// Validates that every weight is finite and non-negative. An all-zero
    /// vector is representable (a ratio model can produce one) but is
    /// rejected by the fitting routines.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadWeight(i));
            }
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

/// Stopping rules for the quasi-Newton fitter. The line search is
/// sufficient-decrease backtracking (Armijo, c1 = 1e-4, halving steps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

impl OptimizerSettings {
    fn validate(&self) -> Result<()> {
        if self.gradient_tolerance <= 0.0 || !self.gradient_tolerance.is_finite() {
            return Err(Error::InvalidParameter(
                "gradient_tolerance must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A fitted model plus convergence diagnostics. Non-convergence is reported,
/// not raised: the final iterate is still usable.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Predicted probability for one raw feature vector.
pub fn score(params: &ModelParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: x.len(),
        });
    }
    let mut z = 0.0;
    let mut k = 0;
    if params.include_intercept {
        z += params.beta[0];
        k = 1;
    }
    for (j, &v) in x.iter().enumerate() {
        z += params.beta[k + j] * v;
    }
    Ok(sigmoid(z))
}

/// Predicted probabilities for every row of `data`.
pub fn predict_scores(params: &ModelParams, data: &Dataset) -> Result<Vec<f64>> {
    if data.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: data.dim(),
        });
    }
    let x = augment(data.features(), params.include_intercept);
    let z = &x * &params.beta;
    Ok(z.iter().map(|&zi| sigmoid(zi)).collect())
}

fn augment(features: &DMatrix<f64>, include_intercept: bool) -> DMatrix<f64> {
    if include_intercept {
        let (n, d) = features.shape();
        let mut x = DMatrix::zeros(n, d + 1);
        x.column_mut(0).fill(1.0);
        x.view_mut((0, 1), (n, d)).copy_from(features);
        x
    } else {
        features.clone()
    }
}

fn labels_f64(data: &Dataset) -> DVector<f64> {
    DVector::from_iterator(data.n(), data.labels().iter().map(|&y| f64::from(y)))
}

fn check_weights_for_fit(weights: &SampleWeights, n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok(())
}

/// Weighted negative log-likelihood plus `lambda * ||beta||^2`, evaluated on
/// the augmented design.
fn objective(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    lambda: f64,
) -> f64 {
    let z = x * beta;
    let mut loss = 0.0;
    for i in 0..y.len() {
        let p = sigmoid(z[i]);
        loss -= w[i] * (y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln());
    }
    loss + lambda * beta.norm_squared()
}

fn objective_gradient(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    lambda: f64,
) -> DVector<f64> {
    let z = x * beta;
    let r = DVector::from_fn(y.len(), |i, _| w[i] * (sigmoid(z[i]) - y[i]));
    x.tr_mul(&r) + beta * (2.0 * lambda)
}

/// Regularized cross-entropy of `params` on `data`.
pub fn cross_entropy(params: &ModelParams, data: &Dataset) -> Result<f64> {
    let x = augment(data.features(), params.include_intercept);
    let y = labels_f64(data);
    Ok(objective(
        &params.beta,
        &x,
        &y,
        &vec![1.0; data.n()],
        params.lambda_beta,
    ))
}

/// Cross-entropy with each sample's log-likelihood term scaled by its weight.
pub fn weighted_cross_entropy(
    params: &ModelParams,
    data: &Dataset,
    weights: &SampleWeights,
) -> Result<f64> {
    if weights.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: weights.len(),
        });
    }
    let x = augment(data.features(), params.include_intercept);
    let y = labels_f64(data);
    Ok(objective(
        &params.beta,
        &x,
        &y,
        weights.as_slice(),
        params.lambda_beta,
    ))
}

/// Analytic gradient of the (weighted) objective:
/// `sum_i w_i (p_i - y_i) x_i + 2 lambda beta`.
pub fn gradient(
    params: &ModelParams,
    data: &Dataset,
    weights: Option<&SampleWeights>,
) -> Result<DVector<f64>> {
    let ones;
    let w = match weights {
        Some(w) => {
            if w.len() != data.n() {
                return Err(Error::DimensionMismatch {
                    expected: data.n(),
                    got: w.len(),
                });
            }
            w.as_slice()
        }
        None => {
            ones = vec![1.0; data.n()];
            &ones
        }
    };
    let x = augment(data.features(), params.include_intercept);
    let y = labels_f64(data);
    Ok(objective_gradient(&params.beta, &x, &y, w, params.lambda_beta))
}

struct MinimizeOutcome {
    x: DVector<f64>,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
}

/// BFGS with Armijo backtracking, started from the given point. Deterministic;
/// the objective is non-increasing across accepted steps.
fn minimize<F>(x0: DVector<f64>, settings: &OptimizerSettings, f_grad: F) -> MinimizeOutcome
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    const C1: f64 = 1e-4;
    let dim = x0.len();
    let mut x = x0;
    let (mut f, mut g) = f_grad(&x);
    let mut h_inv = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        let g_norm = g.norm();
        if g_norm <= settings.gradient_tolerance {
            return MinimizeOutcome {
                x,
                iterations,
                gradient_norm: g_norm,
                converged: true,
            };
        }
        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            // curvature information went stale; restart from steepest descent
            h_inv = DMatrix::identity(dim, dim);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        // f is a sum of n terms, so its evaluation carries rounding noise of
        // this order; near the optimum the true Armijo decrease drops below
        // it and exact comparison would reject genuine progress.
        let noise = 1e-13 * (1.0 + f.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let x_new = &x + &dir * t;
            let (f_new, g_new) = f_grad(&x_new);
            if f_new <= f + C1 * t * slope + noise {
                accepted = Some((x_new, f_new, g_new));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no decrease possible along this direction at machine precision
            return MinimizeOutcome {
                x,
                iterations,
                gradient_norm: g_norm,
                converged: false,
            };
        };

        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            let ss = &s * s.transpose();
            let hy_s = &hy * s.transpose();
            h_inv = h_inv - (&hy_s + hy_s.transpose()) * rho + ss * (rho * rho * yhy + rho);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
    }

    let gradient_norm = g.norm();
    MinimizeOutcome {
        x,
        iterations,
        gradient_norm,
        converged: gradient_norm <= settings.gradient_tolerance,
    }
}

/// Fit an L2-regularized logistic regression, optionally with sample weights.
///
/// Starts from beta = 0 and is fully deterministic; omitted weights behave
/// exactly like a vector of ones.
pub fn fit(
    data: &Dataset,
    lambda_beta: f64,
    weights: Option<&SampleWeights>,
    settings: &OptimizerSettings,
    include_intercept: bool,
) -> Result<FitResult> {
    settings.validate()?;
    if lambda_beta < 0.0 || !lambda_beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda_beta must be finite and >= 0, got {lambda_beta}"
        )));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n = data.n();
    let owned_ones;
    let w: &[f64] = match weights {
        Some(w) => {
            check_weights_for_fit(w, n)?;
            w.as_slice()
        }
        None => {
            owned_ones = vec![1.0; n];
            &owned_ones
        }
    };
    let x = augment(data.features(), include_intercept);
    let y = labels_f64(data);
    let dim = x.ncols();
    let outcome = minimize(DVector::zeros(dim), settings, |beta| {
        (
            objective(beta, &x, &y, w, lambda_beta),
            objective_gradient(beta, &x, &y, w, lambda_beta),
        )
    });
    if !outcome.converged {
        log::warn!(
            "logistic fit stopped after {} iterations with gradient norm {:.3e}",
            outcome.iterations,
            outcome.gradient_norm
        );
    }
    Ok(FitResult {
        params: ModelParams {
            beta: outcome.x,
            lambda_beta,
            fitted: true,
            include_intercept,
        },
        converged: outcome.converged,
        iterations: outcome.iterations,
        gradient_norm: outcome.gradient_norm,
    })
}

/// Class-balancing weights: `w_i = n / (2 * count(class of y_i))`, so that
/// both classes carry total weight n/2.
pub fn cost_sensitive_weights(data: &Dataset) -> Result<SampleWeights> {
    let (neg, pos) = data.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass);
    }
    let n = data.n() as f64;
    let w_pos = n / (2.0 * pos as f64);
    let w_neg = n / (2.0 * neg as f64);
    SampleWeights::new(
        data.labels()
            .iter()
            .map(|&y| if y == 1 { w_pos } else { w_neg })
            .collect(),
    )
}

/// Smooth F surrogate `2 * sum(p_i y_i) / (sum(p_i) + sum(y_i))`, replacing
/// TP with expected true positives and m_p with expected positives.
pub fn soft_f_surrogate(scores: &[f64], labels: &[u8]) -> f64 {
    let a: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| p * f64::from(y))
        .sum();
    let sum_p: f64 = scores.iter().sum();
    let n_pos: f64 = labels.iter().map(|&y| f64::from(y)).sum();
    2.0 * a / (sum_p + n_pos)
}

fn soft_f_objective_gradient(
    beta: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> (f64, DVector<f64>) {
    let z = x * beta;
    let p = DVector::from_fn(y.len(), |i, _| sigmoid(z[i]));
    let a: f64 = p.iter().zip(y.iter()).map(|(&pi, &yi)| pi * yi).sum();
    let n_pos: f64 = y.sum();
    let b = p.sum() + n_pos;
    let f = -2.0 * a / b + lambda * beta.norm_squared();

    // dp_i/dbeta = p_i (1 - p_i) x_i
    let dp = DVector::from_fn(y.len(), |i, _| p[i] * (1.0 - p[i]));
    let da = x.tr_mul(&DVector::from_fn(y.len(), |i, _| dp[i] * y[i]));
    let db = x.tr_mul(&dp);
    let grad = (db * a - da * b) * (2.0 / (b * b)) + beta * (2.0 * lambda);
    (f, grad)
}

/// Fit by maximizing the soft F surrogate minus the L2 penalty.
///
/// The surrogate is not convex; the optimizer returns a stationary point
/// reached from beta = 0.
pub fn fit_soft_f(
    data: &Dataset,
    lambda_beta: f64,
    settings: &OptimizerSettings,
    include_intercept: bool,
) -> Result<FitResult> {
    settings.validate()?;
    let (_, pos) = data.class_counts();
    if pos == 0 {
        return Err(Error::SingleClass);
    }
    let x = augment(data.features(), include_intercept);
    let y = labels_f64(data);
    let outcome = minimize(DVector::zeros(x.ncols()), settings, |beta| {
        soft_f_objective_gradient(beta, &x, &y, lambda_beta)
    });
    if !outcome.converged {
        log::warn!(
            "soft-F fit stopped after {} iterations with gradient norm {:.3e}",
            outcome.iterations,
            outcome.gradient_norm
        );
    }
    Ok(FitResult {
        params: ModelParams {
            beta: outcome.x,
            lambda_beta,
            fitted: true,
            include_intercept,
        },
        converged: outcome.converged,
        iterations: outcome.iterations,
        gradient_norm: outcome.gradient_norm,
    })
}

/// JSON envelope for model interchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelExport {
    pub beta: Vec<f64>,
    pub lambda_beta: f64,
    pub include_intercept: bool,
    pub feature_names: Vec<String>,
}

impl ModelExport {
    pub fn from_params(params: &ModelParams, feature_names: &[String]) -> Self {
        Self {
            beta: params.beta.iter().copied().collect(),
            lambda_beta: params.lambda_beta,
            include_intercept: params.include_intercept,
            feature_names: feature_names.to_vec(),
        }
    }

    pub fn into_params(self) -> Result<(ModelParams, Vec<String>)> {
        let mut params = ModelParams::new(
            DVector::from_vec(self.beta),
            self.lambda_beta,
            self.include_intercept,
        )?;
        params.fitted = true;
        Ok((params, self.feature_names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use nalgebra::dvector;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(rows: &[f64], n: usize, d: usize, labels: &[u8]) -> Dataset {
        Dataset::new(
            DMatrix::from_row_slice(n, d, rows),
            labels.to_vec(),
            (0..d).map(|i| format!("f{i}")).collect(),
            "toy",
        )
        .unwrap()
    }

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = seeding::rng(seed);
        let rows: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        dataset(&rows, n, d, &labels)
    }

    #[test]
    fn score_basics() {
        let p = ModelParams::new(dvector![0.0, 0.0], 0.0, false).unwrap();
        assert_eq!(score(&p, &[3.0, -1.0]).unwrap(), 0.5);

        // beta'x = ln 3 gives p = 0.75
        let p = ModelParams::new(dvector![3f64.ln()], 0.0, false).unwrap();
        assert!((score(&p, &[1.0]).unwrap() - 0.75).abs() < 1e-15);

        let p = ModelParams::new(dvector![-745.0], 0.0, false).unwrap();
        let s = score(&p, &[1.0]).unwrap();
        assert!(s > 0.0 && s.is_finite());

        let p = ModelParams::new(dvector![1.0, 2.0], 0.0, false).unwrap();
        assert!(matches!(
            score(&p, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn score_with_intercept_prepends_constant() {
        let p = ModelParams::new(dvector![1.0, 2.0], 0.0, true).unwrap();
        // z = 1 + 2 * 0.5 = 2
        assert!((score(&p, &[0.5]).unwrap() - sigmoid(2.0)).abs() < 1e-15);
        assert_eq!(p.input_dim(), 1);
    }

    #[test]
    fn score_is_monotone_in_linear_predictor() {
        let p = ModelParams::new(dvector![2.0], 0.0, false).unwrap();
        let mut last = 0.0;
        for i in 0..50 {
            let s = score(&p, &[-2.0 + i as f64 * 0.08]).unwrap();
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn cross_entropy_at_zero_beta() {
        let ds = random_dataset(12, 3, 1);
        let p = ModelParams::zeros(3, 0.0, false);
        let ce = cross_entropy(&p, &ds).unwrap();
        assert!((ce - 12.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn penalty_isolation() {
        let ds = random_dataset(10, 2, 2);
        let beta = dvector![0.7, -1.3];
        let p0 = ModelParams::new(beta.clone(), 0.0, false).unwrap();
        let p1 = ModelParams::new(beta.clone(), 1.0, false).unwrap();
        let diff = cross_entropy(&p1, &ds).unwrap() - cross_entropy(&p0, &ds).unwrap();
        assert!((diff - beta.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_single_sample() {
        // y = 1 with p = 0.75: loss is -ln 0.75
        let ds = dataset(&[1.0], 1, 1, &[1]);
        let p = ModelParams::new(dvector![3f64.ln()], 0.0, false).unwrap();
        let ce = cross_entropy(&p, &ds).unwrap();
        assert!((ce - (-0.75f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn weighted_cross_entropy_reductions() {
        let ds = random_dataset(15, 3, 3);
        let p = ModelParams::new(dvector![0.3, -0.2, 0.9], 0.5, false).unwrap();
        let plain = cross_entropy(&p, &ds).unwrap();

        let ones = SampleWeights::ones(15);
        assert_eq!(weighted_cross_entropy(&p, &ds, &ones).unwrap(), plain);

        // single-indicator weights pick out one sample's term (plus penalty)
        let mut w = vec![0.0; 15];
        w[4] = 1.0;
        let w = SampleWeights::new(w).unwrap();
        let single = weighted_cross_entropy(&p, &ds, &w).unwrap();
        let row: Vec<f64> = ds.features().row(4).iter().copied().collect();
        let pi = score(&p, &row).unwrap();
        let yi = f64::from(ds.labels()[4]);
        let expect = -(yi * pi.ln() + (1.0 - yi) * (1.0 - pi).ln()) + 0.5 * p.beta.norm_squared();
        assert!((single - expect).abs() < 1e-12);

        // doubling all weights doubles the unpenalized loss
        let p0 = ModelParams::new(p.beta.clone(), 0.0, false).unwrap();
        let twos = SampleWeights::new(vec![2.0; 15]).unwrap();
        let doubled = weighted_cross_entropy(&p0, &ds, &twos).unwrap();
        assert!((doubled - 2.0 * cross_entropy(&p0, &ds).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn weights_must_be_non_negative() {
        assert!(matches!(
            SampleWeights::new(vec![1.0, -0.1]),
            Err(Error::BadWeight(1))
        ));
        assert!(matches!(
            SampleWeights::new(vec![f64::NAN]),
            Err(Error::BadWeight(0))
        ));
    }

    fn finite_difference_gradient<F: Fn(&DVector<f64>) -> f64>(
        f: &F,
        beta: &DVector<f64>,
        h: f64,
    ) -> DVector<f64> {
        let mut g = DVector::zeros(beta.len());
        for j in 0..beta.len() {
            let mut hi = beta.clone();
            let mut lo = beta.clone();
            hi[j] += h;
            lo[j] -= h;
            g[j] = (f(&hi) - f(&lo)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seeding::rng(17);
        for trial in 0..20 {
            let ds = random_dataset(20, 5, 100 + trial);
            let beta = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            let lambda = rng.random_range(0.0..2.0);
            let w = SampleWeights::new((0..20).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
            let params = ModelParams::new(beta.clone(), lambda, false).unwrap();
            let analytic = gradient(&params, &ds, Some(&w)).unwrap();
            let fd = finite_difference_gradient(
                &|b: &DVector<f64>| {
                    let p = ModelParams::new(b.clone(), lambda, false).unwrap();
                    weighted_cross_entropy(&p, &ds, &w).unwrap()
                },
                &beta,
                1e-5,
            );
            let max_err = (&analytic - &fd).amax();
            assert!(max_err < 1e-6, "trial {trial}: max err {max_err}");
        }
    }

    #[test]
    fn gradient_penalty_part_is_two_lambda_beta() {
        let ds = random_dataset(10, 3, 5);
        let beta = dvector![0.4, -0.8, 1.2];
        let p0 = ModelParams::new(beta.clone(), 0.0, false).unwrap();
        let p1 = ModelParams::new(beta.clone(), 1.0, false).unwrap();
        let diff = gradient(&p1, &ds, None).unwrap() - gradient(&p0, &ds, None).unwrap();
        assert!((diff - beta * 2.0).amax() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_fitted_optimum() {
        let ds = random_dataset(50, 3, 6);
        let fit = fit(&ds, 0.5, None, &OptimizerSettings::default(), false).unwrap();
        assert!(fit.converged);
        let g = gradient(&fit.params, &ds, None).unwrap();
        assert!(g.norm() <= 1e-6);
    }

    #[test]
    fn fit_separable_data_stays_finite_under_penalty() {
        let ds = dataset(&[-1.0, 1.0], 2, 1, &[0, 1]);
        let fit = fit(&ds, 1.0, None, &OptimizerSettings::default(), false).unwrap();
        assert!(fit.converged, "gradient norm {}", fit.gradient_norm);
        assert!(fit.params.beta[0].is_finite());
    }

    #[test]
    fn fit_shrinks_monotonically_with_lambda() {
        let ds = random_dataset(60, 4, 7);
        let mut last = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let fit = fit(&ds, lambda, None, &OptimizerSettings::default(), false).unwrap();
            let norm = fit.params.beta.norm();
            assert!(norm < last, "lambda {lambda}: {norm} !< {last}");
            last = norm;
        }
    }

    #[test]
    fn fit_with_unit_weights_is_bit_identical_to_omitted() {
        let ds = random_dataset(40, 4, 8);
        let a = fit(&ds, 0.1, None, &OptimizerSettings::default(), true).unwrap();
        let ones = SampleWeights::ones(40);
        let b = fit(&ds, 0.1, Some(&ones), &OptimizerSettings::default(), true).unwrap();
        assert_eq!(a.params.beta, b.params.beta);
    }

    #[test]
    fn fit_rejects_single_class_and_zero_weights() {
        let ds = dataset(&[1.0, 2.0], 2, 1, &[1, 1]);
        assert!(matches!(
            fit(&ds, 0.1, None, &OptimizerSettings::default(), false),
            Err(Error::SingleClass)
        ));
        let ds = dataset(&[1.0, 2.0], 2, 1, &[0, 1]);
        let zeros = SampleWeights::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            fit(&ds, 0.1, Some(&zeros), &OptimizerSettings::default(), false),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn cost_sensitive_weight_values() {
        let ds = random_dataset(10, 2, 9); // may be unbalanced; rebuild balanced
        let balanced = dataset(
            &(0..8).map(f64::from).collect::<Vec<_>>(),
            8,
            1,
            &[0, 1, 0, 1, 0, 1, 0, 1],
        );
        let w = cost_sensitive_weights(&balanced).unwrap();
        assert!(w.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        drop(ds);

        let mut labels = vec![0u8; 100];
        labels.iter_mut().take(10).for_each(|y| *y = 1);
        let skewed = dataset(&(0..100).map(f64::from).collect::<Vec<_>>(), 100, 1, &labels);
        let w = cost_sensitive_weights(&skewed).unwrap();
        for (i, &v) in w.iter().enumerate() {
            let expect = if labels[i] == 1 { 5.0 } else { 5.0 / 9.0 };
            assert!((v - expect).abs() < 1e-12);
        }
        let pos_total: f64 = w.iter().zip(&labels).filter(|(_, &y)| y == 1).map(|(v, _)| v).sum();
        let neg_total: f64 = w.iter().zip(&labels).filter(|(_, &y)| y == 0).map(|(v, _)| v).sum();
        assert!((pos_total - 50.0).abs() < 1e-9);
        assert!((neg_total - 50.0).abs() < 1e-9);
    }

    #[test]
    fn soft_f_surrogate_values() {
        // hypothetical perfect scores
        assert_eq!(soft_f_surrogate(&[1.0, 1.0, 0.0, 0.0], &[1, 1, 0, 0]), 1.0);
        // beta = 0 on balanced data: 2 * (0.5 * 2) / (2 + 2) = 0.5
        assert_eq!(soft_f_surrogate(&[0.5; 4], &[1, 1, 0, 0]), 0.5);
    }

    #[test]
    fn soft_f_gradient_matches_central_differences() {
        let mut rng = seeding::rng(23);
        for trial in 0..20 {
            let ds = random_dataset(20, 5, 200 + trial);
            let x = augment(ds.features(), false);
            let y = labels_f64(&ds);
            let beta = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            let lambda = rng.random_range(0.0..1.0);
            let (_, analytic) = soft_f_objective_gradient(&beta, &x, &y, lambda);
            let fd = finite_difference_gradient(
                &|b: &DVector<f64>| soft_f_objective_gradient(b, &x, &y, lambda).0,
                &beta,
                1e-5,
            );
            let max_err = (&analytic - &fd).amax();
            assert!(max_err < 1e-6, "trial {trial}: max err {max_err}");
        }
    }

    #[test]
    fn soft_f_fit_beats_zero_beta_surrogate() {
        let ds = random_dataset(60, 3, 31);
        let fit = fit_soft_f(&ds, 0.01, &OptimizerSettings::default(), true).unwrap();
        let scores = predict_scores(&fit.params, &ds).unwrap();
        let at_fit = soft_f_surrogate(&scores, ds.labels());
        let zero = ModelParams::zeros(3, 0.01, true);
        let scores0 = predict_scores(&zero, &ds).unwrap();
        let at_zero = soft_f_surrogate(&scores0, ds.labels());
        assert!(at_fit > at_zero, "{at_fit} <= {at_zero}");
    }

    #[test]
    fn weighted_objective_satisfies_chord_inequality() {
        let mut rng = seeding::rng(41);
        for trial in 0..100 {
            let ds = random_dataset(15, 3, 300 + trial);
            let w = SampleWeights::new((0..15).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
            let lambda = rng.random_range(0.0..1.0);
            let b1 = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let b2 = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let eval = |b: &DVector<f64>| {
                let p = ModelParams::new(b.clone(), lambda, false).unwrap();
                weighted_cross_entropy(&p, &ds, &w).unwrap()
            };
            let (f1, f2) = (eval(&b1), eval(&b2));
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let mid = &b1 * t + &b2 * (1.0 - t);
                let bound = t * f1 + (1.0 - t) * f2 + 1e-9;
                assert!(eval(&mid) <= bound, "trial {trial}, t {t}");
            }
        }
    }

    #[test]
    fn optimizer_reaches_tolerance_on_well_conditioned_problems() {
        let mut hits = 0;
        for trial in 0..100 {
            let ds = random_dataset(100, 5, 400 + trial);
            let fit = fit(&ds, 0.01, None, &OptimizerSettings::default(), false).unwrap();
            if fit.converged {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 converged");
    }

    #[test]
    fn weight_scaling_leaves_argmin_unchanged() {
        let mut rng = seeding::rng(53);
        let tight = OptimizerSettings {
            gradient_tolerance: 1e-9,
            max_iterations: 2000,
        };
        for trial in 0..10 {
            let ds = random_dataset(100, 3, 500 + trial);
            let w: Vec<f64> = (0..100).map(|_| rng.random_range(0.2..2.0)).collect();
            let c = rng.random_range(0.5..5.0);
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let a = fit(
                &ds,
                0.0,
                Some(&SampleWeights::new(w).unwrap()),
                &tight,
                false,
            )
            .unwrap();
            let b = fit(
                &ds,
                0.0,
                Some(&SampleWeights::new(scaled).unwrap()),
                &tight,
                false,
            )
            .unwrap();
            let dist = (&a.params.beta - &b.params.beta).norm();
            assert!(dist < 1e-6, "trial {trial}: argmin moved {dist}");
        }
    }

    #[test]
    fn model_export_round_trip() {
        let ds = random_dataset(30, 2, 61);
        let fit = fit(&ds, 0.1, None, &OptimizerSettings::default(), true).unwrap();
        let export = ModelExport::from_params(&fit.params, ds.feature_names());
        let json = serde_json::to_string(&export).unwrap();
        let back: ModelExport = serde_json::from_str(&json).unwrap();
        let (params, names) = back.into_params().unwrap();
        assert_eq!(params.beta, fit.params.beta);
        assert_eq!(params.lambda_beta, 0.1);
        assert!(params.include_intercept);
        assert_eq!(names, ds.feature_names());
    }
}
