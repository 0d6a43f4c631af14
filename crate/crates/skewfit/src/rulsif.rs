//! Relative density-ratio estimation over one-dimensional score samples.
//!
//! The ratio of the score density to an alpha-mixture of the score and label
//! densities is modelled as a Gaussian kernel expansion over all n scores,
//! with coefficients obtained from a closed-form ridge solve. Bandwidth and
//! ridge strength are selected by k-fold cross-validation on the held-out
//! value of the same quadratic objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::kfold_indices;
use crate::error::{Error, Result};
use crate::glm::SampleWeights;

/// Which side of the mixture carries the alpha coefficient when assembling
/// the design. `Printed` weights the score-sample term by alpha; `Swapped`
/// exchanges the two coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AlphaPlacement {
    #[default]
    Printed,
    Swapped,
}

/// A fitted kernel ratio model `w(p) = sum_l theta_l K(p, center_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioModel {
    pub centers: Vec<f64>,
    pub theta: DVector<f64>,
    /// Squared-bandwidth parameter of the Gaussian kernel.
    pub sigma: f64,
    pub alpha: f64,
    pub lambda_theta: f64,
}

/// The quadratic pieces of the ridge problem: symmetric PSD matrix H and
/// linear term h.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioDesign {
    pub h_mat: DMatrix<f64>,
    pub h_vec: DVector<f64>,
}

/// Gaussian kernel `exp(-(p - c)^2 / (2 sigma))`; `sigma` is the squared
/// bandwidth.
pub fn kernel(p: f64, c: f64, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::BadKernelWidth(sigma));
    }
    Ok(gauss(p, c, 0.5 / sigma))
}

#[inline]
fn gauss(p: f64, c: f64, half_inv_sigma: f64) -> f64 {
    let d = p - c;
    (-d * d * half_inv_sigma).exp()
}

fn validate_samples(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if !scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)) {
        return Err(Error::InvalidParameter(
            "scores must be finite and in [0, 1]".into(),
        ));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Kernel matrix K[i, j] = K(points[i], centers[j]).
fn kernel_matrix(points: &[f64], centers: &[f64], sigma: f64) -> DMatrix<f64> {
    let half = 0.5 / sigma;
    DMatrix::from_fn(points.len(), centers.len(), |i, j| {
        gauss(points[i], centers[j], half)
    })
}

/// Kernel row for the two possible label values against the given centers.
fn label_kernel_rows(centers: &[f64], sigma: f64) -> (DVector<f64>, DVector<f64>) {
    let half = 0.5 / sigma;
    let k0 = DVector::from_fn(centers.len(), |j, _| gauss(0.0, centers[j], half));
    let k1 = DVector::from_fn(centers.len(), |j, _| gauss(1.0, centers[j], half));
    (k0, k1)
}

fn mixture_coefficients(alpha: f64, placement: AlphaPlacement) -> (f64, f64) {
    match placement {
        AlphaPlacement::Printed => (alpha, 1.0 - alpha),
        AlphaPlacement::Swapped => (1.0 - alpha, alpha),
    }
}

/// Assemble the ridge design over the given samples, with all n scores
/// serving as kernel centers.
///
/// The score-sample Gram term carries coefficient alpha and the label-sample
/// term 1 - alpha (labels enter the kernel as the real values 0.0/1.0);
/// `placement` can exchange the two coefficients.
pub fn build_design(
    scores: &[f64],
    labels: &[u8],
    sigma: f64,
    alpha: f64,
    placement: AlphaPlacement,
) -> Result<RatioDesign> {
    validate_samples(scores, labels)?;
    check_alpha(alpha)?;
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::BadKernelWidth(sigma));
    }
    let n = scores.len() as f64;
    let (c_score, c_label) = mixture_coefficients(alpha, placement);

    let k = kernel_matrix(scores, scores, sigma);
    let mut h_mat = k.tr_mul(&k) * (c_score / n);

    let (k0, k1) = label_kernel_rows(scores, sigma);
    let n1 = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n0 = n - n1;
    if c_label != 0.0 {
        h_mat += (&k0 * k0.transpose()) * (c_label * n0 / n);
        h_mat += (&k1 * k1.transpose()) * (c_label * n1 / n);
    }
    // keep exact symmetry under floating-point assembly
    h_mat = (&h_mat + h_mat.transpose()) * 0.5;

    let h_vec = k.row_sum().transpose() / n;
    Ok(RatioDesign { h_mat, h_vec })
}

/// Solve `(H + lambda I) theta = h`, the unique minimizer of the ridge
/// quadratic for lambda > 0.
pub fn solve_theta(design: &RatioDesign, lambda_theta: f64) -> Result<DVector<f64>> {
    if lambda_theta < 0.0 || !lambda_theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda_theta must be finite and >= 0, got {lambda_theta}"
        )));
    }
    let n = design.h_mat.nrows();
    let mut a = design.h_mat.clone();
    for i in 0..n {
        a[(i, i)] += lambda_theta;
    }
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(&design.h_vec));
    }
    a.lu()
        .solve(&design.h_vec)
        .ok_or(Error::SingularSystem(lambda_theta))
}

/// Ratio-model evaluation at new points, with negative outputs clipped to 0.
#[derive(Debug, Clone)]
pub struct EvaluatedWeights {
    pub weights: SampleWeights,
    /// Fraction of evaluation points whose raw value was negative.
    pub clip_rate: f64,
}

/// Evaluate `w(p) = sum_l theta_l K(p, center_l)` at each score, clipping
/// negatives to zero.
pub fn evaluate_weights(model: &RatioModel, scores: &[f64]) -> Result<EvaluatedWeights> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = kernel_matrix(scores, &model.centers, model.sigma);
    let raw = k * &model.theta;
    let clipped = raw.iter().filter(|&&v| v < 0.0).count();
    let clip_rate = clipped as f64 / scores.len() as f64;
    if clipped > 0 {
        log::debug!(
            "ratio weights: clipped {clipped}/{} negative values",
            scores.len()
        );
    }
    let weights = SampleWeights::new(raw.iter().map(|&v| v.max(0.0)).collect())?;
    Ok(EvaluatedWeights { weights, clip_rate })
}

/// Hyperparameter search space and fold layout for [`fit_ratio`].
#[derive(Debug, Clone, PartialEq)]
pub struct RatioFitConfig {
    pub alpha: f64,
    pub sigma_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub placement: AlphaPlacement,
}

impl Default for RatioFitConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sigma_grid: vec![0.01, 0.1, 1.0, 10.0],
            lambda_grid: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
            seed: 0,
            placement: AlphaPlacement::Printed,
        }
    }
}

/// Held-out value of the ridge quadratic `theta' H theta / 2 - h' theta`,
/// computed from validation samples against training centers without forming
/// the validation-side matrix.
fn holdout_objective(
    theta: &DVector<f64>,
    train_scores: &[f64],
    val_scores: &[f64],
    val_labels: &[u8],
    sigma: f64,
    alpha: f64,
    placement: AlphaPlacement,
) -> f64 {
    let (c_score, c_label) = mixture_coefficients(alpha, placement);
    let k_val = kernel_matrix(val_scores, train_scores, sigma);
    let w_val = k_val * theta;
    let (k0, k1) = label_kernel_rows(train_scores, sigma);
    let w0 = k0.dot(theta);
    let w1 = k1.dot(theta);
    let m = val_scores.len() as f64;
    let m1 = val_labels.iter().filter(|&&y| y == 1).count() as f64;
    let m0 = m - m1;

    let quad_scores: f64 = w_val.iter().map(|&w| w * w).sum();
    let quad_labels = m0 * w0 * w0 + m1 * w1 * w1;
    let linear: f64 = w_val.iter().sum();
    (c_score * quad_scores + c_label * quad_labels) / (2.0 * m) - linear / m
}

/// Select (sigma, lambda_theta) by k-fold cross-validation on the held-out
/// quadratic, then refit on all samples with the winner.
pub fn fit_ratio(scores: &[f64], labels: &[u8], config: &RatioFitConfig) -> Result<RatioModel> {
    validate_samples(scores, labels)?;
    check_alpha(config.alpha)?;
    if config.sigma_grid.is_empty() || config.lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("hyperparameter grid is empty".into()));
    }
    let n = scores.len();

    let (best_sigma, best_lambda) = if config.sigma_grid.len() == 1 && config.lambda_grid.len() == 1
    {
        (config.sigma_grid[0], config.lambda_grid[0])
    } else {
        let folds = kfold_indices(n, config.folds, config.seed)?;
        let mut cell_scores: Vec<(f64, f64, f64)> = Vec::new();
        for &sigma in &config.sigma_grid {
            let mut fold_objectives = vec![Vec::new(); config.lambda_grid.len()];
            for fold in &folds {
                let in_fold = {
                    let mut mask = vec![false; n];
                    for &i in fold {
                        mask[i] = true;
                    }
                    mask
                };
                let train_idx: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
                let tr_scores: Vec<f64> = train_idx.iter().map(|&i| scores[i]).collect();
                let tr_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
                let va_scores: Vec<f64> = fold.iter().map(|&i| scores[i]).collect();
                let va_labels: Vec<u8> = fold.iter().map(|&i| labels[i]).collect();
                let design =
                    build_design(&tr_scores, &tr_labels, sigma, config.alpha, config.placement)?;
                for (li, &lambda) in config.lambda_grid.iter().enumerate() {
                    let theta = solve_theta(&design, lambda)?;
                    fold_objectives[li].push(holdout_objective(
                        &theta,
                        &tr_scores,
                        &va_scores,
                        &va_labels,
                        sigma,
                        config.alpha,
                        config.placement,
                    ));
                }
            }
            for (li, &lambda) in config.lambda_grid.iter().enumerate() {
                let mean =
                    fold_objectives[li].iter().sum::<f64>() / fold_objectives[li].len() as f64;
                cell_scores.push((sigma, lambda, mean));
            }
        }
        // minimize J; break ties toward larger lambda, then smaller sigma
        let mut best = cell_scores[0];
        for &(sigma, lambda, j) in &cell_scores[1..] {
            let better = j < best.2
                || (j == best.2 && (lambda > best.1 || (lambda == best.1 && sigma < best.0)));
            if better {
                best = (sigma, lambda, j);
            }
        }
        (best.0, best.1)
    };

    let design = build_design(scores, labels, best_sigma, config.alpha, config.placement)?;
    let theta = solve_theta(&design, best_lambda)?;
    Ok(RatioModel {
        centers: scores.to_vec(),
        theta,
        sigma: best_sigma,
        alpha: config.alpha,
        lambda_theta: best_lambda,
    })
}

/// JSON envelope for ratio-model interchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioExport {
    pub centers: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda_theta: f64,
}

impl RatioExport {
    pub fn from_model(model: &RatioModel) -> Self {
        Self {
            centers: model.centers.clone(),
            theta: model.theta.iter().copied().collect(),
            sigma: model.sigma,
            alpha: model.alpha,
            lambda_theta: model.lambda_theta,
        }
    }

    pub fn into_model(self) -> RatioModel {
        RatioModel {
            centers: self.centers,
            theta: DVector::from_vec(self.theta),
            sigma: self.sigma,
            alpha: self.alpha,
            lambda_theta: self.lambda_theta,
        }
    }
}
