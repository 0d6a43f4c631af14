//! The alternating estimator: weighted logistic fitting interleaved with
//! ratio-weight re-estimation over the model's own predicted scores.
//!
//! Step one fits a plain L2 logistic regression. Each subsequent pass scores
//! the training data, fits a relative density-ratio model on (score, label)
//! samples, turns the fitted ratio into per-sample weights, and refits the
//! logistic model under those weights, until the squared coefficient change
//! falls below epsilon or the iteration cap is reached.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{self, ModelParams, OptimizerSettings, SampleWeights};
use crate::metrics::ScoredLabels;
use crate::rulsif::{self, AlphaPlacement, RatioFitConfig, RatioModel};
use crate::seeding;

/// Floor applied to training weights so the weighted loss stays well-defined.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Knobs for [`fit_fwlr`].
#[derive(Debug, Clone, PartialEq)]
pub struct FwlrConfig {
    /// Mixture parameter of the relative ratio (1 reduces to plain logistic).
    pub alpha: f64,
    /// Convergence threshold on the squared coefficient change.
    pub epsilon: f64,
    pub max_outer_iterations: usize,
    pub lambda_beta: f64,
    pub lambda_theta_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// Folds for the ratio model's internal hyperparameter selection.
    pub ratio_folds: usize,
    /// Re-run the (sigma, lambda_theta) selection at every outer iteration.
    /// When false, the first iteration's winners are frozen and only theta is
    /// refitted; cheaper, and usually indistinguishable.
    pub reselect_ratio_each_iteration: bool,
    /// Rescale each iteration's weights to mean one before the refit. Off by
    /// default: the fitted relative ratio hovers near 1/alpha, and rescaling
    /// it away changes how the data term balances the L2 penalty.
    pub renormalize_weights: bool,
    pub alpha_placement: AlphaPlacement,
    pub optimizer: OptimizerSettings,
    pub include_intercept: bool,
    pub seed: u64,
}

impl Default for FwlrConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 1e-6,
            max_outer_iterations: 100,
            lambda_beta: 0.1,
            lambda_theta_grid: vec![0.01, 0.1, 1.0, 10.0],
            sigma_grid: vec![0.01, 0.1, 1.0, 10.0],
            ratio_folds: 5,
            reselect_ratio_each_iteration: true,
            renormalize_weights: false,
            alpha_placement: AlphaPlacement::default(),
            optimizer: OptimizerSettings::default(),
            include_intercept: true,
            seed: 0,
        }
    }
}

impl FwlrConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_outer_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One outer iteration of the alternating loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwlrIteration {
    pub iteration: usize,
    /// Squared Euclidean change of the coefficient vector in this pass.
    pub beta_delta_sq: f64,
    pub weighted_loss: f64,
    pub weight_mean: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Fraction of raw ratio evaluations that were negative and got clipped.
    pub clip_rate: f64,
    pub sigma: f64,
    pub lambda_theta: f64,
}

/// Full iteration history of one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwlrTrace {
    pub iterations: Vec<FwlrIteration>,
    pub converged: bool,
}

impl FwlrTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Serialize as JSON lines, one record per outer iteration.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for record in &self.iterations {
            serde_json::to_writer(&mut out, record)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Result of [`fit_fwlr`]: the final coefficients, the last ratio model, and
/// the per-iteration trace.
#[derive(Debug, Clone)]
pub struct FwlrFit {
    pub params: ModelParams,
    pub ratio: RatioModel,
    pub trace: FwlrTrace,
}

/// Run the alternating estimation until the coefficient change drops below
/// `config.epsilon` or the iteration cap is hit. Non-convergence is recorded
/// in the trace, not raised; the final iterate is always returned.
pub fn fit_fwlr(data: &Dataset, config: &FwlrConfig) -> Result<FwlrFit> {
    config.validate()?;
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let n = data.n();

    let init = glm::fit(
        data,
        config.lambda_beta,
        None,
        &config.optimizer,
        config.include_intercept,
    )?;
    let mut params = init.params;

    let mut iterations = Vec::new();
    let mut converged = false;
    let mut ratio: Option<RatioModel> = None;

    for iter in 0..config.max_outer_iterations {
        let beta_prev = params.beta.clone();
        let scores = glm::predict_scores(&params, data)?;

        let model = match (&ratio, config.reselect_ratio_each_iteration) {
            (Some(prev), false) => {
                // frozen hyperparameters: refit theta on the new scores only
                let design = rulsif::build_design(
                    &scores,
                    data.labels(),
                    prev.sigma,
                    config.alpha,
                    config.alpha_placement,
                )?;
                let theta = rulsif::solve_theta(&design, prev.lambda_theta)?;
                RatioModel {
                    centers: scores.clone(),
                    theta,
                    sigma: prev.sigma,
                    alpha: config.alpha,
                    lambda_theta: prev.lambda_theta,
                }
            }
            _ => rulsif::fit_ratio(
                &scores,
                data.labels(),
                &RatioFitConfig {
                    alpha: config.alpha,
                    sigma_grid: config.sigma_grid.clone(),
                    lambda_grid: config.lambda_theta_grid.clone(),
                    folds: config.ratio_folds,
                    seed: seeding::derive(config.seed, iter as u64),
                    placement: config.alpha_placement,
                },
            )?,
        };

        let evaluated = rulsif::evaluate_weights(&model, &scores)?;
        let weights = condition_weights(evaluated.weights.as_slice(), config.renormalize_weights);
        let refit = glm::fit(
            data,
            config.lambda_beta,
            Some(&weights),
            &config.optimizer,
            config.include_intercept,
        )?;

        let delta = (&refit.params.beta - &beta_prev).norm_squared();
        let w = weights.as_slice();
        iterations.push(FwlrIteration {
            iteration: iter,
            beta_delta_sq: delta,
            weighted_loss: glm::weighted_cross_entropy(&refit.params, data, &weights)?,
            weight_mean: w.iter().sum::<f64>() / n as f64,
            weight_min: w.iter().copied().fold(f64::INFINITY, f64::min),
            weight_max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            clip_rate: evaluated.clip_rate,
            sigma: model.sigma,
            lambda_theta: model.lambda_theta,
        });

        params = refit.params;
        ratio = Some(model);

        if delta < config.epsilon {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!(
            "alternating fit on {:?} did not converge within {} iterations (last delta {:.3e})",
            data.name(),
            config.max_outer_iterations,
            iterations.last().map_or(f64::NAN, |r| r.beta_delta_sq)
        );
    }

    Ok(FwlrFit {
        params,
        ratio: ratio.expect("loop body runs at least once"),
        trace: FwlrTrace {
            iterations,
            converged,
        },
    })
}

/// Floor raw ratio weights at `WEIGHT_FLOOR`; optionally rescale to mean one
/// (flooring again afterwards, so the floor survives the rescale).
fn condition_weights(raw: &[f64], renormalize: bool) -> SampleWeights {
    let n = raw.len() as f64;
    let floored: Vec<f64> = raw.iter().map(|&v| v.max(WEIGHT_FLOOR)).collect();
    let conditioned = if renormalize {
        let mean = floored.iter().sum::<f64>() / n;
        floored
            .iter()
            .map(|&v| (v / mean).max(WEIGHT_FLOOR))
            .collect()
    } else {
        floored
    };
    SampleWeights::new(conditioned).expect("conditioned weights are finite and positive")
}

/// Score a dataset with a fitted model, pairing predictions with the true
/// labels for downstream metrics.
pub fn predict(params: &ModelParams, data: &Dataset) -> Result<ScoredLabels> {
    let scores = glm::predict_scores(params, data)?;
    ScoredLabels::new(scores, data.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSetting};
    use rand::Rng;

    fn quick_config() -> FwlrConfig {
        FwlrConfig {
            sigma_grid: vec![0.01, 0.1],
            lambda_theta_grid: vec![0.01, 0.1],
            ..Default::default()
        }
    }

    fn random_setting(seed: u64) -> SyntheticSetting {
        let mut rng = crate::seeding::rng(seed);
        let mut beta = [0.0; 10];
        for b in beta.iter_mut() {
            *b = rng.random_range(-1.5..1.5);
        }
        SyntheticSetting::custom(beta, 0.5)
    }

    #[test]
    fn infinite_epsilon_runs_loop_body_exactly_once() {
        let data = generate_synthetic(&random_setting(1), 120, 7).unwrap();
        let config = FwlrConfig {
            epsilon: f64::INFINITY,
            ..quick_config()
        };
        let fit = fit_fwlr(&data, &config).unwrap();
        assert_eq!(fit.trace.len(), 1);
        assert!(fit.trace.converged);
    }

    #[test]
    fn iteration_cap_bounds_trace_length() {
        let data = generate_synthetic(&random_setting(2), 120, 8).unwrap();
        // epsilon so small the squared delta can never beat it
        let config = FwlrConfig {
            epsilon: f64::MIN_POSITIVE,
            max_outer_iterations: 3,
            ..quick_config()
        };
        let fit = fit_fwlr(&data, &config).unwrap();
        assert!(fit.trace.len() <= 3);
        if !fit.trace.converged {
            assert_eq!(fit.trace.len(), 3);
        }
    }

    #[test]
    fn converged_flag_matches_last_delta() {
        let data = generate_synthetic(&random_setting(3), 150, 9).unwrap();
        let config = quick_config();
        let fit = fit_fwlr(&data, &config).unwrap();
        let last = fit.trace.iterations.last().unwrap();
        if fit.trace.converged {
            assert!(last.beta_delta_sq < config.epsilon);
        }
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let data = generate_synthetic(&random_setting(4), 150, 10).unwrap();
        let config = quick_config();
        let a = fit_fwlr(&data, &config).unwrap();
        let b = fit_fwlr(&data, &config).unwrap();
        assert_eq!(a.params.beta, b.params.beta);
        assert_eq!(a.ratio.theta, b.ratio.theta);
        assert_eq!(a.trace.len(), b.trace.len());
    }

    #[test]
    fn alpha_one_recovers_plain_logistic() {
        for seed in 0..3 {
            let data = generate_synthetic(&random_setting(20 + seed), 300, 30 + seed).unwrap();
            let config = FwlrConfig {
                alpha: 1.0,
                lambda_theta_grid: vec![1e-4],
                ..Default::default()
            };
            let fwlr = fit_fwlr(&data, &config).unwrap();
            let plain = glm::fit(
                &data,
                config.lambda_beta,
                None,
                &config.optimizer,
                config.include_intercept,
            )
            .unwrap();
            let gap = (&fwlr.params.beta - &plain.params.beta).norm();
            assert!(gap < 1e-3, "seed {seed}: gap {gap}");
        }
    }

    #[test]
    fn training_weights_respect_floor() {
        let data = generate_synthetic(&SyntheticSetting::by_id(5).unwrap(), 200, 11).unwrap();
        let fit = fit_fwlr(&data, &quick_config()).unwrap();
        for record in &fit.trace.iterations {
            assert!(record.weight_min >= WEIGHT_FLOOR);
            assert!(record.weight_max.is_finite());
        }
    }

    #[test]
    fn frozen_selection_reuses_first_iteration_hyperparameters() {
        let data = generate_synthetic(&random_setting(5), 150, 12).unwrap();
        let config = FwlrConfig {
            reselect_ratio_each_iteration: false,
            epsilon: f64::MIN_POSITIVE,
            max_outer_iterations: 3,
            ..quick_config()
        };
        let fit = fit_fwlr(&data, &config).unwrap();
        let first = &fit.trace.iterations[0];
        for record in &fit.trace.iterations {
            assert_eq!(record.sigma, first.sigma);
            assert_eq!(record.lambda_theta, first.lambda_theta);
        }
    }

    #[test]
    fn rejects_single_class_data() {
        let setting = SyntheticSetting::custom([50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let data = generate_synthetic(&setting, 50, 13).unwrap();
        assert!(matches!(
            fit_fwlr(&data, &quick_config()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn predict_pairs_scores_with_labels() {
        let data = generate_synthetic(&random_setting(6), 100, 14).unwrap();
        let fit = fit_fwlr(&data, &quick_config()).unwrap();
        let scored = predict(&fit.params, &data).unwrap();
        assert_eq!(scored.len(), 100);
        assert_eq!(scored.labels(), data.labels());
    }

    #[test]
    fn trace_serializes_as_json_lines() {
        let data = generate_synthetic(&random_setting(7), 100, 15).unwrap();
        let fit = fit_fwlr(&data, &quick_config()).unwrap();
        let mut buf = Vec::new();
        fit.trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), fit.trace.len());
        let parsed: FwlrIteration = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(parsed.iteration, 0);
    }
}
