//! SMOTE synthetic minority oversampling.

use nalgebra::DMatrix;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seeding;

/// Oversampling controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority count ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Append interpolated minority rows until the class ratio reaches the
/// target. Each synthetic row is `x + u * (x_nn - x)` for a uniformly chosen
/// member `x_nn` of x's k nearest minority neighbours and `u ~ U(0, 1)`.
/// Original rows are kept unmodified as a prefix of the output.
pub fn smote(data: &Dataset, config: &SmoteConfig) -> Result<Dataset> {
    if config.k_neighbors == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be >= 1".into()));
    }
    if !(config.target_ratio > 0.0 && config.target_ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target_ratio must be in (0, 1], got {}",
            config.target_ratio
        )));
    }
    let (neg, pos) = data.class_counts();
    let minority_label: u8 = u8::from(pos <= neg);
    let (minority_count, majority_count) = if minority_label == 1 {
        (pos, neg)
    } else {
        (neg, pos)
    };
    if minority_count < 2 {
        return Err(Error::TooFewMinority(minority_count));
    }

    let target = (config.target_ratio * majority_count as f64).round() as usize;
    if target <= minority_count {
        return Ok(data.clone());
    }
    let needed = target - minority_count;

    let minority_rows: Vec<usize> = data
        .labels()
        .iter()
        .enumerate()
        .filter(|&(_, &y)| y == minority_label)
        .map(|(i, _)| i)
        .collect();

    let mut k = config.k_neighbors;
    if k > minority_count - 1 {
        k = minority_count - 1;
        log::warn!(
            "SMOTE: k_neighbors reduced to {k} ({minority_count} minority samples)"
        );
    }

    let d = data.dim();
    let features = data.features();
    // k nearest minority neighbours per minority row; ties resolved by index
    let neighbors: Vec<Vec<usize>> = minority_rows
        .iter()
        .map(|&a| {
            let mut dist: Vec<(f64, usize)> = minority_rows
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| {
                    let d2: f64 = (0..d)
                        .map(|c| {
                            let diff = features[(a, c)] - features[(b, c)];
                            diff * diff
                        })
                        .sum();
                    (d2, b)
                })
                .collect();
            dist.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            dist.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = seeding::rng(config.seed);
    let n_out = data.n() + needed;
    let mut out = DMatrix::zeros(n_out, d);
    out.view_mut((0, 0), (data.n(), d)).copy_from(features);
    let mut labels = data.labels().to_vec();
    for s in 0..needed {
        let base = minority_rows[s % minority_rows.len()];
        let nn = neighbors[s % minority_rows.len()][rng.random_range(0..k)];
        let u: f64 = rng.random_range(0.0..1.0);
        let r = data.n() + s;
        for c in 0..d {
            out[(r, c)] = features[(base, c)] + u * (features[(nn, c)] - features[(base, c)]);
        }
        labels.push(minority_label);
    }

    Dataset::new(out, labels, data.feature_names().to_vec(), data.name())
}
