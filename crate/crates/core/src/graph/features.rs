use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureGenParams {
    pub mu: f64,
    pub sigma: f64,
    /// Feature width in binary mode. Multiclass mode uses one column per class.
    pub dim: usize,
}

impl Default for FeatureGenParams {
    fn default() -> Self {
        FeatureGenParams {
            mu: 1.0,
            sigma: 8.0,
            dim: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum FeatureMode {
    /// `dim` iid coordinates with mean `y·mu`; labels must be 0 or 1.
    Binary,
    /// One coordinate per class with mean `mu·one_hot(y)`.
    Multiclass { classes: usize },
}

/// Gaussian node features conditioned on labels.
pub fn gen_features(
    labels: &[usize],
    params: &FeatureGenParams,
    mode: FeatureMode,
    seed: u64,
) -> Result<Array2<f64>> {
    if !(params.sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma = {} must be positive", params.sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = labels.len();
    let mut x = match mode {
        FeatureMode::Binary => {
            if let Some(&y) = labels.iter().find(|&&y| y > 1) {
                return Err(Error::Parameter(format!("binary features need labels in {{0, 1}}, got {y}")));
            }
            Array2::from_shape_fn((n, params.dim), |(i, _)| labels[i] as f64 * params.mu)
        }
        FeatureMode::Multiclass { classes } => {
            if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
                return Err(Error::Parameter(format!("label {y} outside {classes} classes")));
            }
            Array2::from_shape_fn((n, classes), |(i, c)| if labels[i] == c { params.mu } else { 0.0 })
        }
    };
    for v in x.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += params.sigma * z;
    }
    Ok(x)
}
