//! Neural surrogate of the building's AIT response, one model per direction.
//!
//! A model maps the eight sample features (see
//! [`crate::dataset::FEATURE_NAMES`]) to the AIT change over `delta_t`.
//! Features and target are standardised with training-split statistics
//! stored alongside the weights.

pub mod edf;
pub mod metrics;
pub mod mlp;
pub mod train;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::Direction;

pub use edf::{edf_to_fos, generate_edf, EdfCurve};
pub use metrics::{metrics, MetricsReport, Scores};
pub use mlp::Mlp;
pub use train::{train, TrainConfig};

pub const N_FEATURES: usize = 8;

const CHECKPOINT_FORMAT: &str = "ahumpc-mlp";
const CHECKPOINT_VERSION: u32 = 1;

/// Anything that predicts an AIT change from one feature vector.
pub trait Predictor {
    fn direction(&self) -> Direction;
    fn predict(&self, inputs: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    /// Statistics of a sample set. Constant features get unit scale.
    pub fn fit(inputs: &[[f64; N_FEATURES]], targets: &[f64]) -> Self {
        let n = inputs.len().max(1) as f64;
        let mut mean = vec![0.0; N_FEATURES];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; N_FEATURES];
        for x in inputs {
            for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let t_mean = targets.iter().sum::<f64>() / n;
        let t_var = targets.iter().map(|t| (t - t_mean).powi(2)).sum::<f64>() / n;
        Normalization {
            input_mean: mean,
            input_std: std,
            target_mean: t_mean,
            target_std: if t_var > 1e-24 { t_var.sqrt() } else { 1.0 },
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub direction: Direction,
    pub network: Mlp,
    pub normalization: Normalization,
    pub seed: u64,
    /// Training window, inclusive, when trained from logs.
    pub window: Option<(NaiveDate, NaiveDate)>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: MlpModel,
}

impl MlpModel {
    pub fn hidden_widths(&self) -> &[usize] {
        let w = self.network.widths();
        &w[1..w.len() - 1]
    }

    pub fn predict_batch(&self, inputs: &[[f64; N_FEATURES]]) -> Result<Vec<f64>> {
        inputs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&ckpt)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        let m = ckpt.model;
        if m.network.inputs() != N_FEATURES || !m.network.is_finite() {
            return Err(Error::Parse(format!("{}: malformed network", path.display())));
        }
        Ok(m)
    }
}

impl Predictor for MlpModel {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn predict(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != N_FEATURES {
            return Err(Error::ShapeMismatch {
                expected: N_FEATURES,
                got: inputs.len(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model input".into()));
        }
        let z = self
            .network
            .forward(&self.normalization.apply(inputs), &mut mlp::Scratch::default());
        Ok(self.normalization.target_mean + self.normalization.target_std * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> MlpModel {
        MlpModel {
            direction: Direction::Increasing,
            network: Mlp::new(N_FEATURES, &[6, 5, 4, 4, 3], 3),
            normalization: Normalization {
                input_mean: vec![1.0; 8],
                input_std: vec![2.0; 8],
                target_mean: 0.5,
                target_std: 3.0,
            },
            seed: 3,
            window: None,
        }
    }

    #[test]
    fn zero_weights_predict_the_target_mean() {
        let mut m = model();
        m.network.params_mut().iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(m.predict(&[4.0; 8]).unwrap(), 0.5);
    }

    #[test]
    fn batch_matches_single() {
        let m = model();
        let xs: Vec<[f64; 8]> = (0..5).map(|k| [k as f64 * 0.3; 8]).collect();
        let batch = m.predict_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(batch) {
            assert_eq!(m.predict(x).unwrap(), b);
        }
    }

    #[test]
    fn shape_and_finiteness_checks() {
        let m = model();
        assert!(matches!(
            m.predict(&[0.0; 7]),
            Err(Error::ShapeMismatch { expected: 8, got: 7 })
        ));
        assert!(m.predict(&[f64::NAN; 8]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inc.json");
        let m = model();
        m.save(&path).unwrap();
        let back = MlpModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hidden_widths(), &[6, 5, 4, 4, 3]);
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"model\":null}").unwrap();
        assert!(MlpModel::load(&path).is_err());
    }
}
