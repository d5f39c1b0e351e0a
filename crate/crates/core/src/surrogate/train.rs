//! k-fold training with early stopping.
//!
//! Each fold trains on the other k-1 folds of the training split and stops
//! on its own held-out fold. The fold model with the lowest error on the
//! validation split is kept, and the test split is scored once at the end.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, MetricsReport};
use super::mlp::{Adam, Mlp, Scratch};
use super::{MlpModel, Normalization, N_FEATURES};
use crate::dataset::{SplitDataset, TrainingSample};
use crate::error::{Error, Result};
use crate::fos::Direction;
use crate::plant::weather::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Exactly five hidden layer widths.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without improvement before a fold stops.
    pub patience: usize,
    pub folds: usize,
    /// Seeded subsample of the training split, when set.
    pub max_train_samples: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 32, 32, 16],
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            folds: 5,
            max_train_samples: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.len() != 5 || self.hidden.contains(&0) {
            return Err(Error::Config("surrogate.hidden must list five non-zero widths".into()));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "surrogate learning_rate, batch_size and max_epochs must be positive".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::Config("surrogate.folds must be >= 2".into()));
        }
        Ok(())
    }
}

struct Prepared {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

fn prepare(samples: &[TrainingSample], norm: &Normalization) -> Prepared {
    Prepared {
        xs: samples.iter().map(|s| norm.apply(&s.inputs())).collect(),
        ys: samples
            .iter()
            .map(|s| (s.target - norm.target_mean) / norm.target_std)
            .collect(),
    }
}

fn mse(net: &Mlp, data: &Prepared, idx: &[usize], scratch: &mut Scratch) -> f64 {
    idx.iter()
        .map(|&i| (net.forward(&data.xs[i], scratch) - data.ys[i]).powi(2))
        .sum::<f64>()
        / idx.len().max(1) as f64
}

/// Mini-batch Adam with early stopping; returns the best network seen on
/// `holdout` and its MSE.
fn fit(
    mut net: Mlp,
    data: &Prepared,
    train_idx: &[usize],
    holdout: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Mlp, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(net.params().len(), cfg.learning_rate);
    let mut scratch = Scratch::default();
    let mut grad = vec![0.0; net.params().len()];
    let mut order = train_idx.to_vec();
    let mut best = (mse(&net, data, holdout, &mut scratch), net.clone());
    let mut stale = 0;
    let mut batch_y = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            batch_y.clear();
            batch_y.extend(batch.iter().map(|&i| data.ys[i]));
            net.accumulate(
                batch.iter().map(|&i| data.xs[i].as_slice()),
                &batch_y,
                &mut scratch,
                &mut grad,
            );
            opt.step(net.params_mut(), &grad);
        }
        if !net.is_finite() {
            return Err(Error::NonFiniteState);
        }
        let loss = mse(&net, data, holdout, &mut scratch);
        if loss < best.0 {
            best = (loss, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                debug!("early stop at epoch {epoch}, holdout mse {:.5}", best.0);
                break;
            }
        }
    }
    Ok((best.1, best.0))
}

/// Trains one direction model. `warm_start` seeds every fold's weights when
/// its architecture matches.
pub fn train(
    data: &SplitDataset,
    direction: Direction,
    config: &TrainConfig,
    seed: u64,
    warm_start: Option<&MlpModel>,
) -> Result<(MlpModel, MetricsReport)> {
    config.validate()?;
    let mut train_set = data.train.clone();
    if let Some(cap) = config.max_train_samples {
        if train_set.len() > cap {
            train_set.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 0x5eed)));
            train_set.truncate(cap);
        }
    }
    if train_set.len() < config.folds {
        return Err(Error::InvalidArgument(format!(
            "{} training samples cannot fill {} folds",
            train_set.len(),
            config.folds
        )));
    }
    let targets: Vec<f64> = train_set.iter().map(|s| s.target).collect();
    let first = targets[0];
    if targets.iter().all(|&t| t == first) {
        return Err(Error::DegenerateDataset("constant training target".into()));
    }
    if data.test.len() < 2 {
        return Err(Error::InvalidArgument("test split needs at least two samples".into()));
    }

    let inputs: Vec<[f64; N_FEATURES]> = train_set.iter().map(|s| s.inputs()).collect();
    let norm = Normalization::fit(&inputs, &targets);
    let prepared = prepare(&train_set, &norm);
    let val = prepare(&data.val, &norm);
    let val_idx: Vec<usize> = (0..val.ys.len()).collect();

    let init = |fold: usize| -> Mlp {
        match warm_start {
            Some(m) if m.hidden_widths() == config.hidden.as_slice() => m.network.clone(),
            _ => Mlp::new(N_FEATURES, &config.hidden, mix(seed, fold as u64)),
        }
    };

    let n = train_set.len();
    let mut scratch = Scratch::default();
    let mut cv_total = 0.0;
    let mut selected: Option<(f64, Mlp)> = None;
    for fold in 0..config.folds {
        let (lo, hi) = (fold * n / config.folds, (fold + 1) * n / config.folds);
        let holdout: Vec<usize> = (lo..hi).collect();
        let rest: Vec<usize> = (0..lo).chain(hi..n).collect();
        let (net, fold_mse) = fit(
            init(fold),
            &prepared,
            &rest,
            &holdout,
            config,
            mix(seed, 100 + fold as u64),
        )?;
        cv_total += fold_mse;
        let score = if val_idx.is_empty() {
            fold_mse
        } else {
            mse(&net, &val, &val_idx, &mut scratch)
        };
        debug!(
            "{} fold {fold}: holdout {fold_mse:.5}, validation {score:.5}",
            direction.as_str()
        );
        if selected.as_ref().is_none_or(|(best, _)| score < *best) {
            selected = Some((score, net));
        }
    }
    let (_, network) = selected.expect("at least two folds");
    let model = MlpModel {
        direction,
        network,
        normalization: norm,
        seed,
        window: None,
    };

    let test_inputs: Vec<[f64; N_FEATURES]> = data.test.iter().map(|s| s.inputs()).collect();
    let preds = model.predict_batch(&test_inputs)?;
    let test_targets: Vec<f64> = data.test.iter().map(|s| s.target).collect();
    let scores = metrics(&preds, &test_targets)?;
    let report = MetricsReport {
        direction,
        scores,
        cv_mse: cv_total / config.folds as f64,
        n_train: data.train.len(),
        n_val: data.val.len(),
        n_test: data.test.len(),
        n_fitted: train_set.len(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, DatasetConfig};

    fn linear_data(n: usize) -> SplitDataset {
        let samples: Vec<TrainingSample> = (0..n)
            .map(|k| {
                let dt = 5.0 * (1 + k % 60) as f64;
                let gain = (k % 7) as f64 / 6.0;
                let x = [18.0 + (k % 5) as f64, dt, gain, 5.0, 60.0, 3.0, 100.0, 500.0];
                TrainingSample::from_inputs(x, 0.01 * dt * gain)
            })
            .collect();
        split(samples, &DatasetConfig::default(), 4)
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            hidden: vec![16, 16, 8, 8, 4],
            max_epochs: 60,
            folds: 2,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fits_a_representable_target() {
        let (_, report) = train(&linear_data(1500), Direction::Increasing, &quick(), 1, None).unwrap();
        assert!(report.scores.scaled_mae < 0.02, "{report:?}");
        assert!(report.scores.r_squared <= report.scores.explained_variance + 1e-9);
        assert_eq!((report.n_train, report.n_val, report.n_test), (1050, 225, 225));
    }

    #[test]
    fn deterministic_under_seed() {
        let d = linear_data(300);
        let cfg = TrainConfig {
            max_epochs: 5,
            ..quick()
        };
        let a = train(&d, Direction::Increasing, &cfg, 7, None).unwrap();
        let b = train(&d, Direction::Increasing, &cfg, 7, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_constant_target_and_single_fold() {
        let mut d = linear_data(100);
        assert!(train(&d, Direction::Increasing, &TrainConfig { folds: 1, ..quick() }, 1, None).is_err());
        d.train.iter_mut().for_each(|s| s.target = 0.3);
        assert!(matches!(
            train(&d, Direction::Increasing, &quick(), 1, None),
            Err(Error::DegenerateDataset(_))
        ));
    }

    #[test]
    fn sample_cap_limits_training_split() {
        let cfg = TrainConfig {
            max_epochs: 2,
            max_train_samples: Some(100),
            ..quick()
        };
        let (_, report) = train(&linear_data(400), Direction::Increasing, &cfg, 1, None).unwrap();
        assert_eq!((report.n_train, report.n_fitted), (280, 100));
    }
}
