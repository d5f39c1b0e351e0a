use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::Direction;

/// Regression scores of one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mse: f64,
    /// Mean absolute error divided by the target range.
    pub scaled_mae: f64,
    pub explained_variance: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub direction: Direction,
    #[serde(flatten)]
    pub scores: Scores,
    /// Mean held-out MSE across cross-validation folds (standardised units).
    pub cv_mse: f64,
    /// Split sizes before any training-sample cap.
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Training samples actually fitted.
    pub n_fitted: usize,
}

pub fn metrics(predictions: &[f64], targets: &[f64]) -> Result<Scores> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.len() < 2 {
        return Err(Error::InvalidArgument("metrics need at least two samples".into()));
    }
    let n = targets.len() as f64;
    let mean_t = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|t| (t - mean_t).powi(2)).sum();
    let (lo, hi) = targets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    if sst == 0.0 || hi == lo {
        return Err(Error::DegenerateDataset("targets have zero variance".into()));
    }
    let errors: Vec<f64> = predictions.iter().zip(targets).map(|(p, t)| p - t).collect();
    let sse: f64 = errors.iter().map(|e| e * e).sum();
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let mean_e = errors.iter().sum::<f64>() / n;
    let var_e = errors.iter().map(|e| (e - mean_e).powi(2)).sum::<f64>() / n;
    Ok(Scores {
        mse: sse / n,
        scaled_mae: mae / (hi - lo),
        explained_variance: 1.0 - var_e / (sst / n),
        r_squared: 1.0 - sse / sst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_fit() {
        let t = [1.0, 2.0, 4.0];
        let s = metrics(&t, &t).unwrap();
        assert_eq!(
            (s.mse, s.scaled_mae, s.explained_variance, s.r_squared),
            (0.0, 0.0, 1.0, 1.0)
        );
    }

    #[test]
    fn constant_bias_separates_the_scores() {
        let t = [1.0, 2.0, 4.0, -1.0];
        let p: Vec<f64> = t.iter().map(|v| v + 0.1).collect();
        let s = metrics(&p, &t).unwrap();
        assert_abs_diff_eq!(s.explained_variance, 1.0, epsilon = 1e-12);
        assert!(s.r_squared < 1.0);
    }

    #[test]
    fn five_point_hand_computation() {
        // errors: 0.5, -0.5, 1, 0, -1; targets mean 3, SST 10, range 4.
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = [1.5, 1.5, 4.0, 4.0, 4.0];
        let s = metrics(&p, &t).unwrap();
        assert_abs_diff_eq!(s.mse, 2.5 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.scaled_mae, 3.0 / 5.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.r_squared, 1.0 - 2.5 / 10.0, epsilon = 1e-12);
        // mean error 0, so var(err) = 0.5 and var(t) = 2.
        assert_abs_diff_eq!(s.explained_variance, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            metrics(&[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::DegenerateDataset(_))
        ));
        assert!(metrics(&[1.0], &[2.0]).is_err());
        assert!(metrics(&[1.0, 2.0], &[2.0, 3.0, 4.0]).is_err());
    }
}
