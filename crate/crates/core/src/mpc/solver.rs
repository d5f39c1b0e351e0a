//! Box-constrained QP solver for the condensed MPC problem.
//!
//! Stacking the predictions gives `x = Φ u + f`, so the cost is a strictly
//! convex quadratic `½ uᵀ H u + cᵀ u + const` over the box `[lo, hi]^p`. It is
//! solved with a primal active-set method: variables in the working set are
//! pinned to a bound, the rest take a Newton step to the minimiser of the
//! current face, truncated at the first bound it would cross. Once a face
//! minimiser is reached, the pinned variable whose gradient most strongly
//! points into the box is released. Every step moves towards a face minimiser
//! of a convex quadratic, so the objective never increases.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{ControlPlan, InternalModel, MpcConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Solver<'a> {
    config: &'a MpcConfig,
    model: &'a InternalModel,
}

/// Convenience wrapper around [`Solver::solve`] with a cold start.
pub fn solve(
    x0: f64,
    u_prev: f64,
    setpoints: &[f64],
    config: &MpcConfig,
    model: &InternalModel,
) -> Result<ControlPlan> {
    Solver::new(config, model).solve(x0, u_prev, setpoints, None)
}

/// Dense condensed problem.
#[derive(Debug, Clone)]
struct Qp {
    p: usize,
    phi: Vec<Vec<f64>>,
    /// Free response minus reference, per step.
    offset: Vec<f64>,
    refs: Vec<f64>,
    u_prev: f64,
    w_track: f64,
    w_move: f64,
    hessian: Vec<Vec<f64>>,
    linear: Vec<f64>,
}

impl Qp {
    fn build(model: &InternalModel, x0: f64, u_prev: f64, refs: &[f64], w_track: f64, w_move: f64) -> Qp {
        let p = refs.len();
        // phi[k][j]: effect of u_j on x_{k+1}.
        let mut phi = vec![vec![0.0; p]; p];
        for (k, row) in phi.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().take(k + 1) {
                *v = model.a.powi((k - j) as i32) * model.b_now;
                if j < k {
                    *v += model.a.powi((k - j - 1) as i32) * model.b_prev;
                }
            }
        }
        let offset: Vec<f64> = (0..p)
            .map(|k| model.a.powi(k as i32 + 1) * x0 + model.a.powi(k as i32) * model.b_prev * u_prev - refs[k])
            .collect();

        let mut hessian = vec![vec![0.0; p]; p];
        let mut linear = vec![0.0; p];
        for i in 0..p {
            for j in i..p {
                let s: f64 = (j..p).map(|k| phi[k][i] * phi[k][j]).sum();
                hessian[i][j] = 2.0 * w_track * s;
            }
            linear[i] = 2.0 * w_track * (i..p).map(|k| phi[k][i] * offset[k]).sum::<f64>();
        }
        // Move penalty: Σ (u_k - u_{k-1})², u_{-1} = u_prev.
        for i in 0..p {
            let diag = if i + 1 < p { 2.0 } else { 1.0 };
            hessian[i][i] += 2.0 * w_move * diag;
            if i + 1 < p {
                hessian[i][i + 1] -= 2.0 * w_move;
            }
        }
        linear[0] -= 2.0 * w_move * u_prev;
        for i in 1..p {
            let (upper, lower) = hessian.split_at_mut(i);
            for (j, row) in upper.iter().enumerate() {
                lower[0][j] = row[i];
            }
        }
        Qp {
            p,
            phi,
            offset,
            refs: refs.to_vec(),
            u_prev,
            w_track,
            w_move,
            hessian,
            linear,
        }
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.hessian
            .iter()
            .zip(&self.linear)
            .map(|(row, c)| dot(row, u) + c)
            .collect()
    }

    /// Tracking errors `x_k - r_k` for inputs `u`, k = 1..p.
    fn predict(&self, u: &[f64]) -> Vec<f64> {
        (0..self.p).map(|k| dot(&self.phi[k], u) + self.offset[k]).collect()
    }

    /// Cost evaluated from residuals rather than the quadratic form.
    fn objective(&self, u: &[f64]) -> f64 {
        let track: f64 = self.predict(u).iter().map(|e| e * e).sum();
        let mut prev = self.u_prev;
        let mut moves = 0.0;
        for &v in u {
            moves += (v - prev).powi(2);
            prev = v;
        }
        self.w_track * track + self.w_move * moves
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> Solver<'a> {
    pub fn new(config: &'a MpcConfig, model: &'a InternalModel) -> Self {
        Solver { config, model }
    }

    /// Optimal plan from deviation state `x0` with `u_prev` applied during the
    /// last interval. `setpoints` holds one absolute target per horizon step
    /// and fixes the horizon length.
    pub fn solve(&self, x0: f64, u_prev: f64, setpoints: &[f64], warm_start: Option<&[f64]>) -> Result<ControlPlan> {
        let cfg = self.config;
        let p = setpoints.len();
        if p == 0 {
            return Err(Error::InvalidArgument("empty setpoint trajectory".into()));
        }
        if !x0.is_finite() || !u_prev.is_finite() || setpoints.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite solver input".into()));
        }
        if !self.model.is_finite() {
            return Err(Error::InvalidParams("non-finite internal model".into()));
        }
        let (lo, hi) = cfg.input_bounds;
        if !(lo <= hi) {
            return Err(Error::InvalidArgument("empty input box".into()));
        }
        let refs: Vec<f64> = setpoints.iter().map(|s| self.model.deviation(*s)).collect();
        let qp = Qp::build(self.model, x0, u_prev, &refs, cfg.tracking_weight, cfg.move_weight);

        let mut u: Vec<f64> = match warm_start {
            Some(w) if w.len() == p => w.iter().map(|v| v.clamp(lo, hi)).collect(),
            Some(w) => {
                return Err(Error::ShapeMismatch {
                    expected: p,
                    got: w.len(),
                })
            }
            None => vec![lo; p],
        };
        let mut history = vec![qp.objective(&u)];
        // Start with every variable free; blocking bounds are added as met.
        let mut pinned = vec![false; p];
        let mut at_face_minimum = false;
        let mut residual = f64::INFINITY;

        for iteration in 0..=cfg.max_iterations {
            let g = qp.gradient(&u);
            residual = u
                .iter()
                .zip(&g)
                .map(|(ui, gi)| (ui - (ui - gi).clamp(lo, hi)).abs())
                .fold(0.0, f64::max);
            if residual <= cfg.tolerance {
                return Ok(self.plan(&qp, u, iteration, residual, history));
            }
            if iteration == cfg.max_iterations {
                break;
            }

            if at_face_minimum {
                // A face minimiser with no releasable bound would already
                // satisfy the residual test.
                if let Some((i, _)) = (0..p)
                    .filter(|&i| pinned[i])
                    .map(|i| (i, if u[i] <= lo { -g[i] } else { g[i] }))
                    .filter(|&(_, pull)| pull > 0.0)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                {
                    pinned[i] = false;
                }
            }

            let free: Vec<usize> = (0..p).filter(|&i| !pinned[i]).collect();
            let mut direction = vec![0.0; p];
            if !free.is_empty() {
                let h = DMatrix::from_fn(free.len(), free.len(), |r, c| qp.hessian[free[r]][free[c]]);
                let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -g[i]));
                let chol = Cholesky::new(h)
                    .ok_or_else(|| Error::InvalidParams("MPC Hessian is not positive definite".into()))?;
                let step = chol.solve(&rhs);
                for (k, &i) in free.iter().enumerate() {
                    direction[i] = step[k];
                }
            }

            let mut length = 1.0;
            let mut blocking = None;
            for &i in &free {
                let d = direction[i];
                let room = if d > 0.0 {
                    (hi - u[i]) / d
                } else if d < 0.0 {
                    (lo - u[i]) / d
                } else {
                    continue;
                };
                if room < length {
                    length = room.max(0.0);
                    blocking = Some(i);
                }
            }
            for &i in &free {
                u[i] = (u[i] + length * direction[i]).clamp(lo, hi);
            }
            match blocking {
                Some(i) => {
                    u[i] = if direction[i] > 0.0 { hi } else { lo };
                    pinned[i] = true;
                    at_face_minimum = false;
                }
                None => at_face_minimum = true,
            }
            history.push(qp.objective(&u));
        }

        let iterations = history.len() - 1;
        Err(Error::NonConvergence {
            iterations,
            residual,
            best: Box::new(self.plan(&qp, u, iterations, residual, history)),
        })
    }

    fn plan(&self, qp: &Qp, inputs: Vec<f64>, iterations: usize, residual: f64, history: Vec<f64>) -> ControlPlan {
        let outputs = qp
            .predict(&inputs)
            .iter()
            .zip(&qp.refs)
            .map(|(e, r)| self.model.temperature(e + r))
            .collect();
        let objective = qp.objective(&inputs);
        ControlPlan {
            outputs,
            inputs,
            objective,
            iterations,
            residual,
            history,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos::FosParams;
    use crate::mpc::discretize_internal_model;

    fn model() -> InternalModel {
        discretize_internal_model(&FosParams::new(6.0, 90.0, 13.0, 18.0).unwrap(), 30.0).unwrap()
    }

    #[test]
    fn saturates_when_far_below_setpoint() {
        let cfg = MpcConfig::default();
        let m = model();
        let plan = solve(0.0, 0.0, &vec![40.0; 48], &cfg, &m).unwrap();
        assert!(plan.inputs.iter().all(|&u| 1.0 - u <= cfg.tolerance), "{plan:?}");
        assert_eq!(plan.outputs.len(), 48);
    }

    #[test]
    fn idles_when_above_setpoint() {
        let cfg = MpcConfig::default();
        let m = model();
        let plan = solve(4.0, 0.0, &vec![17.0; 48], &cfg, &m).unwrap();
        assert!(plan.inputs.iter().all(|&u| u.abs() < 1e-12));
    }

    #[test]
    fn interior_solution_tracks_reachable_setpoint() {
        let cfg = MpcConfig::default();
        let m = model();
        let plan = solve(2.0, 0.3, &vec![21.0; 48], &cfg, &m).unwrap();
        assert!(plan.residual <= cfg.tolerance);
        // Steady input for a 3 °C rise on a 6 °C gain.
        assert!((plan.inputs[47] - 0.5).abs() < 0.02, "{:?}", plan.inputs);
        assert!((plan.outputs[47] - 21.0).abs() < 0.05);
    }

    #[test]
    fn objective_history_is_monotone() {
        let cfg = MpcConfig::default();
        let m = model();
        let sp: Vec<f64> = (0..48).map(|k| if k < 20 { 25.0 } else { 19.0 }).collect();
        let plan = solve(1.0, 1.0, &sp, &cfg, &m).unwrap();
        assert!(plan
            .history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)));
        assert_eq!(*plan.history.last().unwrap(), plan.objective);
    }

    #[test]
    fn iteration_cap_reports_best_plan() {
        let cfg = MpcConfig {
            max_iterations: 1,
            tolerance: 1e-14,
            ..MpcConfig::default()
        };
        let m = model();
        let sp: Vec<f64> = (0..48).map(|k| 19.0 + (k % 7) as f64).collect();
        match solve(1.0, 0.5, &sp, &cfg, &m) {
            Err(Error::NonConvergence { best, .. }) => {
                assert_eq!(best.inputs.len(), 48);
                assert!(best.objective <= best.history[0]);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = MpcConfig::default();
        let m = model();
        assert!(solve(0.0, 0.0, &[], &cfg, &m).is_err());
        assert!(solve(f64::NAN, 0.0, &[20.0], &cfg, &m).is_err());
        assert!(Solver::new(&cfg, &m)
            .solve(0.0, 0.0, &[20.0; 3], Some(&[0.0; 2]))
            .is_err());
    }
}
