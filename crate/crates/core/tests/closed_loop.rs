//! MPC plus relay mapping against a plant that is exactly first order.

use ahumpc::mapper::{actuate, ProtectionPolicy, TargetForm};
use ahumpc::mpc::{discretize_internal_model, MpcConfig, Solver};
use ahumpc::plant::ActuatorMode;
use ahumpc::FosParams;

const REST: f64 = 10.0;
const KP: f64 = 16.0;
const TAU: f64 = 80.0;
const DELAY: usize = 13;

/// Minute-resolution relaxation toward `REST + KP * gain`, the gain arriving
/// `DELAY` minutes after it is commanded.
struct FirstOrderPlant {
    y: f64,
    in_transit: std::collections::VecDeque<f64>,
}

impl FirstOrderPlant {
    fn minute(&mut self, commanded: f64) {
        self.in_transit.push_back(commanded);
        let gain = self.in_transit.pop_front().unwrap();
        let level = REST + KP * gain;
        self.y = level + (self.y - level) * (-1.0 / TAU).exp();
    }
}

fn run(mode: ActuatorMode, setpoint: f64) -> Vec<f64> {
    let inc = FosParams::new(KP, TAU, DELAY as f64, REST).unwrap();
    let dec = FosParams::new(-KP, TAU, DELAY as f64, REST + KP).unwrap();
    let model = discretize_internal_model(&inc, 30.0).unwrap();
    let cfg = MpcConfig::default();
    let mut plant = FirstOrderPlant {
        y: REST,
        in_transit: std::iter::repeat_n(0.0, DELAY).collect(),
    };
    let mut u_prev = 0.0;
    let mut samples = Vec::new();
    for _ in 0..24 {
        samples.push(plant.y);
        let plan = Solver::new(&cfg, &model)
            .solve(model.deviation(plant.y), u_prev, &vec![setpoint; cfg.horizon], None)
            .unwrap();
        let u = plan.inputs[0];
        u_prev = u;
        let a = actuate(
            u,
            mode,
            &inc,
            &dec,
            plant.y,
            30.0,
            0.05,
            ProtectionPolicy::default(),
            TargetForm::State,
        )
        .unwrap();
        for m in 0..30 {
            let gain = match mode {
                ActuatorMode::Analog => a.gain,
                ActuatorMode::Binary if (m as f64) < a.on_minutes => 1.0,
                ActuatorMode::Binary => 0.0,
            };
            plant.minute(gain);
        }
    }
    samples
}

#[test]
fn analog_drive_settles_on_the_setpoint() {
    let y = run(ActuatorMode::Analog, 21.0);
    assert!(y[..5].windows(2).all(|w| w[1] > w[0]), "{y:?}");
    assert!(y.iter().all(|&v| v < 21.1), "{y:?}");
    for (k, v) in y.iter().enumerate().skip(8) {
        assert!((v - 21.0).abs() < 0.01, "step {k}: {v}");
    }
}

#[test]
fn relay_drive_stays_near_the_setpoint() {
    let y = run(ActuatorMode::Binary, 21.0);
    let tail = &y[10..];
    let mean_abs = tail.iter().map(|v| (v - 21.0).abs()).sum::<f64>() / tail.len() as f64;
    assert!(mean_abs < 0.5, "{y:?}");
    assert!(y.iter().all(|&v| v < 22.5), "{y:?}");
}
