//! Library results against independent brute-force oracles.

use ahumpc::dataset::extract_sessions;
use ahumpc::fos::{extract_params, simulate_schedule, step_response, Direction, FosParams, TemperatureTrace};
use ahumpc::mapper::{map_to_on_time, map_with_form, relaxed_end, TargetForm};
use ahumpc::mpc::{discretize_internal_model, MpcConfig, Solver};
use ahumpc::plant::ActuatorMode;
use ahumpc::telemetry::{AitRecord, ControllerKind, MpcMovement};
use ahumpc::SimTime;
use proptest::prelude::*;

/// Delayed first-order ODE integrated with one-second Euler steps.
fn integrate(kp: f64, tau: f64, theta: f64, y0: f64, u: f64, minutes: usize) -> Vec<f64> {
    let dt = 1.0 / 60.0;
    let mut y = y0;
    let mut out = vec![y0];
    for m in 0..minutes {
        for s in 0..60 {
            let t = m as f64 + s as f64 * dt;
            let input = if t >= theta { u } else { 0.0 };
            y += dt * (y0 + kp * input - y) / tau;
        }
        out.push(y);
    }
    out
}

#[test]
fn step_response_matches_one_second_integration() {
    for &(kp, tau, u) in &[(6.0, 45.0, 1.0), (-4.0, 120.0, 1.0), (9.0, 200.0, 0.35)] {
        let p = FosParams::new(kp, tau, 13.0, 18.0).unwrap();
        let oracle = integrate(kp, tau, 13.0, 18.0, u, 600);
        for (t, y) in oracle.iter().enumerate().step_by(7) {
            let got = step_response(&p, u, t as f64).unwrap();
            assert!(
                (got - y).abs() < 2e-3 * kp.abs(),
                "kp {kp} tau {tau} t {t}: {got} vs {y}"
            );
        }
    }
}

#[test]
fn schedule_segments_chain_end_to_start() {
    let inc = FosParams::new(6.0, 60.0, 13.0, 18.0).unwrap();
    let dec = FosParams::new(-5.0, 90.0, 13.0, 18.0).unwrap();
    let schedule = [(30.0, 1.0), (20.0, 0.0), (40.0, 0.5)];
    let trace = simulate_schedule(&inc, &dec, &schedule, 18.0, 1.0).unwrap();
    assert_eq!(trace.len(), 91);
    let s = trace.samples();
    let first_end = step_response(&inc, 1.0, 30.0).unwrap();
    assert_eq!(s[30].1, first_end);
    let second_end = step_response(&dec.with_y_init(first_end), 1.0, 20.0).unwrap();
    assert!((s[50].1 - second_end).abs() < 1e-12);
    // Each restart holds its start value through the dead time.
    assert!(s[31..=43].iter().all(|p| p.1 == first_end));
}

proptest! {
    #[test]
    fn extraction_round_trips(kp in 1.0f64..20.0, tau in 15.0f64..300.0, y0 in 0.0f64..30.0, up in any::<bool>()) {
        let (direction, kp) = if up { (Direction::Increasing, kp) } else { (Direction::Decreasing, -kp) };
        let p = FosParams::new(kp, tau, 13.0, y0).unwrap();
        let n = (13.0 + 12.0 * tau) as usize;
        let temps = (0..=n).map(|t| step_response(&p, 1.0, t as f64).unwrap()).collect();
        let got = extract_params(&TemperatureTrace::new(0.0, 1.0, temps).unwrap(), direction, 13.0).unwrap();
        prop_assert!(((got.kp - kp) / kp).abs() < 0.01);
        prop_assert!((got.tau - tau).abs() < 1.0);
        prop_assert_eq!(got.y_init, y0);
    }

    #[test]
    fn mapped_on_time_is_monotone(
        kp_inc in 2.0f64..15.0, tau_inc in 20.0f64..250.0,
        kp_dec in 2.0f64..15.0, tau_dec in 20.0f64..300.0,
        t_init in 5.0f64..28.0, state in any::<bool>(),
    ) {
        let inc = FosParams::new(kp_inc, tau_inc, 13.0, t_init).unwrap();
        let dec = FosParams::new(-kp_dec, tau_dec, 13.0, t_init).unwrap();
        let form = if state { TargetForm::State } else { TargetForm::Rest };
        let mut last = 0.0;
        for k in 0..=40 {
            let m = map_with_form(k as f64 / 40.0, &inc, &dec, t_init, 30.0, 0.05, form).unwrap();
            prop_assert!(m.minutes >= last);
            prop_assert!((0.0..=30.0).contains(&m.minutes));
            last = m.minutes;
        }
        prop_assert_eq!(last, 30.0);
    }
}

#[test]
fn mapper_matches_one_minute_schedule_simulation() {
    let inc = FosParams::new(8.0, 70.0, 13.0, 19.0).unwrap();
    let dec = FosParams::new(-6.0, 150.0, 13.0, 19.0).unwrap();
    for k in 1..20 {
        let u = k as f64 / 20.0;
        let m = map_to_on_time(u, &inc, &dec, 19.0, 30.0, 0.05).unwrap();
        if m.minutes == 0.0 || m.minutes == 30.0 {
            continue;
        }
        let schedule = [(m.minutes, 1.0), (30.0 - m.minutes, 0.0)];
        let end = simulate_schedule(&inc, &dec, &schedule, 19.0, 1.0).unwrap().last();
        let target = step_response(&inc, u, 30.0).unwrap();
        assert!(!m.exact || (end - target).abs() <= 0.05, "u {u}: {end} vs {target}");
        // No shorter whole minute would have met the tolerance.
        for shorter in 1..m.minutes as u32 {
            let s = shorter as f64;
            let e = simulate_schedule(&inc, &dec, &[(s, 1.0), (30.0 - s, 0.0)], 19.0, 1.0)
                .unwrap()
                .last();
            assert!((e - target).abs() > 0.05, "u {u}: {shorter} min already fits");
        }
    }
}

#[test]
fn state_form_end_matches_relaxation_oracle() {
    let inc = FosParams::new(10.0, 80.0, 13.0, 8.0).unwrap();
    let dec = FosParams::new(-12.0, 160.0, 13.0, 22.0).unwrap();
    for on in [0.0, 7.0, 15.0, 29.0, 30.0] {
        // Minute steps of the exact relaxation toward each leg's plateau.
        let mut y = 21.0;
        for m in 0..30 {
            let (level, tau) = if (m as f64) < on { (18.0, 80.0) } else { (10.0, 160.0) };
            y = level + (y - level) * (-1.0f64 / tau).exp();
        }
        assert!((relaxed_end(&inc, &dec, 21.0, on, 30.0) - y).abs() < 1e-9, "on {on}");
    }
}

/// Exhaustive 0.005-grid search for a one-step horizon.
#[test]
fn single_step_solver_matches_fine_grid() {
    let model = discretize_internal_model(&FosParams::new(11.0, 95.0, 13.0, 9.0).unwrap(), 30.0).unwrap();
    let cfg = MpcConfig {
        horizon: 1,
        ..MpcConfig::default()
    };
    for (x0, u_prev, sp) in [(3.0, 0.2, 21.0), (12.0, 1.0, 21.0), (0.0, 0.0, 9.5), (14.0, 0.0, 22.5)] {
        let plan = Solver::new(&cfg, &model).solve(x0, u_prev, &[sp], None).unwrap();
        let cost = |u: f64| {
            let y = model.temperature(model.a * x0 + model.b_now * u + model.b_prev * u_prev);
            cfg.tracking_weight * (y - sp).powi(2) + cfg.move_weight * (u - u_prev).powi(2)
        };
        let best = (0..=200).map(|k| cost(k as f64 * 0.005)).fold(f64::INFINITY, f64::min);
        assert!(plan.objective <= best + 1e-9, "x0 {x0}: {} vs {best}", plan.objective);
        assert!((plan.objective - cost(plan.inputs[0])).abs() < 1e-9);
    }
}

#[test]
fn sessions_follow_run_length_encoding() {
    let day = SimTime::from_ymd_hm(2023, 1, 9, 0, 0);
    let pattern = [0.0, 30.0, 30.0, 12.0, 0.0, 0.0, 30.0, 5.0, 25.0, 30.0, 0.0, 18.0];
    let movements: Vec<MpcMovement> = pattern
        .iter()
        .enumerate()
        .map(|(k, &on)| MpcMovement {
            date: day + 30 * k as i64,
            ait: 20.0,
            setpoint: 22.0,
            u: on / 30.0,
            on_minutes: on,
            controller: ControllerKind::Manual,
        })
        .collect();
    let total = 30 * pattern.len() as i64;
    let ait: Vec<AitRecord> = (0..=total / 5)
        .map(|k| AitRecord {
            timestamp: day + 5 * k,
            ait: 20.0 + k as f64 * 0.01,
            humidity_avg: 50.0,
            reporting_count: 24,
        })
        .collect();

    // Oracle: per-minute flags, run-length encoded.
    let flags: Vec<bool> = (0..total)
        .map(|m| (m % 30) < pattern[(m / 30) as usize] as i64)
        .collect();
    let mut runs = Vec::new();
    let mut start = 0;
    for m in 1..=flags.len() {
        if m == flags.len() || flags[m] != flags[start] {
            runs.push((start as i64, m as i64, flags[start]));
            start = m;
        }
    }
    let expected: Vec<(SimTime, SimTime, Direction)> = runs
        .iter()
        .filter_map(|&(a, b, on)| {
            let first = (a + 4) / 5 * 5;
            let last = b / 5 * 5;
            (last > first).then(|| {
                (
                    day + first,
                    day + last,
                    if on {
                        Direction::Increasing
                    } else {
                        Direction::Decreasing
                    },
                )
            })
        })
        .collect();

    let sessions = extract_sessions(&movements, &ait, ActuatorMode::Binary, 30);
    let got: Vec<(SimTime, SimTime, Direction)> = sessions.iter().map(|s| (s.start, s.end, s.direction)).collect();
    assert_eq!(got, expected);
    for s in &sessions {
        assert_eq!(s.ait_trace.len() as i64, (s.end - s.start) / 5 + 1);
        assert_eq!(
            s.mean_gain,
            if s.direction == Direction::Increasing { 1.0 } else { 0.0 }
        );
    }
}
