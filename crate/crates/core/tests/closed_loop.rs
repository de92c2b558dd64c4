use std::path::PathBuf;

use safeslide::scenario::{ResolvedScenario, Scenario};
use safeslide::simulator::{batch_simulate, simulate, RunSpec, Scheme, SimConfig};
use safeslide::trajectory_csv::{read_csv, to_csv_string};

fn scenario(name: &str, horizon: f64) -> ResolvedScenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    let mut sc = Scenario::from_path(path).unwrap();
    sc.sim.horizon = horizon;
    sc.resolve().unwrap()
}

#[test]
fn bundled_scenarios_resolve_to_expected_constants() {
    let fixed = scenario("fixed_gain", 10.0);
    assert_eq!(fixed.eta, 6.4031);
    assert!(fixed.epsilon.is_none());
    assert_eq!(fixed.runs[0].constants.x0, vec![1.0, 0.0]);
    assert!((fixed.runs[0].constants.kappa - 1.5204).abs() < 1e-4);
    assert!((fixed.runs[0].constants.alpha_c - 0.12361).abs() < 1e-5);

    let adaptive = scenario("adaptive_gain", 10.0);
    assert!((adaptive.epsilon.unwrap() - 0.0781).abs() <= 5e-5);
    assert_eq!(adaptive.gamma, 0.5);

    let mut sc = fixed.spec.clone();
    sc.controller.eta = safeslide::scenario::EtaSpec::Mode(safeslide::scenario::EtaMode::Computed);
    let computed = sc.resolve().unwrap();
    assert!((computed.eta - 2.0 * 34f64.sqrt()).abs() < 1e-12);
    let k = &computed.runs[0].constants;
    assert!((k.kappa - (0.5 * k.sigma0_norm + k.alpha_c * computed.eta)).abs() < 1e-12);
}

#[test]
fn sigma_decays_during_the_reaching_phase() {
    let r = scenario("fixed_gain", 1.0);
    let out = r.run(false);
    let traj = out.trajectories[0].as_ref().unwrap();
    let reach = traj.events.reach_time.expect("reached within 1 s");
    let end = traj.times.partition_point(|&t| t <= reach);
    // strictly below the initial value after the first few steps, and never
    // rising by more than one step of chattering
    let s0 = traj.sigma_norms[0];
    for w in traj.sigma_norms[..end].windows(2) {
        assert!(w[1] <= w[0] + 1e-3, "{} -> {}", w[0], w[1]);
    }
    assert!(traj.sigma_norms[end - 1] < 0.01 * s0);
}

#[test]
fn reaching_time_converges_under_step_refinement() {
    let r = scenario("fixed_gain", 1.0);
    let run = &r.runs[0];
    let reach = |dt: f64| {
        let cfg = SimConfig {
            dt,
            horizon: 1.0,
            record_stride: 100,
            ..SimConfig::default()
        };
        simulate(&r.model, &run.controller, &cfg, &run.initial, 0.0)
            .unwrap()
            .events
            .reach_time
            .unwrap()
    };
    let (a, b) = (reach(2e-4), reach(1e-4));
    assert!((a - b).abs() <= 2e-3, "{a} vs {b}");
}

#[test]
fn euler_and_rk4_agree_on_the_verdicts() {
    let mut r = scenario("fixed_gain", 2.0);
    let rk4 = r.run(false);
    r.sim.scheme = Scheme::ExplicitEuler;
    let euler = r.run(false);
    for (a, b) in rk4.report.runs.iter().zip(&euler.report.runs) {
        let pa: Vec<bool> = a.verdicts.iter().map(|v| v.pass).collect();
        let pb: Vec<bool> = b.verdicts.iter().map(|v| v.pass).collect();
        assert_eq!(pa, pb, "run {}", a.index);
    }
}

#[test]
fn parallel_batch_matches_sequential() {
    let r = scenario("adaptive_gain", 0.5);
    let specs: Vec<RunSpec> = r
        .runs
        .iter()
        .map(|run| RunSpec {
            controller: run.controller.clone(),
            initial: run.initial.clone(),
            gamma: r.gamma,
        })
        .collect();
    let seq = batch_simulate(&r.model, &r.sim, &specs, false);
    let par = batch_simulate(&r.model, &r.sim, &specs, true);
    assert_eq!(seq, par);
}

#[test]
fn simulated_trajectory_survives_csv_round_trip() {
    let r = scenario("adaptive_gain", 0.3);
    let out = r.run(false);
    let traj = out.trajectories[0].as_ref().unwrap();
    let back = read_csv(to_csv_string(traj).unwrap().as_bytes()).unwrap();
    assert_eq!(back.times, traj.times);
    assert_eq!(back.positions, traj.positions);
    assert_eq!(back.velocities, traj.velocities);
    assert_eq!(back.sigma_norms, traj.sigma_norms);
    assert_eq!(back.h, traj.h);
    assert_eq!(back.h_gamma, traj.h_gamma);
    assert_eq!(back.gains, traj.gains);
    assert_eq!(back.controls, traj.controls);
}
