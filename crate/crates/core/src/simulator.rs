//! Fixed-step integration of the discontinuous closed loop.
//!
//! The controller is re-evaluated at every Runge–Kutta stage. Events (the
//! adaptive switching time `τ`, first manifold hit, barrier-gain clamps) are
//! latched on post-step states, i.e. on the sample at the start of each step.

use rayon::prelude::*;

use crate::plant::{PlantState, UncertaintyModel};
use crate::sliding_control::{ControlLaw, ControlOutput, Controller};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    /// `‖σ‖` level that counts as having reached the manifold.
    pub reach_tol: f64,
    /// Record every `record_stride`-th step (the final sample is always kept).
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 10.0,
            scheme: Scheme::Rk4,
            reach_tol: 1e-3,
            record_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dt > self.horizon {
            return Err(Error::Config(format!(
                "dt = {} exceeds the horizon {}",
                self.dt, self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record stride must be at least 1".into()));
        }
        if !(self.reach_tol > 0.0) {
            return Err(Error::Config("reach tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Discrete events observed while stepping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    /// Adaptive switching time.
    pub tau: Option<f64>,
    /// First sample with `‖σ‖ ≤ reach_tol`.
    pub reach_time: Option<f64>,
    /// Times at which the barrier gain saturated (any stage of the step
    /// starting at that time).
    pub clamp_times: Vec<f64>,
    /// Sample times at which the state sat where `∇h = 0`.
    pub singular_times: Vec<f64>,
}

/// Time-indexed closed-loop record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
    pub sigma_norms: Vec<f64>,
    pub h: Vec<f64>,
    pub h_gamma: Vec<f64>,
    pub gains: Vec<f64>,
    pub controls: Vec<Vector>,
    pub events: EventLog,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            velocities: Vec::with_capacity(n),
            sigma_norms: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
            h_gamma: Vec::with_capacity(n),
            gains: Vec::with_capacity(n),
            controls: Vec::with_capacity(n),
            events: EventLog::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, |x| x.len())
    }

    pub fn final_position(&self) -> Option<&Vector> {
        self.positions.last()
    }

    /// `h + γ` offset used for the `h_gamma` column.
    pub fn gamma(&self) -> f64 {
        match (self.h.first(), self.h_gamma.first()) {
            (Some(h), Some(hg)) => hg - h,
            _ => 0.0,
        }
    }
}

struct StageEval {
    out: ControlOutput,
    xddot: Vector,
}

fn stage(
    model: &UncertaintyModel,
    controller: &Controller,
    t: f64,
    state: &PlantState,
    switched: bool,
) -> Result<StageEval> {
    let out = controller.evaluate(model, t, state, switched)?;
    let xddot = model.acceleration(t, state, &out.u)?;
    Ok(StageEval { out, xddot })
}

fn offset(state: &PlantState, dx: &Vector, dv: &Vector, h: f64) -> PlantState {
    PlantState {
        x: &state.x + dx * h,
        xdot: &state.xdot + dv * h,
    }
}

/// Simulates one closed-loop run over `[0, horizon]`.
///
/// `gamma` only shifts the recorded `h_gamma` column; for the adaptive law the
/// switching threshold comes from the controller's `ε`.
pub fn simulate(
    model: &UncertaintyModel,
    controller: &Controller,
    config: &SimConfig,
    initial: &PlantState,
    gamma: f64,
) -> Result<Trajectory> {
    config.validate()?;
    if initial.dim() != controller.filter.dim() {
        return Err(Error::DimensionMismatch {
            expected: controller.filter.dim(),
            got: initial.dim(),
        });
    }
    if !initial.is_finite() {
        return Err(Error::Divergence { step: 0, time: 0.0 });
    }

    let steps = config.steps();
    let dt = config.dt;
    let cbf = controller.filter.cbf();
    let mut adapt = match controller.law {
        ControlLaw::Adaptive { epsilon, .. } => Some(AdaptiveLatch::new(epsilon)),
        ControlLaw::Smc => None,
    };

    let mut traj = Trajectory::with_capacity(steps / config.record_stride + 2);
    let mut state = initial.clone();

    for k in 0..=steps {
        let t = k as f64 * dt;
        let sigma_now = crate::sliding_control::sigma(&controller.filter, &state).norm;
        if let Some(latch) = adapt.as_mut() {
            if latch.observe(t, sigma_now) {
                traj.events.tau = Some(t);
            }
        }
        if traj.events.reach_time.is_none() && sigma_now <= config.reach_tol {
            traj.events.reach_time = Some(t);
        }
        let switched = adapt.as_ref().is_some_and(|a| a.switched());

        let first = stage(model, controller, t, &state, switched)?;
        if first.out.singular {
            traj.events.singular_times.push(t);
        }
        let mut clamped = first.out.clamped;

        if k % config.record_stride == 0 || k == steps {
            let h = cbf.eval(&state.x);
            traj.times.push(t);
            traj.positions.push(state.x.clone());
            traj.velocities.push(state.xdot.clone());
            traj.sigma_norms.push(first.out.sigma.norm);
            traj.h.push(h);
            traj.h_gamma.push(h + gamma);
            traj.gains.push(first.out.gain);
            traj.controls.push(first.out.u.clone());
        }
        if k == steps {
            if clamped {
                traj.events.clamp_times.push(t);
            }
            break;
        }

        state = match config.scheme {
            Scheme::ExplicitEuler => offset(&state, &state.xdot, &first.xddot, dt),
            Scheme::Rk4 => {
                let k1x = state.xdot.clone();
                let k1v = first.xddot;
                let s2 = offset(&state, &k1x, &k1v, 0.5 * dt);
                let e2 = stage(model, controller, t + 0.5 * dt, &s2, switched)?;
                let s3 = offset(&state, &s2.xdot, &e2.xddot, 0.5 * dt);
                let e3 = stage(model, controller, t + 0.5 * dt, &s3, switched)?;
                let s4 = offset(&state, &s3.xdot, &e3.xddot, dt);
                let e4 = stage(model, controller, t + dt, &s4, switched)?;
                clamped |= e2.out.clamped || e3.out.clamped || e4.out.clamped;
                let dx = (k1x + (&s2.xdot + &s3.xdot) * 2.0 + &s4.xdot) / 6.0;
                let dv = (k1v + (e2.xddot + e3.xddot) * 2.0 + e4.xddot) / 6.0;
                offset(&state, &dx, &dv, dt)
            }
        };
        if clamped {
            traj.events.clamp_times.push(t);
        }
        if !state.is_finite() {
            return Err(Error::Divergence {
                step: k + 1,
                time: (k + 1) as f64 * dt,
            });
        }
    }
    Ok(traj)
}

/// Switch latch used by the simulator; same rule as
/// [`crate::sliding_control::AdaptiveGainState::observe`] without the
/// admissibility check, which happens when the scenario is resolved.
struct AdaptiveLatch {
    epsilon: f64,
    tau: Option<f64>,
}

impl AdaptiveLatch {
    fn new(epsilon: f64) -> Self {
        Self { epsilon, tau: None }
    }

    fn observe(&mut self, t: f64, sigma_norm: f64) -> bool {
        if self.tau.is_none() && sigma_norm <= 0.5 * self.epsilon {
            self.tau = Some(t);
            return true;
        }
        false
    }

    fn switched(&self) -> bool {
        self.tau.is_some()
    }
}

/// One run of a batch: the controller is per-run because the safe reaching
/// constant depends on the initial condition.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub controller: Controller,
    pub initial: PlantState,
    pub gamma: f64,
}

/// Runs every spec independently; results keep the input order and a failed
/// run does not stop the others.
pub fn batch_simulate(
    model: &UncertaintyModel,
    config: &SimConfig,
    runs: &[RunSpec],
    parallel: bool,
) -> Vec<Result<Trajectory>> {
    let one = |r: &RunSpec| simulate(model, &r.controller, config, &r.initial, r.gamma);
    if parallel {
        runs.par_iter().map(one).collect()
    } else {
        runs.iter().map(one).collect()
    }
}
