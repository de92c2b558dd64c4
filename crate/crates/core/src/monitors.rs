//! Runtime checks of the closed-loop guarantees on recorded trajectories.
//!
//! Each monitor reduces a trajectory to a worst margin (positive is good) and
//! passes iff that margin is at least `−tolerance`. Tolerances absorb the
//! `O(dt)` slack that strict continuous-time inequalities pick up once sampled.

use serde::Serialize;

use crate::cbf::ObstacleCbf;
use crate::simulator::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorVerdict {
    pub name: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub worst_time: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MonitorVerdict {
    fn from_margin(name: &str, worst: Option<(f64, f64)>, tolerance: f64) -> Self {
        let (worst_margin, worst_time) = match worst {
            Some((m, t)) => (m, Some(t)),
            None => (f64::INFINITY, None),
        };
        Self {
            name: name.to_string(),
            pass: worst_margin >= -tolerance,
            worst_margin,
            worst_time,
            tolerance,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Per-monitor tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorTolerances {
    /// Safety: `h + γ ≥ −tol_h`.
    pub tol_h: f64,
    /// Reaching envelope slack on `‖σ‖`.
    pub tol_reach: f64,
    /// Slack on the reaching-time bound.
    pub tol_t: f64,
    /// Slack on the `h_c` decay inequality.
    pub tol_hc: f64,
    /// Tube containment slack, relative to `ε`.
    pub tol_eps_rel: f64,
}

impl MonitorTolerances {
    /// Defaults that scale with the step size: `tol_h = 1e−6`,
    /// `tol_reach = 50κ·dt`, `tol_T = 10·dt`, `tol_hc = 1e−4 + 10·dt`,
    /// `tol_ε = 0.05ε`.
    pub fn for_step(dt: f64, kappa: f64) -> Self {
        Self {
            tol_h: 1e-6,
            tol_reach: 50.0 * kappa * dt,
            tol_t: 10.0 * dt,
            tol_hc: 1e-4 + 10.0 * dt,
            tol_eps_rel: 0.05,
        }
    }
}

fn worst_of(samples: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    samples.fold(None, |acc: Option<(f64, f64)>, (m, t)| match acc {
        Some((best, _)) if best <= m => acc,
        _ => Some((m, t)),
    })
}

/// Index one past the last sample with `t ≤ limit`.
fn upto(traj: &Trajectory, limit: Option<f64>) -> usize {
    match limit {
        Some(l) => traj.times.partition_point(|&t| t <= l),
        None => traj.len(),
    }
}

/// `h(x(t)) + γ ≥ −tol_h` on every sample.
pub fn monitor_safety(traj: &Trajectory, cbf: &ObstacleCbf, gamma: f64, tol_h: f64) -> MonitorVerdict {
    let worst = worst_of(
        traj.positions
            .iter()
            .zip(&traj.times)
            .map(|(x, &t)| (cbf.eval(x) + gamma, t)),
    );
    MonitorVerdict::from_margin(&format!("safety(gamma={gamma})"), worst, tol_h)
}

/// Finite-time reaching: `‖σ(t)‖ ≤ max(0, ‖σ₀‖ − κt/√2) + tol_reach` on every
/// sample up to `τ` (all samples when no switch happened), and the manifold
/// is reached no later than `√2‖σ₀‖/κ + tol_T`. Reaching means the first
/// sample with `‖σ‖ ≤ reach_tol`, or `τ` if that comes first: the adaptive
/// law holds `σ` inside the `ε`-tube rather than driving it to zero.
///
/// The reported margin is in `‖σ‖` units; a late reach contributes
/// `tol_reach·(T_bound − t_reach)/tol_T` so that both conditions share the
/// envelope tolerance.
pub fn monitor_reaching(traj: &Trajectory, kappa: f64, tol: &MonitorTolerances) -> MonitorVerdict {
    let name = "reaching";
    let Some(&sigma0) = traj.sigma_norms.first() else {
        return MonitorVerdict::from_margin(name, None, tol.tol_reach);
    };
    let bound_time = std::f64::consts::SQRT_2 * sigma0 / kappa;
    let end = upto(traj, traj.events.tau);
    let envelope = worst_of((0..end).map(|i| {
        let t = traj.times[i];
        let bound = (sigma0 - kappa * t / std::f64::consts::SQRT_2).max(0.0);
        (bound - traj.sigma_norms[i], t)
    }));

    let last_time = traj.times.last().copied().unwrap_or(0.0);
    let reached = match (traj.events.reach_time, traj.events.tau) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let timing = match reached {
        Some(t_reach) => Some((tol.tol_reach * (bound_time - t_reach) / tol.tol_t, t_reach)),
        // never reached: only a violation if the deadline passed inside the run
        None if last_time > bound_time + tol.tol_t => {
            Some((tol.tol_reach * (bound_time - last_time) / tol.tol_t, last_time))
        }
        None => None,
    };
    let worst = match (envelope, timing) {
        (Some(e), Some(t)) => Some(if t.0 < e.0 { t } else { e }),
        (e, t) => e.or(t),
    };
    let note = match reached {
        Some(t) => format!("reached at t={t:.6}, bound {bound_time:.6}"),
        None => format!("not reached, bound {bound_time:.6}"),
    };
    MonitorVerdict::from_margin(name, worst, tol.tol_reach).with_note(note)
}

/// Reaching-phase safety certificate: with
/// `h_cγ = −½‖σ‖² + α_c(h + γ)`, require
/// `h_cγ(t) ≥ h_cγ(0)·e^{−αt} − tol_hc` up to the switching time (adaptive)
/// or the first manifold hit (fixed gain).
///
/// Errors when `h_cγ(0) ≤ 0`: the certificate does not apply to such an
/// initial condition.
pub fn monitor_hc(
    traj: &Trajectory,
    cbf: &ObstacleCbf,
    alpha: f64,
    alpha_c: f64,
    gamma: f64,
    tol_hc: f64,
) -> Result<MonitorVerdict> {
    let hc = |i: usize| -0.5 * traj.sigma_norms[i].powi(2) + alpha_c * (cbf.eval(&traj.positions[i]) + gamma);
    if traj.is_empty() {
        return Ok(MonitorVerdict::from_margin("h_c", None, tol_hc));
    }
    let hc0 = hc(0);
    if !(hc0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "h_c(x0) = {hc0} is not positive; reaching certificate does not apply"
        )));
    }
    let limit = traj.events.tau.or(traj.events.reach_time);
    let end = upto(traj, limit);
    let worst = worst_of((0..end).map(|i| {
        let t = traj.times[i];
        (hc(i) - hc0 * (-alpha * t).exp(), t)
    }));
    Ok(MonitorVerdict::from_margin(
        &format!("h_c(gamma={gamma})"),
        worst,
        tol_hc,
    ))
}

/// Tube containment after the switch: `‖σ(t)‖ < ε + tol` for `t ≥ τ`, and no
/// barrier-gain clamp anywhere.
pub fn monitor_epsilon_containment(traj: &Trajectory, epsilon: f64, tol_eps_rel: f64) -> MonitorVerdict {
    let tol = tol_eps_rel * epsilon;
    let name = "epsilon_containment";
    if let Some(&t_clamp) = traj.events.clamp_times.first() {
        return MonitorVerdict {
            name: name.to_string(),
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            worst_time: Some(t_clamp),
            tolerance: tol,
            note: Some(format!("barrier gain clamped at t={t_clamp}")),
        };
    }
    let Some(tau) = traj.events.tau else {
        return MonitorVerdict::from_margin(name, None, tol).with_note("no switch");
    };
    let start = traj.times.partition_point(|&t| t < tau);
    let worst = worst_of((start..traj.len()).map(|i| (epsilon - traj.sigma_norms[i], traj.times[i])));
    MonitorVerdict::from_margin(name, worst, tol).with_note(format!("tau={tau:.6}"))
}
