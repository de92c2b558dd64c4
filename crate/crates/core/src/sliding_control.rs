//! Sliding variable and the two sliding-mode laws.
//!
//! Both laws drive `σ = ẋ − v(x)` to zero with a unit-vector control
//! `u = −k G⁻¹ σ/‖σ‖`. The fixed law uses `k = (κ + ρ)/(1 + μ)` throughout; the
//! adaptive law switches, once `‖σ‖ ≤ ε/2` is first observed, to the barrier
//! gain `k_b(‖σ‖) = ‖σ‖/(ε − ‖σ‖)` that keeps `‖σ‖ < ε` without a disturbance
//! bound.

use crate::plant::{PlantState, UncertaintyModel};
use crate::safety_filter::FilterParams;
use crate::{Error, Matrix, Result, Vector};

/// Norm below which `σ/‖σ‖` is regularized to `σ/tol`.
pub const DEFAULT_TOL_SIGMA: f64 = 1e-9;

/// Barrier gain saturation level.
pub const K_MAX: f64 = 1e6;

/// Slack granted when checking `ε ≤ αγ/η`, so that a bound quoted to four
/// decimals (0.0781 against 0.078087…) is still admitted.
pub const EPSILON_ADMISSION_TOL: f64 = 5e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingVar {
    pub sigma: Vector,
    pub norm: f64,
}

impl SlidingVar {
    pub fn new(sigma: Vector) -> Self {
        let norm = sigma.norm();
        Self { sigma, norm }
    }
}

/// `σ = ẋ − v(x)`.
pub fn sigma(filter: &FilterParams, state: &PlantState) -> SlidingVar {
    SlidingVar::new(&state.xdot - filter.v_total(&state.x))
}

/// Constants of the fixed-gain law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcGains {
    pub kappa: f64,
    pub mu: f64,
    pub beta: f64,
    pub alpha_c: f64,
}

impl SmcGains {
    pub fn new(kappa: f64, mu: f64, beta: f64, alpha_c: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        if !(mu > -1.0) {
            return Err(Error::InvalidInput(format!("mu must exceed -1, got {mu}")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if !(alpha_c > 0.0 && alpha_c.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha_c must be positive, got {alpha_c}")));
        }
        Ok(Self {
            kappa,
            mu,
            beta,
            alpha_c,
        })
    }

    /// `k = (κ + ρ)/(1 + μ)`.
    pub fn gain(&self, rho: f64) -> f64 {
        (self.kappa + rho) / (1.0 + self.mu)
    }
}

/// `ρ = ‖G‖·d + ‖v̇‖` with `‖G‖` the spectral norm.
pub fn rho(g_norm: f64, d: f64, vdot: &Vector) -> f64 {
    g_norm * d + vdot.norm()
}

/// Reaching constant that keeps the reaching phase inside the safe set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeReachingGain {
    pub kappa: f64,
    pub alpha_c: f64,
}

/// `α_c = (‖σ₀‖² + β)/(2h₀)` and `κ = (α/2)‖σ₀‖ + α_c η`.
pub fn kappa_safe_reaching(alpha: f64, sigma0_norm: f64, beta: f64, h0: f64, eta: f64) -> Result<SafeReachingGain> {
    if !(h0 > 0.0) {
        return Err(Error::InitialStateNotInterior { h0 });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!("eta must be nonnegative, got {eta}")));
    }
    if !(alpha > 0.0) || !(sigma0_norm >= 0.0) {
        return Err(Error::InvalidInput(
            "alpha must be positive and ‖σ₀‖ nonnegative".into(),
        ));
    }
    let alpha_c = (sigma0_norm * sigma0_norm + beta) / (2.0 * h0);
    Ok(SafeReachingGain {
        kappa: 0.5 * alpha * sigma0_norm + alpha_c * eta,
        alpha_c,
    })
}

/// `u = −k G⁻¹ σ / max(‖σ‖, tol_sigma)`.
pub fn smc_control(gains: &SmcGains, g_inv: &Matrix, sv: &SlidingVar, rho_val: f64, tol_sigma: f64) -> Vector {
    unit_vector_control(gains.gain(rho_val), g_inv, sv, tol_sigma)
}

fn unit_vector_control(gain: f64, g_inv: &Matrix, sv: &SlidingVar, tol_sigma: f64) -> Vector {
    g_inv * &sv.sigma * (-gain / sv.norm.max(tol_sigma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierGain {
    pub value: f64,
    /// `‖σ‖` came within `ε/K_MAX` of `ε` (or beyond) and the gain saturated.
    pub clamped: bool,
}

/// `k_b(r) = r/(ε − r)`, saturated at [`K_MAX`].
pub fn barrier_gain(sigma_norm: f64, epsilon: f64) -> BarrierGain {
    if sigma_norm >= epsilon * (1.0 - 1.0 / K_MAX) {
        return BarrierGain {
            value: K_MAX,
            clamped: true,
        };
    }
    BarrierGain {
        value: sigma_norm / (epsilon - sigma_norm),
        clamped: false,
    }
}

/// `αγ/η`, the largest tube width that keeps trajectories inside `C_γ`.
pub fn max_admissible_epsilon(alpha: f64, gamma: f64, eta: f64) -> f64 {
    alpha * gamma / eta
}

/// Switching state of the adaptive law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGainState {
    epsilon: f64,
    gamma: f64,
    tau: Option<f64>,
}

impl AdaptiveGainState {
    /// Rejects `ε > αγ/η` (up to [`EPSILON_ADMISSION_TOL`]).
    pub fn new(epsilon: f64, gamma: f64, alpha: f64, eta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon and gamma must be positive, got {epsilon} and {gamma}"
            )));
        }
        let bound = max_admissible_epsilon(alpha, gamma, eta);
        if epsilon > bound + EPSILON_ADMISSION_TOL {
            return Err(Error::EpsilonNotAdmissible { epsilon, bound });
        }
        Ok(Self {
            epsilon,
            gamma,
            tau: None,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn switched(&self) -> bool {
        self.tau.is_some()
    }

    /// Latches `τ = t` the first time `‖σ‖ ≤ ε/2` is observed. Returns whether
    /// this call performed the switch.
    pub fn observe(&mut self, t: f64, sigma_norm: f64) -> bool {
        if self.tau.is_none() && sigma_norm <= 0.5 * self.epsilon {
            self.tau = Some(t);
            return true;
        }
        false
    }
}

/// Which gain schedule a [`Controller`] runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlLaw {
    /// Fixed gain with the model's disturbance bound `d(t, x)`.
    Smc,
    /// Fixed gain with the constant overestimate `d̄` until `τ`, then `k_b`.
    Adaptive { epsilon: f64, d_overestimate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vector,
    pub gain: f64,
    pub sigma: SlidingVar,
    pub clamped: bool,
    /// The state sits where `∇h = 0` and the filter correction was zeroed.
    pub singular: bool,
}

/// A sliding-mode controller bound to a safety filter.
#[derive(Debug, Clone)]
pub struct Controller {
    pub filter: FilterParams,
    pub gains: SmcGains,
    pub law: ControlLaw,
    pub tol_sigma: f64,
}

impl Controller {
    pub fn new(filter: FilterParams, gains: SmcGains, law: ControlLaw) -> Self {
        Self {
            filter,
            gains,
            law,
            tol_sigma: DEFAULT_TOL_SIGMA,
        }
    }

    /// Control at `(t, state)`; `switched` selects the post-`τ` barrier gain
    /// for the adaptive law and is ignored by the fixed law.
    pub fn evaluate(
        &self,
        model: &UncertaintyModel,
        t: f64,
        state: &PlantState,
        switched: bool,
    ) -> Result<ControlOutput> {
        let sv = sigma(&self.filter, state);
        let g_inv = model.input_matrix.inverse(state)?;
        let (gain, clamped) = match self.law {
            ControlLaw::Adaptive { epsilon, .. } if switched => {
                let kb = barrier_gain(sv.norm, epsilon);
                (kb.value, kb.clamped)
            }
            ControlLaw::Adaptive { d_overestimate, .. } => (self.reaching_gain(model, state, d_overestimate), false),
            ControlLaw::Smc => (self.reaching_gain(model, state, model.d_bound(t, state)), false),
        };
        // Negative sign in both regimes; see `adaptive_control`.
        let u = unit_vector_control(gain, &g_inv, &sv, self.tol_sigma);
        Ok(ControlOutput {
            u,
            gain,
            sigma: sv,
            clamped,
            singular: self.filter.is_singular(&state.x),
        })
    }

    fn reaching_gain(&self, model: &UncertaintyModel, state: &PlantState, d: f64) -> f64 {
        let vdot = self.filter.v_dot(&state.x, &state.xdot);
        self.gains.gain(rho(model.input_matrix.norm(state), d, &vdot))
    }
}

/// One evaluation of the adaptive law with in-place switching: latches `τ` if
/// this sample is the first with `‖σ‖ ≤ ε/2`, then returns the control.
///
/// The post-switch law is `u = −k_b G⁻¹σ/‖σ‖`; with a positive sign the barrier
/// gain would push `σ` outwards instead of containing it.
pub fn adaptive_control(
    adapt: AdaptiveGainState,
    controller: &Controller,
    model: &UncertaintyModel,
    t: f64,
    state: &PlantState,
) -> Result<(ControlOutput, AdaptiveGainState)> {
    let mut next = adapt;
    let sv = sigma(&controller.filter, state);
    next.observe(t, sv.norm);
    let out = controller.evaluate(model, t, state, next.switched())?;
    Ok((out, next))
}
