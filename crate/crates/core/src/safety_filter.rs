//! Safety-critical velocity field for the single integrator `ẋ = v(x)`.
//!
//! The filter solves `min ‖v − v_des(x)‖²  s.t.  ∇h(x)·v ≥ −α h(x)` in closed
//! form, `v_safe = ν₀(ν₁(x)) ν₂(x)`, and replaces the kink of `ν₀` with the
//! C¹ ramp `ν_s` so that the sliding manifold built on `v` is smooth.

use std::f64::consts::PI;

use crate::cbf::{ClassKGain, ObstacleCbf};
use crate::{Error, Matrix, Result, Vector};

/// Everything that defines `v(x) = v_des(x) + v_safe^s(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    cbf: ObstacleCbf,
    alpha: ClassKGain,
    smoothing: f64,
    goal: Vector,
}

/// Residual and direction of the closed-form QP correction.
#[derive(Debug, Clone, PartialEq)]
pub struct NuComponents {
    /// `ν₁ = ∇h·v_des + α h`; the constraint is active when negative.
    pub nu1: f64,
    /// `ν₂ = −∇h / ‖∇h‖²`.
    pub nu2: Vector,
}

/// `ν₀(z) = min(z, 0)`.
pub fn nu0(z: f64) -> f64 {
    if z >= 0.0 {
        0.0
    } else {
        z
    }
}

/// Smooth approximation of [`nu0`] with transition width `s`.
pub fn nu_s(z: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "smoothing width must be positive, got {s}"
        )));
    }
    Ok(nu_s_unchecked(z, s))
}

fn nu_s_unchecked(z: f64, s: f64) -> f64 {
    if z >= 0.0 {
        0.0
    } else if z > -s {
        0.5 * z * (1.0 - (z * PI / s).cos())
    } else {
        z
    }
}

impl FilterParams {
    pub fn new(cbf: ObstacleCbf, alpha: ClassKGain, smoothing: f64, goal: Vector) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "smoothing width must be positive, got {smoothing}"
            )));
        }
        if goal.len() != cbf.dim() {
            return Err(Error::DimensionMismatch {
                expected: cbf.dim(),
                got: goal.len(),
            });
        }
        Ok(Self {
            cbf,
            alpha,
            smoothing,
            goal,
        })
    }

    pub fn cbf(&self) -> &ObstacleCbf {
        &self.cbf
    }

    pub fn alpha(&self) -> ClassKGain {
        self.alpha
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn goal(&self) -> &Vector {
        &self.goal
    }

    pub fn dim(&self) -> usize {
        self.goal.len()
    }

    /// Desired field `−(x − x_goal)`.
    pub fn v_des(&self, x: &Vector) -> Vector {
        &self.goal - x
    }

    /// `true` where `∇h(x) = 0` and the correction direction is undefined.
    pub fn is_singular(&self, x: &Vector) -> bool {
        self.cbf.grad(x).norm_squared() == 0.0
    }

    pub fn nu_components(&self, x: &Vector) -> Result<NuComponents> {
        let grad = self.cbf.grad(x);
        let g2 = grad.norm_squared();
        if g2 == 0.0 {
            return Err(Error::SingularGradient);
        }
        let nu1 = grad.dot(&self.v_des(x)) + self.alpha.apply(self.cbf.eval(x));
        Ok(NuComponents { nu1, nu2: grad / -g2 })
    }

    /// Exact QP correction `ν₀(ν₁)ν₂`: zero unless `ν₁ < 0`.
    pub fn v_safe_raw(&self, x: &Vector) -> Result<Vector> {
        let nu = self.nu_components(x)?;
        Ok(nu.nu2 * nu0(nu.nu1))
    }

    pub fn v_safe_smooth(&self, x: &Vector) -> Result<Vector> {
        let nu = self.nu_components(x)?;
        Ok(nu.nu2 * nu_s_unchecked(nu.nu1, self.smoothing))
    }

    /// `v(x) = v_des(x) + v_safe^s(x)`, erroring at the obstacle center.
    pub fn v_total_checked(&self, x: &Vector) -> Result<Vector> {
        Ok(self.v_des(x) + self.v_safe_smooth(x)?)
    }

    /// `v(x)` with the correction taken as zero where `∇h(x) = 0`.
    ///
    /// That point lies strictly inside the obstacle; callers that care use
    /// [`FilterParams::is_singular`] to flag it.
    pub fn v_total(&self, x: &Vector) -> Vector {
        match self.v_safe_smooth(x) {
            Ok(corr) => self.v_des(x) + corr,
            Err(_) => self.v_des(x),
        }
    }

    /// Jacobian of [`FilterParams::v_total`] by central differences with step
    /// `1e−6·max(1, ‖x‖)`.
    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let n = x.len();
        let step = 1e-6 * x.norm().max(1.0);
        let mut jac = Matrix::zeros(n, n);
        let mut probe = x.clone();
        for j in 0..n {
            probe[j] = x[j] + step;
            let fwd = self.v_total(&probe);
            probe[j] = x[j] - step;
            let bwd = self.v_total(&probe);
            probe[j] = x[j];
            jac.set_column(j, &((fwd - bwd) / (2.0 * step)));
        }
        jac
    }

    /// `v̇ = J_v(x)·ẋ` along a trajectory.
    pub fn v_dot(&self, x: &Vector, xdot: &Vector) -> Vector {
        self.jacobian(x) * xdot
    }
}
