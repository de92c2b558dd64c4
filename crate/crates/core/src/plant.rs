//! Uncertain double integrator `ẍ = G(x)((I + Δ_b(t,x))u + δ(t,x))`.
//!
//! The uncertainty terms come from a small catalog (constant, sinusoidal,
//! piecewise-sinusoidal, all-ones-matrix-scaled) plus a `Custom` escape hatch
//! for library users. Catalog entries are plain data; custom entries must be
//! pure and reentrant since trajectories are simulated in parallel.

use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbf::StateBox;
use crate::{spectral_norm, Error, Matrix, Result, Vector};

/// Position and velocity `(x, ẋ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: Vector,
    pub xdot: Vector,
}

impl PlantState {
    pub fn new(x: Vector, xdot: Vector) -> Result<Self> {
        if x.len() != xdot.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: xdot.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::InvalidInput("state has dimension 0".into()));
        }
        Ok(Self { x, xdot })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xdot.iter()).all(|v| v.is_finite())
    }
}

type MatrixFn = Arc<dyn Fn(f64, &PlantState) -> Matrix + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, &PlantState) -> Vector + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64, &PlantState) -> f64 + Send + Sync>;

/// Input matrix `G(x)`.
#[derive(Clone)]
pub enum InputMatrix {
    Identity,
    ScaledIdentity(f64),
    Constant(Matrix),
    Custom(Arc<dyn Fn(&PlantState) -> Matrix + Send + Sync>),
}

/// Which argument of `sin` scales the all-ones uncertainty matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinArgument {
    /// `a·sin(x₁)·1ₙₓₙ`.
    FirstComponent,
    /// Row `i` scaled by `a·sin(xᵢ)`.
    Componentwise,
}

/// Multiplicative input uncertainty `Δ_b(t, x)`.
#[derive(Clone)]
pub enum InputUncertainty {
    Zero,
    Constant(Matrix),
    OnesSin { amplitude: f64, argument: SinArgument },
    Custom(MatrixFn),
}

/// Matched additive disturbance `δ(t, x)`.
#[derive(Clone)]
pub enum Disturbance {
    Zero,
    Constant(Vector),
    /// `a·sin(ω t)·1ₙ`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
    },
    /// `a₀·sin(ω t)·1ₙ` for `t ≤ t_s`, `a₁·sin(ω t)·1ₙ` afterwards.
    PiecewiseSinusoidal {
        amplitude_before: f64,
        amplitude_after: f64,
        frequency: f64,
        switch_time: f64,
    },
    Custom(VectorFn),
}

/// Known bound `d(t, x) ≥ ‖δ(t, x)‖`.
#[derive(Clone)]
pub enum DisturbanceBound {
    /// `d = ‖δ(t, x)‖` (tight).
    ExactNorm,
    Constant(f64),
    Custom(ScalarFn),
}

impl fmt::Debug for InputMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::ScaledIdentity(s) => write!(f, "ScaledIdentity({s})"),
            Self::Constant(m) => write!(f, "Constant({m:?})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for InputUncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(m) => write!(f, "Constant({m:?})"),
            Self::OnesSin { amplitude, argument } => {
                write!(f, "OnesSin {{ amplitude: {amplitude}, argument: {argument:?} }}")
            }
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for Disturbance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(v) => write!(f, "Constant({v:?})"),
            Self::Sinusoidal { amplitude, frequency } => {
                write!(f, "Sinusoidal {{ amplitude: {amplitude}, frequency: {frequency} }}")
            }
            Self::PiecewiseSinusoidal {
                amplitude_before,
                amplitude_after,
                frequency,
                switch_time,
            } => write!(
                f,
                "PiecewiseSinusoidal {{ amplitude_before: {amplitude_before}, amplitude_after: {amplitude_after}, frequency: {frequency}, switch_time: {switch_time} }}"
            ),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for DisturbanceBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExactNorm => write!(f, "ExactNorm"),
            Self::Constant(d) => write!(f, "Constant({d})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl InputMatrix {
    pub fn eval(&self, state: &PlantState) -> Matrix {
        let n = state.dim();
        match self {
            Self::Identity => Matrix::identity(n, n),
            Self::ScaledIdentity(s) => Matrix::identity(n, n) * *s,
            Self::Constant(m) => m.clone(),
            Self::Custom(f) => f(state),
        }
    }

    pub fn inverse(&self, state: &PlantState) -> Result<Matrix> {
        let n = state.dim();
        match self {
            Self::Identity => Ok(Matrix::identity(n, n)),
            Self::ScaledIdentity(s) if *s != 0.0 => Ok(Matrix::identity(n, n) / *s),
            Self::ScaledIdentity(_) => Err(Error::SingularInputMatrix),
            _ => self.eval(state).try_inverse().ok_or(Error::SingularInputMatrix),
        }
    }

    /// Spectral norm `‖G(x)‖`.
    pub fn norm(&self, state: &PlantState) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::ScaledIdentity(s) => s.abs(),
            _ => spectral_norm(&self.eval(state)),
        }
    }
}

impl InputUncertainty {
    pub fn eval(&self, t: f64, state: &PlantState) -> Matrix {
        let n = state.dim();
        match self {
            Self::Zero => Matrix::zeros(n, n),
            Self::Constant(m) => m.clone(),
            Self::OnesSin { amplitude, argument } => match argument {
                SinArgument::FirstComponent => Matrix::from_element(n, n, amplitude * state.x[0].sin()),
                SinArgument::Componentwise => Matrix::from_fn(n, n, |i, _| amplitude * state.x[i].sin()),
            },
            Self::Custom(f) => f(t, state),
        }
    }
}

impl Disturbance {
    pub fn eval(&self, t: f64, state: &PlantState) -> Vector {
        let n = state.dim();
        match self {
            Self::Zero => Vector::zeros(n),
            Self::Constant(v) => v.clone(),
            Self::Sinusoidal { amplitude, frequency } => Vector::from_element(n, amplitude * (frequency * t).sin()),
            Self::PiecewiseSinusoidal {
                amplitude_before,
                amplitude_after,
                frequency,
                switch_time,
            } => {
                let a = if t <= *switch_time {
                    amplitude_before
                } else {
                    amplitude_after
                };
                Vector::from_element(n, a * (frequency * t).sin())
            }
            Self::Custom(f) => f(t, state),
        }
    }
}

/// The uncertain plant together with the constants of its standing assumptions.
#[derive(Debug, Clone)]
pub struct UncertaintyModel {
    pub input_matrix: InputMatrix,
    pub input_uncertainty: InputUncertainty,
    pub disturbance: Disturbance,
    pub disturbance_bound: DisturbanceBound,
    /// Lower bound on `λ_min` of the symmetric part of `G Δ_b G⁻¹`; must exceed −1.
    pub mu: f64,
    /// Bound on `‖Δ_b‖`; must be below 1.
    pub gamma_db: f64,
}

impl UncertaintyModel {
    pub fn new(
        input_matrix: InputMatrix,
        input_uncertainty: InputUncertainty,
        disturbance: Disturbance,
        disturbance_bound: DisturbanceBound,
        mu: f64,
        gamma_db: f64,
    ) -> Result<Self> {
        if !(mu > -1.0) {
            return Err(Error::InvalidInput(format!("mu must exceed -1, got {mu}")));
        }
        if !(0.0..1.0).contains(&gamma_db) {
            return Err(Error::InvalidInput(format!(
                "input uncertainty bound must lie in [0, 1), got {gamma_db}"
            )));
        }
        Ok(Self {
            input_matrix,
            input_uncertainty,
            disturbance,
            disturbance_bound,
            mu,
            gamma_db,
        })
    }

    /// Nominal plant: `G = I`, no uncertainty, no disturbance.
    pub fn nominal() -> Self {
        Self {
            input_matrix: InputMatrix::Identity,
            input_uncertainty: InputUncertainty::Zero,
            disturbance: Disturbance::Zero,
            disturbance_bound: DisturbanceBound::Constant(0.0),
            mu: 0.0,
            gamma_db: 0.0,
        }
    }

    pub fn d_bound(&self, t: f64, state: &PlantState) -> f64 {
        match &self.disturbance_bound {
            DisturbanceBound::ExactNorm => self.disturbance.eval(t, state).norm(),
            DisturbanceBound::Constant(d) => *d,
            DisturbanceBound::Custom(f) => f(t, state),
        }
    }

    /// `ẍ` under control `u`.
    pub fn acceleration(&self, t: f64, state: &PlantState, u: &Vector) -> Result<Vector> {
        if u.len() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.dim(),
                got: u.len(),
            });
        }
        let g = self.input_matrix.eval(state);
        if g.clone().try_inverse().is_none() {
            return Err(Error::SingularInputMatrix);
        }
        let db = self.input_uncertainty.eval(t, state);
        let delta = self.disturbance.eval(t, state);
        Ok(g * (u + db * u + delta))
    }

    /// State derivative `(ẋ, ẍ)`.
    pub fn closed_loop_rhs(&self, t: f64, state: &PlantState, u: &Vector) -> Result<(Vector, Vector)> {
        Ok((state.xdot.clone(), self.acceleration(t, state, u)?))
    }
}

/// Sample set for the assumption checkers: positions from a box grid (plus
/// optional seeded random draws), a fixed list of velocities, and time samples.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
    pub times: Vec<f64>,
}

impl SampleGrid {
    /// `per_axis`ⁿ grid positions, `random` extra uniform positions drawn with
    /// `seed`, zero velocity, and `time_samples` uniform times on `[0, horizon]`.
    pub fn over_box(
        bx: &StateBox,
        per_axis: usize,
        random: usize,
        seed: u64,
        time_samples: usize,
        horizon: f64,
    ) -> Self {
        let mut positions = bx.grid(per_axis);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            positions.push(Vector::from_iterator(
                bx.dim(),
                (0..bx.dim()).map(|i| {
                    let (lo, hi) = (bx.lower()[i], bx.upper()[i]);
                    if hi > lo {
                        rng.gen_range(lo..=hi)
                    } else {
                        lo
                    }
                }),
            ));
        }
        let times = match time_samples {
            0 => Vec::new(),
            1 => vec![0.0],
            m => (0..m).map(|k| horizon * k as f64 / (m - 1) as f64).collect(),
        };
        Self {
            positions,
            velocities: vec![Vector::zeros(bx.dim())],
            times,
        }
    }

    fn for_each(&self, mut f: impl FnMut(f64, &PlantState)) {
        for &t in &self.times {
            for x in &self.positions {
                for v in &self.velocities {
                    let state = PlantState {
                        x: x.clone(),
                        xdot: v.clone(),
                    };
                    f(t, &state);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub what: &'static str,
    pub t: f64,
    pub x: Vector,
    pub xdot: Vector,
    /// Observed quantity.
    pub value: f64,
    /// Bound it should respect.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Largest observed `‖δ‖` (first assumption) or `‖Δ_b‖` (second).
    pub max_observed: f64,
    /// Smallest observed slack (bound − value) across samples.
    pub min_slack: f64,
    /// Smallest symmetric-part eigenvalue seen (second assumption only).
    pub min_eigenvalue: Option<f64>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `‖δ(t, x)‖ ≤ d(t, x)` on every sample.
pub fn check_disturbance_bound(model: &UncertaintyModel, grid: &SampleGrid) -> AssumptionReport {
    bound_report(model, grid, |t, s| model.d_bound(t, s))
}

/// Same check against a constant overestimate `d̄` (used before the adaptive
/// gain switches).
pub fn check_overestimate(model: &UncertaintyModel, grid: &SampleGrid, d_bar: f64) -> AssumptionReport {
    bound_report(model, grid, |_, _| d_bar)
}

fn bound_report(
    model: &UncertaintyModel,
    grid: &SampleGrid,
    bound: impl Fn(f64, &PlantState) -> f64,
) -> AssumptionReport {
    let mut report = AssumptionReport {
        samples: 0,
        violations: Vec::new(),
        max_observed: 0.0,
        min_slack: f64::INFINITY,
        min_eigenvalue: None,
    };
    grid.for_each(|t, state| {
        report.samples += 1;
        let value = model.disturbance.eval(t, state).norm();
        let d = bound(t, state);
        report.max_observed = report.max_observed.max(value);
        report.min_slack = report.min_slack.min(d - value);
        if !(value <= d) {
            report.violations.push(Violation {
                what: "disturbance norm exceeds bound",
                t,
                x: state.x.clone(),
                xdot: state.xdot.clone(),
                value,
                bound: d,
            });
        }
    });
    report
}

/// Checks `‖Δ_b‖ ≤ γ < 1` and `λ_min(½(GΔ_bG⁻¹ + (GΔ_bG⁻¹)ᵀ)) ≥ μ` on every sample.
pub fn check_input_uncertainty(model: &UncertaintyModel, grid: &SampleGrid) -> AssumptionReport {
    let mut report = AssumptionReport {
        samples: 0,
        violations: Vec::new(),
        max_observed: 0.0,
        min_slack: f64::INFINITY,
        min_eigenvalue: Some(f64::INFINITY),
    };
    let gamma = model.gamma_db;
    let mu = model.mu;
    grid.for_each(|t, state| {
        report.samples += 1;
        let db = model.input_uncertainty.eval(t, state);
        let norm = spectral_norm(&db);
        report.max_observed = report.max_observed.max(norm);
        report.min_slack = report.min_slack.min(gamma - norm);
        if !(norm <= gamma && gamma < 1.0) {
            report.violations.push(Violation {
                what: "input uncertainty norm exceeds gamma (or gamma >= 1)",
                t,
                x: state.x.clone(),
                xdot: state.xdot.clone(),
                value: norm,
                bound: gamma,
            });
        }
        let g = model.input_matrix.eval(state);
        let Some(g_inv) = g.clone().try_inverse() else {
            report.violations.push(Violation {
                what: "input matrix is singular",
                t,
                x: state.x.clone(),
                xdot: state.xdot.clone(),
                value: 0.0,
                bound: 0.0,
            });
            return;
        };
        let m = &g * db * g_inv;
        let sym = (&m + m.transpose()) * 0.5;
        let lambda_min = SymmetricEigen::new(sym).eigenvalues.min();
        if let Some(e) = report.min_eigenvalue.as_mut() {
            *e = e.min(lambda_min);
        }
        report.min_slack = report.min_slack.min(lambda_min - mu);
        if !(lambda_min >= mu) {
            report.violations.push(Violation {
                what: "symmetric part eigenvalue below mu",
                t,
                x: state.x.clone(),
                xdot: state.xdot.clone(),
                value: lambda_min,
                bound: mu,
            });
        }
    });
    report
}
