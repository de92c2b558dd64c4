//! Declarative scenario files.
//!
//! A scenario is a TOML document naming the plant, obstacle, workspace box,
//! filter, controller and simulation settings plus a list of initial
//! conditions. [`Scenario::from_toml_str`] parses it, [`Scenario::resolve`]
//! derives every constant the runs need, and [`ResolvedScenario::run`]
//! simulates and monitors each initial condition.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{compute_eta, ClassKGain, ObstacleCbf, StateBox};
use crate::monitors::{
    monitor_epsilon_containment, monitor_hc, monitor_reaching, monitor_safety, MonitorTolerances, MonitorVerdict,
};
use crate::plant::{
    check_disturbance_bound, check_input_uncertainty, AssumptionReport, Disturbance, DisturbanceBound, InputMatrix,
    InputUncertainty, PlantState, SampleGrid, SinArgument, UncertaintyModel,
};
use crate::safety_filter::FilterParams;
use crate::simulator::{batch_simulate, RunSpec, Scheme, SimConfig, Trajectory};
use crate::sliding_control::{
    kappa_safe_reaching, max_admissible_epsilon, sigma, AdaptiveGainState, ControlLaw, Controller, SmcGains,
};
use crate::{Error, Matrix, Vector};

/// Grid resolution per axis used when `eta = "computed"`.
pub const ETA_GRID: usize = 101;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: Error },
}

impl ScenarioError {
    fn invalid(path: impl Into<String>, source: Error) -> Self {
        Self::Invalid {
            path: path.into(),
            source,
        }
    }

    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub plant: PlantSpec,
    pub obstacle: ObstacleSpec,
    pub workspace: BoxSpec,
    pub filter: FilterSpec,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub monitors: ToleranceSpec,
    #[serde(default)]
    pub initial: Vec<InitialSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default)]
    pub input_matrix: InputMatrixSpec,
    #[serde(default)]
    pub input_uncertainty: InputUncertaintySpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub disturbance_bound: BoundSpec,
    pub mu: f64,
    pub gamma_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputMatrixSpec {
    #[default]
    Identity,
    ScaledIdentity {
        scale: f64,
    },
    Constant {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputUncertaintySpec {
    #[default]
    Zero,
    Constant {
        rows: Vec<Vec<f64>>,
    },
    OnesSin {
        amplitude: f64,
        #[serde(default)]
        argument: SinArgumentSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SinArgumentSpec {
    #[default]
    FirstComponent,
    Componentwise,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
    },
    PiecewiseSinusoidal {
        amplitude_before: f64,
        amplitude_after: f64,
        frequency: f64,
        switch_time: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundSpec {
    #[default]
    ExactNorm,
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub goal: Vec<f64>,
    pub alpha: f64,
    pub smoothing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Smc,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Literal(f64),
    Mode(EtaMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    SafeReaching,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Literal(f64),
    Mode(KappaMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    MaxAdmissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Literal(f64),
    Mode(EpsilonMode),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub law: LawKind,
    pub beta: f64,
    pub eta: EtaSpec,
    #[serde(default = "default_kappa")]
    pub kappa: KappaSpec,
    /// Safe-set relaxation `γ`; ignored by the fixed-gain law.
    #[serde(default)]
    pub gamma: f64,
    pub epsilon: Option<EpsilonSpec>,
    pub d_overestimate: Option<f64>,
}

fn default_kappa() -> KappaSpec {
    KappaSpec::Mode(KappaMode::SafeReaching)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: SchemeSpec,
    pub record_stride: usize,
    pub reach_tol: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt: d.dt,
            horizon: d.horizon,
            scheme: SchemeSpec::Rk4,
            record_stride: d.record_stride,
            reach_tol: d.reach_tol,
        }
    }
}

/// Optional overrides of the step-derived monitor tolerances.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub tol_h: Option<f64>,
    pub tol_reach: Option<f64>,
    pub tol_t: Option<f64>,
    pub tol_hc: Option<f64>,
    pub tol_eps_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub xdot: Option<Vec<f64>>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::schema(path, inner.message().trim().to_string())
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut sc = Self::from_toml_str(&text)?;
        if sc.name.is_empty() {
            sc.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(sc)
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ScenarioError> {
        resolve(self)
    }
}

/// Per-run constants derived from the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConstants {
    pub x0: Vec<f64>,
    pub xdot0: Vec<f64>,
    pub h0: f64,
    pub sigma0_norm: f64,
    pub kappa: f64,
    pub alpha_c: f64,
}

#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub initial: PlantState,
    pub constants: RunConstants,
    pub controller: Controller,
}

#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub spec: Scenario,
    pub model: UncertaintyModel,
    pub cbf: ObstacleCbf,
    pub workspace: StateBox,
    pub filter: FilterParams,
    pub law: LawKind,
    /// `η` used by the controller.
    pub eta: f64,
    /// `η` from the workspace grid, reported whatever the mode.
    pub eta_computed: f64,
    /// Relaxation `γ`; zero for the fixed-gain law.
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub sim: SimConfig,
    pub runs: Vec<ResolvedRun>,
}

fn vector(path: &str, v: &[f64], n: usize) -> Result<Vector, ScenarioError> {
    if v.len() != n {
        return Err(ScenarioError::invalid(
            path,
            Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            },
        ));
    }
    Ok(Vector::from_column_slice(v))
}

fn matrix(path: &str, rows: &[Vec<f64>], n: usize) -> Result<Matrix, ScenarioError> {
    if rows.len() != n {
        return Err(ScenarioError::invalid(
            path,
            Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            },
        ));
    }
    for (i, r) in rows.iter().enumerate() {
        vector(&format!("{path}[{i}]"), r, n)?;
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_model(p: &PlantSpec, n: usize) -> Result<UncertaintyModel, ScenarioError> {
    let g = match &p.input_matrix {
        InputMatrixSpec::Identity => InputMatrix::Identity,
        InputMatrixSpec::ScaledIdentity { scale } => InputMatrix::ScaledIdentity(*scale),
        InputMatrixSpec::Constant { rows } => InputMatrix::Constant(matrix("plant.input_matrix.rows", rows, n)?),
    };
    let db = match &p.input_uncertainty {
        InputUncertaintySpec::Zero => InputUncertainty::Zero,
        InputUncertaintySpec::Constant { rows } => {
            InputUncertainty::Constant(matrix("plant.input_uncertainty.rows", rows, n)?)
        }
        InputUncertaintySpec::OnesSin { amplitude, argument } => InputUncertainty::OnesSin {
            amplitude: *amplitude,
            argument: match argument {
                SinArgumentSpec::FirstComponent => SinArgument::FirstComponent,
                SinArgumentSpec::Componentwise => SinArgument::Componentwise,
            },
        },
    };
    let delta = match &p.disturbance {
        DisturbanceSpec::Zero => Disturbance::Zero,
        DisturbanceSpec::Constant { value } => Disturbance::Constant(vector("plant.disturbance.value", value, n)?),
        DisturbanceSpec::Sinusoidal { amplitude, frequency } => Disturbance::Sinusoidal {
            amplitude: *amplitude,
            frequency: *frequency,
        },
        DisturbanceSpec::PiecewiseSinusoidal {
            amplitude_before,
            amplitude_after,
            frequency,
            switch_time,
        } => Disturbance::PiecewiseSinusoidal {
            amplitude_before: *amplitude_before,
            amplitude_after: *amplitude_after,
            frequency: *frequency,
            switch_time: *switch_time,
        },
    };
    let bound = match &p.disturbance_bound {
        BoundSpec::ExactNorm => DisturbanceBound::ExactNorm,
        BoundSpec::Constant { value } => {
            if !(*value >= 0.0) {
                return Err(ScenarioError::invalid(
                    "plant.disturbance_bound.value",
                    Error::InvalidInput(format!("bound must be nonnegative, got {value}")),
                ));
            }
            DisturbanceBound::Constant(*value)
        }
    };
    UncertaintyModel::new(g, db, delta, bound, p.mu, p.gamma_db).map_err(|e| ScenarioError::invalid("plant", e))
}

fn resolve(sc: &Scenario) -> Result<ResolvedScenario, ScenarioError> {
    let n = sc.obstacle.center.len();
    if n == 0 {
        return Err(ScenarioError::invalid(
            "obstacle.center",
            Error::InvalidInput("empty center".into()),
        ));
    }
    let cbf = ObstacleCbf::new(vector("obstacle.center", &sc.obstacle.center, n)?, sc.obstacle.radius)
        .map_err(|e| ScenarioError::invalid("obstacle", e))?;
    let workspace = StateBox::new(
        vector("workspace.lower", &sc.workspace.lower, n)?,
        vector("workspace.upper", &sc.workspace.upper, n)?,
    )
    .map_err(|e| ScenarioError::invalid("workspace", e))?;
    let alpha = ClassKGain::new(sc.filter.alpha).map_err(|e| ScenarioError::invalid("filter.alpha", e))?;
    let filter = FilterParams::new(
        cbf.clone(),
        alpha,
        sc.filter.smoothing,
        vector("filter.goal", &sc.filter.goal, n)?,
    )
    .map_err(|e| ScenarioError::invalid("filter", e))?;
    let model = build_model(&sc.plant, n)?;

    let sim = SimConfig {
        dt: sc.sim.dt,
        horizon: sc.sim.horizon,
        scheme: match sc.sim.scheme {
            SchemeSpec::Rk4 => Scheme::Rk4,
            SchemeSpec::Euler => Scheme::ExplicitEuler,
        },
        reach_tol: sc.sim.reach_tol,
        record_stride: sc.sim.record_stride,
    };
    sim.validate().map_err(|e| ScenarioError::invalid("sim", e))?;

    let c = &sc.controller;
    let eta_computed = compute_eta(&cbf, &workspace, ETA_GRID).map_err(|e| ScenarioError::invalid("workspace", e))?;
    let eta = match c.eta {
        EtaSpec::Mode(EtaMode::Computed) => eta_computed,
        EtaSpec::Literal(v) if v >= 0.0 && v.is_finite() => v,
        EtaSpec::Literal(v) => {
            return Err(ScenarioError::invalid(
                "controller.eta",
                Error::InvalidInput(format!("eta must be nonnegative, got {v}")),
            ))
        }
    };

    let (gamma, epsilon, epsilon_max) = match c.law {
        LawKind::Smc => (0.0, None, None),
        LawKind::Adaptive => {
            let bound = max_admissible_epsilon(sc.filter.alpha, c.gamma, eta);
            let eps = match c.epsilon {
                None | Some(EpsilonSpec::Mode(EpsilonMode::MaxAdmissible)) => bound,
                Some(EpsilonSpec::Literal(v)) => v,
            };
            // Constructing the state runs the admissibility check.
            AdaptiveGainState::new(eps, c.gamma, sc.filter.alpha, eta)
                .map_err(|e| ScenarioError::invalid("controller.epsilon", e))?;
            (c.gamma, Some(eps), Some(bound))
        }
    };
    let law = match c.law {
        LawKind::Smc => ControlLaw::Smc,
        LawKind::Adaptive => {
            let d = c
                .d_overestimate
                .ok_or_else(|| ScenarioError::schema("controller.d_overestimate", "required by the adaptive law"))?;
            if !(d >= 0.0) {
                return Err(ScenarioError::invalid(
                    "controller.d_overestimate",
                    Error::InvalidInput(format!("must be nonnegative, got {d}")),
                ));
            }
            ControlLaw::Adaptive {
                epsilon: epsilon.unwrap_or_default(),
                d_overestimate: d,
            }
        }
    };

    let mut runs = Vec::with_capacity(sc.initial.len());
    for (i, ic) in sc.initial.iter().enumerate() {
        let path = format!("initial[{i}]");
        let x = vector(&format!("{path}.x"), &ic.x, n)?;
        let xdot = match &ic.xdot {
            Some(v) => vector(&format!("{path}.xdot"), v, n)?,
            None => Vector::zeros(n),
        };
        let initial = PlantState::new(x.clone(), xdot.clone()).map_err(|e| ScenarioError::invalid(&path, e))?;
        let h0 = cbf.eval(&x);
        let sv = sigma(&filter, &initial);
        let srg = kappa_safe_reaching(sc.filter.alpha, sv.norm, c.beta, h0, eta)
            .map_err(|e| ScenarioError::invalid(format!("{path}.x"), e))?;
        let kappa = match c.kappa {
            KappaSpec::Mode(KappaMode::SafeReaching) => srg.kappa,
            KappaSpec::Literal(k) => k,
        };
        let gains = SmcGains::new(kappa, sc.plant.mu, c.beta, srg.alpha_c)
            .map_err(|e| ScenarioError::invalid("controller.kappa", e))?;
        runs.push(ResolvedRun {
            constants: RunConstants {
                x0: x.iter().copied().collect(),
                xdot0: xdot.iter().copied().collect(),
                h0,
                sigma0_norm: sv.norm,
                kappa,
                alpha_c: srg.alpha_c,
            },
            controller: Controller::new(filter.clone(), gains, law),
            initial,
        });
    }

    Ok(ResolvedScenario {
        name: sc.name.clone(),
        spec: sc.clone(),
        model,
        cbf,
        workspace,
        filter,
        law: c.law,
        eta,
        eta_computed,
        gamma,
        epsilon,
        epsilon_max,
        sim,
        runs,
    })
}

/// Summary of one assumption checker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub holds: bool,
    pub samples: usize,
    pub violations: usize,
    pub max_observed: f64,
    pub min_slack: f64,
}

impl CheckSummary {
    fn from_report(name: &str, r: &AssumptionReport) -> Self {
        Self {
            name: name.to_string(),
            holds: r.holds(),
            samples: r.samples,
            violations: r.violations.len(),
            max_observed: r.max_observed,
            min_slack: r.min_slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    MonitorFailure,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub index: usize,
    pub constants: RunConstants,
    pub status: RunStatus,
    pub error: Option<String>,
    pub tau: Option<f64>,
    pub reach_time: Option<f64>,
    pub clamp_events: usize,
    pub singular_events: usize,
    pub final_position: Option<Vec<f64>>,
    pub min_h: Option<f64>,
    pub verdicts: Vec<MonitorVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub law: LawKind,
    pub eta: f64,
    pub eta_computed: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub runs: Vec<RunReport>,
}

impl ScenarioReport {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|r| r.status == RunStatus::Diverged)
    }

    pub fn all_pass(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Pass)
    }

    /// 0 when every monitor passes, 1 on a monitor failure, 3 on divergence.
    pub fn exit_code(&self) -> i32 {
        if self.any_diverged() {
            3
        } else if self.all_pass() {
            0
        } else {
            1
        }
    }
}

pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub trajectories: Vec<Option<Trajectory>>,
}

impl ResolvedScenario {
    /// Tolerances for a run with reaching constant `kappa`, after overrides.
    pub fn tolerances(&self, kappa: f64) -> MonitorTolerances {
        let mut t = MonitorTolerances::for_step(self.sim.dt, kappa);
        let o = &self.spec.monitors;
        if let Some(v) = o.tol_h {
            t.tol_h = v;
        }
        if let Some(v) = o.tol_reach {
            t.tol_reach = v;
        }
        if let Some(v) = o.tol_t {
            t.tol_t = v;
        }
        if let Some(v) = o.tol_hc {
            t.tol_hc = v;
        }
        if let Some(v) = o.tol_eps_rel {
            t.tol_eps_rel = v;
        }
        t
    }

    /// Monitors applicable to this scenario's law, evaluated on one run.
    pub fn verdicts(&self, run: &ResolvedRun, traj: &Trajectory) -> Vec<MonitorVerdict> {
        let k = &run.constants;
        let tol = self.tolerances(k.kappa);
        let mut out = vec![
            monitor_safety(traj, &self.cbf, self.gamma, tol.tol_h),
            monitor_reaching(traj, k.kappa, &tol),
        ];
        match monitor_hc(
            traj,
            &self.cbf,
            self.filter.alpha().alpha(),
            k.alpha_c,
            self.gamma,
            tol.tol_hc,
        ) {
            Ok(v) => out.push(v),
            Err(e) => out.push(MonitorVerdict {
                name: format!("h_c(gamma={})", self.gamma),
                pass: false,
                worst_margin: f64::NEG_INFINITY,
                worst_time: None,
                tolerance: tol.tol_hc,
                note: Some(e.to_string()),
            }),
        }
        if let Some(eps) = self.epsilon {
            out.push(monitor_epsilon_containment(traj, eps, tol.tol_eps_rel));
        }
        out
    }

    pub fn run(&self, parallel: bool) -> ScenarioOutcome {
        let specs: Vec<RunSpec> = self
            .runs
            .iter()
            .map(|r| RunSpec {
                controller: r.controller.clone(),
                initial: r.initial.clone(),
                gamma: self.gamma,
            })
            .collect();
        let results = batch_simulate(&self.model, &self.sim, &specs, parallel);
        let mut reports = Vec::with_capacity(results.len());
        let mut trajectories = Vec::with_capacity(results.len());
        for (index, (run, res)) in self.runs.iter().zip(results).enumerate() {
            let report = match &res {
                Ok(traj) => {
                    let verdicts = self.verdicts(run, traj);
                    let pass = verdicts.iter().all(|v| v.pass);
                    RunReport {
                        index,
                        constants: run.constants.clone(),
                        status: if pass {
                            RunStatus::Pass
                        } else {
                            RunStatus::MonitorFailure
                        },
                        error: None,
                        tau: traj.events.tau,
                        reach_time: traj.events.reach_time,
                        clamp_events: traj.events.clamp_times.len(),
                        singular_events: traj.events.singular_times.len(),
                        final_position: traj.final_position().map(|p| p.iter().copied().collect()),
                        min_h: traj.h.iter().copied().reduce(f64::min),
                        verdicts,
                    }
                }
                Err(e) => RunReport {
                    index,
                    constants: run.constants.clone(),
                    status: RunStatus::Diverged,
                    error: Some(e.to_string()),
                    tau: None,
                    reach_time: None,
                    clamp_events: 0,
                    singular_events: 0,
                    final_position: None,
                    min_h: None,
                    verdicts: Vec::new(),
                },
            };
            reports.push(report);
            trajectories.push(res.ok());
        }
        ScenarioOutcome {
            report: ScenarioReport {
                scenario: self.name.clone(),
                law: self.law,
                eta: self.eta,
                eta_computed: self.eta_computed,
                gamma: self.gamma,
                epsilon: self.epsilon,
                epsilon_max: self.epsilon_max,
                dt: self.sim.dt,
                horizon: self.sim.horizon,
                runs: reports,
            },
            trajectories,
        }
    }

    /// Assumption checkers over a `per_axis`² workspace grid and
    /// `time_samples` times on the horizon.
    pub fn check_assumptions(&self, per_axis: usize, time_samples: usize) -> Vec<CheckSummary> {
        let grid = SampleGrid::over_box(&self.workspace, per_axis, 0, 0, time_samples, self.sim.horizon);
        vec![
            CheckSummary::from_report("disturbance_bound", &check_disturbance_bound(&self.model, &grid)),
            CheckSummary::from_report("input_uncertainty", &check_input_uncertainty(&self.model, &grid)),
        ]
    }

    /// Human-readable dump of every derived constant.
    pub fn describe(&self, checks: &[CheckSummary]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(s, "law: {:?}", self.law);
        let _ = writeln!(s, "dimension: {}", self.filter.dim());
        let _ = writeln!(
            s,
            "eta: {:.6} ({})",
            self.eta,
            match self.spec.controller.eta {
                EtaSpec::Mode(_) => "computed",
                EtaSpec::Literal(_) => "literal",
            }
        );
        let _ = writeln!(s, "eta_computed: {:.6}", self.eta_computed);
        let _ = writeln!(s, "mu: {}", self.model.mu);
        let _ = writeln!(s, "gamma_db: {}", self.model.gamma_db);
        let _ = writeln!(s, "gamma: {}", self.gamma);
        if let (Some(e), Some(b)) = (self.epsilon, self.epsilon_max) {
            let _ = writeln!(s, "epsilon: {e:.6}");
            let _ = writeln!(s, "epsilon_max: {b:.6}");
        }
        let _ = writeln!(
            s,
            "dt: {}  horizon: {}  scheme: {:?}",
            self.sim.dt, self.sim.horizon, self.sim.scheme
        );
        for c in checks {
            let _ = writeln!(
                s,
                "check {}: {} ({} samples, {} violations, max {:.6}, min slack {:.6})",
                c.name,
                if c.holds { "holds" } else { "VIOLATED" },
                c.samples,
                c.violations,
                c.max_observed,
                c.min_slack
            );
        }
        let _ = writeln!(s, "runs: {}", self.runs.len());
        for (i, r) in self.runs.iter().enumerate() {
            let k = &r.constants;
            let _ = writeln!(
                s,
                "  [{i}] x0={:?} xdot0={:?} h0={:.6} |sigma0|={:.6} kappa={:.6} alpha_c={:.6}",
                k.x0, k.xdot0, k.h0, k.sigma0_norm, k.kappa, k.alpha_c
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BASE: &str = r#"
        name = "t"
        [plant]
        input_uncertainty = { kind = "ones_sin", amplitude = 0.25 }
        disturbance = { kind = "sinusoidal", amplitude = 5.0, frequency = 5.0 }
        mu = -0.5
        gamma_db = 0.5
        [obstacle]
        center = [2.0, 3.0]
        radius = 1.0
        [workspace]
        lower = [-3.0, 0.0]
        upper = [6.0, 6.0]
        [filter]
        goal = [3.0, 5.0]
        alpha = 1.0
        smoothing = 0.5
        [controller]
        law = "smc"
        beta = 0.1
        eta = 6.4031
        [[initial]]
        x = [1.0, 0.0]
    "#;

    fn adaptive(extra: &str) -> String {
        BASE.replace(
            "law = \"smc\"",
            &format!("law = \"adaptive\"\ngamma = 0.5\nd_overestimate = 20.0\n{extra}"),
        )
    }

    #[test]
    fn parses_and_resolves() {
        let r = Scenario::from_toml_str(BASE).unwrap().resolve().unwrap();
        assert_eq!(r.runs.len(), 1);
        assert_eq!(r.eta, 6.4031);
        assert_abs_diff_eq!(r.eta_computed, 2.0 * 34f64.sqrt(), epsilon = 1e-12);
        assert!(r.epsilon.is_none());
        let k = &r.runs[0].constants;
        assert_eq!(k.h0, 9.0);
        // κ − α_c η = (α/2)‖σ₀‖
        assert_abs_diff_eq!(k.kappa - k.alpha_c * r.eta, 0.5 * k.sigma0_norm, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_epsilon_resolves_to_max_admissible() {
        let r = Scenario::from_toml_str(&adaptive("")).unwrap().resolve().unwrap();
        assert_abs_diff_eq!(r.epsilon.unwrap(), 0.0781, epsilon = 5e-5);
    }

    #[test]
    fn literal_epsilon_above_bound_is_rejected() {
        let e = Scenario::from_toml_str(&adaptive("epsilon = 0.2"))
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(e.to_string().starts_with("controller.epsilon"), "{e}");
    }

    #[test]
    fn literal_epsilon_rounded_value_is_admitted() {
        let r = Scenario::from_toml_str(&adaptive("epsilon = 0.0781"))
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.epsilon, Some(0.0781));
    }

    #[test]
    fn initial_state_inside_obstacle_is_rejected() {
        let text = BASE.replace("x = [1.0, 0.0]", "x = [2.0, 3.5]");
        let e = Scenario::from_toml_str(&text).unwrap().resolve().unwrap_err();
        assert!(e.to_string().starts_with("initial[0].x"), "{e}");
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let text = BASE.replace("radius = 1.0", "radius = \"one\"");
        let e = Scenario::from_toml_str(&text).unwrap_err();
        assert!(
            matches!(&e, ScenarioError::Schema { path, .. } if path == "obstacle.radius"),
            "{e}"
        );

        let text = BASE.replace("kind = \"sinusoidal\"", "kind = \"sawtooth\"");
        let e = Scenario::from_toml_str(&text).unwrap_err();
        assert!(e.to_string().starts_with("plant.disturbance"), "{e}");

        let text = BASE.replace("beta = 0.1", "beta = 0.1\nbogus = 1");
        let e = Scenario::from_toml_str(&text).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn computed_eta_mode() {
        let text = BASE.replace("eta = 6.4031", "eta = \"computed\"");
        let r = Scenario::from_toml_str(&text).unwrap().resolve().unwrap();
        assert_abs_diff_eq!(r.eta, 2.0 * 34f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn literal_kappa_overrides() {
        let text = BASE.replace("eta = 6.4031", "eta = 6.4031\nkappa = 3.0");
        let r = Scenario::from_toml_str(&text).unwrap().resolve().unwrap();
        assert_eq!(r.runs[0].constants.kappa, 3.0);
    }

    #[test]
    fn empty_initial_list_is_valid() {
        let text = BASE.replace("[[initial]]\n        x = [1.0, 0.0]", "");
        let r = Scenario::from_toml_str(&text).unwrap().resolve().unwrap();
        assert!(r.runs.is_empty());
        assert!(r.describe(&[]).contains("runs: 0"));
    }

    #[test]
    fn dimension_mismatch_is_reported_with_path() {
        let text = BASE.replace("goal = [3.0, 5.0]", "goal = [3.0]");
        let e = Scenario::from_toml_str(&text).unwrap().resolve().unwrap_err();
        assert!(e.to_string().starts_with("filter.goal"), "{e}");
    }

    #[test]
    fn exit_code_precedence() {
        let mut rep = ScenarioReport {
            scenario: String::new(),
            law: LawKind::Smc,
            eta: 0.0,
            eta_computed: 0.0,
            gamma: 0.0,
            epsilon: None,
            epsilon_max: None,
            dt: 1e-3,
            horizon: 1.0,
            runs: vec![],
        };
        assert_eq!(rep.exit_code(), 0);
        let run = |status| RunReport {
            index: 0,
            constants: RunConstants {
                x0: vec![],
                xdot0: vec![],
                h0: 1.0,
                sigma0_norm: 0.0,
                kappa: 1.0,
                alpha_c: 1.0,
            },
            status,
            error: None,
            tau: None,
            reach_time: None,
            clamp_events: 0,
            singular_events: 0,
            final_position: None,
            min_h: None,
            verdicts: vec![],
        };
        rep.runs.push(run(RunStatus::MonitorFailure));
        assert_eq!(rep.exit_code(), 1);
        rep.runs.push(run(RunStatus::Diverged));
        assert_eq!(rep.exit_code(), 3);
    }
}
