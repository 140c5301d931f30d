//! A complete, runnable simulation description (always `f64`).

use std::path::PathBuf;

use crate::averaging::AveragedLoop;
use crate::baselines::{
    lie_bracket_baseline_rhs, two_dither_baseline_rhs, LieBracketBaselineParams,
    TwoDitherBaselineParams,
};
use crate::benchmarks::{
    flapping_system, mass_spring_system, pendulum_system, FlappingParams, MassSpringParams,
    PendulumParams, FLAPPING_PHIDOT,
};
use crate::error::{EscError, Result};
use crate::esc::EscClosedLoop;
use crate::gains::EscGains;
use crate::integrator::{simulate_partial, Trajectory, TrajectoryMeta, DEFAULT_STEPS_PER_PERIOD};
use crate::objective::Objective;
use crate::state::StateVector;
use crate::system::MechanicalSystem;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    MassSpring(MassSpringParams<f64>),
    Pendulum(PendulumParams<f64>),
    Flapping(FlappingParams<f64>),
}

impl PlantSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            PlantSpec::MassSpring(_) => "mass_spring",
            PlantSpec::Pendulum(_) => "pendulum",
            PlantSpec::Flapping(_) => "flapping",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            PlantSpec::Flapping(_) => 2,
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<MechanicalSystem<f64>> {
        match *self {
            PlantSpec::MassSpring(p) => mass_spring_system(p),
            PlantSpec::Pendulum(p) => pendulum_system(p),
            PlantSpec::Flapping(p) => flapping_system(p),
        }
    }
}

/// Quadratic objective `Σ (q_i - target_i)²` over `coordinates` (0-based),
/// or over every coordinate when `coordinates` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub target: Vec<f64>,
    pub coordinates: Option<Vec<usize>>,
}

impl ObjectiveSpec {
    pub fn quadratic(target: Vec<f64>) -> Self {
        Self {
            target,
            coordinates: None,
        }
    }

    /// `(index, target)` pairs.
    pub fn tracked(&self) -> Vec<(usize, f64)> {
        match &self.coordinates {
            None => self.target.iter().copied().enumerate().collect(),
            Some(idx) => idx
                .iter()
                .copied()
                .zip(self.target.iter().copied())
                .collect(),
        }
    }

    pub fn build(&self, n: usize) -> Result<Objective<f64>> {
        match &self.coordinates {
            None => {
                if self.target.len() != n {
                    return Err(EscError::DimensionMismatch {
                        field: "objective.target",
                        expected: n,
                        got: self.target.len(),
                    });
                }
                Ok(Objective::quadratic(&self.target))
            }
            Some(idx) => {
                if idx.len() != self.target.len() {
                    return Err(EscError::DimensionMismatch {
                        field: "objective.target",
                        expected: idx.len(),
                        got: self.target.len(),
                    });
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                    return Err(EscError::InvalidParameter {
                        field: "objective.coordinates",
                        reason: format!("coordinate {} out of range 1..={n}", bad + 1),
                    });
                }
                Ok(Objective::quadratic_on(n, &self.tracked()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerSpec {
    Proposed(EscGains<f64>),
    LieBracketBaseline(LieBracketBaselineParams<f64>),
    TwoDitherBaseline(TwoDitherBaselineParams<f64>),
}

impl ControllerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllerSpec::Proposed(_) => "proposed",
            ControllerSpec::LieBracketBaseline(_) => "lie_bracket_baseline",
            ControllerSpec::TwoDitherBaseline(_) => "two_dither_baseline",
        }
    }

    /// Period of the controller's periodic excitation.
    pub fn period(&self) -> f64 {
        match self {
            ControllerSpec::Proposed(g) => g.period(),
            ControllerSpec::LieBracketBaseline(p) => p.period(),
            ControllerSpec::TwoDitherBaseline(p) => p.period(),
        }
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU / self.period()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    Dt(f64),
    StepsPerPeriod(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSpec {
    pub t0: f64,
    pub tf: f64,
    pub step: StepSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub averaged: bool,
    pub stride: usize,
}

impl OutputSpec {
    /// `<name>.csv` and `<name>.svg`, every sample written.
    pub fn named(name: &str, averaged: bool) -> Self {
        Self {
            csv: Some(PathBuf::from(format!("{name}.csv"))),
            svg: Some(PathBuf::from(format!("{name}.svg"))),
            averaged,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub objective: ObjectiveSpec,
    pub controller: ControllerSpec,
    pub integration: IntegrationSpec,
    pub initial_state: StateVector<f64>,
    pub outputs: OutputSpec,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn proposed_gains(&self) -> Option<&EscGains<f64>> {
        match &self.controller {
            ControllerSpec::Proposed(g) => Some(g),
            _ => None,
        }
    }

    /// Integration step: explicit `dt`, or the controller period divided by
    /// `steps_per_period`.
    pub fn dt(&self) -> f64 {
        match self.integration.step {
            StepSpec::Dt(dt) => dt,
            StepSpec::StepsPerPeriod(k) => self.controller.period() / k as f64,
        }
    }

    /// Checks cross-field consistency. A step coarser than
    /// `T / 40` is refused in strict mode and only logged otherwise.
    pub fn validate(&self, strict: bool) -> Result<()> {
        let n = self.n();
        if self.initial_state.n() != n {
            return Err(EscError::DimensionMismatch {
                field: "initial_state",
                expected: 2 * n + 1,
                got: self.initial_state.dim(),
            });
        }
        if !self.initial_state.is_finite() {
            return Err(EscError::InvalidParameter {
                field: "initial_state",
                reason: "must be finite".into(),
            });
        }
        self.objective.build(n)?;
        self.plant.build()?;
        match &self.controller {
            ControllerSpec::Proposed(g) => {
                if g.n() != n {
                    return Err(EscError::DimensionMismatch {
                        field: "gains.C",
                        expected: n,
                        got: g.n(),
                    });
                }
            }
            ControllerSpec::LieBracketBaseline(p) => p.validate()?,
            ControllerSpec::TwoDitherBaseline(p) => p.validate()?,
        }
        let IntegrationSpec { t0, tf, .. } = self.integration;
        let dt = self.dt();
        if !(t0.is_finite() && tf.is_finite() && tf > t0 && dt > 0.0 && dt.is_finite()) {
            return Err(EscError::InvalidHorizon { t0, tf, dt });
        }
        if self.outputs.stride == 0 {
            return Err(EscError::InvalidParameter {
                field: "outputs.stride",
                reason: "must be at least 1".into(),
            });
        }
        let per_period = self.controller.period() / dt;
        if per_period < DEFAULT_STEPS_PER_PERIOD as f64 - 1e-9 {
            let msg = format!(
                "{per_period:.3} steps per dither period; at least {DEFAULT_STEPS_PER_PERIOD} are required"
            );
            if strict {
                return Err(EscError::InvalidParameter {
                    field: "integration.steps_per_period",
                    reason: msg,
                });
            }
            log::warn!("{}: {msg}", self.name);
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<MechanicalSystem<f64>> {
        self.plant.build()
    }

    pub fn build_objective(&self) -> Result<Objective<f64>> {
        self.objective.build(self.n())
    }

    /// The proposed closed loop. Fails for baseline controllers.
    pub fn build_loop(&self) -> Result<EscClosedLoop<f64>> {
        let gains = self
            .proposed_gains()
            .ok_or_else(|| EscError::InvalidParameter {
                field: "controller",
                reason: format!(
                    "`{}` is not the single-dither controller",
                    self.controller.kind()
                ),
            })?;
        EscClosedLoop::new(self.build_system()?, self.build_objective()?, gains.clone())
    }

    pub fn build_averaged(&self) -> Result<AveragedLoop<f64>> {
        Ok(AveragedLoop::new(self.build_loop()?))
    }

    /// Integrates the selected controller. On a step failure the samples
    /// reached so far come back with the error.
    pub fn simulate(&self) -> Result<(Trajectory<f64>, Option<EscError>)> {
        let IntegrationSpec { t0, tf, .. } = self.integration;
        let dt = self.dt();
        let x0 = self.initial_state.clone();
        let (traj, err) = match &self.controller {
            ControllerSpec::Proposed(_) => {
                let lp = self.build_loop()?;
                simulate_partial(
                    |x: &StateVector<f64>, t| lp.closed_loop_rhs(x, t),
                    x0,
                    t0,
                    tf,
                    dt,
                )?
            }
            ControllerSpec::LieBracketBaseline(p) => {
                let (sys, obj) = (self.build_system()?, self.build_objective()?);
                simulate_partial(
                    |x: &StateVector<f64>, t| lie_bracket_baseline_rhs(p, &sys, &obj, x, t),
                    x0,
                    t0,
                    tf,
                    dt,
                )?
            }
            ControllerSpec::TwoDitherBaseline(p) => {
                let (sys, obj) = (self.build_system()?, self.build_objective()?);
                simulate_partial(
                    |x: &StateVector<f64>, t| two_dither_baseline_rhs(p, &sys, &obj, x, t),
                    x0,
                    t0,
                    tf,
                    dt,
                )?
            }
        };
        Ok((self.stamp(traj), err))
    }

    /// Integrates the averaged system from the same initial state and grid.
    pub fn simulate_averaged(&self) -> Result<Trajectory<f64>> {
        let IntegrationSpec { t0, tf, .. } = self.integration;
        let avg = self.build_averaged()?;
        let traj = avg.simulate(self.initial_state.clone(), t0, tf, self.dt())?;
        Ok(self.stamp(traj))
    }

    fn stamp(&self, mut traj: Trajectory<f64>) -> Trajectory<f64> {
        traj.meta = TrajectoryMeta {
            dt: self.dt(),
            omega: Some(self.controller.omega()),
            scenario_id: self.name.clone(),
        };
        traj
    }

    /// Input channel reported as `u_applied`: the wing channel for the
    /// flapping plant, the first channel otherwise.
    pub fn applied_channel(&self) -> usize {
        match self.plant {
            PlantSpec::Flapping(_) => FLAPPING_PHIDOT,
            _ => 0,
        }
    }

    /// Physical input on [`Self::applied_channel`] at `(x, t)`.
    ///
    /// Proposed: `c_i û + a_i ω cos(ωt)`. Lie-bracket baseline: the integrated
    /// input `u`. Two-dither baseline: `u₁ + u₂`. With `averaged` set, the
    /// dither is dropped (`c₁ û̄`).
    pub fn applied_control(&self, x: &StateVector<f64>, t: f64, averaged: bool) -> Result<f64> {
        Ok(match &self.controller {
            ControllerSpec::Proposed(g) => {
                let i = self.applied_channel();
                let dither = if averaged {
                    0.0
                } else {
                    g.a()[i] * g.omega() * (g.omega() * t).cos()
                };
                g.c()[i] * x.uhat() + dither
            }
            ControllerSpec::LieBracketBaseline(_) => x.uhat(),
            ControllerSpec::TwoDitherBaseline(p) => {
                let j = self.build_objective()?.try_eval(x.q())?;
                let (u1, u2) = p.inputs(j, t);
                u1 + u2
            }
        })
    }
}
