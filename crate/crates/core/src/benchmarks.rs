//! Benchmark plants: mass-spring-damper (linear or cubic damping), inverted
//! pendulum and the two-degree-of-freedom flapping hover model.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{LieBracketBaselineParams, TwoDitherBaselineParams};
use crate::error::{EscError, Result};
use crate::esc::EscClosedLoop;
use crate::gains::EscGains;
use crate::objective::Objective;
use crate::scalar::{sign0, Real};
use crate::scenario::{
    ControllerSpec, IntegrationSpec, ObjectiveSpec, OutputSpec, PlantSpec, Scenario, StepSpec,
};
use crate::state::StateVector;
use crate::system::MechanicalSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    Linear,
    Cubic,
}

impl Damping {
    pub fn as_str(self) -> &'static str {
        match self {
            Damping::Linear => "linear",
            Damping::Cubic => "cubic",
        }
    }
}

impl FromStr for Damping {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Damping::Linear),
            "cubic" => Ok(Damping::Cubic),
            other => Err(format!(
                "unknown damping `{other}` (expected linear or cubic)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpringParams<T> {
    pub m: T,
    pub alpha: T,
    pub beta: T,
    pub damping: Damping,
}

impl<T: Real> MassSpringParams<T> {
    /// `m = 1 kg`, `α = 20 N/m`, `β = 2 N·s/m`, linear damping.
    pub fn published() -> Self {
        Self {
            m: T::one(),
            alpha: T::lit(20.0),
            beta: T::lit(2.0),
            damping: Damping::Linear,
        }
    }

    pub fn cubic(self) -> Self {
        Self {
            damping: Damping::Cubic,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.m > T::zero(), "m", "mass must be positive")?;
        require(
            self.alpha >= T::zero(),
            "alpha",
            "stiffness must be non-negative",
        )?;
        require(
            self.beta >= T::zero(),
            "beta",
            "damping must be non-negative",
        )
    }
}

/// `-(α/m) q - (β/m) q̇` (linear) or `-(α/m) q - (β/m) q̇³` (cubic).
pub fn mass_spring_drift<T: Real>(p: &MassSpringParams<T>, q: T, qdot: T) -> T {
    let damping = match p.damping {
        Damping::Linear => qdot,
        Damping::Cubic => qdot * qdot * qdot,
    };
    -(p.alpha / p.m) * q - (p.beta / p.m) * damping
}

pub fn mass_spring_system<T: Real>(p: MassSpringParams<T>) -> Result<MechanicalSystem<T>> {
    p.validate()?;
    let name = format!("mass_spring_{}", p.damping.as_str());
    let sys = MechanicalSystem::new(name, 1, move |q: &[T], v: &[T]| {
        vec![mass_spring_drift(&p, q[0], v[0])]
    })?
    .with_velocity_jacobian(move |_, v: &[T]| {
        let d = match p.damping {
            Damping::Linear => T::one(),
            Damping::Cubic => T::lit(3.0) * v[0] * v[0],
        };
        vec![-(p.beta / p.m) * d]
    })
    .with_velocity_hessian(move |_, v: &[T]| {
        let d = match p.damping {
            Damping::Linear => T::zero(),
            Damping::Cubic => T::lit(6.0) * v[0],
        };
        vec![-(p.beta / p.m) * d]
    });
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams<T> {
    pub m: T,
    pub length: T,
    pub g: T,
    pub beta: T,
}

impl<T: Real> PendulumParams<T> {
    /// `m = 1 kg`, `L = 1 m`, `g = 9.81 m/s²`, `β = 10 N·s/m`.
    pub fn published() -> Self {
        Self {
            m: T::one(),
            length: T::one(),
            g: T::lit(9.81),
            beta: T::lit(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.m > T::zero(), "m", "mass must be positive")?;
        require(self.length > T::zero(), "length", "length must be positive")
    }
}

/// Inverted pendulum: `(g/L) sin θ - β/(mL) θ̇`. Upright is `θ = 0`.
pub fn pendulum_drift<T: Real>(p: &PendulumParams<T>, theta: T, thetadot: T) -> T {
    (p.g / p.length) * theta.sin() - p.beta / (p.m * p.length) * thetadot
}

pub fn pendulum_system<T: Real>(p: PendulumParams<T>) -> Result<MechanicalSystem<T>> {
    p.validate()?;
    let sys = MechanicalSystem::new("pendulum", 1, move |q: &[T], v: &[T]| {
        vec![pendulum_drift(&p, q[0], v[0])]
    })?
    .with_velocity_jacobian(move |_, _| vec![-p.beta / (p.m * p.length)])
    .with_velocity_hessian(|_, _| vec![T::zero()]);
    Ok(sys)
}

/// Flapping hover model. Coordinates are `q = [z, φ]`, velocities
/// `q̇ = [ż, φ̇]`.
///
/// `z` enters with `+g`, so positive `z` points down. The equations are used
/// as written; the objective tracks `z` directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlappingParams<T> {
    /// Wing flapping moment of inertia `I_F`.
    pub inertia: T,
    pub kd1: T,
    pub k_lift: T,
    pub kd2: T,
    pub kd3: T,
    pub g: T,
    pub flap_freq_hz: T,
}

impl<T: Real> FlappingParams<T> {
    /// Hawkmoth-scale coefficients, flapping at 26.3 Hz.
    pub fn published() -> Self {
        Self {
            inertia: T::lit(1.3179e-7),
            kd1: T::lit(0.0353739),
            k_lift: T::lit(0.000621676),
            kd2: T::lit(0.33915),
            kd3: T::lit(16.5766),
            g: T::lit(9.81),
            flap_freq_hz: T::lit(26.3),
        }
    }

    /// `ω = 2π f`.
    pub fn omega(&self) -> T {
        T::TAU() * self.flap_freq_hz
    }

    pub fn validate(&self) -> Result<()> {
        require(self.inertia > T::zero(), "inertia", "I_F must be positive")?;
        for (v, field) in [
            (self.kd1, "kd1"),
            (self.k_lift, "k_lift"),
            (self.kd2, "kd2"),
            (self.kd3, "kd3"),
        ] {
            require(
                v >= T::zero(),
                field,
                "aerodynamic coefficients must be non-negative",
            )?;
        }
        require(
            self.flap_freq_hz > T::zero(),
            "flap_freq_hz",
            "flapping frequency must be positive",
        )
    }
}

/// `[-k_d1 |φ̇| ż + g - k_L φ̇²; -k_d3 ż φ̇ - k_d2 |φ̇| φ̇]`.
pub fn flapping_drift<T: Real>(p: &FlappingParams<T>, zdot: T, phidot: T) -> [T; 2] {
    let abs_phi = phidot.abs();
    [
        -p.kd1 * abs_phi * zdot + p.g - p.k_lift * phidot * phidot,
        -p.kd3 * zdot * phidot - p.kd2 * abs_phi * phidot,
    ]
}

/// Velocity index of `φ̇` in the flapping model.
pub const FLAPPING_PHIDOT: usize = 1;

pub fn flapping_system<T: Real>(p: FlappingParams<T>) -> Result<MechanicalSystem<T>> {
    p.validate()?;
    let sys = MechanicalSystem::new("flapping", 2, move |_: &[T], v: &[T]| {
        flapping_drift(&p, v[0], v[1]).to_vec()
    })?
    .with_velocity_jacobian(move |_, v: &[T]| {
        let (zd, pd) = (v[0], v[1]);
        let s = sign0(pd);
        let two = T::lit(2.0);
        vec![
            -p.kd1 * pd.abs(),
            -p.kd1 * s * zd - two * p.k_lift * pd,
            -p.kd3 * pd,
            -p.kd3 * zd - two * p.kd2 * pd.abs(),
        ]
    })
    .with_velocity_hessian(move |_, v: &[T]| {
        // layout (i * 2 + k) * 2 + j
        let s = sign0(v[1]);
        let two = T::lit(2.0);
        let z = T::zero();
        vec![
            z,
            -p.kd1 * s,
            -p.kd1 * s,
            -two * p.k_lift,
            z,
            -p.kd3,
            -p.kd3,
            -two * p.kd2 * s,
        ]
    })
    .with_nonsmooth_guard(|_, v: &[T], margin: T| {
        (v[FLAPPING_PHIDOT].abs() <= margin).then_some(FLAPPING_PHIDOT)
    });
    Ok(sys)
}

/// `q̈ = q̇³`: violates the quadratic-in-velocity requirement. Used to show
/// that the third-order bracket check rejects such plants.
pub fn cubic_velocity_test_plant<T: Real>() -> MechanicalSystem<T> {
    MechanicalSystem::new("cubic_velocity", 1, |_: &[T], v: &[T]| {
        vec![v[0] * v[0] * v[0]]
    })
    .expect("n = 1")
}

pub fn mass_spring_loop<T: Real>(
    p: MassSpringParams<T>,
    target: T,
    gains: EscGains<T>,
) -> Result<EscClosedLoop<T>> {
    EscClosedLoop::new(
        mass_spring_system(p)?,
        Objective::quadratic(&[target]),
        gains,
    )
}

pub fn pendulum_loop<T: Real>(
    p: PendulumParams<T>,
    target: T,
    gains: EscGains<T>,
) -> Result<EscClosedLoop<T>> {
    EscClosedLoop::new(pendulum_system(p)?, Objective::quadratic(&[target]), gains)
}

/// Height seeking: `J = (z - z*)²`, independent of `φ`.
pub fn flapping_loop<T: Real>(
    p: FlappingParams<T>,
    target_z: T,
    gains: EscGains<T>,
) -> Result<EscClosedLoop<T>> {
    EscClosedLoop::new(
        flapping_system(p)?,
        Objective::quadratic_on(2, &[(0, target_z)]),
        gains,
    )
}

/// Dither amplitudes `[a_1 / I_F, a_2 / I_F]` for the flapping loop.
pub fn flapping_dither_amplitudes<T: Real>(p: &FlappingParams<T>) -> Vec<T> {
    vec![T::lit(5.322e-13) / p.inertia, T::lit(2.575e-5) / p.inertia]
}

pub fn flapping_gains<T: Real>(p: &FlappingParams<T>) -> Result<EscGains<T>> {
    EscGains::new(
        vec![T::lit(0.15), T::one()],
        flapping_dither_amplitudes(p),
        T::lit(7.12e3),
        p.omega(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    MassSpring,
    MassSpringCubic,
    Pendulum,
    Flapping,
    ComparisonGrushkovskaya,
    ComparisonSuttner,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        ScenarioName::MassSpring,
        ScenarioName::MassSpringCubic,
        ScenarioName::Pendulum,
        ScenarioName::Flapping,
        ScenarioName::ComparisonGrushkovskaya,
        ScenarioName::ComparisonSuttner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::MassSpring => "mass_spring",
            ScenarioName::MassSpringCubic => "mass_spring_cubic",
            ScenarioName::Pendulum => "pendulum",
            ScenarioName::Flapping => "flapping",
            ScenarioName::ComparisonGrushkovskaya => "comparison_grushkovskaya",
            ScenarioName::ComparisonSuttner => "comparison_suttner",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = EscError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| EscError::UnknownScenario {
                name: s.to_string(),
                valid: Self::ALL.map(|n| n.as_str()).join(", "),
            })
    }
}

/// Horizon of the mass-spring, cubic and pendulum runs (s).
pub const CLASSIC_HORIZON: f64 = 30.0;
/// Horizon of the flapping run (s).
pub const FLAPPING_HORIZON: f64 = 40.0;
/// Horizon of the low-frequency Lie-bracket comparison run (s).
pub const GRUSHKOVSKAYA_HORIZON: f64 = 300.0;

/// Fully populated scenario with the published parameters.
pub fn scenario_defaults(name: ScenarioName) -> Scenario {
    let name_str = name.as_str().to_string();
    let classic = |tf: f64| IntegrationSpec {
        t0: 0.0,
        tf,
        step: StepSpec::StepsPerPeriod(crate::integrator::DEFAULT_STEPS_PER_PERIOD),
    };
    let outputs = OutputSpec::named(&name_str, true);
    let state = |q: &[f64], qd: &[f64]| StateVector::pack(q, qd, 0.0).expect("matching lengths");
    match name {
        ScenarioName::MassSpring | ScenarioName::MassSpringCubic => {
            let params = if name == ScenarioName::MassSpring {
                MassSpringParams::published()
            } else {
                MassSpringParams::published().cubic()
            };
            Scenario {
                name: name_str,
                plant: PlantSpec::MassSpring(params),
                objective: ObjectiveSpec::quadratic(vec![1.0]),
                controller: ControllerSpec::Proposed(
                    EscGains::new(vec![3.0], vec![0.3], 5.0, 50.0).expect("valid gains"),
                ),
                integration: classic(CLASSIC_HORIZON),
                initial_state: state(&[3.0], &[0.0]),
                outputs,
            }
        }
        ScenarioName::Pendulum => Scenario {
            name: name_str,
            plant: PlantSpec::Pendulum(PendulumParams::published()),
            objective: ObjectiveSpec::quadratic(vec![2.0]),
            controller: ControllerSpec::Proposed(
                EscGains::new(vec![1.0], vec![0.5], 2.0, 50.0).expect("valid gains"),
            ),
            integration: classic(CLASSIC_HORIZON),
            initial_state: state(&[0.0], &[0.0]),
            outputs,
        },
        ScenarioName::Flapping => {
            let p = FlappingParams::published();
            Scenario {
                name: name_str,
                plant: PlantSpec::Flapping(p),
                objective: ObjectiveSpec {
                    target: vec![1.0],
                    coordinates: Some(vec![0]),
                },
                controller: ControllerSpec::Proposed(flapping_gains(&p).expect("valid gains")),
                integration: classic(FLAPPING_HORIZON),
                initial_state: state(&[0.0, 0.0], &[0.0, 0.0]),
                outputs,
            }
        }
        ScenarioName::ComparisonGrushkovskaya => Scenario {
            name: name_str,
            plant: PlantSpec::MassSpring(MassSpringParams::published()),
            objective: ObjectiveSpec::quadratic(vec![1.0]),
            controller: ControllerSpec::LieBracketBaseline(LieBracketBaselineParams::published()),
            integration: classic(GRUSHKOVSKAYA_HORIZON),
            initial_state: state(&[1.68], &[-1.0]),
            outputs: OutputSpec::named(name.as_str(), false),
        },
        ScenarioName::ComparisonSuttner => Scenario {
            name: name_str,
            plant: PlantSpec::Pendulum(PendulumParams::published()),
            objective: ObjectiveSpec::quadratic(vec![2.0]),
            controller: ControllerSpec::TwoDitherBaseline(TwoDitherBaselineParams::published()),
            integration: classic(CLASSIC_HORIZON),
            initial_state: state(&[3.0], &[-1.0]),
            outputs: OutputSpec::named(name.as_str(), false),
        },
    }
}

/// The proposed controller under the settings it was compared with in each
/// baseline scenario.
pub fn comparison_proposed(name: ScenarioName) -> Option<Scenario> {
    match name {
        ScenarioName::ComparisonGrushkovskaya => {
            let mut s = scenario_defaults(name);
            s.name = format!("{}_proposed", name.as_str());
            s.controller = ControllerSpec::Proposed(
                EscGains::new(vec![6.0], vec![1.0], 0.72, 3.2).expect("valid gains"),
            );
            s.initial_state = StateVector::pack(&[2.0], &[-1.0], 0.0).expect("n = 1");
            s.outputs = OutputSpec::named(&s.name, true);
            Some(s)
        }
        ScenarioName::ComparisonSuttner => {
            let mut s = scenario_defaults(name);
            s.name = format!("{}_proposed", name.as_str());
            s.controller = ControllerSpec::Proposed(
                EscGains::new(vec![7.0], vec![1.0], 1.0, 50.0).expect("valid gains"),
            );
            s.outputs = OutputSpec::named(&s.name, true);
            Some(s)
        }
        _ => None,
    }
}

fn require(ok: bool, field: &'static str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(EscError::InvalidParameter {
            field,
            reason: reason.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mass_spring_drift_examples() {
        let p = MassSpringParams::<f64>::published();
        assert_eq!(mass_spring_drift(&p, 3.0, 0.0), -60.0);
        assert_eq!(mass_spring_drift(&p.cubic(), 0.0, 2.0), -16.0);
        assert_eq!(mass_spring_drift(&p, 0.0, 0.0), 0.0);
    }

    #[test]
    fn pendulum_drift_examples() {
        let p = PendulumParams::<f64>::published();
        assert_eq!(pendulum_drift(&p, 0.0, 0.0), 0.0);
        assert_relative_eq!(pendulum_drift(&p, std::f64::consts::FRAC_PI_2, 0.0), 9.81);
        // hand substitution: 9.81 sin 2 - 10
        let v = pendulum_drift(&p, 2.0, 1.0);
        assert_relative_eq!(v, 9.81 * 2.0_f64.sin() - 10.0, epsilon = 1e-14);
        assert!((v - -1.0799).abs() < 1e-3);
    }

    #[test]
    fn flapping_drift_examples() {
        let p = FlappingParams::<f64>::published();
        assert_eq!(flapping_drift(&p, 0.0, 0.0), [9.81, 0.0]);
        let [a, b] = flapping_drift(&p, 0.0, 100.0);
        assert_relative_eq!(a, 9.81 - 6.21676, epsilon = 1e-12);
        assert_relative_eq!(b, -3391.5, epsilon = 1e-9);
    }

    #[test]
    fn flapping_omega_and_amplitudes() {
        let p = FlappingParams::<f64>::published();
        assert_relative_eq!(p.omega(), 2.0 * std::f64::consts::PI * 26.3);
        assert!((p.omega() - 165.25).abs() < 0.01);
        let a = flapping_dither_amplitudes(&p);
        assert_relative_eq!(a[1], 2.575e-5 / 1.3179e-7);
        assert_relative_eq!(a[0], 5.322e-13 / 1.3179e-7);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let systems: Vec<MechanicalSystem<f64>> = vec![
            mass_spring_system(MassSpringParams::published()).unwrap(),
            mass_spring_system(MassSpringParams::published().cubic()).unwrap(),
            pendulum_system(PendulumParams::published()).unwrap(),
            flapping_system(FlappingParams::published()).unwrap(),
        ];
        for sys in systems {
            let n = sys.n();
            let q: Vec<f64> = (0..n).map(|i| 0.3 + i as f64).collect();
            let v: Vec<f64> = (0..n).map(|i| 1.7 - 3.1 * i as f64).collect();
            let a = sys.velocity_jacobian(&q, &v).unwrap();
            let b = sys.fd_velocity_jacobian(&q, &v, 1e-6).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!(
                    (x - y).abs() < 1e-5 * (1.0 + x.abs()),
                    "{} {x} {y}",
                    sys.name()
                );
            }
            let a = sys.velocity_hessian(&q, &v).unwrap();
            let b = sys.fd_velocity_hessian(&q, &v, 1e-4).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!(
                    (x - y).abs() < 1e-4 * (1.0 + x.abs()),
                    "{} {x} {y}",
                    sys.name()
                );
            }
        }
    }

    #[test]
    fn scenario_defaults_match_published_parameters() {
        let s = scenario_defaults(ScenarioName::MassSpring);
        let g = s.proposed_gains().unwrap();
        assert_eq!(
            (g.c(), g.a(), g.k(), g.omega()),
            (&[3.0][..], &[0.3][..], 5.0, 50.0)
        );
        assert_eq!(s.initial_state.as_slice(), &[3.0, 0.0, 0.0]);

        let s = scenario_defaults(ScenarioName::Pendulum);
        let g = s.proposed_gains().unwrap();
        assert_eq!(
            (g.c(), g.a(), g.k(), g.omega()),
            (&[1.0][..], &[0.5][..], 2.0, 50.0)
        );
        assert_eq!(s.initial_state.as_slice(), &[0.0, 0.0, 0.0]);

        let s = scenario_defaults(ScenarioName::Flapping);
        let g = s.proposed_gains().unwrap();
        assert!((g.omega() - 165.25).abs() < 0.01);
        assert_eq!(g.c(), &[0.15, 1.0]);
        assert_eq!(g.k(), 7.12e3);
        assert_eq!(s.initial_state.as_slice(), &[0.0; 5]);

        let s = scenario_defaults(ScenarioName::ComparisonGrushkovskaya);
        assert_eq!(s.initial_state.as_slice(), &[1.68, -1.0, 0.0]);
        let s = scenario_defaults(ScenarioName::ComparisonSuttner);
        assert_eq!(s.initial_state.as_slice(), &[3.0, -1.0, 0.0]);
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let err = "nope".parse::<ScenarioName>().unwrap_err();
        let msg = err.to_string();
        for n in ScenarioName::ALL {
            assert!(msg.contains(n.as_str()));
        }
    }

    proptest! {
        #[test]
        fn flapping_symmetries(zd in -5.0f64..5.0, pd in 0.0f64..300.0) {
            let p = FlappingParams::<f64>::published();
            // row 2 is odd in φ̇ at ż = 0
            let [_, plus] = flapping_drift(&p, 0.0, pd);
            let [_, minus] = flapping_drift(&p, 0.0, -pd);
            prop_assert!((plus + minus).abs() <= 1e-12 * (1.0 + plus.abs()));
            // row 1 is even in φ̇ at ż = 0
            let [r1p, _] = flapping_drift(&p, 0.0, pd);
            let [r1m, _] = flapping_drift(&p, 0.0, -pd);
            prop_assert_eq!(r1p, r1m);
            let _ = zd;
        }
    }
}
