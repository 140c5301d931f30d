//! Acceptance checks: the published behavior of the method, each reduced to
//! a pass/fail verdict with pinned tolerances.

use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::analysis::{
    convergence_report, epsilon_scaling_study, lyapunov_check, lyapunov_series, ConvergenceReport,
    DEFAULT_BAND, DEFAULT_TRANSIENT_FRACTION,
};
use crate::averaging::AVERAGING_WEIGHT;
use crate::benchmarks::{
    comparison_proposed, cubic_velocity_test_plant, scenario_defaults, MassSpringParams,
    ScenarioName,
};
use crate::error::Result;
use crate::esc::{EscClosedLoop, MIN_QUADRATURE_STEPS};
use crate::gains::EscGains;
use crate::integrator::{simulate, Trajectory};
use crate::objective::Objective;
use crate::runner::{control_summary, derived_series, final_window};
use crate::scalar::norm2;
use crate::scenario::{PlantSpec, Scenario};
use crate::state::StateVector;

/// Half-width of the target band for steady-state means.
pub const TARGET_BAND: f64 = DEFAULT_BAND;
/// Final-window control mean must stay below this fraction of its transient peak.
pub const CONTROL_MEAN_FRACTION: f64 = 0.05;
/// Accepted range of the closeness-vs-ε log-log slope.
pub const SLOPE_RANGE: (f64, f64) = (0.7, 1.3);
/// Frequencies of the ε sweep.
pub const OMEGA_SWEEP: [f64; 4] = [25.0, 50.0, 100.0, 200.0];
/// Factor by which the mutated weight must degrade the closeness baseline.
pub const MUTATION_FACTOR: f64 = 2.0;
/// Weight used for the mutation test (the correction factor dropped).
pub const MUTATED_WEIGHT: f64 = 1.0;
/// Ceiling of the normalized third-bracket residual.
pub const ORDER3_THRESHOLD: f64 = 1e-4;
/// Relative tolerance between closed-form and finite-difference brackets.
pub const BRACKET_TOLERANCE: f64 = 1e-4;
/// Ceiling of `V̇` and of single-step increases of `V` after the transient.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-9;
/// Ceiling of the one-period dither mean.
pub const DITHER_MEAN_TOLERANCE: f64 = 1e-9;
/// Accepted error ratio of RK4 under step halving.
pub const RK4_RATIO_RANGE: (f64, f64) = (12.0, 20.0);
/// Random states per plant.
pub const RANDOM_STATES: usize = 50;
/// Seed for every random draw in the suite.
pub const SEED: u64 = 0x5eed_e5c0;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.id, self.title, self.detail)
    }
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    check: fn() -> Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self) -> Verdict {
        let (passed, detail) = (self.check)().unwrap_or_else(|e| (false, format!("error: {e}")));
        Verdict {
            id: self.id,
            title: self.title,
            passed,
            detail,
        }
    }
}

pub const CRITERIA: &[Criterion] = &[
    Criterion {
        id: "1",
        title: "mass-spring reproduction",
        check: mass_spring_reproduction,
    },
    Criterion {
        id: "2",
        title: "inverted pendulum reproduction",
        check: pendulum_reproduction,
    },
    Criterion {
        id: "3",
        title: "flapping height seeking",
        check: flapping_height_seeking,
    },
    Criterion {
        id: "4",
        title: "cubic damping",
        check: cubic_damping,
    },
    Criterion {
        id: "5",
        title: "epsilon scaling and weight mutation",
        check: epsilon_scaling,
    },
    Criterion {
        id: "6",
        title: "third bracket truncation",
        check: bracket_truncation,
    },
    Criterion {
        id: "7",
        title: "closed-form vs numeric brackets",
        check: closed_form_brackets,
    },
    Criterion {
        id: "8",
        title: "Lyapunov decrease on averaged runs",
        check: lyapunov_decrease,
    },
    Criterion {
        id: "9",
        title: "zero-mean dither",
        check: zero_mean_dither,
    },
    Criterion {
        id: "10a",
        title: "Lie-bracket baseline converges",
        check: lie_bracket_baseline_converges,
    },
    Criterion {
        id: "10b",
        title: "lower oscillation than two-dither baseline",
        check: oscillation_vs_two_dither,
    },
    Criterion {
        id: "11",
        title: "RK4 order",
        check: rk4_order,
    },
];

pub fn find(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

pub fn run_all() -> Vec<Verdict> {
    CRITERIA.iter().map(Criterion::run).collect()
}

fn in_band(v: f64, target: f64) -> bool {
    (v - target).abs() <= TARGET_BAND
}

fn steady(s: &Scenario, traj: &Trajectory<f64>) -> Result<ConvergenceReport<f64>> {
    convergence_report(traj, &s.objective.tracked(), TARGET_BAND, final_window(s))
}

fn completed(s: &Scenario) -> Result<Trajectory<f64>> {
    match s.simulate()? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

fn mass_spring_reproduction() -> Result<(bool, String)> {
    let s = scenario_defaults(ScenarioName::MassSpring);
    let truth = steady(&s, &completed(&s)?)?;
    let avg = steady(&s, &s.simulate_averaged()?)?;
    let (x, xa, u) = (
        truth.steady_state_mean[0],
        avg.steady_state_mean[0],
        truth.uhat_steady_mean,
    );
    let ok = in_band(x, 1.0) && in_band(xa, 1.0) && u > 0.0;
    Ok((
        ok,
        format!("mean x = {x:.4}, averaged mean x = {xa:.4}, mean uhat = {u:.4} (> 0)"),
    ))
}

fn pendulum_reproduction() -> Result<(bool, String)> {
    let s = scenario_defaults(ScenarioName::Pendulum);
    let r = steady(&s, &completed(&s)?)?;
    let (th, u) = (r.steady_state_mean[0], r.uhat_steady_mean);
    let ok = in_band(th, 2.0) && u < 0.0;
    Ok((
        ok,
        format!("mean theta = {th:.4}, mean uhat = {u:.4} (< 0)"),
    ))
}

fn flapping_height_seeking() -> Result<(bool, String)> {
    let s = scenario_defaults(ScenarioName::Flapping);
    let traj = completed(&s)?;
    let z = steady(&s, &traj)?.steady_state_mean[0];
    let d = derived_series(&s, &traj, false)?;
    let c = control_summary(&s, &traj, &d.u_applied);
    let ratio = c.final_mean.abs() / c.transient_peak;
    let ok = in_band(z, 1.0) && ratio < CONTROL_MEAN_FRACTION;
    Ok((
        ok,
        format!(
            "mean z = {z:.4}, |mean u| = {:.4e}, transient peak = {:.4e}, ratio = {ratio:.4} (< {CONTROL_MEAN_FRACTION})",
            c.final_mean.abs(),
            c.transient_peak
        ),
    ))
}

fn cubic_damping() -> Result<(bool, String)> {
    let s = scenario_defaults(ScenarioName::MassSpringCubic);
    let x = steady(&s, &completed(&s)?)?.steady_state_mean[0];
    Ok((in_band(x, 1.0), format!("mean x = {x:.4}")))
}

fn epsilon_scaling() -> Result<(bool, String)> {
    let s = scenario_defaults(ScenarioName::MassSpring);
    let lp = s.build_loop()?;
    let (t0, tf) = (s.integration.t0, s.integration.tf);
    let x0 = &s.initial_state;
    let nominal = epsilon_scaling_study(&lp, AVERAGING_WEIGHT, x0, t0, tf, &OMEGA_SWEEP)?;
    let mutated = epsilon_scaling_study(&lp, MUTATED_WEIGHT, x0, t0, tf, &OMEGA_SWEEP)?;
    let in_range = |v: f64| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&v);
    let slope = nominal.fit.slope;
    let growth = mutated.baseline() / nominal.baseline();
    let broken = !in_range(mutated.fit.slope) || growth >= MUTATION_FACTOR;
    Ok((
        in_range(slope) && broken,
        format!(
            "slope = {slope:.4} in [{}, {}]; mutated slope = {:.4}, baseline x{growth:.2} (break needs slope out of range or x{MUTATION_FACTOR})",
            SLOPE_RANGE.0, SLOPE_RANGE.1, mutated.fit.slope
        ),
    ))
}

/// Random smooth state for the scenario's plant. Flapping wing rates stay
/// clear of the `φ̇ = 0` kink.
fn random_state(rng: &mut StdRng, plant: &PlantSpec) -> StateVector<f64> {
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    match plant {
        PlantSpec::Flapping(_) => {
            let q = [u(-1.0, 2.0), u(-1.0, 1.0)];
            let sign = if u(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
            let qd = [u(-3.0, 3.0), sign * u(5.0, 200.0)];
            StateVector::pack(&q, &qd, u(-3.0, 3.0)).expect("n = 2")
        }
        _ => StateVector::pack(&[u(-3.0, 3.0)], &[u(-3.0, 3.0)], u(-3.0, 3.0)).expect("n = 1"),
    }
}

fn benchmark_loops() -> Result<Vec<(Scenario, EscClosedLoop<f64>)>> {
    [
        ScenarioName::MassSpring,
        ScenarioName::Pendulum,
        ScenarioName::Flapping,
    ]
    .into_iter()
    .map(|n| {
        let s = scenario_defaults(n);
        let lp = s.build_loop()?;
        Ok((s, lp))
    })
    .collect()
}

fn bracket_truncation() -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, lp) in benchmark_loops()? {
        let mut worst = 0.0_f64;
        for _ in 0..RANDOM_STATES {
            worst = worst.max(lp.bracket_order3_residual(&random_state(&mut rng, &s.plant))?);
        }
        ok &= worst < ORDER3_THRESHOLD;
        parts.push(format!("{} max {worst:.2e}", s.name));
    }
    let gains = EscGains::new(vec![1.0], vec![1.0], 1.0, 50.0)?;
    let cubic = EscClosedLoop::new(
        cubic_velocity_test_plant(),
        Objective::quadratic(&[1.0]),
        gains,
    )?;
    let plant = PlantSpec::MassSpring(MassSpringParams::published());
    let mut least = f64::INFINITY;
    for _ in 0..RANDOM_STATES {
        least = least.min(cubic.bracket_order3_residual(&random_state(&mut rng, &plant))?);
    }
    ok &= least > ORDER3_THRESHOLD;
    parts.push(format!(
        "cubic-velocity plant min {least:.2e} (must exceed)"
    ));
    Ok((
        ok,
        format!("{} vs {ORDER3_THRESHOLD:.0e}", parts.join(", ")),
    ))
}

fn relative_gap(closed: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = closed.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm2(&diff) / (1.0 + norm2(closed))
}

fn closed_form_brackets() -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(SEED ^ 7);
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, lp) in benchmark_loops()? {
        let (mut g1, mut g2) = (0.0_f64, 0.0_f64);
        for _ in 0..RANDOM_STATES {
            let x = random_state(&mut rng, &s.plant);
            let t = rng.gen_range(0.0..lp.gains().period());
            g1 = g1.max(relative_gap(
                &lp.bracket_yz_closed_form(&x, t)?,
                &lp.bracket_yz_numeric(&x, t)?,
            ));
            g2 = g2.max(relative_gap(
                &lp.bracket_yyz_closed_form(&x, t)?,
                &lp.bracket_yyz_numeric(&x, t)?,
            ));
        }
        ok &= g1 < BRACKET_TOLERANCE && g2 < BRACKET_TOLERANCE;
        parts.push(format!("{} [Y,Z] {g1:.2e} [Y,[Y,Z]] {g2:.2e}", s.name));
    }
    Ok((
        ok,
        format!("{} vs {BRACKET_TOLERANCE:.0e}", parts.join(", ")),
    ))
}

fn lyapunov_decrease() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in [ScenarioName::MassSpring, ScenarioName::Pendulum] {
        let s = scenario_defaults(name);
        let series = lyapunov_series(&s.simulate_averaged()?, &s.build_objective()?)?;
        let check = lyapunov_check(&series, DEFAULT_TRANSIENT_FRACTION)?;
        ok &= check.holds(LYAPUNOV_TOLERANCE);
        parts.push(format!(
            "{} after t = {:.2}: max Vdot {:.3e}, max V increase {:.3e}",
            s.name, check.transient_end, check.max_vdot, check.max_v_increase
        ));
    }
    Ok((
        ok,
        format!("{} vs {LYAPUNOV_TOLERANCE:.0e}", parts.join("; ")),
    ))
}

/// The proposed controller of every shipped scenario; baseline scenarios
/// contribute the proposed settings they are compared against.
fn proposed_scenarios() -> Vec<Scenario> {
    ScenarioName::ALL
        .into_iter()
        .filter_map(|n| {
            let s = scenario_defaults(n);
            if s.proposed_gains().is_some() {
                Some(s)
            } else {
                comparison_proposed(n)
            }
        })
        .collect()
}

fn zero_mean_dither() -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(SEED ^ 9);
    let mut worst = 0.0_f64;
    let scenarios = proposed_scenarios();
    for s in &scenarios {
        let lp = s.build_loop()?;
        for _ in 0..RANDOM_STATES {
            let x = random_state(&mut rng, &s.plant);
            let m = lp.dither_mean(&x, MIN_QUADRATURE_STEPS)?;
            worst = m.iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    Ok((
        worst < DITHER_MEAN_TOLERANCE,
        format!(
            "max |mean| = {worst:.2e} over {} scenarios (< {DITHER_MEAN_TOLERANCE:.0e})",
            scenarios.len()
        ),
    ))
}

fn lie_bracket_baseline_converges() -> Result<(bool, String)> {
    let linear = scenario_defaults(ScenarioName::ComparisonGrushkovskaya);
    let mut cubic = linear.clone();
    cubic.name = format!("{}_cubic", linear.name);
    cubic.plant = PlantSpec::MassSpring(MassSpringParams::published().cubic());
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [linear, cubic] {
        let x = steady(&s, &completed(&s)?)?.steady_state_mean[0];
        ok &= in_band(x, 1.0);
        parts.push(format!("{} mean x = {x:.4}", s.name));
    }
    Ok((ok, parts.join(", ")))
}

fn oscillation_vs_two_dither() -> Result<(bool, String)> {
    let proposed =
        comparison_proposed(ScenarioName::ComparisonSuttner).expect("comparison scenario");
    let ours = steady(&proposed, &completed(&proposed)?)?.steady_state_oscillation[0];
    let baseline = scenario_defaults(ScenarioName::ComparisonSuttner);
    let (traj, failure) = baseline.simulate()?;
    if let Some(e) = failure {
        let t = traj.last_time().unwrap_or(baseline.integration.t0);
        return Ok((
            false,
            format!("proposed p2p theta = {ours:.4}; two-dither baseline diverged near t = {t:.3} s ({e}), no steady state to compare"),
        ));
    }
    let theirs = steady(&baseline, &traj)?.steady_state_oscillation[0];
    Ok((
        ours < theirs,
        format!("p2p theta: proposed {ours:.4} vs two-dither {theirs:.4}"),
    ))
}

fn rk4_order() -> Result<(bool, String)> {
    let err = |dt: f64| -> Result<f64> {
        let rhs = |x: &StateVector<f64>, _| StateVector::pack(&[x[0]], &[0.0], 0.0);
        let traj = simulate(rhs, StateVector::pack(&[1.0], &[0.0], 0.0)?, 0.0, 1.0, dt)?;
        Ok((traj.states.last().expect("non-empty")[0] - 1.0_f64.exp()).abs())
    };
    let ratio = err(0.1)? / err(0.05)?;
    let ok = (RK4_RATIO_RANGE.0..=RK4_RATIO_RANGE.1).contains(&ratio);
    Ok((
        ok,
        format!(
            "error ratio {ratio:.3} in [{}, {}]",
            RK4_RATIO_RANGE.0, RK4_RATIO_RANGE.1
        ),
    ))
}
