//! Post-processing: Lyapunov series, trajectory closeness, the `O(ε)`
//! scaling fit and convergence metrics.

use crate::averaging::{lift_trajectory, AveragedLoop};
use crate::error::{EscError, Result};
use crate::esc::EscClosedLoop;
use crate::integrator::{simulate, Trajectory, DEFAULT_STEPS_PER_PERIOD};
use crate::objective::Objective;
use crate::scalar::{dot, Real};
use crate::state::StateVector;

/// Fraction of the horizon treated as the initial transient in Lyapunov
/// checks.
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.05;
/// Default settling band (absolute).
pub const DEFAULT_BAND: f64 = 0.05;
/// Minimum final-window length, in dither periods.
pub const MIN_WINDOW_PERIODS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries<T> {
    pub times: Vec<T>,
    pub v: Vec<T>,
    pub vdot: Vec<T>,
}

/// `V(t) = J(q(t)) - J*` and `V̇ = ∇J(q)·q̇` along a trajectory.
pub fn lyapunov_series<T: Real>(
    traj: &Trajectory<T>,
    objective: &Objective<T>,
) -> Result<LyapunovSeries<T>> {
    let j_star = objective.min_value().ok_or(EscError::MissingMinValue)?;
    let mut v = Vec::with_capacity(traj.len());
    let mut vdot = Vec::with_capacity(traj.len());
    for s in &traj.states {
        v.push(objective.try_eval(s.q())? - j_star);
        vdot.push(dot(&objective.gradient(s.q())?, s.qdot()));
    }
    Ok(LyapunovSeries {
        times: traj.times.clone(),
        v,
        vdot,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCheck<T> {
    /// Largest `V̇` after the transient window.
    pub max_vdot: T,
    /// Largest single-step increase of `V` after the transient window.
    pub max_v_increase: T,
    pub transient_end: T,
}

impl<T: Real> LyapunovCheck<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.max_vdot <= tol && self.max_v_increase <= tol
    }
}

/// Sign check of `V̇` and monotonicity of `V` after the first
/// `transient_fraction` of the horizon.
pub fn lyapunov_check<T: Real>(
    series: &LyapunovSeries<T>,
    transient_fraction: T,
) -> Result<LyapunovCheck<T>> {
    let (Some(&t0), Some(&tf)) = (series.times.first(), series.times.last()) else {
        return Err(EscError::GridMismatch("empty series".into()));
    };
    let transient_end = t0 + (tf - t0) * transient_fraction;
    let start = series.times.partition_point(|&t| t < transient_end);
    let max_vdot = series.vdot[start..]
        .iter()
        .fold(T::neg_infinity(), |m, &v| m.max(v));
    let max_v_increase = series.v[start..]
        .windows(2)
        .fold(T::neg_infinity(), |m, w| m.max(w[1] - w[0]));
    Ok(LyapunovCheck {
        max_vdot,
        max_v_increase,
        transient_end,
    })
}

/// `max_t ‖x(t) - x̄(t)‖` over a shared grid. Symmetric, and zero exactly when
/// the trajectories coincide on the grid.
pub fn closeness<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(EscError::GridMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(EscError::GridMismatch("empty trajectories".into()));
    }
    let tol = T::lit(1e-9) * (T::one() + a.times.last().unwrap().abs());
    if let Some(i) = a
        .times
        .iter()
        .zip(&b.times)
        .position(|(&s, &t)| (s - t).abs() > tol)
    {
        return Err(EscError::GridMismatch(format!(
            "time grids differ at sample {i}"
        )));
    }
    if a.states[0].dim() != b.states[0].dim() {
        return Err(EscError::GridMismatch("state dimensions differ".into()));
    }
    let start_gap = a.states[0].sub(&b.states[0]);
    if crate::scalar::max_abs(start_gap.as_slice()) > tol {
        return Err(EscError::GridMismatch("initial states differ".into()));
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| crate::scalar::norm2(x.sub(y).as_slice()))
        .fold(T::zero(), T::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingError<T> {
    pub omega: T,
    pub closeness: T,
    /// `max |q - q̄|` without the lift, for reference.
    pub position_gap: T,
}

/// Integrates the true loop and its averaged system from `x0` on the grid
/// `dt = T/40` and measures the gap between the true trajectory and the
/// lifted averaged one.
pub fn averaging_error<T: Real>(
    lp: &EscClosedLoop<T>,
    weight: T,
    x0: &StateVector<T>,
    t0: T,
    tf: T,
) -> Result<AveragingError<T>> {
    let dt = lp.gains().period() / T::from_usize_lossy(DEFAULT_STEPS_PER_PERIOD);
    let truth = simulate(
        |x: &StateVector<T>, t| lp.closed_loop_rhs(x, t),
        x0.clone(),
        t0,
        tf,
        dt,
    )?;
    let avg = AveragedLoop::new(lp.clone()).with_weight(weight);
    let bar = avg.simulate(x0.clone(), t0, tf, dt)?;
    let lifted = lift_trajectory(lp, &bar)?;
    let n = lp.n();
    let position_gap = truth
        .states
        .iter()
        .zip(&bar.states)
        .flat_map(|(x, y)| (0..n).map(move |i| (x[i] - y[i]).abs()))
        .fold(T::zero(), T::max);
    Ok(AveragingError {
        omega: lp.gains().omega(),
        closeness: closeness(&truth, &lifted)?,
        position_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLogFit<T> {
    pub slope: T,
    pub intercept: T,
    pub residuals: Vec<T>,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_log_log<T: Real>(x: &[T], y: &[T]) -> Result<LogLogFit<T>> {
    if x.len() != y.len() {
        return Err(EscError::DegenerateFit(format!(
            "{} abscissae vs {} ordinates",
            x.len(),
            y.len()
        )));
    }
    if x.iter()
        .chain(y)
        .any(|v| !(v.is_finite() && *v > T::zero()))
    {
        return Err(EscError::DegenerateFit(
            "log-log fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let m = T::from_usize_lossy(lx.len());
    let mx = lx.iter().fold(T::zero(), |a, &b| a + b) / m;
    let my = ly.iter().fold(T::zero(), |a, &b| a + b) / m;
    let sxx = lx.iter().fold(T::zero(), |a, &v| a + (v - mx) * (v - mx));
    if lx.len() < 2 || !(sxx > T::lit(1e-12)) {
        return Err(EscError::DegenerateFit(
            "need at least two distinct frequencies".into(),
        ));
    }
    let sxy = lx
        .iter()
        .zip(&ly)
        .fold(T::zero(), |a, (&u, &v)| a + (u - mx) * (v - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = lx
        .iter()
        .zip(&ly)
        .map(|(&u, &v)| v - (intercept + slope * u))
        .collect();
    Ok(LogLogFit {
        slope,
        intercept,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonScaling<T> {
    pub runs: Vec<AveragingError<T>>,
    pub epsilons: Vec<T>,
    pub fit: LogLogFit<T>,
}

impl<T: Real> EpsilonScaling<T> {
    /// Closeness at the first swept frequency.
    pub fn baseline(&self) -> T {
        self.runs[0].closeness
    }
}

/// Sweeps the dither frequency, keeping the other gains, and fits
/// `ln closeness` against `ln ε`. A slope near 1 is the `O(ε)` law.
pub fn epsilon_scaling_study<T: Real>(
    lp: &EscClosedLoop<T>,
    weight: T,
    x0: &StateVector<T>,
    t0: T,
    tf: T,
    omegas: &[T],
) -> Result<EpsilonScaling<T>> {
    if omegas.len() < 2 {
        return Err(EscError::DegenerateFit(format!(
            "need at least two frequencies, got {}",
            omegas.len()
        )));
    }
    let span = omegas.iter().fold(T::zero(), |m, &w| m.max(w))
        / omegas.iter().fold(T::infinity(), |m, &w| m.min(w));
    if omegas.len() < 4 || span < T::lit(8.0) {
        log::warn!(
            "epsilon sweep with {} frequencies spanning {span}x is below 4 / 8x",
            omegas.len()
        );
    }
    let runs = omegas
        .iter()
        .map(|&w| {
            averaging_error(
                &lp.with_gains(lp.gains().with_omega(w)?)?,
                weight,
                x0,
                t0,
                tf,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let epsilons: Vec<T> = omegas.iter().map(|w| w.recip()).collect();
    let values: Vec<T> = runs.iter().map(|r| r.closeness).collect();
    let fit = fit_log_log(&epsilons, &values)?;
    Ok(EpsilonScaling {
        runs,
        epsilons,
        fit,
    })
}

/// Averaging errors for several weights of the second-order term. The
/// weight with the smallest closeness is the one the averaged system should
/// use.
pub fn weight_self_test<T: Real>(
    lp: &EscClosedLoop<T>,
    x0: &StateVector<T>,
    t0: T,
    tf: T,
    weights: &[T],
) -> Result<Vec<(T, T)>> {
    weights
        .iter()
        .map(|&w| Ok((w, averaging_error(lp, w, x0, t0, tf)?.closeness)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    /// Time after which every tracked coordinate stays inside the band;
    /// `None` if the last sample is outside.
    pub settling_time: Option<T>,
    /// Mean of each `q_i` over the final window.
    pub steady_state_mean: Vec<T>,
    /// Peak-to-peak of each `q_i` over the final window.
    pub steady_state_oscillation: Vec<T>,
    pub uhat_steady_mean: T,
    pub window: T,
}

/// Convergence metrics for the coordinates listed in `tracked`
/// (`(index, target)` pairs), with the final `window` seconds as steady state.
pub fn convergence_report<T: Real>(
    traj: &Trajectory<T>,
    tracked: &[(usize, T)],
    band: T,
    window: T,
) -> Result<ConvergenceReport<T>> {
    let (Some(&t0), Some(&tf)) = (traj.times.first(), traj.times.last()) else {
        return Err(EscError::GridMismatch("empty trajectory".into()));
    };
    if !(window > T::zero() && window < tf - t0) {
        return Err(EscError::InvalidParameter {
            field: "window",
            reason: format!("must lie in (0, {})", (tf - t0).as_f64()),
        });
    }
    if let Some(w) = traj.meta.omega {
        let min = T::lit(MIN_WINDOW_PERIODS) * T::TAU() / w;
        if window < min {
            return Err(EscError::InvalidParameter {
                field: "window",
                reason: format!(
                    "shorter than {MIN_WINDOW_PERIODS} dither periods ({})",
                    min.as_f64()
                ),
            });
        }
    }
    let n = traj.n();
    if let Some(&(i, _)) = tracked.iter().find(|(i, _)| *i >= n) {
        return Err(EscError::DimensionMismatch {
            field: "tracked",
            expected: n,
            got: i + 1,
        });
    }
    let outside = |s: &StateVector<T>| tracked.iter().any(|&(i, c)| !((s[i] - c).abs() < band));
    let settling_time = match traj.states.iter().rposition(outside) {
        None => Some(t0),
        Some(last) if last + 1 < traj.len() => Some(traj.times[last + 1]),
        Some(_) => None,
    };
    let start = traj.index_at(tf - window);
    let tail = &traj.states[start..];
    let count = T::from_usize_lossy(tail.len());
    let mut mean = vec![T::zero(); n];
    let mut lo = vec![T::infinity(); n];
    let mut hi = vec![T::neg_infinity(); n];
    let mut uhat = T::zero();
    for s in tail {
        for i in 0..n {
            mean[i] += s[i];
            lo[i] = lo[i].min(s[i]);
            hi[i] = hi[i].max(s[i]);
        }
        uhat += s.uhat();
    }
    Ok(ConvergenceReport {
        settling_time,
        steady_state_mean: mean.into_iter().map(|v| v / count).collect(),
        steady_state_oscillation: hi.iter().zip(&lo).map(|(&h, &l)| h - l).collect(),
        uhat_steady_mean: uhat / count,
        window,
    })
}

/// Trailing moving average with `width` samples; the output has
/// `len - width + 1` entries.
pub fn moving_average<T: Real>(series: &[T], width: usize) -> Vec<T> {
    if width == 0 || series.len() < width {
        return Vec::new();
    }
    let w = T::from_usize_lossy(width);
    let mut acc = series[..width].iter().fold(T::zero(), |a, &b| a + b);
    let mut out = Vec::with_capacity(series.len() - width + 1);
    out.push(acc / w);
    for i in width..series.len() {
        acc += series[i] - series[i - width];
        out.push(acc / w);
    }
    out
}

/// Mean of `series` over samples with `t >= start`.
pub fn window_mean<T: Real>(times: &[T], series: &[T], start: T) -> T {
    let i = times.partition_point(|&t| t < start);
    let tail = &series[i..];
    tail.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(tail.len().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{mass_spring_loop, MassSpringParams};
    use crate::gains::EscGains;
    use crate::integrator::TrajectoryMeta;

    fn constant_traj(x: StateVector<f64>, len: usize, dt: f64) -> Trajectory<f64> {
        Trajectory {
            times: (0..len).map(|i| i as f64 * dt).collect(),
            states: vec![x; len],
            meta: TrajectoryMeta {
                dt,
                omega: None,
                scenario_id: String::new(),
            },
        }
    }

    #[test]
    fn lyapunov_at_minimizer_is_zero() {
        let obj = Objective::quadratic(&[1.0]);
        let traj = constant_traj(StateVector::pack(&[1.0], &[0.0], 2.0).unwrap(), 50, 0.1);
        let s = lyapunov_series(&traj, &obj).unwrap();
        assert!(s.v.iter().chain(&s.vdot).all(|&v| v == 0.0));
        let no_min = Objective::new(1, |q: &[f64]| q[0]);
        assert!(matches!(
            lyapunov_series(&traj, &no_min),
            Err(EscError::MissingMinValue)
        ));
    }

    #[test]
    fn lyapunov_rate_matches_time_derivative() {
        // q(t) = 1 + e^{-t} exactly, q̇ = -e^{-t}
        let dt = 1e-3;
        let traj = Trajectory {
            times: (0..2000).map(|i| i as f64 * dt).collect(),
            states: (0..2000)
                .map(|i| {
                    let e = (-(i as f64) * dt).exp();
                    StateVector::pack(&[1.0 + e], &[-e], 0.0).unwrap()
                })
                .collect(),
            meta: TrajectoryMeta {
                dt,
                omega: None,
                scenario_id: String::new(),
            },
        };
        let s = lyapunov_series(&traj, &Objective::quadratic(&[1.0])).unwrap();
        for i in 1..s.v.len() - 1 {
            let numeric = (s.v[i + 1] - s.v[i - 1]) / (2.0 * dt);
            assert!((numeric - s.vdot[i]).abs() <= 1e-3 * s.vdot[i].abs());
        }
    }

    #[test]
    fn closeness_identity_and_symmetry() {
        let a = constant_traj(StateVector::pack(&[1.0], &[0.0], 0.0).unwrap(), 10, 0.1);
        assert_eq!(closeness(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.states[5].as_mut_slice()[1] = 0.3;
        b.states[6].as_mut_slice()[2] = -0.4;
        assert_eq!(closeness(&a, &b).unwrap(), closeness(&b, &a).unwrap());
        assert!((closeness(&a, &b).unwrap() - 0.4).abs() < 1e-15);
        let short = constant_traj(StateVector::pack(&[1.0], &[0.0], 0.0).unwrap(), 9, 0.1);
        assert!(matches!(
            closeness(&a, &short),
            Err(EscError::GridMismatch(_))
        ));
    }

    #[test]
    fn single_frequency_sweep_rejected() {
        let gains = EscGains::new(vec![3.0], vec![0.3], 5.0, 50.0).unwrap();
        let lp = mass_spring_loop(MassSpringParams::published(), 1.0, gains).unwrap();
        let x0 = StateVector::pack(&[3.0], &[0.0], 0.0).unwrap();
        assert!(matches!(
            epsilon_scaling_study(&lp, 0.25, &x0, 0.0, 1.0, &[50.0]),
            Err(EscError::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_log_log(&[1.0, 1.0], &[2.0, 3.0]),
            Err(EscError::DegenerateFit(_))
        ));
    }

    #[test]
    fn log_log_fit_recovers_power_law() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let fit = fit_log_log(&x, &y).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0_f64.ln()).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn convergence_report_constant_at_target() {
        let traj = constant_traj(StateVector::pack(&[1.0], &[0.0], 0.5).unwrap(), 101, 0.1);
        let r = convergence_report(&traj, &[(0, 1.0)], 0.05, 1.0).unwrap();
        assert_eq!(r.settling_time, Some(0.0));
        assert_eq!(r.steady_state_oscillation, vec![0.0]);
        assert_eq!(r.steady_state_mean, vec![1.0]);
        assert_eq!(r.uhat_steady_mean, 0.5);
    }

    #[test]
    fn convergence_report_never_settles() {
        let traj = constant_traj(StateVector::pack(&[3.0], &[0.0], 0.0).unwrap(), 101, 0.1);
        let r = convergence_report(&traj, &[(0, 1.0)], 0.05, 1.0).unwrap();
        assert_eq!(r.settling_time, None);
        assert!(convergence_report(&traj, &[(0, 1.0)], 0.05, 20.0).is_err());
    }

    #[test]
    fn settling_uses_last_entry() {
        let mut traj = constant_traj(StateVector::pack(&[1.0], &[0.0], 0.0).unwrap(), 101, 0.1);
        traj.states[40].as_mut_slice()[0] = 2.0;
        let r = convergence_report(&traj, &[(0, 1.0)], 0.05, 1.0).unwrap();
        assert!((r.settling_time.unwrap() - 4.1).abs() < 1e-12);
    }

    #[test]
    fn moving_average_basics() {
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2),
            vec![1.5, 2.5, 3.5]
        );
        assert!(moving_average(&[1.0], 2).is_empty());
    }
}
