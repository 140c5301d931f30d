//! Fixed-step classical Runge-Kutta integration with dense recording.
//!
//! The grid is uniform so a high-frequency dither is sampled the same way in
//! every period. Sample `i` sits at `t0 + i * dt` (no accumulated sums).

use crate::error::{EscError, Result};
use crate::scalar::Real;
use crate::state::StateVector;

/// Default number of integration steps per dither period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta<T> {
    pub dt: T,
    pub omega: Option<T>,
    pub scenario_id: String,
}

/// Time-stamped states on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<StateVector<T>>,
    pub meta: TrajectoryMeta<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, StateVector::n)
    }

    pub fn last_time(&self) -> Option<T> {
        self.times.last().copied()
    }

    /// Extracts one packed component over time.
    pub fn component(&self, index: usize) -> Vec<T> {
        self.states.iter().map(|s| s[index]).collect()
    }

    /// Index of the first sample with `t >= start`.
    pub fn index_at(&self, start: T) -> usize {
        self.times.partition_point(|&t| t < start)
    }

    pub fn with_scenario_id(mut self, id: impl Into<String>) -> Self {
        self.meta.scenario_id = id.into();
        self
    }
}

/// One classical RK4 step of `ẋ = rhs(x, t)`.
pub fn rk4_step<T, F>(rhs: &mut F, x: &StateVector<T>, t: T, dt: T) -> Result<StateVector<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>, T) -> Result<StateVector<T>>,
{
    let half = dt * T::lit(0.5);
    let stage = |k: Result<StateVector<T>>, idx: usize| -> Result<StateVector<T>> {
        match k {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(EscError::NonFinite { .. }) => Err(EscError::Step {
                t: t.as_f64(),
                stage: idx,
            }),
            Err(e) => Err(e),
        }
    };
    let k1 = stage(rhs(x, t), 1)?;
    let k2 = stage(rhs(&x.add_scaled(half, &k1), t + half), 2)?;
    let k3 = stage(rhs(&x.add_scaled(half, &k2), t + half), 3)?;
    let k4 = stage(rhs(&x.add_scaled(dt, &k3), t + dt), 4)?;

    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let data = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &xi)| xi + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    let next = StateVector::from_packed(x.n(), data)?;
    if !next.is_finite() {
        return Err(EscError::Step {
            t: t.as_f64(),
            stage: 5,
        });
    }
    Ok(next)
}

/// Number of steps covering `[t0, tf]`: `⌈(tf - t0)/dt⌉`.
pub fn step_count<T: Real>(t0: T, tf: T, dt: T) -> Result<usize> {
    if !(tf > t0) || !(dt > T::zero()) || !t0.is_finite() || !tf.is_finite() {
        return Err(EscError::InvalidHorizon {
            t0: t0.as_f64(),
            tf: tf.as_f64(),
            dt: dt.as_f64(),
        });
    }
    let steps = ((tf - t0) / dt).as_f64();
    // guard against 30/0.001 landing a hair above an integer
    let rounded = steps.round();
    let steps = if (steps - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        steps.ceil()
    };
    Ok(steps as usize)
}

/// Integrates over `[t0, tf]` and records every step.
pub fn simulate<T, F>(rhs: F, x0: StateVector<T>, t0: T, tf: T, dt: T) -> Result<Trajectory<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>, T) -> Result<StateVector<T>>,
{
    let (traj, err) = simulate_partial(rhs, x0, t0, tf, dt)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`simulate`], but on a step failure returns the samples computed so
/// far together with the error.
pub fn simulate_partial<T, F>(
    mut rhs: F,
    x0: StateVector<T>,
    t0: T,
    tf: T,
    dt: T,
) -> Result<(Trajectory<T>, Option<EscError>)>
where
    T: Real,
    F: FnMut(&StateVector<T>, T) -> Result<StateVector<T>>,
{
    let steps = step_count(t0, tf, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0);
    let mut failure = None;
    for i in 0..steps {
        let t = t0 + T::from_usize_lossy(i) * dt;
        match rk4_step(&mut rhs, &states[i], t, dt) {
            Ok(next) => {
                times.push(t0 + T::from_usize_lossy(i + 1) * dt);
                states.push(next);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let traj = Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            dt,
            omega: None,
            scenario_id: String::new(),
        },
    };
    Ok((traj, failure))
}
