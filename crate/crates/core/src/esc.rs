//! The single-dither closed loop
//!
//! ```text
//! d/dt [q; q̇; û] = [q̇; f(q, q̇) + C û; 0] + [0; A; k J(q)] ω cos(ωt)
//!                  \_______ Z(x) _______/   \______ Y(x, t) ______/
//! ```

use crate::error::{EscError, Result};
use crate::gains::EscGains;
use crate::objective::Objective;
use crate::scalar::Real;
use crate::state::StateVector;
use crate::system::MechanicalSystem;

/// Minimum quadrature resolution accepted by [`EscClosedLoop::dither_mean`].
pub const MIN_QUADRATURE_STEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct EscClosedLoop<T> {
    system: MechanicalSystem<T>,
    objective: Objective<T>,
    gains: EscGains<T>,
}

impl<T: Real> EscClosedLoop<T> {
    pub fn new(
        system: MechanicalSystem<T>,
        objective: Objective<T>,
        gains: EscGains<T>,
    ) -> Result<Self> {
        let n = system.n();
        if gains.n() != n {
            return Err(EscError::DimensionMismatch {
                field: "C",
                expected: n,
                got: gains.n(),
            });
        }
        if objective.n() != n {
            return Err(EscError::DimensionMismatch {
                field: "objective",
                expected: n,
                got: objective.n(),
            });
        }
        Ok(Self {
            system,
            objective,
            gains,
        })
    }

    pub fn system(&self) -> &MechanicalSystem<T> {
        &self.system
    }

    pub fn objective(&self) -> &Objective<T> {
        &self.objective
    }

    pub fn gains(&self) -> &EscGains<T> {
        &self.gains
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn with_gains(&self, gains: EscGains<T>) -> Result<Self> {
        Self::new(self.system.clone(), self.objective.clone(), gains)
    }

    /// `ω cos(ωt)`.
    #[inline]
    pub fn dither(&self, t: T) -> T {
        let w = self.gains.omega();
        w * (w * t).cos()
    }

    /// `Z(x) = [q̇; f(q, q̇) + C û; 0]`.
    pub fn drift_field(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        self.check_dim(x)?;
        let (q, qdot, uhat) = (x.q(), x.qdot(), x.uhat());
        let f = self.system.drift(q, qdot).map_err(|e| match e {
            EscError::NonFinite { context, .. } => EscError::NonFinite {
                context,
                state: x.to_f64(),
            },
            other => other,
        })?;
        let accel: Vec<T> = f
            .iter()
            .zip(self.gains.c())
            .map(|(&fi, &ci)| fi + ci * uhat)
            .collect();
        StateVector::pack(qdot, &accel, T::zero())
    }

    /// `Y(x, t) = [0; A; k J(q)] ω cos(ωt)`.
    pub fn dither_field(&self, x: &StateVector<T>, t: T) -> Result<StateVector<T>> {
        self.check_dim(x)?;
        let j = self.objective.try_eval(x.q())?;
        let s = self.dither(t);
        let zeros = vec![T::zero(); self.n()];
        let a: Vec<T> = self.gains.a().iter().map(|&ai| ai * s).collect();
        StateVector::pack(&zeros, &a, self.gains.k() * j * s)
    }

    /// `Z(x) + Y(x, t)`.
    pub fn closed_loop_rhs(&self, x: &StateVector<T>, t: T) -> Result<StateVector<T>> {
        let z = self.drift_field(x)?;
        let y = self.dither_field(x, t)?;
        Ok(z.add_scaled(T::one(), &y))
    }

    /// Physical input `u = C û + A ω cos(ωt)`, one entry per channel.
    pub fn applied_control(&self, x: &StateVector<T>, t: T) -> Vec<T> {
        let s = self.dither(t);
        self.gains
            .c()
            .iter()
            .zip(self.gains.a())
            .map(|(&c, &a)| c * x.uhat() + a * s)
            .collect()
    }

    /// Mean of `Y(x, ·)` over one dither period at frozen `x`, by composite
    /// trapezoid with `steps` subintervals.
    pub fn dither_mean(&self, x: &StateVector<T>, steps: usize) -> Result<Vec<T>> {
        if steps < MIN_QUADRATURE_STEPS {
            return Err(EscError::InvalidParameter {
                field: "quadrature_steps",
                reason: format!("need at least {MIN_QUADRATURE_STEPS}, got {steps}"),
            });
        }
        periodic_mean(|t| self.dither_field(x, t), self.gains.period(), steps)
    }

    fn check_dim(&self, x: &StateVector<T>) -> Result<()> {
        if x.n() != self.n() {
            return Err(EscError::DimensionMismatch {
                field: "state",
                expected: 2 * self.n() + 1,
                got: x.dim(),
            });
        }
        Ok(())
    }
}

/// `(1/T) ∫_0^T g(t) dt` by composite trapezoid.
pub fn periodic_mean<T, F>(mut g: F, period: T, steps: usize) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T) -> Result<StateVector<T>>,
{
    let h = period / T::from_usize_lossy(steps);
    let first = g(T::zero())?;
    let mut acc: Vec<T> = first.as_slice().iter().map(|&v| v * T::lit(0.5)).collect();
    for i in 1..steps {
        let v = g(T::from_usize_lossy(i) * h)?;
        for (a, &b) in acc.iter_mut().zip(v.as_slice()) {
            *a += b;
        }
    }
    let last = g(period)?;
    for (a, &b) in acc.iter_mut().zip(last.as_slice()) {
        *a += b * T::lit(0.5);
    }
    Ok(acc.into_iter().map(|v| v * h / period).collect())
}
