//! Two literature controllers used for comparison, transcribed as printed.
//!
//! Both act on `q̈ = f(q, q̇) + u` with every input channel set to the same
//! scalar `u`. The Lie-bracket controller integrates its input and stores it
//! in the `û` slot; the two-dither controller is static and leaves `û` at 0.

use crate::error::{EscError, Result};
use crate::objective::Objective;
use crate::scalar::Real;
use crate::state::StateVector;
use crate::system::MechanicalSystem;

/// Integrated-input Lie-bracket ESC:
/// `u̇ = 2√π/(η√ε) (√γ J cos(νt) + √γ sin(νt))`.
///
/// `frequency` is `ν`. The printed parameters give `2π/(ηε) ≈ 3.09` while the
/// accompanying text claims 3.2, so `ν` is explicit rather than derived.
/// `k_b` and `mu` are listed with the controller but do not enter the printed
/// law; they are kept for completeness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieBracketBaselineParams<T> {
    pub gamma: T,
    pub eta: T,
    pub eps_b: T,
    pub k_b: T,
    pub mu: T,
    pub frequency: T,
}

impl<T: Real> LieBracketBaselineParams<T> {
    /// `γ = 100`, `η = 25`, `ε = 1/12.3`, `k = 0.72`, `μ = 5`, `ν = 3.2`.
    pub fn published() -> Self {
        Self {
            gamma: T::lit(100.0),
            eta: T::lit(25.0),
            eps_b: T::one() / T::lit(12.3),
            k_b: T::lit(0.72),
            mu: T::lit(5.0),
            frequency: T::lit(3.2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, field) in [
            (self.gamma, "gamma"),
            (self.eta, "eta"),
            (self.eps_b, "eps_b"),
            (self.k_b, "k_b"),
            (self.mu, "mu"),
            (self.frequency, "frequency"),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(EscError::InvalidParameter {
                    field,
                    reason: format!("{field} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// `2π/(ηε)`, the frequency implied by `η` and `ε`.
    pub fn derived_frequency(&self) -> T {
        T::TAU() / (self.eta * self.eps_b)
    }

    /// `2√π/(η√ε)`.
    pub fn amplitude(&self) -> T {
        T::lit(2.0) * T::PI().sqrt() / (self.eta * self.eps_b.sqrt())
    }

    pub fn period(&self) -> T {
        T::TAU() / self.frequency
    }

    /// `u̇` at objective value `j` and time `t`.
    pub fn input_rate(&self, j: T, t: T) -> T {
        let sg = self.gamma.sqrt();
        let phase = self.frequency * t;
        self.amplitude() * (sg * j * phase.cos() + sg * phase.sin())
    }
}

/// `d/dt [q; q̇; u] = [q̇; f + u; u̇]`.
pub fn lie_bracket_baseline_rhs<T: Real>(
    p: &LieBracketBaselineParams<T>,
    system: &MechanicalSystem<T>,
    objective: &Objective<T>,
    x: &StateVector<T>,
    t: T,
) -> Result<StateVector<T>> {
    let f = system.drift(x.q(), x.qdot())?;
    let u = x.uhat();
    let accel: Vec<T> = f.iter().map(|&fi| fi + u).collect();
    let j = objective.try_eval(x.q())?;
    StateVector::pack(x.qdot(), &accel, p.input_rate(j, t))
}

/// Two-dither ESC with `u = u₁ + u₂`,
/// `u₁ = ω sin(ωt) λ₁ J + μ₁ α²(J)`, `u₂ = ω cos(ωt) λ₂ α(J) + μ₂ α²(J)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDitherBaselineParams<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub mu1: T,
    pub mu2: T,
    pub omega: T,
}

impl<T: Real> TwoDitherBaselineParams<T> {
    /// `λ₁ = λ₂ = μ₁ = μ₂ = 14`, `ω = 50`.
    pub fn published() -> Self {
        let v = T::lit(14.0);
        Self {
            lambda1: v,
            lambda2: v,
            mu1: v,
            mu2: v,
            omega: T::lit(50.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, field) in [
            (self.lambda1, "lambda1"),
            (self.lambda2, "lambda2"),
            (self.mu1, "mu1"),
            (self.mu2, "mu2"),
            (self.omega, "omega"),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(EscError::InvalidParameter {
                    field,
                    reason: format!("{field} must be positive"),
                });
            }
        }
        Ok(())
    }

    pub fn period(&self) -> T {
        T::TAU() / self.omega
    }

    /// `(u₁, u₂)` at objective value `j` and time `t`.
    pub fn inputs(&self, j: T, t: T) -> (T, T) {
        let a = alpha(j);
        let a2 = a * a;
        let wt = self.omega * t;
        let u1 = self.omega * wt.sin() * self.lambda1 * j + self.mu1 * a2;
        let u2 = self.omega * wt.cos() * self.lambda2 * a + self.mu2 * a2;
        (u1, u2)
    }
}

/// `α(J) = √(J + ln(2 cosh J))`, with the logarithm evaluated as
/// `|J| + ln(1 + e^{-2|J|})` so large `J` does not overflow.
pub fn alpha<T: Real>(j: T) -> T {
    let aj = j.abs();
    let log2cosh = aj + (-(aj + aj)).exp().ln_1p();
    (j + log2cosh).sqrt()
}

/// `d/dt [q; q̇; 0] = [q̇; f + u₁ + u₂; 0]`.
pub fn two_dither_baseline_rhs<T: Real>(
    p: &TwoDitherBaselineParams<T>,
    system: &MechanicalSystem<T>,
    objective: &Objective<T>,
    x: &StateVector<T>,
    t: T,
) -> Result<StateVector<T>> {
    let f = system.drift(x.q(), x.qdot())?;
    let j = objective.try_eval(x.q())?;
    let (u1, u2) = p.inputs(j, t);
    let accel: Vec<T> = f.iter().map(|&fi| fi + u1 + u2).collect();
    StateVector::pack(x.qdot(), &accel, T::zero())
}
