use crate::error::{EscError, Result};
use crate::scalar::Real;

/// Gains of the single-dither loop. Validated at construction.
///
/// `c` scales the control estimate `û` into each channel, `a` scales the
/// dither `ω cos(ωt)`, `k` is the adaptation gain and `omega` the dither
/// frequency in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct EscGains<T> {
    c: Vec<T>,
    a: Vec<T>,
    k: T,
    omega: T,
}

impl<T: Real> EscGains<T> {
    pub fn new(c: Vec<T>, a: Vec<T>, k: T, omega: T) -> Result<Self> {
        if c.len() != a.len() {
            return Err(EscError::DimensionMismatch {
                field: "A",
                expected: c.len(),
                got: a.len(),
            });
        }
        if c.is_empty() {
            return Err(EscError::InvalidParameter {
                field: "C",
                reason: "gain vectors must be non-empty".into(),
            });
        }
        if !c.iter().all(|v| v.is_finite() && *v > T::zero()) {
            return Err(positive("C"));
        }
        if !a.iter().all(|v| v.is_finite() && *v > T::zero()) {
            return Err(positive("A"));
        }
        if !(k.is_finite() && k > T::zero()) {
            return Err(positive("k"));
        }
        if !(omega.is_finite() && omega > T::zero()) {
            return Err(positive("omega"));
        }
        Ok(Self { c, a, k, omega })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    /// Dither period `T = 2π/ω`.
    pub fn period(&self) -> T {
        T::TAU() / self.omega
    }

    /// Small parameter `ε = 1/ω`.
    pub fn epsilon(&self) -> T {
        self.omega.recip()
    }

    /// Same gains at a different dither frequency.
    pub fn with_omega(&self, omega: T) -> Result<Self> {
        Self::new(self.c.clone(), self.a.clone(), self.k, omega)
    }
}

fn positive(field: &'static str) -> EscError {
    EscError::InvalidParameter {
        field,
        reason: format!("{field} must be positive"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derived_period_and_epsilon() {
        let g = EscGains::new(vec![3.0], vec![0.3], 5.0, 50.0).unwrap();
        assert_relative_eq!(g.period(), 2.0 * std::f64::consts::PI / 50.0);
        assert_relative_eq!(g.epsilon(), 0.02);
        assert_relative_eq!(g.period(), std::f64::consts::TAU * g.epsilon());
    }

    #[test]
    fn positivity_enforced_at_construction() {
        for (c, a, k, w, field) in [
            (vec![0.0], vec![0.3], 5.0, 50.0, "C"),
            (vec![3.0], vec![-0.3], 5.0, 50.0, "A"),
            (vec![3.0], vec![0.3], 0.0, 50.0, "k"),
            (vec![3.0], vec![0.3], 5.0, -1.0, "omega"),
            (vec![3.0], vec![f64::NAN], 5.0, 1.0, "A"),
        ] {
            match EscGains::new(c, a, k, w) {
                Err(EscError::InvalidParameter { field: f, reason }) => {
                    assert_eq!(f, field);
                    assert_eq!(reason, format!("{field} must be positive"));
                }
                other => panic!("expected rejection of {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            EscGains::new(vec![1.0, 2.0], vec![1.0], 1.0, 1.0),
            Err(EscError::DimensionMismatch { field: "A", .. })
        ));
    }
}
