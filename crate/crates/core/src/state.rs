//! Packed closed-loop state `x = [q; q̇; û]`.

use std::ops::Index;

use crate::error::{EscError, Result};
use crate::scalar::{all_finite, Real};

/// Closed-loop state for a plant with `n` degrees of freedom.
///
/// Stored packed as `[q_1..q_n, q̇_1..q̇_n, û]`, length `2n + 1`. Every
/// Jacobian in the crate uses this ordering. Derivatives of the state use
/// the same type and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> StateVector<T> {
    pub fn pack(q: &[T], qdot: &[T], uhat: T) -> Result<Self> {
        if qdot.len() != q.len() {
            return Err(EscError::DimensionMismatch {
                field: "qdot",
                expected: q.len(),
                got: qdot.len(),
            });
        }
        if q.is_empty() {
            return Err(EscError::DimensionMismatch {
                field: "q",
                expected: 1,
                got: 0,
            });
        }
        let mut data = Vec::with_capacity(2 * q.len() + 1);
        data.extend_from_slice(q);
        data.extend_from_slice(qdot);
        data.push(uhat);
        Ok(Self { n: q.len(), data })
    }

    /// Wraps an already packed vector of length `2n + 1`.
    pub fn from_packed(n: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || data.len() != 2 * n + 1 {
            return Err(EscError::DimensionMismatch {
                field: "packed state",
                expected: 2 * n + 1,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); 2 * n + 1],
        }
    }

    pub fn unpack(&self) -> (Vec<T>, Vec<T>, T) {
        (self.q().to_vec(), self.qdot().to_vec(), self.uhat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn q(&self) -> &[T] {
        &self.data[..self.n]
    }

    #[inline]
    pub fn qdot(&self) -> &[T] {
        &self.data[self.n..2 * self.n]
    }

    #[inline]
    pub fn uhat(&self) -> T {
        self.data[2 * self.n]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    /// `self + h * other`, used by the Runge-Kutta stages.
    pub fn add_scaled(&self, h: T, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + h * b)
            .collect();
        Self { n: self.n, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Self { n: self.n, data }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }
}

impl<T> Index<usize> for StateVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_scalar_plant() {
        let x = StateVector::pack(&[3.0], &[0.0], 0.0).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 0.0, 0.0]);
        assert_eq!(x.dim(), 3);
    }

    #[test]
    fn pack_zero_state_two_dof() {
        let x = StateVector::pack(&[0.0, 0.0], &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(x.as_slice(), &[0.0; 5]);
    }

    #[test]
    fn pack_rejects_mismatch() {
        let err = StateVector::pack(&[1.0], &[2.0, 3.0], 0.0).unwrap_err();
        match err {
            EscError::DimensionMismatch {
                field,
                expected,
                got,
            } => {
                assert_eq!(field, "qdot");
                assert_eq!((expected, got), (1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_packed_checks_length() {
        assert!(StateVector::<f64>::from_packed(2, vec![0.0; 4]).is_err());
        assert!(StateVector::<f64>::from_packed(2, vec![0.0; 5]).is_ok());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(
            q in prop::collection::vec(-1e6f64..1e6, 1..5),
            seed in -1e3f64..1e3,
            uhat in -1e6f64..1e6,
        ) {
            let qdot: Vec<f64> = q.iter().map(|v| v * 0.5 + seed).collect();
            let x = StateVector::pack(&q, &qdot, uhat).unwrap();
            prop_assert_eq!(x.dim(), 2 * q.len() + 1);
            let (q2, qd2, u2) = x.unpack();
            prop_assert_eq!(q2, q);
            prop_assert_eq!(qd2, qdot);
            prop_assert_eq!(u2, uhat);
        }
    }
}
