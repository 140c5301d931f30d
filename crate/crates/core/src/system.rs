//! Mechanical plants of the form `q̈ = f(q, q̇) + u`.

use std::fmt;
use std::sync::Arc;

use crate::error::{EscError, Result};
use crate::scalar::{all_finite, Real};

/// Relative step for first-order central differences: `h = 1e-5 (1 + |v|)`.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
/// Relative step for second-order central differences: `h = 1e-4 (1 + |v|)`.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

pub type DriftFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
/// Row-major `n × n` matrix valued function of `(q, q̇)`.
pub type MatrixFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
/// Returns the velocity index that sits within `margin` of a kink, if any.
pub type GuardFn<T> = Arc<dyn Fn(&[T], &[T], T) -> Option<usize> + Send + Sync>;

/// A plant description: dimension, drift and optional analytic velocity
/// derivatives.
///
/// The velocity Hessian is flattened so that entry `(i, k, j)` lives at
/// `(i * n + k) * n + j` and holds `∂²f_i / ∂q̇_k ∂q̇_j`.
#[derive(Clone)]
pub struct MechanicalSystem<T> {
    n: usize,
    name: String,
    drift: DriftFn<T>,
    velocity_jacobian: Option<MatrixFn<T>>,
    velocity_hessian: Option<MatrixFn<T>>,
    nonsmooth_guard: Option<GuardFn<T>>,
}

impl<T> fmt::Debug for MechanicalSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanicalSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("analytic_jacobian", &self.velocity_jacobian.is_some())
            .field("analytic_hessian", &self.velocity_hessian.is_some())
            .field("guarded", &self.nonsmooth_guard.is_some())
            .finish()
    }
}

impl<T: Real> MechanicalSystem<T> {
    pub fn new<F>(name: impl Into<String>, n: usize, drift: F) -> Result<Self>
    where
        F: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(EscError::InvalidParameter {
                field: "n",
                reason: "plant needs at least one degree of freedom".into(),
            });
        }
        Ok(Self {
            n,
            name: name.into(),
            drift: Arc::new(drift),
            velocity_jacobian: None,
            velocity_hessian: None,
            nonsmooth_guard: None,
        })
    }

    pub fn with_velocity_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.velocity_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_velocity_hessian<F>(mut self, hess: F) -> Self
    where
        F: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.velocity_hessian = Some(Arc::new(hess));
        self
    }

    pub fn with_nonsmooth_guard<F>(mut self, guard: F) -> Self
    where
        F: Fn(&[T], &[T], T) -> Option<usize> + Send + Sync + 'static,
    {
        self.nonsmooth_guard = Some(Arc::new(guard));
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.velocity_hessian.is_some()
    }

    /// Evaluates `f(q, q̇)`, checking its length and finiteness.
    pub fn drift(&self, q: &[T], qdot: &[T]) -> Result<Vec<T>> {
        let out = (self.drift)(q, qdot);
        if out.len() != self.n {
            return Err(EscError::DimensionMismatch {
                field: "drift output",
                expected: self.n,
                got: out.len(),
            });
        }
        if !all_finite(&out) {
            return Err(EscError::NonFinite {
                context: format!("drift of `{}`", self.name),
                state: q.iter().chain(qdot).map(|v| v.as_f64()).collect(),
            });
        }
        Ok(out)
    }

    /// Fails with [`EscError::NonsmoothPoint`] when `(q, q̇)` lies within
    /// `margin` of a point where second velocity-derivatives are undefined.
    pub fn check_smooth(&self, q: &[T], qdot: &[T], margin: T) -> Result<()> {
        match self
            .nonsmooth_guard
            .as_ref()
            .and_then(|g| g(q, qdot, margin))
        {
            Some(coordinate) => Err(EscError::NonsmoothPoint {
                coordinate,
                value: qdot[coordinate].as_f64(),
            }),
            None => Ok(()),
        }
    }

    pub fn is_smooth_at(&self, q: &[T], qdot: &[T], margin: T) -> bool {
        self.check_smooth(q, qdot, margin).is_ok()
    }

    /// `∂f/∂q̇`, row-major. Analytic when supplied, else central differences.
    pub fn velocity_jacobian(&self, q: &[T], qdot: &[T]) -> Result<Vec<T>> {
        if let Some(jac) = &self.velocity_jacobian {
            let out = jac(q, qdot);
            self.check_len("velocity jacobian", &out, self.n * self.n)?;
            return Ok(out);
        }
        self.fd_velocity_jacobian(q, qdot, T::lit(FD_GRADIENT_STEP))
    }

    pub fn fd_velocity_jacobian(&self, q: &[T], qdot: &[T], rel_step: T) -> Result<Vec<T>> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        let mut v = qdot.to_vec();
        for k in 0..n {
            let h = rel_step * (T::one() + qdot[k].abs());
            v[k] = qdot[k] + h;
            let fp = self.drift(q, &v)?;
            v[k] = qdot[k] - h;
            let fm = self.drift(q, &v)?;
            v[k] = qdot[k];
            for i in 0..n {
                out[i * n + k] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Ok(out)
    }

    /// `∂²f/∂q̇∂q̇` flattened as documented on the type.
    pub fn velocity_hessian(&self, q: &[T], qdot: &[T]) -> Result<Vec<T>> {
        if let Some(hess) = &self.velocity_hessian {
            let out = hess(q, qdot);
            self.check_len("velocity hessian", &out, self.n * self.n * self.n)?;
            return Ok(out);
        }
        self.fd_velocity_hessian(q, qdot, T::lit(FD_HESSIAN_STEP))
    }

    /// Four-point central second differences in velocity.
    pub fn fd_velocity_hessian(&self, q: &[T], qdot: &[T], rel_step: T) -> Result<Vec<T>> {
        let n = self.n;
        let four = T::lit(4.0);
        let mut out = vec![T::zero(); n * n * n];
        let mut v = qdot.to_vec();
        for k in 0..n {
            let hk = rel_step * (T::one() + qdot[k].abs());
            for j in k..n {
                let hj = rel_step * (T::one() + qdot[j].abs());
                let mut eval = |sk: T, sj: T| -> Result<Vec<T>> {
                    v.copy_from_slice(qdot);
                    v[k] += sk * hk;
                    v[j] += sj * hj;
                    self.drift(q, &v)
                };
                let one = T::one();
                let fpp = eval(one, one)?;
                let fpm = eval(one, -one)?;
                let fmp = eval(-one, one)?;
                let fmm = eval(-one, -one)?;
                for i in 0..n {
                    let d = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (four * hk * hj);
                    out[(i * n + k) * n + j] = d;
                    out[(i * n + j) * n + k] = d;
                }
            }
        }
        Ok(out)
    }

    fn check_len(&self, field: &'static str, v: &[T], expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(EscError::DimensionMismatch {
                field,
                expected,
                got: v.len(),
            });
        }
        if !all_finite(v) {
            return Err(EscError::NonFinite {
                context: format!("{field} of `{}`", self.name),
                state: Vec::new(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quadratic_plant() -> MechanicalSystem<f64> {
        // f = [v0 * v1 - q0, v1^2]
        MechanicalSystem::new("toy", 2, |q: &[f64], v: &[f64]| {
            vec![v[0] * v[1] - q[0], v[1] * v[1]]
        })
        .unwrap()
    }

    #[test]
    fn drift_length_checked() {
        let bad = MechanicalSystem::new("bad", 2, |_: &[f64], _: &[f64]| vec![0.0]).unwrap();
        assert!(matches!(
            bad.drift(&[0.0, 0.0], &[0.0, 0.0]),
            Err(EscError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn drift_non_finite_rejected() {
        let bad = MechanicalSystem::new("nan", 1, |_: &[f64], _: &[f64]| vec![f64::NAN]).unwrap();
        assert!(matches!(
            bad.drift(&[0.0], &[0.0]),
            Err(EscError::NonFinite { .. })
        ));
    }

    #[test]
    fn fd_jacobian_and_hessian_of_quadratic_plant() {
        let p = quadratic_plant();
        let (q, v) = ([0.3, -0.2], [1.5, -2.0]);
        let jac = p.velocity_jacobian(&q, &v).unwrap();
        // rows: [v1, v0], [0, 2 v1]
        let expect = [-2.0, 1.5, 0.0, -4.0];
        for (a, b) in jac.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-8);
        }
        let hess = p.velocity_hessian(&q, &v).unwrap();
        // f0: d2/dv0dv1 = 1; f1: d2/dv1dv1 = 2
        let mut expect = [0.0; 8];
        expect[1] = 1.0;
        expect[2] = 1.0;
        expect[7] = 2.0;
        for (a, b) in hess.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn guard_names_coordinate() {
        let p = quadratic_plant()
            .with_nonsmooth_guard(|_, v: &[f64], m| (v[1].abs() <= m).then_some(1));
        assert!(p.check_smooth(&[0.0, 0.0], &[0.0, 1.0], 0.1).is_ok());
        match p.check_smooth(&[0.0, 0.0], &[0.0, 0.05], 0.1) {
            Err(EscError::NonsmoothPoint { coordinate, .. }) => assert_eq!(coordinate, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
