//! Objective functions `J(q)` measured by the controller.
//!
//! Objectives only see the generalized coordinates. The optional minimizer and
//! minimum value are diagnostics; the controller never reads them.

use std::fmt;
use std::sync::Arc;

use crate::error::{EscError, Result};
use crate::scalar::{max_abs, Real};
use crate::system::FD_GRADIENT_STEP;

pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type GradientFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
pub struct Objective<T> {
    n: usize,
    eval: ScalarFn<T>,
    gradient: Option<GradientFn<T>>,
    minimizer: Option<Vec<T>>,
    min_value: Option<T>,
}

impl<T: fmt::Debug> fmt::Debug for Objective<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("n", &self.n)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("minimizer", &self.minimizer)
            .field("min_value", &self.min_value)
            .finish()
    }
}

impl<T: Real> Objective<T> {
    pub fn new<F>(n: usize, eval: F) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        Self {
            n,
            eval: Arc::new(eval),
            gradient: None,
            minimizer: None,
            min_value: None,
        }
    }

    pub fn with_gradient<F>(mut self, gradient: F) -> Self
    where
        F: Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_minimizer(mut self, q_star: Vec<T>) -> Self {
        self.minimizer = Some(q_star);
        self
    }

    pub fn with_min_value(mut self, j_star: T) -> Self {
        self.min_value = Some(j_star);
        self
    }

    /// `J(q) = Σ (q_i - target_i)²` over every coordinate.
    pub fn quadratic(target: &[T]) -> Self {
        let pairs: Vec<(usize, T)> = target.iter().copied().enumerate().collect();
        Self::quadratic_on(target.len(), &pairs).with_minimizer(target.to_vec())
    }

    /// `J(q) = Σ_{(i, c)} (q_i - c)²` over a subset of coordinates.
    ///
    /// The untracked coordinates make the minimum non-isolated, so no
    /// minimizer is recorded; `J* = 0` still is.
    pub fn quadratic_on(n: usize, targets: &[(usize, T)]) -> Self {
        let t1: Vec<(usize, T)> = targets.to_vec();
        let t2 = t1.clone();
        Self::new(n, move |q: &[T]| {
            t1.iter().fold(T::zero(), |acc, &(i, c)| {
                let d = q[i] - c;
                acc + d * d
            })
        })
        .with_gradient(move |q: &[T]| {
            let mut g = vec![T::zero(); q.len()];
            for &(i, c) in &t2 {
                g[i] += (q[i] - c) + (q[i] - c);
            }
            g
        })
        .with_min_value(T::zero())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn eval(&self, q: &[T]) -> T {
        (self.eval)(q)
    }

    pub fn try_eval(&self, q: &[T]) -> Result<T> {
        let j = self.eval(q);
        if !j.is_finite() {
            return Err(EscError::NonFinite {
                context: "objective".into(),
                state: q.iter().map(|v| v.as_f64()).collect(),
            });
        }
        Ok(j)
    }

    pub fn minimizer(&self) -> Option<&[T]> {
        self.minimizer.as_deref()
    }

    pub fn min_value(&self) -> Option<T> {
        self.min_value
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn analytic_gradient(&self, q: &[T]) -> Option<Vec<T>> {
        self.gradient.as_ref().map(|g| g(q))
    }

    /// `∇J(q)`: analytic when available, relative central differences otherwise.
    pub fn gradient(&self, q: &[T]) -> Result<Vec<T>> {
        match &self.gradient {
            Some(g) => Ok(g(q)),
            None => fd_gradient_relative(self, q, T::lit(FD_GRADIENT_STEP)),
        }
    }

    /// Checks `∇J(q*) ≈ 0` and `J(q) ≥ J*` at the supplied sample points.
    pub fn validate(&self, samples: &[Vec<T>], tol: T) -> Result<()> {
        if let Some(q_star) = &self.minimizer {
            let g = fd_gradient_relative(self, q_star, T::lit(FD_GRADIENT_STEP))?;
            if max_abs(&g) > tol {
                return Err(EscError::InvalidParameter {
                    field: "minimizer",
                    reason: format!("gradient at minimizer is {:?}", g),
                });
            }
        }
        if let Some(j_star) = self.min_value {
            for q in samples {
                let j = self.try_eval(q)?;
                if j < j_star - tol {
                    return Err(EscError::InvalidParameter {
                        field: "min_value",
                        reason: format!("J = {j} below J* = {j_star}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Central-difference gradient with a fixed absolute step `h`.
pub fn fd_gradient<T: Real>(obj: &Objective<T>, q: &[T], h: T) -> Result<Vec<T>> {
    if !(h > T::zero()) {
        return Err(EscError::InvalidParameter {
            field: "h",
            reason: "finite-difference step must be positive".into(),
        });
    }
    central_gradient(obj, q, |_| h)
}

/// Central-difference gradient with per-coordinate step `rel * (1 + |q_i|)`.
pub fn fd_gradient_relative<T: Real>(obj: &Objective<T>, q: &[T], rel: T) -> Result<Vec<T>> {
    central_gradient(obj, q, |v| rel * (T::one() + v.abs()))
}

fn central_gradient<T: Real>(obj: &Objective<T>, q: &[T], step: impl Fn(T) -> T) -> Result<Vec<T>> {
    let mut x = q.to_vec();
    let mut g = Vec::with_capacity(q.len());
    for i in 0..q.len() {
        let h = step(q[i]);
        x[i] = q[i] + h;
        let jp = obj.try_eval(&x)?;
        x[i] = q[i] - h;
        let jm = obj.try_eval(&x)?;
        x[i] = q[i];
        g.push((jp - jm) / (h + h));
    }
    Ok(g)
}
