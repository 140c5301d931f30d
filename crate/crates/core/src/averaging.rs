//! Lie-bracket machinery and the averaged system.
//!
//! Bracket convention: `[F, G] = (∂G/∂x) F - (∂F/∂x) G`, so
//! `[Y, Z] = (∂Z/∂x) Y - (∂Y/∂x) Z`.
//!
//! When the drift is at most quadratic in the velocities, the bracket series
//! of the pulled-back field stops after the second term. Averaging over one
//! dither period then gives the time-invariant field
//!
//! ```text
//! x̄' = Z(x̄) + 1/4 [0; M22 A; -2k ∇J(q̄)·A]
//! ```
//!
//! with `M22(i, k) = Σ_j ∂²f_i/∂q̇_k∂q̇_j a_j`.

use crate::error::{EscError, Result};
use crate::esc::EscClosedLoop;
use crate::integrator::{simulate, Trajectory, TrajectoryMeta};
use crate::scalar::{dot, norm2, Real};
use crate::state::StateVector;
use crate::system::{MechanicalSystem, FD_HESSIAN_STEP};

/// Weight of the second-order bracket term after averaging.
pub const AVERAGING_WEIGHT: f64 = 0.25;

/// Relative steps of the nested difference quotients, innermost first.
/// Central differences are exact on quadratics, so the steps can be large
/// for drifts quadratic in the velocities; larger steps keep the nested
/// rounding noise down.
pub const NESTED_STEPS: [f64; 3] = [1e-2, 2e-2, 4e-2];

/// The guard demands `|v| > GUARD_FACTOR * (total step)` on every nonsmooth
/// velocity coordinate.
pub const GUARD_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianSource {
    Analytic,
    FiniteDifference,
}

/// Central-difference Jacobian `∂F/∂x` of a field over the packed state,
/// row-major `dim × dim`. Coordinate `j` is perturbed by `h (1 + |x_j|)`,
/// which is exact on linear fields.
pub fn fd_jacobian<T, F>(mut field: F, x: &StateVector<T>, h: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    if !(h > T::zero()) {
        return Err(EscError::InvalidParameter {
            field: "h",
            reason: "finite-difference step must be positive".into(),
        });
    }
    let dim = x.dim();
    let mut jac = vec![T::zero(); dim * dim];
    let mut probe = x.clone();
    for j in 0..dim {
        let xj = x[j];
        let step = h * (T::one() + xj.abs());
        probe.as_mut_slice()[j] = xj + step;
        let plus = eval_at(&mut field, &probe, j)?;
        probe.as_mut_slice()[j] = xj - step;
        let minus = eval_at(&mut field, &probe, j)?;
        probe.as_mut_slice()[j] = xj;
        if plus.len() != dim || minus.len() != dim {
            return Err(EscError::DimensionMismatch {
                field: "field",
                expected: dim,
                got: plus.len(),
            });
        }
        for i in 0..dim {
            jac[i * dim + j] = (plus[i] - minus[i]) / (step + step);
        }
    }
    Ok(jac)
}

/// `coordinate == usize::MAX` marks a directional probe.
fn eval_at<T: Real, F>(field: &mut F, x: &StateVector<T>, coordinate: usize) -> Result<Vec<T>>
where
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    let context = || {
        if coordinate == usize::MAX {
            "field at directional probe".to_string()
        } else {
            format!("field at perturbed coordinate {coordinate}")
        }
    };
    let v = field(x).map_err(|e| match e {
        EscError::NonFinite { state, .. } => EscError::NonFinite {
            context: context(),
            state,
        },
        other => other,
    })?;
    if v.iter().any(|c| !c.is_finite()) {
        return Err(EscError::NonFinite {
            context: context(),
            state: x.to_f64(),
        });
    }
    Ok(v)
}

fn mat_vec<T: Real>(m: &[T], v: &[T]) -> Vec<T> {
    let dim = v.len();
    (0..dim)
        .map(|i| dot(&m[i * dim..(i + 1) * dim], v))
        .collect()
}

/// Central difference of `field` along direction `v`:
/// `(G(x + σv) - G(x - σv)) / 2σ`, with `σ` chosen so that no coordinate
/// moves by more than `rel (1 + |x_j|)`.
///
/// Exact (up to rounding) when `field` is at most quadratic along `v`.
pub fn directional_derivative<T, F>(field: F, x: &StateVector<T>, v: &[T], rel: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    directional_derivative_bounded(field, x, v, rel, x.dim())
}

/// As [`directional_derivative`], but only the first `bounded` coordinates
/// limit the step. Coordinates past `bounded` must enter `field` affinely,
/// so long steps along them cost no accuracy. If `v` vanishes on the
/// bounded coordinates, every coordinate limits the step.
pub fn directional_derivative_bounded<T, F>(
    mut field: F,
    x: &StateVector<T>,
    v: &[T],
    rel: T,
    bounded: usize,
) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    let dim = x.dim();
    let step = |limit: usize| {
        x.as_slice()
            .iter()
            .zip(v)
            .take(limit)
            .filter(|(_, vj)| **vj != T::zero())
            .map(|(&xj, &vj)| rel * (T::one() + xj.abs()) / vj.abs())
            .fold(T::infinity(), T::min)
    };
    let mut sigma = step(bounded);
    if !sigma.is_finite() {
        sigma = step(dim);
    }
    if !sigma.is_finite() {
        // zero direction
        return Ok(vec![T::zero(); dim]);
    }
    let dir = StateVector::from_packed(x.n(), v.to_vec())?;
    let gp = eval_at(&mut field, &x.add_scaled(sigma, &dir), usize::MAX)?;
    let gm = eval_at(&mut field, &x.add_scaled(-sigma, &dir), usize::MAX)?;
    Ok(gp
        .iter()
        .zip(&gm)
        .map(|(&a, &b)| (a - b) / (sigma + sigma))
        .collect())
}

/// `[F, G](x) = (∂G/∂x) F - (∂F/∂x) G`, each term a directional central
/// difference with relative step `h` (see [`directional_derivative`]).
pub fn lie_bracket<T, F, G>(f: F, g: G, x: &StateVector<T>, h: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
    G: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    lie_bracket_bounded(f, g, x, h, x.dim())
}

/// [`lie_bracket`] with steps limited by the first `bounded` coordinates
/// only (see [`directional_derivative_bounded`]).
pub fn lie_bracket_bounded<T, F, G>(
    mut f: F,
    mut g: G,
    x: &StateVector<T>,
    h: T,
    bounded: usize,
) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&StateVector<T>) -> Result<Vec<T>>,
    G: FnMut(&StateVector<T>) -> Result<Vec<T>>,
{
    let fx = f(x)?;
    let gx = g(x)?;
    if fx.len() != x.dim() || gx.len() != x.dim() {
        return Err(EscError::DimensionMismatch {
            field: "field",
            expected: x.dim(),
            got: if fx.len() != x.dim() {
                fx.len()
            } else {
                gx.len()
            },
        });
    }
    let a = directional_derivative_bounded(&mut g, x, &fx, h, bounded)?;
    let b = directional_derivative_bounded(&mut f, x, &gx, h, bounded)?;
    Ok(a.iter().zip(&b).map(|(&p, &q)| p - q).collect())
}

/// Finite-difference margin for the nonsmooth guard at velocity `qdot` when
/// the quotients nest `levels` deep.
pub fn guard_margin<T: Real>(qdot: &[T], levels: usize) -> T {
    let total: f64 = NESTED_STEPS[..levels.min(NESTED_STEPS.len())].iter().sum();
    let scale = qdot.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    T::lit(GUARD_FACTOR * total.max(FD_HESSIAN_STEP)) * (T::one() + scale)
}

impl<T: Real> EscClosedLoop<T> {
    // Z, Y and their brackets are affine in û, so only q and q̇ limit the
    // finite-difference steps.
    fn check_smooth_nested(&self, x: &StateVector<T>, levels: usize) -> Result<()> {
        self.system()
            .check_smooth(x.q(), x.qdot(), guard_margin(x.qdot(), levels))
    }

    /// `[Y, Z]` at frozen `t`, by nested central differences.
    pub fn bracket_yz_numeric(&self, x: &StateVector<T>, t: T) -> Result<Vec<T>> {
        self.check_smooth_nested(x, 1)?;
        let bounded = 2 * self.n();
        lie_bracket_bounded(
            |s: &StateVector<T>| self.dither_field(s, t).map(StateVector::into_vec),
            |s: &StateVector<T>| self.drift_field(s).map(StateVector::into_vec),
            x,
            T::lit(NESTED_STEPS[0]),
            bounded,
        )
    }

    /// `[Y, [Y, Z]]` at frozen `t`, by nested central differences.
    pub fn bracket_yyz_numeric(&self, x: &StateVector<T>, t: T) -> Result<Vec<T>> {
        self.check_smooth_nested(x, 2)?;
        let bounded = 2 * self.n();
        let inner = |s: &StateVector<T>| {
            lie_bracket_bounded(
                |p: &StateVector<T>| self.dither_field(p, t).map(StateVector::into_vec),
                |p: &StateVector<T>| self.drift_field(p).map(StateVector::into_vec),
                s,
                T::lit(NESTED_STEPS[0]),
                bounded,
            )
        };
        lie_bracket_bounded(
            |s: &StateVector<T>| self.dither_field(s, t).map(StateVector::into_vec),
            inner,
            x,
            T::lit(NESTED_STEPS[1]),
            bounded,
        )
    }

    /// `[Y, [Y, [Y, Z]]]` at frozen `t`, by nested central differences.
    pub fn bracket_yyyz_numeric(&self, x: &StateVector<T>, t: T) -> Result<Vec<T>> {
        self.check_smooth_nested(x, 3)?;
        let bounded = 2 * self.n();
        let y = |p: &StateVector<T>| self.dither_field(p, t).map(StateVector::into_vec);
        let level1 = |s: &StateVector<T>| {
            lie_bracket_bounded(
                y,
                |p: &StateVector<T>| self.drift_field(p).map(StateVector::into_vec),
                s,
                T::lit(NESTED_STEPS[0]),
                bounded,
            )
        };
        let level2 = |s: &StateVector<T>| {
            lie_bracket_bounded(y, level1, s, T::lit(NESTED_STEPS[1]), bounded)
        };
        lie_bracket_bounded(y, level2, x, T::lit(NESTED_STEPS[2]), bounded)
    }

    /// `[A; (∂f/∂q̇) A + k J(q) C; -k ∇J(q)·q̇] ω cos(ωt)`.
    pub fn bracket_yz_closed_form(&self, x: &StateVector<T>, t: T) -> Result<Vec<T>> {
        let n = self.n();
        let g = self.gains();
        let jac = self.system().velocity_jacobian(x.q(), x.qdot())?;
        let j = self.objective().try_eval(x.q())?;
        let grad = self.objective().gradient(x.q())?;
        let s = self.dither(t);
        let ja = mat_vec(&jac, g.a());
        let mut out = Vec::with_capacity(2 * n + 1);
        out.extend(g.a().iter().map(|&a| a * s));
        out.extend((0..n).map(|i| (ja[i] + g.k() * j * g.c()[i]) * s));
        out.push(-g.k() * dot(&grad, x.qdot()) * s);
        Ok(out)
    }

    /// `[0; M22 A; -2k ∇J(q)·A] ω² cos²(ωt)`.
    pub fn bracket_yyz_closed_form(&self, x: &StateVector<T>, t: T) -> Result<Vec<T>> {
        let n = self.n();
        let g = self.gains();
        let source = if self.system().has_analytic_hessian() {
            HessianSource::Analytic
        } else {
            HessianSource::FiniteDifference
        };
        let m = m22(
            self.system(),
            x.q(),
            x.qdot(),
            g.a(),
            source,
            T::lit(FD_HESSIAN_STEP),
        )?;
        let grad = self.objective().gradient(x.q())?;
        let d = self.dither(t);
        let s2 = d * d;
        let ma = mat_vec(&m, g.a());
        let mut out = vec![T::zero(); n];
        out.extend(ma.iter().map(|&v| v * s2));
        out.push(-T::lit(2.0) * g.k() * dot(&grad, g.a()) * s2);
        Ok(out)
    }

    /// Size of the third bracket relative to the second, both taken at
    /// `t = 0` and stripped of their dither factors `ω^j`:
    /// `(‖[Y,[Y,[Y,Z]]]‖ / ω³) / (1 + ‖[Y,[Y,Z]]‖ / ω²)`.
    ///
    /// Near zero certifies that the bracket series truncates.
    pub fn bracket_order3_residual(&self, x: &StateVector<T>) -> Result<T> {
        let w = self.gains().omega();
        let third = self.bracket_yyyz_numeric(x, T::zero())?;
        let second = self.bracket_yyz_closed_form(x, T::zero())?;
        let w2 = w * w;
        let scale = T::one() + norm2(&second) / w2;
        Ok(norm2(&third) / (w2 * w) / scale)
    }

    /// First-order averaged term `(1/T) ∫_0^T ∫_0^t [Y, Z](x, s) ds dt` at
    /// frozen `x`. The cosine's zero mean makes it vanish; this computes it
    /// anyway as a check.
    pub fn first_order_term(&self, x: &StateVector<T>, steps: usize) -> Result<Vec<T>> {
        let steps = steps.max(crate::esc::MIN_QUADRATURE_STEPS);
        let period = self.gains().period();
        let h = period / T::from_usize_lossy(steps);
        let half = T::lit(0.5);
        let dim = x.dim();
        let mut inner = vec![T::zero(); dim];
        let mut prev = self.bracket_yz_closed_form(x, T::zero())?;
        let mut outer = vec![T::zero(); dim];
        for i in 1..=steps {
            let cur = self.bracket_yz_closed_form(x, T::from_usize_lossy(i) * h)?;
            let before = inner.clone();
            for c in 0..dim {
                inner[c] += half * h * (prev[c] + cur[c]);
                outer[c] += half * h * (before[c] + inner[c]);
            }
            prev = cur;
        }
        Ok(outer.into_iter().map(|v| v / period).collect())
    }
}

/// `M22(i, k) = Σ_j ∂²f_i/∂q̇_k∂q̇_j a_j`, row-major `n × n`.
///
/// Refuses states within the guard margin of a nonsmooth point.
pub fn m22<T: Real>(
    system: &MechanicalSystem<T>,
    q: &[T],
    qdot: &[T],
    a: &[T],
    source: HessianSource,
    fd_step: T,
) -> Result<Vec<T>> {
    let margin = T::lit(GUARD_FACTOR) * fd_step * (T::one() + crate::scalar::max_abs(qdot));
    system.check_smooth(q, qdot, margin)?;
    m22_unchecked(system, q, qdot, a, source, fd_step)
}

fn m22_unchecked<T: Real>(
    system: &MechanicalSystem<T>,
    q: &[T],
    qdot: &[T],
    a: &[T],
    source: HessianSource,
    fd_step: T,
) -> Result<Vec<T>> {
    let n = system.n();
    if a.len() != n {
        return Err(EscError::DimensionMismatch {
            field: "A",
            expected: n,
            got: a.len(),
        });
    }
    let hess = match source {
        HessianSource::Analytic if system.has_analytic_hessian() => {
            system.velocity_hessian(q, qdot)?
        }
        _ => system.fd_velocity_hessian(q, qdot, fd_step)?,
    };
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            m[i * n + k] = (0..n).fold(T::zero(), |acc, j| acc + hess[(i * n + k) * n + j] * a[j]);
        }
    }
    Ok(m)
}

/// The time-invariant averaged closed loop.
#[derive(Debug, Clone)]
pub struct AveragedLoop<T> {
    closed: EscClosedLoop<T>,
    hessian_source: HessianSource,
    fd_step: T,
    weight: T,
}

impl<T: Real> AveragedLoop<T> {
    pub fn new(closed: EscClosedLoop<T>) -> Self {
        let hessian_source = if closed.system().has_analytic_hessian() {
            HessianSource::Analytic
        } else {
            HessianSource::FiniteDifference
        };
        Self {
            closed,
            hessian_source,
            fd_step: T::lit(FD_HESSIAN_STEP),
            weight: T::lit(AVERAGING_WEIGHT),
        }
    }

    pub fn with_hessian_source(mut self, source: HessianSource) -> Self {
        self.hessian_source = source;
        self
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    /// Overrides the `1/4` weight. Only useful for sensitivity studies.
    pub fn with_weight(mut self, weight: T) -> Self {
        self.weight = weight;
        self
    }

    pub fn closed_loop(&self) -> &EscClosedLoop<T> {
        &self.closed
    }

    pub fn hessian_source(&self) -> HessianSource {
        self.hessian_source
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    /// `Z(x̄) + w [0; M22 A; -2k ∇J(q̄)·A]`, with `w = 1/4` by default.
    ///
    /// With an analytic Hessian the sign convention `sign(0) = 0` is used at
    /// nonsmooth points; the finite-difference source refuses them.
    pub fn averaged_rhs(&self, xbar: &StateVector<T>) -> Result<StateVector<T>> {
        let lp = &self.closed;
        let g = lp.gains();
        let (q, qdot) = (xbar.q(), xbar.qdot());
        let m = match self.hessian_source {
            HessianSource::Analytic if lp.system().has_analytic_hessian() => m22_unchecked(
                lp.system(),
                q,
                qdot,
                g.a(),
                HessianSource::Analytic,
                self.fd_step,
            )?,
            _ => m22(
                lp.system(),
                q,
                qdot,
                g.a(),
                HessianSource::FiniteDifference,
                self.fd_step,
            )?,
        };
        let grad = lp.objective().gradient(q)?;
        let z = lp.drift_field(xbar)?;
        let ma = mat_vec(&m, g.a());
        let n = lp.n();
        let mut out = z.into_vec();
        for i in 0..n {
            out[n + i] += self.weight * ma[i];
        }
        out[2 * n] += self.weight * (-T::lit(2.0) * g.k() * dot(&grad, g.a()));
        StateVector::from_packed(n, out)
    }

    /// Integrates the averaged system on the same grid the true loop would use.
    pub fn simulate(&self, x0: StateVector<T>, t0: T, tf: T, dt: T) -> Result<Trajectory<T>> {
        let mut traj = simulate(|x: &StateVector<T>, _| self.averaged_rhs(x), x0, t0, tf, dt)?;
        traj.meta = TrajectoryMeta {
            dt,
            omega: Some(self.closed.gains().omega()),
            scenario_id: String::new(),
        };
        Ok(traj)
    }
}

/// Maps an averaged state to the true-state scale by applying the exact flow
/// of the dither field over `[0, t]` at frozen `q̄`:
/// `q̇ += A sin(ωt)`, `û += k J(q̄) sin(ωt)`.
///
/// The averaged state tracks the oscillation centre. The velocity and control
/// estimate carry an `O(1)` oscillation, so comparing raw states would not
/// shrink with `ε`. The lifted state differs from the true one by `O(ε)`.
pub fn dither_lift<T: Real>(
    lp: &EscClosedLoop<T>,
    xbar: &StateVector<T>,
    t: T,
) -> Result<StateVector<T>> {
    let g = lp.gains();
    let s = (g.omega() * t).sin();
    let j = lp.objective().try_eval(xbar.q())?;
    let n = lp.n();
    let mut out = xbar.clone();
    let data = out.as_mut_slice();
    for i in 0..n {
        data[n + i] += g.a()[i] * s;
    }
    data[2 * n] += g.k() * j * s;
    Ok(out)
}

/// Applies [`dither_lift`] at every sample.
pub fn lift_trajectory<T: Real>(
    lp: &EscClosedLoop<T>,
    avg: &Trajectory<T>,
) -> Result<Trajectory<T>> {
    let states = avg
        .times
        .iter()
        .zip(&avg.states)
        .map(|(&t, s)| dither_lift(lp, s, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: avg.times.clone(),
        states,
        meta: avg.meta.clone(),
    })
}

/// Raw triple integral `(1/T) ∫_0^T ∫_0^t ∫_0^s ω² cos²(ωs₁) ds₁ ds dt`,
/// by nested trapezoid.
///
/// The result is `π²/3 + 1/8`, not `1/4`: on its own the iterated integral
/// says nothing about the weight, because the bracket's state dependence is
/// part of the derivation. See [`crate::analysis::weight_self_test`].
pub fn raw_quadrature_weight<T: Real>(omega: T, steps: usize) -> T {
    let period = T::TAU() / omega;
    let h = period / T::from_usize_lossy(steps);
    let half = T::lit(0.5);
    let f = |t: T| omega * omega * (omega * t).cos().powi(2);
    let (mut i1, mut i2, mut i3) = (T::zero(), T::zero(), T::zero());
    let mut prev = f(T::zero());
    for k in 1..=steps {
        let cur = f(T::from_usize_lossy(k) * h);
        let new1 = i1 + half * h * (prev + cur);
        let new2 = i2 + half * h * (i1 + new1);
        i3 += half * h * (i2 + new2);
        i1 = new1;
        i2 = new2;
        prev = cur;
    }
    i3 / period
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{
        flapping_gains, flapping_loop, mass_spring_loop, pendulum_loop, FlappingParams,
        MassSpringParams, PendulumParams,
    };
    use crate::gains::EscGains;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ms() -> EscClosedLoop<f64> {
        let gains = EscGains::new(vec![3.0], vec![0.3], 5.0, 50.0).unwrap();
        mass_spring_loop(MassSpringParams::published(), 1.0, gains).unwrap()
    }

    fn flap() -> EscClosedLoop<f64> {
        let p = FlappingParams::published();
        flapping_loop(p, 1.0, flapping_gains(&p).unwrap()).unwrap()
    }

    fn sv(v: &[f64]) -> StateVector<f64> {
        StateVector::from_packed((v.len() - 1) / 2, v.to_vec()).unwrap()
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&diff) <= tol * (1.0 + norm2(a))
    }

    #[test]
    fn fd_jacobian_linear_and_constant() {
        let m = [1.0, -2.0, 0.5, 3.0, 0.0, 4.0, -1.0, 7.0, 2.0];
        let lin = |x: &StateVector<f64>| Ok(mat_vec(&m, x.as_slice()));
        let j = fd_jacobian(lin, &sv(&[0.3, -1.2, 5.0]), 1e-5).unwrap();
        for (a, b) in j.iter().zip(&m) {
            assert!((a - b).abs() < 1e-9);
        }
        let konst = |_: &StateVector<f64>| Ok(vec![1.0, 2.0, 3.0]);
        assert!(fd_jacobian(konst, &sv(&[1.0, 1.0, 1.0]), 1e-5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn fd_jacobian_mass_spring_drift_row() {
        let lp = ms();
        let j = fd_jacobian(
            |s| lp.drift_field(s).map(StateVector::into_vec),
            &sv(&[1.0, 1.0, 0.0]),
            1e-5,
        )
        .unwrap();
        assert_relative_eq!(j[3], -20.0, epsilon = 1e-8);
        assert_relative_eq!(j[4], -2.0, epsilon = 1e-8);
        assert_relative_eq!(j[5], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_jacobian_reports_coordinate() {
        let bad = |x: &StateVector<f64>| Ok(vec![if x[1] > 0.0 { f64::NAN } else { 0.0 }; 3]);
        match fd_jacobian(bad, &sv(&[0.0, 0.0, 0.0]), 1e-5) {
            Err(EscError::NonFinite { context, .. }) => assert!(context.contains('1'), "{context}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bracket_yz_mass_spring() {
        let lp = ms();
        let x = sv(&[3.0, 0.0, 0.0]);
        let cf = lp.bracket_yz_closed_form(&x, 0.0).unwrap();
        assert_relative_eq!(cf[0], 15.0, epsilon = 1e-12);
        assert_relative_eq!(cf[1], 2970.0, epsilon = 1e-9);
        assert_eq!(cf[2], 0.0);
        let num = lp.bracket_yz_numeric(&x, 0.0).unwrap();
        assert!(rel_close(&cf, &num, 1e-6), "{cf:?} {num:?}");

        let quarter = lp.gains().period() / 4.0;
        assert!(lp
            .bracket_yz_closed_form(&sv(&[2.0, 1.0, 3.0]), quarter)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn bracket_yyz_mass_spring() {
        let lp = ms();
        let cf = lp
            .bracket_yyz_closed_form(&sv(&[3.0, 0.0, 0.0]), 0.0)
            .unwrap();
        assert_eq!(cf[0], 0.0);
        assert_eq!(cf[1], 0.0);
        assert_relative_eq!(cf[2], -30000.0, epsilon = 1e-8);
        // minimizer with M22 = 0
        let z = lp
            .bracket_yyz_closed_form(&sv(&[1.0, 0.4, -2.0]), 0.3)
            .unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_fields_commute() {
        let f = |_: &StateVector<f64>| Ok(vec![1.0, 2.0, 3.0]);
        let g = |_: &StateVector<f64>| Ok(vec![-4.0, 0.5, 9.0]);
        assert!(lie_bracket(f, g, &sv(&[0.1, 0.2, 0.3]), 1e-5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn m22_examples() {
        let p = FlappingParams::<f64>::published();
        let lp = flap();
        let a = lp.gains().a().to_vec();
        let m = m22(
            lp.system(),
            &[0.0, 0.0],
            &[0.0, 10.0],
            &a,
            HessianSource::Analytic,
            1e-4,
        )
        .unwrap();
        assert_relative_eq!(m[0], -p.kd1 * a[1]);
        assert_relative_eq!(m[1], -p.kd1 * a[0] - 2.0 * p.k_lift * a[1]);
        assert_relative_eq!(m[2], -p.kd3 * a[1]);
        assert_relative_eq!(m[3], -p.kd3 * a[0] - 2.0 * p.kd2 * a[1]);
        assert!((m[0] - -6.91).abs() < 0.01);
        let fd = m22(
            lp.system(),
            &[0.0, 0.0],
            &[0.0, 10.0],
            &a,
            HessianSource::FiniteDifference,
            1e-4,
        )
        .unwrap();
        for (x, y) in m.iter().zip(&fd) {
            assert!((x - y).abs() < 1e-5 * (1.0 + x.abs()), "{x} {y}");
        }

        let sys =
            crate::benchmarks::mass_spring_system(MassSpringParams::<f64>::published()).unwrap();
        assert_eq!(
            m22(
                &sys,
                &[1.0],
                &[2.0],
                &[0.3],
                HessianSource::FiniteDifference,
                1e-4
            )
            .unwrap()[0],
            0.0
        );
        let sys = crate::benchmarks::pendulum_system(PendulumParams::<f64>::published()).unwrap();
        assert_eq!(
            m22(&sys, &[1.0], &[2.0], &[0.5], HessianSource::Analytic, 1e-4).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn m22_rejects_kink() {
        let lp = flap();
        let a = lp.gains().a().to_vec();
        match m22(
            lp.system(),
            &[0.0, 0.0],
            &[0.0, 1e-6],
            &a,
            HessianSource::Analytic,
            1e-4,
        ) {
            Err(EscError::NonsmoothPoint { coordinate, .. }) => assert_eq!(coordinate, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn averaged_rhs_examples() {
        let avg = AveragedLoop::new(ms());
        let r = avg.averaged_rhs(&sv(&[3.0, 0.0, 0.0])).unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], -60.0);
        assert_relative_eq!(r[2], -3.0, epsilon = 1e-12);
        // equilibrium: q* = 1, q̇ = 0, 3 û = 20
        let eq = avg.averaged_rhs(&sv(&[1.0, 0.0, 20.0 / 3.0])).unwrap();
        assert!(eq.as_slice().iter().all(|v| v.abs() < 1e-12));
        // bitwise repeatable (no hidden time dependence)
        let x = sv(&[2.2, -0.3, 1.7]);
        assert_eq!(avg.averaged_rhs(&x).unwrap(), avg.averaged_rhs(&x).unwrap());
    }

    #[test]
    fn averaged_uhat_row_is_gradient_descent() {
        let lp = flap();
        let k = lp.gains().k();
        let a0 = lp.gains().a()[0];
        let avg = AveragedLoop::new(lp);
        let x = sv(&[0.4, 0.1, 0.2, 12.0, -3.0]);
        let r = avg.averaged_rhs(&x).unwrap();
        let dj_dz = 2.0 * (0.4 - 1.0);
        assert_relative_eq!(r[4], -(k / 2.0) * dj_dz * a0, max_relative = 1e-12);
        // at the kink the sign convention keeps it finite
        assert!(avg
            .averaged_rhs(&StateVector::zeros(2))
            .unwrap()
            .is_finite());
    }

    #[test]
    fn first_order_term_vanishes() {
        let lp = ms();
        let i = lp.first_order_term(&sv(&[3.0, 0.5, 1.0]), 400).unwrap();
        assert!(norm2(&i) < 1e-9, "{i:?}");
    }

    #[test]
    fn raw_triple_integral() {
        let v = raw_quadrature_weight(50.0, 4000);
        let exact = std::f64::consts::PI.powi(2) / 3.0 + 0.125;
        assert!((v - exact).abs() < 1e-5, "{v} {exact}");
    }

    #[test]
    fn order3_residuals() {
        let lp = ms();
        assert!(lp.bracket_order3_residual(&sv(&[2.3, -0.7, 1.5])).unwrap() < 1e-6);
        let lp = flap();
        let r = lp
            .bracket_order3_residual(&sv(&[0.3, 0.2, -0.4, 10.0, 5.0]))
            .unwrap();
        assert!(r < 1e-4, "{r}");

        let cubic = crate::benchmarks::cubic_velocity_test_plant::<f64>();
        let gains = EscGains::new(vec![1.0], vec![1.0], 1.0, 50.0).unwrap();
        let lp = EscClosedLoop::new(cubic, crate::objective::Objective::quadratic(&[1.0]), gains)
            .unwrap();
        let r = lp.bracket_order3_residual(&sv(&[2.0, 1.0, 0.5])).unwrap();
        assert!(r > 1e-2, "{r}");
    }

    proptest! {
        #[test]
        fn bracket_antisymmetry(q in -3.0f64..3.0, qd in -3.0f64..3.0, u in -3.0f64..3.0) {
            let lp = ms();
            let x = sv(&[q, qd, u]);
            let y = |s: &StateVector<f64>| lp.dither_field(s, 0.1).map(StateVector::into_vec);
            let z = |s: &StateVector<f64>| lp.drift_field(s).map(StateVector::into_vec);
            let a = lie_bracket(y, z, &x, 1e-5).unwrap();
            let b = lie_bracket(z, y, &x, 1e-5).unwrap();
            for (p, r) in a.iter().zip(&b) {
                prop_assert!((p + r).abs() <= 1e-9 * (1.0 + p.abs()));
            }
        }

        #[test]
        fn closed_forms_match_nested_differences_pendulum(
            q in -3.0f64..3.0, qd in -3.0f64..3.0, u in -3.0f64..3.0, t in 0.0f64..0.2,
        ) {
            let gains = EscGains::new(vec![1.0], vec![0.5], 2.0, 50.0).unwrap();
            let lp = pendulum_loop(PendulumParams::published(), 2.0, gains).unwrap();
            let x = sv(&[q, qd, u]);
            let cf = lp.bracket_yz_closed_form(&x, t).unwrap();
            let num = lp.bracket_yz_numeric(&x, t).unwrap();
            prop_assert!(rel_close(&cf, &num, 1e-6));
            let cf = lp.bracket_yyz_closed_form(&x, t).unwrap();
            let num = lp.bracket_yyz_numeric(&x, t).unwrap();
            prop_assert!(rel_close(&cf, &num, 1e-4));
        }
    }
}
