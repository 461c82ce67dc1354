//! Numerical kernels shared by the field, action and holonomy modules.
//!
//! * [`integrate_halfline`]: adaptive Simpson on the compactified half line
//!   `r = u/(1−u)`, with geometric shells at both ends whose sums double as
//!   a convergence/divergence detector.
//! * [`rk4_matrix`]: classical fixed-step RK4 for `dγ/dθ = −A(θ)·γ`.
//! * [`central_diff`] and [`richardson_diff`]: O(h²) and O(h⁴) derivatives.
//! * [`unwrap_phase`]: accumulated argument of a sampled closed curve.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liealg::Matrix2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("sample {index} has zero (or non-finite) magnitude")]
    ZeroSample { index: usize },
}

/// Which end of the half line a shell sequence is resolving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Origin,
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    /// Shell contributions near `endpoint` stopped shrinking geometrically.
    #[error(
        "integral diverges near {endpoint:?} (shell ratio {ratio:.4}); partial sum {partial_sum}"
    )]
    Divergent {
        partial_sum: f64,
        endpoint: Endpoint,
        ratio: f64,
    },
    #[error("no convergence within {subdivisions} subdivisions; partial sum {partial_sum}")]
    BudgetExhausted {
        partial_sum: f64,
        subdivisions: usize,
    },
    #[error("integrand is not finite at r = {r}")]
    NonFinite { r: f64 },
    #[error(transparent)]
    Spec(#[from] NumericsError),
}

impl QuadratureError {
    /// Partial sum accumulated before the failure, when there is one.
    pub fn partial_sum(&self) -> Option<f64> {
        match self {
            QuadratureError::Divergent { partial_sum, .. }
            | QuadratureError::BudgetExhausted { partial_sum, .. } => Some(*partial_sum),
            _ => None,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            QuadratureError::Divergent { .. } | QuadratureError::BudgetExhausted { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 100_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(NumericsError::InvalidSpec(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::InvalidSpec(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub subdivisions: usize,
}

/// Shells are u ∈ [2^{−k−1}, 2^{−k}] near the origin and the mirrored
/// r ∈ [2^k − 1, 2^{k+1} − 1] near infinity, for k ≥ CORE_LEVEL.
const CORE_LEVEL: i32 = 3;
const MAX_SHELLS: i32 = 200;
/// Shell ratio at or above which growth counts as non-decaying.
const DIVERGENCE_RATIO: f64 = 0.98;
/// Consecutive non-decaying shells needed to declare divergence.
const DIVERGENCE_RUN: usize = 4;
const MIN_SHELLS_FOR_DIVERGENCE: usize = 12;
const MAX_DEPTH: u32 = 48;

struct Budget {
    used: usize,
    limit: usize,
}

enum SimpsonFail {
    NonFinite(f64),
    Budget,
}

fn checked(f: &impl Fn(f64) -> f64, x: f64, r_of: impl Fn(f64) -> f64) -> Result<f64, SimpsonFail> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SimpsonFail::NonFinite(r_of(x)))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    r_of: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut Budget,
) -> Result<(f64, f64), SimpsonFail> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = checked(f, lm, r_of)?;
    let frm = checked(f, rm, r_of)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    budget.used += 1;
    if budget.used > budget.limit {
        return Err(SimpsonFail::Budget);
    }
    let (lv, le) = simpson_step(
        f,
        r_of,
        a,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * tol,
        depth - 1,
        budget,
    )?;
    let (rv, re) = simpson_step(
        f,
        r_of,
        m,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * tol,
        depth - 1,
        budget,
    )?;
    Ok((lv + rv, le + re))
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    r_of: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    budget: &mut Budget,
) -> Result<(f64, f64), SimpsonFail> {
    // Four initial panels so that narrow features inside [a, b] are seen.
    let panels = 4;
    let w = (b - a) / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * w;
        let hi = if p + 1 == panels { b } else { lo + w };
        let fa = checked(f, lo, r_of)?;
        let fm = checked(f, 0.5 * (lo + hi), r_of)?;
        let fb = checked(f, hi, r_of)?;
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        let (v, e) = simpson_step(
            f,
            r_of,
            lo,
            hi,
            fa,
            fm,
            fb,
            whole,
            tol / panels as f64,
            MAX_DEPTH,
            budget,
        )?;
        value += v;
        error += e;
    }
    Ok((value, error))
}

struct EndResult {
    value: f64,
    error: f64,
}

/// Sums geometric shells towards one endpoint until the remaining tail is
/// resolved by a geometric extrapolation, or the shells stop decaying.
fn integrate_end(
    shell: &mut dyn FnMut(i32, f64) -> Result<(f64, f64), SimpsonFail>,
    endpoint: Endpoint,
    target: f64,
    partial_before: f64,
    budget_limit: usize,
) -> Result<EndResult, QuadratureError> {
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut history: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    for (n, k) in (CORE_LEVEL..CORE_LEVEL + MAX_SHELLS).enumerate() {
        let shell_tol = 0.25 * target * 0.5f64.powf(0.5 * n as f64) * 0.3;
        let s = match shell(k, shell_tol) {
            Ok((v, e)) => {
                err += e;
                v
            }
            Err(SimpsonFail::Budget) => {
                return Err(QuadratureError::BudgetExhausted {
                    partial_sum: partial_before + sum,
                    subdivisions: budget_limit,
                })
            }
            Err(SimpsonFail::NonFinite(r)) => {
                // The endpoint cannot be sampled any closer; fall back on the
                // power law seen so far.
                return match (ratios.last(), ratios.len() >= 2) {
                    (Some(&rho), true) if rho.abs() < DIVERGENCE_RATIO => {
                        let last = *history.last().unwrap_or(&0.0);
                        let tail = last * rho / (1.0 - rho);
                        let spread = (ratios[ratios.len() - 1] - ratios[ratios.len() - 2]).abs();
                        let unc = last.abs() * spread / (1.0 - rho).powi(2);
                        Ok(EndResult {
                            value: sum + tail,
                            error: err + unc,
                        })
                    }
                    (Some(&rho), true) => Err(QuadratureError::Divergent {
                        partial_sum: partial_before + sum,
                        endpoint,
                        ratio: rho,
                    }),
                    _ => Err(QuadratureError::NonFinite { r }),
                };
            }
        };
        sum += s;
        if let Some(&prev) = history.last() {
            if prev != 0.0 {
                ratios.push(s / prev);
            } else if s == 0.0 {
                ratios.push(0.0);
            } else {
                ratios.push(f64::INFINITY);
            }
        }
        history.push(s);

        // Two consecutive negligible shells: nothing left to integrate.
        if history.len() >= 2 {
            let tiny = 1e-3 * target;
            if s.abs() <= tiny && history[history.len() - 2].abs() <= tiny {
                return Ok(EndResult {
                    value: sum,
                    error: err + s.abs(),
                });
            }
        }

        if ratios.len() >= 2 {
            let rho = ratios[ratios.len() - 1];
            let rho_prev = ratios[ratios.len() - 2];
            if rho.abs() < DIVERGENCE_RATIO && rho_prev.abs() < 1.0 {
                let tail = s * rho / (1.0 - rho);
                let unc = s.abs() * (rho - rho_prev).abs() / (1.0 - rho).powi(2)
                    + tail.abs() * f64::EPSILON;
                if unc <= 0.1 * target {
                    return Ok(EndResult {
                        value: sum + tail,
                        error: err + unc,
                    });
                }
            }
            if history.len() >= MIN_SHELLS_FOR_DIVERGENCE && ratios.len() >= DIVERGENCE_RUN {
                let recent = &ratios[ratios.len() - DIVERGENCE_RUN..];
                if recent.iter().all(|q| *q >= DIVERGENCE_RATIO) {
                    return Err(QuadratureError::Divergent {
                        partial_sum: partial_before + sum,
                        endpoint,
                        ratio: rho,
                    });
                }
            }
        }
    }
    let rho = ratios.last().copied().unwrap_or(f64::NAN);
    Err(QuadratureError::Divergent {
        partial_sum: partial_before + sum,
        endpoint,
        ratio: rho,
    })
}

/// ∫₀^∞ fn(r) dr.
///
/// The integration runs in the compactified variable `u = r/(1+r)`; the core
/// `u ∈ [1/8, 7/8]` is handled by adaptive Simpson and each end by a sequence
/// of shells halving the distance to the endpoint. A shell sequence that stops
/// decaying geometrically is reported as [`QuadratureError::Divergent`] with
/// the partial sum accumulated so far.
pub fn integrate_halfline(
    f: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, QuadratureError> {
    spec.validate()?;
    let r_of_u = |u: f64| u / (1.0 - u);
    let g = |u: f64| {
        let w = 1.0 - u;
        f(u / w) / (w * w)
    };
    let identity = |r: f64| r;

    let u_lo = 0.5f64.powi(CORE_LEVEL);
    let u_hi = 1.0 - u_lo;

    // Coarse estimate of the core to fix an absolute error target.
    let mut coarse = 0.0;
    let n = 64;
    let h = (u_hi - u_lo) / n as f64;
    for i in 0..=n {
        let u = u_lo + i as f64 * h;
        let v = g(u);
        if !v.is_finite() {
            return Err(QuadratureError::NonFinite { r: r_of_u(u) });
        }
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        coarse += w * v;
    }
    coarse *= h / 3.0;
    let target = spec.abs_tol.max(spec.rel_tol * coarse.abs());

    let mut budget = Budget {
        used: 0,
        limit: spec.max_subdivisions,
    };
    let (core, core_err) =
        match adaptive_simpson(&g, &r_of_u, u_lo, u_hi, 0.25 * target, &mut budget) {
            Ok(v) => v,
            Err(SimpsonFail::Budget) => {
                return Err(QuadratureError::BudgetExhausted {
                    partial_sum: coarse,
                    subdivisions: spec.max_subdivisions,
                })
            }
            Err(SimpsonFail::NonFinite(r)) => return Err(QuadratureError::NonFinite { r }),
        };

    let limit = spec.max_subdivisions;
    let origin = {
        let mut shell = |k: i32, tol: f64| {
            let hi = 0.5f64.powi(k);
            adaptive_simpson(&g, &r_of_u, 0.5 * hi, hi, tol, &mut budget)
        };
        integrate_end(&mut shell, Endpoint::Origin, target, core, limit)?
    };
    let infinity = {
        let mut shell = |k: i32, tol: f64| {
            let lo = 2f64.powi(k) - 1.0;
            let hi = 2f64.powi(k + 1) - 1.0;
            adaptive_simpson(&f, &identity, lo, hi, tol, &mut budget)
        };
        integrate_end(
            &mut shell,
            Endpoint::Infinity,
            target,
            core + origin.value,
            limit,
        )?
    };

    Ok(Quadrature {
        value: core + origin.value + infinity.value,
        error: core_err + origin.error + infinity.error,
        subdivisions: budget.used,
    })
}

/// Vector-space operations needed by the finite-difference helpers.
pub trait Linear: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Linear for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// (fn(x+h) − fn(x−h)) / 2h.
pub fn central_diff<T: Linear>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    (f(x + h) - f(x - h)) * (0.5 / h)
}

/// Richardson-extrapolated central difference, error O(h⁴).
pub fn richardson_diff<T: Linear>(f: impl Fn(f64) -> T, x: f64, h: f64) -> T {
    let coarse = central_diff(&f, x, h);
    let fine = central_diff(&f, x, 0.5 * h);
    (fine * 4.0 - coarse) * (1.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSpec {
    /// RK4 steps per 2π of arc.
    pub step_count: usize,
    /// Re-solve at twice the resolution and report the difference.
    pub richardson_check: bool,
}

impl Default for OdeSpec {
    fn default() -> Self {
        OdeSpec {
            step_count: 4096,
            richardson_check: false,
        }
    }
}

impl OdeSpec {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.step_count < 16 {
            return Err(NumericsError::InvalidSpec(format!(
                "step_count must be at least 16 (got {})",
                self.step_count
            )));
        }
        Ok(())
    }

    fn steps_for(&self, theta_end: f64) -> usize {
        if theta_end <= 0.0 {
            return 0;
        }
        ((self.step_count as f64 * theta_end / TAU).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct Rk4Solution {
    /// (θ, γ(θ)) at every step node, starting with (0, init).
    pub path: Vec<(f64, Matrix2)>,
    /// Max-entry difference against the double-resolution solve, if requested.
    pub step_doubling_diff: Option<f64>,
}

impl Rk4Solution {
    pub fn end(&self) -> Matrix2 {
        self.path
            .last()
            .map(|(_, m)| *m)
            .unwrap_or_else(Matrix2::identity)
    }
}

fn rk4_path(
    rhs: &impl Fn(f64) -> Matrix2,
    theta_end: f64,
    init: Matrix2,
    steps: usize,
) -> Vec<(f64, Matrix2)> {
    let mut path = Vec::with_capacity(steps + 1);
    path.push((0.0, init));
    if steps == 0 {
        return path;
    }
    let h = theta_end / steps as f64;
    let mut y = init;
    for n in 0..steps {
        let t = n as f64 * h;
        let a0 = rhs(t);
        let a_mid = rhs(t + 0.5 * h);
        let a1 = rhs(t + h);
        let k1 = -(a0 * y);
        let k2 = -(a_mid * (y + k1 * (0.5 * h)));
        let k3 = -(a_mid * (y + k2 * (0.5 * h)));
        let k4 = -(a1 * (y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        path.push(((n + 1) as f64 * h, y));
    }
    path
}

/// Solves dγ/dθ = −rhs(θ)·γ on [0, θ_end] with γ(0) = init.
pub fn rk4_matrix(
    rhs: impl Fn(f64) -> Matrix2,
    theta_end: f64,
    init: Matrix2,
    spec: &OdeSpec,
) -> Result<Rk4Solution, NumericsError> {
    spec.validate()?;
    if !theta_end.is_finite() || theta_end < 0.0 {
        return Err(NumericsError::InvalidSpec(format!(
            "invalid end angle {theta_end}"
        )));
    }
    let steps = spec.steps_for(theta_end);
    let path = rk4_path(&rhs, theta_end, init, steps);
    let step_doubling_diff = if spec.richardson_check {
        let fine = rk4_path(&rhs, theta_end, init, 2 * steps);
        let end_fine = fine.last().map(|(_, m)| *m).unwrap_or(init);
        let end = path.last().map(|(_, m)| *m).unwrap_or(init);
        Some((end - end_fine).max_abs())
    } else {
        None
    };
    Ok(Rk4Solution {
        path,
        step_doubling_diff,
    })
}

/// Solves dD/dθ = −rhs(θ)·(I + D), D(0) = 0, and returns (θ, D) at every node.
///
/// With `rhs` the difference between a generator and a reference generator
/// this tracks γ·γ_ref⁻¹ − I directly, so deviations far below unit round-off
/// keep their relative accuracy.
pub fn rk4_offset(
    rhs: impl Fn(f64) -> Matrix2,
    theta_end: f64,
    spec: &OdeSpec,
) -> Result<Vec<(f64, Matrix2)>, NumericsError> {
    spec.validate()?;
    let steps = spec.steps_for(theta_end);
    let mut path = Vec::with_capacity(steps + 1);
    path.push((0.0, Matrix2::zero()));
    if steps == 0 {
        return Ok(path);
    }
    let h = theta_end / steps as f64;
    let mut d = Matrix2::zero();
    for n in 0..steps {
        let t = n as f64 * h;
        let b0 = rhs(t);
        let b_mid = rhs(t + 0.5 * h);
        let b1 = rhs(t + h);
        let k1 = -(b0 * d + b0);
        let d2 = d + k1 * (0.5 * h);
        let k2 = -(b_mid * d2 + b_mid);
        let d3 = d + k2 * (0.5 * h);
        let k3 = -(b_mid * d3 + b_mid);
        let d4 = d + k3 * h;
        let k4 = -(b1 * d4 + b1);
        d += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        path.push(((n + 1) as f64 * h, d));
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnwrappedPhase {
    /// Accumulated argument change, radians.
    pub total: f64,
    /// Largest single wrapped step, radians.
    pub max_step: f64,
}

impl UnwrappedPhase {
    pub fn winding(&self) -> i64 {
        (self.total / TAU).round() as i64
    }
}

/// Continuous accumulated argument along a sequence of non-zero samples.
///
/// Consecutive samples are assumed to differ in phase by less than π.
pub fn unwrap_phase(samples: &[Complex64]) -> Result<UnwrappedPhase, NumericsError> {
    for (index, z) in samples.iter().enumerate() {
        let n = z.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(NumericsError::ZeroSample { index });
        }
    }
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in samples.windows(2) {
        let step = (w[1] * w[0].conj()).arg();
        total += step;
        max_step = max_step.max(step.abs());
    }
    Ok(UnwrappedPhase { total, max_step })
}
