//! Action of the planar configurations.
//!
//! Two radial integrals are reported for the exact family:
//!
//! ```text
//! reduced   = 2π ∫₀^∞ (f')²/r dr                         (from the profile)
//! reference = 2π c⁴ ∫₀^∞ r^{4c−3} / (1 + r^{2c})⁴ dr  (closed-form chain)
//! ```
//!
//! and the full density of the dimensionally reduced field,
//! `−Σ ⟨X, X⟩` over `X ∈ {F₁₂, D₁φ₁, D₂φ₁, D₁φ₂, D₂φ₂, [φ₁, φ₂]}`, is integrated
//! over the plane in polar coordinates.

use std::cell::Cell;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    FieldConfig, FieldError, FieldJet, FieldValue, PlanarField, Point, RadialFunctions, Smoothness,
    Variant,
};
use crate::liealg::{bracket, pair, Matrix2, PairingKind};
use crate::numerics::{integrate_halfline, Endpoint, QuadratureError, QuadratureSpec};
use crate::residual::{check_step, partials, ResidualError};

const MIN_ANGULAR_NODES: usize = 64;
const MAX_ANGULAR_NODES: usize = 4096;
const ANGULAR_REL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-9;
/// Radius below which a meron core is replaced by its leading power law.
const CORE_RADIUS: f64 = 1e-4;
/// Fitted powers within this distance of −1 count as non-integrable.
const CORE_POWER_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("shape parameter c must be positive and finite (got {0})")]
    InvalidParameter(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Quadrature(QuadratureError),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("density varies with angle by {spread:e} at r = {r}")]
    NotRadial { r: f64, spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub endpoint: Endpoint,
    pub partial_sum: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    pub c: Option<f64>,
    pub pairing: Option<PairingKind>,
    /// 2π∫(f')²/r dr.
    pub reduced_value: Option<f64>,
    /// 2πc⁴∫r^{4c−3}/(1+r^{2c})⁴ dr.
    pub reference_value: Option<f64>,
    /// Quadrature of the full density.
    pub full_value: Option<f64>,
    /// reduced_value / reference_value.
    pub ratio: Option<f64>,
    pub convergent: bool,
    pub error_estimate: f64,
    pub divergence: Option<Divergence>,
}

impl ActionReport {
    fn empty(c: Option<f64>, pairing: Option<PairingKind>) -> Self {
        ActionReport {
            c,
            pairing,
            reduced_value: None,
            reference_value: None,
            full_value: None,
            ratio: None,
            convergent: true,
            error_estimate: 0.0,
            divergence: None,
        }
    }

    /// Records a quadrature outcome; returns the value when it converged.
    fn absorb(&mut self, result: Result<f64, QuadratureError>) -> Result<Option<f64>, ActionError> {
        match result {
            Ok(v) => Ok(Some(v)),
            Err(QuadratureError::Divergent {
                partial_sum,
                endpoint,
                ratio,
            }) => {
                self.convergent = false;
                self.divergence.get_or_insert(Divergence {
                    endpoint,
                    partial_sum,
                    ratio,
                });
                Ok(None)
            }
            Err(e) => Err(ActionError::Quadrature(e)),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// c⁴·r^{4c−3}/(1 + r^{2c})⁴.
pub fn reference_integrand(c: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if c > 0.75 { 0.0 } else { f64::INFINITY };
    }
    let l = r.ln();
    c.powi(4) * ((4.0 * c - 3.0) * l - 4.0 * softplus(2.0 * c * l)).exp()
}

fn check_c(c: f64) -> Result<(), ActionError> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(ActionError::InvalidParameter(c))
    }
}

fn quad(
    f: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
    err: &mut f64,
) -> Result<f64, QuadratureError> {
    let q = integrate_halfline(f, spec)?;
    *err += q.error;
    Ok(q.value)
}

/// Both radial action integrals of `exact(c)`; divergence is a report state.
pub fn reduced_action(c: f64, spec: &QuadratureSpec) -> Result<ActionReport, ActionError> {
    check_c(c)?;
    spec.validate()
        .map_err(|e| ActionError::Quadrature(QuadratureError::Spec(e)))?;
    let profile = crate::fields::exact_profile(c)?.with_exclusion(f64::MIN_POSITIVE)?;
    let mut report = ActionReport::empty(Some(c), None);
    let mut err = 0.0;
    let reduced = quad(
        |r| match profile.values(r) {
            Ok(v) => v.df * v.df / r,
            Err(_) => f64::NAN,
        },
        spec,
        &mut err,
    );
    let reduced = report.absorb(reduced.map(|v| TAU * v))?;
    let mut reference_err = 0.0;
    let reference = quad(|r| reference_integrand(c, r), spec, &mut reference_err);
    let reference = report.absorb(reference.map(|v| TAU * v))?;
    report.reduced_value = reduced;
    report.reference_value = reference;
    report.error_estimate = TAU * err;
    if let (Some(a), Some(b)) = (reduced, reference) {
        report.ratio = Some(a / b);
    }
    Ok(report)
}

/// The six curvature components of the reduced field.
pub fn density_components(jet: &FieldJet) -> [Matrix2; 6] {
    let v = &jet.value;
    let cov = |d: Matrix2, a: &Matrix2, phi: &Matrix2| d + bracket(a, phi);
    [
        jet.dx.a2 - jet.dy.a1 + bracket(&v.a1, &v.a2),
        cov(jet.dx.phi1, &v.a1, &v.phi1),
        cov(jet.dy.phi1, &v.a2, &v.phi1),
        cov(jet.dx.phi2, &v.a1, &v.phi2),
        cov(jet.dy.phi2, &v.a2, &v.phi2),
        bracket(&v.phi1, &v.phi2),
    ]
}

/// −Σ⟨X, X⟩; the imaginary part vanishes for real-coefficient fields.
pub fn density_from_jet(jet: &FieldJet, pairing: PairingKind) -> f64 {
    let total: Complex64 = density_components(jet)
        .iter()
        .map(|x| pair(x, x, pairing))
        .sum();
    -total.re
}

/// Action density at `p`, with derivatives from central differences of step `h`.
pub fn action_density<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    pairing: PairingKind,
    h: f64,
) -> Result<f64, ActionError> {
    check_step(field, p, h)?;
    let value = field.field_at(p)?;
    let (dx, dy) = partials(field, p, h, false)?;
    Ok(density_from_jet(&FieldJet { value, dx, dy }, pairing))
}

/// Action density with analytic derivatives.
pub fn exact_density(
    config: &FieldConfig,
    p: Point,
    pairing: PairingKind,
) -> Result<f64, FieldError> {
    Ok(density_from_jet(&config.jet_at(p)?, pairing))
}

/// ∫₀^{2π} d(r, θ) dθ by trapezoid doubling; returns (value, last change).
fn angular_integral(
    density: impl Fn(Point) -> Result<f64, FieldError>,
    r: f64,
    offset: f64,
) -> Result<(f64, f64), FieldError> {
    let mut n = MIN_ANGULAR_NODES;
    let mut sum = 0.0;
    for k in 0..n {
        sum += density(Point::polar(r, offset + TAU * k as f64 / n as f64))?;
    }
    let mut value = sum * TAU / n as f64;
    loop {
        let mut extra = 0.0;
        for k in 0..n {
            let theta = offset + TAU * (k as f64 + 0.5) / n as f64;
            extra += density(Point::polar(r, theta))?;
        }
        sum += extra;
        n *= 2;
        let refined = sum * TAU / n as f64;
        let change = (refined - value).abs();
        value = refined;
        if change <= ANGULAR_REL_TOL * value.abs().max(1e-300) || n >= MAX_ANGULAR_NODES {
            return Ok((value, change));
        }
    }
}

/// Full action ∫_{ℝ²} density dx dy for a configuration.
pub fn full_action(
    config: &FieldConfig,
    pairing: PairingKind,
    spec: &QuadratureSpec,
) -> Result<ActionReport, ActionError> {
    full_action_rotated(config, pairing, spec, 0.0)
}

/// [`full_action`] with the angular grid rotated by `offset`.
pub fn full_action_rotated(
    config: &FieldConfig,
    pairing: PairingKind,
    spec: &QuadratureSpec,
    offset: f64,
) -> Result<ActionReport, ActionError> {
    spec.validate()
        .map_err(|e| ActionError::Quadrature(QuadratureError::Spec(e)))?;
    let c = match config.variant() {
        Variant::Exact { c } | Variant::Singular { c } => Some(*c),
        _ => None,
    };
    let mut report = ActionReport::empty(c, Some(pairing));
    match config.variant() {
        Variant::Vacuum => {
            report.full_value = Some(0.0);
            return Ok(report);
        }
        Variant::Singular { .. } => {
            return Err(ActionError::Unsupported(
                "the singular branch has a non-integrable density on r = 1".into(),
            ))
        }
        Variant::Fractional { particles }
            if particles
                .iter()
                .any(|q| q.c != 1.0 && (q.x != 0.0 || q.y != 0.0))
            => {
                return Err(ActionError::Unsupported(
                    "meron centres away from the origin".into(),
                ));
            }
        _ => {}
    }
    let cfg = config.clone().with_exclusion(f64::MIN_POSITIVE)?;
    let radial = matches!(config.variant(), Variant::Exact { .. });
    if radial {
        for &r in &[0.5, 1.0, 2.0] {
            let d0 = exact_density(&cfg, Point::polar(r, offset), pairing)?;
            let spread = [0.7, 1.9, 3.1, 4.4]
                .iter()
                .map(|&t| exact_density(&cfg, Point::polar(r, offset + t), pairing))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|d| (d - d0).abs())
                .fold(0.0, f64::max);
            if spread > SYMMETRY_TOL * (1.0 + d0.abs()) {
                return Err(ActionError::NotRadial { r, spread });
            }
        }
    }
    let angular_error = Cell::new(0.0f64);
    // ∫ density dθ at radius r, times r.
    let shell = |r: f64| -> f64 {
        if radial {
            return match exact_density(&cfg, Point::polar(r, offset), pairing) {
                Ok(d) => TAU * d * r,
                Err(_) => f64::NAN,
            };
        }
        match angular_integral(|p| exact_density(&cfg, p, pairing), r, offset) {
            Ok((v, change)) => {
                angular_error.set(angular_error.get().max(change * r));
                v * r
            }
            Err(_) => f64::NAN,
        }
    };
    let mut err = 0.0;
    let plain = quad(shell, spec, &mut err);
    let value = if config.smoothness_class() == Smoothness::Smooth
        || !matches!(
            plain,
            Err(QuadratureError::BudgetExhausted { .. } | QuadratureError::NonFinite { .. })
        ) {
        plain
    } else {
        // Cancellation noise near a meron at the origin; only those reach here.
        err = 0.0;
        let eps = CORE_RADIUS.max(config.exclusion());
        match core_estimate(&shell, eps) {
            Ok((core, core_err)) => {
                err += core_err;
                quad(|s| shell(eps + s), spec, &mut err).map(|v| v + core)
            }
            Err(ratio) => {
                // Only a partial sum is wanted here.
                let loose = QuadratureSpec {
                    rel_tol: 1e-6,
                    ..*spec
                };
                let mut ignored = 0.0;
                let partial_sum = match quad(|s| shell(eps + s), &loose, &mut ignored) {
                    Ok(v) => v,
                    Err(e) => e.partial_sum().unwrap_or(f64::NAN),
                };
                Err(QuadratureError::Divergent {
                    partial_sum,
                    endpoint: Endpoint::Origin,
                    ratio,
                })
            }
        }
    };
    err += angular_error.get();
    report.full_value = report.absorb(value)?;
    report.error_estimate = err;
    Ok(report)
}

/// ∫₀^ε of a radial integrand behaving like A·r^p near the origin.
///
/// The power is fitted from samples at ε and ε/2; the error is the change
/// when the fit moves to ε/2 and ε/4. A non-integrable power is returned as
/// `Err(shell_ratio)` with the ratio 2^{−(p+1)} of successive dyadic shells.
fn core_estimate(shell: &impl Fn(f64) -> f64, eps: f64) -> Result<(f64, f64), f64> {
    let fit = |r: f64| -> Result<f64, f64> {
        let (v1, v2) = (shell(r), shell(0.5 * r));
        if v1 == 0.0 || v2 == 0.0 || v1.signum() != v2.signum() {
            return Ok(0.0);
        }
        let p = (v1 / v2).log2();
        if p <= -1.0 + CORE_POWER_MARGIN {
            return Err(2f64.powf(-(p + 1.0)));
        }
        // ∫₀^r A·t^p dt for the first fit, extended down from r.
        Ok(v1 * r / (p + 1.0))
    };
    let coarse = fit(eps)?;
    let fine = fit(0.5 * eps)?;
    // The fine fit covers [0, ε/2]; add the slab [ε/2, ε] at the same power.
    let slab = coarse - coarse * 0.5f64.powf(power(shell, eps) + 1.0);
    let refined = fine + slab;
    Ok((coarse, (coarse - refined).abs()))
}

fn power(shell: &impl Fn(f64) -> f64, r: f64) -> f64 {
    (shell(r) / shell(0.5 * r)).log2()
}

/// A field conjugated by the constant gauge transformation exp(s·τ₁).
pub struct GaugeRotated<'a, P: ?Sized> {
    pub inner: &'a P,
    pub s: f64,
}

impl<P: PlanarField + ?Sized> PlanarField for GaugeRotated<'_, P> {
    fn field_at(&self, p: Point) -> Result<FieldValue, FieldError> {
        let half = Complex64::new(0.0, 0.5 * self.s);
        let g = Matrix2::diag(half.exp(), (-half).exp());
        let g_inv = Matrix2::diag((-half).exp(), half.exp());
        let conj = |m: Matrix2| g * m * g_inv;
        let v = self.inner.field_at(p)?;
        Ok(FieldValue {
            a1: conj(v.a1),
            a2: conj(v.a2),
            phi1: conj(v.phi1),
            phi2: conj(v.phi2),
        })
    }

    fn singular_distance(&self, p: Point) -> f64 {
        self.inner.singular_distance(p)
    }
}
