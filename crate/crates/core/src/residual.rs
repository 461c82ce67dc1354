//! Residuals of Hitchin's equations.
//!
//! The reduced radial system
//!
//! ```text
//! r1 = f'/r − g·h,   r2 = g' + f·h/r,   r3 = h' + f·g/r
//! ```
//!
//! is the ground truth. The matrix equations
//! `F_A + κ[Φ, Φ†] = 0` and `∂̄Φ + λ[A^{0,1}, Φ] = 0` are checked with
//! central differences after κ and λ have been fitted on a known solution.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    Branch, FieldConfig, FieldError, FieldValue, PlanarField, Point, RadialFunctions,
    RadialProfile, TransformedSystem, Variant,
};
use crate::liealg::{bracket, conjugate_transpose, Matrix2};
use crate::numerics::richardson_diff;

/// Largest acceptable post-calibration residual.
pub const CALIBRATION_THRESHOLD: f64 = 1e-6;
/// Default finite-difference step for matrix residuals.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Radii used by [`calibrate_convention`].
pub const CALIBRATION_RADII: [f64; 3] = [0.5, 1.0, 2.0];
const CALIBRATION_ANGLES: usize = 8;
const CALIBRATION_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResidualError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("step h = {h} is invalid at distance {distance:e} from the nearest singular point")]
    InvalidStep { h: f64, distance: f64 },
    #[error("calibration needs an exact(c) configuration")]
    NotExact,
    #[error("calibration failed: residual {residual:e} exceeds {CALIBRATION_THRESHOLD:e} (kappa = {kappa})")]
    CalibrationFailed {
        kappa: Complex64,
        connection_weight: Complex64,
        residual: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeResidual {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl OdeResidual {
    pub fn max_abs(&self) -> f64 {
        self.r1.abs().max(self.r2.abs()).max(self.r3.abs())
    }
}

pub fn ode_residual<P: RadialFunctions + ?Sized>(
    profile: &P,
    r: f64,
) -> Result<OdeResidual, FieldError> {
    if !(r > 0.0) {
        return Err(FieldError::SingularRadius(r));
    }
    let v = profile.values(r)?;
    Ok(OdeResidual {
        r1: v.df / r - v.g * v.h,
        r2: v.dg + v.f * v.h / r,
        r3: v.dh + v.f * v.g / r,
    })
}

/// A pair (F, G) given by two closures; derivatives come from finite differences.
pub struct FnPair<F, G>(pub F, pub G);

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> TransformedSystem for FnPair<F, G> {
    fn values(&self, t: f64) -> Result<(f64, f64), FieldError> {
        Ok(((self.0)(t), (self.1)(t)))
    }
}

/// (q1, q2) of the transformed system for the given branch.
pub fn transformed_residual<S: TransformedSystem + ?Sized>(
    system: &S,
    branch: Branch,
    t: f64,
) -> Result<(f64, f64), FieldError> {
    if branch == Branch::Singular && t == 0.0 {
        return Err(FieldError::SingularParameter(t));
    }
    let (ff, gg) = system.values(t)?;
    let (dff, dgg) = match system.derivatives(t) {
        Some(d) => d?,
        None => {
            // Probe once so singular stencils surface as errors.
            let h = 1e-3 * t.abs().max(1.0);
            system.values(t - h)?;
            system.values(t + h)?;
            let df = richardson_diff(|x| system.values(x).map(|v| v.0).unwrap_or(f64::NAN), t, h);
            let dg = richardson_diff(|x| system.values(x).map(|v| v.1).unwrap_or(f64::NAN), t, h);
            (df, dg)
        }
    };
    let q1 = match branch {
        Branch::Exact => dff - gg * gg,
        Branch::Singular => dff + gg * gg,
    };
    Ok((q1, dgg + ff * gg))
}

/// Fitted constants of the matrix equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionCalibration {
    /// Coefficient of [Φ, Φ†] in the curvature equation.
    pub kappa: Complex64,
    /// Coefficient of [A^{0,1}, Φ] in the holomorphicity equation.
    pub connection_weight: Complex64,
    /// Largest residual left after the fit.
    pub residual: f64,
}

impl Default for ConventionCalibration {
    fn default() -> Self {
        ConventionCalibration {
            kappa: Complex64::new(0.0, 0.5),
            connection_weight: Complex64::new(1.0, 0.0),
            residual: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixResidual {
    pub curvature: f64,
    pub holomorphicity: f64,
}

/// Pieces of both matrix equations at a point.
#[derive(Debug, Clone, Copy)]
struct Terms {
    curvature: Matrix2,
    higgs_bracket: Matrix2,
    dbar_higgs: Matrix2,
    connection: Matrix2,
}

pub(crate) fn partials<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    h: f64,
    richardson: bool,
) -> Result<(FieldValue, FieldValue), FieldError> {
    let at = |x: f64, y: f64| field.field_at(Point::new(x, y));
    let diff = |plus: FieldValue, minus: FieldValue, step: f64| (plus - minus) * (0.5 / step);
    let dx = diff(at(p.x + h, p.y)?, at(p.x - h, p.y)?, h);
    let dy = diff(at(p.x, p.y + h)?, at(p.x, p.y - h)?, h);
    if !richardson {
        return Ok((dx, dy));
    }
    let half = 0.5 * h;
    let dx2 = diff(at(p.x + half, p.y)?, at(p.x - half, p.y)?, half);
    let dy2 = diff(at(p.x, p.y + half)?, at(p.x, p.y - half)?, half);
    let third = 1.0 / 3.0;
    Ok(((dx2 * 4.0 - dx) * third, (dy2 * 4.0 - dy) * third))
}

pub(crate) fn check_step<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    h: f64,
) -> Result<(), ResidualError> {
    let distance = field.singular_distance(p);
    if !(h.is_finite() && h > 0.0) || h >= 0.5 * distance {
        return Err(ResidualError::InvalidStep { h, distance });
    }
    Ok(())
}

fn terms<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    h: f64,
    richardson: bool,
) -> Result<Terms, ResidualError> {
    check_step(field, p, h)?;
    let v = field.field_at(p)?;
    let (dx, dy) = partials(field, p, h, richardson)?;
    let i = Complex64::new(0.0, 1.0);
    let phi = v.higgs();
    Ok(Terms {
        curvature: dx.a2 - dy.a1 + bracket(&v.a1, &v.a2),
        higgs_bracket: bracket(&phi, &conjugate_transpose(&phi)),
        dbar_higgs: (dx.higgs() + dy.higgs() * i) * 0.5,
        connection: bracket(&((v.a1 + v.a2 * i) * 0.5), &phi),
    })
}

/// Frobenius norms of both matrix equations at `p` with step `h`.
pub fn matrix_residual<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    h: f64,
    calibration: &ConventionCalibration,
) -> Result<MatrixResidual, ResidualError> {
    let t = terms(field, p, h, false)?;
    Ok(MatrixResidual {
        curvature: (t.curvature + t.higgs_bracket * calibration.kappa).frobenius_norm(),
        holomorphicity: (t.dbar_higgs + t.connection * calibration.connection_weight)
            .frobenius_norm(),
    })
}

/// Finite-difference F₁₂ alone, for convergence studies.
pub fn fd_curvature<P: PlanarField + ?Sized>(
    field: &P,
    p: Point,
    h: f64,
) -> Result<Matrix2, ResidualError> {
    Ok(terms(field, p, h, false)?.curvature)
}

/// Fits κ and λ on `exact(c)` over [`CALIBRATION_RADII`].
pub fn calibrate_convention(config: &FieldConfig) -> Result<ConventionCalibration, ResidualError> {
    calibrate_on_grid(config, &CALIBRATION_RADII)
}

/// Complex least-squares fit of κ and λ over the given radii.
pub fn calibrate_on_grid(
    config: &FieldConfig,
    radii: &[f64],
) -> Result<ConventionCalibration, ResidualError> {
    if !matches!(config.variant(), Variant::Exact { .. }) {
        return Err(ResidualError::NotExact);
    }
    let mut samples = Vec::new();
    for &r in radii {
        for k in 0..CALIBRATION_ANGLES {
            let theta = 0.3 + std::f64::consts::TAU * k as f64 / CALIBRATION_ANGLES as f64;
            samples.push(terms(
                config,
                Point::polar(r, theta),
                CALIBRATION_STEP,
                true,
            )?);
        }
    }
    let fit = |num: &dyn Fn(&Terms) -> Complex64, den: &dyn Fn(&Terms) -> f64| {
        let n: Complex64 = samples.iter().map(num).sum();
        let d: f64 = samples.iter().map(den).sum();
        -n / d
    };
    let kappa = fit(&|t| t.higgs_bracket.frobenius_inner(&t.curvature), &|t| {
        t.higgs_bracket.frobenius_inner(&t.higgs_bracket).re
    });
    let weight = fit(&|t| t.connection.frobenius_inner(&t.dbar_higgs), &|t| {
        t.connection.frobenius_inner(&t.connection).re
    });
    let residual = samples
        .iter()
        .map(|t| {
            let a = (t.curvature + t.higgs_bracket * kappa).frobenius_norm();
            let b = (t.dbar_higgs + t.connection * weight).frobenius_norm();
            a.max(b)
        })
        .fold(0.0, f64::max);
    if !(residual <= CALIBRATION_THRESHOLD) || !kappa.is_finite() || !weight.is_finite() {
        return Err(ResidualError::CalibrationFailed {
            kappa,
            connection_weight: weight,
            residual,
        });
    }
    Ok(ConventionCalibration {
        kappa,
        connection_weight: weight,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub radius: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub matrix_curvature_residual: Option<f64>,
    pub matrix_holomorphicity_residual: Option<f64>,
}

/// ODE residuals at radius r plus matrix residuals at (r, 0) when calibrated.
pub fn residual_report(
    config: &FieldConfig,
    r: f64,
    h: f64,
    calibration: Option<&ConventionCalibration>,
) -> Result<ResidualReport, ResidualError> {
    let profile = config.radial_profile().ok_or(ResidualError::NotExact)?;
    let ode = ode_residual(&profile, r)?;
    let matrix = match calibration {
        Some(cal) => Some(matrix_residual(config, Point::new(r, 0.0), h, cal)?),
        None => None,
    };
    Ok(ResidualReport {
        radius: r,
        r1: ode.r1,
        r2: ode.r2,
        r3: ode.r3,
        matrix_curvature_residual: matrix.map(|m| m.curvature),
        matrix_holomorphicity_residual: matrix.map(|m| m.holomorphicity),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationRow {
    pub scale: f64,
    pub min_separation: f64,
    pub max_curvature_residual: f64,
    pub max_holomorphicity_residual: f64,
    pub samples: usize,
}

/// Matrix residuals of a particle configuration as its centres are spread apart.
///
/// For each scale the centres are multiplied by `scale`; the residual is
/// sampled at unit offsets around every centre and at pairwise midpoints.
pub fn separation_scan(
    config: &FieldConfig,
    scales: &[f64],
    h: f64,
    calibration: &ConventionCalibration,
) -> Result<Vec<SeparationRow>, ResidualError> {
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        let cfg = config.scaled(s)?;
        let centres: Vec<Point> = cfg.particles().iter().map(|q| q.position()).collect();
        let mut points = Vec::new();
        for c in &centres {
            for k in 0..4 {
                points.push(c.translate(Point::polar(
                    0.5,
                    0.4 + 0.5 * std::f64::consts::PI * k as f64,
                )));
            }
        }
        let mut min_sep = f64::INFINITY;
        for (i, a) in centres.iter().enumerate() {
            for b in &centres[i + 1..] {
                min_sep = min_sep.min((a.x - b.x).hypot(a.y - b.y));
                points.push(Point::new(0.5 * (a.x + b.x) + 0.1, 0.5 * (a.y + b.y) + 0.2));
            }
        }
        let mut row = SeparationRow {
            scale: s,
            min_separation: min_sep,
            max_curvature_residual: 0.0,
            max_holomorphicity_residual: 0.0,
            samples: 0,
        };
        for p in points {
            if cfg.singular_distance(p) <= 2.0 * h {
                continue;
            }
            let m = matrix_residual(&cfg, p, h, calibration)?;
            row.max_curvature_residual = row.max_curvature_residual.max(m.curvature);
            row.max_holomorphicity_residual = row.max_holomorphicity_residual.max(m.holomorphicity);
            row.samples += 1;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// A field with its Higgs component multiplied by a constant.
pub struct ScaledHiggs<'a, P: ?Sized> {
    pub inner: &'a P,
    pub factor: f64,
}

impl<P: PlanarField + ?Sized> PlanarField for ScaledHiggs<'_, P> {
    fn field_at(&self, p: Point) -> Result<FieldValue, FieldError> {
        let mut v = self.inner.field_at(p)?;
        v.phi1 = v.phi1 * self.factor;
        v.phi2 = v.phi2 * self.factor;
        Ok(v)
    }

    fn singular_distance(&self, p: Point) -> f64 {
        self.inner.singular_distance(p)
    }
}

/// Analytic F₁₂ = (1/r)·f'(r)·τ₁ of a radial configuration.
pub fn analytic_curvature(profile: &RadialProfile, p: Point) -> Result<Matrix2, FieldError> {
    let r = p.norm();
    let v = profile.values(r)?;
    Ok(crate::liealg::tau_unchecked(1) * (v.df / r))
}
