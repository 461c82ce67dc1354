//! Field configurations: radial profiles and the planar connections built from them.
//!
//! A radial profile `(f, g, h)` enters the connection as
//!
//! ```text
//! A = f(r)·τ₁ dθ + g(r)·τ₂ du + h(r)·τ₃ dv,
//! Ã = f(r)/r²·(−y dx + x dy)·τ₁,   Φ = g·τ₂ + i·h·τ₃.
//! ```
//!
//! The exact family is
//!
//! ```text
//! f(r) = ((c−1) − (1+c)·r^{2c}) / (1 + r^{2c}),
//! g(r) = 2c·r^{c−1} / (1 + r^{2c}),   h = −g,
//! ```
//!
//! which under r = e^{−t}, F = 1 + f, G = e^{−t}·g becomes
//! F = c·tanh(ct), G = c·sech(ct). It runs from f(0⁺) = c − 1 to
//! f(∞) = −(1 + c) and is smooth exactly when c = 1. The singular branch
//! replaces tanh/sech by coth/csch and blows up on the unit circle.
//!
//! Powers `r^{2c}` are evaluated as `exp(2c·ln r)` with a log-sum-exp
//! denominator so that nothing overflows for large or small radii.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liealg::{tau_unchecked, Matrix2, DEFAULT_TOL};

/// Default radius of the excluded disc around singular points.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("shape parameter c must be positive and finite (got {0})")]
    InvalidParameter(f64),
    #[error("exclusion radius must be positive and finite (got {0})")]
    InvalidExclusion(f64),
    #[error("evaluation point ({x}, {y}) is within {distance:e} of a singular point")]
    SingularPoint { x: f64, y: f64, distance: f64 },
    #[error("singular radius r = {0}")]
    SingularRadius(f64),
    #[error("singular parameter value t = {0}")]
    SingularParameter(f64),
    #[error("a multi-particle configuration needs at least one particle")]
    NoParticles,
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinitePoint(f64, f64),
    #[error("invalid particle document: {0}")]
    InvalidDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn translate(&self, by: Point) -> Point {
        Point::new(self.x + by.x, self.y + by.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// tanh/sech solutions, finite for all r > 0.
    Exact,
    /// coth/csch solutions, singular on r = 1.
    Singular,
}

/// Profile functions and their first derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileValue {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub df: f64,
    pub dg: f64,
    pub dh: f64,
}

/// Anything that supplies `(f, g, h)` and their r-derivatives.
pub trait RadialFunctions {
    fn values(&self, r: f64) -> Result<ProfileValue, FieldError>;
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn validate_c(c: f64) -> Result<(), FieldError> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(FieldError::InvalidParameter(c))
    }
}

fn is_unit(c: f64) -> bool {
    (c - 1.0).abs() <= DEFAULT_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    branch: Branch,
    c: f64,
    exclusion: f64,
}

pub fn exact_profile(c: f64) -> Result<RadialProfile, FieldError> {
    validate_c(c)?;
    Ok(RadialProfile {
        branch: Branch::Exact,
        c,
        exclusion: DEFAULT_EXCLUSION_RADIUS,
    })
}

pub fn singular_profile(c: f64) -> Result<RadialProfile, FieldError> {
    validate_c(c)?;
    Ok(RadialProfile {
        branch: Branch::Singular,
        c,
        exclusion: DEFAULT_EXCLUSION_RADIUS,
    })
}

impl RadialProfile {
    pub fn with_exclusion(mut self, exclusion: f64) -> Result<Self, FieldError> {
        if !(exclusion.is_finite() && exclusion > 0.0) {
            return Err(FieldError::InvalidExclusion(exclusion));
        }
        self.exclusion = exclusion;
        Ok(self)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion
    }

    /// Regular at the origin (c = 1, where f(0) = 0).
    pub fn regular_at_origin(&self) -> bool {
        is_unit(self.c)
    }

    pub fn is_smooth(&self) -> bool {
        self.branch == Branch::Exact && self.regular_at_origin()
    }

    /// Distance from radius `r` to the nearest singular radius.
    pub fn singular_distance(&self, r: f64) -> f64 {
        let origin = if self.regular_at_origin() {
            f64::INFINITY
        } else {
            r
        };
        match self.branch {
            Branch::Exact => origin,
            Branch::Singular => origin.min((r - 1.0).abs()),
        }
    }

    fn check_radius(&self, r: f64) -> Result<(), FieldError> {
        if !r.is_finite() || r < 0.0 {
            return Err(FieldError::SingularRadius(r));
        }
        if self.singular_distance(r) < self.exclusion {
            return Err(FieldError::SingularRadius(r));
        }
        Ok(())
    }

    pub fn f(&self, r: f64) -> Result<f64, FieldError> {
        self.values(r).map(|v| v.f)
    }

    pub fn g(&self, r: f64) -> Result<f64, FieldError> {
        self.values(r).map(|v| v.g)
    }

    pub fn h(&self, r: f64) -> Result<f64, FieldError> {
        self.values(r).map(|v| v.h)
    }

    /// f(r)/r², the coefficient of (−y dx + x dy)·τ₁.
    pub fn angular_coefficient(&self, r: f64) -> Result<f64, FieldError> {
        self.check_radius(r)?;
        if self.branch == Branch::Exact && is_unit(self.c) {
            return Ok(-2.0 / (1.0 + r * r));
        }
        if self.branch == Branch::Singular && is_unit(self.c) {
            return Ok(2.0 / (1.0 - r * r));
        }
        Ok(self.values(r)?.f / (r * r))
    }

    /// d/dr of f(r)/r².
    pub fn angular_coefficient_derivative(&self, r: f64) -> Result<f64, FieldError> {
        self.check_radius(r)?;
        if is_unit(self.c) {
            let s = r * r;
            return Ok(match self.branch {
                Branch::Exact => 4.0 * r / ((1.0 + s) * (1.0 + s)),
                Branch::Singular => 4.0 * r / ((1.0 - s) * (1.0 - s)),
            });
        }
        let v = self.values(r)?;
        Ok(v.df / (r * r) - 2.0 * v.f / (r * r * r))
    }

    /// f(r) + (1 + c), computed without cancellation; tends to 0 as r → ∞.
    pub fn angular_excess(&self, r: f64) -> Result<f64, FieldError> {
        self.check_radius(r)?;
        let c = self.c;
        match self.branch {
            Branch::Exact => {
                if r == 0.0 {
                    return Ok(2.0 * c);
                }
                Ok(2.0 * c * (-softplus(2.0 * c * r.ln())).exp())
            }
            Branch::Singular => {
                if r == 0.0 {
                    return Ok(2.0 * c);
                }
                let ln_r = r.ln();
                if r <= 1.0 {
                    Ok(2.0 * c / (1.0 - (2.0 * c * ln_r).exp()))
                } else {
                    let q = (-2.0 * c * ln_r).exp();
                    Ok(2.0 * c * q / (q - 1.0))
                }
            }
        }
    }

    /// Value of f at r → ∞.
    pub fn f_at_infinity(&self) -> f64 {
        -(1.0 + self.c)
    }

    /// Connection in polar form at radius r: (A_θ, φ₁, φ₂), with A_r = 0.
    pub fn polar_connection(&self, r: f64) -> Result<PolarConnection, FieldError> {
        let v = self.values(r)?;
        Ok(PolarConnection {
            a_theta: tau_unchecked(1) * v.f,
            phi1: tau_unchecked(2) * v.g,
            phi2: tau_unchecked(3) * v.h,
        })
    }

    fn exact_values(&self, r: f64) -> ProfileValue {
        let c = self.c;
        if r == 0.0 {
            // Only reached for c = 1.
            return ProfileValue {
                f: 0.0,
                g: 2.0,
                h: -2.0,
                df: 0.0,
                dg: 0.0,
                dh: 0.0,
            };
        }
        let ln_r = r.ln();
        let sp = softplus(2.0 * c * ln_r);
        let s = (-sp).exp();
        let t = (2.0 * c * ln_r - sp).exp();
        let f = (c - 1.0) * s - (1.0 + c) * t;
        let g = 2.0 * c * ((c - 1.0) * ln_r - sp).exp();
        let df = -4.0 * c * c * ((2.0 * c - 1.0) * ln_r - 2.0 * sp).exp();
        let dg = f * g / r;
        ProfileValue {
            f,
            g,
            h: -g,
            df,
            dg,
            dh: -dg,
        }
    }

    fn singular_values(&self, r: f64) -> ProfileValue {
        let c = self.c;
        if r == 0.0 {
            return ProfileValue {
                f: 0.0,
                g: 2.0,
                h: -2.0,
                df: 0.0,
                dg: 0.0,
                dh: 0.0,
            };
        }
        let ln_r = r.ln();
        let (f, g, df) = if r < 1.0 {
            let big_r = (2.0 * c * ln_r).exp();
            let d = 1.0 - big_r;
            let f = ((c - 1.0) + (c + 1.0) * big_r) / d;
            let g = 2.0 * c * ((c - 1.0) * ln_r).exp() / d;
            let df = 4.0 * c * c * ((2.0 * c - 1.0) * ln_r).exp() / (d * d);
            (f, g, df)
        } else {
            let q = (-2.0 * c * ln_r).exp();
            let d = q - 1.0;
            let f = ((c - 1.0) * q + (c + 1.0)) / d;
            let g = 2.0 * c * ((-c - 1.0) * ln_r).exp() / d;
            let df = 4.0 * c * c * ((-2.0 * c - 1.0) * ln_r).exp() / (d * d);
            (f, g, df)
        };
        let dg = f * g / r;
        ProfileValue {
            f,
            g,
            h: -g,
            df,
            dg,
            dh: -dg,
        }
    }
}

impl RadialFunctions for RadialProfile {
    fn values(&self, r: f64) -> Result<ProfileValue, FieldError> {
        self.check_radius(r)?;
        Ok(match self.branch {
            Branch::Exact => self.exact_values(r),
            Branch::Singular => self.singular_values(r),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarConnection {
    pub a_theta: Matrix2,
    pub phi1: Matrix2,
    pub phi2: Matrix2,
}

/// A pair (F(t), G(t)) of the reduced two-function system.
pub trait TransformedSystem {
    fn values(&self, t: f64) -> Result<(f64, f64), FieldError>;

    /// Analytic (dF/dt, dG/dt), when available.
    fn derivatives(&self, _t: f64) -> Option<Result<(f64, f64), FieldError>> {
        None
    }
}

/// (c·tanh(ct), c·sech(ct)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhSech {
    pub c: f64,
}

/// (c·coth(ct), c·csch(ct)); singular at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CothCsch {
    pub c: f64,
}

impl TransformedSystem for TanhSech {
    fn values(&self, t: f64) -> Result<(f64, f64), FieldError> {
        let ct = self.c * t;
        Ok((self.c * ct.tanh(), self.c / ct.cosh()))
    }

    fn derivatives(&self, t: f64) -> Option<Result<(f64, f64), FieldError>> {
        let ct = self.c * t;
        let sech = 1.0 / ct.cosh();
        let c2 = self.c * self.c;
        Some(Ok((c2 * sech * sech, -c2 * sech * ct.tanh())))
    }
}

impl CothCsch {
    fn check(&self, t: f64) -> Result<f64, FieldError> {
        let ct = self.c * t;
        if ct == 0.0 || !ct.is_finite() {
            Err(FieldError::SingularParameter(t))
        } else {
            Ok(ct)
        }
    }
}

impl TransformedSystem for CothCsch {
    fn values(&self, t: f64) -> Result<(f64, f64), FieldError> {
        let ct = self.check(t)?;
        Ok((self.c / ct.tanh(), self.c / ct.sinh()))
    }

    fn derivatives(&self, t: f64) -> Option<Result<(f64, f64), FieldError>> {
        Some(self.check(t).map(|ct| {
            let csch = 1.0 / ct.sinh();
            let c2 = self.c * self.c;
            (-c2 * csch * csch, -c2 * csch / ct.tanh())
        }))
    }
}

/// A radial profile seen through r = e^{−t}, F = 1 + f, G = e^{−t}·g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePair<P> {
    pub profile: P,
}

pub fn transformed_pair<P: RadialFunctions>(profile: P) -> ProfilePair<P> {
    ProfilePair { profile }
}

impl<P: RadialFunctions> TransformedSystem for ProfilePair<P> {
    fn values(&self, t: f64) -> Result<(f64, f64), FieldError> {
        let r = (-t).exp();
        let v = self.profile.values(r)?;
        Ok((1.0 + v.f, r * v.g))
    }

    fn derivatives(&self, t: f64) -> Option<Result<(f64, f64), FieldError>> {
        let r = (-t).exp();
        Some(
            self.profile
                .values(r)
                .map(|v| (-r * v.df, -r * (v.g + r * v.dg))),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl Particle {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    /// A = Φ = 0.
    Vacuum,
    Exact {
        c: f64,
    },
    Singular {
        c: f64,
    },
    /// c = 1 blocks recentred at each position.
    Multi {
        positions: Vec<Point>,
    },
    /// Blocks with individual shape parameters.
    Fractional {
        particles: Vec<Particle>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Smooth,
    MeronSingular,
}

/// (A₁, A₂, φ₁, φ₂) at a point, with Φ = φ₁ + i·φ₂.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldValue {
    pub a1: Matrix2,
    pub a2: Matrix2,
    pub phi1: Matrix2,
    pub phi2: Matrix2,
}

impl FieldValue {
    pub fn higgs(&self) -> Matrix2 {
        self.phi1 + self.phi2 * Complex64::new(0.0, 1.0)
    }
}

impl Add for FieldValue {
    type Output = FieldValue;
    fn add(self, o: FieldValue) -> FieldValue {
        FieldValue {
            a1: self.a1 + o.a1,
            a2: self.a2 + o.a2,
            phi1: self.phi1 + o.phi1,
            phi2: self.phi2 + o.phi2,
        }
    }
}

impl Sub for FieldValue {
    type Output = FieldValue;
    fn sub(self, o: FieldValue) -> FieldValue {
        self + o * -1.0
    }
}

impl Mul<f64> for FieldValue {
    type Output = FieldValue;
    fn mul(self, s: f64) -> FieldValue {
        FieldValue {
            a1: self.a1 * s,
            a2: self.a2 * s,
            phi1: self.phi1 * s,
            phi2: self.phi2 * s,
        }
    }
}

/// Field value and its first partial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldJet {
    pub value: FieldValue,
    pub dx: FieldValue,
    pub dy: FieldValue,
}

/// Anything evaluable as a planar connection plus Higgs field.
pub trait PlanarField {
    fn field_at(&self, p: Point) -> Result<FieldValue, FieldError>;

    /// Distance from `p` to the nearest singular point.
    fn singular_distance(&self, _p: Point) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    center: Point,
    profile: RadialProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    variant: Variant,
    blocks: Vec<Block>,
    exclusion: f64,
}

pub fn make_config(variant: Variant) -> Result<FieldConfig, FieldError> {
    let at_origin = |profile| {
        vec![Block {
            center: Point::new(0.0, 0.0),
            profile,
        }]
    };
    let blocks = match &variant {
        Variant::Vacuum => Vec::new(),
        Variant::Exact { c } => at_origin(exact_profile(*c)?),
        Variant::Singular { c } => at_origin(singular_profile(*c)?),
        Variant::Multi { positions } => {
            if positions.is_empty() {
                return Err(FieldError::NoParticles);
            }
            let unit = exact_profile(1.0)?;
            positions
                .iter()
                .map(|p| {
                    if p.is_finite() {
                        Ok(Block {
                            center: *p,
                            profile: unit,
                        })
                    } else {
                        Err(FieldError::NonFinitePoint(p.x, p.y))
                    }
                })
                .collect::<Result<_, _>>()?
        }
        Variant::Fractional { particles } => {
            if particles.is_empty() {
                return Err(FieldError::NoParticles);
            }
            particles
                .iter()
                .map(|q| {
                    if !q.position().is_finite() {
                        return Err(FieldError::NonFinitePoint(q.x, q.y));
                    }
                    Ok(Block {
                        center: q.position(),
                        profile: exact_profile(q.c)?,
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    Ok(FieldConfig {
        variant,
        blocks,
        exclusion: DEFAULT_EXCLUSION_RADIUS,
    })
}

impl FieldConfig {
    pub fn vacuum() -> Self {
        make_config(Variant::Vacuum).expect("vacuum is always valid")
    }

    pub fn exact(c: f64) -> Result<Self, FieldError> {
        make_config(Variant::Exact { c })
    }

    pub fn singular(c: f64) -> Result<Self, FieldError> {
        make_config(Variant::Singular { c })
    }

    pub fn multi(positions: Vec<Point>) -> Result<Self, FieldError> {
        make_config(Variant::Multi { positions })
    }

    pub fn fractional(particles: Vec<Particle>) -> Result<Self, FieldError> {
        make_config(Variant::Fractional { particles })
    }

    /// Parses `{"particles": [{"x": .., "y": .., "c": ..}]}`.
    ///
    /// A missing `c` means 1. If every particle has c = 1 the result is the
    /// smooth multi-particle family, otherwise the fractional one.
    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Entry {
            x: f64,
            y: f64,
            c: Option<f64>,
        }
        #[derive(Deserialize)]
        struct Document {
            particles: Vec<Entry>,
        }
        let doc: Document =
            serde_json::from_str(text).map_err(|e| FieldError::InvalidDocument(e.to_string()))?;
        let particles: Vec<Particle> = doc
            .particles
            .into_iter()
            .map(|e| Particle {
                x: e.x,
                y: e.y,
                c: e.c.unwrap_or(1.0),
            })
            .collect();
        if particles.iter().all(|p| p.c == 1.0) {
            FieldConfig::multi(particles.iter().map(Particle::position).collect())
        } else {
            FieldConfig::fractional(particles)
        }
    }

    /// Same configuration with every particle centre multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, FieldError> {
        let variant = match &self.variant {
            Variant::Multi { positions } => Variant::Multi {
                positions: positions
                    .iter()
                    .map(|p| Point::new(s * p.x, s * p.y))
                    .collect(),
            },
            Variant::Fractional { particles } => Variant::Fractional {
                particles: particles
                    .iter()
                    .map(|q| Particle {
                        x: s * q.x,
                        y: s * q.y,
                        c: q.c,
                    })
                    .collect(),
            },
            other => other.clone(),
        };
        make_config(variant)?.with_exclusion(self.exclusion)
    }

    pub fn with_exclusion(mut self, exclusion: f64) -> Result<Self, FieldError> {
        if !(exclusion.is_finite() && exclusion > 0.0) {
            return Err(FieldError::InvalidExclusion(exclusion));
        }
        for b in &mut self.blocks {
            b.profile = b.profile.with_exclusion(exclusion)?;
        }
        self.exclusion = exclusion;
        Ok(self)
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion
    }

    /// Radial profile of a single-block configuration centred at the origin.
    pub fn radial_profile(&self) -> Option<RadialProfile> {
        match self.variant {
            Variant::Exact { .. } | Variant::Singular { .. } => Some(self.blocks[0].profile),
            _ => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(
            self.variant,
            Variant::Vacuum | Variant::Exact { .. } | Variant::Singular { .. }
        )
    }

    /// Particle centres and their shape parameters.
    pub fn particles(&self) -> Vec<Particle> {
        self.blocks
            .iter()
            .map(|b| Particle {
                x: b.center.x,
                y: b.center.y,
                c: b.profile.c(),
            })
            .collect()
    }

    pub fn smoothness_class(&self) -> Smoothness {
        if self.blocks.iter().all(|b| b.profile.is_smooth()) {
            Smoothness::Smooth
        } else {
            Smoothness::MeronSingular
        }
    }

    /// Σₖ (1 + cₖ): minus the coefficient of τ₁ dθ on the circle at infinity.
    pub fn asymptotic_charge(&self) -> f64 {
        self.blocks.iter().map(|b| 1.0 + b.profile.c()).sum()
    }

    /// Largest distance of a particle centre from the origin.
    pub fn max_center_distance(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.center.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest distance between the origin-centred circle of radius r and a
    /// singular point.
    pub fn circle_clearance(&self, r: f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let d = b.center.norm();
                let origin = if b.profile.regular_at_origin() {
                    f64::INFINITY
                } else {
                    (r - d).abs()
                };
                match b.profile.branch() {
                    Branch::Exact => origin,
                    Branch::Singular => origin.min((r - 1.0).abs()),
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Coefficient a of τ₁ in A_θ = x·A₂ − y·A₁.
    pub fn angular_potential(&self, p: Point) -> Result<f64, FieldError> {
        self.guard(p)?;
        let mut a = 0.0;
        for b in &self.blocks {
            let dx = p.x - b.center.x;
            let dy = p.y - b.center.y;
            let rho = dx.hypot(dy);
            if rho == 0.0 {
                continue;
            }
            a += b.profile.angular_coefficient(rho)? * (dx * p.x + dy * p.y);
        }
        Ok(a)
    }

    /// a(p) + asymptotic_charge, evaluated without cancellation.
    pub fn angular_excess(&self, p: Point) -> Result<f64, FieldError> {
        self.guard(p)?;
        let mut e = 0.0;
        for b in &self.blocks {
            let dx = p.x - b.center.x;
            let dy = p.y - b.center.y;
            let rho2 = dx * dx + dy * dy;
            let charge = 1.0 + b.profile.c();
            if rho2 == 0.0 {
                e += charge;
                continue;
            }
            // σ = (dx·x + dy·y)/ρ², 1 − σ = −(dx·xₖ + dy·yₖ)/ρ².
            let sigma = (dx * p.x + dy * p.y) / rho2;
            let one_minus_sigma = -(dx * b.center.x + dy * b.center.y) / rho2;
            e += b.profile.angular_excess(rho2.sqrt())? * sigma + charge * one_minus_sigma;
        }
        Ok(e)
    }

    /// Field value with analytic first derivatives.
    pub fn jet_at(&self, p: Point) -> Result<FieldJet, FieldError> {
        self.guard(p)?;
        let t1 = tau_unchecked(1);
        let t2 = tau_unchecked(2);
        let t3 = tau_unchecked(3);
        // Coefficients of τ₁ (A), τ₂ (φ₁), τ₃ (φ₂) and their partials.
        let mut a = [0.0; 2];
        let mut da = [[0.0; 2]; 2];
        let (mut g, mut h) = (0.0, 0.0);
        let (mut dg, mut dh) = ([0.0; 2], [0.0; 2]);
        for b in &self.blocks {
            let dx = p.x - b.center.x;
            let dy = p.y - b.center.y;
            let rho = dx.hypot(dy);
            let v = b.profile.values(rho)?;
            let k = b.profile.angular_coefficient(rho)?;
            g += v.g;
            h += v.h;
            if rho == 0.0 {
                da[0][1] -= k;
                da[1][0] += k;
                continue;
            }
            let dk = b.profile.angular_coefficient_derivative(rho)?;
            let (ux, uy) = (dx / rho, dy / rho);
            a[0] -= dy * k;
            a[1] += dx * k;
            da[0][0] -= dy * dk * ux;
            da[0][1] -= k + dy * dk * uy;
            da[1][0] += k + dx * dk * ux;
            da[1][1] += dx * dk * uy;
            dg[0] += v.dg * ux;
            dg[1] += v.dg * uy;
            dh[0] += v.dh * ux;
            dh[1] += v.dh * uy;
        }
        let assemble = |a1: f64, a2: f64, g: f64, h: f64| FieldValue {
            a1: t1 * a1,
            a2: t1 * a2,
            phi1: t2 * g,
            phi2: t3 * h,
        };
        Ok(FieldJet {
            value: assemble(a[0], a[1], g, h),
            dx: assemble(da[0][0], da[1][0], dg[0], dh[0]),
            dy: assemble(da[0][1], da[1][1], dg[1], dh[1]),
        })
    }

    fn guard(&self, p: Point) -> Result<(), FieldError> {
        if !p.is_finite() {
            return Err(FieldError::NonFinitePoint(p.x, p.y));
        }
        let distance = PlanarField::singular_distance(self, p);
        if distance < self.exclusion {
            return Err(FieldError::SingularPoint {
                x: p.x,
                y: p.y,
                distance,
            });
        }
        Ok(())
    }
}

impl PlanarField for FieldConfig {
    fn field_at(&self, p: Point) -> Result<FieldValue, FieldError> {
        self.guard(p)?;
        let t1 = tau_unchecked(1);
        let t2 = tau_unchecked(2);
        let t3 = tau_unchecked(3);
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        let mut g_sum = 0.0;
        let mut h_sum = 0.0;
        for b in &self.blocks {
            let dx = p.x - b.center.x;
            let dy = p.y - b.center.y;
            let rho = dx.hypot(dy);
            let v = b.profile.values(rho)?;
            if rho > 0.0 {
                let k = b.profile.angular_coefficient(rho)?;
                a1 -= dy * k;
                a2 += dx * k;
            }
            g_sum += v.g;
            h_sum += v.h;
        }
        Ok(FieldValue {
            a1: t1 * a1,
            a2: t1 * a2,
            phi1: t2 * g_sum,
            phi2: t3 * h_sum,
        })
    }

    fn singular_distance(&self, p: Point) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let rho = (p.x - b.center.x).hypot(p.y - b.center.y);
                b.profile.singular_distance(rho)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// The vacuum, as a zero-sized field for generic code and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl PlanarField for ZeroField {
    fn field_at(&self, p: Point) -> Result<FieldValue, FieldError> {
        if !p.is_finite() {
            return Err(FieldError::NonFinitePoint(p.x, p.y));
        }
        Ok(FieldValue::default())
    }
}

/// Polar angle of a point in [0, 2π).
pub fn polar_angle(p: Point) -> f64 {
    let a = p.y.atan2(p.x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}
