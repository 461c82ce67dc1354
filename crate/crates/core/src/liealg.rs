//! sl(2,C) arithmetic on dense 2×2 complex matrices.
//!
//! The generators follow the usual half-normalised Pauli convention
//! σ₁ = ½·diag(i, −i), σ₂ = ½·[[0, 1], [−1, 0]], σ₃ = ½·[[0, i], [i, 0]],
//! and the so(2,1) basis is τ₁ = σ₁, τ₂ = iσ₂, τ₃ = iσ₃, so that
//!
//! ```text
//! [τ₁, τ₂] = τ₃,   [τ₁, τ₃] = −τ₂,   [τ₂, τ₃] = −τ₁.
//! ```
//!
//! τ₁ generates the maximal compact subgroup; it is diagonal and
//! anti-Hermitian, while τ₂ and τ₃ are Hermitian.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance for scalar comparisons.
pub const DEFAULT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("generator index {0} out of range (expected 1, 2 or 3)")]
    IndexOutOfRange(usize),
}

/// Dense 2×2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub m: [[Complex64; 2]; 2],
}

/// An sl(2,C) element. Field values, generators and brackets all live here.
pub type AlgebraElement = Matrix2;

impl Matrix2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Matrix2 {
            m: [[a, b], [c, d]],
        }
    }

    pub const fn zero() -> Self {
        Matrix2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Matrix2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn diag(a: Complex64, d: Complex64) -> Self {
        Matrix2::new(a, ZERO, ZERO, d)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn transpose(&self) -> Self {
        Matrix2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius inner product ⟨self, other⟩ = Σ conj(selfᵢⱼ)·otherᵢⱼ.
    pub fn frobenius_inner(&self, other: &Matrix2) -> Complex64 {
        let mut acc = ZERO;
        for r in 0..2 {
            for c in 0..2 {
                acc += self.m[r][c].conj() * other.m[r][c];
            }
        }
        acc
    }

    pub fn approx_eq(&self, other: &Matrix2, tol: f64) -> bool {
        (*self - *other).max_abs() <= tol
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Matrix2::new(
            f(self.m[0][0]),
            f(self.m[0][1]),
            f(self.m[1][0]),
            f(self.m[1][1]),
        )
    }
}

impl Default for Matrix2 {
    fn default() -> Self {
        Matrix2::zero()
    }
}

impl fmt::Debug for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]
        )
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.m[0][0] + rhs.m[0][0],
            self.m[0][1] + rhs.m[0][1],
            self.m[1][0] + rhs.m[1][0],
            self.m[1][1] + rhs.m[1][1],
        )
    }
}

impl AddAssign for Matrix2 {
    fn add_assign(&mut self, rhs: Matrix2) {
        *self = *self + rhs;
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, rhs: Matrix2) -> Matrix2 {
        self + (-rhs)
    }
}

impl Neg for Matrix2 {
    type Output = Matrix2;
    fn neg(self) -> Matrix2 {
        self.map(|z| -z)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let a = &self.m;
        let b = &rhs.m;
        Matrix2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<f64> for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: f64) -> Matrix2 {
        self.scale_re(rhs)
    }
}

impl Mul<Complex64> for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Complex64) -> Matrix2 {
        self.scale(rhs)
    }
}

/// Which bilinear pairing to use on the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingKind {
    /// Tabulated form ⟨τᵢ, τⱼ⟩ = ½·diag(+, +, −).
    Killing,
    /// ⟨a, b⟩ = Tr(a·b̄) with b̄ = −b† the conjugation fixing su(2); ⟨τᵢ, τⱼ⟩ = −½δᵢⱼ.
    Conjugate,
}

impl fmt::Display for PairingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingKind::Killing => f.write_str("killing"),
            PairingKind::Conjugate => f.write_str("conjugate"),
        }
    }
}

impl std::str::FromStr for PairingKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "killing" => Ok(PairingKind::Killing),
            "conjugate" => Ok(PairingKind::Conjugate),
            other => Err(format!(
                "unknown pairing '{other}' (expected killing or conjugate)"
            )),
        }
    }
}

/// Diagonal of the tabulated Killing form in the τ basis.
pub const KILLING_TABLE: [f64; 3] = [0.5, 0.5, -0.5];

pub fn sigma(i: usize) -> Result<AlgebraElement, AlgebraError> {
    let h = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    match i {
        1 => Ok(Matrix2::diag(ih, -ih)),
        2 => Ok(Matrix2::new(ZERO, h, -h, ZERO)),
        3 => Ok(Matrix2::new(ZERO, ih, ih, ZERO)),
        _ => Err(AlgebraError::IndexOutOfRange(i)),
    }
}

pub fn tau(i: usize) -> Result<AlgebraElement, AlgebraError> {
    match i {
        1 => sigma(1),
        2 | 3 => Ok(sigma(i)?.scale(I)),
        _ => Err(AlgebraError::IndexOutOfRange(i)),
    }
}

/// τᵢ for a statically known index.
pub(crate) fn tau_unchecked(i: usize) -> AlgebraElement {
    tau(i).expect("generator index is 1, 2 or 3")
}

pub fn bracket(a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
    *a * *b - *b * *a
}

pub fn conjugate_transpose(a: &AlgebraElement) -> AlgebraElement {
    a.conj().transpose()
}

/// Complex coordinates (a₁, a₂, a₃) of the traceless part of `m` in the τ basis.
pub fn tau_coordinates(m: &AlgebraElement) -> [Complex64; 3] {
    let d = (m.m[0][0] - m.m[1][1]) * 0.5;
    [
        -I * d * 2.0,
        -I * (m.m[0][1] - m.m[1][0]),
        -(m.m[0][1] + m.m[1][0]),
    ]
}

pub fn from_tau_coordinates(coords: [Complex64; 3]) -> AlgebraElement {
    (1..=3).fold(Matrix2::zero(), |acc, i| {
        acc + tau_unchecked(i).scale(coords[i - 1])
    })
}

pub fn pair(a: &AlgebraElement, b: &AlgebraElement, kind: PairingKind) -> Complex64 {
    match kind {
        PairingKind::Killing => {
            let ca = tau_coordinates(a);
            let cb = tau_coordinates(b);
            (0..3).map(|i| ca[i] * cb[i] * KILLING_TABLE[i]).sum()
        }
        PairingKind::Conjugate => -(*a * conjugate_transpose(b)).trace(),
    }
}

/// Tr(a·b), the ad-invariant form on sl(2,C); on the τ basis it is ½·diag(−, +, +).
pub fn trace_form(a: &AlgebraElement, b: &AlgebraElement) -> Complex64 {
    (*a * *b).trace()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-14;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn taus() -> [AlgebraElement; 3] {
        [tau_unchecked(1), tau_unchecked(2), tau_unchecked(3)]
    }

    #[test]
    fn sigma_matrices() {
        let s1 = sigma(1).unwrap();
        assert!(s1.approx_eq(&Matrix2::diag(c(0.0, 0.5), c(0.0, -0.5)), 0.0));
        let s2 = sigma(2).unwrap();
        assert!(s2.approx_eq(
            &Matrix2::new(c(0.0, 0.0), c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.0)),
            0.0
        ));
        let s3 = sigma(3).unwrap();
        assert!(s3.approx_eq(
            &Matrix2::new(c(0.0, 0.0), c(0.0, 0.5), c(0.0, 0.5), c(0.0, 0.0)),
            0.0
        ));
    }

    #[test]
    fn generator_index_out_of_range() {
        assert_eq!(sigma(0), Err(AlgebraError::IndexOutOfRange(0)));
        assert_eq!(tau(4), Err(AlgebraError::IndexOutOfRange(4)));
    }

    #[test]
    fn su2_relations() {
        let s: Vec<_> = (1..=3).map(|i| sigma(i).unwrap()).collect();
        assert!(bracket(&s[0], &s[1]).approx_eq(&s[2], TOL));
        assert!(bracket(&s[0], &s[2]).approx_eq(&-s[1], TOL));
        assert!(bracket(&s[1], &s[2]).approx_eq(&s[0], TOL));
    }

    #[test]
    fn so21_relations() {
        let [t1, t2, t3] = taus();
        assert!(t1.approx_eq(&Matrix2::diag(c(0.0, 0.5), c(0.0, -0.5)), 0.0));
        assert!(bracket(&t1, &t2).approx_eq(&t3, TOL));
        assert!(bracket(&t1, &t3).approx_eq(&-t2, TOL));
        assert!(bracket(&t2, &t3).approx_eq(&-t1, TOL));
    }

    #[test]
    fn generators_are_traceless() {
        for i in 1..=3 {
            assert!(sigma(i).unwrap().trace().norm() < TOL);
            assert!(tau(i).unwrap().trace().norm() < TOL);
        }
    }

    #[test]
    fn jacobi_identity_on_generators() {
        let t = taus();
        for a in &t {
            for b in &t {
                for x in &t {
                    let j = bracket(a, &bracket(b, x))
                        + bracket(b, &bracket(x, a))
                        + bracket(x, &bracket(a, b));
                    assert!(j.max_abs() < TOL);
                }
            }
        }
    }

    #[test]
    fn killing_table() {
        let t = taus();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { KILLING_TABLE[i] } else { 0.0 };
                let p = pair(&t[i], &t[j], PairingKind::Killing);
                assert!((p - c(expected, 0.0)).norm() < TOL, "({i},{j}) -> {p}");
            }
        }
        assert!((pair(&t[2], &t[2], PairingKind::Killing) - c(-0.5, 0.0)).norm() < TOL);
    }

    #[test]
    fn conjugate_table_is_negative_definite() {
        let t = taus();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { -0.5 } else { 0.0 };
                assert!(
                    (pair(&t[i], &t[j], PairingKind::Conjugate) - c(expected, 0.0)).norm() < TOL
                );
            }
        }
        let x = t[0].scale(c(0.3, -1.2)) + t[1].scale(c(2.0, 0.1)) + t[2].scale(c(-0.7, 0.4));
        assert!(pair(&x, &x, PairingKind::Conjugate).re < 0.0);
    }

    #[test]
    fn entrywise_conjugation_is_not_the_conjugate_pairing() {
        // Tr(τᵢ·conj(τᵢ)) = (½, −½, ½): only τ₂ agrees with −½δᵢⱼ.
        let t = taus();
        let diag: Vec<f64> = t.iter().map(|x| (*x * x.conj()).trace().re).collect();
        assert!((diag[0] - 0.5).abs() < TOL);
        assert!((diag[1] + 0.5).abs() < TOL);
        assert!((diag[2] - 0.5).abs() < TOL);
    }

    #[test]
    fn trace_form_is_ad_invariant() {
        let t = taus();
        for x in &t {
            for a in &t {
                for b in &t {
                    let lhs = trace_form(&bracket(x, a), b) + trace_form(a, &bracket(x, b));
                    assert!(lhs.norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn tabulated_killing_form_is_not_ad_invariant() {
        // The ½·diag(+,+,−) table is incompatible with [τ₁,τ₂]=τ₃, [τ₁,τ₃]=−τ₂.
        let [t1, t2, t3] = taus();
        let k = |a: &Matrix2, b: &Matrix2| pair(a, b, PairingKind::Killing);
        let defect = k(&bracket(&t1, &t2), &t3) + k(&t2, &bracket(&t1, &t3));
        assert!((defect - c(-1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn conjugate_transpose_examples() {
        let t1 = tau_unchecked(1);
        assert!(conjugate_transpose(&t1).approx_eq(&-t1, 0.0));
        assert!(conjugate_transpose(&Matrix2::zero()).approx_eq(&Matrix2::zero(), 0.0));
        assert!(conjugate_transpose(&tau_unchecked(2)).approx_eq(&tau_unchecked(2), 0.0));
        assert!(conjugate_transpose(&tau_unchecked(3)).approx_eq(&tau_unchecked(3), 0.0));
    }

    #[test]
    fn tau_coordinates_roundtrip() {
        let coords = [c(0.25, -3.0), c(1.5, 0.5), c(-2.0, 0.75)];
        let m = from_tau_coordinates(coords);
        let back = tau_coordinates(&m);
        for k in 0..3 {
            assert!((back[k] - coords[k]).norm() < TOL);
        }
    }

    #[test]
    fn pairing_kind_parses() {
        assert_eq!("killing".parse::<PairingKind>(), Ok(PairingKind::Killing));
        assert_eq!(
            "conjugate".parse::<PairingKind>(),
            Ok(PairingKind::Conjugate)
        );
        assert!("trace".parse::<PairingKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn element() -> impl Strategy<Value = Matrix2> {
            proptest::array::uniform6(-3.0f64..3.0)
                .prop_map(|v| from_tau_coordinates([c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5])]))
        }

        proptest! {
            #[test]
            fn bracket_is_antisymmetric(a in element(), b in element()) {
                prop_assert!((bracket(&a, &b) + bracket(&b, &a)).max_abs() < 1e-12);
                prop_assert!(bracket(&a, &a).max_abs() < 1e-12);
            }

            #[test]
            fn brackets_stay_traceless(a in element(), b in element()) {
                prop_assert!(bracket(&a, &b).trace().norm() < 1e-12);
            }

            #[test]
            fn conjugate_transpose_is_an_involution(a in element()) {
                prop_assert!(conjugate_transpose(&conjugate_transpose(&a)).approx_eq(&a, 0.0));
            }

            #[test]
            fn killing_pairing_is_symmetric(a in element(), b in element()) {
                let d = pair(&a, &b, PairingKind::Killing) - pair(&b, &a, PairingKind::Killing);
                prop_assert!(d.norm() < 1e-12);
            }
        }
    }
}
