//! Exact complex-rational arithmetic.
//!
//! Coefficients produced by the hierarchy recursion live in `Q(i)`: every one
//! is an integer multiple of `(2i)^-n`. Floating point would silently destroy
//! the exactness the symbolic layer is built on, so all coefficient work is
//! done with [`GaussianRational`], a pair of arbitrary-precision rationals for
//! the real and imaginary parts. Conversion to `f64` happens only at the
//! boundary to the numerical modules.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// A complex number with exact rational real and imaginary parts.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianRational {
    re: BigRational,
    im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Self::new(BigRational::one(), BigRational::zero())
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Self::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(BigRational::from_integer(n.into()), BigRational::zero())
    }

    /// The real rational `num/den`. Panics when `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Self::new(
            BigRational::new(num.into(), den.into()),
            BigRational::zero(),
        )
    }

    /// The purely imaginary rational `(num/den) i`. Panics when `den == 0`.
    pub fn imag_ratio(num: i64, den: i64) -> Self {
        Self::new(
            BigRational::zero(),
            BigRational::new(num.into(), den.into()),
        )
    }

    pub fn re(&self) -> &BigRational {
        &self.re
    }

    pub fn im(&self) -> &BigRational {
        &self.im
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_imaginary(&self) -> bool {
        self.re.is_zero() && !self.im.is_zero()
    }

    /// True when both parts are integers.
    pub fn is_gaussian_integer(&self) -> bool {
        self.re.is_integer() && self.im.is_integer()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    /// Squared modulus `re^2 + im^2` (a nonnegative rational).
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self) -> Self {
        let n = self.norm_sqr();
        assert!(!n.is_zero(), "division by zero GaussianRational");
        Self::new(&self.re / &n, -&self.im / &n)
    }

    /// `(2i)^k` for any integer `k` (negative `k` gives the inverse power).
    pub fn two_i_pow(k: i32) -> Self {
        let step = Self::new(BigRational::zero(), BigRational::from_integer(2.into()));
        let base = if k >= 0 { step } else { step.inv() };
        let mut out = Self::one();
        for _ in 0..k.unsigned_abs() {
            out = &out * &base;
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Lossy conversion for the numerical modules.
    pub fn to_complex64(&self) -> Complex64 {
        fn to_f64(r: &BigRational) -> f64 {
            // Split into integer part + remainder so huge numerators stay
            // accurate even when they exceed 2^53.
            let (trunc, rem) = (
                r.to_integer(),
                r - BigRational::from_integer(r.to_integer()),
            );
            let trunc_f = bigint_to_f64(&trunc);
            let rem_f = bigint_to_f64(rem.numer()) / bigint_to_f64(rem.denom());
            trunc_f + rem_f
        }
        fn bigint_to_f64(n: &BigInt) -> f64 {
            use num::ToPrimitive;
            n.to_f64().unwrap_or(f64::NAN)
        }
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    /// Exact division by the Gaussian integer ring element `(2i)^k`, used to
    /// test membership in `Z * (2i)^-n`: the result must be a Gaussian
    /// integer.
    pub fn times_two_i_pow(&self, k: i32) -> Self {
        self * &Self::two_i_pow(k)
    }
}

impl fmt::Debug for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Canonical text form, used (parenthesized) inside polynomial rendering:
/// `0`, `1`, `-3/4`, `i`, `-i/2`, `1/2 + 3i`, `-1 - i/8`.
impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn imag_word(im: &BigRational) -> String {
            // |im| rendered as `i`, `3i`, `i/2`, or `3i/2`.
            let a = im.abs();
            let (n, d) = (a.numer(), a.denom());
            let num = if n.is_one() {
                "i".to_string()
            } else {
                format!("{n}i")
            };
            if d.is_one() {
                num
            } else {
                format!("{num}/{d}")
            }
        }
        if self.is_zero() {
            return write!(f, "0");
        }
        if !self.re.is_zero() {
            write!(f, "{}", self.re)?;
            if !self.im.is_zero() {
                let sign = if self.im.is_negative() { " - " } else { " + " };
                write!(f, "{sign}{}", imag_word(&self.im))?;
            }
            Ok(())
        } else {
            let sign = if self.im.is_negative() { "-" } else { "" };
            write!(f, "{sign}{}", imag_word(&self.im))
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for GaussianRational {
            type Output = GaussianRational;
            fn $method(self, rhs: GaussianRational) -> GaussianRational {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&GaussianRational> for GaussianRational {
            type Output = GaussianRational;
            fn $method(self, rhs: &GaussianRational) -> GaussianRational {
                (&self).$method(rhs)
            }
        }
        impl $trait<GaussianRational> for &GaussianRational {
            type Output = GaussianRational;
            fn $method(self, rhs: GaussianRational) -> GaussianRational {
                self.$method(&rhs)
            }
        }
    };
}

impl Add<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}
forward_binop!(Add, add);

impl Sub<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}
forward_binop!(Sub, sub);

impl Mul<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}
forward_binop!(Mul, mul);

impl Div<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn div(self, rhs: &GaussianRational) -> GaussianRational {
        self * &rhs.inv()
    }
}
forward_binop!(Div, div);

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        -&self
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, rhs: &GaussianRational) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&GaussianRational> for GaussianRational {
    fn sub_assign(&mut self, rhs: &GaussianRational) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&GaussianRational> for GaussianRational {
    fn mul_assign(&mut self, rhs: &GaussianRational) {
        *self = &*self * rhs;
    }
}

/// Serialized shape: `{"re_num": .., "re_den": .., "im_num": .., "im_den": ..}`
/// with all four fields as plain JSON integers. Coefficients reachable by the
/// public operations fit comfortably in `i64`; anything larger is a bug we
/// want surfaced, so serialization fails loudly instead of truncating.
#[derive(serde::Serialize, serde::Deserialize)]
struct WireCoeff {
    re_num: i64,
    re_den: i64,
    im_num: i64,
    im_den: i64,
}

impl serde::Serialize for GaussianRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use num::ToPrimitive;
        use serde::ser::Error;
        let field = |n: &BigInt, what: &str| -> Result<i64, S::Error> {
            n.to_i64()
                .ok_or_else(|| S::Error::custom(format!("coefficient {what} overflows i64: {n}")))
        };
        WireCoeff {
            re_num: field(self.re.numer(), "re_num")?,
            re_den: field(self.re.denom(), "re_den")?,
            im_num: field(self.im.numer(), "im_num")?,
            im_den: field(self.im.denom(), "im_den")?,
        }
        .serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for GaussianRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = WireCoeff::deserialize(d)?;
        if w.re_den == 0 || w.im_den == 0 {
            return Err(D::Error::custom("zero denominator in coefficient"));
        }
        Ok(Self::new(
            BigRational::new(w.re_num.into(), w.re_den.into()),
            BigRational::new(w.im_num.into(), w.im_den.into()),
        ))
    }
}
