//! Complex numbers carried as `mantissa * 2^exponent`.
//!
//! Tails in classically forbidden regions grow like `e^{κ·distance}` and
//! leave the `f64` range long before a sweep over 10⁴ segments finishes.
//! [`Scaled`] keeps the sign and phase exact while moving the magnitude into
//! an `i64` exponent.

use num_complex::Complex64;
use std::f64::consts::LN_2;
use std::ops::{Add, Mul, Neg, Sub};

/// `mantissa * 2^exponent`, with `max(|re|, |im|)` of the mantissa in
/// `[0.5, 1)` unless the value is zero (then both parts are zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: Complex64,
    pub exponent: i64,
}

/// Binary exponent `e` with `x = f * 2^e`, `|f|` in `[0.5, 1)`.
fn frexp_exp(x: f64) -> i64 {
    libm::frexp(x).1 as i64
}

/// `x * 2^n` without intermediate overflow for large `|n|`.
pub(crate) fn ldexp(x: f64, n: i64) -> f64 {
    if x == 0.0 {
        return x;
    }
    let n = n.clamp(-2200, 2200) as i32;
    libm::scalbn(x, n)
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: Complex64::new(0.0, 0.0),
        exponent: 0,
    };

    pub fn new(mantissa: Complex64, exponent: i64) -> Self {
        Scaled { mantissa, exponent }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    pub fn from_real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0)
    }

    /// `e^z`, exact in phase, magnitude exponent split off before `exp`.
    pub fn exp(z: Complex64) -> Self {
        let n = (z.re / LN_2).floor();
        let rem = z.re - n * LN_2;
        let (s, c) = z.im.sin_cos();
        Self::new(Complex64::new(c, s) * rem.exp(), n as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite()
    }

    fn normalized(self) -> Self {
        let m = self.mantissa;
        let big = m.re.abs().max(m.im.abs());
        if big == 0.0 || !big.is_finite() {
            return Scaled {
                mantissa: if big == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    m
                },
                exponent: if big == 0.0 { 0 } else { self.exponent },
            };
        }
        let e = frexp_exp(big);
        Scaled {
            mantissa: Complex64::new(ldexp(m.re, -e), ldexp(m.im, -e)),
            exponent: self.exponent + e,
        }
    }

    /// Converts to a plain complex number; overflows to infinity and
    /// underflows to zero like ordinary `f64` arithmetic.
    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            ldexp(self.mantissa.re, self.exponent),
            ldexp(self.mantissa.im, self.exponent),
        )
    }

    /// The value divided by `2^exponent`, as a plain complex number.
    pub fn to_complex_at(&self, exponent: i64) -> Complex64 {
        Complex64::new(
            ldexp(self.mantissa.re, self.exponent - exponent),
            ldexp(self.mantissa.im, self.exponent - exponent),
        )
    }

    /// `log2 |z|`; `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.norm().log2() + self.exponent as f64
    }

    pub fn abs(&self) -> Scaled {
        Scaled::new(Complex64::new(self.mantissa.norm(), 0.0), self.exponent)
    }

    pub fn re(&self) -> Scaled {
        Scaled::new(Complex64::new(self.mantissa.re, 0.0), self.exponent)
    }

    pub fn conj(&self) -> Scaled {
        Scaled {
            mantissa: self.mantissa.conj(),
            exponent: self.exponent,
        }
    }

    pub fn scale(&self, z: Complex64) -> Scaled {
        Scaled::new(self.mantissa * z, self.exponent)
    }

    pub fn div(&self, other: &Scaled) -> Scaled {
        Scaled::new(
            self.mantissa / other.mantissa,
            self.exponent - other.exponent,
        )
    }

    /// Sign of the real part: `1`, `-1`, or `0`.
    pub fn re_signum(&self) -> i8 {
        if self.mantissa.re > 0.0 {
            1
        } else if self.mantissa.re < 0.0 {
            -1
        } else {
            0
        }
    }

    /// Compares magnitudes.
    pub fn abs_cmp(&self, other: &Scaled) -> std::cmp::Ordering {
        self.log2_abs()
            .partial_cmp(&other.log2_abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, rhs: Scaled) -> Scaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let e = self.exponent.max(rhs.exponent);
        Scaled::new(self.to_complex_at(e) + rhs.to_complex_at(e), e)
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, rhs: Scaled) -> Scaled {
        self + (-rhs)
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled {
            mantissa: -self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        Scaled::new(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_mantissa() {
        let s = Scaled::from_real(12.0);
        assert_eq!(s.mantissa.re, 0.75);
        assert_eq!(s.exponent, 4);
        assert_eq!(s.to_complex().re, 12.0);
        assert!(Scaled::from_real(0.0).is_zero());
    }

    #[test]
    fn exp_beyond_double_range() {
        let s = Scaled::exp(Complex64::new(2000.0, 0.0));
        let expected = 2000.0 / LN_2;
        assert!((s.log2_abs() - expected).abs() < 1e-9);
        assert!(s.to_complex().re.is_infinite());
        let p = Scaled::exp(Complex64::new(1.5, 0.7));
        let q = Complex64::new(1.5, 0.7).exp();
        assert!((p.to_complex() - q).norm() < 1e-14 * q.norm());
    }

    #[test]
    fn addition_aligns_exponents() {
        let a = Scaled::new(Complex64::new(0.5, 0.0), 1000);
        let b = Scaled::new(Complex64::new(-0.5, 0.0), 1000);
        assert!((a + b).is_zero());
        let c = Scaled::new(Complex64::new(0.5, 0.0), -2000);
        assert_eq!(a + c, a);
        let d = Scaled::from_real(3.0) - Scaled::from_real(1.0);
        assert_eq!(d.to_complex().re, 2.0);
    }

    #[test]
    fn signs_survive_overflow() {
        let s = Scaled::new(Complex64::new(-0.7, 0.1), 5000);
        assert_eq!(s.re_signum(), -1);
        assert_eq!((s * Scaled::from_real(-2.0)).re_signum(), 1);
    }
}
