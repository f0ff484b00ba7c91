//! Exact Gaussian-rational scalars: Q(i) with BigRational real and imaginary parts.
//!
//! Everything downstream (group algebras, operator entries, traces, ranks) is
//! computed over this field so that "equal" always means exactly equal. The only
//! floating-point escape hatch in the crate is the norm-inequality checker, which
//! converts out of this type explicitly.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Gaussian {
    pub re: BigRational,
    pub im: BigRational,
}

impl Gaussian {
    pub fn zero() -> Self {
        Gaussian::default()
    }

    pub fn one() -> Self {
        Gaussian { re: BigRational::one(), im: BigRational::zero() }
    }

    pub fn i() -> Self {
        Gaussian { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Gaussian { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }

    /// num/den as a real rational; den must be nonzero.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Gaussian {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn complex_ratio(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        assert!(re_den != 0 && im_den != 0, "zero denominator");
        Gaussian {
            re: BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            im: BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Gaussian { re: self.re.clone(), im: -self.im.clone() }
    }

    /// |z|^2 = re^2 + im^2, as a rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn scale_rational(&self, c: &BigRational) -> Self {
        Gaussian { re: &self.re * c, im: &self.im * c }
    }

    pub fn scale_ratio(&self, num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let c = BigRational::new(BigInt::from(num), BigInt::from(den));
        self.scale_rational(&c)
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    /// Canonical reduced-fraction string: "p/q", "r/s*i", or "p/q+r/s*i"
    /// (with "-" splicing for negative imaginary parts, and bare integers
    /// when a denominator is 1). Round-trips through [`Gaussian::parse`].
    pub fn to_display_string(&self) -> String {
        if self.im.is_zero() {
            return format_rational(&self.re);
        }
        let im_part = format!("{}*i", format_rational(&self.im.abs()));
        if self.re.is_zero() {
            if self.im.is_negative() {
                return format!("-{im_part}");
            }
            return im_part;
        }
        let sign = if self.im.is_negative() { '-' } else { '+' };
        format!("{}{}{}", format_rational(&self.re), sign, im_part)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        // split at the sign separating real and imaginary parts, if any; skip
        // a leading sign so "-1/2" parses as a pure real.
        if let Some(stripped) = s.strip_suffix("*i") {
            let body = stripped;
            for (idx, ch) in body.char_indices().skip(1) {
                if ch == '+' || ch == '-' {
                    let re = parse_rational(&body[..idx])?;
                    let im_abs = parse_rational(&body[idx + 1..])?;
                    let im = if ch == '-' { -im_abs } else { im_abs };
                    return Some(Gaussian { re, im });
                }
            }
            return Some(Gaussian { re: BigRational::zero(), im: parse_rational(body)? });
        }
        Some(Gaussian { re: parse_rational(s)?, im: BigRational::zero() })
    }
}

fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let num: BigInt = n.trim().parse().ok()?;
            let den: BigInt = d.trim().parse().ok()?;
            if den.is_zero() {
                return None;
            }
            Some(BigRational::new(num, den))
        }
        None => {
            let num: BigInt = s.parse().ok()?;
            Some(BigRational::from_integer(num))
        }
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // good enough for the float-only checks: exact when numerator and
    // denominator fit in f64, which holds at desk scale
    let n = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    n / d
}

pub fn format_big_rational(r: &BigRational) -> String {
    format_rational(r)
}

impl fmt::Debug for Gaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_display_string())
    }
}

impl fmt::Display for Gaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_display_string())
    }
}

impl Add for Gaussian {
    type Output = Gaussian;
    fn add(self, rhs: Gaussian) -> Gaussian {
        Gaussian { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl<'a> Add<&'a Gaussian> for Gaussian {
    type Output = Gaussian;
    fn add(self, rhs: &'a Gaussian) -> Gaussian {
        Gaussian { re: self.re + &rhs.re, im: self.im + &rhs.im }
    }
}

impl AddAssign<&Gaussian> for Gaussian {
    fn add_assign(&mut self, rhs: &Gaussian) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Sub for Gaussian {
    type Output = Gaussian;
    fn sub(self, rhs: Gaussian) -> Gaussian {
        Gaussian { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl SubAssign<&Gaussian> for Gaussian {
    fn sub_assign(&mut self, rhs: &Gaussian) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl Neg for Gaussian {
    type Output = Gaussian;
    fn neg(self) -> Gaussian {
        Gaussian { re: -self.re, im: -self.im }
    }
}

impl Mul for Gaussian {
    type Output = Gaussian;
    fn mul(self, rhs: Gaussian) -> Gaussian {
        (&self).mul(&rhs)
    }
}

impl<'a, 'b> Mul<&'b Gaussian> for &'a Gaussian {
    type Output = Gaussian;
    fn mul(self, rhs: &'b Gaussian) -> Gaussian {
        // (a+bi)(c+di) = (ac - bd) + (ad + bc)i
        Gaussian {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_identities() {
        let z = Gaussian::complex_ratio(1, 2, -3, 4);
        assert_eq!(z.clone() + Gaussian::zero(), z);
        assert_eq!(&z * &Gaussian::one(), z);
        assert_eq!(&Gaussian::i() * &Gaussian::i(), Gaussian::from_int(-1));
    }

    #[test]
    fn conjugation_and_norm() {
        let z = Gaussian::complex_ratio(1, 2, 1, 3);
        let n = (&z * &z.conj()).re;
        assert_eq!(n, z.norm_sqr());
        assert!((&z * &z.conj()).im.is_zero());
    }

    #[test]
    fn display_strings() {
        assert_eq!(Gaussian::ratio(1, 2).to_display_string(), "1/2");
        assert_eq!(Gaussian::from_int(-3).to_display_string(), "-3");
        assert_eq!(Gaussian::complex_ratio(1, 2, 1, 3).to_display_string(), "1/2+1/3*i");
        assert_eq!(Gaussian::complex_ratio(0, 1, -2, 5).to_display_string(), "-2/5*i");
        assert_eq!(Gaussian::complex_ratio(-1, 2, -1, 1).to_display_string(), "-1/2-1*i");
        assert_eq!(Gaussian::zero().to_display_string(), "0");
    }

    #[test]
    fn parse_round_trip() {
        for z in [
            Gaussian::zero(),
            Gaussian::one(),
            Gaussian::i(),
            Gaussian::ratio(-7, 3),
            Gaussian::complex_ratio(2, 3, -5, 7),
            Gaussian::complex_ratio(0, 1, 4, 9),
        ] {
            let s = z.to_display_string();
            assert_eq!(Gaussian::parse(&s), Some(z), "round trip failed for {s}");
        }
        assert_eq!(Gaussian::parse("1/0"), None);
    }
}
