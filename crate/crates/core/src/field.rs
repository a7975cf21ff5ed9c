//! Numeric backends.
//!
//! Every engine in this crate is generic over [`Field`], with two
//! implementations:
//!
//! - [`BigRational`]: exact arithmetic, never rounds. This is the ground
//!   truth; every inequality the crate verifies is an exact statement.
//! - `f64`: the scale backend. Products of many probabilities are
//!   assembled in log domain, and differences of two such products use a
//!   max-factored form `e^hi * (1 - e^(lo-hi))` so that neither factor
//!   underflows before the subtraction.
//!
//! All values are plain immutable data; both backends are `Send + Sync`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Absolute tolerance under which two float probabilities are treated as
/// equal when building a difference set. Misclassifying a label as
/// "differing" would silently change the minimum differing probability,
/// which gates the square-root bounds, so the tolerance is kept at the
/// last representable decade below f64 rounding of sums.
pub const DIFF_EQ_TOL: f64 = 1e-15;

/// Absolute tolerance on `sum(probs) - 1` accepted by float validation.
/// Accepted distributions are used as-is, never renormalized.
pub const SUM_TOL: f64 = 1e-12;

/// Scalar type for the distance engines and the bound formulas.
pub trait Field:
    Sized
    + Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic never rounds.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(n: u64) -> Self;
    /// `num / den`; `den` must be nonzero.
    fn from_ratio(num: u64, den: u64) -> Self;
    fn as_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;

    /// `self^exp` with the convention `0^0 = 1`.
    fn pow_u(&self, exp: u64) -> Self;

    /// floor(self) for nonnegative values that fit in u64.
    fn floor_to_u64(&self) -> u64;

    /// Parse a probability token: a decimal such as `"0.25"` or `"1e-3"`,
    /// or a fraction such as `"3/10"`. The rational backend parses both
    /// forms exactly.
    fn parse(token: &str) -> Result<Self>;

    /// JSON rendering: a number for floats, a fraction string for rationals.
    fn to_json(&self) -> serde_json::Value;

    /// Equality used when building difference sets: exact for rationals,
    /// within [`DIFF_EQ_TOL`] absolute for floats.
    fn diff_eq(a: &Self, b: &Self) -> bool;

    /// `a <= b` with rounding slack: exact for rationals, `b` nudged up by
    /// 4 ulps for floats so that true inequalities cannot fail spuriously.
    fn le_with_slack(a: &Self, b: &Self) -> bool;

    /// Binomial coefficient C(n, k) as a field element.
    fn binomial_coeff(n: u64, k: u64, lnf: &LnFact) -> Self;

    /// `multinomial(sum(counts); counts) * prod_i probs[i]^counts[i]`.
    fn class_weight(probs: &[Self], counts: &[u64], lnf: &LnFact) -> Self;

    /// |class_weight(p, counts) - class_weight(q, counts)|.
    fn class_weight_abs_diff(p: &[Self], q: &[Self], counts: &[u64], lnf: &LnFact) -> Self;

    /// C(n, k) s^k (1-s)^(n-k), the weight of seeing k hits in n trials.
    fn binomial_weight(n: u64, k: u64, s: &Self, lnf: &LnFact) -> Self;

    /// C(k, r) a^r (1-a)^(k-r).
    fn binomial_pmf(k: u64, r: u64, a: &Self, lnf: &LnFact) -> Self;

    /// |binomial_pmf(k, r, a) - binomial_pmf(k, r, b)|.
    fn binomial_pmf_abs_diff(k: u64, r: u64, a: &Self, b: &Self, lnf: &LnFact) -> Self;
}

/// Cached table of ln(m!) for m = 0..=n, built with compensated summation.
///
/// The float backend routes every binomial and multinomial coefficient
/// through this table; the rational backend ignores it.
pub struct LnFact {
    table: Vec<f64>,
}

impl LnFact {
    pub fn up_to(n: u64) -> Self {
        let mut table = Vec::with_capacity(n as usize + 1);
        table.push(0.0);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for j in 1..=n {
            let y = (j as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            table.push(sum);
        }
        LnFact { table }
    }

    #[inline]
    pub fn ln_factorial(&self, m: u64) -> f64 {
        self.table[m as usize]
    }

    #[inline]
    pub fn ln_binomial(&self, n: u64, k: u64) -> f64 {
        debug_assert!(k <= n);
        self.ln_factorial(n) - self.ln_factorial(k) - self.ln_factorial(n - k)
    }

    pub fn ln_multinomial(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let mut v = self.ln_factorial(total);
        for &c in counts {
            v -= self.ln_factorial(c);
        }
        v
    }
}

/// `x * ln(y)` with `0 * ln(0) = 0`, matching the `0^0 = 1` convention.
#[inline]
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `|e^a - e^b|` factored as `e^hi * (1 - e^(lo - hi))`, which stays
/// accurate when both exponents are deeply negative. `-inf` is a valid
/// exponent and denotes an exact zero.
#[inline]
pub fn abs_diff_of_exps(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return 0.0;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let scale = hi.exp();
    if lo == f64::NEG_INFINITY {
        return scale;
    }
    scale * (-(lo - hi).exp_m1())
}

/// The next representable f64 above `x` (toward +inf).
#[inline]
pub fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// `x` nudged up by `n` ulps. Bound values are rounded up this way before
/// "exact <= bound" comparisons, so the comparisons verify the
/// mathematical inequality rather than float round-off.
pub fn ulps_up(x: f64, n: u32) -> f64 {
    let mut v = x;
    for _ in 0..n {
        v = next_up(v);
    }
    v
}

impl Field for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn pow_u(&self, exp: u64) -> Self {
        if exp == 0 {
            1.0
        } else {
            self.powi(exp as i32)
        }
    }

    fn floor_to_u64(&self) -> u64 {
        debug_assert!(*self >= 0.0);
        self.floor() as u64
    }

    fn parse(token: &str) -> Result<Self> {
        let bad = || Error::BadNumber {
            token: token.to_string(),
        };
        let v = if let Some((a, b)) = token.split_once('/') {
            let num: f64 = a.trim().parse().map_err(|_| bad())?;
            let den: f64 = b.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        } else {
            token.trim().parse().map_err(|_| bad())?
        };
        if !v.is_finite() {
            return Err(bad());
        }
        Ok(v)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }

    fn diff_eq(a: &Self, b: &Self) -> bool {
        (a - b).abs() <= DIFF_EQ_TOL
    }

    fn le_with_slack(a: &Self, b: &Self) -> bool {
        *a <= ulps_up(*b, 4)
    }

    fn binomial_coeff(n: u64, k: u64, lnf: &LnFact) -> Self {
        lnf.ln_binomial(n, k).exp()
    }

    fn class_weight(probs: &[Self], counts: &[u64], lnf: &LnFact) -> Self {
        ln_class_weight(probs, counts, lnf).exp()
    }

    fn class_weight_abs_diff(p: &[Self], q: &[Self], counts: &[u64], lnf: &LnFact) -> Self {
        abs_diff_of_exps(
            ln_class_weight(p, counts, lnf),
            ln_class_weight(q, counts, lnf),
        )
    }

    fn binomial_weight(n: u64, k: u64, s: &Self, lnf: &LnFact) -> Self {
        (lnf.ln_binomial(n, k) + xlny(k as f64, *s) + xlny((n - k) as f64, 1.0 - *s)).exp()
    }

    fn binomial_pmf(k: u64, r: u64, a: &Self, lnf: &LnFact) -> Self {
        ln_binomial_pmf(k, r, *a, lnf).exp()
    }

    fn binomial_pmf_abs_diff(k: u64, r: u64, a: &Self, b: &Self, lnf: &LnFact) -> Self {
        abs_diff_of_exps(ln_binomial_pmf(k, r, *a, lnf), ln_binomial_pmf(k, r, *b, lnf))
    }
}

fn ln_class_weight(probs: &[f64], counts: &[u64], lnf: &LnFact) -> f64 {
    let mut v = lnf.ln_multinomial(counts);
    for (&p, &c) in probs.iter().zip(counts) {
        v += xlny(c as f64, p);
    }
    v
}

#[inline]
fn ln_binomial_pmf(k: u64, r: u64, a: f64, lnf: &LnFact) -> f64 {
    lnf.ln_binomial(k, r) + xlny(r as f64, a) + xlny((k - r) as f64, 1.0 - a)
}

impl Field for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn pow_u(&self, exp: u64) -> Self {
        if exp == 0 {
            return One::one();
        }
        if Zero::is_zero(self) {
            return Zero::zero();
        }
        let e = u32::try_from(exp).expect("exponent too large");
        // Base is already reduced, so numerator/denominator powers stay coprime.
        BigRational::new_raw(self.numer().pow(e), self.denom().pow(e))
    }

    fn floor_to_u64(&self) -> u64 {
        debug_assert!(!self.is_negative());
        self.floor()
            .to_integer()
            .to_u64()
            .expect("floor does not fit in u64")
    }

    fn parse(token: &str) -> Result<Self> {
        parse_rational_token(token)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }

    fn diff_eq(a: &Self, b: &Self) -> bool {
        a == b
    }

    fn le_with_slack(a: &Self, b: &Self) -> bool {
        a <= b
    }

    fn binomial_coeff(n: u64, k: u64, _lnf: &LnFact) -> Self {
        BigRational::from_integer(BigInt::from(num_integer::binomial(
            BigUint::from(n),
            BigUint::from(k),
        )))
    }

    fn class_weight(probs: &[Self], counts: &[u64], _lnf: &LnFact) -> Self {
        let counts_big: Vec<BigUint> = counts.iter().map(|&c| BigUint::from(c)).collect();
        let coeff = BigRational::from_integer(BigInt::from(num_integer::multinomial(&counts_big)));
        probs
            .iter()
            .zip(counts)
            .fold(coeff, |acc, (p, &c)| acc * p.pow_u(c))
    }

    fn class_weight_abs_diff(p: &[Self], q: &[Self], counts: &[u64], lnf: &LnFact) -> Self {
        Signed::abs(&(Self::class_weight(p, counts, lnf) - Self::class_weight(q, counts, lnf)))
    }

    fn binomial_weight(n: u64, k: u64, s: &Self, lnf: &LnFact) -> Self {
        let one: Self = One::one();
        Self::binomial_coeff(n, k, lnf) * s.pow_u(k) * (one - s).pow_u(n - k)
    }

    fn binomial_pmf(k: u64, r: u64, a: &Self, lnf: &LnFact) -> Self {
        let one: Self = One::one();
        Self::binomial_coeff(k, r, lnf) * a.pow_u(r) * (one - a).pow_u(k - r)
    }

    fn binomial_pmf_abs_diff(k: u64, r: u64, a: &Self, b: &Self, lnf: &LnFact) -> Self {
        Signed::abs(&(Self::binomial_pmf(k, r, a, lnf) - Self::binomial_pmf(k, r, b, lnf)))
    }
}

/// Parse `"a/b"`, `"0.125"`, `"-3"`, or `"2.5e-3"` into an exact rational.
fn parse_rational_token(token: &str) -> Result<BigRational> {
    let bad = || Error::BadNumber {
        token: token.to_string(),
    };
    let s = token.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if Zero::is_zero(&den) {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }

    // Decimal with optional exponent: [sign] digits [. digits] [eE [sign] digits]
    let (mantissa, exp_part) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let exp: i64 = match exp_part {
        Some(e) => e.parse().map_err(|_| bad())?,
        None => 0,
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !frac_part.is_empty() && !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(&digits).map_err(|_| bad())?;
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10u32);
    Ok(if scale >= 0 {
        BigRational::new(num, ten.pow(scale as u32))
    } else {
        BigRational::new(num * ten.pow((-scale) as u32), One::one())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational_token("3/10").unwrap(), rat(3, 10));
        assert_eq!(parse_rational_token("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rational_token("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational_token("2.5e-3").unwrap(), rat(1, 400));
        assert_eq!(parse_rational_token("-0.25").unwrap(), rat(-1, 4));
        assert_eq!(parse_rational_token("12").unwrap(), rat(12, 1));
        assert_eq!(parse_rational_token("1.5e2").unwrap(), rat(150, 1));
        assert!(parse_rational_token("abc").is_err());
        assert!(parse_rational_token("1/0").is_err());
        assert!(parse_rational_token("0x2").is_err());
    }

    #[test]
    fn float_parse_accepts_fractions() {
        assert_eq!(<f64 as Field>::parse("3/10").unwrap(), 0.3);
        assert_eq!(<f64 as Field>::parse("0.5").unwrap(), 0.5);
        assert!(<f64 as Field>::parse("1/0").is_err());
    }

    #[test]
    fn pow_zero_conventions() {
        assert_eq!(<f64 as Field>::pow_u(&0.0, 0), 1.0);
        assert_eq!(<f64 as Field>::pow_u(&0.0, 3), 0.0);
        let z: BigRational = Field::zero();
        assert_eq!(z.pow_u(0), Field::one());
        assert_eq!(z.pow_u(5), Field::zero());
        assert_eq!(rat(2, 3).pow_u(3), rat(8, 27));
    }

    #[test]
    fn ln_fact_matches_direct_products() {
        let lnf = LnFact::up_to(20);
        let mut fact = 1.0f64;
        for m in 1..=20u64 {
            fact *= m as f64;
            assert!((lnf.ln_factorial(m) - fact.ln()).abs() < 1e-12);
        }
        assert_eq!(lnf.ln_factorial(0), 0.0);
    }

    #[test]
    fn exp_diff_is_stable_for_deep_exponents() {
        // Both weights far below the underflow threshold of a direct
        // product. The offset 2^-30 is exactly representable next to 600.
        let delta = (2.0f64).powi(-30);
        let a = -600.0f64;
        let b = a + delta;
        let got = abs_diff_of_exps(a, b);
        let want = a.exp() * delta.exp_m1();
        assert!((got - want).abs() <= 1e-12 * want);
        assert_eq!(abs_diff_of_exps(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.0);
        assert_eq!(abs_diff_of_exps(0.0, f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        let lnf = LnFact::up_to(40);
        let s = 0.3f64;
        let total: f64 = (0..=40).map(|k| f64::binomial_weight(40, k, &s, &lnf)).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let s = rat(3, 10);
        let mut total: BigRational = Field::zero();
        for k in 0..=40 {
            total += BigRational::binomial_weight(40, k, &s, &lnf);
        }
        assert_eq!(total, Field::one());
    }

    #[test]
    fn degenerate_binomial_weight_uses_zero_pow_zero() {
        let lnf = LnFact::up_to(5);
        // All mass on the block: only k = n has weight.
        assert_eq!(f64::binomial_weight(5, 5, &1.0, &lnf), 1.0);
        assert_eq!(f64::binomial_weight(5, 3, &1.0, &lnf), 0.0);
        let one: BigRational = Field::one();
        assert_eq!(BigRational::binomial_weight(5, 5, &one, &lnf), Field::one());
        assert_eq!(BigRational::binomial_weight(5, 3, &one, &lnf), Field::zero());
    }

    #[test]
    fn class_weight_agrees_across_backends() {
        let lnf = LnFact::up_to(10);
        let p_r = [rat(1, 4), rat(1, 2), rat(1, 4)];
        let p_f = [0.25f64, 0.5, 0.25];
        let counts = [3u64, 5, 2];
        let exact = BigRational::class_weight(&p_r, &counts, &lnf);
        let float = f64::class_weight(&p_f, &counts, &lnf);
        assert!((exact.as_f64() - float).abs() < 1e-14);
    }

    #[test]
    fn ulp_nudging_moves_up() {
        let x = 1.0f64;
        assert!(ulps_up(x, 4) > x);
        assert!(ulps_up(0.0, 1) > 0.0);
        assert_eq!(ulps_up(f64::INFINITY, 2), f64::INFINITY);
    }
}
