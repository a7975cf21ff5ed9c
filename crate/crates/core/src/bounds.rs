//! Closed-form upper bounds on delta(P^n, Q^n) and on its derivative
//! under two-point mass transfer, plus the combinatorial inequalities the
//! derivations rest on.
//!
//! Bounds are evaluated in f64 even when distances are exact rationals.
//! Callers comparing "exact <= bound" should round the bound up first
//! (see [`crate::field::ulps_up`]); the checks in this module already do.

use num_bigint::BigUint;
use serde::Serialize;

use crate::dist::{diff_profile, Distribution};
use crate::error::{Error, Result};
use crate::exact::EngineKind;
use crate::field::{Field, LnFact};

use std::f64::consts::PI;

/// The linear growth bound n * delta(P, Q), capped at 1 because a
/// variational distance never exceeds 1. The flag reports whether the cap
/// was applied; the uncapped form is the stated inequality.
pub fn linear_bound(delta_1: f64, n: u64) -> (f64, bool) {
    debug_assert!((0.0..=1.0).contains(&delta_1));
    let raw = n as f64 * delta_1;
    if raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    }
}

/// sqrt(1/(pi*pbar)) * sqrt(n + 1/pbar) * delta(P, Q).
///
/// Requires pbar > 0: the quotient exact/bound tends to 1 for suitable
/// pairs as n grows, so this is the asymptotically tight form.
pub fn sqrt_bound_first(delta_1: f64, pbar: f64, n: u64) -> Result<f64> {
    if pbar <= 0.0 {
        return Err(Error::PbarNotPositive);
    }
    Ok((1.0 / (PI * pbar)).sqrt() * (n as f64 + 1.0 / pbar).sqrt() * delta_1)
}

/// sqrt(n / (2*pbar)) * delta(P, Q).
///
/// Requires pbar > 0. The constant 1/2 under the root is the smallest
/// for which the inequality holds at every n.
pub fn sqrt_bound_second(delta_1: f64, pbar: f64, n: u64) -> Result<f64> {
    if pbar <= 0.0 {
        return Err(Error::PbarNotPositive);
    }
    Ok((n as f64 / (2.0 * pbar)).sqrt() * delta_1)
}

fn check_masses(p: f64, p_prime: f64) -> Result<()> {
    if p <= 0.0 || p_prime <= 0.0 || p + p_prime > 1.0 + 1e-12 {
        return Err(Error::NonpositiveMass { p, p_prime });
    }
    Ok(())
}

/// 1/sqrt(2*pi) * sqrt(1/p + 1/p') * sqrt(n + 1/min(p, p')).
///
/// Upper bound on the right derivative of delta(P_t^n, P_t0^n) when mass
/// moves at unit rate from a point holding p' to a point holding p.
pub fn derivative_bound_first(p: f64, p_prime: f64, n: u64) -> Result<f64> {
    check_masses(p, p_prime)?;
    Ok((1.0 / (2.0 * PI).sqrt())
        * (1.0 / p + 1.0 / p_prime).sqrt()
        * (n as f64 + 1.0 / p.min(p_prime)).sqrt())
}

/// 1/2 * sqrt(1/p + 1/p') * sqrt(n).
pub fn derivative_bound_second(p: f64, p_prime: f64, n: u64) -> Result<f64> {
    check_masses(p, p_prime)?;
    Ok(0.5 * (1.0 / p + 1.0 / p_prime).sqrt() * (n as f64).sqrt())
}

/// The concave majorant s(k) of the per-block derivative sum:
///
///   s(k) = 1/(p+p') * sqrt((k + 1/min(alpha, beta)) / (2*pi*alpha*beta))
///
/// with alpha = p/(p+p'), beta = p'/(p+p'). Accepts real k >= 0; evaluated
/// at the mean block count k = n*(p+p') it reproduces
/// [`derivative_bound_first`].
pub fn majorant_s(p: f64, p_prime: f64, k: f64) -> Result<f64> {
    check_masses(p, p_prime)?;
    if k < 0.0 {
        return Err(Error::out_of_range("k must be nonnegative"));
    }
    let s = p + p_prime;
    let alpha = p / s;
    let beta = p_prime / s;
    Ok((1.0 / s) * ((k + 1.0 / alpha.min(beta)) / (2.0 * PI * alpha * beta)).sqrt())
}

/// The alternative majorant s~(k) = 1/(p+p') * sqrt(k / (4*alpha*beta));
/// at k = n*(p+p') it reproduces [`derivative_bound_second`].
pub fn majorant_s_tilde(p: f64, p_prime: f64, k: f64) -> Result<f64> {
    check_masses(p, p_prime)?;
    if k < 0.0 {
        return Err(Error::out_of_range("k must be nonnegative"));
    }
    let s = p + p_prime;
    let alpha = p / s;
    let beta = p_prime / s;
    Ok((1.0 / s) * (k / (4.0 * alpha * beta)).sqrt())
}

/// Both sides of the Stirling bound on a centered binomial term:
///
///   lhs = C(n,k) (k/n)^k ((n-k)/n)^(n-k),  rhs = sqrt(n / (2*pi*k*(n-k)))
///
/// for 0 < k < n (at k = n the right side degenerates; the left side is 1).
/// The contract lhs <= rhs holds throughout the valid range.
pub fn stirling_binomial_check(n: u64, k: u64) -> Result<(f64, f64)> {
    if !(0 < k && k < n) {
        return Err(Error::out_of_range(format!(
            "need 0 < k < n, got k={k}, n={n}"
        )));
    }
    let lnf = LnFact::up_to(n);
    Ok(stirling_binomial_check_with(&lnf, n, k))
}

/// Same as [`stirling_binomial_check`] with a caller-provided factorial
/// table, for scans over many (n, k).
pub fn stirling_binomial_check_with(lnf: &LnFact, n: u64, k: u64) -> (f64, f64) {
    debug_assert!(0 < k && k < n);
    let nf = n as f64;
    let kf = k as f64;
    let lhs = (lnf.ln_binomial(n, k) + kf * (kf / nf).ln() + (nf - kf) * ((nf - kf) / nf).ln())
        .exp();
    let rhs = (nf / (2.0 * PI * kf * (nf - kf))).sqrt();
    (lhs, rhs)
}

// Rational lower bound on pi used by the exact Stirling comparison:
// 314159265358979 / 10^14 < pi, so substituting it for pi rounds the
// right-hand side up.
const PI_LO_NUM: u64 = 314_159_265_358_979;
const PI_LO_DEN: u64 = 100_000_000_000_000;

/// Exact verification of the Stirling binomial bound: the left side is a
/// big-integer/rational value compared against the right side with pi
/// replaced by a rational lower bound (an upward-rounded right side).
///
/// lhs <= rhs is equivalent to
///   2 * pi * C(n,k)^2 * k^(2k+1) * (n-k)^(2(n-k)+1) <= n^(2n+1),
/// which is decided in integers. Intended for moderate n (the integers
/// grow like n^(2n)).
pub fn stirling_binomial_holds_exact(n: u64, k: u64) -> Result<bool> {
    if !(0 < k && k < n) {
        return Err(Error::out_of_range(format!(
            "need 0 < k < n, got k={k}, n={n}"
        )));
    }
    let c = num_integer::binomial(BigUint::from(n), BigUint::from(k));
    let ek = u32::try_from(2 * k + 1).expect("k too large for exact check");
    let enk = u32::try_from(2 * (n - k) + 1).expect("n too large for exact check");
    let en = u32::try_from(2 * n + 1).expect("n too large for exact check");
    let lhs = BigUint::from(2u32)
        * BigUint::from(PI_LO_NUM)
        * &c
        * &c
        * BigUint::from(k).pow(ek)
        * BigUint::from(n - k).pow(enk);
    let rhs = BigUint::from(PI_LO_DEN) * BigUint::from(n).pow(en);
    Ok(lhs <= rhs)
}

/// x^k (1-x)^(n-k) with the convention 0^0 = 1 (IEEE powf already maps
/// 0^0 to 1). Defined for real n > 0, k in [0, n], x in [0, 1].
pub fn bernoulli_power(n: f64, k: f64, x: f64) -> f64 {
    x.powf(k) * (1.0 - x).powf(n - k)
}

fn check_power_domain(n: f64, k: f64, x: f64) -> Result<()> {
    // NaN anywhere fails the range checks and lands here.
    if n.is_nan() || n <= 0.0 || !(0.0..=n).contains(&k) || !(0.0..=1.0).contains(&x) {
        return Err(Error::out_of_range(format!(
            "need n > 0, 0 <= k <= n, 0 <= x <= 1; got n={n}, k={k}, x={x}"
        )));
    }
    Ok(())
}

// powf rounding grows with the exponent: a one-ulp base perturbation
// scales into ~n ulps of the result. Near the flat maximum the true
// margin is zero, so comparisons get slack proportional to n.
fn power_slack(n: f64) -> f64 {
    1.0 + (n + 2.0) * 1e-15
}

/// Verifies x^k (1-x)^(n-k) <= (k/n)^k (1-k/n)^(n-k): the term is
/// maximized at x = k/n. Always true on the valid domain, up to
/// exponent-scaled evaluation slack on the right side.
pub fn bernoulli_power_max_check(n: f64, k: f64, x: f64) -> Result<bool> {
    check_power_domain(n, k, x)?;
    let lhs = bernoulli_power(n, k, x);
    let rhs = bernoulli_power(n, k, k / n);
    Ok(lhs <= rhs * power_slack(n))
}

/// Sign of the slope of x -> x^k (1-x)^(n-k), tested as interval
/// monotonicity over [x, x+h]: nondecreasing left of the maximizer k/n,
/// nonincreasing right of it. Intervals that straddle k/n carry no claim
/// and pass trivially.
pub fn bernoulli_power_slope_check(n: f64, k: f64, x: f64, h: f64) -> Result<bool> {
    check_power_domain(n, k, x)?;
    if h.is_nan() || h <= 0.0 || x + h > 1.0 {
        return Err(Error::out_of_range(format!(
            "need h > 0 and x + h <= 1; got x={x}, h={h}"
        )));
    }
    let peak = k / n;
    let f0 = bernoulli_power(n, k, x);
    let f1 = bernoulli_power(n, k, x + h);
    if x + h <= peak {
        Ok(f0 <= f1 * power_slack(n))
    } else if x >= peak {
        Ok(f1 <= f0 * power_slack(n))
    } else {
        Ok(true)
    }
}

/// Every applicable upper bound for a (P, Q, n) query, with the exact
/// distance attached when an engine could produce one.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: u64,
    /// delta(P, Q).
    pub delta_1: f64,
    /// Minimum probability on the difference set; absent when P = Q.
    pub pbar: Option<f64>,
    pub linear: f64,
    pub linear_capped: bool,
    /// Present iff pbar > 0.
    pub sqrt_first: Option<f64>,
    /// Present iff pbar > 0.
    pub sqrt_second: Option<f64>,
    pub sqrt_applicable: bool,
    pub exact: Option<f64>,
    pub exact_engine: Option<String>,
}

impl BoundReport {
    pub fn compute<F: Field>(
        p: &Distribution<F>,
        q: &Distribution<F>,
        n: u64,
        exact: Option<(f64, EngineKind)>,
    ) -> BoundReport {
        let delta_1 = crate::dist::variational_distance(p, q).as_f64();
        let prof = diff_profile(p, q);
        let pbar = prof.min_diff_prob.as_ref().map(Field::as_f64);
        let (linear, linear_capped) = linear_bound(delta_1.clamp(0.0, 1.0), n);
        let sqrt_applicable = matches!(pbar, Some(pb) if pb > 0.0);
        let (sqrt_first, sqrt_second) = if let (true, Some(pb)) = (sqrt_applicable, pbar) {
            (
                Some(sqrt_bound_first(delta_1, pb, n).expect("pbar checked positive")),
                Some(sqrt_bound_second(delta_1, pb, n).expect("pbar checked positive")),
            )
        } else {
            (None, None)
        };
        BoundReport {
            n,
            delta_1,
            pbar,
            linear,
            linear_capped,
            sqrt_first,
            sqrt_second,
            sqrt_applicable,
            exact: exact.map(|(d, _)| d),
            exact_engine: exact.map(|(_, e)| e.as_str().to_string()),
        }
    }
}
