//! The derivative of delta(P_t^n, P_t0^n) under two-point mass transfer,
//! computed term by term, plus the per-k decomposition used to verify the
//! inner-sum collapse, its majorants, and the Jensen averaging step.
//!
//! Conditioned on k of the n coordinates landing in the moving block
//! {z1, z2}, the block behaves like a binomial in r (hits at z1) with
//! parameter alpha = p/(p+p'). The right derivative of the distance at
//! t = t0 is
//!
//!   sum_k q(k) sum_{r <= rbar} C(k,r) a'(k,r)
//!
//! with q(k) the binomial weight of the block count, a'(k,r) the derivative
//! of the pmf difference, and rbar = floor(k*alpha) the last index where
//! a'(k,r) is nonnegative. The inner sum telescopes to the closed form
//! (k/(p+p')) C(k-1,rbar) alpha^rbar beta^(k-rbar-1), giving an O(n) total.

use crate::bounds::{majorant_s, majorant_s_tilde};
use crate::dist::{aligned, diff_profile, Distribution};
use crate::error::{Error, Result};
use crate::field::{Field, LnFact};

/// A one-parameter family P_t that moves mass at unit rate from z2 to z1,
/// anchored at a base distribution: P_t(z1) = t, P_t(z2) = p + p' - t,
/// all other labels fixed. Both anchor masses must be positive.
#[derive(Debug, Clone)]
pub struct TwoPointFamily<F: Field> {
    base: Distribution<F>,
    i1: usize,
    i2: usize,
}

impl<F: Field> TwoPointFamily<F> {
    pub fn new(base: Distribution<F>, z1: &str, z2: &str) -> Result<Self> {
        if z1 == z2 {
            return Err(Error::BadInput {
                what: "the two transfer labels must differ".into(),
            });
        }
        let i1 = base.index_of(z1).ok_or_else(|| Error::UnknownLabel {
            label: z1.to_string(),
        })?;
        let i2 = base.index_of(z2).ok_or_else(|| Error::UnknownLabel {
            label: z2.to_string(),
        })?;
        let p = &base.probs()[i1];
        let pp = &base.probs()[i2];
        if *p <= F::zero() || *pp <= F::zero() {
            return Err(Error::NonpositiveMass {
                p: p.as_f64(),
                p_prime: pp.as_f64(),
            });
        }
        Ok(TwoPointFamily { base, i1, i2 })
    }

    /// Interpret a pair differing at exactly two labels as a family anchored
    /// at `p`, returning the parameter value `t` at which the family passes
    /// through `q`. Fails with `NotTwoPoint` when the difference set has a
    /// different size and with `NonpositiveMass` when an anchor mass is zero.
    pub fn from_pair(p: &Distribution<F>, q: &Distribution<F>) -> Result<(Self, F)> {
        let prof = diff_profile(p, q);
        if prof.diff_set.len() != 2 {
            return Err(Error::NotTwoPoint {
                count: prof.diff_set.len(),
            });
        }
        let (labels, pp_row, _) = aligned(p, q);
        let base = Distribution::new(labels, pp_row)?;
        let t = q.prob_of(&prof.diff_set[0]);
        let fam = Self::new(base, &prof.diff_set[0], &prof.diff_set[1])?;
        Ok((fam, t))
    }

    pub fn base(&self) -> &Distribution<F> {
        &self.base
    }

    pub fn z1(&self) -> &str {
        &self.base.labels()[self.i1]
    }

    pub fn z2(&self) -> &str {
        &self.base.labels()[self.i2]
    }

    /// Anchor mass at z1; also the reference parameter t0.
    pub fn p(&self) -> &F {
        &self.base.probs()[self.i1]
    }

    /// Anchor mass at z2.
    pub fn p_prime(&self) -> &F {
        &self.base.probs()[self.i2]
    }

    pub fn t0(&self) -> F {
        self.p().clone()
    }

    /// Conserved block mass p + p'.
    pub fn mass(&self) -> F {
        self.p().clone() + self.p_prime().clone()
    }

    /// Fraction of the block at z1: alpha = p / (p + p').
    pub fn alpha(&self) -> F {
        self.p().clone() / self.mass()
    }

    /// The member distribution P_t; requires 0 <= t <= p + p'.
    pub fn at(&self, t: &F) -> Result<Distribution<F>> {
        let s = self.mass();
        if *t < F::zero() || *t > s {
            return Err(Error::out_of_range(format!(
                "t={t} outside the conserved block mass [0, {s}]"
            )));
        }
        let mut probs = self.base.probs().to_vec();
        probs[self.i1] = t.clone();
        probs[self.i2] = s - t.clone();
        Distribution::new(self.base.labels().to_vec(), probs)
    }
}

/// The per-(k, r) derivative a'(k, r) of the pmf difference at t = t0:
///
///   a'(k,r) = [ (k-r) alpha^r beta^(k-r-1) - r alpha^(r-1) beta^(k-r) ] / (p+p')
///
/// with boundary terms dropped when their integer factor vanishes (the
/// r = 0 and r = k cases). Nonnegative exactly when r <= floor(k*alpha).
pub fn derivative_term<F: Field>(k: u64, r: u64, p: &F, p_prime: &F) -> Result<F> {
    if r > k {
        return Err(Error::out_of_range(format!("r={r} exceeds k={k}")));
    }
    if *p <= F::zero() || *p_prime <= F::zero() {
        return Err(Error::NonpositiveMass {
            p: p.as_f64(),
            p_prime: p_prime.as_f64(),
        });
    }
    let s = p.clone() + p_prime.clone();
    let alpha = p.clone() / s.clone();
    let beta = p_prime.clone() / s.clone();
    let first = if r < k {
        F::from_u64(k - r) * alpha.pow_u(r) * beta.pow_u(k - r - 1)
    } else {
        F::zero()
    };
    let second = if r > 0 {
        F::from_u64(r) * alpha.pow_u(r - 1) * beta.pow_u(k - r)
    } else {
        F::zero()
    };
    Ok((first - second) / s)
}

/// floor(k * alpha), the last r at which the derivative term is >= 0.
pub fn rbar<F: Field>(k: u64, alpha: &F) -> u64 {
    (F::from_u64(k) * alpha.clone()).floor_to_u64()
}

/// Direct evaluation of sum_{r=0}^{rbar} C(k,r) a'(k,r).
///
/// The binomial coefficient and the power product are updated by one
/// multiplication per term: with w = alpha^r beta^(k-r-1),
///
///   C(k,r) a'(k,r) = C(k,r) w ((k-r) - r beta/alpha) / (p+p').
pub fn inner_sum_direct<F: Field>(k: u64, p: &F, p_prime: &F) -> Result<F> {
    if k == 0 {
        return Err(Error::out_of_range("k must be at least 1"));
    }
    if *p <= F::zero() || *p_prime <= F::zero() {
        return Err(Error::NonpositiveMass {
            p: p.as_f64(),
            p_prime: p_prime.as_f64(),
        });
    }
    let s = p.clone() + p_prime.clone();
    let alpha = p.clone() / s.clone();
    let beta = p_prime.clone() / s.clone();
    let top = rbar(k, &alpha);
    debug_assert!(top < k);
    let ratio = beta.clone() / alpha.clone();
    let step = alpha / beta.clone();
    let mut binom = F::one();
    let mut w = beta.pow_u(k - 1);
    let mut acc = F::zero();
    for r in 0..=top {
        let weight = F::from_u64(k - r) - F::from_u64(r) * ratio.clone();
        acc = acc + binom.clone() * w.clone() * weight / s.clone();
        if r < top {
            binom = binom * F::from_u64(k - r) / F::from_u64(r + 1);
            w = w * step.clone();
        }
    }
    Ok(acc)
}

/// Closed form of the same sum: (k/(p+p')) C(k-1,rbar) alpha^rbar beta^(k-rbar-1).
pub fn inner_sum_closed<F: Field>(k: u64, p: &F, p_prime: &F) -> Result<F> {
    if k == 0 {
        return Err(Error::out_of_range("k must be at least 1"));
    }
    if *p <= F::zero() || *p_prime <= F::zero() {
        return Err(Error::NonpositiveMass {
            p: p.as_f64(),
            p_prime: p_prime.as_f64(),
        });
    }
    let s = p.clone() + p_prime.clone();
    let alpha = p.clone() / s.clone();
    let top = rbar(k, &alpha);
    debug_assert!(top < k, "alpha < 1 keeps floor(k*alpha) below k");
    let lnf = LnFact::up_to(k);
    // C(k-1,rbar) alpha^rbar beta^(k-rbar-1) is the pmf of rbar hits in
    // k-1 trials, since k-rbar-1 = (k-1)-rbar.
    let pmf = F::binomial_pmf(k - 1, top, &alpha, &lnf);
    Ok(F::from_u64(k) / s * pmf)
}

/// Both sides of the inner-sum collapse, for identity tests: the direct
/// sum and the closed form agree exactly in rational arithmetic and to
/// 1e-10 relative in floats.
pub fn inner_sum_identity<F: Field>(k: u64, p: &F, p_prime: &F) -> Result<(F, F)> {
    Ok((
        inner_sum_direct(k, p, p_prime)?,
        inner_sum_closed(k, p, p_prime)?,
    ))
}

/// Right derivative of t -> delta(P_t^n, P_t0^n) at t0, via the closed
/// form per block count: O(n).
pub fn distance_derivative<F: Field>(fam: &TwoPointFamily<F>, n: u64) -> Result<F> {
    derivative_with(fam, n, inner_sum_closed)
}

/// Same derivative through the O(n^2) double sum; retained as a self-check
/// of the closed form.
pub fn distance_derivative_direct<F: Field>(fam: &TwoPointFamily<F>, n: u64) -> Result<F> {
    derivative_with(fam, n, inner_sum_direct)
}

fn derivative_with<F: Field>(
    fam: &TwoPointFamily<F>,
    n: u64,
    inner: impl Fn(u64, &F, &F) -> Result<F>,
) -> Result<F> {
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let s = fam.mass();
    let lnf = LnFact::up_to(n);
    let mut acc = F::zero();
    // The k = 0 block has an empty inner sum and contributes nothing.
    for k in 1..=n {
        let qk = F::binomial_weight(n, k, &s, &lnf);
        if qk.is_zero() {
            continue;
        }
        acc = acc + qk * inner(k, fam.p(), fam.p_prime())?;
    }
    Ok(acc)
}

/// One row of the per-k decomposition of the derivative.
#[derive(Debug, Clone)]
pub struct DerivativeTerm<F: Field> {
    pub k: u64,
    /// Binomial weight of seeing k coordinates in the block.
    pub qk: F,
    /// floor(k * alpha).
    pub rbar: u64,
    /// Direct inner sum (zero at k = 0, where the sum is empty).
    pub inner_sum: F,
    /// Closed form of the inner sum (zero at k = 0 by convention).
    pub closed_form: F,
    pub alpha: F,
    pub beta: F,
    /// (rbar + 1) / (k + 1): the shifted block fraction entering the
    /// Stirling step.
    pub alpha_tilde: F,
    /// 1 - alpha_tilde.
    pub beta_tilde: F,
    /// Fractional part k*alpha - floor(k*alpha), in [0, 1).
    pub gamma: F,
}

#[derive(Debug, Clone)]
pub struct DerivativeDecomposition<F: Field> {
    pub terms: Vec<DerivativeTerm<F>>,
    /// sum_k qk * inner_sum = the derivative.
    pub total: F,
}

pub fn derivative_decomposition<F: Field>(
    fam: &TwoPointFamily<F>,
    n: u64,
) -> Result<DerivativeDecomposition<F>> {
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let s = fam.mass();
    let alpha = fam.alpha();
    let beta = F::one() - alpha.clone();
    let lnf = LnFact::up_to(n);
    let mut terms = Vec::with_capacity(n as usize + 1);
    let mut total = F::zero();
    for k in 0..=n {
        let qk = F::binomial_weight(n, k, &s, &lnf);
        let top = rbar(k, &alpha);
        let (inner_sum, closed_form) = if k == 0 {
            (F::zero(), F::zero())
        } else {
            inner_sum_identity(k, fam.p(), fam.p_prime())?
        };
        let kp1 = F::from_u64(k + 1);
        let alpha_tilde = F::from_u64(top + 1) / kp1.clone();
        let beta_tilde = F::one() - alpha_tilde.clone();
        let gamma = F::from_u64(k) * alpha.clone() - F::from_u64(top);
        total = total + qk.clone() * inner_sum.clone();
        terms.push(DerivativeTerm {
            k,
            qk,
            rbar: top,
            inner_sum,
            closed_form,
            alpha: alpha.clone(),
            beta: beta.clone(),
            alpha_tilde,
            beta_tilde,
            gamma,
        });
    }
    Ok(DerivativeDecomposition { terms, total })
}

/// Both sides of the Jensen step for each majorant: averaging the concave
/// majorant over the binomial block count never exceeds the majorant at
/// the mean count n*(p+p').
#[derive(Debug, Clone, Copy)]
pub struct JensenCheck {
    /// sum_k q(k) s(k).
    pub lhs_s: f64,
    /// s(n*(p+p')).
    pub rhs_s: f64,
    pub lhs_s_tilde: f64,
    pub rhs_s_tilde: f64,
}

pub fn jensen_check<F: Field>(fam: &TwoPointFamily<F>, n: u64) -> Result<JensenCheck> {
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let p = fam.p().as_f64();
    let pp = fam.p_prime().as_f64();
    let s = p + pp;
    let lnf = LnFact::up_to(n);
    let mut lhs_s = 0.0;
    let mut lhs_s_tilde = 0.0;
    for k in 0..=n {
        let qk = f64::binomial_weight(n, k, &s, &lnf);
        if qk == 0.0 {
            continue;
        }
        lhs_s += qk * majorant_s(p, pp, k as f64)?;
        lhs_s_tilde += qk * majorant_s_tilde(p, pp, k as f64)?;
    }
    Ok(JensenCheck {
        lhs_s,
        rhs_s: majorant_s(p, pp, n as f64 * s)?,
        lhs_s_tilde,
        rhs_s_tilde: majorant_s_tilde(p, pp, n as f64 * s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{derivative_bound_first, derivative_bound_second};
    use crate::exact::two_point_distance;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn rdist(parts: &[i64], den: i64) -> Distribution<BigRational> {
        Distribution::from_probs(parts.iter().map(|&k| rat(k, den)).collect()).unwrap()
    }

    fn fdist(probs: &[f64]) -> Distribution<f64> {
        Distribution::from_probs(probs.to_vec()).unwrap()
    }

    #[test]
    fn family_construction_and_member_access() {
        let fam = TwoPointFamily::new(fdist(&[0.3, 0.2, 0.5]), "z1", "z2").unwrap();
        assert_eq!(*fam.p(), 0.3);
        assert_eq!(*fam.p_prime(), 0.2);
        assert_eq!(fam.mass(), 0.5);
        let moved = fam.at(&0.35).unwrap();
        assert_eq!(moved.probs(), &[0.35, 0.15000000000000002, 0.5]);
        assert!(fam.at(&0.6).is_err());
        assert!(TwoPointFamily::new(fdist(&[0.3, 0.0, 0.7]), "z1", "z2").is_err());
        assert!(TwoPointFamily::new(fdist(&[0.3, 0.7]), "z1", "z1").is_err());
    }

    #[test]
    fn from_pair_recovers_transfer_parameters() {
        let p = rdist(&[3, 2, 5], 10);
        let q = rdist(&[4, 1, 5], 10);
        let (fam, t) = TwoPointFamily::from_pair(&p, &q).unwrap();
        assert_eq!(fam.t0(), rat(3, 10));
        assert_eq!(t, rat(4, 10));
        assert_eq!(fam.at(&t).unwrap(), q);
    }

    #[test]
    fn derivative_term_sign_flips_at_rbar() {
        let p = rat(3, 10);
        let pp = rat(2, 10);
        let alpha = p.clone() / (p.clone() + pp.clone());
        for k in 1..=12u64 {
            let top = rbar(k, &alpha);
            for r in 0..=k {
                let a = derivative_term(k, r, &p, &pp).unwrap();
                if r <= top {
                    assert!(a >= rat(0, 1), "k={k} r={r}");
                } else {
                    assert!(a < rat(0, 1), "k={k} r={r}");
                }
            }
        }
    }

    #[test]
    fn derivative_term_hand_value() {
        // k=1, r=0, p=p': a' = 1/(2p); at p = 1/4 that is 2.
        let v = derivative_term(1, 0, &rat(1, 4), &rat(1, 4)).unwrap();
        assert_eq!(v, rat(2, 1));
        let v = derivative_term(1, 0, &0.25f64, &0.25).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn weighted_terms_conserve_block_mass() {
        // sum_r C(k,r) a'(k,r) = 0: the block's total probability is constant.
        let p = rat(1, 5);
        let pp = rat(3, 10);
        let lnf = LnFact::up_to(14);
        for k in 1..=14u64 {
            let mut acc = rat(0, 1);
            for r in 0..=k {
                acc += BigRational::binomial_coeff(k, r, &lnf)
                        * derivative_term(k, r, &p, &pp).unwrap();
            }
            assert!(acc.is_zero(), "nonzero drift at k={k}");
        }
    }

    #[test]
    fn inner_sum_collapses_exactly() {
        for (pn, ppn) in [(1i64, 1i64), (3, 2), (1, 9), (7, 3)] {
            let p = rat(pn, 20);
            let pp = rat(ppn, 20);
            for k in 1..=40u64 {
                let (sum, closed) = inner_sum_identity(k, &p, &pp).unwrap();
                assert_eq!(sum, closed, "k={k} p={pn}/20 p'={ppn}/20");
            }
        }
    }

    #[test]
    fn partial_sums_telescope_to_the_peak_term() {
        // sum_{r<=rbar} C(k-1,r) a^r b^(k-1-r) - sum_{r<=rbar-1} (same)
        // collapses to the single r = rbar term, which is the closed form
        // up to the k/(p+p') prefactor.
        let p = rat(3, 20);
        let pp = rat(9, 20);
        let s = p.clone() + pp.clone();
        let alpha = p.clone() / s.clone();
        let beta = pp.clone() / s.clone();
        let lnf = LnFact::up_to(30);
        for k in 1..=30u64 {
            let top = rbar(k, &alpha);
            let partial = |hi: i64| -> BigRational {
                let mut acc = rat(0, 1);
                let mut r = 0i64;
                while r <= hi {
                    acc = acc
                        + BigRational::binomial_coeff(k - 1, r as u64, &lnf)
                            * alpha.pow_u(r as u64)
                            * beta.pow_u(k - 1 - r as u64);
                    r += 1;
                }
                acc
            };
            let difference = partial(top as i64) - partial(top as i64 - 1);
            let peak = BigRational::binomial_coeff(k - 1, top, &lnf)
                * alpha.pow_u(top)
                * beta.pow_u(k - 1 - top);
            assert_eq!(difference, peak, "k={k}");
            assert_eq!(
                rat(k as i64, 1) / s.clone() * peak,
                inner_sum_closed(k, &p, &pp).unwrap(),
                "k={k}"
            );
        }
    }

    #[test]
    fn inner_sum_float_tracks_rational() {
        let p = 0.137f64;
        let pp = 0.261;
        let pr = BigRational::parse("0.137").unwrap();
        let ppr = BigRational::parse("0.261").unwrap();
        for k in 1..=60u64 {
            let (sum_f, closed_f) = inner_sum_identity(k, &p, &pp).unwrap();
            let rel = (sum_f - closed_f).abs() / closed_f.max(1e-300);
            assert!(rel <= 1e-10, "k={k} rel={rel}");
            let exact = inner_sum_closed(k, &pr, &ppr).unwrap().as_f64();
            assert!((closed_f - exact).abs() <= 1e-9 * exact.max(1.0));
        }
    }

    #[test]
    fn single_copy_derivative_is_one() {
        // Moving eps mass changes delta by exactly eps at first order,
        // whatever the anchor masses.
        for (pn, ppn) in [(1i64, 1i64), (3, 1), (2, 5)] {
            let base = rdist(&[pn, ppn, 10 - pn - ppn], 10);
            let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
            assert_eq!(distance_derivative(&fam, 1).unwrap(), rat(1, 1));
            assert_eq!(distance_derivative_direct(&fam, 1).unwrap(), rat(1, 1));
        }
    }

    #[test]
    fn closed_form_matches_direct_sum() {
        let base = rdist(&[3, 2, 5], 10);
        let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
        for n in 1..=25u64 {
            assert_eq!(
                distance_derivative(&fam, n).unwrap(),
                distance_derivative_direct(&fam, n).unwrap(),
                "n={n}"
            );
        }
    }

    #[test]
    fn derivative_matches_forward_difference() {
        let cases = [(0.3, 0.2, 20u64), (0.1, 0.4, 35), (0.25, 0.25, 50)];
        let h = 1e-6;
        for (p, pp, n) in cases {
            let rest = 1.0 - p - pp;
            let base = fdist(&[p, pp, rest]);
            let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
            let d = distance_derivative(&fam, n).unwrap();
            let fd = two_point_distance(&fam, &(p + h), n).unwrap() / h;
            let rel = (d - fd).abs() / d;
            assert!(rel <= 1e-4, "p={p} p'={pp} n={n}: {d} vs fd {fd}");
        }
    }

    #[test]
    fn derivative_stays_below_both_bounds() {
        let cases = [(0.3, 0.2, 20u64), (0.05, 0.6, 80), (0.45, 0.45, 150)];
        for (p, pp, n) in cases {
            let rest = 1.0 - p - pp;
            let base = fdist(&[p, pp, rest]);
            let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
            let d = distance_derivative(&fam, n).unwrap();
            assert!(d <= derivative_bound_first(p, pp, n).unwrap());
            assert!(d <= derivative_bound_second(p, pp, n).unwrap());
        }
    }

    #[test]
    fn decomposition_invariants() {
        let base = rdist(&[3, 2, 5], 10);
        let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
        let dec = derivative_decomposition(&fam, 18).unwrap();
        let mut qsum = rat(0, 1);
        let mut qmean = rat(0, 1);
        for term in &dec.terms {
            assert_eq!(term.inner_sum, term.closed_form, "k={}", term.k);
            assert!(term.gamma >= rat(0, 1) && term.gamma < rat(1, 1));
            assert!(term.qk >= rat(0, 1));
            qsum += term.qk.clone();
            qmean += term.qk.clone() * rat(term.k as i64, 1);
        }
        assert_eq!(qsum, rat(1, 1));
        // Mean block count is n*(p+p').
        assert_eq!(qmean, rat(18, 1) * rat(5, 10));
        assert_eq!(dec.total, distance_derivative(&fam, 18).unwrap());
    }

    #[test]
    fn jensen_averaging_never_beats_mean_value() {
        for (p, pp, n) in [(0.3, 0.2, 1u64), (0.3, 0.2, 40), (0.1, 0.05, 200)] {
            let rest = 1.0 - p - pp;
            let base = fdist(&[p, pp, rest]);
            let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
            let jc = jensen_check(&fam, n).unwrap();
            assert!(jc.lhs_s <= jc.rhs_s * (1.0 + 1e-12));
            assert!(jc.lhs_s_tilde <= jc.rhs_s_tilde * (1.0 + 1e-12));
        }
    }

    #[test]
    fn jensen_is_tight_when_block_carries_all_mass() {
        // p + p' = 1 concentrates q(k) at k = n.
        let fam = TwoPointFamily::new(fdist(&[0.4, 0.6]), "z1", "z2").unwrap();
        let jc = jensen_check(&fam, 12).unwrap();
        assert!((jc.lhs_s - jc.rhs_s).abs() <= 1e-12 * jc.rhs_s);
        assert!((jc.lhs_s_tilde - jc.rhs_s_tilde).abs() <= 1e-12 * jc.rhs_s_tilde);
    }
}
