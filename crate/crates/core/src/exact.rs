//! Exact computation of delta(P^n, Q^n) at three scales: full enumeration
//! of outcome strings (the oracle), aggregation over type classes, and the
//! two-point binomial decomposition for pairs differing at two labels.

use crate::derivative::TwoPointFamily;
use crate::dist::{aligned, diff_profile, half_l1, Distribution};
use crate::error::{Error, Result};
use crate::field::{Field, LnFact};

/// Default ceiling on enumerated outcomes / type classes.
pub const DEFAULT_GUARD: u64 = 10_000_000;

/// A (P, Q, n) query: the distance between the n-fold products of P and Q.
#[derive(Debug, Clone)]
pub struct ProductQuery<F: Field> {
    pub p: Distribution<F>,
    pub q: Distribution<F>,
    pub n: u64,
}

impl<F: Field> ProductQuery<F> {
    pub fn new(p: Distribution<F>, q: Distribution<F>, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::out_of_range("n must be at least 1"));
        }
        Ok(ProductQuery { p, q, n })
    }
}

/// Which engine produced an exact distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    /// P = Q; the distance is zero at every n.
    Equal,
    TwoPoint,
    TypeClass,
    BruteForce,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Equal => "equal",
            EngineKind::TwoPoint => "two_point",
            EngineKind::TypeClass => "type_class",
            EngineKind::BruteForce => "brute_force",
        }
    }
}

/// m^n if it fits in u64.
fn outcome_count(m: u64, n: u64) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(m)?;
    }
    Some(acc)
}

/// Number of weak compositions of n into m parts, C(n+m-1, m-1), if it
/// fits in u64.
pub fn type_class_count(n: u64, m: u64) -> Option<u64> {
    debug_assert!(m >= 1);
    let mut acc: u128 = 1;
    for i in 1..m {
        acc = acc.checked_mul((n + i) as u128)? / i as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Advance `c` to the next weak composition of `total` in lexicographically
/// descending order, starting from (total, 0, ..., 0). Returns false when
/// `c` is already the last composition (0, ..., 0, total).
fn next_composition(c: &mut [u64], total: u64) -> bool {
    let m = c.len();
    if m == 1 || c[m - 1] == total {
        return false;
    }
    let mut i = m - 2;
    while c[i] == 0 {
        i -= 1;
    }
    c[i] -= 1;
    let moved: u64 = c[i + 1..].iter().sum::<u64>() + 1;
    for x in &mut c[i + 1..] {
        *x = 0;
    }
    c[i + 1] = moved;
    true
}

/// delta(P^n, Q^n) by direct enumeration of all |Z|^n outcome strings.
/// This is the oracle the other engines are checked against.
pub fn brute_force_distance<F: Field>(query: &ProductQuery<F>) -> Result<F> {
    brute_force_distance_guarded(query, DEFAULT_GUARD)
}

pub fn brute_force_distance_guarded<F: Field>(query: &ProductQuery<F>, guard: u64) -> Result<F> {
    let (_, pp, qq) = aligned(&query.p, &query.q);
    let m = pp.len() as u64;
    match outcome_count(m, query.n) {
        Some(count) if count <= guard => {}
        Some(count) => return Err(Error::TooLarge { size: count, guard }),
        None => {
            return Err(Error::TooLarge {
                size: u64::MAX,
                guard,
            })
        }
    }
    let mut acc = F::zero();
    enumerate_strings(&pp, &qq, query.n, F::one(), F::one(), &mut acc);
    Ok(acc / F::from_u64(2))
}

fn enumerate_strings<F: Field>(pp: &[F], qq: &[F], depth: u64, wp: F, wq: F, acc: &mut F) {
    if depth == 0 {
        *acc = acc.clone() + (wp - wq).abs();
        return;
    }
    for (a, b) in pp.iter().zip(qq) {
        enumerate_strings(
            pp,
            qq,
            depth - 1,
            wp.clone() * a.clone(),
            wq.clone() * b.clone(),
            acc,
        );
    }
}

/// delta(P^n, Q^n) aggregated over type classes: outcome strings with the
/// same symbol counts have the same probability under a product
/// distribution, so each class contributes
/// |multinomial * prod P^c - multinomial * prod Q^c| once.
///
/// Classes are streamed in lexicographically descending count order;
/// memory stays O(|Z|).
pub fn type_class_distance<F: Field>(query: &ProductQuery<F>) -> Result<F> {
    type_class_distance_guarded(query, DEFAULT_GUARD)
}

pub fn type_class_distance_guarded<F: Field>(query: &ProductQuery<F>, guard: u64) -> Result<F> {
    let (_, pp, qq) = aligned(&query.p, &query.q);
    let m = pp.len() as u64;
    match type_class_count(query.n, m) {
        Some(count) if count <= guard => {}
        Some(count) => return Err(Error::TooLarge { size: count, guard }),
        None => {
            return Err(Error::TooLarge {
                size: u64::MAX,
                guard,
            })
        }
    }
    let lnf = LnFact::up_to(query.n);
    let mut counts = vec![0u64; pp.len()];
    counts[0] = query.n;
    let mut acc = F::zero();
    loop {
        acc = acc + F::class_weight_abs_diff(&pp, &qq, &counts, &lnf);
        if !next_composition(&mut counts, query.n) {
            break;
        }
    }
    Ok(acc / F::from_u64(2))
}

/// One type class: symbol counts plus the total probability each product
/// distribution puts on strings with those counts.
#[derive(Debug, Clone)]
pub struct TypeClass<F: Field> {
    pub counts: Vec<u64>,
    pub weight_p: F,
    pub weight_q: F,
}

/// Streaming iterator over the type classes of a query.
pub struct TypeClasses<F: Field> {
    pp: Vec<F>,
    qq: Vec<F>,
    n: u64,
    lnf: LnFact,
    counts: Vec<u64>,
    done: bool,
}

pub fn type_classes<F: Field>(query: &ProductQuery<F>) -> TypeClasses<F> {
    let (_, pp, qq) = aligned(&query.p, &query.q);
    let mut counts = vec![0u64; pp.len()];
    counts[0] = query.n;
    TypeClasses {
        pp,
        qq,
        n: query.n,
        lnf: LnFact::up_to(query.n),
        counts,
        done: false,
    }
}

impl<F: Field> Iterator for TypeClasses<F> {
    type Item = TypeClass<F>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = TypeClass {
            counts: self.counts.clone(),
            weight_p: F::class_weight(&self.pp, &self.counts, &self.lnf),
            weight_q: F::class_weight(&self.qq, &self.counts, &self.lnf),
        };
        if !next_composition(&mut self.counts, self.n) {
            self.done = true;
        }
        Some(item)
    }
}

/// delta(P_t^n, P_t0^n) for a two-point family, via the double sum over
/// k (trials landing in the moving block {z1, z2}, binomially weighted)
/// and r (trials at z1):
///
///   delta = 1/2 sum_k q(k) sum_r |C(k,r) a0^r b0^(k-r) - C(k,r) a1^r b1^(k-r)|
///
/// where a = t/(p+p') conditions on landing in the block. Runs in O(n^2),
/// or O(n) when the block carries all mass (q concentrates at k = n).
pub fn two_point_distance<F: Field>(fam: &TwoPointFamily<F>, t: &F, n: u64) -> Result<F> {
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    let s = fam.mass();
    if *t < F::zero() || *t > s {
        return Err(Error::out_of_range(format!(
            "t={t} outside the conserved block mass [0, {s}]"
        )));
    }
    let alpha0 = fam.p().clone() / s.clone();
    let alpha1 = t.clone() / s.clone();
    let lnf = LnFact::up_to(n);
    let mut total = F::zero();
    for k in 0..=n {
        let qk = F::binomial_weight(n, k, &s, &lnf);
        if qk.is_zero() {
            continue;
        }
        let mut inner = F::zero();
        for r in 0..=k {
            inner = inner + F::binomial_pmf_abs_diff(k, r, &alpha0, &alpha1, &lnf);
        }
        total = total + qk * inner;
    }
    Ok(total / F::from_u64(2))
}

/// Two-point engine applied to a pair of distributions that differ at no
/// more than two labels.
pub fn two_point_distance_pair<F: Field>(
    p: &Distribution<F>,
    q: &Distribution<F>,
    n: u64,
) -> Result<F> {
    let (fam, t) = TwoPointFamily::from_pair(p, q)?;
    two_point_distance(&fam, &t, n)
}

/// Exact distance with automatic engine selection: the two-point engine
/// when the pair differs at two positive-mass labels, else type-class
/// aggregation under the guard.
pub fn exact_distance<F: Field>(query: &ProductQuery<F>) -> Result<(F, EngineKind)> {
    exact_distance_guarded(query, DEFAULT_GUARD)
}

pub fn exact_distance_guarded<F: Field>(
    query: &ProductQuery<F>,
    guard: u64,
) -> Result<(F, EngineKind)> {
    let prof = diff_profile(&query.p, &query.q);
    if prof.diff_set.is_empty() {
        return Ok((F::zero(), EngineKind::Equal));
    }
    if prof.diff_set.len() <= 2 {
        if let Ok((fam, t)) = TwoPointFamily::from_pair(&query.p, &query.q) {
            let d = two_point_distance(&fam, &t, query.n)?;
            return Ok((d, EngineKind::TwoPoint));
        }
    }
    let (_, pp, _) = aligned(&query.p, &query.q);
    match type_class_count(query.n, pp.len() as u64) {
        Some(count) if count <= guard => {
            let d = type_class_distance_guarded(query, guard)?;
            Ok((d, EngineKind::TypeClass))
        }
        Some(count) => Err(Error::TooLarge { size: count, guard }),
        None => Err(Error::TooLarge {
            size: u64::MAX,
            guard,
        }),
    }
}

/// delta(P, Q) from aligned rows; shared by engines and probes.
pub fn single_copy_distance<F: Field>(p: &Distribution<F>, q: &Distribution<F>) -> F {
    let (_, pp, qq) = aligned(p, q);
    half_l1(&pp, &qq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn fdist(probs: &[f64]) -> Distribution<f64> {
        Distribution::from_probs(probs.to_vec()).unwrap()
    }

    fn rdist(parts: &[i64], den: i64) -> Distribution<BigRational> {
        Distribution::from_probs(parts.iter().map(|&k| rat(k, den)).collect()).unwrap()
    }

    #[test]
    fn brute_force_two_coin_example() {
        let q = ProductQuery::new(fdist(&[0.5, 0.5]), fdist(&[0.4, 0.6]), 2).unwrap();
        let d = brute_force_distance(&q).unwrap();
        assert!((d - 0.11).abs() < 1e-15);

        let q = ProductQuery::new(rdist(&[1, 1], 2), rdist(&[2, 3], 5), 2).unwrap();
        assert_eq!(brute_force_distance(&q).unwrap(), rat(11, 100));
    }

    #[test]
    fn identical_distributions_are_at_distance_zero() {
        let p = rdist(&[3, 5, 2], 10);
        let q = ProductQuery::new(p.clone(), p, 5).unwrap();
        assert!(brute_force_distance(&q).unwrap().is_zero());
        assert!(type_class_distance(&q).unwrap().is_zero());
    }

    #[test]
    fn point_mass_vs_epsilon_has_closed_form() {
        // P puts all mass on z1, so delta = 1 - Q^n(all-z1) = 1 - (1-eps)^n.
        let eps = rat(1, 10);
        let p = rdist(&[1, 0], 1);
        let q = rdist(&[9, 1], 10);
        for n in 1..=10u64 {
            let query = ProductQuery::new(p.clone(), q.clone(), n).unwrap();
            let want = rat(1, 1) - (rat(1, 1) - eps.clone()).pow_u(n);
            assert_eq!(brute_force_distance(&query).unwrap(), want);
            assert_eq!(type_class_distance(&query).unwrap(), want);
        }
    }

    #[test]
    fn type_class_matches_brute_force_exactly() {
        let p = rdist(&[5, 2, 3], 10);
        let q = rdist(&[1, 6, 3], 10);
        for n in 1..=6u64 {
            let query = ProductQuery::new(p.clone(), q.clone(), n).unwrap();
            assert_eq!(
                brute_force_distance(&query).unwrap(),
                type_class_distance(&query).unwrap()
            );
        }
    }

    #[test]
    fn type_class_weights_sum_to_one() {
        let query = ProductQuery::new(rdist(&[5, 2, 3], 10), rdist(&[1, 6, 3], 10), 6).unwrap();
        let mut wp = rat(0, 1);
        let mut wq = rat(0, 1);
        let mut classes = 0u64;
        for tc in type_classes(&query) {
            assert_eq!(tc.counts.iter().sum::<u64>(), 6);
            wp += tc.weight_p;
            wq += tc.weight_q;
            classes += 1;
        }
        assert_eq!(wp, rat(1, 1));
        assert_eq!(wq, rat(1, 1));
        assert_eq!(classes, type_class_count(6, 3).unwrap());
    }

    #[test]
    fn guards_reject_oversized_problems() {
        let query = ProductQuery::new(fdist(&[0.5, 0.5]), fdist(&[0.4, 0.6]), 60).unwrap();
        assert!(matches!(
            brute_force_distance(&query),
            Err(Error::TooLarge { .. })
        ));
        let query = ProductQuery::new(fdist(&[0.5, 0.5]), fdist(&[0.4, 0.6]), 4).unwrap();
        assert!(matches!(
            brute_force_distance_guarded(&query, 10),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn two_point_whole_mass_matches_oracle() {
        let base = fdist(&[0.5, 0.5]);
        let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
        let d = two_point_distance(&fam, &0.4, 2).unwrap();
        assert!((d - 0.11).abs() < 1e-14);
        // t = t0 is the same distribution.
        assert_eq!(two_point_distance(&fam, &0.5, 2).unwrap(), 0.0);
    }

    #[test]
    fn two_point_inside_three_letter_alphabet() {
        let base = fdist(&[0.3, 0.2, 0.5]);
        let fam = TwoPointFamily::new(base, "z1", "z2").unwrap();
        let moved = fdist(&[0.35, 0.15, 0.5]);
        let d = two_point_distance(&fam, &0.35, 20).unwrap();
        let query = ProductQuery::new(fdist(&[0.3, 0.2, 0.5]), moved, 20).unwrap();
        let want = type_class_distance(&query).unwrap();
        assert!((d - want).abs() < 1e-12, "two-point {d} vs type-class {want}");
    }

    #[test]
    fn two_point_rejects_t_outside_block_mass() {
        let fam = TwoPointFamily::new(fdist(&[0.3, 0.2, 0.5]), "z1", "z2").unwrap();
        assert!(two_point_distance(&fam, &0.6, 3).is_err());
    }

    #[test]
    fn pair_that_differs_elsewhere_is_rejected() {
        let p = fdist(&[0.3, 0.2, 0.5]);
        let q = fdist(&[0.2, 0.3, 0.5]);
        assert!(two_point_distance_pair(&p, &q, 3).is_ok());
        let q3 = fdist(&[0.2, 0.2, 0.6]);
        // Differs at z1, z3 with z2 equal: still a two-point pair.
        assert!(two_point_distance_pair(&p, &q3, 3).is_ok());
        let q4 = fdist(&[0.25, 0.25, 0.5]);
        assert!(two_point_distance_pair(&p, &q4, 3).is_ok());
        let q5 = fdist(&[0.2, 0.25, 0.55]);
        assert!(matches!(
            two_point_distance_pair(&p, &q5, 3),
            Err(Error::NotTwoPoint { count: 3 })
        ));
    }

    #[test]
    fn auto_engine_picks_sensibly() {
        let p = rdist(&[1, 1], 2);
        let query = ProductQuery::new(p.clone(), p, 4).unwrap();
        assert_eq!(exact_distance(&query).unwrap().1, EngineKind::Equal);

        let query = ProductQuery::new(rdist(&[1, 1], 2), rdist(&[2, 3], 5), 2).unwrap();
        let (d, engine) = exact_distance(&query).unwrap();
        assert_eq!(engine, EngineKind::TwoPoint);
        assert_eq!(d, rat(11, 100));

        // Zero mass at a differing label disables the two-point engine.
        let query = ProductQuery::new(rdist(&[1, 0], 1), rdist(&[9, 1], 10), 3).unwrap();
        let (d, engine) = exact_distance(&query).unwrap();
        assert_eq!(engine, EngineKind::TypeClass);
        assert_eq!(d, rat(1, 1) - rat(9, 10).pow_u(3));
    }

    #[test]
    fn distance_is_monotone_in_n() {
        // Discarding a coordinate cannot increase the distance.
        let p = rdist(&[5, 2, 3], 10);
        let q = rdist(&[4, 4, 2], 10);
        let mut prev = rat(0, 1);
        for n in 1..=6u64 {
            let query = ProductQuery::new(p.clone(), q.clone(), n).unwrap();
            let d = type_class_distance(&query).unwrap();
            assert!(d >= prev, "distance decreased from {prev} at n={n}");
            prev = d;
        }
    }

    #[test]
    fn permutation_of_labels_leaves_engines_unchanged() {
        let p = rdist(&[5, 2, 3], 10);
        let q = rdist(&[1, 6, 3], 10);
        let perm = |d: &Distribution<BigRational>| {
            Distribution::new(
                vec!["z3".into(), "z1".into(), "z2".into()],
                vec![d.probs()[2].clone(), d.probs()[0].clone(), d.probs()[1].clone()],
            )
            .unwrap()
        };
        let q1 = ProductQuery::new(p.clone(), q.clone(), 4).unwrap();
        let q2 = ProductQuery::new(perm(&p), perm(&q), 4).unwrap();
        assert_eq!(
            brute_force_distance(&q1).unwrap(),
            brute_force_distance(&q2).unwrap()
        );
        assert_eq!(
            type_class_distance(&q1).unwrap(),
            type_class_distance(&q2).unwrap()
        );
    }

    #[test]
    fn composition_stream_counts_and_sums() {
        let mut seen = 0u64;
        let mut counts = vec![0u64; 4];
        counts[0] = 5;
        loop {
            assert_eq!(counts.iter().sum::<u64>(), 5);
            seen += 1;
            if !next_composition(&mut counts, 5) {
                break;
            }
        }
        assert_eq!(seen, type_class_count(5, 4).unwrap());
    }

    fn arb_rat_dist(m: usize, den: u64) -> impl Strategy<Value = Distribution<BigRational>> {
        proptest::collection::vec(0u64..=den, m - 1).prop_map(move |mut cuts| {
            cuts.sort_unstable();
            let mut parts = Vec::with_capacity(m);
            let mut prev = 0;
            for c in cuts {
                parts.push(c - prev);
                prev = c;
            }
            parts.push(den - prev);
            Distribution::from_probs(
                parts
                    .iter()
                    .map(|&k| rat(k as i64, den as i64))
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn engines_agree_exactly_on_small_instances(
            (p, q) in (2usize..=4).prop_flat_map(|m| (arb_rat_dist(m, 24), arb_rat_dist(m, 24))),
            n in 1u64..=8,
        ) {
            let query = ProductQuery::new(p, q, n).unwrap();
            let brute = brute_force_distance(&query).unwrap();
            let tc = type_class_distance(&query).unwrap();
            prop_assert_eq!(&brute, &tc);

            // Where the pair is two-point with positive anchors, the third
            // engine must agree exactly as well.
            if let Ok(two) = two_point_distance_pair(&query.p, &query.q, n) {
                prop_assert_eq!(&two, &brute);
            }

            let pf = query.p.to_f64_dist().unwrap();
            let qf = query.q.to_f64_dist().unwrap();
            let fquery = ProductQuery::new(pf, qf, n).unwrap();
            let bf = brute_force_distance(&fquery).unwrap();
            let tf = type_class_distance(&fquery).unwrap();
            prop_assert!((bf - brute.as_f64()).abs() <= 1e-12);
            prop_assert!((tf - bf).abs() <= 1e-12);
        }
    }

    #[test]
    fn type_class_reduction_is_partition_independent() {
        // Splitting the class stream into arbitrary groups and reducing
        // each group separately must reproduce the sequential rational sum.
        let query = ProductQuery::new(rdist(&[5, 2, 3], 10), rdist(&[1, 6, 3], 10), 7).unwrap();
        let classes: Vec<_> = type_classes(&query).collect();
        let sequential = classes
            .iter()
            .fold(rat(0, 1), |acc, tc| {
                acc + (tc.weight_p.clone() - tc.weight_q.clone()).abs()
            })
            / rat(2, 1);
        for parts in [2usize, 3, 5] {
            let mut partials = vec![rat(0, 1); parts];
            for (i, tc) in classes.iter().enumerate() {
                partials[i % parts] =
                    partials[i % parts].clone() + (tc.weight_p.clone() - tc.weight_q.clone()).abs();
            }
            // Combine in reverse order for good measure.
            let combined = partials.into_iter().rev().fold(rat(0, 1), |a, b| a + b) / rat(2, 1);
            assert_eq!(combined, sequential);
        }
        assert_eq!(sequential, type_class_distance(&query).unwrap());
    }
}
