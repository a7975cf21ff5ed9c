//! Seeded random fixtures shared by the test suites. Not part of the
//! supported API.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::dist::Distribution;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Random composition of `den` into `m` nonnegative parts, uniform over
/// compositions.
pub fn random_parts<R: Rng>(rng: &mut R, m: usize, den: u64) -> Vec<u64> {
    let mut cuts: Vec<u64> = (0..m - 1).map(|_| rng.random_range(0..=den)).collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(m);
    let mut prev = 0;
    for c in cuts {
        parts.push(c - prev);
        prev = c;
    }
    parts.push(den - prev);
    parts
}

/// Random rational distribution on m labels with denominator `den`.
pub fn random_rational_dist<R: Rng>(rng: &mut R, m: usize, den: u64) -> Distribution<BigRational> {
    let parts = random_parts(rng, m, den);
    Distribution::from_probs(
        parts
            .iter()
            .map(|&k| rat(k as i64, den as i64))
            .collect(),
    )
    .unwrap()
}

/// Random pair differing at exactly two labels, both with positive mass in
/// both distributions.
pub fn random_two_point_pair<R: Rng>(
    rng: &mut R,
    m: usize,
    den: u64,
) -> (Distribution<BigRational>, Distribution<BigRational>) {
    loop {
        let base = random_rational_dist(rng, m, den);
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m);
        while j == i {
            j = rng.random_range(0..m);
        }
        let pi = base.probs()[i].clone();
        let pj = base.probs()[j].clone();
        let zero = rat(0, 1);
        if pi <= zero || pj <= zero {
            continue;
        }
        // Move between 1 and pj*den - 1 grains from j to i so both stay positive.
        let pj_grains = (pj.clone() * rat(den as i64, 1)).to_integer();
        let max_move: u64 = pj_grains.try_into().unwrap();
        if max_move < 2 {
            continue;
        }
        let moved = rng.random_range(1..max_move);
        let mut probs = base.probs().to_vec();
        probs[i] = pi + rat(moved as i64, den as i64);
        probs[j] = pj - rat(moved as i64, den as i64);
        let q = Distribution::new(base.labels().to_vec(), probs).unwrap();
        return (base, q);
    }
}

pub fn to_float(d: &Distribution<BigRational>) -> Distribution<f64> {
    d.to_f64_dist().unwrap()
}
