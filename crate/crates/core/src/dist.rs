//! Finite-support probability distributions, the variational distance,
//! and the difference profile that gates the square-root bounds.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{Field, SUM_TOL};

/// A probability distribution over a finite labeled alphabet.
///
/// Invariants, enforced at construction:
/// - every probability is >= 0;
/// - probabilities sum to 1 (exactly for the rational backend, within
///   [`SUM_TOL`] for the float backend) — never renormalized;
/// - labels are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<F: Field> {
    labels: Vec<String>,
    probs: Vec<F>,
}

/// Where two distributions differ: the difference set and the smallest
/// probability either distribution assigns inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffProfile<F: Field> {
    /// Labels where the probabilities differ, in shared-alphabet order.
    pub diff_set: Vec<String>,
    /// min over the difference set of min(P(z), Q(z)); `None` when the
    /// difference set is empty (the distributions are equal).
    pub min_diff_prob: Option<F>,
}

impl<F: Field> Distribution<F> {
    /// Build a distribution, validating the invariants.
    pub fn new(labels: Vec<String>, probs: Vec<F>) -> Result<Self> {
        let d = Distribution { labels, probs };
        d.validate()?;
        Ok(d)
    }

    /// Build with auto-generated labels `z1`, `z2`, ...
    pub fn from_probs(probs: Vec<F>) -> Result<Self> {
        let labels = (1..=probs.len()).map(|i| format!("z{i}")).collect();
        Self::new(labels, probs)
    }

    /// Re-check the invariants.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.probs.len() {
            return Err(Error::BadInput {
                what: format!(
                    "{} labels for {} probabilities",
                    self.labels.len(),
                    self.probs.len()
                ),
            });
        }
        for (index, p) in self.probs.iter().enumerate() {
            if *p < F::zero() {
                return Err(Error::NegativeProbability {
                    index,
                    value: p.to_string(),
                });
            }
        }
        let sum = self
            .probs
            .iter()
            .fold(F::zero(), |acc, p| acc + p.clone());
        let deviation = (sum.clone() - F::one()).abs();
        let ok = if F::EXACT {
            deviation.is_zero()
        } else {
            deviation.as_f64() <= SUM_TOL
        };
        if !ok {
            return Err(Error::SumNotOne {
                sum: sum.to_string(),
                deviation: deviation.to_string(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for label in &self.labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel {
                    label: label.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability of `label`; zero for labels outside the support.
    pub fn prob_of(&self, label: &str) -> F {
        match self.index_of(label) {
            Some(i) => self.probs[i].clone(),
            None => F::zero(),
        }
    }

    /// Convert to the float backend.
    pub fn to_f64_dist(&self) -> Result<Distribution<f64>> {
        Distribution::new(
            self.labels.clone(),
            self.probs.iter().map(|p| p.as_f64()).collect(),
        )
    }

    /// Parse from JSON: `{"labels": ["a","b"], "probs": [0.5, 0.5]}` or the
    /// shorthand `{"probs": [...]}` with labels auto-generated. Probability
    /// entries may be numbers or strings; the rational backend parses both
    /// exactly (decimal text is not rounded through f64).
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::BadInput {
            what: "expected a JSON object".into(),
        })?;
        let probs_val = obj.get("probs").ok_or_else(|| Error::BadInput {
            what: "missing \"probs\"".into(),
        })?;
        let probs_arr = probs_val.as_array().ok_or_else(|| Error::BadInput {
            what: "\"probs\" must be an array".into(),
        })?;
        let mut probs = Vec::with_capacity(probs_arr.len());
        for v in probs_arr {
            let token = match v {
                Value::Number(n) => n.to_string(),
                Value::String(s) => s.clone(),
                other => {
                    return Err(Error::BadInput {
                        what: format!("probability entry {other} is neither number nor string"),
                    })
                }
            };
            probs.push(F::parse(&token)?);
        }
        match obj.get("labels") {
            Some(Value::Array(ls)) => {
                let labels = ls
                    .iter()
                    .map(|l| {
                        l.as_str().map(str::to_string).ok_or_else(|| Error::BadInput {
                            what: "labels must be strings".into(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if labels.len() != probs.len() {
                    return Err(Error::BadInput {
                        what: format!("{} labels for {} probs", labels.len(), probs.len()),
                    });
                }
                Self::new(labels, probs)
            }
            Some(_) => Err(Error::BadInput {
                what: "\"labels\" must be an array".into(),
            }),
            None => Self::from_probs(probs),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "labels": self.labels,
            "probs": self.probs.iter().map(Field::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Merge two alphabets by label union (first-appearance order, missing
/// labels get probability zero) and return the aligned probability rows.
pub fn aligned<F: Field>(p: &Distribution<F>, q: &Distribution<F>) -> (Vec<String>, Vec<F>, Vec<F>) {
    let mut labels: Vec<String> = p.labels().to_vec();
    for l in q.labels() {
        if !labels.iter().any(|x| x == l) {
            labels.push(l.clone());
        }
    }
    let row = |d: &Distribution<F>| -> Vec<F> {
        labels.iter().map(|l| d.prob_of(l)).collect()
    };
    let (pp, qq) = (row(p), row(q));
    (labels, pp, qq)
}

/// delta(P, Q) = 1/2 sum_z |P(z) - Q(z)|, over the union alphabet.
pub fn variational_distance<F: Field>(p: &Distribution<F>, q: &Distribution<F>) -> F {
    let (_, pp, qq) = aligned(p, q);
    half_l1(&pp, &qq)
}

pub(crate) fn half_l1<F: Field>(pp: &[F], qq: &[F]) -> F {
    let total = pp
        .iter()
        .zip(qq)
        .fold(F::zero(), |acc, (a, b)| acc + (a.clone() - b.clone()).abs());
    total / F::from_u64(2)
}

/// The difference set and its minimum probability. Labels whose float
/// probabilities differ by at most the diff tolerance are treated as equal;
/// the rational backend compares exactly.
pub fn diff_profile<F: Field>(p: &Distribution<F>, q: &Distribution<F>) -> DiffProfile<F> {
    let (labels, pp, qq) = aligned(p, q);
    let mut diff_set = Vec::new();
    let mut min_diff_prob: Option<F> = None;
    for ((label, a), b) in labels.into_iter().zip(pp).zip(qq) {
        if F::diff_eq(&a, &b) {
            continue;
        }
        let m = if a < b { a } else { b };
        min_diff_prob = Some(match min_diff_prob {
            Some(cur) if cur <= m => cur,
            _ => m,
        });
        diff_set.push(label);
    }
    DiffProfile {
        diff_set,
        min_diff_prob,
    }
}

/// Check delta(P, Q) <= delta(P, P') + delta(P', Q). Always true; exposed
/// as a test utility. Float comparison allows 4 ulps of slack so rounding
/// of the right-hand sum cannot produce a spurious violation.
pub fn triangle_check<F: Field>(
    p: &Distribution<F>,
    p_mid: &Distribution<F>,
    q: &Distribution<F>,
) -> bool {
    let lhs = variational_distance(p, q);
    let rhs = variational_distance(p, p_mid) + variational_distance(p_mid, q);
    F::le_with_slack(&lhs, &rhs)
}
