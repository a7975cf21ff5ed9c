//! Decomposition of an arbitrary pair (P, Q) into a chain of
//! two-point-differing distributions with additive distances.
//!
//! The construction is a greedy monotone transport: repeatedly move the
//! largest feasible amount of mass from the lexicographically smallest
//! surplus label to the lexicographically smallest deficit label. Every
//! coordinate then travels monotonically from P(z) to Q(z), which keeps
//! all intermediate probabilities inside [min(P(z), Q(z)), max(P(z), Q(z))]
//! and makes the step distances add up to delta(P, Q) exactly.

use crate::bounds::{sqrt_bound_first, BoundReport};
use crate::dist::{aligned, diff_profile, variational_distance, Distribution};
use crate::error::{Error, Result};
use crate::exact::{exact_distance_guarded, ProductQuery};
use crate::field::Field;

/// A chain P = C_1, ..., C_m = Q where consecutive members differ at
/// exactly two labels of the difference set.
#[derive(Debug, Clone)]
pub struct ChainDecomposition<F: Field> {
    /// The member distributions, starting at P and ending at Q.
    pub steps: Vec<Distribution<F>>,
    /// Per transition: the label losing mass and the label gaining it.
    pub step_pairs: Vec<(String, String)>,
    /// Per transition: the amount moved, which equals the step distance.
    pub step_distances: Vec<F>,
}

impl<F: Field> ChainDecomposition<F> {
    /// Number of member distributions (1 when P = Q).
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Greedy two-point chain from P to Q.
///
/// P = Q yields a single-member chain with no steps; otherwise the chain
/// has at most |diff set| members since every transfer settles at least
/// one coordinate at its target value.
pub fn two_point_chain<F: Field>(
    p: &Distribution<F>,
    q: &Distribution<F>,
) -> ChainDecomposition<F> {
    let (labels, current_row, target_row) = aligned(p, q);
    let start = Distribution::new(labels.clone(), current_row.clone())
        .expect("aligned rows of valid distributions stay valid");

    let mut current = current_row;
    let mut steps = vec![start];
    let mut step_pairs = Vec::new();
    let mut step_distances = Vec::new();

    loop {
        // Lexicographically smallest surplus and deficit labels. Labels at
        // their target are settled and never touched again.
        let mut surplus: Option<usize> = None;
        let mut deficit: Option<usize> = None;
        for (i, label) in labels.iter().enumerate() {
            if current[i] > target_row[i]
                && surplus.is_none_or(|j| label.as_str() < labels[j].as_str())
            {
                surplus = Some(i);
            }
            if current[i] < target_row[i]
                && deficit.is_none_or(|j| label.as_str() < labels[j].as_str())
            {
                deficit = Some(i);
            }
        }
        let (Some(i_from), Some(i_to)) = (surplus, deficit) else {
            break;
        };
        let excess = current[i_from].clone() - target_row[i_from].clone();
        let shortfall = target_row[i_to].clone() - current[i_to].clone();
        let moved = if excess <= shortfall { excess } else { shortfall };
        current[i_from] = current[i_from].clone() - moved.clone();
        current[i_to] = current[i_to].clone() + moved.clone();

        steps.push(
            Distribution::new(labels.clone(), current.clone())
                .expect("mass transfer preserves validity"),
        );
        step_pairs.push((labels[i_from].clone(), labels[i_to].clone()));
        step_distances.push(moved);
    }

    ChainDecomposition {
        steps,
        step_pairs,
        step_distances,
    }
}

/// The chain-and-triangle assembly of the square-root bound: per-step
/// bounds share the global minimum differing probability, so their sum
/// telescopes to the bound on delta(P, Q) itself.
#[derive(Debug, Clone)]
pub struct ChainAssembly<F: Field> {
    pub chain: ChainDecomposition<F>,
    pub report: BoundReport,
    /// sqrt-form bound for each step at the global pbar.
    pub per_step_bounds: Vec<f64>,
    pub sum_of_step_bounds: f64,
    /// Exact per-step product distances delta(C_i^n, C_{i+1}^n), when an
    /// engine can produce them under `guard`.
    pub product_step_distances: Option<Vec<f64>>,
    /// Exact delta(P^n, Q^n), when available under `guard`.
    pub product_distance: Option<f64>,
}

pub fn chain_bound_assembly<F: Field>(
    p: &Distribution<F>,
    q: &Distribution<F>,
    n: u64,
    guard: u64,
) -> Result<ChainAssembly<F>> {
    let prof = diff_profile(p, q);
    match &prof.min_diff_prob {
        None => return Err(Error::PbarNotPositive),
        Some(pb) if *pb <= F::zero() => return Err(Error::PbarNotPositive),
        Some(_) => {}
    }
    let pbar = prof.min_diff_prob.as_ref().expect("checked above").as_f64();
    let chain = two_point_chain(p, q);

    let per_step_bounds: Vec<f64> = chain
        .step_distances
        .iter()
        .map(|d| sqrt_bound_first(d.as_f64(), pbar, n).expect("pbar checked positive"))
        .collect();
    let sum_of_step_bounds = per_step_bounds.iter().sum();

    let exact = match exact_distance_guarded(&ProductQuery::new(p.clone(), q.clone(), n)?, guard) {
        Ok((d, engine)) => Some((d.as_f64(), engine)),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let product_step_distances = if exact.is_some() {
        let mut dists = Vec::with_capacity(chain.step_distances.len());
        for window in chain.steps.windows(2) {
            let query = ProductQuery::new(window[0].clone(), window[1].clone(), n)?;
            match exact_distance_guarded(&query, guard) {
                Ok((d, _)) => dists.push(d.as_f64()),
                Err(Error::TooLarge { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        (dists.len() == chain.step_distances.len()).then_some(dists)
    } else {
        None
    };

    let report = BoundReport::compute(p, q, n, exact);
    Ok(ChainAssembly {
        chain,
        report,
        per_step_bounds,
        sum_of_step_bounds,
        product_step_distances,
        product_distance: exact.map(|(d, _)| d),
    })
}

impl<F: Field> ChainDecomposition<F> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "steps": self.steps.iter().map(Distribution::to_json).collect::<Vec<_>>(),
            "step_pairs": self
                .step_pairs
                .iter()
                .map(|(a, b)| serde_json::json!({"from": a, "to": b}))
                .collect::<Vec<_>>(),
            "step_distances": self
                .step_distances
                .iter()
                .map(Field::to_json)
                .collect::<Vec<_>>(),
        })
    }
}

/// Check the four chain contract clauses; returns the first violation as
/// an error message. Used by tests and the CLI.
pub fn verify_chain<F: Field>(
    p: &Distribution<F>,
    q: &Distribution<F>,
    chain: &ChainDecomposition<F>,
) -> std::result::Result<(), String> {
    let prof = diff_profile(p, q);
    let (labels, p_row, q_row) = aligned(p, q);

    let first = chain.steps.first().ok_or("empty chain")?;
    let last = chain.steps.last().expect("nonempty");
    if first.probs() != p_row.as_slice() {
        return Err("chain does not start at P".into());
    }
    if last.probs() != q_row.as_slice() {
        return Err("chain does not end at Q".into());
    }

    for (idx, window) in chain.steps.windows(2).enumerate() {
        let a = window[0].probs();
        let b = window[1].probs();
        let moved: Vec<&String> = labels
            .iter()
            .zip(a.iter().zip(b))
            .filter(|(_, (x, y))| x != y)
            .map(|(l, _)| l)
            .collect();
        if moved.len() != 2 {
            return Err(format!("step {idx} changes {} labels", moved.len()));
        }
        if !moved.iter().all(|l| prof.diff_set.contains(l)) {
            return Err(format!("step {idx} moves mass outside the difference set"));
        }
    }

    if let Some(pbar) = &prof.min_diff_prob {
        for (si, step) in chain.steps.iter().enumerate() {
            for label in &prof.diff_set {
                if step.prob_of(label) < *pbar {
                    return Err(format!("member {si} drops {label} below pbar"));
                }
            }
        }
    }

    let total: F = chain
        .step_distances
        .iter()
        .fold(F::zero(), |acc, d| acc + d.clone());
    let delta = variational_distance(p, q);
    if F::EXACT {
        if total != delta {
            return Err(format!("step distances sum to {total}, delta is {delta}"));
        }
    } else if (total.as_f64() - delta.as_f64()).abs() > 1e-12 {
        return Err(format!("step distances sum to {total}, delta is {delta}"));
    }

    for (idx, window) in chain.steps.windows(2).enumerate() {
        let d = variational_distance(&window[0], &window[1]);
        if chain.step_distances[idx] != d && F::EXACT {
            return Err(format!("recorded step distance {idx} is wrong"));
        }
        if d.is_zero() {
            return Err(format!("null step at {idx}"));
        }
    }

    if !prof.diff_set.is_empty() && chain.steps.len() > prof.diff_set.len() {
        return Err(format!(
            "chain has {} members for a difference set of {}",
            chain.steps.len(),
            prof.diff_set.len()
        ));
    }
    Ok(())
}
