//! Desk-scale experiments: growth sweeps with every applicable bound,
//! tightness and best-constant probes for the square-root bound, and the
//! path-integral check that ties the derivative bound back to a distance.
//!
//! All sweeps are deterministic: fixed grids, fixed iteration order, no
//! randomness. CSV rows carry a schema tag so downstream plots can detect
//! column changes.

use serde::Serialize;

use crate::bounds::{derivative_bound_first, linear_bound, sqrt_bound_first, sqrt_bound_second};
use crate::derivative::TwoPointFamily;
use crate::dist::{diff_profile, variational_distance, Distribution};
use crate::error::{Error, Result};
use crate::exact::{exact_distance_guarded, two_point_distance, ProductQuery};
use crate::field::{ulps_up, Field};

/// Exact distances below this threshold count as the "distance still
/// small" regime in which the tightness quotient is tracked.
pub const TIGHTNESS_REGIME_MAX_EXACT: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub schema: &'static str,
    pub n: u64,
    pub exact: f64,
    pub engine: &'static str,
    pub delta_1: f64,
    pub linear: f64,
    pub linear_capped: bool,
    pub sqrt_first: Option<f64>,
    pub sqrt_second: Option<f64>,
    /// exact / (n * delta_1); zero when delta_1 = 0.
    pub ratio_exact_linear: f64,
    pub ratio_exact_sqrt_first: Option<f64>,
    /// Re-assertion that the exact value stayed at or below every
    /// applicable bound (with the bounds rounded up 4 ulps).
    pub bounds_ok: bool,
}

/// Exact distance and every applicable bound for each n up to n_max.
/// Fails if any n in the range exceeds the engine guard.
pub fn growth_sweep<F: Field>(
    p: &Distribution<F>,
    q: &Distribution<F>,
    n_max: u64,
    guard: u64,
) -> Result<Vec<GrowthRow>> {
    let delta_1 = variational_distance(p, q).as_f64();
    let prof = diff_profile(p, q);
    let pbar = prof.min_diff_prob.as_ref().map(Field::as_f64);
    let sqrt_applicable = matches!(pbar, Some(pb) if pb > 0.0);

    let mut rows = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let query = ProductQuery::new(p.clone(), q.clone(), n)?;
        let (exact_f, engine) = exact_distance_guarded(&query, guard)?;
        let exact = exact_f.as_f64();
        let (linear, linear_capped) = linear_bound(delta_1, n);
        let (sqrt_first, sqrt_second) = if sqrt_applicable {
            let pb = pbar.expect("applicable implies present");
            (
                Some(sqrt_bound_first(delta_1, pb, n)?),
                Some(sqrt_bound_second(delta_1, pb, n)?),
            )
        } else {
            (None, None)
        };
        let mut bounds_ok = exact <= ulps_up(linear.min(1.0), 4);
        if let Some(b) = sqrt_first {
            bounds_ok &= exact <= ulps_up(b, 4);
        }
        if let Some(b) = sqrt_second {
            bounds_ok &= exact <= ulps_up(b, 4);
        }
        rows.push(GrowthRow {
            schema: "growth_v1",
            n,
            exact,
            engine: engine.as_str(),
            delta_1,
            linear,
            linear_capped,
            sqrt_first,
            sqrt_second,
            ratio_exact_linear: if delta_1 > 0.0 {
                exact / (n as f64 * delta_1)
            } else {
                0.0
            },
            ratio_exact_sqrt_first: sqrt_first.map(|b| if b > 0.0 { exact / b } else { 0.0 }),
            bounds_ok,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessRow {
    pub schema: &'static str,
    /// The requested minimum probability.
    pub pbar_nominal: f64,
    /// The minimum differing probability the constructed pair actually has.
    pub pbar: f64,
    pub delta_1: f64,
    /// Regime filter recorded with the data: rows with exact below this
    /// value count toward the running maximum.
    pub regime_max_exact: f64,
    pub n: u64,
    pub exact: f64,
    pub bound_first: f64,
    pub quotient: f64,
    pub running_max_quotient: f64,
    pub in_regime: bool,
}

#[derive(Debug, Clone)]
pub struct TightnessProbe {
    pub rows: Vec<TightnessRow>,
    /// Largest in-regime quotient observed.
    pub max_quotient: f64,
}

/// How close the first square-root bound gets to the exact distance for a
/// two-point pair with minimum probability near `pbar` and a small single
/// copy distance, over a geometric grid of n.
///
/// The quotient exact/bound can approach 1 only while the exact distance
/// stays small, so rows are flagged with the regime filter and the running
/// maximum is taken over in-regime rows.
pub fn tightness_probe(pbar: f64, n_max: u64) -> Result<TightnessProbe> {
    if !(0.0 < pbar && pbar <= 0.5) {
        return Err(Error::out_of_range("need 0 < pbar <= 1/2"));
    }
    if n_max == 0 {
        return Err(Error::out_of_range("n_max must be at least 1"));
    }
    let delta_1 = 1e-3;
    let p = Distribution::from_probs(vec![pbar + delta_1, 1.0 - pbar - delta_1])?;
    let q = Distribution::from_probs(vec![pbar, 1.0 - pbar])?;
    let prof = diff_profile(&p, &q);
    let pbar_actual = prof.min_diff_prob.expect("pair differs");
    let fam = TwoPointFamily::new(p, "z1", "z2")?;

    let mut rows = Vec::new();
    let mut running_max = 0.0f64;
    for n in geometric_grid(n_max) {
        let exact = two_point_distance(&fam, &pbar, n)?;
        let bound_first = sqrt_bound_first(delta_1, pbar_actual, n)?;
        let quotient = exact / bound_first;
        let in_regime = exact < TIGHTNESS_REGIME_MAX_EXACT;
        if in_regime && quotient > running_max {
            running_max = quotient;
        }
        rows.push(TightnessRow {
            schema: "tightness_v1",
            pbar_nominal: pbar,
            pbar: pbar_actual,
            delta_1,
            regime_max_exact: TIGHTNESS_REGIME_MAX_EXACT,
            n,
            exact,
            bound_first,
            quotient,
            running_max_quotient: running_max,
            in_regime,
        });
    }
    Ok(TightnessProbe {
        rows,
        max_quotient: running_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantRow {
    pub schema: &'static str,
    pub pbar: f64,
    pub delta_1: f64,
    pub n: u64,
    pub exact: f64,
    /// pbar * (exact/delta_1)^2 / n: the constant c that
    /// sqrt(c*n/pbar)*delta_1 would need to cover this instance.
    pub c_required: f64,
}

#[derive(Debug, Clone)]
pub struct ConstantProbe {
    pub rows: Vec<ConstantRow>,
    pub sup_c: f64,
    /// (pbar, delta_1, n) attaining the supremum.
    pub sup_at: (f64, f64, u64),
}

/// Scan two-point configurations for the largest constant the second
/// square-root bound is forced to use. The supremum over all instances is
/// 1/2; the probe records how close a desk-scale grid gets (n = 1 with
/// pbar near 1/2 already forces c close to 1/2).
pub fn constant_probe(n_max: u64) -> Result<ConstantProbe> {
    if n_max == 0 {
        return Err(Error::out_of_range("n_max must be at least 1"));
    }
    let pbars = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.49];
    let deltas = [0.02, 0.01, 0.001];
    let mut rows = Vec::new();
    let mut sup_c = 0.0f64;
    let mut sup_at = (0.0, 0.0, 0u64);
    for &pbar in &pbars {
        for &delta_1 in &deltas {
            let p = Distribution::from_probs(vec![pbar + delta_1, 1.0 - pbar - delta_1])?;
            let q = Distribution::from_probs(vec![pbar, 1.0 - pbar])?;
            let prof = diff_profile(&p, &q);
            let pbar_actual = prof.min_diff_prob.expect("pair differs");
            let fam = TwoPointFamily::new(p, "z1", "z2")?;
            for n in geometric_grid(n_max) {
                let exact = two_point_distance(&fam, &pbar, n)?;
                let c_required = pbar_actual * (exact / delta_1).powi(2) / n as f64;
                if c_required > sup_c {
                    sup_c = c_required;
                    sup_at = (pbar_actual, delta_1, n);
                }
                rows.push(ConstantRow {
                    schema: "constant_v1",
                    pbar: pbar_actual,
                    delta_1,
                    n,
                    exact,
                    c_required,
                });
            }
        }
    }
    Ok(ConstantProbe { rows, sup_c, sup_at })
}

/// 1, 2, 4, ... up to and including n_max.
fn geometric_grid(n_max: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut n = 1u64;
    while n < n_max {
        grid.push(n);
        n = n.saturating_mul(2);
    }
    grid.push(n_max);
    grid.dedup();
    grid
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathIntegralCheck {
    /// delta(P_b^n, P_a^n) between the endpoint members.
    pub distance: f64,
    /// Upper Riemann sum of the first derivative bound over [a, b].
    pub integral: f64,
    /// (b - a) / sqrt(2*pi) * sqrt(2/pbar) * sqrt(n + 1/pbar) with pbar the
    /// smallest of the four endpoint block masses: the one-shot form the
    /// integral is itself bounded by.
    pub proof_bound: f64,
}

/// Compare the distance between two members of a two-point family against
/// the integral of the derivative bound along the path between them.
///
/// The integrand t -> derivative_bound_first(t, s-t, n) is decreasing up
/// to s/2 and increasing after it, so on every grid cell its supremum sits
/// at a cell endpoint; the upper sum uses max(f(left), f(right)) and only
/// tightens under refinement.
pub fn path_integral_check(
    fam: &TwoPointFamily<f64>,
    t_from: f64,
    t_to: f64,
    n: u64,
    grid: u32,
) -> Result<PathIntegralCheck> {
    if grid < 2 {
        return Err(Error::out_of_range("need at least 2 grid cells"));
    }
    if n == 0 {
        return Err(Error::out_of_range("n must be at least 1"));
    }
    if t_from == t_to {
        return Ok(PathIntegralCheck {
            distance: 0.0,
            integral: 0.0,
            proof_bound: 0.0,
        });
    }
    let s = fam.mass();
    let (a, b) = if t_from < t_to {
        (t_from, t_to)
    } else {
        (t_to, t_from)
    };
    if !(0.0 < a && b < s) {
        return Err(Error::out_of_range(format!(
            "path [{a}, {b}] must stay strictly inside (0, {s})"
        )));
    }

    let rebased = TwoPointFamily::new(fam.at(&a)?, fam.z1(), fam.z2())?;
    let distance = two_point_distance(&rebased, &b, n)?;

    let f = |t: f64| derivative_bound_first(t, s - t, n);
    let width = (b - a) / grid as f64;
    let mut integral = 0.0f64;
    let mut left = f(a)?;
    for i in 1..=grid {
        let x = if i == grid { b } else { a + i as f64 * width };
        let right = f(x)?;
        integral += width * left.max(right);
        left = right;
    }

    let pbar = a.min(s - b);
    let proof_bound = (b - a) / (2.0 * std::f64::consts::PI).sqrt()
        * (2.0 / pbar).sqrt()
        * (n as f64 + 1.0 / pbar).sqrt();

    Ok(PathIntegralCheck {
        distance,
        integral,
        proof_bound,
    })
}

/// Serialize rows as CSV with a header; every sweep row type carries its
/// schema tag in the first column.
pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}
