//! The weighted ergodic averaging engine.
//!
//! A_p = (1/p) Σ_{n<p} t_p(n)·φ(fⁿ(x)) — per-prime averages, convergence
//! diagnostics against the ergodic projection, Monte-Carlo maximal-function
//! estimates, and the discrete (transfer-side) maximal function on Z.
//!
//! Experiments parallelize over (p, seed) tasks; results are merged in sorted
//! order so output never depends on the worker count.

use crate::dynamics::{
    ergodic_projection, orbit_observable, sample_gauss_exact, sample_initial, DynSystem,
    Observable, Orbit, State,
};
use crate::error::{Error, Result};
use crate::modular::{Prime, PrimeSet};
use crate::summation::{Accumulator, ComplexAccumulator};
use crate::weights::{weight_stats, Weight, WeightPlan};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// (1/p) Σ_{n<p} w(n)·window[offset+n], reading out-of-range entries as zero.
///
/// This is the single summation kernel shared by every average in the crate;
/// two call sites given the same doubles produce bit-identical results.
pub fn windowed_average(w: &Weight, window: &[Complex64], offset: i64) -> Complex64 {
    let p = w.len() as i64;
    let lo = offset.max(0);
    let hi = (offset + p).min(window.len() as i64);
    let mut acc = ComplexAccumulator::new();
    let vals = w.values();
    let mut j = lo;
    while j < hi {
        acc.add(vals[(j - offset) as usize] * window[j as usize]);
        j += 1;
    }
    acc.value() / w.len() as f64
}

/// (1/p) Σ_{n<p} w(n)·orbit(n). Errors unless the orbit length equals p.
pub fn weighted_average(w: &Weight, orbit: &Orbit) -> Result<Complex64> {
    if orbit.len() != w.len() {
        return Err(Error::LengthMismatch {
            weight: w.len(),
            orbit: orbit.len(),
        });
    }
    Ok(windowed_average(w, &orbit.values, 0))
}

/// One (p, seed) measurement row.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AverageRow {
    pub p: u64,
    pub seed: u64,
    pub a_p: [f64; 2],
    pub alpha_p: [f64; 2],
    pub predicted: [f64; 2],
    pub deviation: f64,
}

impl AverageRow {
    pub fn a_p(&self) -> Complex64 {
        Complex64::new(self.a_p[0], self.a_p[1])
    }

    pub fn predicted(&self) -> Complex64 {
        Complex64::new(self.predicted[0], self.predicted[1])
    }
}

/// Per-prime averages with deviation diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct AverageReport {
    pub system: String,
    pub observable: String,
    pub weight: String,
    pub rows: Vec<AverageRow>,
    /// Least-squares log–log slope of mean deviation vs p over the largest
    /// decade of p; `None` when fewer than two usable points exist.
    pub fit_exponent: Option<f64>,
    /// Mean of A_p over seeds at the largest prime.
    pub limit_estimate: [f64; 2],
}

impl AverageReport {
    /// CSV with the fixed column order
    /// `p,seed,re_a,im_a,re_alpha,im_alpha,deviation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,seed,re_a,im_a,re_alpha,im_alpha,deviation\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.p, r.seed, r.a_p[0], r.a_p[1], r.alpha_p[0], r.alpha_p[1], r.deviation
            ));
        }
        out
    }

    pub fn summary_json(&self, claim: &str) -> serde_json::Value {
        serde_json::json!({
            "schema": crate::SCHEMA,
            "claim": claim,
            "system": self.system,
            "observable": self.observable,
            "weight": self.weight,
            "rows": self.rows.len(),
            "fit_exponent": self.fit_exponent,
            "limit_estimate": { "re": self.limit_estimate[0], "im": self.limit_estimate[1] },
        })
    }

    /// Mean deviation per prime, ordered by p.
    pub fn mean_deviation_by_p(&self) -> Vec<(u64, f64)> {
        mean_deviation_by_p(&self.rows)
    }
}

fn mean_deviation_by_p(rows: &[AverageRow]) -> Vec<(u64, f64)> {
    // rows are kept sorted by (p, seed)
    let mut out: Vec<(u64, f64, usize)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((p, sum, count)) if *p == r.p => {
                *sum += r.deviation;
                *count += 1;
            }
            _ => out.push((r.p, r.deviation, 1)),
        }
    }
    out.into_iter().map(|(p, s, c)| (p, s / c as f64)).collect()
}

/// Log–log slope over the largest decade of p. Points with zero deviation
/// are skipped (log undefined).
pub fn fit_log_slope(points: &[(u64, f64)]) -> Option<f64> {
    let pmax = points.iter().map(|&(p, _)| p).max()?;
    let cut = pmax as f64 / 10.0;
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(p, d)| p as f64 >= cut && d > 0.0)
        .map(|&(p, d)| ((p as f64).ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn initial_state_for_run(system: &DynSystem, seed: u64, max_len: usize) -> State {
    match system {
        DynSystem::GaussMap => {
            sample_gauss_exact(seed, crate::dynamics::exact_bits_for(max_len))
        }
        _ => sample_initial(system, seed),
    }
}

/// Runs A_p over the prime set for each seed, reporting deviations from
/// α_p·π(φ).
///
/// One orbit of length max(P) is generated per seed and every smaller prime
/// reads a prefix, matching the pointwise statement (one x, varying p).
/// Gauss-map runs use exact rational seeds sized for the longest orbit.
pub fn convergence_run(
    system: &DynSystem,
    obs: &Observable,
    plan: &WeightPlan,
    pset: &PrimeSet,
    seeds: &[u64],
) -> Result<AverageReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let max_len = pset.max().as_usize();
    let weights: Vec<(Prime, Weight, Complex64)> = pset
        .primes()
        .par_iter()
        .map(|&p| {
            let w = plan.weight_for(p)?;
            let alpha = weight_stats(&w).mean;
            Ok((p, w, alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    let projection = ergodic_projection(system, obs).unwrap_or(Complex64::new(0.0, 0.0));

    let mut rows: Vec<AverageRow> = seeds
        .par_iter()
        .map(|&seed| {
            let state = initial_state_for_run(system, seed, max_len);
            let orbit = orbit_observable(system, &state, obs, max_len)?;
            let mut out = Vec::with_capacity(weights.len());
            for (p, w, alpha) in &weights {
                let window = Orbit {
                    values: orbit.values[..p.as_usize()].to_vec(),
                };
                let a = weighted_average(w, &window)?;
                let predicted = alpha * projection;
                out.push(AverageRow {
                    p: p.value(),
                    seed,
                    a_p: [a.re, a.im],
                    alpha_p: [alpha.re, alpha.im],
                    predicted: [predicted.re, predicted.im],
                    deviation: (a - predicted).norm(),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|r| (r.p, r.seed));

    let report_rows = rows;
    let fit = fit_log_slope(&mean_deviation_by_p(&report_rows));
    let pmax = pset.max().value();
    let at_max: Vec<&AverageRow> = report_rows.iter().filter(|r| r.p == pmax).collect();
    let mut lim = ComplexAccumulator::new();
    for r in &at_max {
        lim.add(r.a_p());
    }
    let limit = lim.value() / at_max.len().max(1) as f64;

    Ok(AverageReport {
        system: system.name(),
        observable: obs.name(),
        weight: plan.label(),
        rows: report_rows,
        fit_exponent: fit,
        limit_estimate: [limit.re, limit.im],
    })
}

/// Monte-Carlo L² estimate of the maximal function M_P φ = sup_{p∈P} |A_p|.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalReport {
    pub samples: usize,
    pub m_norm: f64,
    pub m_stderr: f64,
    pub phi_norm: f64,
    pub ratio: f64,
    /// ‖M φ‖₂ estimate restricted to the first k primes, k = 1..|P|.
    /// Non-decreasing by construction.
    pub truncation_norms: Vec<f64>,
}

impl MaximalReport {
    pub fn summary_json(&self, claim: &str) -> serde_json::Value {
        serde_json::json!({
            "schema": crate::SCHEMA,
            "claim": claim,
            "samples": self.samples,
            "m_norm": self.m_norm,
            "m_stderr": self.m_stderr,
            "phi_norm": self.phi_norm,
            "ratio": self.ratio,
            "truncation_norms": self.truncation_norms,
        })
    }
}

/// Estimates ‖M_P φ‖₂ / ‖φ‖₂ over invariant-measure samples.
pub fn maximal_estimate(
    system: &DynSystem,
    obs: &Observable,
    plan: &WeightPlan,
    pset: &PrimeSet,
    samples: usize,
    seed_base: u64,
) -> Result<MaximalReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let max_len = pset.max().as_usize();
    let weights: Vec<(Prime, Weight)> = pset
        .primes()
        .par_iter()
        .map(|&p| Ok((p, plan.weight_for(p)?)))
        .collect::<Result<Vec<_>>>()?;

    // per sample: running sup over the prime-set prefix, plus |φ(x)|²
    let per_sample: Vec<(Vec<f64>, f64)> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let state = initial_state_for_run(system, seed_base.wrapping_add(j as u64), max_len);
            let orbit = orbit_observable(system, &state, obs, max_len)?;
            let mut sups = Vec::with_capacity(weights.len());
            let mut sup: f64 = 0.0;
            for (p, w) in &weights {
                let a = windowed_average(w, &orbit.values[..p.as_usize()], 0);
                sup = sup.max(a.norm());
                sups.push(sup);
            }
            let phi0 = orbit.values[0].norm_sqr();
            Ok((sups, phi0))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = samples as f64;
    let mut m2 = Accumulator::new();
    let mut m4 = Accumulator::new();
    let mut phi2 = Accumulator::new();
    for (sups, p0) in &per_sample {
        let m = *sups.last().expect("prime set is non-empty");
        m2.add(m * m);
        m4.add(m * m * m * m);
        phi2.add(*p0);
    }
    let mean_m2 = m2.value() / n;
    let var_m2 = (m4.value() / n - mean_m2 * mean_m2).max(0.0);
    let m_norm = mean_m2.sqrt();
    let m_stderr = if m_norm > 0.0 {
        (var_m2 / n).sqrt() / (2.0 * m_norm)
    } else {
        0.0
    };
    let phi_norm = (phi2.value() / n).sqrt();
    let truncation_norms: Vec<f64> = (0..weights.len())
        .map(|k| {
            let s: f64 = per_sample.iter().map(|(sups, _)| sups[k] * sups[k]).sum();
            (s / n).sqrt()
        })
        .collect();

    Ok(MaximalReport {
        samples,
        m_norm,
        m_stderr,
        phi_norm,
        ratio: if phi_norm > 0.0 { m_norm / phi_norm } else { 0.0 },
        truncation_norms,
    })
}

/// The discrete maximal function of a finitely supported sequence.
#[derive(Clone, Debug)]
pub struct DiscreteMaximal {
    /// Index of `values[0]` on Z.
    pub offset: i64,
    pub values: Vec<f64>,
    /// ‖M̃ϖ‖₂ / ‖ϖ‖₂ in ℓ².
    pub ratio: f64,
}

impl DiscreteMaximal {
    /// M̃ϖ(k); zero outside the computed support.
    pub fn value_at(&self, k: i64) -> f64 {
        let idx = k - self.offset;
        if idx < 0 || idx as usize >= self.values.len() {
            0.0
        } else {
            self.values[idx as usize]
        }
    }
}

/// M̃ϖ(k) = sup_{p∈P} |(1/p) Σ_{n<p} t_p(n)·ϖ(k+n)| on the window where it
/// can be nonzero, with the ℓ² ratio.
pub fn discrete_maximal(
    seq: &[Complex64],
    plan: &WeightPlan,
    pset: &PrimeSet,
) -> Result<DiscreteMaximal> {
    let weights: Vec<Weight> = pset
        .primes()
        .iter()
        .map(|&p| plan.weight_for(p))
        .collect::<Result<Vec<_>>>()?;
    let pmax = pset.max().value() as i64;
    let offset = -(pmax - 1);
    let len = (seq.len() as i64 - offset) as usize;
    let values: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let k = offset + i as i64;
            weights
                .iter()
                .map(|w| windowed_average(w, seq, k).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let mut num = Accumulator::new();
    for v in &values {
        num.add(v * v);
    }
    let mut den = Accumulator::new();
    for v in seq {
        den.add(v.norm_sqr());
    }
    let dv = den.value().sqrt();
    let ratio = if dv > 0.0 { num.value().sqrt() / dv } else { 0.0 };
    Ok(DiscreteMaximal {
        offset,
        values,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::{build_prime_set, PrimeSetRule};
    use crate::weights::{make_weight, WeightFamily};
    use approx::assert_abs_diff_eq;

    fn ones_orbit(n: usize, c: Complex64) -> Orbit {
        Orbit {
            values: vec![c; n],
        }
    }

    #[test]
    fn all_ones_weight_on_constant_orbit() {
        let p = Prime::new(7).unwrap();
        let w = make_weight(&WeightFamily::Additive { shift: 0 }, p).unwrap();
        let c = Complex64::new(0.25, -1.5);
        let a = weighted_average(&w, &ones_orbit(7, c)).unwrap();
        assert!((a - c).norm() < 1e-15);
    }

    #[test]
    fn legendre_weight_on_constant_orbit_vanishes() {
        let p = Prime::new(7).unwrap();
        let w = make_weight(&WeightFamily::Legendre, p).unwrap();
        let a = weighted_average(&w, &ones_orbit(7, Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(a, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let p = Prime::new(7).unwrap();
        let w = make_weight(&WeightFamily::Legendre, p).unwrap();
        assert!(matches!(
            weighted_average(&w, &ones_orbit(6, Complex64::new(1.0, 0.0))),
            Err(Error::LengthMismatch { weight: 7, orbit: 6 })
        ));
    }

    #[test]
    fn linearity_of_the_average() {
        let p = Prime::new(101).unwrap();
        let w1 = make_weight(&WeightFamily::Legendre, p).unwrap();
        let w2 = make_weight(&WeightFamily::Kloosterman, p).unwrap();
        let orbit = Orbit {
            values: (0..101)
                .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
                .collect(),
        };
        let (a, b) = (Complex64::new(1.5, -0.5), Complex64::new(-0.25, 2.0));
        let combo: Vec<Complex64> = w1
            .values()
            .iter()
            .zip(w2.values())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let wc = Weight::custom(p, combo, "combo", 10.0).unwrap();
        let lhs = weighted_average(&wc, &orbit).unwrap();
        let rhs =
            a * weighted_average(&w1, &orbit).unwrap() + b * weighted_average(&w2, &orbit).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn average_bounded_by_sup_norms() {
        let p = Prime::new(103).unwrap();
        let w = make_weight(&WeightFamily::Kloosterman, p).unwrap();
        let orbit = Orbit {
            values: (0..103)
                .map(|k| Complex64::new((k as f64).cos(), (k as f64).sin()) * 0.8)
                .collect(),
        };
        let a = weighted_average(&w, &orbit).unwrap();
        let bound = w.sup_norm() * 0.8;
        assert!(a.norm() <= bound + 1e-12);
    }

    #[test]
    fn discrete_maximal_delta_example() {
        // delta at 0, P = {3}, all-ones weight: M = 1/3 on {-2,-1,0}
        let pset = build_prime_set(&PrimeSetRule::Explicit(vec![3]), 10).unwrap();
        let plan = WeightPlan::Fixed(WeightFamily::Additive { shift: 0 });
        let seq = vec![Complex64::new(1.0, 0.0)];
        let dm = discrete_maximal(&seq, &plan, &pset).unwrap();
        assert_eq!(dm.offset, -2);
        for k in -2..=0i64 {
            assert_abs_diff_eq!(dm.value_at(k), 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(dm.value_at(1), 0.0);
        assert_eq!(dm.value_at(-3), 0.0);
        assert_abs_diff_eq!(dm.ratio, 1.0 / 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn discrete_maximal_zero_sequence() {
        let pset = build_prime_set(&PrimeSetRule::Explicit(vec![3, 5]), 10).unwrap();
        let plan = WeightPlan::Fixed(WeightFamily::Additive { shift: 0 });
        let seq = vec![Complex64::new(0.0, 0.0); 4];
        let dm = discrete_maximal(&seq, &plan, &pset).unwrap();
        assert_eq!(dm.ratio, 0.0);
    }

    #[test]
    fn maximal_sup_is_monotone_in_prime_set() {
        let pset = build_prime_set(&PrimeSetRule::Explicit(vec![3, 5, 7, 11]), 20).unwrap();
        let plan = WeightPlan::Fixed(WeightFamily::Kloosterman);
        let rep = maximal_estimate(
            &DynSystem::Doubling,
            &Observable::ExpX,
            &plan,
            &pset,
            50,
            7,
        )
        .unwrap();
        for w in rep.truncation_norms.windows(2) {
            assert!(w[0] <= w[1] + 1e-15);
        }
    }

    #[test]
    fn maximal_trivial_example() {
        // P = {3}, all-ones weight, constant observable 1: M == 1, ratio 1.
        let pset = build_prime_set(&PrimeSetRule::Explicit(vec![3]), 10).unwrap();
        let plan = WeightPlan::Fixed(WeightFamily::Additive { shift: 0 });
        let seq = crate::dynamics::sequence_shift(vec![1.0; 16]);
        let rep = maximal_estimate(&seq, &Observable::Coordinate, &plan, &pset, 10, 1).unwrap();
        assert_abs_diff_eq!(rep.m_norm, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_slope_recovers_powerlaw() {
        let pts: Vec<(u64, f64)> = [1000u64, 2003, 4001, 8009]
            .iter()
            .map(|&p| (p, 3.0 * (p as f64).powf(-0.5)))
            .collect();
        let s = fit_log_slope(&pts).unwrap();
        assert_abs_diff_eq!(s, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn convergence_run_shapes_and_determinism() {
        let pset = build_prime_set(&PrimeSetRule::Explicit(vec![101, 211, 401]), 500).unwrap();
        let plan = WeightPlan::Fixed(WeightFamily::Kloosterman);
        let sys = DynSystem::Doubling;
        let r1 = convergence_run(&sys, &Observable::ExpX, &plan, &pset, &[0, 1, 2]).unwrap();
        let r2 = convergence_run(&sys, &Observable::ExpX, &plan, &pset, &[0, 1, 2]).unwrap();
        assert_eq!(r1.rows.len(), 9);
        for (a, b) in r1.rows.iter().zip(&r2.rows) {
            assert_eq!(a.a_p, b.a_p);
            assert_eq!((a.p, a.seed), (b.p, b.seed));
        }
        assert!(r1.rows.windows(2).all(|w| (w[0].p, w[0].seed) <= (w[1].p, w[1].seed)));
    }
}
