//! Fejér-kernel analysis of rotation averages, diophantine approximation by
//! prime-denominator fractions, random interval-coverage experiments, and the
//! skew-product two-branch dichotomy.

use crate::averages::{weighted_average, AverageReport, AverageRow};
use crate::dynamics::{orbit_observable, DynSystem, Observable, State};
use crate::error::{Error, Result};
use crate::modular::{odd_primes_upto, Prime, PrimeSet};
use crate::rng::{keyed_rng, uniform_below};
use crate::summation::ComplexAccumulator;
use crate::weights::{make_weight, WeightFamily};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

const TAG_COVERAGE: u64 = 0x636f_7665;
const TAG_SKEW: u64 = 0x736b_6577;

/// Distance from θ to the nearest integer.
#[inline]
pub fn circle_distance(theta: f64) -> f64 {
    (theta - theta.round()).abs()
}

/// Fejér kernel: F_p(0) = p, otherwise (1/p)·(sin(πpθ)/sin(πθ))², period 1.
pub fn fejer(p: u64, theta: f64) -> f64 {
    let r = theta - theta.round();
    if r == 0.0 {
        return p as f64;
    }
    let num = (PI * p as f64 * r).sin();
    let den = (PI * r).sin();
    num * num / (den * den * p as f64)
}

/// |sin(πt)/(p·sin(π t/p))| with the removable singularity filled in:
/// the magnitude of (1/p)·Σ_{n<p} e(nδ) at δ = t/p.
#[inline]
fn dirichlet_ratio(p: u64, t: f64) -> f64 {
    let den = (PI * t / p as f64).sin();
    if den == 0.0 {
        return 1.0;
    }
    ((PI * t).sin() / (p as f64 * den)).abs()
}

/// ‖ψ_p‖ for the rotation system with observable e(x): the spectral measure
/// is the single atom at θ, so the norm is √(F_p(θ − a_p/p)/p) — evaluated
/// here in the numerically benign Dirichlet-ratio form.
pub fn rotation_norm_exact(theta: f64, a_p: u64, p: Prime) -> f64 {
    let t = p.value() as f64 * theta - a_p as f64;
    dirichlet_ratio(p.value(), t)
}

/// |(1/p)·Σ_{n<p} e(n(θ − a_p/p))| by direct compensated summation; the O(p)
/// oracle for [`rotation_norm_exact`].
pub fn rotation_norm_direct(theta: f64, a_p: u64, p: Prime) -> f64 {
    let pv = p.value();
    let delta = theta - a_p as f64 / pv as f64;
    let mut acc = ComplexAccumulator::new();
    for n in 0..pv {
        let (s, c) = (2.0 * PI * (n as f64 * delta)).sin_cos();
        acc.add(Complex64::new(c, s));
    }
    acc.value().norm() / pv as f64
}

/// A prime-denominator approximation of θ.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ApproxRecord {
    pub p: u64,
    pub a_p: u64,
    /// |θ − a_p/p| on the circle.
    pub gap: f64,
    /// p·gap.
    pub scaled_gap: f64,
}

impl ApproxRecord {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}\n", self.p, self.a_p, self.gap, self.scaled_gap)
    }

    pub const CSV_HEADER: &'static str = "p,a_p,gap,scaled_gap\n";
}

/// θ given either as a float or as an exact rational (used when the defining
/// inequality sits near its boundary).
#[derive(Clone, Copy, Debug)]
pub enum Theta {
    Float(f64),
    Rational { num: u64, den: u64 },
}

impl Theta {
    pub fn value(&self) -> f64 {
        match self {
            Theta::Float(x) => *x,
            Theta::Rational { num, den } => *num as f64 / *den as f64,
        }
    }

    /// ‖θ·p‖ (distance of θp to the nearest integer), exactly for rationals.
    pub fn scaled_circle_distance(&self, p: u64) -> f64 {
        match self {
            Theta::Float(x) => circle_distance(x * p as f64),
            Theta::Rational { num, den } => {
                let r = ((*num as u128 * p as u128) % *den as u128) as u64;
                let d = r.min(*den - r);
                d as f64 / *den as f64
            }
        }
    }

    /// Nearest integer to θ·p, reduced mod p.
    pub fn nearest_numerator(&self, p: u64) -> u64 {
        match self {
            Theta::Float(x) => {
                let a = (x * p as f64).round() as i64;
                a.rem_euclid(p as i64) as u64
            }
            Theta::Rational { num, den } => {
                let twice = 2u128 * *num as u128 * p as u128 + *den as u128;
                let a = (twice / (2u128 * *den as u128)) as u64;
                a % p
            }
        }
    }
}

/// All primes p ≤ x with min_a |θ − a/p| ≤ p^{−1−δ}, by direct scan.
pub fn approx_search(theta: &Theta, x: u64, delta: f64) -> Result<Vec<ApproxRecord>> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    if x < 3 {
        return Err(Error::InvalidArgument("prime bound must be >= 3".into()));
    }
    let mut out = Vec::new();
    for p in odd_primes_upto(x) {
        let scaled = theta.scaled_circle_distance(p);
        // ||θp|| <= p^{-δ}  <=>  gap <= p^{-1-δ}
        if scaled <= (p as f64).powf(-delta) {
            let a = theta.nearest_numerator(p);
            let gap = scaled / p as f64;
            out.push(ApproxRecord {
                p,
                a_p: a,
                gap,
                scaled_gap: scaled,
            });
        }
    }
    Ok(out)
}

/// Finite-sample diagnostic for the scaled gaps p·|θ − a_p/p|.
#[derive(Clone, Debug, Serialize)]
pub struct EmphaticDiagnostic {
    pub max_scaled_gap: f64,
    /// Cluster centers of the scaled gaps (1-d clustering with gap
    /// threshold 0.1).
    pub clusters: Vec<f64>,
    /// No cluster center within 0.05 of a positive integer.
    pub consistent: bool,
}

/// Clusters the scaled gaps and flags subsequential limits at positive
/// integers, the finite-sample obstruction to the convergence mode where
/// p·|a_p/p − θ| stays bounded away from positive integers.
pub fn emphatic_check(records: &[ApproxRecord]) -> Result<EmphaticDiagnostic> {
    if records.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 records, got {}",
            records.len()
        )));
    }
    let mut gaps: Vec<f64> = records.iter().map(|r| r.scaled_gap).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));
    let max_scaled_gap = *gaps.last().expect("non-empty");
    let mut clusters = Vec::new();
    let mut start = 0usize;
    for i in 1..=gaps.len() {
        if i == gaps.len() || gaps[i] - gaps[i - 1] > 0.1 {
            let c = &gaps[start..i];
            clusters.push(c.iter().sum::<f64>() / c.len() as f64);
            start = i;
        }
    }
    let consistent = !clusters.iter().any(|&c| {
        let m = c.round();
        m >= 1.0 && (c - m).abs() <= 0.05
    });
    Ok(EmphaticDiagnostic {
        max_scaled_gap,
        clusters,
        consistent,
    })
}

/// Result of one random-interval coverage experiment.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageResult {
    pub c: f64,
    pub x: u64,
    pub grid: usize,
    pub seed: u64,
    pub covered_fraction: f64,
    /// Smallest covering prime per grid point (0 = uncovered); kept only for
    /// grids up to 10⁵.
    #[serde(skip_serializing)]
    pub first_hit: Option<Vec<u64>>,
}

impl CoverageResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": crate::SCHEMA,
            "c": self.c,
            "x": self.x,
            "grid": self.grid,
            "seed": self.seed,
            "covered_fraction": self.covered_fraction,
        })
    }
}

/// Draws a_p uniformly in [0,p) per prime p ≤ x (keyed by (seed, p), so the
/// draws are identical across different bounds x) and measures the fraction
/// of grid midpoints θ covered by some interval [a_p/p ± c/p].
pub fn coverage_experiment(c: f64, x: u64, grid: usize, seed: u64) -> Result<CoverageResult> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "interval half-width constant must lie in (0, 1/2), got {c}"
        )));
    }
    if grid < 1000 {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least 10^3 points, got {grid}"
        )));
    }
    let keep_hits = grid <= 100_000;
    let mut first_hit = vec![0u64; grid];
    let mut covered = 0usize;
    let g = grid as f64;
    for p in odd_primes_upto(x) {
        let mut rng = keyed_rng(&[TAG_COVERAGE, seed, p]);
        let a = uniform_below(&mut rng, p);
        let center = a as f64 / p as f64;
        let half = c / p as f64;
        // grid point i sits at (i + 0.5)/G
        let lo = ((center - half) * g - 0.5).ceil() as i64;
        let hi = ((center + half) * g - 0.5).floor() as i64;
        for ii in lo..=hi {
            let idx = ii.rem_euclid(grid as i64) as usize;
            if first_hit[idx] == 0 {
                first_hit[idx] = p;
                covered += 1;
            }
        }
    }
    Ok(CoverageResult {
        c,
        x,
        grid,
        seed,
        covered_fraction: covered as f64 / g,
        first_hit: keep_hits.then_some(first_hit),
    })
}

/// Closed-form skew-product average: for f(x,y) = (x+y, y), φ = e(x), and
/// weight e(−a_p n/p),
/// A_p = e(x)·e((p−1)δ/2)·sin(πpδ)/(p·sin(πδ)) with δ = y − a_p/p.
pub fn skew_kernel(x0: f64, y: f64, a_p: u64, p: Prime) -> Complex64 {
    let pv = p.value();
    let t = pv as f64 * y - a_p as f64; // p·δ
    let mag = dirichlet_ratio_signed(pv, t);
    let phase_arg = x0 + (pv as f64 - 1.0) * t / (2.0 * pv as f64);
    let (s, c) = (2.0 * PI * phase_arg).sin_cos();
    Complex64::new(c, s) * mag
}

/// sin(πt)/(p·sin(πt/p)) with sign, singularities filled with 1.
fn dirichlet_ratio_signed(p: u64, t: f64) -> f64 {
    let den = (PI * t / p as f64).sin();
    if den == 0.0 {
        return 1.0;
    }
    (PI * t).sin() / (p as f64 * den)
}

/// The same average measured through the orbit pipeline: skew orbit from
/// (x₀, y), additive weight with shift −a_p mod p.
pub fn skew_average_direct(x0: f64, y: f64, a_p: u64, p: Prime) -> Result<Complex64> {
    let pv = p.value();
    let shift = (pv - a_p % pv) % pv;
    let w = make_weight(&WeightFamily::Additive { shift }, p)?;
    let orbit = orbit_observable(
        &DynSystem::Skew,
        &State::Pair(x0, y),
        &Observable::ExpXPair,
        p.as_usize(),
    )?;
    weighted_average(&w, &orbit)
}

/// The two branches of the skew-product experiment.
#[derive(Clone, Debug, Serialize)]
pub struct SkewReports {
    /// Primes of the sparse set whose random a_p stays ≥ log p / p away
    /// from y: averages decay like 1/(π log p).
    pub sparse: AverageReport,
    /// Primes whose a_p/p lands within c/p of y: averages stay ≥ 0.9.
    pub coincident: AverageReport,
}

/// Runs the two-branch experiment: a_p drawn uniformly per prime p ≤ x_full
/// (keyed by (seed, p)), branch A over the sparse set where the gap is at
/// least log p / p, branch B over the primes where it is at most c/p.
///
/// Row semantics: `a_p` holds the measured average, `predicted` the
/// closed-form kernel, `deviation` their difference (an agreement check, not
/// a convergence gap).
pub fn skew_counterexample(
    y: f64,
    x0: f64,
    sparse: &PrimeSet,
    x_full: u64,
    c: f64,
    seed: u64,
) -> Result<SkewReports> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "coincidence constant must lie in (0, 1/2), got {c}"
        )));
    }
    let draw = |p: u64| -> u64 {
        let mut rng = keyed_rng(&[TAG_SKEW, seed, p]);
        uniform_below(&mut rng, p)
    };
    let row = |p: Prime, a: u64| -> Result<AverageRow> {
        let direct = skew_average_direct(x0, y, a, p)?;
        let kernel = skew_kernel(x0, y, a, p);
        Ok(AverageRow {
            p: p.value(),
            seed,
            a_p: [direct.re, direct.im],
            alpha_p: [0.0, 0.0],
            predicted: [kernel.re, kernel.im],
            deviation: (direct - kernel).norm(),
        })
    };

    let mut sparse_rows = Vec::new();
    for p in sparse.iter() {
        let a = draw(p.value());
        let gap = circle_distance(y - a as f64 / p.value() as f64);
        if gap >= (p.value() as f64).ln() / p.value() as f64 {
            sparse_rows.push(row(p, a)?);
        }
    }
    let mut coincident_rows = Vec::new();
    for pv in odd_primes_upto(x_full) {
        let a = draw(pv);
        let gap = circle_distance(y - a as f64 / pv as f64);
        if gap <= c / pv as f64 {
            coincident_rows.push(row(Prime::new(pv)?, a)?);
        }
    }

    let mk = |rows: Vec<AverageRow>, tag: &str| AverageReport {
        system: "skew".into(),
        observable: "expx".into(),
        weight: format!("additive-random:{tag}"),
        fit_exponent: None,
        limit_estimate: rows
            .last()
            .map(|r| r.a_p)
            .unwrap_or([0.0, 0.0]),
        rows,
    };
    Ok(SkewReports {
        sparse: mk(sparse_rows, "sparse-branch"),
        coincident: mk(coincident_rows, "coincidence-branch"),
    })
}
