//! The fast invariant suite: a handful of checks that exercise the transform
//! kernel, the Kloosterman tables, the Fejér identities, and the
//! orbit/discrete transfer relation in well under a minute.
//!
//! Each check reports its margin (distance to the failure threshold, positive
//! when passing) so regressions show up as shrinking margins before they
//! become failures.

use crate::averages::{discrete_maximal, windowed_average};
use crate::dynamics::{orbit_observable, DynSystem, Observable, State};
use crate::modular::{build_prime_set, odd_primes_upto, Prime, PrimeSetRule};
use crate::spectral::{fejer, rotation_norm_direct, rotation_norm_exact};
use crate::summation::Accumulator;
use crate::weights::{
    fourier_transform, kloosterman_batch_raw, kloosterman_direct_table, make_weight, Weight,
    WeightFamily, WeightPlan,
};
use rand::Rng;

/// Outcome of one invariant check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// Distance to the failure threshold; positive means passing.
    pub margin: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, margin: f64, detail: String) -> Self {
        Check {
            name,
            pass: margin >= 0.0,
            margin,
            detail,
        }
    }
}

/// |Kl₂(n;p)| ≤ 2 with real values, for every n and every odd p ≤ max_p.
pub fn check_weil_bound(max_p: u64) -> Check {
    let mut worst_norm: f64 = 0.0;
    let mut worst_im: f64 = 0.0;
    for pv in odd_primes_upto(max_p) {
        let p = Prime::new(pv).expect("sieve yields odd primes");
        let raw = kloosterman_batch_raw(p).expect("within budget");
        for (n, v) in raw.iter().enumerate() {
            if n != 0 {
                worst_norm = worst_norm.max(v.re.abs());
            }
            worst_im = worst_im.max(v.im.abs());
        }
    }
    let margin = (2.0 - worst_norm).min(1e-10 - worst_im);
    Check::new(
        "weil-bound",
        margin,
        format!("max |Kl| = {worst_norm:.12}, max imag = {worst_im:.3e}, p <= {max_p}"),
    )
}

/// Plancherel for a given weight/transform pair: relative defect of
/// Σ|ŵ|² = Σ|w|² within 1e−9.
pub fn check_plancherel_pair(w: &Weight, ft: &Weight) -> Check {
    let energy = |x: &Weight| {
        let mut acc = Accumulator::new();
        for v in x.values() {
            acc.add(v.norm_sqr());
        }
        acc.value()
    };
    let (ew, ef) = (energy(w), energy(ft));
    let rel = (ew - ef).abs() / ew.max(f64::MIN_POSITIVE);
    Check::new(
        "plancherel",
        1e-9 - rel,
        format!(
            "p = {}, family = {}, relative energy defect = {rel:.3e}",
            w.p(),
            w.family()
        ),
    )
}

/// Plancherel and double-transform reflection across families at p ∈ {101, 1009}.
pub fn check_plancherel() -> Check {
    let mut worst = Check::new("plancherel", f64::INFINITY, "no case ran".into());
    for pv in [101u64, 1009] {
        let p = Prime::new(pv).unwrap();
        for fam in [
            WeightFamily::Legendre,
            WeightFamily::Kloosterman,
            WeightFamily::Additive { shift: 3 },
            WeightFamily::QrIndicator,
        ] {
            let w = make_weight(&fam, p).expect("families are valid at these p");
            let ft = fourier_transform(&w).expect("within budget");
            let c = check_plancherel_pair(&w, &ft);
            if c.margin < worst.margin {
                worst = c;
            }
            // double transform reflects: FT²(w)(n) = w(-n)
            let ft2 = fourier_transform(&ft).expect("within budget");
            let mut defect: f64 = 0.0;
            for n in 0..pv {
                let refl = w.value((pv - n) % pv);
                defect = defect.max((ft2.value(n) - refl).norm());
            }
            let c2 = Check::new(
                "plancherel",
                1e-9 - defect,
                format!("p = {pv}, family = {fam}, double-transform defect = {defect:.3e}"),
            );
            if c2.margin < worst.margin {
                worst = c2;
            }
        }
    }
    worst
}

/// Batch Kloosterman equals the direct defining sum at p = 101.
pub fn check_batch_vs_direct() -> Check {
    let p = Prime::new(101).unwrap();
    let batch = kloosterman_batch_raw(p).expect("within budget");
    let direct = kloosterman_direct_table(p).expect("small oracle");
    let worst = batch
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    Check::new(
        "kloosterman-batch-vs-direct",
        1e-9 - worst,
        format!("p = 101, max |batch - direct| = {worst:.3e}"),
    )
}

/// Fejér kernel identities: peak p at 0, zeros at j/p, unit mass, evenness.
pub fn check_fejer() -> Check {
    let p = 101u64;
    let mut fail = 0.0f64;
    let peak = (fejer(p, 0.0) - p as f64).abs();
    fail = fail.max(peak);
    for j in 1..p {
        fail = fail.max(fejer(p, j as f64 / p as f64).abs());
    }
    let n = 100_000usize;
    let h = 1.0 / n as f64;
    let mut s = fejer(p, 0.0) + fejer(p, 1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * fejer(p, i as f64 * h);
    }
    let mass_defect = (s * h / 3.0 - 1.0).abs();
    let mut rng = crate::rng::keyed_rng(&[0xfe5e]);
    let mut sym = 0.0f64;
    for _ in 0..100 {
        let t: f64 = rng.gen::<f64>() - 0.5;
        sym = sym.max((fejer(p, t) - fejer(p, -t)).abs());
    }
    fail = fail.max(mass_defect).max(sym);
    Check::new(
        "fejer-identities",
        1e-6 - fail,
        format!("p = 101, worst identity defect = {fail:.3e}"),
    )
}

/// The orbit-side and sequence-side maximal functions agree bitwise on the
/// doubling map over a window Q = 4P.
pub fn check_transfer() -> Check {
    let pset = build_prime_set(&PrimeSetRule::PowersOfTwo, 61).expect("non-empty");
    let plan = WeightPlan::Fixed(WeightFamily::Kloosterman);
    let p_bound = pset.max().as_usize();
    let q_len = 4 * p_bound;
    let sys = DynSystem::Doubling;
    let x0 = State::BitStream { seed: 17, offset: 0 };
    let orbit = orbit_observable(&sys, &x0, &Observable::ExpX, q_len).expect("orbit");
    let weights: Vec<Weight> = pset
        .iter()
        .map(|p| plan.weight_for(p).expect("weight"))
        .collect();
    let dm = discrete_maximal(&orbit.values, &plan, &pset).expect("maximal");
    let mut mismatches = 0u64;
    for k in 0..(q_len - p_bound) {
        // orbit side: regenerate from the advanced state
        let xk = crate::dynamics::advance(&sys, &x0, k).expect("advance");
        let mut sup: f64 = 0.0;
        for w in &weights {
            let tail = orbit_observable(&sys, &xk, &Observable::ExpX, w.len()).expect("tail");
            sup = sup.max(windowed_average(w, &tail.values, 0).norm());
        }
        if sup.to_bits() != dm.value_at(k as i64).to_bits() {
            mismatches += 1;
        }
    }
    Check::new(
        "transfer-relation",
        -(mismatches as f64),
        format!(
            "doubling map, Q = {q_len}, P <= {p_bound}: {mismatches} bitwise mismatches"
        ),
    )
}

/// Rotation-norm closed form vs the direct average on random instances.
pub fn check_rotation_norm() -> Check {
    let mut rng = crate::rng::keyed_rng(&[0x0707]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pv = [101u64, 211, 1009, 2003][rng.gen_range(0..4)];
        let p = Prime::new(pv).unwrap();
        let theta: f64 = rng.gen();
        let a = rng.gen_range(0..pv);
        worst = worst.max((rotation_norm_exact(theta, a, p) - rotation_norm_direct(theta, a, p)).abs());
    }
    Check::new(
        "rotation-norm",
        1e-10 - worst,
        format!("100 random instances, worst |closed form - direct| = {worst:.3e}"),
    )
}

/// The whole fast suite, in a fixed order.
pub fn run_all() -> Vec<Check> {
    vec![
        check_weil_bound(500),
        check_plancherel(),
        check_batch_vs_direct(),
        check_fejer(),
        check_transfer(),
        check_rotation_norm(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn suite_passes_quickly() {
        let start = std::time::Instant::now();
        let checks = run_all();
        let elapsed = start.elapsed();
        for c in &checks {
            assert!(c.pass, "{} failed: {}", c.name, c.detail);
        }
        assert!(
            elapsed.as_secs() < 60,
            "selftest took {elapsed:?}, budget is 60 s"
        );
    }

    #[test]
    fn corrupted_transform_fails_plancherel() {
        let p = Prime::new(101).unwrap();
        let w = make_weight(&WeightFamily::Kloosterman, p).unwrap();
        let mut ft = fourier_transform(&w).unwrap();
        // fault injection: damage one spectral value
        let vals = {
            let mut v = ft.values().to_vec();
            v[17] += Complex64::new(0.5, 0.0);
            v
        };
        ft = Weight::custom(p, vals, "corrupted", 1e6).unwrap();
        let check = check_plancherel_pair(&w, &ft);
        assert!(!check.pass);
        assert_eq!(check.name, "plancherel");
    }
}
