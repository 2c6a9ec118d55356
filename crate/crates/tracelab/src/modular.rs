//! Exact modular arithmetic, primality, and sparse prime-set construction.
//!
//! Everything here is deterministic: primality is Miller–Rabin with a witness
//! set proven sufficient for all 64-bit integers, inverses come from the
//! extended Euclid algorithm, and Legendre symbols from Euler's criterion.
//! Only odd primes (p ≥ 3) are admitted anywhere in the crate.

use crate::error::{Error, Result};
use crate::summation::Accumulator;
use serde::{Deserialize, Serialize};
use std::fmt;

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for the full 64-bit range.
///
/// The witness set 2..=37 is sufficient for every n < 3.3·10^24, so there is
/// no probabilistic failure mode at machine-word scale.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_after(n: u64) -> u64 {
    let mut c = n + 1;
    if c <= 2 {
        return 2;
    }
    if c % 2 == 0 {
        c += 1;
    }
    while !is_prime(c) {
        c += 2;
    }
    c
}

/// An odd prime (p ≥ 3). Construction validates primality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prime(u64);

impl Prime {
    pub fn new(value: u64) -> Result<Self> {
        if value >= 3 && value % 2 == 1 && is_prime(value) {
            Ok(Prime(value))
        } else {
            Err(Error::NotOddPrime(value))
        }
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn as_usize(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An element of Z/pZ, kept reduced to `[0, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Residue {
    value: u64,
    modulus: Prime,
}

impl Residue {
    pub fn new(value: u64, modulus: Prime) -> Self {
        Residue {
            value: value % modulus.value(),
            modulus,
        }
    }

    pub fn from_i64(value: i64, modulus: Prime) -> Self {
        let p = modulus.value() as i64;
        Residue {
            value: value.rem_euclid(p) as u64,
            modulus,
        }
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> Prime {
        self.modulus
    }
}

/// Inverse modulo p by extended Euclid. Rejects the zero residue.
pub fn mod_inverse(a: Residue) -> Result<Residue> {
    let p = a.modulus().value();
    if a.value() == 0 {
        return Err(Error::NotInvertible(0, p));
    }
    let inv = inverse_u64(a.value(), p);
    Ok(Residue::new(inv, a.modulus()))
}

fn inverse_u64(a: u64, p: u64) -> u64 {
    let (mut old_r, mut r) = (a as i128, p as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1);
    old_s.rem_euclid(p as i128) as u64
}

/// Simultaneous inversion of many residues with one extended Euclid call
/// (Montgomery's trick: prefix products, a single inverse, backward sweep).
pub fn batch_inverse(values: &[u64], p: Prime) -> Result<Vec<u64>> {
    let m = p.value();
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = 1u64;
    for &v in values {
        let v = v % m;
        if v == 0 {
            return Err(Error::NotInvertible(0, m));
        }
        prefix.push(acc);
        acc = mul_mod(acc, v, m);
    }
    let mut inv_acc = inverse_u64(acc, m);
    let mut out = vec![0u64; values.len()];
    for i in (0..values.len()).rev() {
        let v = values[i] % m;
        out[i] = mul_mod(inv_acc, prefix[i], m);
        inv_acc = mul_mod(inv_acc, v, m);
    }
    Ok(out)
}

/// Legendre symbol (n/p) via Euler's criterion.
pub fn legendre_symbol(n: i64, p: Prime) -> i32 {
    let r = n.rem_euclid(p.value() as i64) as u64;
    if r == 0 {
        return 0;
    }
    let e = pow_mod(r, (p.value() - 1) / 2, p.value());
    if e == 1 {
        1
    } else {
        -1
    }
}

/// Legendre symbol table for all residues, built by marking squares.
pub fn legendre_table(p: Prime) -> Vec<i8> {
    let m = p.value();
    let mut t = vec![-1i8; m as usize];
    t[0] = 0;
    for x in 1..=(m - 1) / 2 {
        t[mul_mod(x, x, m) as usize] = 1;
    }
    t
}

/// Odd primes up to and including `x`, by sieve.
pub fn odd_primes_upto(x: u64) -> Vec<u64> {
    if x < 3 {
        return Vec::new();
    }
    let n = x as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2usize;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (3..=n).step_by(2).filter(|&i| sieve[i]).map(|i| i as u64).collect()
}

/// How the members of a [`PrimeSet`] are generated.
#[derive(Clone, Debug, PartialEq)]
pub enum PrimeSetRule {
    /// Every odd prime up to the bound. Not sparse.
    AllBelow,
    /// Next prime at or above each term of the geometric grid 3·r^k.
    Geometric { ratio: f64 },
    /// Next prime strictly after each power of two (2 itself is skipped).
    PowersOfTwo,
    /// An explicit list of odd primes.
    Explicit(Vec<u64>),
}

/// Ordered set of odd primes with its partial sparseness sum
/// s(P) = Σ (log p)²/p.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimeSet {
    primes: Vec<Prime>,
    sparseness_partial: f64,
    sparse_rule: bool,
}

impl PrimeSet {
    pub fn from_primes(primes: Vec<Prime>, sparse_rule: bool) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::EmptyPrimeSet(0));
        }
        if primes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "prime set must be strictly increasing".into(),
            ));
        }
        let mut s = Accumulator::new();
        for q in &primes {
            let lp = (q.value() as f64).ln();
            s.add(lp * lp / q.value() as f64);
        }
        Ok(PrimeSet {
            primes,
            sparseness_partial: s.value(),
            sparse_rule,
        })
    }

    pub fn primes(&self) -> &[Prime] {
        &self.primes
    }

    pub fn iter(&self) -> impl Iterator<Item = Prime> + '_ {
        self.primes.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn max(&self) -> Prime {
        *self.primes.last().expect("prime set is never empty")
    }

    pub fn sparseness_partial(&self) -> f64 {
        self.sparseness_partial
    }

    /// Whether the generating rule keeps s(P) finite as the bound grows.
    pub fn sparse_rule(&self) -> bool {
        self.sparse_rule
    }

    /// Members with value at least `lo`.
    pub fn truncate_below(&self, lo: u64) -> Vec<Prime> {
        self.primes.iter().copied().filter(|q| q.value() >= lo).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "primes": self.primes.iter().map(|q| q.value()).collect::<Vec<_>>(),
            "sparseness_partial": self.sparseness_partial,
            "sparse_rule": self.sparse_rule,
        })
    }
}

/// Builds the prime set for a growth rule, bounded by `x`.
pub fn build_prime_set(rule: &PrimeSetRule, x: u64) -> Result<PrimeSet> {
    let raw: Vec<u64> = match rule {
        PrimeSetRule::AllBelow => odd_primes_upto(x),
        PrimeSetRule::Geometric { ratio } => {
            if !(*ratio > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "geometric ratio must exceed 1, got {ratio}"
                )));
            }
            let mut out = Vec::new();
            let mut target = 3.0f64;
            loop {
                if target > x as f64 {
                    break;
                }
                let q = next_prime_after(target.ceil() as u64 - 1);
                if q > x {
                    break;
                }
                if q >= 3 && out.last().map_or(true, |&last| q > last) {
                    out.push(q);
                }
                target *= ratio;
            }
            out
        }
        PrimeSetRule::PowersOfTwo => {
            let mut out = Vec::new();
            let mut pow = 1u64;
            loop {
                let q = next_prime_after(pow);
                if q <= x && q >= 3 && out.last().map_or(true, |&last| q > last) {
                    out.push(q);
                }
                if pow > x {
                    break;
                }
                pow = pow.saturating_mul(2);
            }
            out
        }
        PrimeSetRule::Explicit(list) => {
            let mut v: Vec<u64> = list.iter().copied().filter(|&q| q <= x).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    if raw.is_empty() {
        return Err(Error::EmptyPrimeSet(x));
    }
    let primes = raw.into_iter().map(Prime::new).collect::<Result<Vec<_>>>()?;
    let sparse_rule = !matches!(rule, PrimeSetRule::AllBelow);
    PrimeSet::from_primes(primes, sparse_rule)
}

/// Parses the prime-set grammar
/// `all:<X>` | `geometric:<ratio>:<X>` | `pow2:<X>` | `list:p1,p2,...`.
pub fn parse_prime_set(s: &str) -> Result<PrimeSet> {
    let bad = |msg: &str| Error::InvalidArgument(format!("prime spec '{s}': {msg}"));
    let parse_bound = |x: &str| -> Result<u64> {
        let v: f64 = x.parse().map_err(|_| bad("bad bound"))?;
        if !(v >= 3.0 && v.is_finite()) {
            return Err(bad("bound must be >= 3"));
        }
        Ok(v as u64)
    };
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
    match kind {
        "all" => build_prime_set(&PrimeSetRule::AllBelow, parse_bound(rest)?),
        "pow2" => build_prime_set(&PrimeSetRule::PowersOfTwo, parse_bound(rest)?),
        "geometric" => {
            let (r, x) = rest.split_once(':').ok_or_else(|| bad("need ratio:bound"))?;
            let ratio: f64 = r.parse().map_err(|_| bad("bad ratio"))?;
            build_prime_set(&PrimeSetRule::Geometric { ratio }, parse_bound(x)?)
        }
        "list" => {
            let primes: Vec<u64> = rest
                .split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| bad("bad list entry")))
                .collect::<Result<_>>()?;
            let max = primes.iter().copied().max().ok_or_else(|| bad("empty list"))?;
            build_prime_set(&PrimeSetRule::Explicit(primes), max)
        }
        _ => Err(bad("unknown rule")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_examples() {
        assert!(is_prime(7));
        assert!(!is_prime(1));
        // 561 = 3·11·17 (Carmichael); trial-division oracle agrees.
        assert!(!is_prime(561));
        assert_eq!(561u64 % 3, 0);
    }

    #[test]
    fn primality_matches_trial_division_oracle() {
        let trial = |n: u64| -> bool {
            if n < 2 {
                return false;
            }
            let mut d = 2;
            while d * d <= n {
                if n % d == 0 {
                    return false;
                }
                d += 1;
            }
            true
        };
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), trial(n), "n={n}");
        }
        // Known 64-bit primes and strong-pseudoprime traps.
        assert!(is_prime((1u64 << 61) - 1));
        assert!(!is_prime(3215031751)); // pseudoprime to bases 2,3,5,7
    }

    #[test]
    fn inverse_examples() {
        let p7 = Prime::new(7).unwrap();
        let p5 = Prime::new(5).unwrap();
        assert_eq!(mod_inverse(Residue::new(1, p7)).unwrap().value(), 1);
        assert_eq!(mod_inverse(Residue::new(3, p7)).unwrap().value(), 5);
        assert_eq!(mod_inverse(Residue::new(2, p5)).unwrap().value(), 3);
        assert!(mod_inverse(Residue::new(0, p7)).is_err());
    }

    #[test]
    fn inverse_is_involutive() {
        for &pv in &[3u64, 7, 101, 104729] {
            let p = Prime::new(pv).unwrap();
            for a in 1..pv.min(200) {
                let r = Residue::new(a, p);
                let inv = mod_inverse(r).unwrap();
                assert_eq!(mul_mod(a, inv.value(), pv), 1);
                assert_eq!(mod_inverse(inv).unwrap().value(), a);
            }
        }
    }

    #[test]
    fn batch_inverse_matches_single() {
        let p = Prime::new(1009).unwrap();
        let vals: Vec<u64> = (1..1009).collect();
        let inv = batch_inverse(&vals, p).unwrap();
        for (&v, &i) in vals.iter().zip(&inv) {
            assert_eq!(mul_mod(v, i, 1009), 1);
        }
        assert!(batch_inverse(&[5, 0, 3], p).is_err());
    }

    #[test]
    fn legendre_examples() {
        let p7 = Prime::new(7).unwrap();
        assert_eq!(legendre_symbol(0, p7), 0);
        assert_eq!(legendre_symbol(2, p7), 1); // squares mod 7 are {1,2,4}
        assert_eq!(legendre_symbol(3, p7), -1);
        assert_eq!(legendre_symbol(-5, p7), legendre_symbol(2, p7));
    }

    #[test]
    fn legendre_matches_square_enumeration() {
        for &pv in &[3u64, 7, 11, 101, 997] {
            let p = Prime::new(pv).unwrap();
            let table = legendre_table(p);
            for n in 0..pv {
                assert_eq!(legendre_symbol(n as i64, p) as i8, table[n as usize]);
            }
        }
    }

    #[test]
    fn prime_set_powers_of_two() {
        let ps = build_prime_set(&PrimeSetRule::PowersOfTwo, 600).unwrap();
        let vals: Vec<u64> = ps.iter().map(|q| q.value()).collect();
        assert_eq!(vals, vec![3, 5, 11, 17, 37, 67, 131, 257, 521]);
    }

    #[test]
    fn prime_set_all_below() {
        let ps = build_prime_set(&PrimeSetRule::AllBelow, 5).unwrap();
        let vals: Vec<u64> = ps.iter().map(|q| q.value()).collect();
        assert_eq!(vals, vec![3, 5]);
        assert!(!ps.sparse_rule());
    }

    #[test]
    fn prime_set_explicit_sparseness() {
        let ps = build_prime_set(&PrimeSetRule::Explicit(vec![3, 5, 7]), 10).unwrap();
        let expected = [3f64, 5.0, 7.0]
            .iter()
            .map(|&q| q.ln().powi(2) / q)
            .sum::<f64>();
        assert!((ps.sparseness_partial() - expected).abs() <= 1e-12 * expected);
        assert!((ps.sparseness_partial() - 1.4613).abs() < 1e-3);
    }

    #[test]
    fn prime_set_empty_is_error() {
        assert!(matches!(
            build_prime_set(&PrimeSetRule::AllBelow, 2),
            Err(Error::EmptyPrimeSet(_))
        ));
    }

    #[test]
    fn sparseness_monotone_in_bound() {
        let mut last = 0.0;
        for x in [10u64, 100, 1000, 10000] {
            let ps = build_prime_set(&PrimeSetRule::Geometric { ratio: 1.5 }, x).unwrap();
            assert!(ps.sparseness_partial() >= last);
            last = ps.sparseness_partial();
            assert!(ps.primes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn odd_prime_constructor_rejects() {
        assert!(Prime::new(2).is_err());
        assert!(Prime::new(9).is_err());
        assert!(Prime::new(0).is_err());
        assert!(Prime::new(3).is_ok());
    }

    #[test]
    fn prime_spec_grammar() {
        let ps = parse_prime_set("all:20").unwrap();
        assert_eq!(
            ps.iter().map(|q| q.value()).collect::<Vec<_>>(),
            vec![3, 5, 7, 11, 13, 17, 19]
        );
        let ps = parse_prime_set("pow2:600").unwrap();
        assert_eq!(ps.max().value(), 521);
        let ps = parse_prime_set("geometric:1.5:1e5").unwrap();
        assert!(ps.sparse_rule());
        assert!(ps.max().value() <= 100_000);
        let ps = parse_prime_set("list:7,3,5").unwrap();
        assert_eq!(ps.iter().map(|q| q.value()).collect::<Vec<_>>(), vec![3, 5, 7]);
        for bad in ["nope:5", "all", "all:x", "geometric:2", "list:4", "all:2"] {
            assert!(parse_prime_set(bad).is_err(), "{bad}");
        }
    }
}
