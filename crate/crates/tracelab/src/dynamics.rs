//! The dynamical systems (X, μ, f) and observables φ whose orbits feed the
//! weighted averages.
//!
//! State representations are chosen so that long orbits stay faithful:
//!
//! * Gauss map — exact arbitrary-precision rationals by default (the float
//!   iteration loses every digit after ~50 steps); a double-precision mode
//!   exists for short runs by passing a `State::Unit` seed.
//! * doubling map — a sliding 53-bit window over a keyed random bit stream
//!   (the float iteration 2x mod 1 shifts the seed's mantissa out and
//!   collapses to 0, so it is only usable for a few dozen steps).
//! * rotation and skew — closed-form n-th iterate, no error accumulation.
//! * cat map — float pair iteration mod 1; rounding acts as pseudo-orbit
//!   noise for the hyperbolic automorphism ((2,1),(1,1)).

use crate::error::{Error, Result};
use crate::modular::{legendre_table, Prime, PrimeSet};
use crate::rng::{keyed_rng, uniform_open01};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

const TAG_GAUSS: u64 = 0x6761_7573;
const TAG_TORUS: u64 = 0x746f_7275;
const TAG_BITS: u64 = 0x6269_7473;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyClass {
    Zero,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixingClass {
    WeaklyMixing,
    ErgodicNotWeaklyMixing,
    NonErgodic,
}

#[derive(Clone, Debug)]
pub enum DynSystem {
    /// x ↦ 1/x − ⌊1/x⌋ on (0,1) with measure dx/((1+x)·log 2).
    GaussMap,
    /// x ↦ x + θ mod 1.
    Rotation { theta: f64 },
    /// x ↦ 2x mod 1.
    Doubling,
    /// (x,y) ↦ (2x+y, x+y) mod 1.
    CatMap,
    /// (x,y) ↦ (x+y, y) mod 1, so fⁿ(x,y) = (x+ny, y).
    Skew,
    /// Shift on an externally supplied bounded sequence.
    SequenceShift { values: Arc<Vec<f64>> },
}

impl DynSystem {
    pub fn entropy_class(&self) -> EntropyClass {
        match self {
            DynSystem::Rotation { .. } | DynSystem::Skew => EntropyClass::Zero,
            DynSystem::GaussMap
            | DynSystem::Doubling
            | DynSystem::CatMap
            | DynSystem::SequenceShift { .. } => EntropyClass::Positive,
        }
    }

    pub fn mixing_class(&self) -> MixingClass {
        match self {
            DynSystem::GaussMap | DynSystem::Doubling | DynSystem::CatMap => {
                MixingClass::WeaklyMixing
            }
            DynSystem::Rotation { .. } => MixingClass::ErgodicNotWeaklyMixing,
            DynSystem::Skew | DynSystem::SequenceShift { .. } => MixingClass::NonErgodic,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DynSystem::GaussMap => "gauss".into(),
            DynSystem::Rotation { theta } => format!("rotation:{theta}"),
            DynSystem::Doubling => "doubling".into(),
            DynSystem::CatMap => "cat".into(),
            DynSystem::Skew => "skew".into(),
            DynSystem::SequenceShift { .. } => "sequence".into(),
        }
    }

    /// One step of the scalar systems (float mode).
    pub fn step_scalar(&self, x: f64) -> Option<f64> {
        match self {
            DynSystem::GaussMap => {
                if x <= 0.0 {
                    None
                } else {
                    Some((1.0 / x).fract())
                }
            }
            DynSystem::Rotation { theta } => Some((x + theta).rem_euclid(1.0)),
            DynSystem::Doubling => Some((2.0 * x).fract()),
            _ => None,
        }
    }

    /// One step of the torus-pair systems.
    pub fn step_pair(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        match self {
            DynSystem::CatMap => Some(((2.0 * x + y).fract(), (x + y).fract())),
            DynSystem::Skew => Some(((x + y).fract(), y)),
            _ => None,
        }
    }
}

/// A point of the state space, in the representation the system iterates.
#[derive(Clone, Debug)]
pub enum State {
    Unit(f64),
    Pair(f64, f64),
    /// Exact rational num/den in (0,1) for Gauss-map orbits.
    Rational { num: BigUint, den: BigUint },
    /// Position `offset` in the bit stream keyed by `seed` (doubling map).
    BitStream { seed: u64, offset: usize },
    /// Position in an external sequence (sequence shift).
    Offset(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// 1 if the leading continued-fraction digit equals `digit` (Gauss map).
    PqIndicator { digit: u64 },
    /// φ(x) = e(x) on a scalar state.
    ExpX,
    /// φ(x,y) = e(x) on a pair state.
    ExpXPair,
    /// Reads the current sequence value (sequence shift).
    Coordinate,
}

impl Observable {
    pub fn bound(&self) -> f64 {
        1.0
    }

    pub fn name(&self) -> String {
        match self {
            Observable::PqIndicator { digit } => format!("pq{digit}"),
            Observable::ExpX => "expx".into(),
            Observable::ExpXPair => "expx".into(),
            Observable::Coordinate => "coordinate".into(),
        }
    }
}

/// The sequence φ(fⁿ(x₀)), n = 0..N−1.
#[derive(Clone, Debug)]
pub struct Orbit {
    pub values: Vec<Complex64>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im\n");
        for (n, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{},{}\n", v.re, v.im));
        }
        out
    }
}

#[inline]
fn e(x: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    Complex64::new(c, s)
}

/// Inverse CDF of the Gauss measure: u ↦ 2^u − 1.
pub fn gauss_inverse_cdf(u: f64) -> f64 {
    u.exp2() - 1.0
}

/// Draws an initial state from the system's invariant measure.
pub fn sample_initial(system: &DynSystem, seed: u64) -> State {
    match system {
        DynSystem::GaussMap => {
            let mut rng = keyed_rng(&[TAG_GAUSS, seed]);
            State::Unit(gauss_inverse_cdf(uniform_open01(&mut rng)))
        }
        DynSystem::Rotation { .. } => {
            let mut rng = keyed_rng(&[TAG_TORUS, seed]);
            State::Unit(rng.gen::<f64>())
        }
        DynSystem::Doubling => State::BitStream { seed, offset: 0 },
        DynSystem::CatMap | DynSystem::Skew => {
            let mut rng = keyed_rng(&[TAG_TORUS, seed]);
            State::Pair(rng.gen::<f64>(), rng.gen::<f64>())
        }
        DynSystem::SequenceShift { .. } => State::Offset(0),
    }
}

/// Exact rational Gauss-map seed of the given bit length, distributed per the
/// invariant measure: the top 53 bits come from the float inverse CDF, the
/// remaining bits are uniform.
pub fn sample_gauss_exact(seed: u64, bits: usize) -> State {
    let bits = bits.max(64);
    let mut rng = keyed_rng(&[TAG_GAUSS, seed]);
    let x = gauss_inverse_cdf(uniform_open01(&mut rng));
    let top = (x * (1u64 << 53) as f64).floor() as u64;
    let mut num = BigUint::from(top.max(1));
    num <<= bits - 53;
    let mut fill = BigUint::default();
    let mut remaining = bits - 53;
    while remaining > 0 {
        let take = remaining.min(64);
        let word = rng.gen::<u64>() >> (64 - take);
        fill = (fill << take) | BigUint::from(word);
        remaining -= take;
    }
    num |= fill;
    State::Rational {
        num,
        den: BigUint::from(1u8) << bits,
    }
}

/// Recommended seed bit length for an exact orbit of length `n`
/// (≈1.72 bits are consumed per step; 3n is a safe margin).
pub fn exact_bits_for(n: usize) -> usize {
    3 * n + 128
}

fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    let db = den.bits();
    if db <= 64 {
        let n: u64 = num.try_into().unwrap_or(u64::MAX);
        let d: u64 = den.try_into().unwrap_or(u64::MAX);
        return n as f64 / d as f64;
    }
    let shift = db - 64;
    let n64: u64 = (num >> shift).try_into().unwrap_or(u64::MAX);
    let d64: u64 = (den >> shift).try_into().unwrap_or(u64::MAX);
    n64 as f64 / d64 as f64
}

/// Advances a state by `steps` applications of the map.
pub fn advance(system: &DynSystem, state: &State, steps: usize) -> Result<State> {
    match (system, state) {
        (DynSystem::Doubling, State::BitStream { seed, offset }) => Ok(State::BitStream {
            seed: *seed,
            offset: offset + steps,
        }),
        (DynSystem::SequenceShift { .. }, State::Offset(j)) => Ok(State::Offset(j + steps)),
        (DynSystem::Rotation { theta }, State::Unit(x)) => {
            Ok(State::Unit((x + steps as f64 * theta).rem_euclid(1.0)))
        }
        (DynSystem::Skew, State::Pair(x, y)) => {
            Ok(State::Pair((x + steps as f64 * y).rem_euclid(1.0), *y))
        }
        (DynSystem::CatMap, State::Pair(x, y)) => {
            let (mut a, mut b) = (*x, *y);
            for _ in 0..steps {
                (a, b) = system.step_pair(a, b).expect("cat map is a pair system");
            }
            Ok(State::Pair(a, b))
        }
        (DynSystem::GaussMap, State::Unit(x)) => {
            let mut v = *x;
            for k in 0..steps {
                v = system.step_scalar(v).ok_or(Error::PrecisionExhausted {
                    steps: k,
                    requested: steps,
                })?;
            }
            Ok(State::Unit(v))
        }
        (DynSystem::GaussMap, State::Rational { num, den }) => {
            let (mut n, mut d) = (num.clone(), den.clone());
            for k in 0..steps {
                if n == BigUint::default() {
                    return Err(Error::PrecisionExhausted {
                        steps: k,
                        requested: steps,
                    });
                }
                let r = &d % &n;
                d = std::mem::replace(&mut n, r);
            }
            Ok(State::Rational { num: n, den: d })
        }
        (DynSystem::Doubling, State::Unit(x)) => {
            let mut v = *x;
            for _ in 0..steps {
                v = system.step_scalar(v).expect("doubling is scalar");
            }
            Ok(State::Unit(v))
        }
        _ => Err(Error::InvalidArgument(format!(
            "state does not match system {}",
            system.name()
        ))),
    }
}

/// values[n] = φ(fⁿ(x₀)) for n = 0..N−1.
pub fn orbit_observable(
    system: &DynSystem,
    x0: &State,
    obs: &Observable,
    n: usize,
) -> Result<Orbit> {
    if n == 0 {
        return Err(Error::InvalidArgument("orbit length must be >= 1".into()));
    }
    let bad_obs = || {
        Error::InvalidArgument(format!(
            "observable {} does not apply to system {}",
            obs.name(),
            system.name()
        ))
    };
    let values = match (system, x0) {
        (DynSystem::GaussMap, State::Unit(x)) => {
            let mut v = *x;
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                if v <= 0.0 || v >= 1.0 {
                    return Err(Error::PrecisionExhausted {
                        steps: k,
                        requested: n,
                    });
                }
                match obs {
                    Observable::PqIndicator { digit } => {
                        let a = (1.0 / v).floor() as u64;
                        out.push(Complex64::new((a == *digit) as u64 as f64, 0.0));
                    }
                    Observable::ExpX => out.push(e(v)),
                    _ => return Err(bad_obs()),
                }
                v = (1.0 / v).fract();
            }
            out
        }
        (DynSystem::GaussMap, State::Rational { num, den }) => {
            let (mut nn, mut dd) = (num.clone(), den.clone());
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                if nn == BigUint::default() {
                    return Err(Error::PrecisionExhausted {
                        steps: k,
                        requested: n,
                    });
                }
                match obs {
                    Observable::PqIndicator { digit } => {
                        let (q, r) = dd.div_rem(&nn);
                        let hit = u64::try_from(&q).map_or(false, |qv| qv == *digit);
                        out.push(Complex64::new(hit as u64 as f64, 0.0));
                        dd = std::mem::replace(&mut nn, r);
                    }
                    Observable::ExpX => {
                        out.push(e(ratio_to_f64(&nn, &dd)));
                        let r = &dd % &nn;
                        dd = std::mem::replace(&mut nn, r);
                    }
                    _ => return Err(bad_obs()),
                }
            }
            out
        }
        (DynSystem::Rotation { theta }, State::Unit(x0)) => match obs {
            Observable::ExpX => (0..n)
                .map(|k| e((x0 + k as f64 * theta).rem_euclid(1.0)))
                .collect(),
            _ => return Err(bad_obs()),
        },
        (DynSystem::Doubling, State::BitStream { seed, offset }) => {
            if *obs != Observable::ExpX {
                return Err(bad_obs());
            }
            doubling_window_values(*seed, *offset, n)
        }
        (DynSystem::Doubling, State::Unit(x)) => match obs {
            Observable::ExpX => {
                let mut v = *x;
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(e(v));
                    v = (2.0 * v).fract();
                }
                out
            }
            _ => return Err(bad_obs()),
        },
        (DynSystem::CatMap, State::Pair(x, y)) => match obs {
            Observable::ExpXPair => {
                let (mut a, mut b) = (*x, *y);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(e(a));
                    (a, b) = ((2.0 * a + b).fract(), (a + b).fract());
                }
                out
            }
            _ => return Err(bad_obs()),
        },
        (DynSystem::Skew, State::Pair(x, y)) => match obs {
            Observable::ExpXPair => (0..n)
                .map(|k| e((x + k as f64 * y).rem_euclid(1.0)))
                .collect(),
            _ => return Err(bad_obs()),
        },
        (DynSystem::SequenceShift { values }, State::Offset(j)) => match obs {
            Observable::Coordinate => {
                if j + n > values.len() {
                    return Err(Error::InvalidArgument(format!(
                        "sequence of length {} cannot serve window [{j}, {})",
                        values.len(),
                        j + n
                    )));
                }
                values[*j..j + n]
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect()
            }
            _ => return Err(bad_obs()),
        },
        _ => {
            return Err(Error::InvalidArgument(format!(
                "state does not match system {}",
                system.name()
            )))
        }
    };
    Ok(Orbit { values })
}

/// e(x_n) where x_n is the 53-bit window at position `offset + n` of the
/// keyed bit stream. The window is carried as an integer, so each value is an
/// exact dyadic rational and shifted windows agree bit for bit.
fn doubling_window_values(seed: u64, offset: usize, n: usize) -> Vec<Complex64> {
    let total_bits = offset + n + 53;
    let words = (total_bits + 63) / 64 + 1;
    let mut rng = keyed_rng(&[TAG_BITS, seed]);
    let stream: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    let bit = |j: usize| -> u64 { (stream[j / 64] >> (j % 64)) & 1 };
    let mut window: u64 = 0;
    for i in 0..53 {
        window = (window << 1) | bit(offset + i);
    }
    let mask = (1u64 << 53) - 1;
    let scale = 1.0 / (1u64 << 53) as f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(e(window as f64 * scale));
        window = ((window << 1) & mask) | bit(offset + 53 + k);
    }
    out
}

/// First `n` continued-fraction digits of num/den ∈ (0,1) by the integer
/// Euclid recursion. Errors if the expansion terminates early.
pub fn partial_quotients(num: &BigUint, den: &BigUint, n: usize) -> Result<Vec<u64>> {
    if num == &BigUint::default() || num >= den {
        return Err(Error::InvalidArgument(
            "partial quotients need 0 < num/den < 1".into(),
        ));
    }
    let (mut nn, mut dd) = (num.clone(), den.clone());
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if nn == BigUint::default() {
            return Err(Error::PrecisionExhausted {
                steps: k,
                requested: n,
            });
        }
        let (q, r) = dd.div_rem(&nn);
        let qv = u64::try_from(&q).map_err(|_| {
            Error::InvalidArgument("partial quotient exceeds 64 bits".into())
        })?;
        out.push(qv);
        dd = std::mem::replace(&mut nn, r);
    }
    Ok(out)
}

/// Invariant-measure density of the continued-fraction digit k:
/// log₂((k+1)²/(k(k+2))).
pub fn gauss_kuzmin_digit_density(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    ((kf + 1.0) * (kf + 1.0) / (kf * (kf + 2.0))).ln() / std::f64::consts::LN_2
}

/// The 0/1 sequence whose value at n, for n in the block `[p_k, p_{k+1})`,
/// indicates whether n is a quadratic residue modulo the block's governing
/// prime p_{k+1} (the block below the first prime is governed by that prime).
/// Length equals the largest prime of the set.
pub fn adversarial_sequence(pset: &PrimeSet) -> Vec<f64> {
    let len = pset.max().as_usize();
    let mut out = vec![0.0f64; len];
    let mut start = 0usize;
    for q in pset.iter() {
        let table = legendre_table(q);
        let end = q.as_usize().min(len);
        for (n, slot) in out.iter_mut().enumerate().take(end).skip(start) {
            *slot = (table[n] == 1) as u64 as f64;
        }
        start = end;
        if start >= len {
            break;
        }
    }
    out
}

/// The constant the ergodic averages project onto: ∫φ dμ where a closed form
/// is known, `None` otherwise.
pub fn ergodic_projection(system: &DynSystem, obs: &Observable) -> Option<Complex64> {
    match (system, obs) {
        (DynSystem::GaussMap, Observable::PqIndicator { digit }) => {
            Some(Complex64::new(gauss_kuzmin_digit_density(*digit), 0.0))
        }
        (DynSystem::Rotation { .. }, Observable::ExpX)
        | (DynSystem::Doubling, Observable::ExpX)
        | (DynSystem::CatMap, Observable::ExpXPair)
        | (DynSystem::Skew, Observable::ExpXPair) => Some(Complex64::new(0.0, 0.0)),
        _ => None,
    }
}

/// Builds a sequence-shift system over the given values.
pub fn sequence_shift(values: Vec<f64>) -> DynSystem {
    DynSystem::SequenceShift {
        values: Arc::new(values),
    }
}

/// Prime used to govern a block of the adversarial sequence containing n.
pub fn adversarial_block_prime(pset: &PrimeSet, n: u64) -> Option<Prime> {
    pset.iter().find(|q| n < q.value())
}

impl std::str::FromStr for DynSystem {
    type Err = Error;

    /// `gauss` | `rotation:<theta>` | `doubling` | `cat` | `skew`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss" => Ok(DynSystem::GaussMap),
            "doubling" => Ok(DynSystem::Doubling),
            "cat" => Ok(DynSystem::CatMap),
            "skew" => Ok(DynSystem::Skew),
            _ => match s.split_once(':') {
                Some(("rotation", t)) => Ok(DynSystem::Rotation {
                    theta: t.parse().map_err(|_| {
                        Error::InvalidArgument(format!("system '{s}': bad angle"))
                    })?,
                }),
                _ => Err(Error::InvalidArgument(format!("unknown system '{s}'"))),
            },
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    /// `pq<digit>` | `expx` | `coordinate`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(d) = s.strip_prefix("pq") {
            return Ok(Observable::PqIndicator {
                digit: d.parse().map_err(|_| {
                    Error::InvalidArgument(format!("observable '{s}': bad digit"))
                })?,
            });
        }
        match s {
            "expx" => Ok(Observable::ExpX),
            "coordinate" => Ok(Observable::Coordinate),
            _ => Err(Error::InvalidArgument(format!("unknown observable '{s}'"))),
        }
    }
}

/// The observable form e(x) appropriate to the system's state shape.
pub fn exp_observable_for(system: &DynSystem) -> Observable {
    match system {
        DynSystem::CatMap | DynSystem::Skew => Observable::ExpXPair,
        _ => Observable::ExpX,
    }
}
