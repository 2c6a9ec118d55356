//! Weight families over F_p as explicit complex vectors.
//!
//! A [`Weight`] is a length-p table of the values of one weight family:
//! the Legendre symbol, the quadratic-residue indicator (1+(n/p))/2, additive
//! characters e(an/p), polynomial phases e(q(n)/p), multiplicative characters
//! (Kummer), characters of polynomial values, Kloosterman sums Kl₂(n;p), and
//! the normalized Fourier transform of any of these.
//!
//! Value conventions at n = 0: legendre(0) = 0, qr_indicator(0) = 1/2,
//! mult_char(0) = 0, and kloosterman(0) = −1/√p as the defining sum gives.
//!
//! The batch Kloosterman path evaluates the full table as the length-p DFT of
//! m ↦ e(m̄/p) (zero at m = 0), so a p-point table costs O(p log p) instead of
//! O(p²); `kloosterman_direct` keeps the O(p) defining sum as the oracle.

use crate::error::{Error, Result};
use crate::fft::PrimeFft;
use crate::modular::{batch_inverse, legendre_table, mul_mod, pow_mod, Prime};
use crate::summation::{Accumulator, ComplexAccumulator};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// e(num/den) with `num` already reduced into [0, den).
#[inline]
fn unit_phase(num: u64, den: u64) -> Complex64 {
    let (s, c) = (2.0 * PI * num as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

/// The weight families the laboratory knows how to construct.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightFamily {
    /// n ↦ (n/p), zero at n ≡ 0.
    Legendre,
    /// n ↦ (1 + (n/p))/2, the quadratic-residue indicator (1/2 at n ≡ 0).
    QrIndicator,
    /// n ↦ e(an/p).
    Additive { shift: u64 },
    /// n ↦ e(q(n)/p) for an integer polynomial q of degree ≥ 1
    /// (coefficients lowest-order first).
    PolyPhase { coeffs: Vec<i64> },
    /// n ↦ χ(n) for the character of order dividing `order` defined by
    /// χ(g^t) = e(power·t/order) on the least primitive root g; χ(0) = 0.
    MultChar { order: u64, power: u64 },
    /// n ↦ χ(f(n)) with χ as above and f an integer polynomial of degree ≥ 1.
    CharOfPoly {
        order: u64,
        power: u64,
        coeffs: Vec<i64>,
    },
    /// n ↦ Kl₂(n;p) = (1/√p) Σ_{x≠0} e((nx + x̄)/p). Real-valued.
    Kloosterman,
    /// The normalized Fourier transform of another family.
    FourierOf(Box<WeightFamily>),
    /// Explicitly supplied values (see [`Weight::custom`]).
    Custom { label: String },
}

impl WeightFamily {
    /// Declared complexity bound: a label standing in for the bounded
    /// complexity of the family, not a computed invariant. `None` when the
    /// bound is only known after construction.
    pub fn conductor_proxy(&self) -> Option<f64> {
        match self {
            WeightFamily::Legendre
            | WeightFamily::QrIndicator
            | WeightFamily::Additive { .. }
            | WeightFamily::MultChar { .. } => Some(1.0),
            WeightFamily::PolyPhase { coeffs } | WeightFamily::CharOfPoly { coeffs, .. } => {
                Some(poly_degree(coeffs).unwrap_or(0) as f64 + 1.0)
            }
            WeightFamily::Kloosterman => Some(2.0),
            WeightFamily::FourierOf(_) | WeightFamily::Custom { .. } => None,
        }
    }
}

fn poly_degree(coeffs: &[i64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0)
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFamily::Legendre => write!(f, "legendre"),
            WeightFamily::QrIndicator => write!(f, "qr"),
            WeightFamily::Additive { shift } => write!(f, "additive:{shift}"),
            WeightFamily::PolyPhase { coeffs } => {
                write!(f, "poly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            WeightFamily::MultChar { order, power } => write!(f, "mult:{order}:{power}"),
            WeightFamily::CharOfPoly {
                order,
                power,
                coeffs,
            } => {
                write!(f, "charpoly:{order}:{power}:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            WeightFamily::Kloosterman => write!(f, "kloosterman"),
            WeightFamily::FourierOf(inner) => write!(f, "fourier:{inner}"),
            WeightFamily::Custom { label } => write!(f, "custom:{label}"),
        }
    }
}

impl FromStr for WeightFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidFamily(format!("{s}: {msg}"));
        let parse_coeffs = |cs: &str| -> Result<Vec<i64>> {
            cs.split(',')
                .map(|c| c.trim().parse::<i64>().map_err(|_| bad("bad coefficient")))
                .collect()
        };
        match s.split_once(':') {
            None => match s {
                "legendre" => Ok(WeightFamily::Legendre),
                "qr" | "qr_indicator" => Ok(WeightFamily::QrIndicator),
                "kloosterman" => Ok(WeightFamily::Kloosterman),
                _ => Err(bad("unknown family")),
            },
            Some(("additive", a)) => Ok(WeightFamily::Additive {
                shift: a.parse().map_err(|_| bad("bad shift"))?,
            }),
            Some(("poly", cs)) => Ok(WeightFamily::PolyPhase {
                coeffs: parse_coeffs(cs)?,
            }),
            Some(("mult", rest)) => {
                let (d, j) = rest.split_once(':').ok_or_else(|| bad("need order:power"))?;
                Ok(WeightFamily::MultChar {
                    order: d.parse().map_err(|_| bad("bad order"))?,
                    power: j.parse().map_err(|_| bad("bad power"))?,
                })
            }
            Some(("charpoly", rest)) => {
                let mut it = rest.splitn(3, ':');
                let d = it.next().ok_or_else(|| bad("need order"))?;
                let j = it.next().ok_or_else(|| bad("need power"))?;
                let cs = it.next().ok_or_else(|| bad("need coefficients"))?;
                Ok(WeightFamily::CharOfPoly {
                    order: d.parse().map_err(|_| bad("bad order"))?,
                    power: j.parse().map_err(|_| bad("bad power"))?,
                    coeffs: parse_coeffs(cs)?,
                })
            }
            Some(("fourier", inner)) => Ok(WeightFamily::FourierOf(Box::new(inner.parse()?))),
            Some(_) => Err(bad("unknown family")),
        }
    }
}

/// Per-prime weight selection for experiments that run over a prime set.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightPlan {
    /// One family, identical construction at every prime.
    Fixed(WeightFamily),
    /// A family scaled by a real factor (still bounded complexity).
    Scaled { base: WeightFamily, factor: f64 },
    /// The tracking weight e(−a_p n/p) with a_p the nearest integer to θp.
    AdditiveNearest { theta: f64 },
}

impl WeightPlan {
    pub fn weight_for(&self, p: Prime) -> Result<Weight> {
        match self {
            WeightPlan::Fixed(fam) => make_weight(fam, p),
            WeightPlan::Scaled { base, factor } => Ok(make_weight(base, p)?.scaled(*factor)),
            WeightPlan::AdditiveNearest { theta } => {
                let pv = p.value();
                let a = (theta * pv as f64).round() as i64;
                let shift = (-a).rem_euclid(pv as i64) as u64;
                make_weight(&WeightFamily::Additive { shift }, p)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightPlan::Fixed(fam) => fam.to_string(),
            WeightPlan::Scaled { base, factor } => format!("scaled:{factor}:{base}"),
            WeightPlan::AdditiveNearest { theta } => format!("additive-nearest:{theta}"),
        }
    }
}

impl FromStr for WeightPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("scaled:") {
            let (f, fam) = rest
                .split_once(':')
                .ok_or_else(|| Error::InvalidFamily(format!("{s}: need scaled:<factor>:<family>")))?;
            return Ok(WeightPlan::Scaled {
                base: fam.parse()?,
                factor: f
                    .parse()
                    .map_err(|_| Error::InvalidFamily(format!("{s}: bad factor")))?,
            });
        }
        if let Some(t) = s.strip_prefix("additive-nearest:") {
            return Ok(WeightPlan::AdditiveNearest {
                theta: t
                    .parse()
                    .map_err(|_| Error::InvalidFamily(format!("{s}: bad theta")))?,
            });
        }
        Ok(WeightPlan::Fixed(s.parse()?))
    }
}

/// A length-p table of weight values plus family metadata.
#[derive(Clone, Debug)]
pub struct Weight {
    p: Prime,
    values: Vec<Complex64>,
    family: WeightFamily,
    conductor_proxy: f64,
}

impl Weight {
    fn from_parts(p: Prime, values: Vec<Complex64>, family: WeightFamily, proxy: f64) -> Self {
        debug_assert_eq!(values.len(), p.as_usize());
        Weight {
            p,
            values,
            family,
            conductor_proxy: proxy,
        }
    }

    /// Weight from explicitly supplied values. The declared bound must
    /// dominate the sup norm.
    pub fn custom(p: Prime, values: Vec<Complex64>, label: &str, proxy: f64) -> Result<Self> {
        if values.len() != p.as_usize() {
            return Err(Error::LengthMismatch {
                weight: p.as_usize(),
                orbit: values.len(),
            });
        }
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if sup > proxy + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "declared bound {proxy} below sup norm {sup}"
            )));
        }
        Ok(Weight::from_parts(
            p,
            values,
            WeightFamily::Custom {
                label: label.to_string(),
            },
            proxy,
        ))
    }

    pub fn p(&self) -> Prime {
        self.p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at n, read cyclically (the weight is a function on Z/pZ).
    #[inline]
    pub fn value(&self, n: u64) -> Complex64 {
        self.values[(n % self.p.value()) as usize]
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn conductor_proxy(&self) -> f64 {
        self.conductor_proxy
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// The weight multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> Weight {
        Weight::from_parts(
            self.p,
            self.values.iter().map(|v| v * factor).collect(),
            WeightFamily::Custom {
                label: format!("scaled:{factor}:{}", self.family),
            },
            self.conductor_proxy * factor.abs(),
        )
    }

    /// CSV table `n,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im\n");
        for (n, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{},{}\n", v.re, v.im));
        }
        out
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": crate::SCHEMA,
            "p": self.p.value(),
            "family": self.family.to_string(),
            "conductor_proxy": self.conductor_proxy,
        })
    }
}

/// Moments of a weight table.
#[derive(Clone, Copy, Debug)]
pub struct WeightStats {
    /// α_p = p⁻¹ Σ values.
    pub mean: Complex64,
    pub sup_norm: f64,
    /// p⁻¹ Σ |values|².
    pub mean_square: f64,
}

/// Exact mean, sup norm, and mean square of the stored values.
pub fn weight_stats(w: &Weight) -> WeightStats {
    let p = w.len() as f64;
    let mut mean = ComplexAccumulator::new();
    let mut sq = Accumulator::new();
    let mut sup: f64 = 0.0;
    for v in w.values() {
        mean.add(*v);
        sq.add(v.norm_sqr());
        sup = sup.max(v.norm());
    }
    WeightStats {
        mean: mean.value() / p,
        sup_norm: sup,
        mean_square: sq.value() / p,
    }
}

fn primitive_root(p: u64) -> u64 {
    let m = p - 1;
    let mut factors = Vec::new();
    let mut rem = m;
    let mut d = 2u64;
    while d * d <= rem {
        if rem % d == 0 {
            factors.push(d);
            while rem % d == 0 {
                rem /= d;
            }
        }
        d += 1;
    }
    if rem > 1 {
        factors.push(rem);
    }
    'cand: for g in 2..p {
        for &q in &factors {
            if pow_mod(g, m / q, p) == 1 {
                continue 'cand;
            }
        }
        return g;
    }
    unreachable!("every odd prime has a primitive root");
}

fn char_table(p: Prime, order: u64, power: u64) -> Result<Vec<Complex64>> {
    let pv = p.value();
    if order == 0 || (pv - 1) % order != 0 {
        return Err(Error::InvalidFamily(format!(
            "character order {order} does not divide p-1 = {}",
            pv - 1
        )));
    }
    let g = primitive_root(pv);
    let mut table = vec![Complex64::new(0.0, 0.0); pv as usize];
    let mut pow = 1u64;
    let j = power % order;
    for t in 0..pv - 1 {
        table[pow as usize] = unit_phase(mul_mod(j, t % order, order) % order, order);
        pow = mul_mod(pow, g, pv);
    }
    Ok(table)
}

fn poly_values_mod(coeffs: &[i64], p: Prime) -> Vec<u64> {
    let pv = p.value();
    let reduced: Vec<u64> = coeffs
        .iter()
        .map(|&c| c.rem_euclid(pv as i64) as u64)
        .collect();
    (0..pv)
        .map(|n| {
            let mut acc = 0u64;
            for &c in reduced.iter().rev() {
                acc = (mul_mod(acc, n, pv) + c) % pv;
            }
            acc
        })
        .collect()
}

/// Builds the value table for a family at prime p.
pub fn make_weight(family: &WeightFamily, p: Prime) -> Result<Weight> {
    let pv = p.value();
    let values = match family {
        WeightFamily::Legendre => legendre_table(p)
            .into_iter()
            .map(|s| Complex64::new(s as f64, 0.0))
            .collect(),
        WeightFamily::QrIndicator => legendre_table(p)
            .into_iter()
            .map(|s| Complex64::new((1.0 + s as f64) / 2.0, 0.0))
            .collect(),
        WeightFamily::Additive { shift } => {
            let a = shift % pv;
            (0..pv).map(|m| unit_phase(mul_mod(a, m, pv), pv)).collect()
        }
        WeightFamily::PolyPhase { coeffs } => {
            if poly_degree(coeffs).unwrap_or(0) < 1 {
                return Err(Error::InvalidFamily(
                    "polynomial phase needs degree >= 1".into(),
                ));
            }
            poly_values_mod(coeffs, p)
                .into_iter()
                .map(|r| unit_phase(r, pv))
                .collect()
        }
        WeightFamily::MultChar { order, power } => char_table(p, *order, *power)?,
        WeightFamily::CharOfPoly {
            order,
            power,
            coeffs,
        } => {
            if poly_degree(coeffs).unwrap_or(0) < 1 {
                return Err(Error::InvalidFamily(
                    "character of a polynomial needs degree >= 1".into(),
                ));
            }
            let chi = char_table(p, *order, *power)?;
            poly_values_mod(coeffs, p)
                .into_iter()
                .map(|r| chi[r as usize])
                .collect()
        }
        WeightFamily::Kloosterman => return kloosterman_batch(p),
        WeightFamily::FourierOf(inner) => {
            let base = make_weight(inner, p)?;
            return fourier_transform(&base);
        }
        WeightFamily::Custom { .. } => {
            return Err(Error::InvalidFamily(
                "custom weights are built from explicit values".into(),
            ))
        }
    };
    let proxy = family
        .conductor_proxy()
        .expect("closed-form families declare a proxy");
    Ok(Weight::from_parts(p, values, family.clone(), proxy))
}

/// Kl₂(n;p) from the defining sum, with compensated accumulation. O(p).
pub fn kloosterman_direct(n: u64, p: Prime) -> Complex64 {
    let pv = p.value();
    let xs: Vec<u64> = (1..pv).collect();
    let inv = batch_inverse(&xs, p).expect("nonzero residues are invertible");
    let mut acc = ComplexAccumulator::new();
    for (x, xb) in xs.into_iter().zip(inv) {
        let r = (mul_mod(n % pv, x, pv) + xb) % pv;
        acc.add(unit_phase(r, pv));
    }
    acc.value() / (pv as f64).sqrt()
}

/// Full Kloosterman table by direct summation: the O(p²) oracle for the
/// batch path. Guarded to modest p.
pub fn kloosterman_direct_table(p: Prime) -> Result<Vec<Complex64>> {
    let pv = p.value();
    if pv > 20_000 {
        return Err(Error::BudgetExceeded(format!(
            "direct Kloosterman table is O(p^2); p = {pv} is too large"
        )));
    }
    let xs: Vec<u64> = (1..pv).collect();
    let inv = batch_inverse(&xs, p)?;
    let roots: Vec<Complex64> = (0..pv).map(|k| unit_phase(k, pv)).collect();
    let scale = 1.0 / (pv as f64).sqrt();
    let mut out = Vec::with_capacity(p.as_usize());
    for n in 0..pv {
        let mut acc = ComplexAccumulator::new();
        for (&x, &xb) in xs.iter().zip(&inv) {
            acc.add(roots[((mul_mod(n, x, pv) + xb) % pv) as usize]);
        }
        out.push(acc.value() * scale);
    }
    Ok(out)
}

/// The Kloosterman table as the transform kernel produces it, before the
/// real-part projection. The imaginary parts measure transform error.
pub fn kloosterman_batch_raw(p: Prime) -> Result<Vec<Complex64>> {
    let pv = p.value();
    let xs: Vec<u64> = (1..pv).collect();
    let inv = batch_inverse(&xs, p)?;
    let mut g = vec![Complex64::new(0.0, 0.0); p.as_usize()];
    for (x, xb) in xs.into_iter().zip(inv) {
        g[x as usize] = unit_phase(xb, pv);
    }
    let plan = PrimeFft::new(p)?;
    let mut out = plan.dft(&g);
    let scale = 1.0 / (pv as f64).sqrt();
    for v in &mut out {
        *v *= scale;
    }
    Ok(out)
}

/// Kloosterman weight via the transform kernel; values are projected to the
/// real axis (Kl₂ is real: the x ↔ −x pairing conjugates each term).
pub fn kloosterman_batch(p: Prime) -> Result<Weight> {
    let raw = kloosterman_batch_raw(p)?;
    let values = raw
        .into_iter()
        .map(|v| Complex64::new(v.re, 0.0))
        .collect();
    Ok(Weight::from_parts(p, values, WeightFamily::Kloosterman, 2.0))
}

/// Normalized Fourier transform: result(k) = (1/√p) Σ_m e(mk/p)·w(m).
pub fn fourier_transform(w: &Weight) -> Result<Weight> {
    let p = w.p();
    let plan = PrimeFft::new(p)?;
    let mut values = plan.dft(w.values());
    let scale = 1.0 / (p.value() as f64).sqrt();
    for v in &mut values {
        *v *= scale;
    }
    let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(Weight::from_parts(
        p,
        values,
        WeightFamily::FourierOf(Box::new(w.family().clone())),
        sup,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(v: u64) -> Prime {
        Prime::new(v).unwrap()
    }

    #[test]
    fn qr_indicator_examples() {
        let w = make_weight(&WeightFamily::QrIndicator, p(7)).unwrap();
        // squares mod 7 are {1,2,4}; 3 is a non-residue
        assert_abs_diff_eq!(w.value(3).re, 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(w.value(2).re, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(w.value(0).re, 0.5, epsilon = 0.0);
    }

    #[test]
    fn additive_zero_is_all_ones() {
        let w = make_weight(&WeightFamily::Additive { shift: 0 }, p(11)).unwrap();
        assert!(w.values().iter().all(|v| (v - 1.0).norm() < 1e-15));
    }

    #[test]
    fn kloosterman_hand_values() {
        // p=3, n=1: e(2/3) + e(1/3) = -1, so Kl = -1/sqrt(3)
        let k13 = kloosterman_direct(1, p(3));
        assert_abs_diff_eq!(k13.re, -1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(k13.im, 0.0, epsilon = 1e-12);

        // p=5, n=1: terms e(2/5), 1, 1, e(3/5) -> (2 + 2cos(4*pi/5))/sqrt(5)
        let k15 = kloosterman_direct(1, p(5));
        let expect = (2.0 + 2.0 * (4.0 * PI / 5.0).cos()) / 5f64.sqrt();
        assert_abs_diff_eq!(k15.re, expect, epsilon = 1e-12);

        // n=0: sum of e(xbar/p) over nonzero x is -1
        for pv in [3u64, 7, 101] {
            let k0 = kloosterman_direct(0, p(pv));
            assert_abs_diff_eq!(k0.re, -1.0 / (pv as f64).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_matches_direct_at_101() {
        let q = p(101);
        let batch = kloosterman_batch(q).unwrap();
        let oracle = kloosterman_direct_table(q).unwrap();
        let mut worst: f64 = 0.0;
        for (b, o) in batch.values().iter().zip(&oracle) {
            worst = worst.max((b - o).norm());
        }
        assert!(worst <= 1e-10, "max |batch - direct| = {worst}");
    }

    #[test]
    fn batch_reality_and_mean_zero() {
        for pv in [3u64, 13] {
            let raw = kloosterman_batch_raw(p(pv)).unwrap();
            let max_im = raw.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            assert!(max_im <= 1e-10, "p={pv} max imag {max_im}");
            let sum: Complex64 = crate::summation::sum_complex(raw.iter().copied());
            assert!(sum.norm() <= 1e-10, "p={pv} |sum| = {}", sum.norm());
        }
    }

    #[test]
    fn make_weight_kloosterman_small() {
        let w = make_weight(&WeightFamily::Kloosterman, p(3)).unwrap();
        assert_abs_diff_eq!(w.value(1).re, -1.0 / 3f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(w.value(0).re, -1.0 / 3f64.sqrt(), epsilon = 1e-10);
        assert!(w.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn fourier_of_additive_is_delta() {
        let q = p(13);
        let a = 5u64;
        let w = make_weight(&WeightFamily::Additive { shift: a }, q).unwrap();
        let ft = fourier_transform(&w).unwrap();
        let peak = (13 - a) % 13; // spike at -a mod p
        for n in 0..13u64 {
            let expect = if n == peak { (13f64).sqrt() } else { 0.0 };
            assert_abs_diff_eq!(ft.value(n).norm(), expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn fourier_of_delta_is_flat() {
        let q = p(11);
        let mut vals = vec![Complex64::new(0.0, 0.0); 11];
        vals[0] = Complex64::new(1.0, 0.0);
        let w = Weight::custom(q, vals, "delta", 1.0).unwrap();
        let ft = fourier_transform(&w).unwrap();
        for v in ft.values() {
            assert_abs_diff_eq!(v.re, 1.0 / 11f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fourier_of_inverse_phase_is_kloosterman() {
        let q = p(101);
        let xs: Vec<u64> = (1..101).collect();
        let inv = batch_inverse(&xs, q).unwrap();
        let mut vals = vec![Complex64::new(0.0, 0.0); 101];
        for (x, xb) in xs.into_iter().zip(inv) {
            vals[x as usize] = unit_phase(xb, 101);
        }
        let w = Weight::custom(q, vals, "inverse-phase", 1.0).unwrap();
        let ft = fourier_transform(&w).unwrap();
        let oracle = kloosterman_direct_table(q).unwrap();
        for (a, b) in ft.values().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn stats_examples() {
        let s = weight_stats(&make_weight(&WeightFamily::Kloosterman, p(13)).unwrap());
        assert!(s.mean.norm() <= 1e-10);

        let s = weight_stats(&make_weight(&WeightFamily::QrIndicator, p(7)).unwrap());
        // (1 + (n/p))/2 sums to p/2 exactly under the 1/2-at-zero convention
        assert_eq!(s.mean, Complex64::new(0.5, 0.0));

        let s = weight_stats(&make_weight(&WeightFamily::Legendre, p(7)).unwrap());
        assert_abs_diff_eq!(s.mean_square, 6.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_mean_exactly_zero() {
        for pv in [3u64, 101, 1009, 9973] {
            let s = weight_stats(&make_weight(&WeightFamily::Legendre, p(pv)).unwrap());
            assert_eq!(s.mean, Complex64::new(0.0, 0.0), "p={pv}");
        }
    }

    #[test]
    fn family_validation() {
        assert!(make_weight(&WeightFamily::MultChar { order: 5, power: 1 }, p(7)).is_err());
        assert!(make_weight(&WeightFamily::PolyPhase { coeffs: vec![3] }, p(7)).is_err());
        assert!(make_weight(&WeightFamily::MultChar { order: 3, power: 1 }, p(7)).is_ok());
    }

    #[test]
    fn mult_char_is_multiplicative() {
        let q = p(13);
        let w = make_weight(&WeightFamily::MultChar { order: 4, power: 1 }, q).unwrap();
        for a in 1..13u64 {
            for b in 1..13u64 {
                let lhs = w.value(mul_mod(a, b, 13));
                let rhs = w.value(a) * w.value(b);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
        assert_eq!(w.value(0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn legendre_is_order_two_character() {
        let q = p(11);
        let leg = make_weight(&WeightFamily::Legendre, q).unwrap();
        let chi = make_weight(&WeightFamily::MultChar { order: 2, power: 1 }, q).unwrap();
        for n in 0..11u64 {
            assert!((leg.value(n) - chi.value(n)).norm() < 1e-12);
        }
    }

    #[test]
    fn family_round_trips_through_strings() {
        for s in [
            "legendre",
            "qr",
            "kloosterman",
            "additive:7",
            "poly:0,1,2",
            "mult:4:1",
            "charpoly:2:1:1,1",
            "fourier:kloosterman",
        ] {
            let fam: WeightFamily = s.parse().unwrap();
            let back: WeightFamily = fam.to_string().parse().unwrap();
            assert_eq!(fam, back);
        }
        assert!("nonsense".parse::<WeightFamily>().is_err());
    }

    #[test]
    fn weight_plan_parsing() {
        assert_eq!(
            "scaled:2:legendre".parse::<WeightPlan>().unwrap(),
            WeightPlan::Scaled {
                base: WeightFamily::Legendre,
                factor: 2.0
            }
        );
        assert!(matches!(
            "additive-nearest:0.5".parse::<WeightPlan>().unwrap(),
            WeightPlan::AdditiveNearest { .. }
        ));
        assert!(matches!(
            "kloosterman".parse::<WeightPlan>().unwrap(),
            WeightPlan::Fixed(WeightFamily::Kloosterman)
        ));
    }

    #[test]
    fn custom_rejects_undersized_bound() {
        let q = p(5);
        let vals = vec![Complex64::new(3.0, 0.0); 5];
        assert!(Weight::custom(q, vals, "big", 1.0).is_err());
    }
}
