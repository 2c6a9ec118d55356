//! Transform kernels: an iterative radix-2 FFT and the chirp-z (Bluestein)
//! reduction that evaluates prime-length DFTs through a power-of-two cyclic
//! convolution.
//!
//! Prime lengths admit no mixed-radix splitting, so every length-p transform
//! here is the chirp factorization nk = (n² + k² − (n−k)²)/2. The quadratic
//! chirp phases are reduced modulo 2p in integer arithmetic before touching
//! floating point, which keeps the phase error at machine epsilon even for
//! p near 10⁷. All loops run in a fixed order; given identical inputs the
//! output is bit-identical across runs and thread counts.

use crate::error::{Error, Result};
use crate::modular::Prime;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Smallest power of two at least `n`.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Radix-2 FFT plan with a precomputed twiddle table.
///
/// Twiddles are evaluated from exact angles (one `sin_cos` per table entry)
/// rather than by repeated multiplication, so stage error does not grow with
/// the transform length.
pub struct Fft {
    n: usize,
    // twiddles[j] = exp(-2*pi*i*j/n) for j < n/2
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let half = n / 2;
        let mut twiddles = Vec::with_capacity(half);
        for j in 0..half {
            let (s, c) = (-2.0 * PI * j as f64 / n as f64).sin_cos();
            twiddles.push(Complex64::new(c, s));
        }
        Fft { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Inverse transform including the 1/n scaling.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let scale = 1.0 / self.n as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        if n <= 1 {
            return;
        }
        // bit-reversal permutation
        let mut j = 0usize;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j ^= bit;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            let mut start = 0;
            while start < n {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * buf[start + k + half];
                    buf[start + k + half] = buf[start + k] - t;
                    buf[start + k] += t;
                }
                start += len;
            }
            len <<= 1;
        }
    }
}

/// Direct O(n²) DFT with exactly reduced phases; the oracle the fast path is
/// tested against. `sign` is the sign of the exponent `e(sign·nk/p)`.
pub fn dft_direct(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    use crate::summation::ComplexAccumulator;
    let p = x.len() as u64;
    let mut out = Vec::with_capacity(x.len());
    for k in 0..p {
        let mut acc = ComplexAccumulator::new();
        for (n, &v) in x.iter().enumerate() {
            let r = (n as u64 * k) % p;
            let (s, c) = (sign * 2.0 * PI * r as f64 / p as f64).sin_cos();
            acc.add(v * Complex64::new(c, s));
        }
        out.push(acc.value());
    }
    out
}

/// Largest admissible prime length for the chirp-z path. Above this the
/// padded convolution buffers (two vectors of 2^26 complex entries) outgrow
/// a desktop memory budget.
pub const MAX_PRIME_LEN: u64 = 12_000_000;

/// Chirp-z evaluator for a fixed prime length.
///
/// `dft` computes S(k) = Σ_n x[n]·e(nk/p) for all k in O(p log p) via three
/// power-of-two FFTs.
pub struct PrimeFft {
    p: usize,
    fft: Fft,
    // chirp[m] = exp(i*pi*m^2/p) with m^2 reduced mod 2p
    chirp: Vec<Complex64>,
    // forward FFT of the cyclically embedded conjugate chirp
    kernel_fft: Vec<Complex64>,
}

impl PrimeFft {
    pub fn new(p: Prime) -> Result<Self> {
        if p.value() > MAX_PRIME_LEN {
            return Err(Error::BudgetExceeded(format!(
                "transform length {p} exceeds the {MAX_PRIME_LEN} budget"
            )));
        }
        let pu = p.value();
        let n = p.as_usize();
        let m = next_pow2(2 * n - 1);
        let two_p = 2 * pu;
        let mut chirp = Vec::with_capacity(n);
        for i in 0..pu {
            let r = (i * i) % two_p; // p < 2^32 not required: i*i < 2^63 for p <= 1.2e7
            let (s, c) = (PI * r as f64 / pu as f64).sin_cos();
            chirp.push(Complex64::new(c, s));
        }
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for i in 1..n {
            let b = chirp[i].conj();
            kernel[i] = b;
            kernel[m - i] = b;
        }
        let fft = Fft::new(m);
        fft.forward(&mut kernel);
        Ok(PrimeFft {
            p: n,
            fft,
            chirp,
            kernel_fft: kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    /// S(k) = Σ_{n<p} x[n]·exp(2πi·nk/p), all k in `[0, p)`.
    pub fn dft(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.p);
        let m = self.fft.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..self.p {
            buf[i] = x[i] * self.chirp[i];
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        (0..self.p).map(|k| buf[k] * self.chirp[k]).collect()
    }

    /// S(k) = Σ_{n<p} x[n]·exp(−2πi·nk/p), via conjugation of the plus path.
    pub fn dft_conj(&self, x: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        let mut out = self.dft(&conj);
        for v in &mut out {
            *v = v.conj();
        }
        out
    }
}

/// |Σ_n x[n]·e(−n·j/M)| sampled on the M-point grid θ = j/M, where M is the
/// next power of two at least `min_len`. Used for sup-over-frequency scans.
pub fn padded_spectrum(x: &[Complex64], min_len: usize) -> Result<Vec<Complex64>> {
    let m = next_pow2(min_len.max(x.len()));
    if m > 1 << 26 {
        return Err(Error::BudgetExceeded(format!(
            "padded spectrum length {m} exceeds the {} budget",
            1usize << 26
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..x.len()].copy_from_slice(x);
    let fft = Fft::new(m);
    fft.forward(&mut buf);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::Prime;

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn radix2_matches_direct() {
        let n = 64;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut buf = x.clone();
        Fft::new(n).forward(&mut buf);
        let oracle = dft_direct(&x, -1.0);
        assert!(max_abs_diff(&buf, &oracle) < 1e-10);
    }

    #[test]
    fn radix2_roundtrip() {
        let n = 256;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 / 3.0).cos()))
            .collect();
        let mut buf = x.clone();
        let fft = Fft::new(n);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        assert!(max_abs_diff(&buf, &x) < 1e-12);
    }

    #[test]
    fn bluestein_matches_direct_oracle() {
        for &pv in &[3u64, 5, 101, 1009] {
            let p = Prime::new(pv).unwrap();
            let x: Vec<Complex64> = (0..pv)
                .map(|i| Complex64::new((i as f64 * 0.31).cos(), (i as f64 * 0.17).sin()))
                .collect();
            let fast = PrimeFft::new(p).unwrap().dft(&x);
            let oracle = dft_direct(&x, 1.0);
            assert!(
                max_abs_diff(&fast, &oracle) < 1e-9,
                "p={pv}: {}",
                max_abs_diff(&fast, &oracle)
            );
        }
    }

    #[test]
    fn conjugate_path_matches_direct() {
        let p = Prime::new(101).unwrap();
        let x: Vec<Complex64> = (0..101)
            .map(|i| Complex64::new((i as f64 * 0.11).sin(), 0.3 - i as f64 * 1e-3))
            .collect();
        let fast = PrimeFft::new(p).unwrap().dft_conj(&x);
        let oracle = dft_direct(&x, -1.0);
        assert!(max_abs_diff(&fast, &oracle) < 1e-9);
    }

    #[test]
    fn budget_is_enforced() {
        let q = crate::modular::next_prime_after(MAX_PRIME_LEN);
        assert!(matches!(
            PrimeFft::new(Prime::new(q).unwrap()),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn padded_spectrum_matches_definition() {
        let x: Vec<Complex64> = (0..7)
            .map(|i| Complex64::new(1.0 / (i as f64 + 1.0), i as f64 * 0.2))
            .collect();
        let spec = padded_spectrum(&x, 32).unwrap();
        assert_eq!(spec.len(), 32);
        for j in 0..32 {
            let theta = j as f64 / 32.0;
            let mut s = Complex64::new(0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let (si, co) = (-2.0 * PI * n as f64 * theta).sin_cos();
                s += v * Complex64::new(co, si);
            }
            assert!((spec[j] - s).norm() < 1e-12);
        }
    }
}
