//! Compensated (Neumaier) accumulation.
//!
//! Every O(p)-term sum in the crate goes through these accumulators so the
//! rounding error stays near √p·ε instead of p·ε.

use num_complex::Complex64;

/// Neumaier variant of Kahan summation for `f64`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    compensation: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Componentwise compensated accumulation of complex terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexAccumulator {
    re: Accumulator,
    im: Accumulator,
}

impl ComplexAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of an iterator of `f64` terms.
pub fn sum_f64<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Accumulator::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Compensated sum of an iterator of complex terms.
pub fn sum_complex<I: IntoIterator<Item = Complex64>>(terms: I) -> Complex64 {
    let mut acc = ComplexAccumulator::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive() {
        // 1 + eps/2 repeated: naive summation drops every tiny term.
        let tiny = f64::EPSILON / 2.0;
        let mut acc = Accumulator::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(tiny);
        }
        let exact = 1.0 + 1000.0 * tiny;
        assert!((acc.value() - exact).abs() < 1e-18);
    }

    #[test]
    fn cancellation_order_independent_scale() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum_f64(xs.iter().copied()), 2.0);
    }
}
