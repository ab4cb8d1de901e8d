//! Complex discrete Fourier transforms of arbitrary length.
//!
//! Powers of two use an iterative radix-2 kernel. Every other length goes
//! through Bluestein's chirp-z algorithm on a power-of-two convolution.
//! Transforms are unnormalized in both directions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct FftPlan {
    len: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

#[derive(Clone, Debug)]
struct Radix2 {
    /// `exp(-2 pi i j / n)` for `j < n / 2`.
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Bluestein {
    /// `exp(-pi i j^2 / n)`.
    chirp: Vec<Complex64>,
    /// Forward transform of the conjugate chirp, wrapped to the convolution length.
    kernel_hat: Vec<Complex64>,
    inner: Radix2,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        let kind = if len == 1 {
            Kind::Trivial
        } else if len.is_power_of_two() {
            Kind::Radix2(Radix2::new(len))
        } else {
            Kind::Bluestein(Bluestein::new(len))
        };
        Self { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place `X_k = sum_j x_j exp(-2 pi i jk / n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2(r) => r.run(buf),
            Kind::Bluestein(b) => b.run(buf),
        }
    }

    /// In-place `x_j = sum_k X_k exp(+2 pi i jk / n)`, no `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for z in buf.iter_mut() {
            *z = z.conj();
        }
        self.forward(buf);
        for z in buf.iter_mut() {
            *z = z.conj();
        }
    }
}

fn unit_root(num: usize, den: usize) -> Complex64 {
    // exp(-2 pi i num / den), reduced first so large arguments stay accurate
    let r = (num % den) as f64 / den as f64;
    let angle = -2.0 * PI * r;
    Complex64::new(angle.cos(), angle.sin())
}

impl Radix2 {
    fn new(n: usize) -> Self {
        let bits = n.trailing_zeros();
        let bit_reverse = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        let twiddles = (0..n / 2).map(|j| unit_root(j, n)).collect();
        Self {
            twiddles,
            bit_reverse,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        for i in 0..n {
            let j = self.bit_reverse[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for j in 0..half {
                    let w = self.twiddles[j * stride];
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                // j^2 mod 2n keeps the phase argument small
                let j2 = (j as u128 * j as u128 % (2 * n as u128)) as usize;
                unit_root(j2, 2 * n)
            })
            .collect();
        let inner = Radix2::new(m);
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.run(&mut kernel);
        Self {
            chirp,
            kernel_hat: kernel,
            inner,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        let m = self.kernel_hat.len();
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            work[j] = buf[j] * self.chirp[j];
        }
        self.inner.run(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            *w = (*w * k).conj();
        }
        // inverse via conjugation; the conj above is the first half of it
        self.inner.run(&mut work);
        let scale = 1.0 / m as f64;
        for k in 0..n {
            buf[k] = work[k].conj() * scale * self.chirp[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * unit_root(j * k, n))
                    .sum()
            })
            .collect()
    }

    fn sample(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                let t = j as f64;
                Complex64::new((0.7 * t).sin() + 0.1 * t, (1.3 * t).cos() - 0.05 * t * t)
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_mixed_lengths() {
        for n in [1, 2, 4, 6, 8, 12, 16, 18, 30, 64, 100] {
            let x = sample(n);
            let expected = naive_dft(&x);
            let mut y = x.clone();
            FftPlan::new(n).forward(&mut y);
            let scale = expected.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-12 * scale * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        for n in [8, 24, 128, 96] {
            let x = sample(n);
            let mut y = x.clone();
            let plan = FftPlan::new(n);
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a / n as f64 - b).norm() < 1e-12);
            }
        }
    }
}
