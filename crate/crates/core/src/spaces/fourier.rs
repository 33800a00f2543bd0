//! Real DFT with Hermitian-unique packing.
//!
//! A length-`n` real signal maps to exactly `n` reals laid out as
//! `[Re c0, Re c1, Im c1, Re c2, Im c2, ...]`, with `Re c_{n/2}` as the last
//! entry when `n` is even. The forward transform is unnormalized and the
//! inverse carries the `1/n` factor.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct PackedFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PackedFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PackedFft").field("n", &self.n).finish()
    }
}

/// Which coefficient a packed slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Re(usize),
    Im(usize),
}

/// Slot layout for a frame of length `n`.
pub fn slot(n: usize, index: usize) -> Slot {
    if index == 0 {
        return Slot::Re(0);
    }
    let k = index.div_ceil(2);
    if n.is_multiple_of(2) && index == n - 1 {
        Slot::Re(n / 2)
    } else if index % 2 == 1 {
        Slot::Re(k)
    } else {
        Slot::Im(k)
    }
}

impl PackedFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    fn pack(&self, spec: &[Complex64], out: &mut [f64], edge: f64, interior: f64) {
        let n = self.n;
        out[0] = spec[0].re * edge;
        for k in 1..=(n - 1) / 2 {
            out[2 * k - 1] = spec[k].re * interior;
            out[2 * k] = spec[k].im * interior;
        }
        if n.is_multiple_of(2) && n >= 2 {
            out[n - 1] = spec[n / 2].re * edge;
        }
    }

    /// Unnormalized forward transform, packed.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let spec = self.spectrum(x);
        self.pack(&spec, out, 1.0, 1.0);
    }

    /// Inverse of [`PackedFft::forward`].
    pub fn inverse(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(z[0], 0.0);
        for k in 1..=(n - 1) / 2 {
            let c = Complex64::new(z[2 * k - 1], z[2 * k]);
            buf[k] = c;
            buf[n - k] = c.conj();
        }
        if n.is_multiple_of(2) && n >= 2 {
            buf[n / 2] = Complex64::new(z[n - 1], 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
    }

    /// Transpose of the linear map [`PackedFft::inverse`]: pulls a gradient
    /// with respect to the signal back onto the packed coefficients.
    pub fn inverse_transpose(&self, g: &[f64], out: &mut [f64]) {
        let n = self.n as f64;
        let spec = self.spectrum(g);
        self.pack(&spec, out, 1.0 / n, 2.0 / n);
    }
}
