//! Thin real-signal wrappers around `rustfft`.
//!
//! Conventions: `rfft` returns the unnormalized DFT bins `0..=n/2` with the
//! `exp(-2πi kn/N)` kernel; `irfft` is its exact inverse (it divides by N).

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT of a real sequence, one-sided (`n/2 + 1` bins).
pub fn rfft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    buf.truncate(n / 2 + 1);
    buf
}

/// Inverse of [`rfft`] for an even length `n`; imaginary parts of the DC
/// and Nyquist bins are ignored.
pub fn irfft(half: &[Complex64], n: usize) -> Vec<f64> {
    debug_assert_eq!(half.len(), n / 2 + 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..half.len()].copy_from_slice(half);
    buf[0].im = 0.0;
    if n % 2 == 0 {
        buf[n / 2].im = 0.0;
    }
    for k in 1..n.div_ceil(2) {
        buf[n - k] = half[k].conj();
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Full complex inverse DFT, normalized by `1/n`.
pub fn ifft(spectrum: &mut [Complex64]) {
    let n = spectrum.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(spectrum));
    let scale = 1.0 / n as f64;
    for c in spectrum.iter_mut() {
        *c *= scale;
    }
}
