//! FFT matched filter and the frequency-band chi-squared veto.
//!
//! Normalization: with one-sided inner product
//! `(a|b) = 4 Re Σ ã b̃*/S df`, the complex filter output is
//! `z(t) = 4 df Σ d̃ h̃*/S e^{2πift}` and `ρ = z/σ`, `σ² = (h|h)`. Gaussian
//! noise with PSD `S` then gives `E|ρ|² = 2`, and a noiseless signal
//! matching the template peaks at its optimal SNR.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{ifft, rfft};
use crate::search::Template;
use crate::spectral::PowerSpectrum;
use crate::synth::TimeSeries;
use crate::waveform;

/// Complex SNR time series of one template over one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSeries {
    pub template_id: u32,
    pub start_time: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
    pub sigma: f64,
}

impl SnrSeries {
    pub fn abs(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.norm()).collect()
    }

    /// Index and value of the loudest `|ρ|`, earliest on ties.
    pub fn peak(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.samples.iter().enumerate() {
            let v = c.norm();
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// A whitened analysis segment prepared for filtering many templates.
#[derive(Debug, Clone)]
pub struct FilterSegment {
    start_time: f64,
    fs: u32,
    n: usize,
    f_low: f64,
    /// rfft of the whitened samples.
    data: Vec<Complex64>,
    /// `sqrt(S_k)` on the segment grid.
    amp: Vec<f64>,
}

struct Weights {
    first_bin: usize,
    /// `h̃_k / sqrt(S_k)` for bins `first_bin..first_bin + len`.
    values: Vec<Complex64>,
    sigma_sq: f64,
}

impl FilterSegment {
    pub fn new(whitened: &TimeSeries, psd: &PowerSpectrum, f_low: f64) -> Result<Self> {
        let n = whitened.len();
        if !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "segment length {n} is not a power of two"
            )));
        }
        let fs = whitened.sample_rate_hz();
        if !psd.matches_grid(n, fs) {
            return Err(Error::GridMismatch(format!(
                "segment of {n} samples at {fs} Hz, PSD df={} with {} bins",
                psd.df,
                psd.values.len()
            )));
        }
        let nyquist = fs as f64 / 2.0;
        if !(f_low > 0.0) || f_low >= nyquist {
            return Err(Error::BandOutsideNyquist(format!(
                "f_low {f_low} Hz vs Nyquist {nyquist} Hz"
            )));
        }
        psd.check_positive(f_low)?;
        Ok(FilterSegment {
            start_time: whitened.start_time(),
            fs,
            n,
            f_low,
            data: rfft(&whitened.samples),
            amp: psd.values.iter().map(|v| v.max(0.0).sqrt()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn df(&self) -> f64 {
        self.fs as f64 / self.n as f64
    }

    /// `4 df dt sqrt(fs/2)`: converts whitened DFT bins back to `d̃/S` units.
    fn filter_scale(&self) -> f64 {
        4.0 / self.n as f64 * (self.fs as f64 / 2.0).sqrt()
    }

    fn weights(&self, template: &Template) -> Result<Weights> {
        let df = self.df();
        let top = self.n / 2 - 1;
        let h = waveform::chirp_spectrum(template.chirp_mass, self.f_low, df, top + 1, 0.0, 0.0);
        let first_bin = h.iter().position(|c| c.norm_sqr() > 0.0).ok_or_else(|| {
            Error::BandOutsideNyquist(format!(
                "template {} (mc {}) has no support in [{}, Nyquist)",
                template.id, template.chirp_mass, self.f_low
            ))
        })?;
        let last_bin = h
            .iter()
            .rposition(|c| c.norm_sqr() > 0.0)
            .unwrap_or(first_bin);
        let values: Vec<Complex64> = (first_bin..=last_bin).map(|k| h[k] / self.amp[k]).collect();
        let sigma_sq = 4.0 * df * values.iter().map(|c| c.norm_sqr()).sum::<f64>();
        Ok(Weights {
            first_bin,
            values,
            sigma_sq,
        })
    }

    /// Complex SNR of `template` at every sample of the segment.
    pub fn filter(&self, template: &Template) -> Result<SnrSeries> {
        let w = self.weights(template)?;
        let sigma = w.sigma_sq.sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, c) in w.values.iter().enumerate() {
            let k = w.first_bin + i;
            buf[k] = self.data[k] * c.conj();
        }
        ifft(&mut buf);
        let scale = self.filter_scale() * self.n as f64 / sigma;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        Ok(SnrSeries {
            template_id: template.id,
            start_time: self.start_time,
            dt: 1.0 / self.fs as f64,
            samples: buf,
            sigma,
        })
    }

    /// Reduced chi-squared (`2·n_bins − 2` degrees of freedom) at sample `peak`.
    ///
    /// The template is split into `n_bins` contiguous bands of equal
    /// `|h̃|²/S` power; each band's filter output is compared with its share
    /// of the full output.
    pub fn chisq(&self, template: &Template, peak: usize, n_bins: usize) -> Result<f64> {
        if n_bins < 2 {
            return Err(Error::TooFewBins(n_bins));
        }
        if peak >= self.n {
            return Err(Error::InvalidParameter(format!(
                "peak {peak} outside segment of {}",
                self.n
            )));
        }
        let w = self.weights(template)?;
        if w.values.len() < n_bins {
            return Err(Error::InvalidParameter(format!(
                "template {} spans {} bins, fewer than {n_bins} chi-squared bands",
                template.id,
                w.values.len()
            )));
        }
        let power: Vec<f64> = w.values.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        let n = self.n as u64;
        let mut band_z = vec![Complex64::new(0.0, 0.0); n_bins];
        let mut band_p = vec![0.0; n_bins];
        let mut cumulative = 0.0;
        for (i, c) in w.values.iter().enumerate() {
            let k = (w.first_bin + i) as u64;
            // band whose share contains this bin's midpoint of cumulative power
            let mid = (cumulative + 0.5 * power[i]) / total;
            let b = ((mid * n_bins as f64) as usize).min(n_bins - 1);
            cumulative += power[i];
            let phase = TAU * ((k * peak as u64) % n) as f64 / n as f64;
            band_z[b] += self.data[k as usize] * c.conj() * Complex64::from_polar(1.0, phase);
            band_p[b] += power[i];
        }
        let scale = self.filter_scale();
        let z: Complex64 = band_z.iter().sum::<Complex64>() * scale;
        let mut chisq = 0.0;
        for (bz, bp) in band_z.iter().zip(&band_p) {
            if *bp == 0.0 {
                continue;
            }
            let frac = bp / total;
            let sigma_b_sq = w.sigma_sq * frac;
            chisq += (bz * scale - z * frac).norm_sqr() / sigma_b_sq;
        }
        Ok(chisq / (2 * n_bins - 2) as f64)
    }
}

/// Complex SNR of `template` against a whitened segment.
pub fn matched_filter(
    whitened: &TimeSeries,
    template: &Template,
    psd: &PowerSpectrum,
    f_low: f64,
) -> Result<SnrSeries> {
    FilterSegment::new(whitened, psd, f_low)?.filter(template)
}

/// Reduced chi-squared of `template` at epoch `peak_time` in the segment.
pub fn chisq_veto(
    whitened: &TimeSeries,
    template: &Template,
    psd: &PowerSpectrum,
    f_low: f64,
    peak_time: f64,
    n_bins: usize,
) -> Result<f64> {
    if n_bins < 2 {
        return Err(Error::TooFewBins(n_bins));
    }
    let offset = ((peak_time - whitened.start_time()) / whitened.dt()).round();
    if offset < 0.0 || offset >= whitened.len() as f64 {
        return Err(Error::InvalidParameter(format!(
            "peak time {peak_time} outside segment"
        )));
    }
    FilterSegment::new(whitened, psd, f_low)?.chisq(template, offset as usize, n_bins)
}
