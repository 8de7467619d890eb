//! Synthetic two-detector strain: seeded Gaussian noise and chirp injections.
//!
//! All randomness is derived from one master seed. Each stream gets its own
//! ChaCha20 generator seeded with `master ^ h(component, detector, part)`,
//! where `h` is the first eight little-endian bytes of
//! `SHA-256("component/detector/part")`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::fft::{irfft, rfft};
use crate::spectral::PowerSpectrum;
use crate::waveform;

/// Two-character interferometer tag such as `H1` or `L1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DetectorId([u8; 2]);

impl DetectorId {
    pub fn new(tag: &str) -> Result<Self> {
        let b = tag.as_bytes();
        if b.len() != 2 || !b.iter().all(|c| c.is_ascii_alphanumeric()) {
            return Err(invalid(format!(
                "detector tag {tag:?} must be 2 ASCII alphanumerics"
            )));
        }
        Ok(DetectorId([b[0], b[1]]))
    }

    pub fn from_bytes(b: [u8; 2]) -> Result<Self> {
        let s = std::str::from_utf8(&b).map_err(|_| invalid("detector tag is not ASCII"))?;
        Self::new(s)
    }

    pub fn as_bytes(&self) -> [u8; 2] {
        self.0
    }

    pub fn as_str(&self) -> &str {
        // Constructors only admit ASCII alphanumerics.
        std::str::from_utf8(&self.0).unwrap_or("??")
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DetectorId::new(s)
    }
}

/// Uniformly sampled strain segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub detector: DetectorId,
    pub start_s: i64,
    pub start_ns: u32,
    sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        detector: DetectorId,
        start_s: i64,
        start_ns: u32,
        sample_rate_hz: u32,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(invalid("sample rate must be a positive integer"));
        }
        if start_ns >= 1_000_000_000 {
            return Err(invalid("start_ns must be below 1e9"));
        }
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples must be finite"));
        }
        Ok(TimeSeries {
            detector,
            start_s,
            start_ns,
            sample_rate_hz,
            samples,
        })
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt()
    }

    /// Epoch of the first sample in seconds.
    pub fn start_time(&self) -> f64 {
        self.start_s as f64 + self.start_ns as f64 * 1e-9
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time() + index as f64 * self.dt()
    }

    /// Copy of `samples[offset..offset + len]` with the epoch moved forward.
    pub fn slice(&self, offset: usize, len: usize) -> Result<TimeSeries> {
        if len == 0 || offset + len > self.samples.len() {
            return Err(invalid(format!(
                "slice [{offset}, {}) outside series of {} samples",
                offset + len,
                self.samples.len()
            )));
        }
        let fs = self.sample_rate_hz as u64;
        let whole = offset as u64 / fs;
        let frac = offset as u64 % fs;
        let ns_total = self.start_ns as u64 + frac * 1_000_000_000 / fs;
        Ok(TimeSeries {
            detector: self.detector,
            start_s: self.start_s + whole as i64 + (ns_total / 1_000_000_000) as i64,
            start_ns: (ns_total % 1_000_000_000) as u32,
            sample_rate_hz: self.sample_rate_hz,
            samples: self.samples[offset..offset + len].to_vec(),
        })
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> TimeSeries {
        TimeSeries {
            samples,
            ..self.clone()
        }
    }
}

/// Spectral shape of the synthetic detector noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    White,
    /// `S(f) = (2σ²/fs) · (floor + (max(f, 1 Hz)/f_ref)^exponent)`.
    PowerLaw {
        f_ref_hz: f64,
        exponent: f64,
        floor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Standard deviation of the equivalent white process.
    pub sigma: f64,
}

impl NoiseModel {
    pub fn white(sigma: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::White,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::NonPositiveSigma);
        }
        if let NoiseKind::PowerLaw {
            f_ref_hz,
            exponent,
            floor,
        } = self.kind
        {
            if !(f_ref_hz > 0.0) || !exponent.is_finite() || !(floor >= 0.0) {
                return Err(invalid(
                    "power-law noise needs f_ref > 0, finite exponent, floor ≥ 0",
                ));
            }
        }
        Ok(())
    }

    /// One-sided PSD value at `f_hz` for a process sampled at `fs`.
    pub fn psd_value(&self, f_hz: f64, fs: f64) -> f64 {
        let white = 2.0 * self.sigma * self.sigma / fs;
        match self.kind {
            NoiseKind::White => white,
            NoiseKind::PowerLaw {
                f_ref_hz,
                exponent,
                floor,
            } => white * (floor + (f_hz.max(1.0) / f_ref_hz).powf(exponent)),
        }
    }

    /// Model PSD on the grid of an `n`-sample series at `fs`.
    pub fn psd_for(&self, detector: DetectorId, n: usize, fs: u32) -> PowerSpectrum {
        let df = fs as f64 / n as f64;
        let values = (0..=n / 2)
            .map(|k| self.psd_value(k as f64 * df, fs as f64))
            .collect();
        PowerSpectrum {
            detector,
            df,
            values,
            n_averages: 0,
        }
    }
}

/// 64-bit seed for one random stream.
pub fn substream_seed(master: u64, component: &str, detector: &str, part: u32) -> u64 {
    let digest = Sha256::digest(format!("{component}/{detector}/{part}").as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    master ^ u64::from_le_bytes(head)
}

/// Number of samples in `duration_s` at `sample_rate_hz`, rejecting fractions.
pub fn sample_count(duration_s: f64, sample_rate_hz: u32) -> Result<usize> {
    if !(duration_s > 0.0) {
        return Err(Error::NonPositiveDuration);
    }
    let n = duration_s * sample_rate_hz as f64;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 1.0 {
        return Err(Error::NonIntegerSampleCount(n));
    }
    Ok(rounded as usize)
}

/// Gaussian noise with the model's one-sided PSD.
pub fn generate_noise(
    model: &NoiseModel,
    detector: DetectorId,
    start_s: i64,
    duration_s: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<TimeSeries> {
    model.validate()?;
    let n = sample_count(duration_s, sample_rate_hz)?;
    let mut rng = ChaCha20Rng::seed_from_u64(substream_seed(seed, "noise", detector.as_str(), 0));
    let unit: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let samples = match model.kind {
        NoiseKind::White => unit.into_iter().map(|v| v * model.sigma).collect(),
        NoiseKind::PowerLaw { .. } => {
            // Unit white noise has PSD 2/fs; shape each bin to the target.
            let fs = sample_rate_hz as f64;
            let df = fs / n as f64;
            let mut spec = rfft(&unit);
            for (k, c) in spec.iter_mut().enumerate() {
                *c *= (model.psd_value(k as f64 * df, fs) * fs / 2.0).sqrt();
            }
            irfft(&spec, n)
        }
    };
    TimeSeries::new(detector, start_s, 0, sample_rate_hz, samples)
}

/// One simulated compact-binary signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub chirp_mass: f64,
    /// Coalescence epoch at the first detector.
    pub coalescence_time_s: f64,
    pub phase: f64,
    pub target_snr: f64,
    /// Arrival offset of the second detector relative to the first.
    pub inter_detector_delay_s: f64,
}

impl InjectionSpec {
    pub fn validate(&self, max_delay_s: f64) -> Result<()> {
        if !(self.chirp_mass > 0.0) {
            return Err(invalid("chirp_mass must be positive"));
        }
        if !(self.target_snr > 0.0) {
            return Err(invalid("target_snr must be positive"));
        }
        if !(0.0..std::f64::consts::TAU).contains(&self.phase) {
            return Err(invalid("phase must lie in [0, 2π)"));
        }
        if self.inter_detector_delay_s.abs() > max_delay_s {
            return Err(invalid(format!(
                "inter-detector delay {} s exceeds light travel time {} s",
                self.inter_detector_delay_s, max_delay_s
            )));
        }
        Ok(())
    }

    /// The same event as seen at detector `index` (0 = first).
    pub fn at_detector(&self, index: usize) -> InjectionSpec {
        let mut s = *self;
        if index > 0 {
            s.coalescence_time_s += self.inter_detector_delay_s;
        }
        s
    }
}

fn check_grid(n: usize, fs: u32, psd: &PowerSpectrum) -> Result<()> {
    let df = fs as f64 / n as f64;
    if psd.values.len() != n / 2 + 1 || (psd.df - df).abs() > 1e-9 * df {
        return Err(Error::GridMismatch(format!(
            "series needs df={df} with {} bins, PSD has df={} with {} bins",
            n / 2 + 1,
            psd.df,
            psd.values.len()
        )));
    }
    Ok(())
}

/// Optimal SNR `sqrt(4 Σ |h̃|²/S df)` of `ts` over `[f_low, Nyquist]`.
pub fn optimal_snr(ts: &TimeSeries, psd: &PowerSpectrum, f_low: f64) -> Result<f64> {
    check_grid(ts.len(), ts.sample_rate_hz, psd)?;
    let dt = ts.dt();
    let spec = rfft(&ts.samples);
    let mut acc = 0.0;
    for (k, c) in spec.iter().enumerate() {
        if k as f64 * psd.df >= f_low {
            acc += (c * dt).norm_sqr() / psd.values[k];
        }
    }
    Ok((4.0 * acc * psd.df).sqrt())
}

/// Adds the chirp described by `spec` to a copy of `ts`, scaled so its
/// optimal SNR against `psd` equals `spec.target_snr`.
pub fn inject(
    ts: &TimeSeries,
    spec: &InjectionSpec,
    psd: &PowerSpectrum,
    f_low: f64,
) -> Result<TimeSeries> {
    if !(spec.target_snr > 0.0) {
        return Err(invalid("target_snr must be positive"));
    }
    if !(spec.chirp_mass > 0.0) {
        return Err(invalid("chirp_mass must be positive"));
    }
    let n = ts.len();
    check_grid(n, ts.sample_rate_hz, psd)?;
    let t_c = spec.coalescence_time_s - ts.start_time();
    let lead = waveform::chirp_duration(spec.chirp_mass, f_low);
    if t_c - lead < 0.0 || t_c >= ts.duration() {
        return Err(Error::CoalescenceOutsideSegment);
    }
    let nyquist = ts.sample_rate_hz as f64 / 2.0;
    if f_low >= nyquist {
        return Err(Error::BandOutsideNyquist(format!(
            "f_low {f_low} Hz ≥ Nyquist {nyquist} Hz"
        )));
    }
    let mut h =
        waveform::chirp_spectrum(spec.chirp_mass, f_low, psd.df, n / 2 + 1, t_c, spec.phase);
    // a real series cannot carry a complex Nyquist bin
    if n % 2 == 0 {
        h[n / 2] = Complex64::new(0.0, 0.0);
    }
    let mut norm = 0.0;
    for (k, c) in h.iter().enumerate() {
        if c.norm_sqr() > 0.0 {
            let s = psd.values[k];
            if !(s > 0.0) {
                return Err(invalid(format!(
                    "PSD not positive at {} Hz",
                    k as f64 * psd.df
                )));
            }
            norm += c.norm_sqr() / s;
        }
    }
    let sigma = (4.0 * norm * psd.df).sqrt();
    if sigma == 0.0 {
        return Err(Error::BandOutsideNyquist(
            "waveform has no support in band".into(),
        ));
    }
    let scale = spec.target_snr / sigma / ts.dt();
    let dft: Vec<Complex64> = h.into_iter().map(|c| c * scale).collect();
    let signal = irfft(&dft, n);
    let samples = ts.samples.iter().zip(&signal).map(|(a, b)| a + b).collect();
    Ok(ts.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> DetectorId {
        DetectorId::new("H1").unwrap()
    }

    #[test]
    fn detector_tag_rules() {
        assert!(DetectorId::new("H1").is_ok());
        assert!(DetectorId::new("H").is_err());
        assert!(DetectorId::new("H1X").is_err());
        assert_eq!(DetectorId::new("L1").unwrap().to_string(), "L1");
    }

    #[test]
    fn white_noise_moments() {
        let ts = generate_noise(&NoiseModel::white(1.0), h1(), 0, 64.0, 4096, 7).unwrap();
        let n = ts.len() as f64;
        let mean = ts.samples.iter().sum::<f64>() / n;
        let var = ts.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn zero_sigma_rejected() {
        let err = generate_noise(&NoiseModel::white(0.0), h1(), 0, 1.0, 16, 1).unwrap_err();
        assert_eq!(err.to_string(), "sigma must be positive");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let m = NoiseModel::white(1.0);
        let a = generate_noise(&m, h1(), 0, 2.0, 256, 99).unwrap();
        let b = generate_noise(&m, h1(), 0, 2.0, 256, 99).unwrap();
        let bytes = |t: &TimeSeries| {
            t.samples
                .iter()
                .flat_map(|v| v.to_le_bytes())
                .collect::<Vec<_>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
        let c = generate_noise(&m, h1(), 0, 2.0, 256, 100).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn detectors_get_independent_streams() {
        let m = NoiseModel::white(1.0);
        let a = generate_noise(&m, h1(), 0, 16.0, 1024, 5).unwrap();
        let b = generate_noise(&m, DetectorId::new("L1").unwrap(), 0, 16.0, 1024, 5).unwrap();
        let n = a.len() as f64;
        let corr = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / n;
        assert!(corr.abs() < 5.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn fractional_sample_count_rejected() {
        assert!(matches!(
            sample_count(1.5, 15),
            Err(Error::NonIntegerSampleCount(_))
        ));
        assert!(matches!(
            sample_count(0.0, 16),
            Err(Error::NonPositiveDuration)
        ));
        assert_eq!(sample_count(2.0, 4096).unwrap(), 8192);
    }

    #[test]
    fn power_law_psd_is_positive_and_shaped() {
        let m = NoiseModel {
            kind: NoiseKind::PowerLaw {
                f_ref_hz: 100.0,
                exponent: -2.0,
                floor: 0.5,
            },
            sigma: 1.0,
        };
        m.validate().unwrap();
        let psd = m.psd_for(h1(), 1024, 256);
        assert!(psd.values.iter().all(|&v| v > 0.0));
        assert!(psd.values[10] > psd.values[400]);
    }

    #[test]
    fn slice_advances_epoch() {
        let ts = TimeSeries::new(h1(), 100, 0, 4, vec![0.0; 16]).unwrap();
        let s = ts.slice(6, 4).unwrap();
        assert_eq!((s.start_s, s.start_ns), (101, 500_000_000));
        assert!(ts.slice(14, 4).is_err());
    }

    #[test]
    fn injection_preconditions() {
        let ts = TimeSeries::new(h1(), 0, 0, 1024, vec![0.0; 16 * 1024]).unwrap();
        let psd = NoiseModel::white(1.0).psd_for(h1(), ts.len(), 1024);
        let mut spec = InjectionSpec {
            chirp_mass: 20.0,
            coalescence_time_s: 10.0,
            phase: 0.0,
            target_snr: 0.0,
            inter_detector_delay_s: 0.0,
        };
        assert!(inject(&ts, &spec, &psd, 20.0).is_err());
        spec.target_snr = 10.0;
        spec.coalescence_time_s = 20.0;
        assert_eq!(
            inject(&ts, &spec, &psd, 20.0).unwrap_err(),
            Error::CoalescenceOutsideSegment
        );
        spec.coalescence_time_s = 10.0;
        let coarse = NoiseModel::white(1.0).psd_for(h1(), 4096, 1024);
        assert!(matches!(
            inject(&ts, &spec, &coarse, 20.0),
            Err(Error::GridMismatch(_))
        ));
        let out = inject(&ts, &spec, &psd, 20.0).unwrap();
        assert!(
            ts.samples.iter().all(|&v| v == 0.0),
            "input must be untouched"
        );
        let snr = optimal_snr(&out, &psd, 20.0).unwrap();
        assert!((snr - 10.0).abs() < 1e-6 * 10.0, "{snr}");
    }
}
