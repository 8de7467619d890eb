//! Welch PSD estimation, whitening and PSD regridding.
//!
//! Periodograms use the one-sided density normalization
//! `P_k = c · dt · |X_k|² / Σw²` with `c = 2` for interior bins and `c = 1`
//! for DC and Nyquist, so white noise of variance σ² has `S = 2σ²/fs`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{irfft, rfft};
use crate::synth::{sample_count, DetectorId, TimeSeries};

/// One-sided noise power spectral density on `f_k = k · df`, `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub detector: DetectorId,
    pub df: f64,
    pub values: Vec<f64>,
    /// Number of Welch segments behind the estimate; 0 for analytic models.
    pub n_averages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    /// Diagnostic only (Parseval checks).
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Average {
    Median,
    Mean,
}

impl std::str::FromStr for Average {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Average::Median),
            "mean" => Ok(Average::Mean),
            other => Err(invalid(format!(
                "unknown PSD average {other:?} (median|mean)"
            ))),
        }
    }
}

impl PowerSpectrum {
    pub fn nyquist(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.df
    }

    /// Errors unless every bin in `[f_low, Nyquist]` is finite and positive.
    pub fn check_positive(&self, f_low: f64) -> Result<()> {
        for (k, &v) in self.values.iter().enumerate() {
            let f = k as f64 * self.df;
            if f >= f_low && !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("PSD not positive at {f} Hz ({v})")));
            }
        }
        Ok(())
    }

    /// Whether this spectrum lives on the rfft grid of an `n`-sample series at `fs`.
    pub fn matches_grid(&self, n: usize, fs: u32) -> bool {
        let df = fs as f64 / n as f64;
        self.values.len() == n / 2 + 1 && (self.df - df).abs() <= 1e-9 * df
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# detector={} df={} n_averages={}\nf_hz,psd\n",
            self.detector, self.df, self.n_averages
        );
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{:e}", k as f64 * self.df, v);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "PSD file",
            detail,
        };
        let mut lines = text.lines();
        let meta = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let meta = meta
            .strip_prefix("# ")
            .ok_or_else(|| bad("missing comment line".into()))?;
        let (mut detector, mut df, mut n_averages) = (None, None, None);
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("detector", v)) => detector = Some(DetectorId::new(v)?),
                Some(("df", v)) => df = v.parse::<f64>().ok(),
                Some(("n_averages", v)) => n_averages = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unexpected field {kv:?}"))),
            }
        }
        if lines.next() != Some("f_hz,psd") {
            return Err(bad("missing header f_hz,psd".into()));
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("row {i}: {line:?}")))?;
            values.push(v.parse::<f64>().map_err(|e| bad(format!("row {i}: {e}")))?);
        }
        if values.len() < 2 {
            return Err(bad("need at least two bins".into()));
        }
        Ok(PowerSpectrum {
            detector: detector.ok_or_else(|| bad("no detector".into()))?,
            df: df.ok_or_else(|| bad("no df".into()))?,
            values,
            n_averages: n_averages.ok_or_else(|| bad("no n_averages".into()))?,
        })
    }

    /// Average of spectra estimated on the same grid (e.g. PSD parts),
    /// weighted by their segment counts.
    pub fn combine(parts: &[PowerSpectrum]) -> Result<PowerSpectrum> {
        let first = parts
            .first()
            .ok_or_else(|| invalid("no spectra to combine"))?;
        let mut acc = vec![0.0; first.values.len()];
        let mut weight = 0.0;
        for p in parts {
            if p.values.len() != first.values.len()
                || p.df != first.df
                || p.detector != first.detector
            {
                return Err(Error::GridMismatch(
                    "PSD parts disagree on grid or detector".into(),
                ));
            }
            let w = p.n_averages.max(1) as f64;
            for (a, v) in acc.iter_mut().zip(&p.values) {
                *a += w * v;
            }
            weight += w;
        }
        Ok(PowerSpectrum {
            detector: first.detector,
            df: first.df,
            values: acc.into_iter().map(|a| a / weight).collect(),
            n_averages: parts.iter().map(|p| p.n_averages).sum(),
        })
    }
}

/// Expected median of `n` iid unit exponentials. Dividing a median
/// periodogram by this makes it unbiased for Gaussian noise.
pub fn median_bias(n: usize) -> f64 {
    assert!(n > 0);
    // E[X_(k)] = H_n - H_{n-k} for the k-th order statistic.
    let order_stat = |k: usize| -> f64 { (0..k).map(|i| 1.0 / (n - i) as f64).sum() };
    if n % 2 == 1 {
        order_stat(n.div_ceil(2))
    } else {
        0.5 * (order_stat(n / 2) + order_stat(n / 2 + 1))
    }
}

fn window_coefficients(window: Window, n: usize) -> Vec<f64> {
    match window {
        Window::Rectangular => vec![1.0; n],
        // periodic Hann
        Window::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
            .collect(),
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lo, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Welch estimate of the one-sided PSD of `ts`.
pub fn estimate_psd(
    ts: &TimeSeries,
    seg_len_s: f64,
    overlap_fraction: f64,
    window: Window,
    average: Average,
) -> Result<PowerSpectrum> {
    if !(0.0..=0.9).contains(&overlap_fraction) {
        return Err(Error::OverlapOutOfRange(overlap_fraction));
    }
    let fs = ts.sample_rate_hz();
    let seg = sample_count(seg_len_s, fs)?;
    if ts.len() < 2 * seg {
        return Err(Error::SeriesTooShort(format!(
            "{} s of data for {} s segments",
            ts.duration(),
            seg_len_s
        )));
    }
    let first = ts.samples[0];
    if ts.samples.iter().all(|&v| v == first) {
        return Err(Error::ZeroVariance);
    }
    let step = ((seg as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;
    let w = window_coefficients(window, seg);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let dt = ts.dt();
    let n_bins = seg / 2 + 1;
    let starts: Vec<usize> = (0..)
        .map(|i| i * step)
        .take_while(|s| s + seg <= ts.len())
        .collect();

    let mut periodograms: Vec<Vec<f64>> = Vec::with_capacity(starts.len());
    let mut buf = vec![0.0; seg];
    for &s in &starts {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = ts.samples[s + i] * w[i];
        }
        let spec = rfft(&buf);
        periodograms.push(
            spec.iter()
                .enumerate()
                .map(|(k, c)| {
                    let edge = k == 0 || (seg % 2 == 0 && k == n_bins - 1);
                    let factor = if edge { 1.0 } else { 2.0 };
                    factor * dt * c.norm_sqr() / w2
                })
                .collect(),
        );
    }

    let m = periodograms.len();
    let mut column = vec![0.0; m];
    let bias = median_bias(m);
    let values = (0..n_bins)
        .map(|k| {
            for (c, p) in column.iter_mut().zip(&periodograms) {
                *c = p[k];
            }
            match average {
                Average::Mean => column.iter().sum::<f64>() / m as f64,
                Average::Median => median_in_place(&mut column) / bias,
            }
        })
        .collect();
    Ok(PowerSpectrum {
        detector: ts.detector,
        df: fs as f64 / seg as f64,
        values,
        n_averages: m,
    })
}

/// Divides the data spectrum by `sqrt(S(f) · fs / 2)`; noise whose PSD is
/// `S` comes out with unit variance.
pub fn whiten(ts: &TimeSeries, psd: &PowerSpectrum) -> Result<TimeSeries> {
    let n = ts.len();
    if !psd.matches_grid(n, ts.sample_rate_hz()) {
        return Err(Error::GridMismatch(format!(
            "whitening {n} samples at {} Hz needs df={} ({} bins), PSD has df={} ({} bins)",
            ts.sample_rate_hz(),
            ts.sample_rate_hz() as f64 / n as f64,
            n / 2 + 1,
            psd.df,
            psd.values.len()
        )));
    }
    let half_fs = ts.sample_rate_hz() as f64 / 2.0;
    let mut spec = rfft(&ts.samples);
    for (c, &s) in spec.iter_mut().zip(&psd.values) {
        *c = if s > 0.0 {
            *c / (s * half_fs).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Ok(ts.with_samples(irfft(&spec, n)))
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() <= 1e-9 * r).then_some(rounded as usize)
}

/// Resamples `psd` onto a grid of spacing `df_target` by linear
/// interpolation of `ln S`; the DC and Nyquist values carry over unchanged.
pub fn interpolate_psd(psd: &PowerSpectrum, df_target: f64) -> Result<PowerSpectrum> {
    if !(df_target > 0.0) {
        return Err(Error::IncompatibleGrids(format!(
            "target df {df_target} must be positive"
        )));
    }
    let rational =
        integer_ratio(psd.df, df_target).is_some() || integer_ratio(df_target, psd.df).is_some();
    let n_target = match (rational, integer_ratio(psd.nyquist(), df_target)) {
        (true, Some(n)) => n,
        _ => {
            return Err(Error::IncompatibleGrids(format!(
                "df {} → {} with Nyquist {}",
                psd.df,
                df_target,
                psd.nyquist()
            )))
        }
    };
    let last = psd.values.len() - 1;
    let values = (0..=n_target)
        .map(|j| {
            if j == n_target {
                return psd.values[last];
            }
            let x = j as f64 * df_target / psd.df;
            let i = (x.floor() as usize).min(last);
            let frac = x - i as f64;
            if frac <= 1e-12 || i == last {
                return psd.values[i];
            }
            let (a, b) = (psd.values[i], psd.values[i + 1]);
            if a > 0.0 && b > 0.0 {
                ((1.0 - frac) * a.ln() + frac * b.ln()).exp()
            } else {
                (1.0 - frac) * a + frac * b
            }
        })
        .collect();
    Ok(PowerSpectrum {
        detector: psd.detector,
        df: df_target,
        values,
        n_averages: psd.n_averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_noise, NoiseModel};

    fn h1() -> DetectorId {
        DetectorId::new("H1").unwrap()
    }

    fn white(duration: f64, fs: u32, seed: u64) -> TimeSeries {
        generate_noise(&NoiseModel::white(1.0), h1(), 0, duration, fs, seed).unwrap()
    }

    #[test]
    fn median_bias_small_cases() {
        assert_eq!(median_bias(1), 1.0);
        assert!((median_bias(3) - (1.0 - 0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((median_bias(5001) - std::f64::consts::LN_2).abs() < 1e-3);
        // two samples: the median is the sample mean
        assert!((median_bias(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn white_noise_psd_level() {
        let ts = white(256.0, 4096, 11);
        let psd = estimate_psd(&ts, 4.0, 0.5, Window::Hann, Average::Median).unwrap();
        assert_eq!(psd.n_averages, 127);
        assert_eq!(psd.values.len(), 4 * 4096 / 2 + 1);
        let expected = 2.0 / 4096.0;
        let inner = &psd.values[1..psd.values.len() - 1];
        // A 127-average median has ~13% scatter per bin, so a few percent of
        // bins legitimately fall outside ±30%.
        let within = inner
            .iter()
            .filter(|&&v| (v / expected - 1.0).abs() < 0.3)
            .count();
        let frac = within as f64 / inner.len() as f64;
        assert!(frac > 0.95, "only {frac} of bins within 30%");
        let mut sorted = inner.to_vec();
        let med = median_in_place(&mut sorted);
        assert!((med / expected - 1.0).abs() < 0.1, "{med}");
    }

    #[test]
    fn sinusoid_peaks_at_its_frequency() {
        let fs = 1024u32;
        let f0 = 100.0;
        let samples: Vec<f64> = (0..8 * fs as usize)
            .map(|i| (std::f64::consts::TAU * f0 * i as f64 / fs as f64).sin())
            .collect();
        let ts = TimeSeries::new(h1(), 0, 0, fs, samples).unwrap();
        let psd = estimate_psd(&ts, 2.0, 0.5, Window::Hann, Average::Mean).unwrap();
        let (kmax, _) = psd
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(kmax as f64 * psd.df, f0);
    }

    #[test]
    fn estimator_preconditions() {
        let ts = white(16.0, 256, 1);
        assert!(matches!(
            estimate_psd(&ts, 4.0, 0.95, Window::Hann, Average::Median),
            Err(Error::OverlapOutOfRange(_))
        ));
        assert!(matches!(
            estimate_psd(&ts, 10.0, 0.5, Window::Hann, Average::Median),
            Err(Error::SeriesTooShort(_))
        ));
        let flat = TimeSeries::new(h1(), 0, 0, 256, vec![3.0; 4096]).unwrap();
        assert_eq!(
            estimate_psd(&flat, 4.0, 0.5, Window::Hann, Average::Median).unwrap_err(),
            Error::ZeroVariance
        );
    }

    #[test]
    fn parseval_per_segment() {
        let ts = white(4.0, 512, 3);
        let psd = estimate_psd(&ts, 2.0, 0.0, Window::Rectangular, Average::Mean).unwrap();
        assert_eq!(psd.n_averages, 2);
        let power = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        let expected = 0.5 * (power(&ts.samples[..1024]) + power(&ts.samples[1024..]));
        let integral: f64 = psd.values.iter().sum::<f64>() * psd.df;
        assert!((integral / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn median_estimate_invariant_under_whole_segment_rotation() {
        let ts = white(32.0, 256, 8);
        let mut rotated = ts.samples.clone();
        rotated.rotate_left(4 * 256);
        let rot = ts.with_samples(rotated);
        let a = estimate_psd(&ts, 4.0, 0.0, Window::Hann, Average::Median).unwrap();
        let b = estimate_psd(&rot, 4.0, 0.0, Window::Hann, Average::Median).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn whitening_gives_unit_variance() {
        let ts = white(256.0, 4096, 21);
        let psd = estimate_psd(&ts, 4.0, 0.5, Window::Hann, Average::Median).unwrap();
        let fine = interpolate_psd(&psd, 1.0 / 256.0).unwrap();
        let w = whiten(&ts, &fine).unwrap();
        let var = w.samples.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((0.95..=1.05).contains(&var), "{var}");
    }

    #[test]
    fn whitening_with_unit_psd_is_rescaling() {
        let ts = white(2.0, 64, 4);
        let psd = PowerSpectrum {
            detector: h1(),
            df: 0.5,
            values: vec![1.0; 65],
            n_averages: 0,
        };
        let w = whiten(&ts, &psd).unwrap();
        let scale = (64.0f64 / 2.0).sqrt();
        for (a, b) in ts.samples.iter().zip(&w.samples) {
            assert!((a / scale - b).abs() < 1e-12);
        }
        let coarse = PowerSpectrum {
            df: 1.0,
            values: vec![1.0; 33],
            ..psd
        };
        assert!(matches!(whiten(&ts, &coarse), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn interpolation_cases() {
        let psd = PowerSpectrum {
            detector: h1(),
            df: 1.0,
            values: vec![2.0, 8.0],
            n_averages: 1,
        };
        let same = interpolate_psd(&psd, 1.0).unwrap();
        assert_eq!(same.values, psd.values);
        let half = interpolate_psd(&psd, 0.5).unwrap();
        assert_eq!(half.values.len(), 3);
        assert_eq!(half.values[0], 2.0);
        assert_eq!(half.values[2], 8.0);
        assert!(
            (half.values[1] - 4.0).abs() < 1e-12,
            "geometric mean of 2 and 8"
        );

        let flat = PowerSpectrum {
            detector: h1(),
            df: 0.25,
            values: vec![3.5; 17],
            n_averages: 1,
        };
        for df in [0.125, 0.5, 1.0, 4.0] {
            let out = interpolate_psd(&flat, df).unwrap();
            assert!(out.values.iter().all(|&v| (v - 3.5).abs() < 1e-12));
        }
        assert!(matches!(
            interpolate_psd(&flat, 0.3),
            Err(Error::IncompatibleGrids(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let psd = PowerSpectrum {
            detector: h1(),
            df: 0.25,
            values: vec![1.0e-3, 4.8828125e-4, 1.0 / 3.0],
            n_averages: 63,
        };
        let text = psd.to_csv();
        assert!(text.starts_with("# detector=H1 df=0.25 n_averages=63\nf_hz,psd\n"));
        assert_eq!(PowerSpectrum::from_csv(&text).unwrap(), psd);
    }

    #[test]
    fn positivity_check() {
        let psd = PowerSpectrum {
            detector: h1(),
            df: 1.0,
            values: vec![0.0, 1.0, 0.0],
            n_averages: 1,
        };
        assert!(psd.check_positive(1.0).is_err());
        let psd = PowerSpectrum {
            values: vec![0.0, 1.0, 2.0],
            ..psd
        };
        assert!(psd.check_positive(1.0).is_ok());
    }
}
