use std::fmt::Write as _;

use super::SignificanceResult;
use crate::error::{invalid, Result};
use crate::format::sig9;

pub const HISTOGRAM_HEADER: &str = "bin_left,fg_count,mean_bg_per_trial";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub fg_count: usize,
    pub mean_bg_per_trial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loudest {
    pub combined_stat: f64,
    pub sigma: f64,
    pub is_lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramData {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
    pub loudest: Option<Loudest>,
}

impl HistogramData {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{HISTOGRAM_HEADER}\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{}",
                sig9(b.left),
                b.fg_count,
                sig9(b.mean_bg_per_trial)
            );
        }
        out
    }
}

/// Left-closed bins of `bin_width` covering `[lo, hi)`; values outside are
/// dropped. Background counts are divided by `n_slides`.
pub fn make_histogram(
    foreground: &[SignificanceResult],
    background: &[f64],
    n_slides: u32,
    bin_width: f64,
    range: (f64, f64),
) -> Result<HistogramData> {
    let (lo, hi) = range;
    if !(bin_width > 0.0) || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!(
            "histogram needs bin_width > 0 and lo < hi, got {bin_width}, [{lo}, {hi})"
        )));
    }
    if n_slides == 0 {
        return Err(invalid("histogram needs at least one slide"));
    }
    let n = ((hi - lo) / bin_width - 1e-9).ceil().max(1.0) as usize;
    let edge = |i: usize| lo + i as f64 * bin_width;
    let index = |x: f64| -> Option<usize> {
        if !(x >= lo) || x >= edge(n) {
            return None;
        }
        let mut i = (((x - lo) / bin_width).floor() as usize).min(n - 1);
        // floor can land one off next to an edge
        while i > 0 && x < edge(i) {
            i -= 1;
        }
        while i + 1 < n && x >= edge(i + 1) {
            i += 1;
        }
        Some(i)
    };
    let mut fg = vec![0usize; n];
    let mut bg = vec![0usize; n];
    for r in foreground {
        if let Some(i) = index(r.combined_stat) {
            fg[i] += 1;
        }
    }
    for &b in background {
        if let Some(i) = index(b) {
            bg[i] += 1;
        }
    }
    let bins = (0..n)
        .map(|i| HistogramBin {
            left: edge(i),
            fg_count: fg[i],
            mean_bg_per_trial: bg[i] as f64 / n_slides as f64,
        })
        .collect();
    let loudest = foreground
        .iter()
        .fold(None::<&SignificanceResult>, |best, r| match best {
            Some(b) if b.combined_stat >= r.combined_stat => Some(b),
            _ => Some(r),
        })
        .map(|r| Loudest {
            combined_stat: r.combined_stat,
            sigma: r.sigma,
            is_lower_bound: r.is_lower_bound,
        });
    Ok(HistogramData {
        bin_width,
        bins,
        loudest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fg(stat: f64) -> SignificanceResult {
        SignificanceResult {
            combined_stat: stat,
            far_per_s: 1.0,
            p_value: 0.5,
            sigma: 0.0,
            is_lower_bound: false,
        }
    }

    #[test]
    fn empty_inputs_give_zero_bins() {
        let h = make_histogram(&[], &[], 10, 0.2, (8.0, 9.0)).unwrap();
        assert_eq!(h.bins.len(), 5);
        assert!(h
            .bins
            .iter()
            .all(|b| b.fg_count == 0 && b.mean_bg_per_trial == 0.0));
        assert!(h.loudest.is_none());
    }

    #[test]
    fn event_lands_in_its_bin() {
        let h = make_histogram(&[fg(9.05)], &[], 10, 0.2, (8.0, 10.0)).unwrap();
        let hit: Vec<_> = h.bins.iter().filter(|b| b.fg_count > 0).collect();
        assert_eq!(hit.len(), 1);
        assert!((hit[0].left - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mean_background_per_trial() {
        let bg = vec![8.1; 20];
        let h = make_histogram(&[], &bg, 10, 0.2, (8.0, 9.0)).unwrap();
        assert_eq!(h.bins[0].mean_bg_per_trial, 2.0);
        assert_eq!(
            h.bins[1..].iter().map(|b| b.mean_bg_per_trial).sum::<f64>(),
            0.0
        );
    }

    #[test]
    fn bins_are_left_closed() {
        let h = make_histogram(&[fg(8.2), fg(8.4), fg(9.0)], &[], 1, 0.2, (8.0, 9.0)).unwrap();
        let counts: Vec<usize> = h.bins.iter().map(|b| b.fg_count).collect();
        assert_eq!(counts, vec![0, 1, 1, 0, 0]);
        assert!(h
            .to_csv()
            .starts_with("bin_left,fg_count,mean_bg_per_trial\n8.00000000,0,0\n8.20000000,1,0\n"));
    }
}
