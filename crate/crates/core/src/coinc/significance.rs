use std::collections::HashMap;

use super::{Background, CoincEvent, SlideConfig};
use crate::error::{invalid, Result};
use crate::normal::sigma_from_p;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Far {
    pub far_per_s: f64,
    pub n_louder: usize,
    pub is_lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    pub combined_stat: f64,
    pub far_per_s: f64,
    pub p_value: f64,
    pub sigma: f64,
    /// Set when no background event is as loud, or `p` hit the floor.
    pub is_lower_bound: bool,
}

/// `(1 + n_louder) / T`, counting background events with stat `>= stat`.
pub fn far_of(stat: f64, background: &[f64], total_background_time_s: f64) -> Far {
    let n_louder = background.iter().filter(|&&b| b >= stat).count();
    Far {
        far_per_s: (1 + n_louder) as f64 / total_background_time_s,
        n_louder,
        is_lower_bound: n_louder == 0,
    }
}

/// Smallest reportable p-value: one tenth of one over the number of
/// independent foreground-length trials in the background.
pub fn p_floor(slides: &SlideConfig, foreground_time_s: f64) -> f64 {
    1.0 / (10.0 * slides.n_slides as f64 * slides.analyzed_time_s / foreground_time_s)
}

/// `p = 1 − exp(−far·T)` and its one-sided Gaussian sigma. With
/// `p_min`, smaller p-values are clamped and flagged (third element).
pub fn significance(
    far_per_s: f64,
    foreground_time_s: f64,
    p_min: Option<f64>,
) -> (f64, f64, bool) {
    let p = -(-far_per_s * foreground_time_s).exp_m1();
    match p_min {
        Some(floor) if p < floor => (floor, sigma_from_p(floor), true),
        _ => (p, sigma_from_p(p), false),
    }
}

/// Template-duration bins for `distribute_background_bins`. Each event is
/// ranked only against background in its own bin and its FAR is multiplied
/// by the number of bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationBins {
    /// Ascending interior edges in seconds; `k` edges make `k + 1` bins.
    pub edges: Vec<f64>,
    pub template_durations: HashMap<u32, f64>,
}

impl DurationBins {
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin_of(&self, template_id: u32) -> Result<usize> {
        let d = self
            .template_durations
            .get(&template_id)
            .ok_or_else(|| invalid(format!("no duration for template {template_id}")))?;
        Ok(self.edges.partition_point(|e| e <= d))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatmapOptions {
    /// Rank the loudest foreground event against a background with its own
    /// triggers removed.
    pub remove_loudest: bool,
    pub bins: Option<DurationBins>,
}

fn shares_trigger(a: &CoincEvent, b: &CoincEvent) -> bool {
    a.trigger_h == b.trigger_h || a.trigger_l == b.trigger_l
}

/// Index of the loudest event (earliest on ties).
fn loudest(foreground: &[CoincEvent]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in foreground.iter().enumerate() {
        match best {
            Some(b) if foreground[b].combined_stat >= e.combined_stat => {}
            _ => best = Some(i),
        }
    }
    best
}

/// FAR, p-value and sigma of every foreground event, in input order.
pub fn statmap(
    foreground: &[CoincEvent],
    background: &Background,
    slides: &SlideConfig,
    foreground_time_s: f64,
    options: &StatmapOptions,
) -> Result<Vec<SignificanceResult>> {
    if !(foreground_time_s > 0.0) {
        return Err(crate::Error::NonPositiveDuration);
    }
    let floor = p_floor(slides, foreground_time_s);
    let n_bins = options.bins.as_ref().map_or(1, |b| b.n_bins());
    let bin_of = |e: &CoincEvent| -> Result<usize> {
        match &options.bins {
            Some(b) => b.bin_of(e.trigger_h.template_id),
            None => Ok(0),
        }
    };
    let mut by_bin: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for e in &background.events {
        by_bin[bin_of(e)?].push(e.combined_stat);
    }
    let removed = if options.remove_loudest {
        loudest(foreground)
    } else {
        None
    };

    foreground
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let bin = bin_of(e)?;
            let far = if Some(i) == removed {
                let mut stats = Vec::new();
                for b in &background.events {
                    if !shares_trigger(b, e) && bin_of(b)? == bin {
                        stats.push(b.combined_stat);
                    }
                }
                far_of(e.combined_stat, &stats, background.total_time_s)
            } else {
                far_of(e.combined_stat, &by_bin[bin], background.total_time_s)
            };
            let far_per_s = far.far_per_s * n_bins as f64;
            let (p_value, sigma, clamped) = significance(far_per_s, foreground_time_s, Some(floor));
            Ok(SignificanceResult {
                combined_stat: e.combined_stat,
                far_per_s,
                p_value,
                sigma,
                is_lower_bound: far.is_lower_bound || clamped,
            })
        })
        .collect()
}
