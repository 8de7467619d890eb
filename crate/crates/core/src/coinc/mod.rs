//! Two-detector coincidence, time-slide background and significance.

mod histogram;
mod results;
mod significance;

use rayon::prelude::*;

pub use histogram::{make_histogram, HistogramBin, HistogramData, Loudest, HISTOGRAM_HEADER};
pub use results::{BackgroundRow, ForegroundRow, ResultsFile};
pub use significance::{
    far_of, p_floor, significance, statmap, DurationBins, Far, SignificanceResult, StatmapOptions,
};

use crate::error::{invalid, Error, Result};
use crate::search::Trigger;

/// Interval on which slid times are wrapped circularly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisInterval {
    pub start_s: f64,
    pub duration_s: f64,
}

impl AnalysisInterval {
    pub fn new(start_s: f64, duration_s: f64) -> Result<Self> {
        if !(duration_s > 0.0) || !start_s.is_finite() {
            return Err(Error::NonPositiveDuration);
        }
        Ok(AnalysisInterval {
            start_s,
            duration_s,
        })
    }

    pub fn wrap(&self, t: f64) -> f64 {
        self.start_s + (t - self.start_s).rem_euclid(self.duration_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincEvent {
    pub trigger_h: Trigger,
    pub trigger_l: Trigger,
    /// `wrap(t_l + shift) − t_h`.
    pub dt_s: f64,
    pub combined_stat: f64,
    /// 0 for zero-lag.
    pub slide_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlideConfig {
    pub n_slides: u32,
    pub step_s: f64,
    /// Coincident livetime of one slide.
    pub analyzed_time_s: f64,
}

impl SlideConfig {
    pub fn validate(&self, window_s: f64) -> Result<()> {
        if self.n_slides == 0 {
            return Err(invalid("n_slides must be at least 1"));
        }
        if !(self.step_s > 2.0 * window_s) {
            return Err(Error::SlidesNotIndependent {
                step_s: self.step_s,
                window_s,
            });
        }
        if !(self.analyzed_time_s > 0.0) {
            return Err(Error::NonPositiveDuration);
        }
        if self.n_slides as f64 * self.step_s > self.analyzed_time_s {
            return Err(invalid(format!(
                "{} slides of {} s exceed the analyzed time {} s",
                self.n_slides, self.step_s, self.analyzed_time_s
            )));
        }
        Ok(())
    }

    pub fn background_time_s(&self) -> f64 {
        self.n_slides as f64 * self.analyzed_time_s
    }
}

/// Background coincidences from every nonzero slide.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    /// Ordered by slide index, then as returned for that slide.
    pub events: Vec<CoincEvent>,
    pub total_time_s: f64,
}

impl Background {
    pub fn stats(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.combined_stat).collect()
    }
}

fn check_sorted(trigs: &[Trigger], which: &str) -> Result<()> {
    match trigs
        .windows(2)
        .position(|w| w[1].end_time_s < w[0].end_time_s)
    {
        Some(i) => Err(Error::UnsortedInput(format!(
            "{which} triggers out of time order at row {}",
            i + 1
        ))),
        None => Ok(()),
    }
}

fn combined(h: &Trigger, l: &Trigger) -> f64 {
    (h.stat * h.stat + l.stat * l.stat).sqrt()
}

fn coincidences_for_slide(
    trigs_h: &[Trigger],
    trigs_l: &[Trigger],
    window_s: f64,
    shift_s: f64,
    slide_index: u32,
    interval: &AnalysisInterval,
) -> Vec<CoincEvent> {
    if trigs_h.is_empty() || trigs_l.is_empty() {
        return Vec::new();
    }
    let shifted: Vec<f64> = trigs_l
        .iter()
        .map(|t| interval.wrap(t.end_time_s + shift_s))
        .collect();
    let mut order: Vec<usize> = (0..trigs_l.len()).collect();
    order.sort_by(|&a, &b| shifted[a].total_cmp(&shifted[b]).then(a.cmp(&b)));

    struct Candidate {
        h: usize,
        l: usize,
        stat: f64,
    }
    let mut candidates = Vec::new();
    for (hi, h) in trigs_h.iter().enumerate() {
        let from = order.partition_point(|&li| shifted[li] < h.end_time_s - window_s);
        for &li in &order[from..] {
            if shifted[li] > h.end_time_s + window_s {
                break;
            }
            let l = &trigs_l[li];
            if l.template_id == h.template_id && (h.end_time_s - shifted[li]).abs() <= window_s {
                candidates.push(Candidate {
                    h: hi,
                    l: li,
                    stat: combined(h, l),
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.stat
            .total_cmp(&a.stat)
            .then(trigs_h[a.h].end_time_s.total_cmp(&trigs_h[b.h].end_time_s))
            .then(shifted[a.l].total_cmp(&shifted[b.l]))
            .then(trigs_h[a.h].template_id.cmp(&trigs_h[b.h].template_id))
            .then(a.h.cmp(&b.h))
            .then(a.l.cmp(&b.l))
    });
    let mut used_h = vec![false; trigs_h.len()];
    let mut used_l = vec![false; trigs_l.len()];
    let mut out = Vec::new();
    for c in candidates {
        if used_h[c.h] || used_l[c.l] {
            continue;
        }
        used_h[c.h] = true;
        used_l[c.l] = true;
        out.push(CoincEvent {
            trigger_h: trigs_h[c.h],
            trigger_l: trigs_l[c.l],
            dt_s: shifted[c.l] - trigs_h[c.h].end_time_s,
            combined_stat: c.stat,
            slide_index,
        });
    }
    out.sort_by(|a, b| {
        a.trigger_h
            .end_time_s
            .total_cmp(&b.trigger_h.end_time_s)
            .then(a.trigger_h.template_id.cmp(&b.trigger_h.template_id))
    });
    out
}

/// Pairs same-template triggers with `|t_h − wrap(t_l + shift_s)| ≤ window_s`,
/// each trigger used at most once (greedy, loudest pair first). Events come
/// back ordered by H time and carry slide index 0.
pub fn find_coincidences(
    trigs_h: &[Trigger],
    trigs_l: &[Trigger],
    window_s: f64,
    shift_s: f64,
    interval: &AnalysisInterval,
) -> Result<Vec<CoincEvent>> {
    if !(window_s > 0.0) {
        return Err(invalid(format!(
            "coincidence window must be positive, got {window_s}"
        )));
    }
    check_sorted(trigs_h, "first-detector")?;
    check_sorted(trigs_l, "second-detector")?;
    Ok(coincidences_for_slide(
        trigs_h, trigs_l, window_s, shift_s, 0, interval,
    ))
}

/// Coincidences at shifts `k · step_s`, `k = 1..=n_slides`.
pub fn estimate_background(
    trigs_h: &[Trigger],
    trigs_l: &[Trigger],
    window_s: f64,
    slides: &SlideConfig,
    interval: &AnalysisInterval,
) -> Result<Background> {
    if !(window_s > 0.0) {
        return Err(invalid(format!(
            "coincidence window must be positive, got {window_s}"
        )));
    }
    slides.validate(window_s)?;
    check_sorted(trigs_h, "first-detector")?;
    check_sorted(trigs_l, "second-detector")?;
    let per_slide: Vec<Vec<CoincEvent>> = (1..=slides.n_slides)
        .into_par_iter()
        .map(|k| {
            coincidences_for_slide(
                trigs_h,
                trigs_l,
                window_s,
                k as f64 * slides.step_s,
                k,
                interval,
            )
        })
        .collect();
    Ok(Background {
        events: per_slide.into_iter().flatten().collect(),
        total_time_s: slides.background_time_s(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::DetectorId;

    fn trig(det: &str, t: f64, id: u32, stat: f64) -> Trigger {
        Trigger::new(DetectorId::new(det).unwrap(), id, t, stat, 0.5)
    }

    fn interval() -> AnalysisInterval {
        AnalysisInterval::new(0.0, 100.0).unwrap()
    }

    #[test]
    fn single_pair_combines_in_quadrature() {
        let h = [trig("H1", 1.000, 4, 8.0)];
        let l = [trig("L1", 1.005, 4, 7.0)];
        let ev = find_coincidences(&h, &l, 0.015, 0.0, &interval()).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].combined_stat - 10.630145812734649).abs() < 1e-12);
        assert!((ev[0].dt_s - 0.005).abs() < 1e-12);
        assert_eq!(ev[0].slide_index, 0);
    }

    #[test]
    fn template_must_match_and_empty_lists() {
        let h = [trig("H1", 1.0, 1, 8.0), trig("H1", 5.0, 2, 8.0)];
        let l = [trig("L1", 1.0, 3, 8.0), trig("L1", 5.0, 4, 8.0)];
        assert!(find_coincidences(&h, &l, 0.015, 0.0, &interval())
            .unwrap()
            .is_empty());
        assert!(find_coincidences(&h, &[], 0.015, 0.0, &interval())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn greedy_pairing_uses_each_trigger_once() {
        let h = [trig("H1", 10.0, 0, 6.0), trig("H1", 10.01, 0, 9.0)];
        let l = [trig("L1", 10.005, 0, 7.0)];
        let ev = find_coincidences(&h, &l, 0.015, 0.0, &interval()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].trigger_h.stat, 9.0);
    }

    #[test]
    fn shifted_times_wrap_around_the_interval() {
        let h = [trig("H1", 0.05, 0, 6.0)];
        let l = [trig("L1", 99.95, 0, 6.0)];
        let ev = find_coincidences(&h, &l, 0.015, 0.1, &interval()).unwrap();
        assert_eq!(ev.len(), 1);
        assert!(ev[0].dt_s.abs() < 1e-9);
    }

    #[test]
    fn unsorted_input_rejected() {
        let h = [trig("H1", 2.0, 0, 6.0), trig("H1", 1.0, 0, 6.0)];
        assert!(matches!(
            find_coincidences(&h, &h, 0.015, 0.0, &interval()),
            Err(Error::UnsortedInput(_))
        ));
    }

    #[test]
    fn background_preconditions_and_empty_case() {
        let slides = SlideConfig {
            n_slides: 10,
            step_s: 0.1,
            analyzed_time_s: 100.0,
        };
        let h = [trig("H1", 10.0, 0, 6.0)];
        let l = [trig("L1", 50.0, 1, 6.0)];
        let bg = estimate_background(&h, &l, 0.015, &slides, &interval()).unwrap();
        assert!(bg.events.is_empty());
        assert_eq!(bg.total_time_s, 1000.0);
        let close = SlideConfig {
            step_s: 0.03,
            ..slides
        };
        let err = estimate_background(&h, &l, 0.015, &close, &interval()).unwrap_err();
        assert!(
            err.to_string().starts_with("slides not independent"),
            "{err}"
        );
    }

    #[test]
    fn background_excludes_zero_lag() {
        let slides = SlideConfig {
            n_slides: 3,
            step_s: 0.1,
            analyzed_time_s: 100.0,
        };
        let h = [trig("H1", 10.2, 0, 6.0)];
        let l = [trig("L1", 10.0, 0, 6.0), trig("L1", 10.2, 0, 7.0)];
        let bg = estimate_background(&h, &l, 0.015, &slides, &interval()).unwrap();
        // only k=2 aligns 10.0 with 10.2
        assert_eq!(bg.events.len(), 1);
        assert_eq!(bg.events[0].slide_index, 2);
    }
}
