//! Template bank, matched filtering, chi-squared veto and trigger handling.

mod bank;
mod cluster;
mod filter;
mod trigger;

use rayon::prelude::*;

pub use bank::{build_bank, split_bank, Template};
pub use cluster::cluster_indices;
pub use filter::{chisq_veto, matched_filter, FilterSegment, SnrSeries};
pub use trigger::{
    merge_triggers, reweight, sort_triggers, triggers_from_csv, triggers_to_csv, MergedTriggers,
    Trigger, TRIGGER_HEADER,
};

use crate::error::{invalid, Result};
use crate::spectral::{interpolate_psd, whiten, PowerSpectrum};
use crate::synth::{sample_count, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub f_low: f64,
    pub snr_threshold: f64,
    pub chisq_bins: usize,
    pub cluster_window_s: f64,
    /// FFT block length; must give a power-of-two sample count.
    pub block_s: f64,
    /// Samples discarded at each block edge (circular wraparound).
    pub guard_s: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            f_low: 20.0,
            snr_threshold: 5.5,
            chisq_bins: 16,
            cluster_window_s: 1.0,
            block_s: 64.0,
            guard_s: 8.0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_low > 0.0) {
            return Err(invalid(format!(
                "f_low must be positive, got {}",
                self.f_low
            )));
        }
        if !(self.snr_threshold > 0.0) {
            return Err(invalid(format!(
                "snr_threshold must be positive, got {}",
                self.snr_threshold
            )));
        }
        if self.chisq_bins < 2 {
            return Err(crate::Error::TooFewBins(self.chisq_bins));
        }
        if !(self.cluster_window_s > 0.0) {
            return Err(invalid("cluster_window_s must be positive"));
        }
        if !(self.guard_s >= 0.0) || !(self.block_s > 2.0 * self.guard_s) {
            return Err(invalid(format!(
                "block_s {} must exceed twice guard_s {}",
                self.block_s, self.guard_s
            )));
        }
        Ok(())
    }
}

/// A filtering block: FFT window start and the sample range it reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    start: usize,
    keep: (usize, usize),
}

/// Tiles `[a, b)` with blocks of `len` samples whose outer `guard` samples
/// are discarded. The last block is end-aligned when the step overshoots.
fn plan_blocks(a: usize, b: usize, len: usize, guard: usize) -> Vec<Block> {
    let step = len - 2 * guard;
    let mut out = Vec::new();
    let mut covered = a;
    while covered < b {
        let mut start = covered - guard;
        if start + len - guard > b {
            start = (b + guard).saturating_sub(len);
        }
        let keep_end = (start + len - guard).min(b);
        out.push(Block {
            start,
            keep: (covered, keep_end),
        });
        covered = keep_end;
        debug_assert!(keep_end - out.last().unwrap().keep.0 <= step);
    }
    out
}

/// Runs the bank over the epoch span `[span_start, span_end)` of `strain`
/// and returns clustered, reweighted triggers sorted by (time, template).
///
/// The strain must extend at least `guard_s` beyond the span on both sides.
/// `psd` may be on any grid rationally related to the block grid.
pub fn inspiral(
    strain: &TimeSeries,
    psd: &PowerSpectrum,
    bank: &[Template],
    span: (f64, f64),
    params: &SearchParams,
) -> Result<Vec<Trigger>> {
    params.validate()?;
    let fs = strain.sample_rate_hz();
    let block_len = sample_count(params.block_s, fs)?;
    let guard = (params.guard_s * fs as f64).round() as usize;
    let to_index = |t: f64| ((t - strain.start_time()) * fs as f64).round();
    let (a, b) = (to_index(span.0), to_index(span.1));
    if !(a >= guard as f64 && b > a && b + guard as f64 <= strain.len() as f64) {
        return Err(invalid(format!(
            "span [{}, {}) needs {} s of data on each side inside the strain segment",
            span.0, span.1, params.guard_s
        )));
    }
    let (a, b) = (a as usize, b as usize);
    if strain.len() < block_len {
        return Err(crate::Error::SeriesTooShort(format!(
            "{} s of strain for {} s blocks",
            strain.duration(),
            params.block_s
        )));
    }
    let block_psd = interpolate_psd(psd, fs as f64 / block_len as f64)?;
    let blocks = plan_blocks(a, b, block_len, guard);
    let segments: Vec<FilterSegment> = blocks
        .par_iter()
        .map(|blk| {
            let raw = strain.slice(blk.start, block_len)?;
            FilterSegment::new(&whiten(&raw, &block_psd)?, &block_psd, params.f_low)
        })
        .collect::<Result<_>>()?;
    let window = (params.cluster_window_s * fs as f64).round() as usize;

    let per_template: Vec<Vec<Trigger>> = bank
        .par_iter()
        .map(|template| {
            let mut values = Vec::with_capacity(b - a);
            let mut owner = Vec::with_capacity(b - a);
            for (bi, (blk, seg)) in blocks.iter().zip(&segments).enumerate() {
                let snr = seg.filter(template)?;
                for j in blk.keep.0..blk.keep.1 {
                    values.push(snr.samples[j - blk.start].norm());
                    owner.push(bi);
                }
            }
            cluster_indices(&values, params.snr_threshold, window)
                .into_iter()
                .map(|k| {
                    let bi = owner[k];
                    let global = a + k;
                    let chisq = segments[bi].chisq(
                        template,
                        global - blocks[bi].start,
                        params.chisq_bins,
                    )?;
                    Ok(Trigger::new(
                        strain.detector,
                        template.id,
                        strain.time_at(global),
                        values[k],
                        chisq,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut triggers: Vec<Trigger> = per_template.into_iter().flatten().collect();
    sort_triggers(&mut triggers);
    Ok(triggers)
}
