//! Text results file: a metadata comment, a `[foreground]` CSV and a
//! `[background]` CSV.

use std::fmt::Write as _;

use super::{CoincEvent, SignificanceResult, SlideConfig};
use crate::error::{Error, Result};
use crate::format::{sig9, time9};
use crate::search::Trigger;
use crate::synth::DetectorId;

const FOREGROUND_HEADER: &str =
    "template_id,time_h,time_l,snr_h,chisq_r_h,stat_h,snr_l,chisq_r_l,stat_l,dt_s,\
combined_stat,far_per_s,p_value,sigma,is_lower_bound";
const BACKGROUND_HEADER: &str = "combined_stat,slide_index";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForegroundRow {
    pub event: CoincEvent,
    pub result: SignificanceResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundRow {
    pub combined_stat: f64,
    pub slide_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsFile {
    pub detectors: [DetectorId; 2],
    pub slides: SlideConfig,
    pub background_time_s: f64,
    pub foreground_time_s: f64,
    /// Loudest first.
    pub foreground: Vec<ForegroundRow>,
    /// By slide, then loudest first within a slide.
    pub background: Vec<BackgroundRow>,
}

impl ResultsFile {
    /// Orders rows canonically so equal analyses give equal bytes.
    pub fn new(
        detectors: [DetectorId; 2],
        slides: SlideConfig,
        foreground_time_s: f64,
        foreground: Vec<ForegroundRow>,
        background: &[CoincEvent],
    ) -> Self {
        let mut foreground = foreground;
        foreground.sort_by(|a, b| {
            b.event
                .combined_stat
                .total_cmp(&a.event.combined_stat)
                .then(
                    a.event
                        .trigger_h
                        .end_time_s
                        .total_cmp(&b.event.trigger_h.end_time_s),
                )
                .then(
                    a.event
                        .trigger_h
                        .template_id
                        .cmp(&b.event.trigger_h.template_id),
                )
        });
        let mut background: Vec<BackgroundRow> = background
            .iter()
            .map(|e| BackgroundRow {
                combined_stat: e.combined_stat,
                slide_index: e.slide_index,
            })
            .collect();
        background.sort_by(|a, b| {
            a.slide_index
                .cmp(&b.slide_index)
                .then(b.combined_stat.total_cmp(&a.combined_stat))
        });
        ResultsFile {
            detectors,
            slides,
            background_time_s: slides.background_time_s(),
            foreground_time_s,
            foreground,
            background,
        }
    }

    pub fn background_stats(&self) -> Vec<f64> {
        self.background.iter().map(|b| b.combined_stat).collect()
    }

    pub fn foreground_results(&self) -> Vec<SignificanceResult> {
        self.foreground.iter().map(|r| r.result).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# detectors={},{} n_slides={} slide_step_s={} analyzed_time_s={} background_time_s={} foreground_time_s={}\n",
            self.detectors[0],
            self.detectors[1],
            self.slides.n_slides,
            self.slides.step_s,
            self.slides.analyzed_time_s,
            self.background_time_s,
            self.foreground_time_s
        );
        out.push_str("[foreground]\n");
        out.push_str(FOREGROUND_HEADER);
        out.push('\n');
        for row in &self.foreground {
            let (e, r) = (&row.event, &row.result);
            let (h, l) = (&e.trigger_h, &e.trigger_l);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                h.template_id,
                time9(h.end_time_s),
                time9(l.end_time_s),
                sig9(h.snr),
                sig9(h.chisq_r),
                sig9(h.stat),
                sig9(l.snr),
                sig9(l.chisq_r),
                sig9(l.stat),
                sig9(e.dt_s),
                sig9(e.combined_stat),
                sig9(r.far_per_s),
                sig9(r.p_value),
                sig9(r.sigma),
                r.is_lower_bound
            );
        }
        out.push_str("[background]\n");
        out.push_str(BACKGROUND_HEADER);
        out.push('\n');
        for b in &self.background {
            let _ = writeln!(out, "{},{}", sig9(b.combined_stat), b.slide_index);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "results file",
            detail,
        };
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| bad("missing metadata comment line".into()))?;
        let mut detectors = None;
        let (mut n_slides, mut step, mut analyzed, mut bg_time, mut fg_time) =
            (None, None, None, None, None);
        for kv in meta.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("bad metadata field {kv:?}")))?;
            let num = || v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
            match k {
                "detectors" => {
                    let (a, b) = v
                        .split_once(',')
                        .ok_or_else(|| bad("detectors needs two tags".into()))?;
                    detectors = Some([a.parse()?, b.parse()?]);
                }
                "n_slides" => {
                    n_slides = Some(v.parse::<u32>().map_err(|e| bad(format!("{k}: {e}")))?)
                }
                "slide_step_s" => step = Some(num()?),
                "analyzed_time_s" => analyzed = Some(num()?),
                "background_time_s" => bg_time = Some(num()?),
                "foreground_time_s" => fg_time = Some(num()?),
                _ => return Err(bad(format!("unknown metadata field {k:?}"))),
            }
        }
        let detectors: [DetectorId; 2] = detectors.ok_or_else(|| bad("no detectors".into()))?;
        let missing = |name: &str| bad(format!("missing {name}"));
        let slides = SlideConfig {
            n_slides: n_slides.ok_or_else(|| missing("n_slides"))?,
            step_s: step.ok_or_else(|| missing("slide_step_s"))?,
            analyzed_time_s: analyzed.ok_or_else(|| missing("analyzed_time_s"))?,
        };
        if lines.next() != Some("[foreground]") || lines.next() != Some(FOREGROUND_HEADER) {
            return Err(bad("missing [foreground] section".into()));
        }
        let mut foreground = Vec::new();
        let mut line = lines.next();
        while let Some(l) = line {
            if l == "[background]" {
                break;
            }
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 15 {
                return Err(bad(format!("foreground row has {} fields: {l:?}", f.len())));
            }
            let num = |i: usize| {
                f[i].parse::<f64>()
                    .map_err(|e| bad(format!("foreground column {i}: {e}")))
            };
            let template_id = f[0]
                .parse::<u32>()
                .map_err(|e| bad(format!("template_id: {e}")))?;
            let trigger_h = Trigger {
                detector: detectors[0],
                template_id,
                end_time_s: num(1)?,
                snr: num(3)?,
                chisq_r: num(4)?,
                stat: num(5)?,
            };
            let trigger_l = Trigger {
                detector: detectors[1],
                template_id,
                end_time_s: num(2)?,
                snr: num(6)?,
                chisq_r: num(7)?,
                stat: num(8)?,
            };
            let combined_stat = num(10)?;
            foreground.push(ForegroundRow {
                event: CoincEvent {
                    trigger_h,
                    trigger_l,
                    dt_s: num(9)?,
                    combined_stat,
                    slide_index: 0,
                },
                result: SignificanceResult {
                    combined_stat,
                    far_per_s: num(11)?,
                    p_value: num(12)?,
                    sigma: num(13)?,
                    is_lower_bound: f[14]
                        .parse()
                        .map_err(|e| bad(format!("is_lower_bound: {e}")))?,
                },
            });
            line = lines.next();
        }
        if line.is_none() || lines.next() != Some(BACKGROUND_HEADER) {
            return Err(bad("missing [background] section".into()));
        }
        let mut background = Vec::new();
        for l in lines {
            let (s, k) = l
                .split_once(',')
                .ok_or_else(|| bad(format!("background row {l:?}")))?;
            background.push(BackgroundRow {
                combined_stat: s.parse().map_err(|e| bad(format!("combined_stat: {e}")))?,
                slide_index: k.parse().map_err(|e| bad(format!("slide_index: {e}")))?,
            });
        }
        Ok(ResultsFile {
            detectors,
            slides,
            background_time_s: bg_time.ok_or_else(|| missing("background_time_s"))?,
            foreground_time_s: fg_time.ok_or_else(|| missing("foreground_time_s"))?,
            foreground,
            background,
        })
    }
}
