//! The science behind each planned transformation, plus synthetic data
//! generation and the in-process workflow run.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use gwrepro_core::coinc::{
    estimate_background, find_coincidences, make_histogram, statmap, DurationBins, ForegroundRow,
    HistogramData, ResultsFile, StatmapOptions,
};
use gwrepro_core::search::{
    inspiral, merge_triggers, split_bank, triggers_from_csv, triggers_to_csv, Trigger,
};
use gwrepro_core::spectral::{estimate_psd, PowerSpectrum, Window};
use gwrepro_core::strain_io::{decode_strain, encode_strain, sha256_hex};
use gwrepro_core::synth::{generate_noise, inject, DetectorId, TimeSeries};
use gwrepro_wfengine::plan::{
    merged_path, psd_path, strain_path, BINNED_PATH, HIST_CSV_PATH, HIST_SVG_PATH, STATMAP_PATH,
};
use gwrepro_wfengine::{
    execute, parse_labels, plan, Dag, ExecConfig, Execution, FileStore, NodeSpec, StageOutput,
    StageRunner, TaskSpec,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg::render_histogram_svg;

/// Virtual seconds charged per unit of work, so "wall time" in the report
/// is independent of the machine.
mod cost {
    pub const PSD_PER_AVERAGE_S: f64 = 1.0;
    pub const INSPIRAL_PER_TEMPLATE_SECOND_S: f64 = 2.0;
    pub const MERGE_PER_INPUT_S: f64 = 5.0;
    pub const STATMAP_BASE_S: f64 = 60.0;
    pub const STATMAP_PER_SLIDE_S: f64 = 0.5;
    pub const PLOT_S: f64 = 20.0;
}

/// Synthetic strain for both detectors: seeded noise plus the configured
/// injection, scaled against the true noise PSD.
pub fn generate_strain(cfg: &RunConfig) -> gwrepro_core::Result<Vec<TimeSeries>> {
    cfg.detectors
        .iter()
        .enumerate()
        .map(|(i, &det)| {
            let noise = generate_noise(
                &cfg.noise,
                det,
                cfg.start_s,
                cfg.duration_s,
                cfg.sample_rate_hz,
                cfg.seed,
            )?;
            match &cfg.injection {
                Some(spec) => {
                    let psd = cfg.noise.psd_for(det, noise.len(), cfg.sample_rate_hz);
                    inject(&noise, &spec.at_detector(i), &psd, cfg.search.f_low)
                }
                None => Ok(noise),
            }
        })
        .collect()
}

/// Encoded strain files keyed by their workflow path.
pub fn strain_files(cfg: &RunConfig) -> Result<BTreeMap<String, Vec<u8>>, CliError> {
    let series =
        generate_strain(cfg).map_err(|e| CliError::execution(format!("generating strain: {e}")))?;
    series
        .iter()
        .map(|ts| {
            let (bytes, _) = encode_strain(ts)
                .map_err(|e| CliError::execution(format!("encoding strain: {e}")))?;
            Ok((strain_path(ts.detector.as_str()), bytes))
        })
        .collect()
}

pub fn manifest(files: &BTreeMap<String, Vec<u8>>) -> String {
    files
        .iter()
        .map(|(path, bytes)| format!("{path}\t{}\n", sha256_hex(bytes)))
        .collect()
}

/// Runs stages for one configuration.
pub struct PipelineRunner {
    cfg: RunConfig,
    template_durations: HashMap<u32, f64>,
}

impl PipelineRunner {
    pub fn new(cfg: RunConfig) -> Self {
        let template_durations = cfg
            .bank()
            .map(|b| b.iter().map(|t| (t.id, t.duration_s)).collect())
            .unwrap_or_default();
        PipelineRunner {
            cfg,
            template_durations,
        }
    }

    fn detector(&self, task: &TaskSpec) -> Result<DetectorId, String> {
        let label = parse_labels(&task.id)
            .detector
            .ok_or_else(|| format!("no detector in task id {}", task.id))?;
        self.cfg
            .detectors
            .iter()
            .copied()
            .find(|d| d.as_str() == label)
            .ok_or_else(|| format!("detector {label} is not configured"))
    }

    fn calculate_psd(&self, task: &TaskSpec, inputs: &Inputs) -> Result<StageOutput, String> {
        let det = self.detector(task)?;
        let part = parse_labels(&task.id)
            .part
            .ok_or("no PSD part in task id")?;
        let strain =
            decode_strain(inputs.get(&strain_path(det.as_str()))?).map_err(|e| e.to_string())?;
        let len = strain.len() / self.cfg.psd.parts as usize;
        let piece = strain
            .slice(part as usize * len, len)
            .map_err(|e| e.to_string())?;
        let psd = estimate_psd(
            &piece,
            self.cfg.psd.segment_s,
            self.cfg.psd.overlap,
            Window::Hann,
            self.cfg.psd.average,
        )
        .map_err(|e| e.to_string())?;
        let cost = psd.n_averages as f64 * cost::PSD_PER_AVERAGE_S;
        Ok(single(&task.outputs[0], psd.to_csv().into_bytes(), cost))
    }

    fn inspiral(&self, task: &TaskSpec, inputs: &Inputs) -> Result<StageOutput, String> {
        let det = self.detector(task)?;
        let labels = parse_labels(&task.id);
        let (seg, bank_part) = (
            labels.segment.ok_or("no segment in task id")?,
            labels.bank.ok_or("no bank part in task id")?,
        );
        let strain =
            decode_strain(inputs.get(&strain_path(det.as_str()))?).map_err(|e| e.to_string())?;
        let parts = (0..self.cfg.psd.parts)
            .map(|p| {
                PowerSpectrum::from_csv(inputs.text(&psd_path(det.as_str(), p))?)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let psd = PowerSpectrum::combine(&parts).map_err(|e| e.to_string())?;
        let bank = self.cfg.bank().map_err(|e| e.to_string())?;
        let templates = split_bank(&bank, self.cfg.bank.parts as usize)
            .into_iter()
            .nth(bank_part as usize)
            .ok_or_else(|| format!("bank part {bank_part} out of range"))?;
        let span = self.cfg.segment_span(seg);
        let triggers = inspiral(&strain, &psd, &templates, span, &self.cfg.search)
            .map_err(|e| e.to_string())?;
        let cost =
            (span.1 - span.0) * templates.len() as f64 * cost::INSPIRAL_PER_TEMPLATE_SECOND_S;
        Ok(single(
            &task.outputs[0],
            triggers_to_csv(&triggers).into_bytes(),
            cost,
        ))
    }

    fn merge(&self, task: &TaskSpec, inputs: &Inputs) -> Result<StageOutput, String> {
        let parts: Vec<&[u8]> = task
            .inputs
            .iter()
            .map(|p| inputs.get(p))
            .collect::<Result<_, _>>()?;
        let merged = merge_triggers(&parts).map_err(|e| e.to_string())?;
        let cost = parts.len() as f64 * cost::MERGE_PER_INPUT_S;
        Ok(single(
            &task.outputs[0],
            triggers_to_csv(&merged.triggers).into_bytes(),
            cost,
        ))
    }

    fn merged_triggers(&self, inputs: &Inputs) -> Result<[Vec<Trigger>; 2], String> {
        let read = |d: DetectorId| -> Result<Vec<Trigger>, String> {
            triggers_from_csv(inputs.text(&merged_path(d.as_str()))?).map_err(|e| e.to_string())
        };
        Ok([read(self.cfg.detectors[0])?, read(self.cfg.detectors[1])?])
    }

    /// Coincidence, time-slide background and significance.
    pub fn results(
        &self,
        h: &[Trigger],
        l: &[Trigger],
        binned: bool,
    ) -> gwrepro_core::Result<ResultsFile> {
        let interval = self.cfg.analysis_interval();
        let slides = self.cfg.slides();
        let window = self.cfg.window_s();
        let fg_time = self.cfg.analyzed_time_s();
        let foreground = find_coincidences(h, l, window, 0.0, &interval)?;
        let background = estimate_background(h, l, window, &slides, &interval)?;
        let options = StatmapOptions {
            remove_loudest: self.cfg.coinc.remove_loudest,
            bins: binned.then(|| DurationBins {
                edges: self.cfg.coinc.duration_bins.clone(),
                template_durations: self.template_durations.clone(),
            }),
        };
        let sig = statmap(&foreground, &background, &slides, fg_time, &options)?;
        let rows = foreground
            .into_iter()
            .zip(sig)
            .map(|(event, result)| ForegroundRow { event, result })
            .collect();
        Ok(ResultsFile::new(
            self.cfg.detectors,
            slides,
            fg_time,
            rows,
            &background.events,
        ))
    }

    fn statmap(
        &self,
        task: &TaskSpec,
        inputs: &Inputs,
        binned: bool,
    ) -> Result<StageOutput, String> {
        let [h, l] = self.merged_triggers(inputs)?;
        if binned {
            // The unbinned results must describe the same analysis.
            let base =
                ResultsFile::from_text(inputs.text(STATMAP_PATH)?).map_err(|e| e.to_string())?;
            if base.slides != self.cfg.slides() {
                return Err("slide configuration differs from the unbinned results".into());
            }
        }
        let results = self.results(&h, &l, binned).map_err(|e| e.to_string())?;
        let cost =
            cost::STATMAP_BASE_S + self.cfg.coinc.n_slides as f64 * cost::STATMAP_PER_SLIDE_S;
        Ok(single(
            &task.outputs[0],
            results.to_text().into_bytes(),
            cost,
        ))
    }

    fn plot(&self, task: &TaskSpec, inputs: &Inputs) -> Result<StageOutput, String> {
        let path = task.inputs.first().ok_or("plot has no input")?;
        let results = ResultsFile::from_text(inputs.text(path)?).map_err(|e| e.to_string())?;
        let hist = histogram_of(&results, self.cfg.coinc.bin_width).map_err(|e| e.to_string())?;
        let mut files = BTreeMap::new();
        files.insert(HIST_CSV_PATH.to_string(), hist.to_csv().into_bytes());
        files.insert(
            HIST_SVG_PATH.to_string(),
            render_histogram_svg(&hist, &results).into_bytes(),
        );
        Ok(StageOutput {
            files,
            nominal_cost_s: cost::PLOT_S,
        })
    }
}

/// Histogram over all foreground and background statistics, bins aligned
/// to multiples of `bin_width` and ending at the first edge above the
/// loudest value.
pub fn histogram_of(results: &ResultsFile, bin_width: f64) -> gwrepro_core::Result<HistogramData> {
    let fg = results.foreground_results();
    let bg = results.background_stats();
    let all = fg.iter().map(|r| r.combined_stat).chain(bg.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    let range = if lo.is_finite() {
        let start = (lo / bin_width).floor() * bin_width;
        let mut n = ((hi - start) / bin_width).floor() + 1.0;
        while start + n * bin_width <= hi {
            n += 1.0;
        }
        (start, start + n * bin_width)
    } else {
        (0.0, bin_width)
    };
    make_histogram(&fg, &bg, results.slides.n_slides, bin_width, range)
}

fn single(path: &str, data: Vec<u8>, cost: f64) -> StageOutput {
    StageOutput {
        files: BTreeMap::from([(path.to_string(), data)]),
        nominal_cost_s: cost,
    }
}

struct Inputs<'a>(&'a BTreeMap<String, Arc<Vec<u8>>>);

impl Inputs<'_> {
    fn get(&self, path: &str) -> Result<&[u8], String> {
        self.0
            .get(path)
            .map(|d| d.as_slice())
            .ok_or_else(|| format!("input {path} was not staged"))
    }

    fn text(&self, path: &str) -> Result<&str, String> {
        std::str::from_utf8(self.get(path)?).map_err(|e| format!("{path}: {e}"))
    }
}

impl StageRunner for PipelineRunner {
    fn run(
        &self,
        task: &TaskSpec,
        inputs: &BTreeMap<String, Arc<Vec<u8>>>,
    ) -> Result<StageOutput, String> {
        let inputs = Inputs(inputs);
        match task.transformation.as_str() {
            "calculate_psd" => self.calculate_psd(task, &inputs),
            "inspiral" => self.inspiral(task, &inputs),
            "hdf_trigger_merge" => self.merge(task, &inputs),
            "statmap" => self.statmap(task, &inputs, false),
            "distribute_background_bins" => self.statmap(task, &inputs, true),
            "plot_snrifar" => self.plot(task, &inputs),
            other => Err(format!("unknown transformation {other}")),
        }
    }
}

pub struct PipelineRun {
    pub dag: Dag,
    pub execution: Execution,
}

impl PipelineRun {
    /// Final results text, binned when the plan includes binning.
    pub fn results_text(&self) -> Option<&[u8]> {
        let store = &self.execution.store;
        store
            .bytes(BINNED_PATH)
            .or_else(|| store.bytes(STATMAP_PATH))
    }

    pub fn results(&self) -> Option<ResultsFile> {
        let text = std::str::from_utf8(self.results_text()?).ok()?;
        ResultsFile::from_text(text).ok()
    }
}

/// Plans and executes the whole analysis on `nodes`, starting from the
/// given strain files.
pub fn run_pipeline(
    cfg: &RunConfig,
    strain: BTreeMap<String, Vec<u8>>,
    nodes: &[NodeSpec],
    workers: usize,
) -> Result<PipelineRun, CliError> {
    let dag = plan(&cfg.plan_config()).map_err(|e| CliError::input(e.to_string()))?;
    let mut store = FileStore::new();
    for (path, bytes) in strain {
        store.insert(path, bytes);
    }
    let exec = ExecConfig {
        seed: cfg.seed,
        workers,
        memory: cfg.memory_model(),
        faults: cfg.workflow.faults.clone(),
        checksum_bytes_per_s: cfg.workflow.checksum_mb_per_s * 1e6,
    };
    let runner = PipelineRunner::new(cfg.clone());
    let execution =
        execute(&dag, nodes, &cfg.policy(), &runner, &exec, store).map_err(|e| match e {
            gwrepro_wfengine::Error::InvalidDag(_) | gwrepro_wfengine::Error::NoNodes => {
                CliError::input(e.to_string())
            }
            _ => CliError::execution(e.to_string()),
        })?;
    Ok(PipelineRun { dag, execution })
}

/// The node pool used when none is configured.
pub fn default_nodes() -> Vec<NodeSpec> {
    vec![
        NodeSpec::new("n0", 8192, &["avx"], 1.0),
        NodeSpec::new("n1", 16_384, &["avx", "fma4"], 1.0),
        NodeSpec::new("n2", 16_384, &["avx", "fma4"], 1.5),
        NodeSpec::new("n3", 65_536, &["avx", "fma4"], 0.8),
    ]
}
