//! INI run configuration. Every key is optional and falls back to the value
//! in `configs/demo.ini`; unknown sections and keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gwrepro_core::coinc::{AnalysisInterval, SlideConfig};
use gwrepro_core::search::{build_bank, SearchParams, Template};
use gwrepro_core::spectral::Average;
use gwrepro_core::synth::{sample_count, DetectorId, InjectionSpec, NoiseKind, NoiseModel};
use gwrepro_core::waveform::chirp_duration;
use gwrepro_wfengine::{FaultConfig, MemoryModel, PlanConfig, Policy, StageRequests};
use ini::Ini;

use crate::error::CliError;

/// Histogram bin width in combined reweighted SNR.
pub const DEFAULT_BIN_WIDTH: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    pub mc_min: f64,
    pub mc_max: f64,
    pub n_templates: usize,
    pub parts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdConfig {
    pub parts: u32,
    pub segment_s: f64,
    pub overlap: f64,
    pub average: Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincConfig {
    /// Added to the light travel time to form the coincidence window.
    pub slack_s: f64,
    pub n_slides: u32,
    pub step_s: f64,
    pub bin_width: f64,
    pub remove_loudest: bool,
    /// Template-duration bin edges; non-empty enables distribute_background_bins.
    pub duration_bins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowConfig {
    pub nodes: Option<PathBuf>,
    pub workers: usize,
    pub max_retries: u32,
    pub escalation_factor: f64,
    pub inspiral_features: BTreeSet<String>,
    pub requests: StageRequests,
    pub memory_sigma: f64,
    pub checksum_mb_per_s: f64,
    pub faults: FaultConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub detectors: [DetectorId; 2],
    pub sample_rate_hz: u32,
    pub start_s: i64,
    pub duration_s: f64,
    pub light_travel_s: f64,
    pub noise: NoiseModel,
    /// Absolute coalescence time at the first detector.
    pub injection: Option<InjectionSpec>,
    pub bank: BankConfig,
    pub search: SearchParams,
    pub segments: u32,
    pub psd: PsdConfig,
    pub coinc: CoincConfig,
    pub workflow: WorkflowConfig,
}

/// Key/value pairs by section, consumed as they are read.
struct Sections {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

const SECTIONS: [&str; 9] = [
    "run",
    "detectors",
    "noise",
    "injections",
    "bank",
    "search",
    "psd",
    "coinc",
    "workflow",
];

fn bad(section: &str, key: &str, detail: impl std::fmt::Display) -> CliError {
    CliError::input(format!("config [{section}] {key}: {detail}"))
}

impl Sections {
    fn take_raw(&mut self, section: &str, key: &str) -> Option<String> {
        self.map.get_mut(section).and_then(|s| s.remove(key))
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take_raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|e| bad(section, key, format!("invalid value {v:?} ({e})"))),
        }
    }

    fn list(&mut self, section: &str, key: &str, default: &[&str]) -> Vec<String> {
        match self.take_raw(section, key) {
            None => default.iter().map(|s| s.to_string()).collect(),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    fn floats(&mut self, section: &str, key: &str) -> Result<Vec<f64>, CliError> {
        self.list(section, key, &[])
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| bad(section, key, format!("invalid number {v:?} ({e})")))
            })
            .collect()
    }

    /// `name:value` pairs separated by commas.
    fn pairs(&mut self, section: &str, key: &str) -> Result<Vec<(String, String)>, CliError> {
        self.list(section, key, &[])
            .into_iter()
            .map(|p| match p.split_once(':') {
                Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                    Ok((a.trim().to_string(), b.trim().to_string()))
                }
                _ => Err(bad(section, key, format!("expected name:value, got {p:?}"))),
            })
            .collect()
    }

    fn finish(self) -> Result<(), CliError> {
        for (section, keys) in self.map {
            if let Some(key) = keys.keys().next() {
                return Err(CliError::input(format!(
                    "config: unknown key {key:?} in [{section}]"
                )));
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Relative paths inside the file resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(name) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::input(format!(
                        "config: key {key:?} outside any section"
                    )));
                }
                continue;
            };
            if !SECTIONS.contains(&name) {
                return Err(CliError::input(format!("config: unknown section [{name}]")));
            }
            let entry = map.entry(name.to_string()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(bad(name, k, "given twice"));
                }
            }
        }
        let mut s = Sections { map };
        let cfg = Self::from_sections(&mut s, base_dir)?;
        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_sections(s: &mut Sections, base_dir: &Path) -> Result<Self, CliError> {
        let seed = s.get("run", "seed", 20_150_914u64)?;

        let names = s.list("detectors", "names", &["H1", "L1"]);
        if names.len() != 2 {
            return Err(bad(
                "detectors",
                "names",
                format!("need exactly two detectors, got {}", names.len()),
            ));
        }
        let det = |n: &str| DetectorId::new(n).map_err(|e| bad("detectors", "names", e));
        let detectors = [det(&names[0])?, det(&names[1])?];
        let sample_rate_hz = s.get("detectors", "sample_rate_hz", 4096u32)?;
        let start_s = s.get("detectors", "start_s", 1_126_259_446i64)?;
        let duration_s = s.get("detectors", "duration_s", 256.0)?;
        let light_travel_s = s.get("detectors", "light_travel_s", 0.010)?;

        let sigma = s.get("noise", "sigma", 1.0)?;
        let kind = match s.get("noise", "kind", "white".to_string())?.as_str() {
            "white" => NoiseKind::White,
            "powerlaw" => NoiseKind::PowerLaw {
                f_ref_hz: s.get("noise", "f_ref_hz", 60.0)?,
                exponent: s.get("noise", "exponent", -3.0)?,
                floor: s.get("noise", "floor", 0.5)?,
            },
            other => {
                return Err(bad(
                    "noise",
                    "kind",
                    format!("expected white or powerlaw, got {other:?}"),
                ))
            }
        };
        if kind == NoiseKind::White {
            for key in ["f_ref_hz", "exponent", "floor"] {
                if s.take_raw("noise", key).is_some() {
                    return Err(bad("noise", key, "only applies to kind = powerlaw"));
                }
            }
        }

        let enabled = s.get("injections", "enabled", true)?;
        let spec = InjectionSpec {
            chirp_mass: s.get("injections", "chirp_mass", 28.0)?,
            coalescence_time_s: start_s as f64
                + s.get("injections", "coalescence_offset_s", 131.3)?,
            phase: s.get("injections", "phase", 1.0)?,
            target_snr: s.get("injections", "target_snr", 18.0)?,
            inter_detector_delay_s: s.get("injections", "delay_s", 0.007)?,
        };

        let bank = BankConfig {
            mc_min: s.get("bank", "mc_min", 10.0)?,
            mc_max: s.get("bank", "mc_max", 40.0)?,
            n_templates: s.get("bank", "n_templates", 8usize)?,
            parts: s.get("bank", "parts", 1u32)?,
        };

        let d = SearchParams::default();
        let search = SearchParams {
            f_low: s.get("search", "f_low", d.f_low)?,
            snr_threshold: s.get("search", "snr_threshold", 4.5)?,
            chisq_bins: s.get("search", "chisq_bins", d.chisq_bins)?,
            cluster_window_s: s.get("search", "cluster_window_s", d.cluster_window_s)?,
            block_s: s.get("search", "block_s", d.block_s)?,
            guard_s: s.get("search", "guard_s", d.guard_s)?,
        };
        let segments = s.get("search", "segments", 4u32)?;

        let psd = PsdConfig {
            parts: s.get("psd", "parts", 2u32)?,
            segment_s: s.get("psd", "segment_s", 4.0)?,
            overlap: s.get("psd", "overlap", 0.5)?,
            average: s.get("psd", "average", Average::Median)?,
        };

        let coinc = CoincConfig {
            slack_s: s.get("coinc", "slack_s", 0.005)?,
            n_slides: s.get("coinc", "n_slides", 200u32)?,
            step_s: s.get("coinc", "slide_step_s", 0.1)?,
            bin_width: s.get("coinc", "bin_width", DEFAULT_BIN_WIDTH)?,
            remove_loudest: s.get("coinc", "remove_loudest", false)?,
            duration_bins: s.floats("coinc", "duration_bins")?,
        };

        let requests = StageRequests {
            calculate_psd: s.get("workflow", "request_calculate_psd_mb", 1024u64)?,
            inspiral: s.get("workflow", "request_inspiral_mb", 2048u64)?,
            hdf_trigger_merge: s.get("workflow", "request_hdf_trigger_merge_mb", 1024u64)?,
            statmap: s.get("workflow", "request_statmap_mb", 2048u64)?,
            distribute_background_bins: s.get(
                "workflow",
                "request_distribute_background_bins_mb",
                1024u64,
            )?,
            plot_snrifar: s.get("workflow", "request_plot_snrifar_mb", 512u64)?,
        };
        let mut faults = FaultConfig {
            corrupt_once: s
                .list("workflow", "corrupt_once", &[])
                .into_iter()
                .collect(),
            ..FaultConfig::default()
        };
        for (transformation, feature) in s.pairs("workflow", "hidden_features")? {
            faults
                .hidden_features
                .entry(transformation)
                .or_default()
                .insert(feature);
        }
        for (task, count) in s.pairs("workflow", "task_errors")? {
            let n = count
                .parse()
                .map_err(|e| bad("workflow", "task_errors", format!("{task}: {e}")))?;
            faults.task_errors.insert(task, n);
        }
        let workflow = WorkflowConfig {
            nodes: s
                .take_raw("workflow", "nodes")
                .map(|p| base_dir.join(p.trim())),
            workers: s.get("workflow", "workers", 4usize)?,
            max_retries: s.get("workflow", "max_retries", Policy::default().max_retries)?,
            escalation_factor: s.get(
                "workflow",
                "escalation_factor",
                Policy::default().escalation_factor,
            )?,
            inspiral_features: s
                .list("workflow", "inspiral_features", &["fma4"])
                .into_iter()
                .collect(),
            requests,
            memory_sigma: s.get("workflow", "memory_sigma", 0.3)?,
            checksum_mb_per_s: s.get("workflow", "checksum_mb_per_s", 500.0)?,
            faults,
        };

        Ok(RunConfig {
            seed,
            detectors,
            sample_rate_hz,
            start_s,
            duration_s,
            light_travel_s,
            noise: NoiseModel { kind, sigma },
            injection: enabled.then_some(spec),
            bank,
            search,
            segments,
            psd,
            coinc,
            workflow,
        })
    }

    /// Checks every downstream precondition so that a parsed config cannot
    /// fail for parameter reasons once the workflow is running.
    pub fn validate(&self) -> Result<(), CliError> {
        let fs = self.sample_rate_hz;
        if self.detectors[0] == self.detectors[1] {
            return Err(bad("detectors", "names", "detectors must differ"));
        }
        if fs == 0 {
            return Err(bad("detectors", "sample_rate_hz", "must be positive"));
        }
        let n = sample_count(self.duration_s, fs).map_err(|e| bad("detectors", "duration_s", e))?;
        if !(self.light_travel_s >= 0.0) {
            return Err(bad("detectors", "light_travel_s", "must be non-negative"));
        }
        self.noise
            .validate()
            .map_err(|e| bad("noise", "sigma", e))?;

        self.search
            .validate()
            .map_err(|e| bad("search", "f_low", e))?;
        if self.search.f_low >= fs as f64 / 2.0 {
            return Err(bad("search", "f_low", "must lie below Nyquist"));
        }
        sample_count(self.search.block_s, fs).map_err(|e| bad("search", "block_s", e))?;
        if self.search.block_s > self.duration_s {
            return Err(bad("search", "block_s", "longer than the data"));
        }
        if !(self.duration_s > 2.0 * self.search.guard_s) {
            return Err(bad("search", "guard_s", "guards leave no data to analyze"));
        }

        if self.psd.parts == 0 || n % self.psd.parts as usize != 0 {
            return Err(bad(
                "psd",
                "parts",
                format!("must divide the {n} samples evenly"),
            ));
        }
        let part_s = self.duration_s / self.psd.parts as f64;
        sample_count(self.psd.segment_s, fs).map_err(|e| bad("psd", "segment_s", e))?;
        if part_s < 2.0 * self.psd.segment_s {
            return Err(bad(
                "psd",
                "segment_s",
                format!("each PSD part is only {part_s} s"),
            ));
        }
        if !(0.0..=0.9).contains(&self.psd.overlap) {
            return Err(bad("psd", "overlap", "must lie in [0, 0.9]"));
        }

        if self.bank.parts == 0 || self.bank.parts as usize > self.bank.n_templates {
            return Err(bad("bank", "parts", "must be between 1 and n_templates"));
        }
        self.bank().map_err(|e| bad("bank", "mc_min", e))?;

        if let Some(inj) = &self.injection {
            for (key, ok) in [
                ("chirp_mass", inj.chirp_mass > 0.0),
                ("target_snr", inj.target_snr > 0.0),
                ("phase", (0.0..std::f64::consts::TAU).contains(&inj.phase)),
                (
                    "delay_s",
                    inj.inter_detector_delay_s.abs() <= self.light_travel_s,
                ),
            ] {
                if !ok {
                    let e = inj
                        .validate(self.light_travel_s)
                        .err()
                        .map_or("out of range".to_string(), |e| e.to_string());
                    return Err(bad("injections", key, e));
                }
            }
            let (a, b) = self.analysis_span();
            let lead = chirp_duration(inj.chirp_mass, self.search.f_low);
            for t in [
                inj.coalescence_time_s,
                inj.at_detector(1).coalescence_time_s,
            ] {
                if !(t - lead >= self.start_s as f64 && t >= a && t < b) {
                    return Err(bad(
                        "injections",
                        "coalescence_offset_s",
                        "signal must lie inside the analyzed span",
                    ));
                }
            }
        }

        if !(self.coinc.slack_s >= 0.0) || !(self.window_s() > 0.0) {
            return Err(bad(
                "coinc",
                "slack_s",
                "coincidence window must be positive",
            ));
        }
        if self.coinc.n_slides == 0 {
            return Err(bad("coinc", "n_slides", "need at least one slide"));
        }
        self.slides()
            .validate(self.window_s())
            .map_err(|e| bad("coinc", "slide_step_s", e))?;
        if !(self.coinc.bin_width > 0.0) {
            return Err(bad("coinc", "bin_width", "must be positive"));
        }
        if self.coinc.duration_bins.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad(
                "coinc",
                "duration_bins",
                "edges must be strictly ascending",
            ));
        }

        let w = &self.workflow;
        if w.workers == 0 {
            return Err(bad("workflow", "workers", "need at least one"));
        }
        if !(w.escalation_factor >= 1.0) {
            return Err(bad("workflow", "escalation_factor", "must be at least 1"));
        }
        if !(w.memory_sigma >= 0.0) {
            return Err(bad("workflow", "memory_sigma", "must be non-negative"));
        }
        if !(w.checksum_mb_per_s > 0.0) {
            return Err(bad("workflow", "checksum_mb_per_s", "must be positive"));
        }
        Ok(())
    }

    /// `[start + guard, end − guard)`, in epoch seconds.
    pub fn analysis_span(&self) -> (f64, f64) {
        let start = self.start_s as f64;
        (
            start + self.search.guard_s,
            start + self.duration_s - self.search.guard_s,
        )
    }

    pub fn analyzed_time_s(&self) -> f64 {
        let (a, b) = self.analysis_span();
        b - a
    }

    pub fn analysis_interval(&self) -> AnalysisInterval {
        let (a, b) = self.analysis_span();
        AnalysisInterval::new(a, b - a).expect("validated span")
    }

    /// Span of analysis segment `s` of `segments`.
    pub fn segment_span(&self, s: u32) -> (f64, f64) {
        let (a, b) = self.analysis_span();
        let len = (b - a) / self.segments as f64;
        let end = if s + 1 == self.segments {
            b
        } else {
            a + (s + 1) as f64 * len
        };
        (a + s as f64 * len, end)
    }

    pub fn window_s(&self) -> f64 {
        self.light_travel_s + self.coinc.slack_s
    }

    pub fn slides(&self) -> SlideConfig {
        SlideConfig {
            n_slides: self.coinc.n_slides,
            step_s: self.coinc.step_s,
            analyzed_time_s: self.analyzed_time_s(),
        }
    }

    pub fn bank(&self) -> gwrepro_core::Result<Vec<Template>> {
        build_bank(
            self.bank.mc_min,
            self.bank.mc_max,
            self.bank.n_templates,
            self.search.f_low,
        )
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            detectors: self.detectors.iter().map(|d| d.to_string()).collect(),
            psd_parts: self.psd.parts,
            segments: self.segments,
            bank_parts: self.bank.parts,
            inspiral_features: self.workflow.inspiral_features.clone(),
            binning: !self.coinc.duration_bins.is_empty(),
            requests: self.workflow.requests,
        }
    }

    pub fn policy(&self) -> Policy {
        Policy {
            escalation_factor: self.workflow.escalation_factor,
            max_retries: self.workflow.max_retries,
        }
    }

    pub fn memory_model(&self) -> MemoryModel {
        MemoryModel {
            sigma_ln: self.workflow.memory_sigma,
            ..MemoryModel::default()
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("", Path::new(".")).expect("defaults are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_demo() {
        let c = RunConfig::default();
        assert_eq!(c.analysis_span(), (1_126_259_454.0, 1_126_259_694.0));
        assert_eq!(c.slides().background_time_s(), 48_000.0);
        assert_eq!(c.segment_span(3), (1_126_259_634.0, 1_126_259_694.0));
        assert!((c.window_s() - 0.015).abs() < 1e-15);
        assert_eq!(c.coinc.bin_width, 0.2);
        assert_eq!(c.plan_config(), PlanConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("[search]\nsnr_treshold = 5\n", Path::new(".")).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("snr_treshold"), "{}", err.message);
        let err = RunConfig::parse("[serch]\n", Path::new(".")).unwrap_err();
        assert!(err.message.contains("serch"));
        let err = RunConfig::parse("[coinc]\nn_slides = many\n", Path::new(".")).unwrap_err();
        assert!(err.message.contains("n_slides"));
    }

    #[test]
    fn preconditions_checked_at_parse_time() {
        let bad = |text: &str, key: &str| {
            let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
            assert!(err.message.contains(key), "{text}: {}", err.message);
        };
        bad("[coinc]\nslide_step_s = 0.02\n", "slide_step_s");
        bad("[coinc]\nn_slides = 5000\n", "slide_step_s");
        bad(
            "[injections]\ncoalescence_offset_s = 250\n",
            "coalescence_offset_s",
        );
        bad("[injections]\ndelay_s = 0.02\n", "delay_s");
        bad("[psd]\nsegment_s = 100\n", "segment_s");
        bad("[noise]\nfloor = 1\n", "floor");
        bad("[bank]\nparts = 9\n", "parts");
    }

    #[test]
    fn fault_keys_parse() {
        let c = RunConfig::parse(
            "[workflow]\ncorrupt_once = psd/H1-PART0.csv\nhidden_features = inspiral:fma4\ntask_errors = statmap-FULL_DATA-H1L1_ID15:2\ninspiral_features =\n",
            Path::new("."),
        )
        .unwrap();
        let f = &c.workflow.faults;
        assert!(f.corrupt_once.contains("psd/H1-PART0.csv"));
        assert!(f.hidden_features["inspiral"].contains("fma4"));
        assert_eq!(f.task_errors["statmap-FULL_DATA-H1L1_ID15"], 2);
        assert!(c.workflow.inspiral_features.is_empty());
    }
}
