//! Subcommand implementations. Each returns text for stdout or a [`CliError`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use gwrepro_core::coinc::ResultsFile;
use gwrepro_core::strain_io::sha256_hex;
use gwrepro_wfengine::plan::initial_files;
use gwrepro_wfengine::{
    log_from_text, log_to_text, parse_nodes, plan, render_transformations,
    summarize_transformations, NodeSpec, RunReport, SortBy, TaskState,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{default_nodes, histogram_of, manifest, run_pipeline, strain_files};
use crate::svg::render_histogram_svg;

pub const MANIFEST: &str = "manifest.tsv";

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, data: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::execution(format!("creating {}: {e}", dir.display())))?;
    }
    fs::write(path, data)
        .map_err(|e| CliError::execution(format!("writing {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn refuse_existing(out: &Path, force: bool) -> Result<(), CliError> {
    let occupied = out.exists()
        && fs::read_dir(out)
            .map(|mut d| d.next().is_some())
            .unwrap_or(true);
    if occupied && !force {
        return Err(CliError::input(format!(
            "{} already exists and is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    Ok(())
}

pub fn gen_data(cfg: &RunConfig, out: &Path, force: bool) -> Result<String, CliError> {
    refuse_existing(out, force)?;
    let files = strain_files(cfg)?;
    for (path, bytes) in &files {
        write(&out.join(path), bytes)?;
    }
    write(&out.join(MANIFEST), manifest(&files).as_bytes())?;
    Ok(files
        .keys()
        .map(|p| format!("wrote {}\n", out.join(p).display()))
        .collect())
}

/// Reads the strain files listed in the manifest, checking each digest.
pub fn load_data(cfg: &RunConfig, data: &Path) -> Result<BTreeMap<String, Vec<u8>>, CliError> {
    let text = read_text(&data.join(MANIFEST))?;
    let mut listed = BTreeMap::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let (path, digest) = line.split_once('\t').ok_or_else(|| {
            CliError::input(format!(
                "{MANIFEST} line {}: expected path<TAB>sha256",
                i + 1
            ))
        })?;
        listed.insert(path.to_string(), digest.to_string());
    }
    let mut files = BTreeMap::new();
    for path in initial_files(&cfg.plan_config()) {
        let digest = listed
            .get(&path)
            .ok_or_else(|| CliError::input(format!("{MANIFEST} does not list {path}")))?;
        let bytes = read(&data.join(&path))?;
        if &sha256_hex(&bytes) != digest {
            return Err(CliError::input(format!(
                "{path}: checksum does not match {MANIFEST}"
            )));
        }
        files.insert(path, bytes);
    }
    Ok(files)
}

pub fn plan_text(cfg: &RunConfig) -> Result<String, CliError> {
    plan(&cfg.plan_config())
        .map(|d| d.to_text())
        .map_err(|e| CliError::input(e.to_string()))
}

pub fn load_nodes(cfg: &RunConfig, nodes: Option<&Path>) -> Result<Vec<NodeSpec>, CliError> {
    match nodes
        .map(Path::to_path_buf)
        .or_else(|| cfg.workflow.nodes.clone())
    {
        Some(p) => parse_nodes(&read_text(&p)?)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => Ok(default_nodes()),
    }
}

pub struct RunArgs {
    pub data: PathBuf,
    pub nodes: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

/// Runs the workflow and writes every product under `out`. Returns the
/// report for stdout and, separately, the diagnostics for stderr.
pub fn run(cfg: &RunConfig, args: &RunArgs) -> Result<(String, String), CliError> {
    let strain = load_data(cfg, &args.data)?;
    let nodes = load_nodes(cfg, args.nodes.as_deref())?;
    let workers = args.workers.unwrap_or(cfg.workflow.workers);
    if workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let run = run_pipeline(cfg, strain, &nodes, workers)?;
    let exec = &run.execution;

    for path in exec.store.paths() {
        if !path.starts_with("strain/") {
            write(
                &args.out.join(path),
                exec.store.bytes(path).unwrap_or_default(),
            )?;
        }
    }
    write(&args.out.join("dag.txt"), run.dag.to_text().as_bytes())?;
    write(
        &args.out.join("provenance.tsv"),
        log_to_text(&exec.log).as_bytes(),
    )?;
    let report = exec.report.render();
    write(&args.out.join("report.txt"), report.as_bytes())?;

    let mut stdout = report;
    if let Some(l) = run
        .results()
        .and_then(|r| histogram_of(&r, cfg.coinc.bin_width).ok())
        .and_then(|h| h.loudest)
    {
        let bound = if l.is_lower_bound { "> " } else { "" };
        stdout.push_str(&format!(
            "loudest event: ranking statistic {:.3}, significance {bound}{:.4}σ\n",
            l.combined_stat, l.sigma
        ));
    }
    let stderr: String = exec.diagnostics.iter().map(|d| format!("{d}\n")).collect();
    if !exec.all_succeeded() {
        let bad: Vec<String> = run
            .dag
            .tasks
            .iter()
            .zip(&exec.states)
            .filter(|(_, s)| **s != TaskState::Succeeded)
            .map(|(t, s)| format!("{} ({s:?})", t.id))
            .collect();
        return Err(CliError::execution(format!(
            "{stderr}workflow did not complete: {}",
            bad.join(", ")
        )));
    }
    Ok((stdout, stderr))
}

pub fn hist(
    results: &Path,
    bin_width: f64,
    csv: Option<&Path>,
    svg: Option<&Path>,
) -> Result<String, CliError> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(CliError::usage(format!(
            "--bin-width must be positive, got {bin_width}"
        )));
    }
    let text = read_text(results)?;
    let parsed = ResultsFile::from_text(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", results.display())))?;
    let h = histogram_of(&parsed, bin_width).map_err(|e| CliError::execution(e.to_string()))?;
    let csv_text = h.to_csv();
    if let Some(p) = csv {
        write(p, csv_text.as_bytes())?;
    }
    if let Some(p) = svg {
        write(p, render_histogram_svg(&h, &parsed).as_bytes())?;
    }
    Ok(if csv.is_none() && svg.is_none() {
        csv_text
    } else {
        String::new()
    })
}

pub fn stats(provenance: &Path, by: SortBy, top: Option<usize>) -> Result<String, CliError> {
    let text = read_text(provenance)?;
    let log = log_from_text(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", provenance.display())))?;
    let tasks: BTreeSet<&str> = log.iter().map(|a| a.task_id.as_str()).collect();
    let mut rows = summarize_transformations(&log, by);
    if let Some(n) = top {
        rows.truncate(n);
    }
    Ok(format!(
        "{}\n{}",
        RunReport::from_log(&log, tasks.len()).render(),
        render_transformations(&rows)
    ))
}
