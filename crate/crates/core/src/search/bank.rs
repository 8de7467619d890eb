use crate::error::{invalid, Result};
use crate::waveform;

/// One point of the template bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Template {
    pub id: u32,
    pub chirp_mass: f64,
    /// Time from `f_low` to the ISCO cutoff.
    pub duration_s: f64,
}

impl Template {
    pub fn new(id: u32, chirp_mass: f64, f_low: f64) -> Self {
        Template {
            id,
            chirp_mass,
            duration_s: waveform::chirp_duration(chirp_mass, f_low),
        }
    }
}

/// Geometrically spaced chirp masses `mc_min · (mc_max/mc_min)^(k/(n-1))`.
pub fn build_bank(
    mc_min: f64,
    mc_max: f64,
    n_templates: usize,
    f_low: f64,
) -> Result<Vec<Template>> {
    if !(mc_min > 0.0) || !(mc_max > mc_min) {
        return Err(invalid(format!(
            "bank needs 0 < mc_min < mc_max, got [{mc_min}, {mc_max}]"
        )));
    }
    if n_templates == 0 {
        return Err(invalid("bank needs at least one template"));
    }
    let ratio = mc_max / mc_min;
    Ok((0..n_templates)
        .map(|k| {
            let mc = if n_templates == 1 {
                mc_min
            } else {
                mc_min * ratio.powf(k as f64 / (n_templates - 1) as f64)
            };
            Template::new(k as u32, mc, f_low)
        })
        .collect())
}

/// Splits a bank into `parts` contiguous, near-equal pieces.
pub fn split_bank(bank: &[Template], parts: usize) -> Vec<Vec<Template>> {
    let parts = parts.max(1);
    let base = bank.len() / parts;
    let extra = bank.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut at = 0;
    for p in 0..parts {
        let n = base + usize::from(p < extra);
        out.push(bank[at..at + n].to_vec());
        at += n;
    }
    out
}
