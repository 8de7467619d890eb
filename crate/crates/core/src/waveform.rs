//! Newtonian-order stationary-phase inspiral waveform.
//!
//! The same model is used to build injections and search templates, so a
//! template with the injection's chirp mass is an exact match up to the
//! sampling grid.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `G · M_sun / c³` in seconds.
pub const SOLAR_MASS_S: f64 = 4.925_491_025_543_576e-6;

/// Total mass of an equal-mass binary with the given chirp mass.
pub fn total_mass(chirp_mass: f64) -> f64 {
    2f64.powf(6.0 / 5.0) * chirp_mass
}

/// Innermost-stable-circular-orbit gravitational-wave frequency in Hz.
pub fn isco_frequency(chirp_mass: f64) -> f64 {
    1.0 / (6f64.powf(1.5) * PI * total_mass(chirp_mass) * SOLAR_MASS_S)
}

/// Time to coalescence from gravitational-wave frequency `f_hz`.
pub fn time_to_coalescence(chirp_mass: f64, f_hz: f64) -> f64 {
    let m = chirp_mass * SOLAR_MASS_S;
    5.0 / 256.0 * (PI * f_hz).powf(-8.0 / 3.0) * m.powf(-5.0 / 3.0)
}

/// Signal duration between `f_low` and the ISCO cutoff.
pub fn chirp_duration(chirp_mass: f64, f_low: f64) -> f64 {
    let f_hi = isco_frequency(chirp_mass);
    if f_hi <= f_low {
        return 0.0;
    }
    time_to_coalescence(chirp_mass, f_low) - time_to_coalescence(chirp_mass, f_hi)
}

/// Frequency-domain chirp sampled at `k · df` for `k in 0..n_bins`.
///
/// Values approximate the continuous Fourier transform (kernel
/// `exp(-2πift)`) of a signal coalescing at `t_c` seconds after the start
/// of the grid. Amplitude is the bare `f^(-7/6)` law; callers normalize.
/// Bins outside `[f_low, f_isco]` are zero.
pub fn chirp_spectrum(
    chirp_mass: f64,
    f_low: f64,
    df: f64,
    n_bins: usize,
    t_c: f64,
    phase: f64,
) -> Vec<Complex64> {
    let m = chirp_mass * SOLAR_MASS_S;
    let f_hi = isco_frequency(chirp_mass);
    (0..n_bins)
        .map(|k| {
            let f = k as f64 * df;
            if f < f_low || f > f_hi || f <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let psi =
                2.0 * PI * f * t_c - phase - PI / 4.0 + 3.0 / 128.0 * (PI * m * f).powf(-5.0 / 3.0);
            Complex64::from_polar(f.powf(-7.0 / 6.0), -psi)
        })
        .collect()
}
