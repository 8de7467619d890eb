//! Foreground/background histogram as a standalone SVG.

use std::fmt::Write as _;

use gwrepro_core::coinc::{far_of, p_floor, significance, HistogramData, ResultsFile};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    /// log10 bounds of the count axis.
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x_lo) / (self.x_hi - self.x_lo) * (W - LEFT - RIGHT)
    }

    fn y(&self, count: f64) -> f64 {
        let t = (count.log10() - self.y_lo) / (self.y_hi - self.y_lo);
        H - BOTTOM - t.clamp(0.0, 1.0) * (H - TOP - BOTTOM)
    }
}

/// Foreground counts as markers, background mean per slide as a step line,
/// log count axis, and a top axis converting the ranking statistic to
/// significance against this background.
pub fn render_histogram_svg(hist: &HistogramData, results: &ResultsFile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );

    let positive = hist
        .bins
        .iter()
        .flat_map(|b| [b.fg_count as f64, b.mean_bg_per_trial])
        .filter(|&v| v > 0.0);
    let (mut y_min, mut y_max) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !y_min.is_finite() {
        (y_min, y_max) = (1.0, 10.0);
    }
    let frame = Frame {
        x_lo: hist.bins.first().map_or(0.0, |b| b.left),
        x_hi: hist.bins.last().map_or(1.0, |b| b.left + hist.bin_width),
        y_lo: y_min.log10().floor(),
        y_hi: y_max.log10().floor() + 1.0,
    };
    axes(&mut out, &frame, hist.bin_width);
    sigma_axis(&mut out, &frame, hist, results);

    // Background: a step path, broken across empty bins.
    let mut d = String::new();
    let mut pen_down = false;
    for b in &hist.bins {
        if b.mean_bg_per_trial > 0.0 {
            let (x0, x1, y) = (
                frame.x(b.left),
                frame.x(b.left + hist.bin_width),
                frame.y(b.mean_bg_per_trial),
            );
            let _ = write!(
                d,
                "{}{x0:.2},{y:.2} L{x1:.2},{y:.2} ",
                if pen_down { "L" } else { "M" }
            );
            pen_down = true;
        } else {
            pen_down = false;
        }
    }
    if !d.is_empty() {
        let _ = writeln!(
            out,
            r#"<path class="bg-step" d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            d.trim_end()
        );
    }

    for b in hist.bins.iter().filter(|b| b.fg_count > 0) {
        let cx = frame.x(b.left + hist.bin_width / 2.0);
        let cy = frame.y(b.fg_count as f64);
        let _ = writeln!(
            out,
            r#"<circle class="fg-marker" cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="black"/>"#
        );
    }

    if let Some(l) = &hist.loudest {
        let x = frame.x(l.combined_stat);
        let label = if l.is_lower_bound {
            format!("&gt; {:.1}σ", l.sigma)
        } else {
            format!("{:.1}σ", l.sigma)
        };
        let _ = writeln!(
            out,
            r#"<text class="loudest" x="{x:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            frame.y(1.0) - 8.0
        );
    }

    // Legend without markers, so circles count foreground bins only.
    let lx = LEFT + 10.0;
    let _ = writeln!(out, r#"<g class="legend">"#);
    let _ = writeln!(
        out,
        r#"<rect x="{lx}" y="{}" width="10" height="10" fill="black"/>"#,
        TOP + 6.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">foreground</text>"#,
        lx + 16.0,
        TOP + 15.0
    );
    let _ = writeln!(
        out,
        r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-width="1.5"/>"#,
        TOP + 27.0,
        lx + 10.0,
        TOP + 27.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">background per slide</text>"#,
        lx + 16.0,
        TOP + 31.0
    );
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, f: &Frame, bin_width: f64) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}"/>"#,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(out, "</g>");

    let span = f.x_hi - f.x_lo;
    let step = nice_step(span / 6.0).max(bin_width);
    let mut v = (f.x_lo / step).ceil() * step;
    while v <= f.x_hi + 1e-9 {
        let x = f.x(v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y1 + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 18.0,
            trim(v)
        );
        v += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">ranking statistic</text>"#,
        (x0 + x1) / 2.0,
        H - 10.0
    );

    let mut e = f.y_lo;
    while e <= f.y_hi + 1e-9 {
        let y = f.y(10f64.powf(e));
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            e as i32
        );
        e += 1.0;
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">count</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
}

/// Ticks wherever the significance against this background steps up,
/// thinned so labels do not collide.
fn sigma_axis(out: &mut String, f: &Frame, hist: &HistogramData, results: &ResultsFile) {
    let bg = results.background_stats();
    if hist.bins.is_empty() || results.background_time_s <= 0.0 {
        return;
    }
    let floor = p_floor(&results.slides, results.foreground_time_s);
    let sigma_at = |x: f64| {
        let far = far_of(x, &bg, results.background_time_s);
        significance(far.far_per_s, results.foreground_time_s, Some(floor)).1
    };
    let _ = writeln!(out, r#"<g class="sigma-axis">"#);
    let n = 400;
    let mut last: Option<(f64, f64)> = None;
    for i in 0..=n {
        let x = f.x_lo + (f.x_hi - f.x_lo) * i as f64 / n as f64;
        let s = sigma_at(x);
        let px = f.x(x);
        let show = match last {
            None => true,
            Some((prev_px, prev_s)) => s > prev_s + 0.05 && px - prev_px >= 40.0,
        };
        if show {
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{}" stroke="gray"/>"#,
                TOP - 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{}" text-anchor="middle">{s:.1}σ</text>"#,
                TOP - 8.0
            );
            last = Some((px, s));
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="16" text-anchor="middle">significance</text>"#,
        (LEFT + W - RIGHT) / 2.0
    );
    let _ = writeln!(out, "</g>");
}

fn nice_step(raw: f64) -> f64 {
    if !(raw > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    mag * if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_round() {
        assert_eq!(nice_step(0.7), 1.0);
        assert_eq!(nice_step(1.3), 2.0);
        assert_eq!(nice_step(31.0), 50.0);
        assert_eq!(trim(2.50), "2.5");
        assert_eq!(trim(3.0), "3");
    }
}
