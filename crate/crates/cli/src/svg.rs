//! Minimal standalone SVG line plots of sweep results.

use std::fmt::Write;

use fdcsi::scenario::SweepResult;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Widens a degenerate range so every point maps inside the frame.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders one polyline per series. Throughput is plotted when present,
/// outage probability otherwise. Returns `None` for an empty result.
pub fn render(result: &SweepResult) -> Option<String> {
    if result.is_empty() {
        return None;
    }
    let plot_throughput = result.rows.iter().any(|r| r.throughput_mnats.is_some());
    let y_of = |r: &fdcsi::scenario::SweepRow| {
        if plot_throughput {
            r.throughput_mnats.unwrap_or(f64::NAN)
        } else {
            r.pout
        }
    };
    let xs = result.rows.iter().map(|r| r.axis_value);
    let ys = result.rows.iter().map(y_of).filter(|y| y.is_finite());
    let (x0, x1) = padded(
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
    );
    let y_max = ys.clone().fold(f64::NEG_INFINITY, f64::max);
    let y_min = ys.fold(f64::INFINITY, f64::min).min(0.0);
    let (y0, y1) = padded(y_min, y_max * 1.05);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (x, y) = (px(xv), py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let y_label = if plot_throughput {
        "throughput [Mnats/s]"
    } else {
        "P_out"
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(result.axis.name())
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        TOP + ph / 2.0
    );

    for (k, name) in result.series().into_iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r.series == name)
            .filter(|r| y_of(r).is_finite())
            .map(|r| format!("{:.2},{:.2}", px(r.axis_value), py(y_of(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdcsi::scenario::{figure_preset, run_sweep, Figure, SweepAxis};

    #[test]
    fn one_polyline_per_series() {
        let r = run_sweep(&figure_preset(Figure::Fig2)).unwrap();
        let svg = render(&r).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("P_out"));
        assert_eq!(render(&r).unwrap(), svg);
    }

    #[test]
    fn empty_is_refused() {
        let r = SweepResult {
            axis: SweepAxis::InrDb,
            rows: vec![],
        };
        assert!(render(&r).is_none());
    }

    #[test]
    fn labels() {
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(-0.0001), "0");
        assert_eq!(tick_label(10.0), "10");
        assert_eq!(escape("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
    }
}
