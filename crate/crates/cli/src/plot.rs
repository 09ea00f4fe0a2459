//! Minimal self-contained SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if include_zero {
        lo = lo.min(0.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the series on shared axes as step lines: each value holds until
/// the next sample, which suits both window averages and cwnd changes.
/// Fails if there is no series or any series is empty.
pub fn render(title: &str, y_label: &str, series: &[Series], banner: Option<&str>) -> Result<String, String> {
    if let Some(s) = series.iter().find(|s| s.points.is_empty()) {
        return Err(format!("series `{}` has no points", s.label));
    }
    if series.is_empty() {
        return Err("nothing to plot".into());
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0), false);
    let (y0, y1) = range(all().map(|p| p.1), true);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(b) = banner {
        let _ = writeln!(out, "<!-- {} -->", esc(b));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        esc(title)
    );

    let (bx, by) = (LEFT, TOP + ph);
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{bx}\" y1=\"{by}\" x2=\"{}\" y2=\"{by}\" stroke=\"black\"/>",
        LEFT + pw
    );
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{bx}\" y1=\"{by}\" x2=\"{bx}\" y2=\"{TOP}\" stroke=\"black\"/>"
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (x, y) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            "<line class=\"tick\" x1=\"{x:.2}\" y1=\"{by}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>",
            by + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            by + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            "<line class=\"tick\" x1=\"{}\" y1=\"{y:.2}\" x2=\"{bx}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            bx - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            bx - 8.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">time (s)</text>",
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">{1}</text>",
        TOP + ph / 2.0,
        esc(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let mut pts = String::new();
        let mut prev: Option<f64> = None;
        for &(x, y) in &s.points {
            if let Some(py) = prev {
                let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(py));
            }
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
            prev = Some(y);
        }
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            COLORS[i % COLORS.len()],
            pts.trim_end()
        );
    }
    if series.len() > 1 {
        let _ = writeln!(out, "<g class=\"legend\">");
        for (i, s) in series.iter().enumerate() {
            let y = TOP + 12.0 + 18.0 * i as f64;
            let x = LEFT + pw - 110.0;
            let color = COLORS[i % COLORS.len()];
            let _ = writeln!(
                out,
                "<rect x=\"{x}\" y=\"{}\" width=\"18\" height=\"4\" fill=\"{color}\"/>",
                y - 4.0
            );
            let _ = writeln!(out, "<text x=\"{}\" y=\"{y}\">{}</text>", x + 24.0, esc(&s.label));
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a >= 1e6 {
        format!("{:.2}M", v / 1e6)
    } else if a >= 1e3 {
        format!("{:.1}k", v / 1e3)
    } else if a >= 10.0 || a == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(label: &str, pts: &[(f64, f64)]) -> Series {
        Series {
            label: label.into(),
            points: pts.to_vec(),
        }
    }

    #[test]
    fn single_series_has_no_legend() {
        let svg = render("t", "bps", &[s("a", &[(0.0, 1.0), (1.0, 2.0)])], None).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("class=\"axis\"").count(), 2);
        assert!(!svg.contains("legend"));
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(render("t", "y", &[s("a", &[])], None).is_err());
        assert!(render("t", "y", &[], None).is_err());
    }

    #[test]
    fn constant_series_still_renders() {
        let svg = render("t", "y", &[s("a", &[(3.0, 5.0)])], None).unwrap();
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render("a<b", "y", &[s("x&y", &[(0.0, 0.0)]), s("z", &[(1.0, 1.0)])], None).unwrap();
        assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y"));
    }
}
