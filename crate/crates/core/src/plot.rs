//! Static SVG log-log line charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Log-log chart of the given series; nonpositive points are dropped.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    for d in (x0 as i64)..=(x1 as i64) {
        let x = sx(d as f64);
        let _ = writeln!(s, r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/>"##, MARGIN, H - MARGIN);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, H - MARGIN + 18.0);
    }
    for d in (y0 as i64)..=(y1 as i64) {
        let y = sy(d as f64);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, MARGIN, W - MARGIN);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, MARGIN - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if p.len() > 1 {
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        }
        for &(x, y) in p {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            MARGIN + 10.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series() {
        let svg = loglog_svg(
            "d < e",
            "epsilon",
            "value",
            &[Series { name: "dbar".into(), points: vec![(0.1, 0.01), (0.05, 0.004), (0.0, 1.0)] }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("d &lt; e"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("<polyline"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = loglog_svg("t", "x", "y", &[]);
        assert!(svg.contains("</svg>"));
    }
}
