//! Minimal SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 4] = ["#1b6ca8", "#d1495b", "#66a182", "#edae49"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

fn frame(out: &mut String, title: &str, y_lo: f64, y_hi: f64) {
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0).unwrap();
    writeln!(
        out,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    )
    .unwrap();
    for (y, v) in [(H - PAD, y_lo), (PAD, y_hi)] {
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{v:.3}</text>"#, PAD - 4.0, y + 4.0).unwrap();
    }
}

fn header(h: f64) -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h}\" font-family=\"sans-serif\">\n")
}

fn line_body(out: &mut String, title: &str, series: &[Series<'_>]) {
    let (x_lo, x_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);
    frame(out, title, y_lo, y_hi);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" ")).unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            PAD + 8.0,
            PAD + 16.0 * (k as f64 + 1.0),
            s.name
        )
        .unwrap();
    }
    if let (Some(first), Some(last)) = (
        series.iter().flat_map(|s| s.points.first()).map(|p| p.0).reduce(f64::min),
        series.iter().flat_map(|s| s.points.last()).map(|p| p.0).reduce(f64::max),
    ) {
        for x in [first, last] {
            writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="11">{x}</text>"#, sx(x), H - PAD + 16.0).unwrap();
        }
    }
}

pub fn line_chart(title: &str, series: &[Series<'_>]) -> String {
    let mut out = header(H);
    line_body(&mut out, title, series);
    out.push_str("</svg>\n");
    out
}

/// Line chart stacked above a histogram.
pub fn line_and_histogram(title: &str, series: &[Series<'_>], hist_title: &str, edges: &[f64], counts: &[usize]) -> String {
    let mut out = header(2.0 * H);
    line_body(&mut out, title, series);
    writeln!(out, r#"<g transform="translate(0,{H})">"#).unwrap();
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    frame(&mut out, hist_title, 0.0, max);
    let n = counts.len().max(1) as f64;
    let bw = (W - 2.0 * PAD) / n;
    for (k, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * (H - 2.0 * PAD);
        writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#1b6ca8" stroke="#fff"/>"##,
            PAD + bw * k as f64,
            H - PAD - h,
            bw
        )
        .unwrap();
    }
    if let (Some(lo), Some(hi)) = (edges.first(), edges.last()) {
        for (x, v) in [(PAD, lo), (W - PAD, hi)] {
            writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="11">{v}</text>"#, H - PAD + 16.0).unwrap();
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_per_series() {
        let s = [
            Series { name: "a", points: vec![(2010.0, 1.0), (2011.0, 1.1)] },
            Series { name: "b", points: vec![(2010.0, 1.0), (2011.0, 1.0)] },
        ];
        let svg = line_chart("t", &s);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
