//! Minimal log-log line plots. Non-positive or non-finite points are dropped.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Returns `None` when no series has two plottable points.
pub fn log_log_plot(title: &str, series: &[Series]) -> Option<String> {
    let logs: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = logs.iter().filter(|l| l.len() >= 2).flatten().copied().collect();
    if all.is_empty() {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">1e{x0:.2}</text>"#, H - PAD + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{x1:.2}</text>"#, W - PAD, H - PAD + 16.0);
    let _ = writeln!(s, r#"<text x="4" y="{}">1e{y0:.2}</text>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="4" y="{}">1e{y1:.2}</text>"#, PAD + 4.0);
    let mut legend = 0;
    for (i, (line, ser)) in logs.iter().zip(series).enumerate() {
        if line.len() < 2 {
            continue;
        }
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = line.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = PAD + 14.0 + 16.0 * legend as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{c}">{}</text>"#, W - PAD - 110.0, escape(ser.name));
        legend += 1;
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_and_skips() {
        let good = Series { name: "v", points: vec![(10.0, 0.1), (100.0, 0.01), (1000.0, 0.001)] };
        let bad = Series { name: "<x>", points: vec![(10.0, 0.0), (100.0, f64::NAN)] };
        let svg = log_log_plot("v & b", &[good, bad]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("v &amp; b") && svg.ends_with("</svg>\n"));
        assert!(log_log_plot("none", &[Series { name: "z", points: vec![(1.0, -1.0)] }]).is_none());
    }
}
