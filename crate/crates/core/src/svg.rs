//! Vector-graphics reports: the AHA bull's-eye and the Bland-Altman scatter.

use std::fmt::Write;

use crate::aha::{Level, QuantReport, DEFAULT_REFERENCE_DEG};
use crate::metrics::BlandAltman;

/// Number of colour-map bins over 0..=100 %.
pub const COLOR_BINS: usize = 10;

pub fn color_bin(percent: f64) -> usize {
    ((percent.clamp(0.0, 100.0) / 100.0 * COLOR_BINS as f64).floor() as usize).min(COLOR_BINS - 1)
}

/// White to red ramp.
fn bin_color(bin: usize) -> String {
    let t = (bin as f64 + 0.5) / COLOR_BINS as f64;
    let gb = (255.0 * (1.0 - t)).round() as u8;
    format!("#ff{gb:02x}{gb:02x}")
}

/// Ring radii `(inner, outer)` as fractions of the plot radius, apex innermost.
pub fn ring_radii(level: Level) -> (f64, f64) {
    match level {
        Level::Apical => (0.25, 0.5),
        Level::Mid => (0.5, 0.75),
        Level::Basal => (0.75, 1.0),
    }
}

fn point(cx: f64, cy: f64, r: f64, deg: f64) -> (f64, f64) {
    let a = deg.to_radians();
    (cx + r * a.cos(), cy - r * a.sin())
}

/// Bull's-eye with one annular sector per segment; sectors start at the
/// reference angle and advance counterclockwise as in the SA image.
pub fn bullseye(report: &QuantReport, reference_deg: f64) -> String {
    let (size, radius) = (480.0, 200.0);
    let (cx, cy) = (size / 2.0, size / 2.0);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for level in [Level::Basal, Level::Mid, Level::Apical] {
        let (ri, ro) = ring_radii(level);
        let (ri, ro) = (ri * radius, ro * radius);
        let n = level.sectors();
        let width = 360.0 / n as f64;
        for k in 0..n {
            let id = level.first_segment() as usize + k;
            let stat = &report.segments[id - 1];
            let a0 = reference_deg + width * k as f64;
            let a1 = a0 + width;
            let (p0, p1) = (point(cx, cy, ro, a0), point(cx, cy, ro, a1));
            let (q1, q0) = (point(cx, cy, ri, a1), point(cx, cy, ri, a0));
            let bin = color_bin(stat.percent);
            writeln!(
                s,
                r#"<path data-segment="{id}" data-value="{:.3}" data-bin="{bin}" d="M {:.3} {:.3} A {ro:.3} {ro:.3} 0 0 0 {:.3} {:.3} L {:.3} {:.3} A {ri:.3} {ri:.3} 0 0 1 {:.3} {:.3} Z" fill="{}" stroke="black" stroke-width="1"/>"#,
                stat.percent, p0.0, p0.1, p1.0, p1.1, q1.0, q1.1, q0.0, q0.1, bin_color(bin)
            )
            .unwrap();
            let mid = point(cx, cy, 0.5 * (ri + ro), 0.5 * (a0 + a1));
            writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="middle">{id}: {:.1}%</text>"#,
                mid.0,
                mid.1 + 4.0,
                stat.percent
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        r#"<text x="{cx}" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle">I/M {:.2}%</text>"#,
        cy + 5.0,
        report.volumetric_percent
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

pub fn bullseye_default(report: &QuantReport) -> String {
    bullseye(report, DEFAULT_REFERENCE_DEG)
}

/// Mean-versus-difference scatter with the bias and limits-of-agreement lines.
pub fn bland_altman_plot(pairs: &[(f64, f64)], stats: &BlandAltman<f64>) -> String {
    let (w, h, m) = (520.0, 380.0, 50.0);
    let points: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (0.5 * (a + b), a - b)).collect();
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let mut y0 = points.iter().map(|p| p.1).fold(stats.loa_low, f64::min);
    let mut y1 = points.iter().map(|p| p.1).fold(stats.loa_high, f64::max);
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad_y = 0.1 * (y1 - y0);
    let (y0, y1) = (y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#, h - m, w - m, h - m).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{:.3}" stroke="black"/>"#, h - m).unwrap();
    for (y, label, dash) in [(stats.mean_diff, "mean", ""), (stats.loa_low, "-1.96 SD", "6,4"), (stats.loa_high, "+1.96 SD", "6,4")] {
        writeln!(
            s,
            r#"<line class="{label}" x1="{m}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="gray" stroke-dasharray="{dash}"/>"#,
            sy(y),
            w - m,
            sy(y)
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10">{label} {y:.2}</text>"#, w - m + 2.0, sy(y) + 3.0).unwrap();
    }
    for p in &points {
        writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#, sx(p.0), sy(p.1)).unwrap();
    }
    writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="middle">mean of automatic and manual (%)</text>"#, w / 2.0, h - 12.0).unwrap();
    writeln!(s, r#"<text x="14" y="{:.3}" font-family="sans-serif" font-size="11" transform="rotate(-90 14 {:.3})" text-anchor="middle">automatic - manual (%)</text>"#, h / 2.0, h / 2.0).unwrap();
    s.push_str("</svg>\n");
    s
}

/// CSV of the scatter points followed by nothing else; the summary lives in its own file.
pub fn bland_altman_csv(pairs: &[(f64, f64)]) -> String {
    let mut s = String::from("auto,manual,mean,diff\n");
    for &(a, b) in pairs {
        writeln!(s, "{a},{b},{},{}", 0.5 * (a + b), a - b).unwrap();
    }
    s
}

pub fn bland_altman_summary_csv(stats: &BlandAltman<f64>) -> String {
    format!("mean_diff,sd_diff,loa_low,loa_high\n{},{},{},{}\n", stats.mean_diff, stats.sd_diff, stats.loa_low, stats.loa_high)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aha::SegmentStat;

    #[test]
    fn bullseye_has_sixteen_sectors() {
        let report = QuantReport {
            volumetric_percent: 12.5,
            myocardium_voxels: 16,
            infarct_voxels: 2,
            infarct_volume_mm3: 0.0,
            myocardium_volume_mm3: 0.0,
            segments: (1..=16)
                .map(|id| SegmentStat { id, myocardium_voxels: 1, infarct_voxels: (id <= 2) as usize, percent: if id <= 2 { 100.0 } else { 0.0 } })
                .collect(),
        };
        let svg = bullseye_default(&report);
        assert_eq!(svg.matches("data-segment=").count(), 16);
        assert!(svg.contains(r#"data-segment="1" data-value="100.000" data-bin="9""#));
        assert_eq!(color_bin(0.0), 0);
        assert_eq!(color_bin(55.0), 5);
    }

    #[test]
    fn ba_outputs() {
        let pairs = [(0.0, 2.0), (2.0, 0.0)];
        let stats = crate::metrics::bland_altman(&pairs).unwrap();
        let svg = bland_altman_plot(&pairs, &stats);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(bland_altman_csv(&pairs), "auto,manual,mean,diff\n0,2,1,-2\n2,0,1,2\n");
    }
}
