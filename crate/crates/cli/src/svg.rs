//! Deterministic SVG rendering of marginal heat maps and threshold sweeps.

use std::fmt::Write;

use dynbias::fanova::MarginalGrid;

use crate::artifacts::SweepRow;
use crate::provenance::Provenance;

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let i = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let f = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|k| (a.1[k] as f64 + f * (b.1[k] as f64 - a.1[k] as f64)).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, w: u32, h: u32, prov: Option<&Provenance>) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    if let Some(p) = prov {
        let _ = writeln!(out, "<!-- {} -->", escape(&p.line()));
        let _ = writeln!(out, "<metadata>{}</metadata>", escape(&serde_json::to_string(p).expect("provenance serializes")));
    }
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
}

/// Heat map of a two-parameter marginal over the unit square.
pub fn heatmap(grid: &MarginalGrid, title: &str, prov: Option<&Provenance>) -> String {
    let (left, top, size) = (60.0, 40.0, 320.0);
    let n = grid.resolution;
    let cell = size / n as f64;
    let (lo, hi) = grid
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.2), b.max(p.2)));
    let span = hi - lo;
    let mut out = String::new();
    header(&mut out, 480, 420, prov);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle">{}</text>"#, left + size / 2.0, escape(title));
    for i in 0..n {
        for j in 0..n {
            let v = grid.value(i, j);
            let t = if span > 0.0 { (v - lo) / span } else { 0.5 };
            let x = left + i as f64 * cell;
            let y = top + (n - 1 - j) as f64 * cell;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell + 0.01,
                cell + 0.01,
                color(t)
            );
        }
    }
    let _ = writeln!(out, r#"<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{} (unit scale)</text>"#, left + size / 2.0, top + size + 30.0, escape(&grid.u));
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{} (unit scale)</text>"#,
        top + size / 2.0,
        top + size / 2.0,
        escape(&grid.v)
    );
    for (k, label) in [(0.0, "0"), (1.0, "1")] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#, left + k * size, top + size + 14.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 4.0, top + size - k * size + 4.0);
    }
    let bar_x = left + size + 20.0;
    for s in 0..32 {
        let t = s as f64 / 31.0;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            top + size - (s + 1) as f64 * size / 32.0,
            size / 32.0 + 0.01,
            color(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{:.4}</text>"#, bar_x + 20.0, top + 10.0, if hi.is_finite() { hi } else { 0.0 });
    let _ = writeln!(out, r#"<text x="{}" y="{}">{:.4}</text>"#, bar_x + 20.0, top + size, if lo.is_finite() { lo } else { 0.0 });
    out.push_str("</svg>\n");
    out
}

/// Macro f1 (left axis) and mean subset size (right axis) against the importance threshold.
pub fn sweep_plot(rows: &[SweepRow], n_sources: usize, prov: Option<&Provenance>) -> String {
    let (left, top, width, height) = (60.0, 40.0, 380.0, 260.0);
    let (t_lo, t_hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.tau_imp), b.max(r.tau_imp)));
    let t_span = if t_hi > t_lo { t_hi - t_lo } else { 1.0 };
    let x_of = |t: f64| left + (t - t_lo) / t_span * width;
    let y_f1 = |f: f64| top + height - f.clamp(0.0, 1.0) * height;
    let max_size = n_sources.max(1) as f64;
    let y_size = |s: f64| top + height - (s / max_size).clamp(0.0, 1.0) * height;
    let mut out = String::new();
    header(&mut out, 520, 360, prov);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle">f1 and subset size vs importance threshold</text>"#, left + width / 2.0);
    let _ = writeln!(out, r#"<rect x="{left}" y="{top}" width="{width}" height="{height}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = y_f1(f);
        let _ = writeln!(out, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, left + width);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{f:.2}</text>"#, left - 4.0, y + 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}">{:.1}</text>"#, left + width + 4.0, y + 4.0, f * max_size);
    }
    for r in rows {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.2}</text>"#, x_of(r.tau_imp), top + height + 14.0, r.tau_imp);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">tau_imp</text>"#, left + width / 2.0, top + height + 32.0);
    for (name, colour, ys) in [
        ("mean f1", "#1f77b4", rows.iter().map(|r| (x_of(r.tau_imp), y_f1(r.mean_f1))).collect::<Vec<_>>()),
        ("mean |S_y|", "#d62728", rows.iter().map(|r| (x_of(r.tau_imp), y_size(r.mean_subset_size))).collect()),
    ] {
        let pts: Vec<String> = ys.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"><title>{name}</title></polyline>"#, pts.join(" "));
        for (x, y) in &ys {
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{colour}"/>"#);
        }
    }
    let _ = writeln!(out, r##"<text x="{left}" y="{}" fill="#1f77b4">mean f1 (left)</text>"##, top + height + 52.0);
    let _ = writeln!(out, r##"<text x="{}" y="{}" fill="#d62728">mean |S_y| (right)</text>"##, left + 200.0, top + height + 52.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> MarginalGrid {
        MarginalGrid {
            u: "a".into(),
            v: "b<c".into(),
            resolution: 3,
            points: (0..9).map(|k| ((k / 3) as f64 / 2.0, (k % 3) as f64 / 2.0, k as f64)).collect(),
        }
    }

    #[test]
    fn heatmap_is_deterministic_and_escaped() {
        let a = heatmap(&grid(), "m", None);
        assert_eq!(a, heatmap(&grid(), "m", None));
        assert_eq!(a.matches("<rect").count(), 1 + 9 + 1 + 32);
        assert!(a.contains("b&lt;c"));
    }

    #[test]
    fn colour_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), color(0.5));
    }

    #[test]
    fn sweep_has_two_series() {
        let rows: Vec<SweepRow> = (0..4)
            .map(|i| SweepRow {
                tau_imp: i as f64 * 0.2,
                mean_f1: 0.5,
                std_f1: 0.1,
                mean_subset_size: 4.0 - i as f64,
            })
            .collect();
        let s = sweep_plot(&rows, 4, None);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert_eq!(s.matches("<circle").count(), 8);
    }
}
