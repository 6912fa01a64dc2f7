//! Minimal self-contained SVG renderings of histograms and 2-D projections.

use std::fmt::Write;

use crate::histogram::Histogram;
use crate::projection::Projection2D;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(s: &mut String, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            W - MARGIN - 110.0,
            y - 9.0,
            COLORS[k % COLORS.len()],
            W - MARGIN - 95.0,
            y,
            escape(name)
        );
    }
}

/// Overlaid step outlines of each class density.
pub fn histogram_svg(h: &Histogram, title: &str) -> String {
    let mut s = header(title);
    let peak = h
        .classes
        .iter()
        .flat_map(|c| c.density.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let bw = pw / h.bins as f64;
    for (k, c) in h.classes.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for (b, d) in c.density.iter().enumerate() {
            let bh = ph * d / peak;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
                MARGIN + b as f64 * bw,
                MARGIN + ph - bh,
                bw,
                bh
            );
        }
    }
    let names: Vec<&str> = h.classes.iter().map(|c| c.label.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// Scatter plot colored by `labels` (aligned with the projection's ids).
pub fn scatter_svg(p: &Projection2D, labels: &[&str], title: &str) -> String {
    let mut s = header(title);
    let mut names: Vec<&str> = labels.to_vec();
    names.sort_unstable();
    names.dedup();
    let bound = |k: usize| {
        let lo = p.points.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
        let hi = p.points.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo).max(1e-12))
    };
    let ((x0, xr), (y0, yr)) = (bound(0), bound(1));
    let (pw, ph) = (W - 2.0 * MARGIN - 20.0, H - 2.0 * MARGIN - 20.0);
    for (q, l) in p.points.iter().zip(labels) {
        let k = names.iter().position(|n| n == l).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            MARGIN + 10.0 + pw * (q[0] - x0) / xr,
            MARGIN + 10.0 + ph * (1.0 - (q[1] - y0) / yr),
            COLORS[k % COLORS.len()]
        );
    }
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::histogram::histogram;
    use crate::projection::ProjectionMethod;

    #[test]
    fn renders_wellformed_documents() {
        let h = histogram(
            &[(Label::Recorded, vec![0.9, 0.8]), (Label::Synthetic, vec![0.1, 0.5])],
            5,
        )
        .unwrap();
        let svg = histogram_svg(&h, "a < b");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("fill-opacity=\"0.35\"").count(), 10);

        let p = Projection2D {
            ids: vec!["a".into(), "b".into(), "c".into()],
            points: vec![[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]],
            method: ProjectionMethod::Pca,
            final_kl: None,
        };
        let svg = scatter_svg(&p, &["recorded", "synthetic", "synthetic"], "pca");
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
