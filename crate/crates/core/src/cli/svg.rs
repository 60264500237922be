//! Standalone SVG scatter plots.

use std::fmt::Write;

pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 0.10;

/// Renders centers as red markers and points as blue markers on an 800x800
/// canvas. Both axes share one scale, fitted to the data with a 10% margin.
/// Points with more than two coordinates are projected onto the first two;
/// one-dimensional points are drawn on the horizontal axis.
pub fn scatter(points: &[Vec<f64>], centers: &[Vec<f64>], labels: Option<&[u64]>) -> String {
    let xy = |p: &Vec<f64>| (p[0], p.get(1).copied().unwrap_or(0.0));
    let all: Vec<(f64, f64)> = points.iter().chain(centers).map(xy).collect();

    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let mut span = (x1 - x0).max(y1 - y0);
    if !span.is_finite() || span <= 0.0 {
        span = 1.0;
    }
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let full = span * (1.0 + 2.0 * MARGIN);
    let scale = CANVAS / full;
    // data -> canvas; y grows upward in data space
    let to_px = |x: f64, y: f64| {
        (
            (x - cx) * scale + CANVAS / 2.0,
            CANVAS / 2.0 - (y - cy) * scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{c}" height="{c}" fill="white" stroke="black"/>"#, c = CANVAS);

    let (ox, oy) = to_px(0.0, 0.0);
    if (0.0..=CANVAS).contains(&oy) {
        let _ = writeln!(svg, r##"<line x1="0" y1="{oy:.2}" x2="{CANVAS}" y2="{oy:.2}" stroke="#bbbbbb"/>"##);
    }
    if (0.0..=CANVAS).contains(&ox) {
        let _ = writeln!(svg, r##"<line x1="{ox:.2}" y1="0" x2="{ox:.2}" y2="{CANVAS}" stroke="#bbbbbb"/>"##);
    }

    let _ = writeln!(svg, r#"<g id="centers">"#);
    for c in centers {
        let (px, py) = to_px(xy(c).0, xy(c).1);
        let _ = writeln!(svg, r#"<circle class="center" cx="{px:.2}" cy="{py:.2}" r="7" fill="red"/>"#);
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="points">"#);
    for p in points {
        let (px, py) = to_px(xy(p).0, xy(p).1);
        let _ = writeln!(svg, r#"<circle class="point" cx="{px:.2}" cy="{py:.2}" r="4" fill="blue"/>"#);
    }
    let _ = writeln!(svg, "</g>");

    if let Some(labels) = labels {
        let _ = writeln!(svg, r#"<g id="labels" font-family="sans-serif" font-size="14">"#);
        for (p, label) in points.iter().zip(labels) {
            let (px, py) = to_px(xy(p).0, xy(p).1);
            let _ = writeln!(
                svg,
                r#"<text class="label" x="{:.2}" y="{:.2}">{label}</text>"#,
                px + 6.0,
                py - 6.0
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}
