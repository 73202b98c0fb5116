//! The performance-sensitivity plane.
//!
//! Each algorithm is a point (sensitivity, per-environment tuned score).
//! Relative to a reference algorithm at (rx, ry), with deltas
//! ds = x - rx and dp = y - ry, the plane splits into five regions plus a
//! boundary disc and an unclassified wedge:
//!
//! * R1: ds <= 0, dp >= 0 (no more sensitive, no worse)
//! * R2: ds > 0, dp > ds (more sensitive, gain exceeds the added sensitivity)
//! * R4: ds > 0, 0 < dp <= ds (gain does not cover the added sensitivity)
//! * R5: ds > 0, dp <= 0 (more sensitive, no gain)
//! * R3: ds <= 0, ds < dp < 0 (less sensitive, mild loss)
//! * unclassified: ds <= 0, dp <= ds and dp < 0 (loss beyond the sensitivity
//!   saving; the tradeoff is not comparable)
//!
//! The seven cases tile the plane exactly; the boundary test runs first.

use std::path::Path;

use serde::Serialize;

use crate::bootstrap::IntervalPair;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    R1,
    R2,
    R3,
    R4,
    R5,
    Boundary,
    Unclassified,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::R1 => "R1",
            Region::R2 => "R2",
            Region::R3 => "R3",
            Region::R4 => "R4",
            Region::R5 => "R5",
            Region::Boundary => "boundary",
            Region::Unclassified => "unclassified",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One algorithm on the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanePoint {
    pub label: String,
    /// Sensitivity (x coordinate).
    pub phi: f64,
    /// Per-environment tuned score (y coordinate).
    pub perf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalPair>,
}

impl PlanePoint {
    pub fn new(label: impl Into<String>, phi: f64, perf: f64) -> Self {
        PlanePoint {
            label: label.into(),
            phi,
            perf,
            interval: None,
        }
    }
}

/// Region of `point` relative to `reference`. Points within `tol` of the
/// reference in both coordinates are Boundary.
pub fn classify_region(reference: &PlanePoint, point: &PlanePoint, tol: f64) -> Region {
    let ds = point.phi - reference.phi;
    let dp = point.perf - reference.perf;
    if ds.abs() <= tol && dp.abs() <= tol {
        return Region::Boundary;
    }
    if ds <= 0.0 {
        if dp >= 0.0 {
            Region::R1
        } else if dp > ds {
            Region::R3
        } else {
            Region::Unclassified
        }
    } else if dp <= 0.0 {
        Region::R5
    } else if dp > ds {
        Region::R2
    } else {
        Region::R4
    }
}

const SVG_W: f64 = 720.0;
const SVG_H: f64 = 540.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

/// Data-to-pixel mapping for the rendered plane. Exposed so tests can
/// predict where a point must land.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneGeometry {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlaneGeometry {
    /// Bounds covering every point, interval endpoint, and the reference,
    /// padded 12% per side. Degenerate spans widen to a unit window.
    pub fn fit(points: &[PlanePoint], reference: &PlanePoint) -> PlaneGeometry {
        let mut xs = vec![reference.phi];
        let mut ys = vec![reference.perf];
        for p in points {
            xs.push(p.phi);
            ys.push(p.perf);
            if let Some(iv) = &p.interval {
                xs.push(iv.sens_lo);
                xs.push(iv.sens_hi);
                ys.push(iv.perf_lo);
                ys.push(iv.perf_hi);
            }
        }
        let span = |vals: &[f64]| {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-12 {
                let pad = 0.12 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                let c = (hi + lo) / 2.0;
                let half = (c.abs() * 0.2).max(0.5);
                (c - half, c + half)
            }
        };
        let (x_min, x_max) = span(&xs);
        let (y_min, y_max) = span(&ys);
        PlaneGeometry {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn x_px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (SVG_W - MARGIN_L - MARGIN_R)
    }

    pub fn y_px(&self, y: f64) -> f64 {
        MARGIN_T + (self.y_max - y) / (self.y_max - self.y_min) * (SVG_H - MARGIN_T - MARGIN_B)
    }
}

/// Clips a convex polygon against the half-plane a*x + b*y <= c.
fn clip_halfplane(poly: &[(f64, f64)], a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let inside = |p: (f64, f64)| a * p.0 + b * p.1 <= c + 1e-12;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        if inside(cur) != inside(prev) {
            let denom = a * (cur.0 - prev.0) + b * (cur.1 - prev.1);
            let t = (c - a * prev.0 - b * prev.1) / denom;
            out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
        }
        if inside(cur) {
            out.push(cur);
        }
    }
    out
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % poly.len()];
        twice += x1 * y2 - x2 * y1;
    }
    twice.abs() / 2.0
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Renders the plane to an SVG string. Pure and deterministic: same
/// inputs, same bytes.
pub fn plane_svg(points: &[PlanePoint], reference: &PlanePoint) -> String {
    let geom = PlaneGeometry::fit(points, reference);
    let (rx, ry) = (reference.phi, reference.perf);
    let k = ry - rx; // identity line: y = x + k

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
    ));
    svg.push_str("<rect class=\"bg\" x=\"0\" y=\"0\" width=\"720\" height=\"540\" fill=\"#ffffff\"/>\n");

    // Region fills, clipped to the data window.
    let rect = vec![
        (geom.x_min, geom.y_min),
        (geom.x_max, geom.y_min),
        (geom.x_max, geom.y_max),
        (geom.x_min, geom.y_max),
    ];
    // A half-plane is (a, b, c) with a*x + b*y <= c.
    type HalfPlane = (f64, f64, f64);
    let regions: [(&str, &str, Vec<HalfPlane>); 5] = [
        ("r1", "#4caf7d", vec![(1.0, 0.0, rx), (0.0, -1.0, -ry)]),
        ("r2", "#7da7d9", vec![(-1.0, 0.0, -rx), (1.0, -1.0, -k)]),
        ("r3", "#b58cc9", vec![(1.0, 0.0, rx), (0.0, 1.0, ry), (1.0, -1.0, -k)]),
        ("r4", "#c9b458", vec![(-1.0, 0.0, -rx), (0.0, -1.0, -ry), (-1.0, 1.0, k)]),
        ("r5", "#d9837d", vec![(-1.0, 0.0, -rx), (0.0, 1.0, ry)]),
    ];
    svg.push_str("<g class=\"regions\">\n");
    let mut labels = Vec::new();
    for (name, color, halves) in &regions {
        let mut poly = rect.clone();
        for &(a, b, c) in halves {
            poly = clip_halfplane(&poly, a, b, c);
            if poly.is_empty() {
                break;
            }
        }
        if poly.is_empty() || polygon_area(&poly) < 1e-9 {
            continue;
        }
        let pts: Vec<String> = poly
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", geom.x_px(x), geom.y_px(y)))
            .collect();
        svg.push_str(&format!(
            "<polygon class=\"region {name}\" points=\"{}\" fill=\"{color}\" fill-opacity=\"0.16\" stroke=\"none\"/>\n",
            pts.join(" ")
        ));
        let cx: f64 = poly.iter().map(|p| p.0).sum::<f64>() / poly.len() as f64;
        let cy: f64 = poly.iter().map(|p| p.1).sum::<f64>() / poly.len() as f64;
        labels.push(format!(
            "<text class=\"regionlabel\" x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            geom.x_px(cx),
            geom.y_px(cy),
            name.to_uppercase()
        ));
    }
    svg.push_str("</g>\n");

    // Frame and ticks.
    let (px0, px1) = (geom.x_px(geom.x_min), geom.x_px(geom.x_max));
    let (py0, py1) = (geom.y_px(geom.y_min), geom.y_px(geom.y_max));
    svg.push_str(&format!(
        "<rect class=\"frame\" x=\"{px0:.2}\" y=\"{py1:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444444\"/>\n",
        px1 - px0,
        py0 - py1
    ));
    for i in 0..5 {
        let fx = geom.x_min + (geom.x_max - geom.x_min) * i as f64 / 4.0;
        let fy = geom.y_min + (geom.y_max - geom.y_min) * i as f64 / 4.0;
        let xp = geom.x_px(fx);
        let yp = geom.y_px(fy);
        svg.push_str(&format!(
            "<line class=\"tick\" x1=\"{xp:.2}\" y1=\"{py0:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#444444\"/>\n",
            py0 + 5.0
        ));
        svg.push_str(&format!(
            "<text class=\"ticklabel\" x=\"{xp:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"middle\">{}</text>\n",
            py0 + 18.0,
            fmt_tick(fx)
        ));
        svg.push_str(&format!(
            "<line class=\"tick\" x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{px0:.2}\" y2=\"{yp:.2}\" stroke=\"#444444\"/>\n",
            px0 - 5.0
        ));
        svg.push_str(&format!(
            "<text class=\"ticklabel\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"end\">{}</text>\n",
            px0 - 8.0,
            yp + 4.0,
            fmt_tick(fy)
        ));
    }
    svg.push_str(&format!(
        "<text class=\"axistitle\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#333333\" text-anchor=\"middle\">hyperparameter sensitivity</text>\n",
        (px0 + px1) / 2.0,
        SVG_H - 12.0
    ));
    svg.push_str(&format!(
        "<text class=\"axistitle\" x=\"16\" y=\"{:.2}\" font-size=\"13\" fill=\"#333333\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">per-environment tuned score</text>\n",
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0
    ));

    // Reference crosshair and the equal-tradeoff (identity) line.
    svg.push_str(&format!(
        "<line class=\"refline\" x1=\"{:.2}\" y1=\"{py1:.2}\" x2=\"{:.2}\" y2=\"{py0:.2}\" stroke=\"#888888\" stroke-dasharray=\"3,4\"/>\n",
        geom.x_px(rx),
        geom.x_px(rx)
    ));
    svg.push_str(&format!(
        "<line class=\"refline\" x1=\"{px0:.2}\" y1=\"{:.2}\" x2=\"{px1:.2}\" y2=\"{:.2}\" stroke=\"#888888\" stroke-dasharray=\"3,4\"/>\n",
        geom.y_px(ry),
        geom.y_px(ry)
    ));
    let ix_lo = geom.x_min.max(geom.y_min - k);
    let ix_hi = geom.x_max.min(geom.y_max - k);
    if ix_lo < ix_hi {
        svg.push_str(&format!(
            "<line class=\"identity\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n",
            geom.x_px(ix_lo),
            geom.y_px(ix_lo + k),
            geom.x_px(ix_hi),
            geom.y_px(ix_hi + k)
        ));
    }
    for label in labels {
        svg.push_str(&label);
    }

    // Reference marker: a cross, so point circles stay countable.
    let (rpx, rpy) = (geom.x_px(rx), geom.y_px(ry));
    svg.push_str(&format!(
        "<line class=\"refmark\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n",
        rpx - 5.0,
        rpy - 5.0,
        rpx + 5.0,
        rpy + 5.0
    ));
    svg.push_str(&format!(
        "<line class=\"refmark\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n",
        rpx - 5.0,
        rpy + 5.0,
        rpx + 5.0,
        rpy - 5.0
    ));
    svg.push_str(&format!(
        "<text class=\"reflabel\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#222222\">{}</text>\n",
        rpx + 8.0,
        rpy - 8.0,
        xml_escape(&reference.label)
    ));

    // Points: error bars first (4 half-segments each), then the marker.
    svg.push_str("<g class=\"points\">\n");
    for p in points {
        let (cx, cy) = (geom.x_px(p.phi), geom.y_px(p.perf));
        if let Some(iv) = &p.interval {
            let segments = [
                (geom.x_px(iv.sens_lo), cy, cx, cy),
                (cx, cy, geom.x_px(iv.sens_hi), cy),
                (cx, geom.y_px(iv.perf_lo), cx, cy),
                (cx, cy, cx, geom.y_px(iv.perf_hi)),
            ];
            for (x1, y1, x2, y2) in segments {
                svg.push_str(&format!(
                    "<line class=\"errorbar\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#23425f\" stroke-width=\"1\"/>\n"
                ));
            }
        }
        svg.push_str(&format!(
            "<circle class=\"pt\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"#23425f\"/>\n"
        ));
        svg.push_str(&format!(
            "<text class=\"ptlabel\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#23425f\">{}</text>\n",
            cx + 7.0,
            cy - 7.0,
            xml_escape(&p.label)
        ));
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders and writes the SVG.
pub fn render_plane(points: &[PlanePoint], reference: &PlanePoint, out: &Path) -> Result<()> {
    std::fs::write(out, plane_svg(points, reference))?;
    Ok(())
}
