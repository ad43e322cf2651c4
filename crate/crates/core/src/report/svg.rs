//! One SVG figure per (test, metric): iso-response contours on log-log
//! axes, human data in red, predicted contrast matches dashed.

use std::fmt::Write;

use super::contour::{default_levels, extract_contours, surface_coords, DEFAULT_LEVEL_COUNT};
use super::escape;
use crate::evaluation::{predict_freq_matches, ResponseSurface};
use crate::reference::{Lookup, ReferencePack};
use crate::stimgen::{AxisKind, TestId};

const W: f64 = 560.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const HUMAN: &str = "#d62728";
const PREDICTED: &str = "#1f4e9c";

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
    fn inside(&self, x: f64, y: f64) -> bool {
        let eps = 1e-9;
        x >= self.x0 - eps && x <= self.x1 + eps && y >= self.y0 - eps && y <= self.y1 + eps
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v}");
    if s.len() > 7 {
        format!("{v:e}")
    } else {
        s
    }
}

/// Green-to-blue ramp over contour levels.
fn level_colour(k: usize, n: usize) -> String {
    let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
    let (r, g, b) = (40.0 + 40.0 * t, 160.0 - 90.0 * t, 90.0 + 110.0 * t);
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], style: &str) {
    // Split where a point leaves the frame.
    let mut run: Vec<(f64, f64)> = Vec::new();
    let flush = |run: &mut Vec<(f64, f64)>, out: &mut String| {
        if run.len() >= 2 {
            let p: Vec<String> = run.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" {style}/>"#, p.join(" "));
        }
        run.clear();
    };
    for &(x, y) in pts {
        if x.is_finite() && y.is_finite() && f.inside(x, y) {
            run.push((x, y));
        } else {
            flush(&mut run, out);
        }
    }
    flush(&mut run, out);
}

fn axes(out: &mut String, f: &Frame, log_x: bool, x_label: &str, y_label: &str, x_names: Option<&[&str]>) {
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let decades = |a: f64, b: f64| ((a - 1e-9).ceil() as i32..=(b + 1e-9).floor() as i32).collect::<Vec<_>>();
    if let Some(names) = x_names {
        for (k, n) in names.iter().enumerate() {
            let x = f.px(k as f64);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{n}</text>"#, H - BOTTOM + 18.0);
        }
    } else if log_x {
        for d in decades(f.x0, f.x1) {
            let x = f.px(d as f64);
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, H - BOTTOM, H - BOTTOM + 5.0);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
                H - BOTTOM + 18.0,
                tick_label(10f64.powi(d))
            );
        }
    }
    for d in decades(f.y0, f.y1) {
        let y = f.py(d as f64);
        let _ = writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            tick_label(10f64.powi(d))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle" font-size="13">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
}

pub fn render_figure(s: &ResponseSurface, pack: Option<&ReferencePack>) -> String {
    let info = s.test_id.info();
    let (xs, ys) = surface_coords(s);
    let f = Frame { x0: xs[0], x1: xs[xs.len() - 1], y0: ys[0], y1: ys[ys.len() - 1] };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}: {}</text>"#,
        W / 2.0,
        escape(s.test_id.title()),
        escape(&s.metric)
    );
    let names = ["Ach", "RG", "YV"];
    let direction = info.axis == AxisKind::Direction;
    axes(&mut out, &f, info.axis.is_log(), info.axis.label(), "contrast", direction.then_some(&names[..]));

    let levels = default_levels(s, DEFAULT_LEVEL_COUNT);
    if let Ok(set) = extract_contours(s, &levels) {
        let _ = writeln!(out, r#"<g fill="none" stroke-width="1.4">"#);
        for c in &set.contours {
            let k = set.levels.iter().position(|&l| l == c.level).unwrap_or(0);
            polyline(&mut out, &f, &c.points, &format!(r#"stroke="{}""#, level_colour(k, set.levels.len())));
        }
        let _ = writeln!(out, "</g>");
    }

    match pack.map(|p| p.get(s.test_id)) {
        Some(Lookup::Threshold(curve)) => {
            let pts: Vec<(f64, f64)> = curve.points.iter().map(|&(a, t)| (a.log10(), t.log10())).collect();
            polyline(&mut out, &f, &pts, &format!(r#"fill="none" stroke="{HUMAN}" stroke-width="2.2""#));
        }
        Some(Lookup::Matching(human)) => {
            for row in &human.matched {
                let pts: Vec<(f64, f64)> = human
                    .test_freqs
                    .iter()
                    .zip(row)
                    .map(|(&fq, m)| (fq.log10(), m.map_or(f64::NAN, f64::log10)))
                    .collect();
                polyline(&mut out, &f, &pts, &format!(r#"fill="none" stroke="{HUMAN}" stroke-width="2""#));
            }
            if let Ok(pred) = predict_freq_matches(s, &human.ref_contrasts, &human.test_freqs) {
                for row in &pred.cells {
                    let pts: Vec<(f64, f64)> = pred
                        .test_freqs
                        .iter()
                        .zip(row)
                        .map(|(&fq, c)| (fq.log10(), c.matched.map_or(f64::NAN, f64::log10)))
                        .collect();
                    polyline(
                        &mut out,
                        &f,
                        &pts,
                        &format!(r#"fill="none" stroke="{PREDICTED}" stroke-width="1.6" stroke-dasharray="6 4""#),
                    );
                }
            }
        }
        Some(Lookup::Color(set)) => {
            for t in &set.triplets {
                let pts: Vec<(f64, f64)> = t.iter().enumerate().map(|(k, &c)| (k as f64, c.log10())).collect();
                polyline(&mut out, &f, &pts, &format!(r#"fill="none" stroke="{HUMAN}" stroke-width="1.5""#));
                for &(x, y) in &pts {
                    if f.inside(x, y) {
                        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{HUMAN}"/>"#, f.px(x), f.py(y));
                    }
                }
            }
        }
        _ => {}
    }
    if s.test_id == TestId::MatchingFreq {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{PREDICTED}">dashed: predicted matches</text>"#,
            LEFT + 8.0,
            TOP + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
