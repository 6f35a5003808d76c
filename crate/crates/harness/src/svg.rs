//! Self-contained SVG line charts of aggregate results.
//!
//! One polyline per method over the sweep values. EQ points carry ±1
//! standard-error bars; SS lines sit on a shaded ±1 standard-deviation band.
//! SS is drawn only over feasible runs, so a method with no feasible run at
//! some sweep value has a gap there.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::experiment::{Aggregate, ResultsTable, SweepAxis};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Eq,
    Ss,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Point {
    x: f64,
    y: f64,
    spread: f64,
}

fn point(a: &Aggregate, metric: Metric, x: f64) -> Option<Point> {
    match metric {
        Metric::Eq => Some(Point { x, y: a.eq_mean, spread: a.eq_se }),
        Metric::Ss => Some(Point { x, y: a.ss_mean?, spread: a.ss_sd.unwrap_or(0.0) }),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// The chart as an SVG document. Refuses a table with no aggregate rows.
pub fn render_svg(table: &ResultsTable, metric: Metric) -> Result<String> {
    if table.aggregates.is_empty() {
        return Err(HarnessError::Config("cannot plot an empty results table".into()));
    }
    let log_x = table.axis == Some(SweepAxis::NCal) && table.aggregates.iter().all(|a| a.sweep_value > 0.0);
    let to_x = |v: f64| if log_x { v.log10() } else { v };

    let methods = table.methods();
    let series: Vec<Vec<Option<Point>>> = methods
        .iter()
        .map(|&m| {
            table.aggregates.iter().filter(|a| a.method == m).map(|a| point(a, metric, to_x(a.sweep_value))).collect()
        })
        .collect();

    let xs: Vec<f64> = table.aggregates.iter().map(|a| to_x(a.sweep_value)).collect();
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (y0, y1) = match metric {
        Metric::Eq => (0.0, 1.05),
        Metric::Ss => {
            let top = series
                .iter()
                .flatten()
                .flatten()
                .map(|p| p.y + p.spread)
                .fold(1.0_f64, f64::max);
            (0.0, top * 1.05)
        }
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Axes and ticks.
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    let mut ticks: Vec<f64> = table.aggregates.iter().map(|a| a.sweep_value).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for v in ticks {
        let x = sx(to_x(v));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(v)
        );
    }
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * f64::from(i) / 5.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let x_label = table.axis.map_or("run".to_string(), |a| if log_x { format!("{a} (log scale)") } else { a.to_string() });
    let y_label = match metric {
        Metric::Eq => "EQ (fraction of runs)",
        Metric::Ss => "SS (mean shortlist size)",
    };
    let _ = writeln!(s, r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(&x_label));
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (method, points)) in methods.iter().zip(&series).enumerate() {
        let color = COLORS[i % COLORS.len()];
        // Contiguous runs of present points.
        let mut segments: Vec<Vec<&Point>> = vec![Vec::new()];
        for p in points {
            match p {
                Some(p) => segments.last_mut().expect("non-empty").push(p),
                None => segments.push(Vec::new()),
            }
        }
        let _ = writeln!(s, r#"<g class="series" data-method="{}">"#, escape(&method.to_string()));
        for seg in segments.iter().filter(|seg| !seg.is_empty()) {
            if metric == Metric::Ss {
                let upper = seg.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y + p.spread)));
                let lower = seg.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy((p.y - p.spread).max(y0))));
                let pts: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(s, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, pts.join(" "));
            }
            let pts: Vec<String> = seg.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            for p in seg {
                let (x, y) = (sx(p.x), sy(p.y));
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                if metric == Metric::Eq {
                    let _ = writeln!(
                        s,
                        r#"<line class="error-bar" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                        sy((p.y + p.spread).min(y1)),
                        sy((p.y - p.spread).max(y0))
                    );
                }
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&method.to_string())
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

pub fn emit_svg_lines(table: &ResultsTable, metric: Metric, path: &Path) -> Result<()> {
    let doc = render_svg(table, metric)?;
    let mut f = io::create(path)?;
    f.write_all(doc.as_bytes()).and_then(|()| f.flush()).map_err(|e| HarnessError::io(path, e))
}
