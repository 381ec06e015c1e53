// SPDX-License-Identifier: MIT OR Apache-2.0

//! Curve output: a long-format CSV table and an ARL-ADD scatter as SVG.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::sweep::SweepResult;
use crate::error::{Error, Result};
use crate::metrics::{MetricEstimate, MetricName};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns `threshold,metric,value,sem,n_used,extrapolation_flag`; undefined
/// values are empty fields.
pub fn write_curve_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("writing CSV: {e}"));
    w.write_record(["threshold", "metric", "value", "sem", "n_used", "extrapolation_flag"])
        .map_err(csv_err)?;
    for p in &result.points {
        for m in &p.metrics {
            w.write_record([
                p.threshold.to_string(),
                m.name.as_str().to_string(),
                opt(m.value),
                opt(m.sem),
                m.n_used.to_string(),
                m.extrapolation_flag.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::invalid(format!("writing CSV: {e}")))
}

/// One estimator family drawn in the ARL-ADD plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Family {
    pub label: &'static str,
    pub class: &'static str,
    pub arl: MetricName,
    pub add: MetricName,
    pub color: &'static str,
}

pub const FAMILIES: [Family; 3] = [
    Family {
        label: "KM",
        class: "km",
        arl: MetricName::KmArl,
        add: MetricName::KmAdd,
        color: "#1f77b4",
    },
    Family {
        label: "LB",
        class: "lb",
        arl: MetricName::LbArl,
        add: MetricName::LbAdd,
        color: "#ff7f0e",
    },
    Family {
        label: "Naive",
        class: "naive",
        arl: MetricName::NaiveArl,
        add: MetricName::LbAdd,
        color: "#2ca02c",
    },
];

struct Point {
    arl: f64,
    arl_sem: f64,
    add: f64,
    add_sem: f64,
}

fn family_points(result: &SweepResult, fam: &Family) -> Vec<Point> {
    let get = |ms: &[MetricEstimate], n| {
        ms.iter()
            .find(|m| m.name == n)
            .and_then(|m| m.value.map(|v| (v, m.sem)))
    };
    result
        .points
        .iter()
        .filter_map(|p| {
            let (arl, arl_sem) = get(&p.metrics, fam.arl)?;
            let (add, add_sem) = get(&p.metrics, fam.add)?;
            (arl > 0.0).then_some(Point {
                arl,
                arl_sem: arl_sem.unwrap_or(0.0),
                add,
                add_sem: add_sem.unwrap_or(0.0),
            })
        })
        .collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

/// Log-x ARL against linear ADD, with error bars and the region beyond `T_max` shaded.
pub fn render_curve_svg(result: &SweepResult) -> String {
    let families: Vec<(Family, Vec<Point>)> = FAMILIES.iter().map(|f| (*f, family_points(result, f))).collect();
    let all = families.iter().flat_map(|(_, ps)| ps);

    let (mut x_lo, mut x_hi, mut y_hi) = (f64::INFINITY, 0.0f64, 0.0f64);
    for p in all {
        x_lo = x_lo.min((p.arl - p.arl_sem).max(p.arl * 0.5));
        x_hi = x_hi.max(p.arl + p.arl_sem);
        y_hi = y_hi.max(p.add + p.add_sem);
    }
    if result.t_max > 0.0 {
        x_hi = x_hi.max(result.t_max * 1.2);
    }
    if !x_lo.is_finite() {
        x_lo = 1.0;
    }
    let x_lo = x_lo.max(1e-12);
    let x_hi = if x_hi <= x_lo { x_lo * 10.0 } else { x_hi };
    let y_hi = if y_hi > 0.0 { y_hi * 1.05 } else { 1.0 };
    let (lx0, lx1) = (x_lo.log10(), x_hi.log10());
    let sx = |x: f64| LEFT + (x.max(x_lo).log10() - lx0) / (lx1 - lx0) * (WIDTH - LEFT - RIGHT);
    let sy = |y: f64| HEIGHT - BOTTOM - y.max(0.0) / y_hi * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if result.t_max > 0.0 && result.t_max < x_hi {
        let x0 = sx(result.t_max);
        let _ = writeln!(
            s,
            r##"<rect class="extrapolation" x="{x0:.2}" y="{TOP}" width="{:.2}" height="{:.2}" fill="#999999" fill-opacity="0.2"/>"##,
            WIDTH - RIGHT - x0,
            HEIGHT - TOP - BOTTOM
        );
    }
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{LEFT},{TOP} V{:.2} H{:.2}" stroke="black" fill="none"/>"#,
        HEIGHT - BOTTOM,
        WIDTH - RIGHT
    );
    for k in lx0.ceil() as i32..=lx1.floor() as i32 {
        let x = sx(10f64.powi(k));
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"#,
            HEIGHT - BOTTOM + 16.0
        );
    }
    for i in 0..=4 {
        let v = y_hi * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(v) + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">ARL</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">ADD</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );

    for (i, (fam, pts)) in families.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<g class="family {}" stroke="{}" fill="{}">"#,
            fam.class, fam.color, fam.color
        );
        for p in pts {
            let (x, y) = (sx(p.arl), sy(p.add));
            if p.arl_sem > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line class="errorbar" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
                    sx(p.arl - p.arl_sem),
                    sx(p.arl + p.arl_sem)
                );
            }
            if p.add_sem > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line class="errorbar" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
                    sy(p.add - p.add_sem),
                    sy(p.add + p.add_sem)
                );
            }
            let _ = writeln!(
                s,
                r#"<circle class="marker {}" cx="{x:.2}" cy="{y:.2}" r="3"/>"#,
                fam.class
            );
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{:.2}" y="{ly:.2}" stroke="none">{}</text>"#,
            LEFT + 12.0,
            fam.label
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

pub fn save_curve_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_curve_csv(result, std::io::BufWriter::new(file))
}

pub fn save_curve_svg(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_curve_svg(result)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{DetectorConfig, DetectorKind};
    use crate::harness::sweep::{CurvePoint, ThresholdGrid};

    fn est(name: MetricName, value: Option<f64>) -> MetricEstimate {
        MetricEstimate {
            name,
            value,
            sem: value.map(|_| 0.5),
            n_used: if value.is_some() { 3 } else { 0 },
            upper_limit: None,
            extrapolation_flag: false,
            tail_survival: None,
        }
    }

    fn result(n: usize, lb_missing_at: Option<usize>) -> SweepResult {
        let points = (0..n)
            .map(|i| {
                let t = (i + 1) as f64;
                let lb = if Some(i) == lb_missing_at { None } else { Some(10.0 * t) };
                CurvePoint {
                    threshold: t,
                    metrics: vec![
                        est(MetricName::KmArl, Some(20.0 * t)),
                        est(MetricName::KmAdd, Some(t)),
                        est(MetricName::LbArl, lb),
                        est(MetricName::LbAdd, Some(t)),
                        est(MetricName::NaiveArl, Some(5.0 * t)),
                    ],
                    beyond_horizon: false,
                    wall_time_ms: 1,
                }
            })
            .collect();
        SweepResult {
            fingerprint: "x".into(),
            detector: DetectorConfig::new(DetectorKind::Given, 0.0),
            thresholds: ThresholdGrid::new((1..=n).map(|i| i as f64).collect()).unwrap(),
            points,
            t_max: 100.0,
            delta_t_max: 50.0,
        }
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let mut buf = Vec::new();
        write_curve_csv(&result(1, Some(0)), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "threshold,metric,value,sem,n_used,extrapolation_flag");
        assert_eq!(lines[1], "1,km-arl,20,0.5,3,false");
        assert_eq!(lines[3], "1,lb-arl,,,0,false");
    }

    #[test]
    fn svg_marker_counts() {
        let svg = render_curve_svg(&result(20, Some(4)));
        assert_eq!(svg.matches(r#"class="marker km""#).count(), 20);
        assert_eq!(svg.matches(r#"class="marker lb""#).count(), 19);
        assert_eq!(svg.matches(r#"class="marker naive""#).count(), 20);
        assert_eq!(svg.matches(r#"class="extrapolation""#).count(), 1);
        assert!(svg.starts_with("<svg"));
    }
}
