//! Minimal SVG line charts of bound against lambda.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{PepError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YScale {
    #[default]
    Linear,
    Log10,
    /// `log10(1 + y)`, readable when values straddle the initial value 1.
    LogShift,
}

impl YScale {
    fn map(self, y: f64) -> Option<f64> {
        let v = match self {
            YScale::Linear => y,
            YScale::Log10 if y > 0.0 => y.log10(),
            YScale::LogShift if y > -1.0 => (1.0 + y).log10(),
            _ => return None,
        };
        v.is_finite().then_some(v)
    }

    fn label(self) -> &'static str {
        match self {
            YScale::Linear => "bound",
            YScale::Log10 => "log10(bound)",
            YScale::LogShift => "log10(1 + bound)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// Missing values leave gaps.
    pub points: Vec<(f64, Option<f64>)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 150.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;

/// Render the series; output depends only on the plotted values.
pub fn render_svg(title: &str, series: &[Series], scale: YScale) -> String {
    let mapped: Vec<Vec<(f64, Option<f64>)>> = series
        .iter()
        .map(|s| s.points.iter().map(|&(x, y)| (x, y.and_then(|y| scale.map(y)))).collect())
        .collect();
    let xs = mapped.iter().flatten().map(|p| p.0);
    let ys = mapped.iter().flatten().filter_map(|p| p.1);
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, (ML + W - MR) / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{ML} {MT} V{} H{}" fill="none" stroke="black"/>"#,
        H - MB,
        W - MR
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(xv), H - MB + 18.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ML - 6.0, py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">lambda</text>"#, (ML + W - MR) / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        scale.label()
    );
    for (k, (ser, pts)) in series.iter().zip(&mapped).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in pts {
            match y {
                Some(y) => {
                    let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, px(x), py(y));
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.trim_end());
        for &(x, y) in pts {
            if let Some(y) = y {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
            }
        }
        let ly = MT + 10.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - MR + 10.0, W - MR + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - MR + 36.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, title: &str, series: &[Series], scale: YScale) -> Result<()> {
    std::fs::write(path, render_svg(title, series, scale))?;
    Ok(())
}

/// Series read back from a table: `x_column` against each of `y_columns`.
/// Empty cells are gaps.
pub fn series_from_csv(path: &Path, x_column: &str, y_columns: &[&str]) -> Result<Vec<Series>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PepError::Config(format!("column `{name}` missing from {}", path.display())))
    };
    let xi = col(x_column)?;
    let yi: Vec<usize> = y_columns.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut out: Vec<Series> = y_columns
        .iter()
        .map(|c| Series {
            name: c.to_string(),
            points: Vec::new(),
        })
        .collect();
    for rec in rdr.records() {
        let rec = rec?;
        let x: f64 = rec[xi]
            .parse()
            .map_err(|_| PepError::Config(format!("bad number `{}`", &rec[xi])))?;
        for (s, &i) in out.iter_mut().zip(&yi) {
            s.points.push((x, rec[i].parse().ok()));
        }
    }
    Ok(out)
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    let r = (v * 1e3).round() / 1e3;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Series> {
        vec![Series {
            name: "a<b".into(),
            points: vec![(0.0, Some(1.0)), (0.5, None), (1.0, Some(3.0))],
        }]
    }

    #[test]
    fn gaps_start_new_subpaths() {
        let svg = render_svg("t", &series(), YScale::Linear);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        let path = svg.lines().find(|l| l.contains("stroke-width=\"2\"") && l.starts_with("<path")).unwrap();
        assert_eq!(path.matches('M').count(), 2);
    }

    #[test]
    fn log_scales_drop_invalid_values() {
        let s = vec![Series {
            name: "x".into(),
            points: vec![(0.0, Some(-2.0)), (1.0, Some(0.0)), (2.0, Some(9.0))],
        }];
        assert_eq!(render_svg("t", &s, YScale::Log10).matches("<circle").count(), 1);
        assert_eq!(render_svg("t", &s, YScale::LogShift).matches("<circle").count(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "lambda,a<b\n0,1\n0.5,\n1,3\n").unwrap();
        let back = series_from_csv(&p, "lambda", &["a<b"]).unwrap();
        assert_eq!(back, series());
    }
}
