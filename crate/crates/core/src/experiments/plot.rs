//! Summaries of learning-curve and trace CSVs, as CSV or a minimal SVG chart.
//!
//! A learning curve (a file with a `mean_return` column) is summarized as the
//! 10-iteration moving average of mean return and training success. A trace
//! file (`trial`, `step`, `abs_error` columns) is summarized as the mean and
//! standard deviation of the angle error across trials at every step.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::output::write_rows;
use crate::error::{Error, Result};

pub const MOVING_AVERAGE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub x_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    LearningCurve,
    Traces,
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let err = |m: String| Error::InvalidParams(format!("{}: {m}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let headers = r.headers().map_err(|e| err(e.to_string()))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(e.to_string()))?;
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidParams(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .map(|row| {
                row[idx]
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParams(format!("column `{name}`: not a number: {:?}", row[idx])))
            })
            .collect()
    }

    fn kind(&self) -> Result<CsvKind> {
        let has = |n: &str| self.headers.iter().any(|h| h == n);
        if has("mean_return") && has("iteration") {
            Ok(CsvKind::LearningCurve)
        } else if has("trial") && has("step") && has("abs_error") {
            Ok(CsvKind::Traces)
        } else {
            Err(Error::InvalidParams(
                "unrecognized CSV: expected a learning curve or an evaluation trace file".into(),
            ))
        }
    }
}

/// Trailing moving average; the first values average over what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            sum += v;
            if i >= window {
                sum -= values[i - window];
            }
            sum / (i + 1).min(window) as f64
        })
        .collect()
}

fn learning_curve_summary(t: &Table) -> Result<Summary> {
    let iters = t.column("iteration")?;
    let smooth = |name: &str| -> Result<Series> {
        let ma = moving_average(&t.column(name)?, MOVING_AVERAGE_WINDOW);
        Ok(Series {
            name: format!("{name}_ma{MOVING_AVERAGE_WINDOW}"),
            points: iters.iter().copied().zip(ma).collect(),
        })
    };
    Ok(Summary {
        x_label: "iteration".into(),
        series: vec![smooth("mean_return")?, smooth("success_rate")?],
    })
}

fn traces_summary(t: &Table) -> Result<Summary> {
    let steps = t.column("step")?;
    let errors = t.column("abs_error")?;
    let n_steps = steps.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
    let mut sum = vec![0.0; n_steps + 1];
    let mut sum_sq = vec![0.0; n_steps + 1];
    let mut count = vec![0usize; n_steps + 1];
    for (&s, &e) in steps.iter().zip(&errors) {
        let s = s as usize;
        sum[s] += e;
        sum_sq[s] += e * e;
        count[s] += 1;
    }
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for s in 0..=n_steps {
        if count[s] == 0 {
            continue;
        }
        let n = count[s] as f64;
        let m = sum[s] / n;
        mean.push((s as f64, m));
        std.push((s as f64, (sum_sq[s] / n - m * m).max(0.0).sqrt()));
    }
    Ok(Summary {
        x_label: "step".into(),
        series: vec![
            Series {
                name: "mean_abs_error".into(),
                points: mean,
            },
            Series {
                name: "std_abs_error".into(),
                points: std,
            },
        ],
    })
}

pub fn summarize(csv_path: &Path) -> Result<(CsvKind, Summary)> {
    let table = Table::read(csv_path)?;
    let kind = table.kind()?;
    let summary = match kind {
        CsvKind::LearningCurve => learning_curve_summary(&table)?,
        CsvKind::Traces => traces_summary(&table)?,
    };
    Ok((kind, summary))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    series: &'a str,
    x: f64,
    y: f64,
}

pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<()> {
    write_rows(
        path,
        summary.series.iter().flat_map(|s| {
            s.points.iter().map(move |&(x, y)| SummaryRow {
                series: &s.name,
                x,
                y,
            })
        }),
    )
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One panel per series, stacked vertically, each with its own y range.
pub fn render_svg(summary: &Summary) -> String {
    let (w, panel_h, margin) = (640.0, 220.0, 50.0);
    let height = panel_h * summary.series.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, s) in summary.series.iter().enumerate() {
        let top = panel_h * k as f64;
        let (x0, x1, y0, y1) = (margin, w - 20.0, top + panel_h - 35.0, top + 20.0);
        let bounds = |f: fn(&(f64, f64)) -> f64| {
            s.points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (xmin, mut xmax) = bounds(|p| p.0);
        let (ymin, mut ymax) = bounds(|p| p.1);
        if s.points.is_empty() {
            continue;
        }
        if xmax <= xmin {
            xmax = xmin + 1.0;
        }
        if ymax <= ymin {
            ymax = ymin + 1.0;
        }
        let px = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
        let py = |y: f64| y0 + (y - ymin) / (ymax - ymin) * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}">{}</text>"#, y1 - 6.0, s.name);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y1 + 4.0, ymax);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y0, ymin);
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}">{xmin}</text>"#, y0 + 14.0);
        let _ = writeln!(
            svg,
            r#"<text x="{x1}" y="{}" text-anchor="end">{} {xmax}</text>"#,
            y0 + 14.0,
            summary.x_label
        );
        let mut d = String::new();
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            COLORS[k % COLORS.len()]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Summarizes `csv_path` into `out`: an SVG chart when `out` ends in `.svg`,
/// otherwise a long-format CSV (`series,x,y`).
pub fn plot(csv_path: &Path, out: &Path) -> Result<CsvKind> {
    let (kind, summary) = summarize(csv_path)?;
    let is_svg = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    if is_svg {
        fs::write(out, render_svg(&summary)).map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
    } else {
        write_summary_csv(out, &summary)?;
    }
    Ok(kind)
}
