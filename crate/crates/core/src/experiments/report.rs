use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sweep::{SweepAggregate, SweepCell, SweepResult};
use super::{AuditSuite, NtsBenchResult, TabularDemo};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Sweep(SweepResult),
    Tabular(TabularDemo),
    Audit(AuditSuite),
    NtsBench(NtsBenchResult),
}

/// Writes `report` to `path`. CSV and SVG exist only for sweeps.
pub fn emit_report(report: &Report, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match (format, report) {
        (ReportFormat::Json, r) => serde_json::to_string_pretty(r)? + "\n",
        (ReportFormat::Csv, Report::Sweep(s)) => s.to_csv_string(),
        (ReportFormat::Svg, Report::Sweep(s)) => s.to_svg(),
        (f, _) => return Err(Error::invalid(format!("{f:?} output is only available for sweeps"))),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Picks `(mean, std)` of one accuracy from an aggregate row.
type Stat = fn(&SweepAggregate) -> (f64, f64);

const HEADER_COMMENT: &str = "# rows with repeat=-1 aggregate one m over non-failed cells: \
conf_* hold the mean confusion, failed counts failed cells, mean_/std_ hold mean and sample std";

fn conf_names(k: usize) -> impl Iterator<Item = String> {
    (0..k).flat_map(move |i| (0..k).map(move |j| format!("conf_{i}{j}")))
}

fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["m", "repeat", "final_train_acc", "final_test_acc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(conf_names(k));
    h.extend(
        [
            "failed",
            "mean_train_acc",
            "mean_test_acc",
            "std_train_acc",
            "std_test_acc",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("bad integer {s:?}")))
}

impl SweepResult {
    pub fn to_csv_string(&self) -> String {
        let k = self.k;
        let mut out = String::new();
        out.push_str(HEADER_COMMENT);
        out.push('\n');
        out.push_str(&header(k).join(","));
        out.push('\n');
        for c in &self.cells {
            let mut row = vec![
                c.m.to_string(),
                c.repeat.to_string(),
                c.final_train_acc.to_string(),
                c.final_test_acc.to_string(),
            ];
            row.extend(c.confusion.iter().flatten().map(f64::to_string));
            row.push(u8::from(c.failed).to_string());
            row.extend(std::iter::repeat_n(String::new(), 4));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for a in &self.aggregates {
            let mut row = vec![a.m.to_string(), "-1".into(), String::new(), String::new()];
            row.extend(a.mean_confusion.iter().flatten().map(f64::to_string));
            row.push(a.failed.to_string());
            row.extend([a.mean_train_acc, a.mean_test_acc, a.std_train_acc, a.std_test_acc].map(|v| v.to_string()));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`SweepResult::to_csv_string`].
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))?
            .split(',')
            .collect();
        let confs = head.iter().filter(|h| h.starts_with("conf_")).count();
        let k = (confs as f64).sqrt() as usize;
        if k * k != confs || head != header(k) {
            return Err(Error::Parse("unexpected sweep header".into()));
        }
        let mut cells = Vec::new();
        let mut aggregates = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != head.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    n + 1,
                    f.len(),
                    head.len()
                )));
            }
            let m = parse_usize(f[0])?;
            let conf_vals = f[4..4 + confs]
                .iter()
                .map(|s| parse_f64(s))
                .collect::<Result<Vec<_>>>()?;
            let conf: Vec<Vec<f64>> = conf_vals.chunks(k.max(1)).map(<[f64]>::to_vec).collect();
            let failed = f[4 + confs];
            let tail = &f[5 + confs..];
            if f[1] == "-1" {
                aggregates.push(SweepAggregate {
                    m,
                    mean_confusion: conf,
                    failed: parse_usize(failed)?,
                    mean_train_acc: parse_f64(tail[0])?,
                    mean_test_acc: parse_f64(tail[1])?,
                    std_train_acc: parse_f64(tail[2])?,
                    std_test_acc: parse_f64(tail[3])?,
                });
            } else {
                cells.push(SweepCell {
                    m,
                    repeat: parse_usize(f[1])?,
                    final_train_acc: parse_f64(f[2])?,
                    final_test_acc: parse_f64(f[3])?,
                    confusion: conf,
                    failed: match failed {
                        "0" => false,
                        "1" => true,
                        other => return Err(Error::Parse(format!("bad failed flag {other:?}"))),
                    },
                });
            }
        }
        Ok(Self { k, cells, aggregates })
    }

    /// Mean +- std of train and clean-test accuracy against log-scaled m.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let aggs: Vec<&SweepAggregate> = self.aggregates.iter().filter(|a| a.mean_test_acc.is_finite()).collect();
        let (x0, x1, y0, y1) = (pad, w - pad / 2.0, h - pad, pad / 2.0);
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        );
        let ly = |v: f64| y0 + (y1 - y0) * v.clamp(0.0, 1.0);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let y = ly(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"##,
                x0 - 4.0,
                y + 4.0
            );
        }
        if !aggs.is_empty() {
            let lo = (aggs[0].m as f64).log10();
            let hi = (aggs[aggs.len() - 1].m as f64).log10();
            let span = if hi > lo { hi - lo } else { 1.0 };
            let lx = |m: usize| x0 + (x1 - x0) * ((m as f64).log10() - lo) / span;
            for a in &aggs {
                let x = lx(a.m);
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    y0 + 16.0,
                    a.m
                );
            }
            let series: [(&str, &str, Stat); 2] = [
                ("train", "#1f77b4", |a| (a.mean_train_acc, a.std_train_acc)),
                ("test", "#ff7f0e", |a| (a.mean_test_acc, a.std_test_acc)),
            ];
            for (i, (name, color, get)) in series.iter().enumerate() {
                let upper: Vec<String> = aggs
                    .iter()
                    .map(|a| {
                        let (m, sd) = get(a);
                        format!("{:.2},{:.2}", lx(a.m), ly(m + sd))
                    })
                    .collect();
                let lower: Vec<String> = aggs
                    .iter()
                    .rev()
                    .map(|a| {
                        let (m, sd) = get(a);
                        format!("{:.2},{:.2}", lx(a.m), ly(m - sd))
                    })
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    upper.join(" "),
                    lower.join(" ")
                );
                let line: Vec<String> = aggs
                    .iter()
                    .map(|a| format!("{:.2},{:.2}", lx(a.m), ly(get(a).0)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    line.join(" ")
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{name}</text>"#,
                    x1 - 60.0,
                    y1 + 14.0 * (i as f64 + 1.0)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">m (log scale)</text>"#,
            (x0 + x1) / 2.0,
            h - 8.0
        );
        s.push_str("</svg>\n");
        s
    }
}
