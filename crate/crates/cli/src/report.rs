use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;

use crate::metrics::Metrics;
use crate::{usage, CliResult, ReportArgs};

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn column_title(metric: &str, span: &str) -> String {
    let metric = match metric {
        "rc_auc" => "RC-AUC",
        "fr_auc" => "FR-AUC",
        "accuracy_auc" => "Accuracy-AUC",
        other => other,
    };
    let span = match span {
        "first_50" => "50%",
        "full" => "100%",
        other => other,
    };
    format!("{metric} {span}")
}

/// Best normalized value of each column.
fn column_best(m: &Metrics) -> Vec<Option<f64>> {
    m.columns()
        .iter()
        .map(|&(metric, span)| {
            m.rows
                .iter()
                .filter(|r| r.metric == metric && r.span == span)
                .filter_map(|r| r.normalized)
                .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.max(v))))
        })
        .collect()
}

fn table_html(m: &Metrics) -> String {
    let columns = m.columns();
    let best = column_best(m);
    let mut s = String::from("<table>\n<thead><tr><th>Method</th>");
    for &(metric, span) in &columns {
        let _ = write!(s, "<th>{}</th>", escape(&column_title(metric, span)));
    }
    s.push_str("</tr></thead>\n<tbody>\n");
    for method in m.methods() {
        let _ = write!(s, "<tr><td>{}</td>", escape(method));
        for (k, &(metric, span)) in columns.iter().enumerate() {
            let cell = match m.get(method, metric, span).and_then(|r| r.normalized) {
                Some(v) if Some(v) == best[k] => format!("<b>{v:.3}</b>"),
                Some(v) => format!("{v:.3}"),
                None => "n/a".to_string(),
            };
            let _ = write!(s, "<td>{cell}</td>");
        }
        s.push_str("</tr>\n");
    }
    s.push_str("</tbody>\n</table>\n");
    s
}

fn curve_plots(dir: &Path) -> CliResult<Vec<(String, String)>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".svg"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let path = dir.join(&n);
            let svg = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok((n, svg))
        })
        .collect()
}

fn html(m: &Metrics, plots: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Selective prediction report</title>\n");
    s.push_str("<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}th,td{border:1px solid #999;padding:4px 10px;text-align:right}td:first-child,th:first-child{text-align:left}</style>\n");
    s.push_str("</head>\n<body>\n<h1>Selective prediction report</h1>\n");
    let _ = writeln!(
        s,
        "<p>Task: {}. Evaluation mode: {}{}. Normalized AUC: 1 is the oracle ordering, 0 is random rejection; best per column in bold.</p>",
        m.task.name(),
        escape(&m.mode),
        m.aggregation.as_deref().map(|a| format!(", {} aggregation", escape(a))).unwrap_or_default(),
    );
    s.push_str(&table_html(m));
    for (name, svg) in plots {
        let _ = writeln!(s, "<h2>{}</h2>", escape(name.trim_end_matches(".svg")));
        s.push_str(svg);
    }
    s.push_str("</body>\n</html>\n");
    s
}

/// Grouped bar chart: one group per method, one bar per (metric, span).
fn bars_svg(m: &Metrics) -> String {
    let methods = m.methods();
    let columns = m.columns();
    let (left, right, top, bottom) = (60.0, 160.0, 40.0, 90.0);
    let group = 14.0 * columns.len().max(1) as f64 + 12.0;
    let pw = group * methods.len().max(1) as f64;
    let ph = 300.0;
    let (w, h) = (left + pw + right, top + ph + bottom);
    let values = m.rows.iter().filter_map(|r| r.normalized);
    let lo = values.clone().fold(0.0f64, f64::min);
    let mut hi = values.fold(1.0f64, f64::max);
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let y = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Normalized AUC by method</text>"#, left + pw / 2.0);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(s, r##"<line x1="{left}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, left + pw, y = y(v));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, left - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<line x1="{left}" x2="{}" y1="{z:.1}" y2="{z:.1}" stroke="black"/>"#, left + pw, z = y(0.0));
    for (g, method) in methods.iter().enumerate() {
        let gx = left + g as f64 * group + 6.0;
        for (k, &(metric, span)) in columns.iter().enumerate() {
            if let Some(v) = m.get(method, metric, span).and_then(|r| r.normalized) {
                let (y0, y1) = (y(v.max(0.0)), y(v.min(0.0)));
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{y0:.1}" width="12" height="{:.1}" fill="{}"/>"#,
                    gx + 14.0 * k as f64,
                    (y1 - y0).max(0.5),
                    PALETTE[k % PALETTE.len()]
                );
            }
        }
        let lx = gx + group / 2.0 - 6.0;
        let ly = top + ph + 12.0;
        let _ = writeln!(s, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-45 {lx:.1} {ly:.1})">{}</text>"#, escape(method));
    }
    for (k, &(metric, span)) in columns.iter().enumerate() {
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{}"/>"#, ly - 10.0, PALETTE[k % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 18.0, escape(&column_title(metric, span)));
    }
    s.push_str("</svg>\n");
    s
}

pub fn report(a: &ReportArgs) -> CliResult<()> {
    let bytes = fs::read(&a.metrics).with_context(|| format!("reading {}", a.metrics.display()))?;
    let metrics: Metrics =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", a.metrics.display()))?;
    let ext = a.out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let out = match ext.as_deref() {
        Some("html") | Some("htm") => {
            let plots = match &a.curves {
                Some(dir) => curve_plots(dir)?,
                None => Vec::new(),
            };
            html(&metrics, &plots)
        }
        Some("svg") => bars_svg(&metrics),
        _ => return usage("--out must end in .html or .svg"),
    };
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
