//! Static report: contour figures, surface tables and an HTML summary.
//!
//! Layout under the output directory: `index.html` with the summary table,
//! `metrics/<metric>.html` with one figure per test, and
//! `<test_id>/<metric>/{figure.svg,surface.csv}`.

pub mod contour;
pub mod csv;
pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::{ResponseSurface, ScoreRecord, ScoreType};
use crate::pipeline::run::SURFACE_FILE;
use crate::pipeline::score::{surface_entries, Summary, PACK_COPY_DIR, SUMMARY_FILE};
use crate::pipeline::suite::read_json;
use crate::reference::{load_reference_pack, ReferencePack};
use crate::stimgen::TestId;
pub use contour::{extract_contours, Contour, ContourSet, EmptySurface};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |e| ReportError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Cell backgrounds from best to worst quarter.
pub const QUARTILE_COLOURS: [&str; 4] = ["#cbe1cd", "#fff8d6", "#ffd8b8", "#fdddd8"];

pub fn higher_is_better(t: ScoreType) -> bool {
    t == ScoreType::Alignment
}

/// Quarter (0 best .. 3 worst) of each value within its column. Tied
/// values share the better rank.
pub fn quartiles(values: &[f64], higher_better: bool) -> Vec<usize> {
    let n = values.len();
    values
        .iter()
        .map(|&v| {
            let better = values.iter().filter(|&&w| if higher_better { w > v } else { w < v }).count();
            (4 * better / n.max(1)).min(3)
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ReportSummary {
    pub figures: usize,
    pub metrics: Vec<String>,
    pub files: Vec<PathBuf>,
}

struct Loaded {
    summary: Option<Summary>,
    pack: Option<ReferencePack>,
    surfaces: Vec<ResponseSurface>,
}

fn load(results: &Path) -> Result<Loaded, ReportError> {
    let sp = results.join("scores").join(SUMMARY_FILE);
    let summary = if sp.exists() { read_json::<Summary>(&sp).ok() } else { None };
    let pdir = results.join("scores").join(PACK_COPY_DIR);
    let pack = if pdir.is_dir() { load_reference_pack(&pdir).ok() } else { None };
    let mut surfaces = Vec::new();
    let entries = surface_entries(&results.join("surfaces")).unwrap_or_default();
    for (_, _, dir) in entries {
        let p = dir.join(SURFACE_FILE);
        if p.exists() {
            if let Ok(s) = read_json::<ResponseSurface>(&p) {
                surfaces.push(s);
            }
        }
    }
    Ok(Loaded { summary, pack, surfaces })
}

fn write(path: &Path, text: &str) -> Result<PathBuf, ReportError> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io(d))?;
    }
    fs::write(path, text).map_err(io(path))?;
    Ok(path.to_path_buf())
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;color:#222}\
table{border-collapse:collapse}td,th{border:1px solid #bbb;padding:4px 8px;text-align:right}\
th{background:#f3f3f3}td.name{text-align:left}td.na{background:#fff}\
figure{display:inline-block;margin:0.5em}.placeholder{width:560px;height:420px;border:1px dashed #bbb;\
display:flex;align-items:center;justify-content:center;color:#777}";

fn page(title: &str, body: &str, stamp: Option<u64>) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{}</title><style>{STYLE}</style></head><body>\n<h1>{}</h1>\n{body}",
        escape(title),
        escape(title)
    );
    if let Some(t) = stamp {
        let _ = writeln!(s, "<p class=\"stamp\">generated at unix time {t}</p>");
    }
    s.push_str("</body></html>\n");
    s
}

fn fmt_value(r: &ScoreRecord) -> String {
    match (r.value, r.degenerate) {
        (Some(v), false) => format!("{v:.3}"),
        (Some(v), true) => format!("{v:.3}*"),
        (None, _) => "n/a*".into(),
    }
}

fn summary_table(metrics: &[String], records: &BTreeMap<(String, TestId), ScoreRecord>, notes: &BTreeMap<(String, TestId), String>) -> String {
    let mut s = String::from("<table>\n<tr><th>metric</th>");
    for t in TestId::ALL {
        let _ = write!(s, "<th title=\"{}\">{}</th>", escape(t.title()), t.as_str());
    }
    s.push_str("</tr>\n");
    let mut colour: BTreeMap<(String, TestId), usize> = BTreeMap::new();
    for t in TestId::ALL {
        let col: Vec<(&String, f64, ScoreType)> = metrics
            .iter()
            .filter_map(|m| records.get(&(m.clone(), t)).and_then(|r| r.value.map(|v| (m, v, r.score_type))))
            .collect();
        if let Some(&(_, _, st)) = col.first() {
            let vals: Vec<f64> = col.iter().map(|c| c.1).collect();
            for ((m, _, _), q) in col.iter().zip(quartiles(&vals, higher_is_better(st))) {
                colour.insert(((*m).clone(), t), q);
            }
        }
    }
    for m in metrics {
        let _ = write!(s, "<tr><td class=\"name\"><a href=\"metrics/{0}.html\">{0}</a></td>", escape(m));
        for t in TestId::ALL {
            let key = (m.clone(), t);
            match (records.get(&key), colour.get(&key)) {
                (Some(r), Some(&q)) => {
                    let _ = write!(s, "<td style=\"background:{}\">{}</td>", QUARTILE_COLOURS[q], fmt_value(r));
                }
                (Some(r), None) => {
                    let _ = write!(s, "<td class=\"na\">{}</td>", fmt_value(r));
                }
                (None, _) => {
                    let title = notes.get(&key).map(|n| escape(n)).unwrap_or_default();
                    let _ = write!(s, "<td class=\"na\" title=\"{title}\"></td>");
                }
            }
        }
        s.push_str("</tr>\n");
    }
    s.push_str("</table>\n");
    s
}

/// Renders everything found under `results` into `out`. Deterministic when
/// `reproducible` is set; otherwise pages carry a generation timestamp.
pub fn render_report(results: &Path, out: &Path, reproducible: bool) -> Result<ReportSummary, ReportError> {
    let data = load(results)?;
    fs::create_dir_all(out).map_err(io(out))?;
    let stamp = (!reproducible).then(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    });

    let written: Vec<Result<Vec<PathBuf>, ReportError>> = data
        .surfaces
        .par_iter()
        .map(|s| {
            let dir = out.join(s.test_id.as_str()).join(&s.metric);
            let svg = write(&dir.join("figure.svg"), &svg::render_figure(s, data.pack.as_ref()))?;
            let csv = write(&dir.join("surface.csv"), &csv::surface_to_csv(s))?;
            Ok(vec![svg, csv])
        })
        .collect();
    let mut files = Vec::new();
    for w in written {
        files.extend(w?);
    }

    let mut records: BTreeMap<(String, TestId), ScoreRecord> = BTreeMap::new();
    let mut notes: BTreeMap<(String, TestId), String> = BTreeMap::new();
    let mut metrics: BTreeSet<String> = data.surfaces.iter().map(|s| s.metric.clone()).collect();
    if let Some(sum) = &data.summary {
        for r in &sum.records {
            metrics.insert(r.metric.clone());
            records.insert((r.metric.clone(), r.test_id), r.clone());
        }
        for u in &sum.unscorable {
            metrics.insert(u.metric.clone());
            notes.insert((u.metric.clone(), u.test_id), u.reason.clone());
        }
        for u in &sum.failed {
            metrics.insert(u.metric.clone());
            notes.insert((u.metric.clone(), u.test_id), format!("failed: {}", u.reason));
        }
    }
    let metrics: Vec<String> = metrics.into_iter().collect();
    let have: BTreeSet<(String, TestId)> = data.surfaces.iter().map(|s| (s.metric.clone(), s.test_id)).collect();

    for m in &metrics {
        let mut body = String::new();
        for t in TestId::ALL {
            let key = (m.clone(), t);
            let caption = match records.get(&key) {
                Some(r) => format!("{}: {}", t.title(), fmt_value(r)),
                None => t.title().to_string(),
            };
            if have.contains(&key) {
                let _ = writeln!(
                    body,
                    "<figure><img src=\"../{}/{}/figure.svg\" alt=\"{}\"><figcaption>{}</figcaption></figure>",
                    t.as_str(),
                    escape(m),
                    escape(&caption),
                    escape(&caption)
                );
            } else {
                let why = notes.get(&key).cloned().unwrap_or_else(|| "not run".into());
                let _ = writeln!(
                    body,
                    "<figure><div class=\"placeholder\">{}</div><figcaption>{}</figcaption></figure>",
                    escape(&why),
                    escape(&caption)
                );
            }
        }
        body.push_str("<p><a href=\"../index.html\">summary</a></p>\n");
        files.push(write(&out.join("metrics").join(format!("{m}.html")), &page(m, &body, stamp))?);
    }

    let mut body = String::new();
    if let Some(sum) = &data.summary {
        let _ = writeln!(body, "<p>reference pack: {}; pooling: {:?}</p>", escape(&sum.pack), sum.pooling);
    }
    body.push_str(&summary_table(&metrics, &records, &notes));
    body.push_str(
        "<p>Alignment: Spearman correlation with human thresholds (higher is better). \
Matching: log10 RMSE (lower is better). Colours mark quarters of each column, best first. \
* degenerate response. Empty cells: not applicable or no human data.</p>\n",
    );
    files.push(write(&out.join("index.html"), &page("Metric summary", &body, stamp))?);
    files.sort();
    Ok(ReportSummary { figures: data.surfaces.len(), metrics, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_buckets() {
        assert_eq!(quartiles(&[0.9, 0.1, 0.5, 0.7], true), vec![0, 3, 2, 1]);
        assert_eq!(quartiles(&[0.9, 0.1, 0.5, 0.7], false), vec![3, 0, 1, 2]);
        assert_eq!(quartiles(&[1.0, 1.0], true), vec![0, 0]);
        assert_eq!(quartiles(&[2.0], true), vec![0]);
    }

    #[test]
    fn empty_results_give_index_only() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("report");
        let r = render_report(tmp.path(), &out, true).unwrap();
        assert_eq!(r.files, vec![out.join("index.html")]);
        let html = fs::read_to_string(out.join("index.html")).unwrap();
        assert!(html.contains("<table>"));
        assert!(!html.contains("stamp"));
    }
}
