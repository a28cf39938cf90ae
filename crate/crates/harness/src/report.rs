//! Similarity distributions per condition, as CSV and a standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::RunRecord;

pub const BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub condition: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Scores below zero; they are also counted in the first bin.
    pub negatives: usize,
    pub histogram: [usize; BINS],
}

/// A single labelled passage result, drawn as a marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub passage_id: String,
    pub condition: String,
    pub similarity: f64,
}

/// A directional expectation between two labelled passages, each named by
/// passage id or label. It is evaluated and reported, never enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub higher: String,
    pub lower: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub name: String,
    pub condition: String,
    pub higher: String,
    pub lower: String,
    pub higher_score: f64,
    pub lower_score: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub passage_id: String,
    pub condition: String,
    pub stage: String,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub conditions: Vec<ConditionStats>,
    pub markers: Vec<Marker>,
    pub comparisons: Vec<ComparisonResult>,
    pub failures: Vec<Failure>,
}

pub fn bin_of(s: f64) -> usize {
    ((s * BINS as f64).floor().max(0.0) as usize).min(BINS - 1)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn stats(condition: &str, scores: &[f64]) -> Result<ConditionStats> {
    if scores.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut histogram = [0; BINS];
    for &s in scores {
        histogram[bin_of(s)] += 1;
    }
    Ok(ConditionStats {
        condition: condition.to_string(),
        count: scores.len(),
        mean: scores.iter().sum::<f64>() / scores.len() as f64,
        median: median(&sorted),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        negatives: scores.iter().filter(|s| **s < 0.0).count(),
        histogram,
    })
}

/// Summarizes scored records per condition. Fails when nothing was scored.
pub fn summarize(records: &[RunRecord], comparisons: &[Comparison]) -> Result<Report> {
    let mut by_condition: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut markers = Vec::new();
    let mut failures = Vec::new();
    for r in records {
        match (r.similarity, &r.error) {
            (Some(s), _) => {
                by_condition.entry(&r.condition).or_default().push(s);
                if let Some(label) = &r.label {
                    markers.push(Marker {
                        label: label.clone(),
                        passage_id: r.passage_id.clone(),
                        condition: r.condition.clone(),
                        similarity: s,
                    });
                }
            }
            (None, Some(e)) => failures.push(Failure {
                passage_id: r.passage_id.clone(),
                condition: r.condition.clone(),
                stage: format!("{:?}", e.stage).to_lowercase(),
                kind: e.kind.clone(),
                message: e.message.clone(),
            }),
            (None, None) => {}
        }
    }
    if by_condition.is_empty() {
        return Err(Error::EmptyReport);
    }
    let conditions = by_condition
        .iter()
        .map(|(c, scores)| stats(c, scores))
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::new();
    for cmp in comparisons {
        for cond in by_condition.keys() {
            let find = |id: &str| {
                markers
                    .iter()
                    .rev()
                    .find(|m| (m.passage_id == id || m.label == id) && m.condition == *cond)
                    .map(|m| m.similarity)
            };
            if let (Some(h), Some(l)) = (find(&cmp.higher), find(&cmp.lower)) {
                results.push(ComparisonResult {
                    name: cmp.name.clone(),
                    condition: cond.to_string(),
                    higher: cmp.higher.clone(),
                    lower: cmp.lower.clone(),
                    higher_score: h,
                    lower_score: l,
                    holds: h >= l,
                });
            }
        }
    }
    Ok(Report {
        conditions,
        markers,
        comparisons: results,
        failures,
    })
}

/// File-name-safe form of a condition name.
pub fn slug(condition: &str) -> String {
    let mut out = String::new();
    for c in condition.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("condition,count,mean,median,min,max,negatives\n");
        for c in &self.conditions {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                csv_field(&c.condition),
                c.count,
                c.mean,
                c.median,
                c.min,
                c.max,
                c.negatives
            );
        }
        out
    }

    pub fn histogram_csv(stats: &ConditionStats) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (i, n) in stats.histogram.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.2},{:.2},{n}",
                i as f64 / BINS as f64,
                (i + 1) as f64 / BINS as f64
            );
        }
        out
    }

    /// Plain-text digest for terminals and logs.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.conditions {
            let _ = writeln!(
                out,
                "{}: n={} mean={:.4} median={:.4} min={:.4} max={:.4} negatives={}",
                c.condition, c.count, c.mean, c.median, c.min, c.max, c.negatives
            );
        }
        for m in &self.markers {
            let _ = writeln!(
                out,
                "marker {} ({}) [{}]: {:.4}",
                m.label, m.passage_id, m.condition, m.similarity
            );
        }
        for r in &self.comparisons {
            let _ = writeln!(
                out,
                "comparison {} [{}]: {} {:.4} vs {} {:.4} -> {}",
                r.name,
                r.condition,
                r.higher,
                r.higher_score,
                r.lower,
                r.lower_score,
                if r.holds { "holds" } else { "does not hold" }
            );
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "{} failed request(s):", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(
                    out,
                    "  {} [{}] {}/{}: {}",
                    f.passage_id, f.condition, f.stage, f.kind, f.message
                );
            }
        }
        out
    }

    /// Grouped bar chart of the histograms with markers as labelled
    /// vertical lines. No external resources.
    pub fn svg(&self) -> String {
        const COLORS: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];
        let (w, h) = (760.0, 420.0);
        let (left, right, top, bottom) = (60.0, 20.0, 30.0, 60.0 + 18.0 * self.conditions.len() as f64);
        let total_h = h + 18.0 * self.conditions.len() as f64;
        let plot_w = w - left - right;
        let plot_h = total_h - top - bottom;
        let max_count = self
            .conditions
            .iter()
            .flat_map(|c| c.histogram.iter().copied())
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let x_of = |s: f64| left + s.clamp(0.0, 1.0) * plot_w;
        let y_of = |n: f64| top + plot_h - n / max_count * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{total_h}" viewBox="0 0 {w} {total_h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">Embedding similarity to original (1 = identical)</text>"#,
            w / 2.0
        );
        let group = plot_w / BINS as f64;
        let bar = (group - 2.0) / self.conditions.len().max(1) as f64;
        for (ci, c) in self.conditions.iter().enumerate() {
            let color = COLORS[ci % COLORS.len()];
            for (bi, &n) in c.histogram.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let x = left + bi as f64 * group + 1.0 + ci as f64 * bar;
                let y = y_of(n as f64);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="{color}"><title>{}: {n}</title></rect>"#,
                    top + plot_h - y,
                    xml(&c.condition)
                );
            }
            let ly = top + plot_h + 40.0 + 18.0 * ci as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{left}" y="{:.2}" width="12" height="12" fill="{color}"/>"#,
                ly - 10.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly:.2}">{} (n={}, mean {:.3}, median {:.3})</text>"#,
                left + 18.0,
                xml(&c.condition),
                c.count,
                c.mean,
                c.median
            );
        }
        // axes
        let base = top + plot_h;
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            left + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#
        );
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let x = x_of(s);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
                base + 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{}" text-anchor="middle">{s:.1}</text>"#,
                base + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{left}" y="{}" text-anchor="end" dx="-4">{}</text>"#,
            top + 4.0,
            max_count
        );
        let _ = writeln!(svg, r#"<text x="{left}" y="{base}" text-anchor="end" dx="-4">0</text>"#);
        for (i, m) in self.markers.iter().enumerate() {
            let x = x_of(m.similarity);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{base}" stroke="#333" stroke-dasharray="4 3"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} ({:.3})</text>"#,
                x - 3.0,
                top + 12.0 + 13.0 * i as f64,
                xml(&m.label),
                m.similarity
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `summary.csv`, one `histogram-<condition>.csv` per condition,
    /// `report.svg`, `report.json` and `report.txt`. Returns the paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        let mut files = vec![
            (dir.join("summary.csv"), self.summary_csv()),
            (dir.join("report.svg"), self.svg()),
            (
                dir.join("report.json"),
                serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            ),
            (dir.join("report.txt"), self.text()),
        ];
        for c in &self.conditions {
            files.push((
                dir.join(format!("histogram-{}.csv", slug(&c.condition))),
                Self::histogram_csv(c),
            ));
        }
        for (path, body) in &files {
            std::fs::write(path, body).map_err(Error::io(format!("writing {}", path.display())))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_perfect_score() {
        let s = stats("c", &[1.0]).unwrap();
        assert_eq!((s.mean, s.median), (1.0, 1.0));
        assert_eq!(s.histogram.iter().filter(|n| **n > 0).count(), 1);
        assert_eq!(s.histogram[BINS - 1], 1);
    }

    #[test]
    fn arithmetic() {
        let s = stats("c", &[0.2, 0.4, 0.6]).unwrap();
        assert!((s.mean - 0.4).abs() < 1e-12);
        assert_eq!(s.median, 0.4);
        assert_eq!(stats("c", &[0.1, 0.3]).unwrap().median, 0.2);
    }

    #[test]
    fn negatives_land_in_first_bin() {
        let s = stats("c", &[-0.5, 0.01, 0.5]).unwrap();
        assert_eq!(s.negatives, 1);
        assert_eq!(s.histogram[0], 2);
        assert_eq!(s.histogram[10], 1);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(summarize(&[], &[]), Err(Error::EmptyReport)));
    }

    #[test]
    fn histogram_csv_shape() {
        let csv = Report::histogram_csv(&stats("c", &[0.97]).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), BINS + 1);
        assert_eq!(lines[0], "bin_start,bin_end,count");
        assert_eq!(lines[1], "0.00,0.05,0");
        assert_eq!(lines[BINS], "0.95,1.00,1");
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("jabberwocky:jabberwocky@gpt-4o"), "jabberwocky_jabberwocky_gpt-4o");
    }
}
