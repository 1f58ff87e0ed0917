//! Post-processing of iteration results: median tables, best taxonomy
//! combinations, leaf frequencies and box plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{median, median_summary, IterationResult};
use crate::features::quantile_sorted;
use crate::models::Family;
use crate::selection::Method;
use crate::taxonomy::Taxonomy;

/// One (dataset, family, tuned) cell of the taxonomy method.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelCell {
    pub dataset: String,
    pub family: Family,
    pub tuned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSet {
    pub label: String,
    pub leaves: Vec<String>,
    /// Median inner-CV score of the combination over the cell's iterations.
    pub median_score: f64,
}

/// Per cell, the taxonomy combination with the highest median score across
/// iterations. Ties go to fewer leaves, then to enumeration order. Cells
/// without taxonomy results are absent.
pub fn best_feature_sets(results: &[IterationResult], taxonomy: &Taxonomy) -> Result<BTreeMap<ModelCell, BestSet>> {
    let mut cells: BTreeMap<ModelCell, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.method == Method::Taxonomy) {
        let Some(scores) = &r.candidate_scores else { continue };
        let cell = cells
            .entry(ModelCell {
                dataset: r.dataset.clone(),
                family: r.family,
                tuned: r.tuned,
            })
            .or_default();
        for (label, &s) in scores {
            cell.entry(label.clone()).or_default().push(s);
        }
    }
    let mut out = BTreeMap::new();
    for (cell, by_label) in cells {
        let mut best: Option<(f64, usize, usize, BestSet)> = None;
        for (label, scores) in by_label {
            let combo = taxonomy
                .combination_by_label(&label)
                .ok_or_else(|| Error::Config(format!("combination `{label}` is not in the taxonomy")))?;
            let m = median(&scores).expect("non-empty");
            let rank = (combo.len(), combo.rank);
            let better = match &best {
                None => true,
                Some((bm, bl, br, _)) => m > *bm || (m == *bm && rank < (*bl, *br)),
            };
            if better {
                best = Some((
                    m,
                    rank.0,
                    rank.1,
                    BestSet {
                        label,
                        leaves: combo.leaves.clone(),
                        median_score: m,
                    },
                ));
            }
        }
        if let Some((_, _, _, set)) = best {
            out.insert(cell, set);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// Leaf name to the number of cells whose best set contains it, in
    /// taxonomy order.
    pub counts: IndexMap<String, usize>,
    pub cells: usize,
}

impl FrequencyTable {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

pub fn frequency_analysis<'a>(best_sets: impl IntoIterator<Item = &'a BestSet>, taxonomy: &Taxonomy) -> FrequencyTable {
    let mut counts: IndexMap<String, usize> = taxonomy.leaves().iter().map(|l| (l.name.clone(), 0)).collect();
    let mut cells = 0;
    for set in best_sets {
        cells += 1;
        for leaf in &set.leaves {
            *counts.entry(leaf.clone()).or_default() += 1;
        }
    }
    FrequencyTable { counts, cells }
}

/// Five-number summary with whiskers at the most extreme values inside
/// `1.5 * IQR` of the quartiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let reach = 1.5 * (q3 - q1);
    let (lo, hi) = (q1 - reach, q3 + reach);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Some(BoxStats {
        n: v.len(),
        min: v[0],
        q1,
        median: quantile_sorted(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
    })
}

/// A labeled box of one plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGroup {
    pub label: String,
    pub stats: BoxStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxPlot {
    pub title: String,
    pub groups: Vec<BoxGroup>,
    /// Groups dropped because they had no values.
    pub diagnostics: Vec<String>,
}

pub fn emit_boxplot(title: &str, groups: &[(String, Vec<f64>)]) -> BoxPlot {
    let mut out = BoxPlot {
        title: title.to_string(),
        groups: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (label, values) in groups {
        match box_stats(values) {
            Some(stats) => out.groups.push(BoxGroup {
                label: label.clone(),
                stats,
            }),
            None => out.diagnostics.push(format!("{title}: group `{label}` has no values and was omitted")),
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl BoxPlot {
    /// SVG document on a fixed [0, 1] score axis. Every box element carries
    /// its exact statistics as `data-*` attributes.
    pub fn to_svg(&self) -> String {
        const BOX_W: f64 = 60.0;
        const GAP: f64 = 30.0;
        const LEFT: f64 = 50.0;
        const TOP: f64 = 40.0;
        const PLOT_H: f64 = 300.0;
        let width = LEFT + GAP + self.groups.len() as f64 * (BOX_W + GAP);
        let height = TOP + PLOT_H + 90.0;
        let y = |v: f64| TOP + PLOT_H * (1.0 - v.clamp(0.0, 1.0));
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<title>{}</title>"#, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, TOP + PLOT_H);
        for tick in 0..=10 {
            let v = f64::from(tick) / 10.0;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#,
                LEFT - 4.0,
                LEFT - 6.0,
                y(v) + 4.0,
                y = y(v)
            );
        }
        for (i, g) in self.groups.iter().enumerate() {
            let b = &g.stats;
            let x0 = LEFT + GAP + i as f64 * (BOX_W + GAP);
            let cx = x0 + BOX_W / 2.0;
            let outliers: Vec<String> = b.outliers.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                s,
                r#"<g class="box" data-label="{}" data-n="{}" data-min="{}" data-q1="{}" data-median="{}" data-q3="{}" data-max="{}" data-lower-whisker="{}" data-upper-whisker="{}" data-outliers="{}">"#,
                escape(&g.label),
                b.n,
                b.min,
                b.q1,
                b.median,
                b.q3,
                b.max,
                b.lower_whisker,
                b.upper_whisker,
                outliers.join(" ")
            );
            let _ = writeln!(s, r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#, y(b.upper_whisker), y(b.q3));
            let _ = writeln!(s, r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#, y(b.q1), y(b.lower_whisker));
            for w in [b.lower_whisker, b.upper_whisker] {
                let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#, cx - 10.0, cx + 10.0, y = y(w));
            }
            let _ = writeln!(
                s,
                r##"<rect x="{x0}" y="{}" width="{BOX_W}" height="{}" fill="#9ecae1" stroke="black"/>"##,
                y(b.q3),
                (y(b.q1) - y(b.q3)).max(0.5)
            );
            let _ = writeln!(s, r#"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="2"/>"#, x0 + BOX_W, y = y(b.median));
            for o in &b.outliers {
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{}" r="2.5" fill="none" stroke="black"/>"#, y(*o));
            }
            let _ = writeln!(
                s,
                r#"<text x="{cx}" y="{}" text-anchor="end" transform="rotate(-35 {cx} {})">{}</text>"#,
                TOP + PLOT_H + 15.0,
                TOP + PLOT_H + 15.0,
                escape(&g.label)
            );
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Reads back the statistics embedded in an SVG written by [`BoxPlot::to_svg`].
pub fn parse_svg_stats(svg: &str) -> Result<Vec<BoxGroup>> {
    let attr = |tag: &str, name: &str| -> Result<String> {
        let key = format!(" data-{name}=\"");
        let start = tag
            .find(&key)
            .ok_or_else(|| Error::Schema(format!("box element lacks data-{name}")))?
            + key.len();
        let end = tag[start..]
            .find('"')
            .ok_or_else(|| Error::Schema("unterminated attribute".into()))?;
        Ok(tag[start..start + end]
            .replace("&quot;", "\"")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&amp;", "&"))
    };
    let num = |tag: &str, name: &str| -> Result<f64> {
        attr(tag, name)?
            .parse()
            .map_err(|_| Error::Schema(format!("data-{name} is not a number")))
    };
    let mut out = Vec::new();
    for line in svg.lines().filter(|l| l.starts_with("<g class=\"box\"")) {
        let outliers = attr(line, "outliers")?;
        out.push(BoxGroup {
            label: attr(line, "label")?,
            stats: BoxStats {
                n: num(line, "n")? as usize,
                min: num(line, "min")?,
                q1: num(line, "q1")?,
                median: num(line, "median")?,
                q3: num(line, "q3")?,
                max: num(line, "max")?,
                lower_whisker: num(line, "lower-whisker")?,
                upper_whisker: num(line, "upper-whisker")?,
                outliers: outliers
                    .split_whitespace()
                    .map(|v| v.parse().map_err(|_| Error::Schema("bad outlier value".into())))
                    .collect::<Result<_>>()?,
            },
        });
    }
    Ok(out)
}

/// Box label for a (method, tuned) pair.
pub fn box_label(method: Method, tuned: bool) -> String {
    format!("{method} ({})", if tuned { "tuned" } else { "default" })
}

fn file_slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// One plot per (dataset, family) with a box per (method, tuned) pair, in
/// result order.
pub fn boxplots(results: &[IterationResult]) -> Vec<(String, Family, BoxPlot)> {
    let mut data: BTreeMap<(String, Family), IndexMap<(Method, bool), Vec<f64>>> = BTreeMap::new();
    for r in results {
        data.entry((r.dataset.clone(), r.family))
            .or_default()
            .entry((r.method, r.tuned))
            .or_default()
            .push(r.weighted_f1);
    }
    data.into_iter()
        .map(|((dataset, family), boxes)| {
            let mut boxes: Vec<_> = boxes.into_iter().collect();
            boxes.sort_by_key(|((m, t), _)| (*t, *m));
            let groups: Vec<(String, Vec<f64>)> = boxes.into_iter().map(|((m, t), v)| (box_label(m, t), v)).collect();
            let plot = emit_boxplot(&format!("{dataset}: {} weighted F1", family.title()), &groups);
            (dataset, family, plot)
        })
        .collect()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv(e).context(path.display().to_string())
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Files and messages produced by [`write_reports`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportOutput {
    pub files: Vec<PathBuf>,
    pub diagnostics: Vec<String>,
}

/// Writes every report artifact for `results` into `dir`.
pub fn write_reports(results: &[IterationResult], taxonomy: &Taxonomy, dir: &Path) -> Result<ReportOutput> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = ReportOutput::default();

    let path = dir.join("summary_medians.csv");
    let mut counts: BTreeMap<_, usize> = BTreeMap::new();
    for r in results {
        *counts.entry(crate::experiment::CellKey::of(r)).or_default() += 1;
    }
    let rows = median_summary(results)
        .into_iter()
        .map(|(k, m)| {
            vec![
                k.dataset.clone(),
                k.family.to_string(),
                k.method.to_string(),
                k.tuned.to_string(),
                counts[&k].to_string(),
                m.to_string(),
            ]
        })
        .collect();
    write_csv(&path, &["dataset", "family", "method", "tuned", "iterations", "median_weighted_f1"], rows)?;
    out.files.push(path);

    let best = best_feature_sets(results, taxonomy)?;
    let path = dir.join("best_feature_sets.csv");
    let rows = best
        .iter()
        .map(|(c, b)| {
            vec![
                c.dataset.clone(),
                c.family.to_string(),
                c.tuned.to_string(),
                b.label.clone(),
                b.leaves.join(";"),
                b.median_score.to_string(),
            ]
        })
        .collect();
    write_csv(&path, &["dataset", "family", "tuned", "label", "leaves", "median_inner_score"], rows)?;
    out.files.push(path);

    let path = dir.join("frequency.csv");
    let mut rows = Vec::new();
    let datasets: Vec<&String> = best.keys().map(|c| &c.dataset).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for ds in datasets {
        let table = frequency_analysis(best.iter().filter(|(c, _)| &c.dataset == ds).map(|(_, b)| b), taxonomy);
        for (leaf, n) in &table.counts {
            rows.push(vec![ds.clone(), leaf.clone(), n.to_string(), table.cells.to_string()]);
        }
    }
    write_csv(&path, &["dataset", "leaf", "count", "cells"], rows)?;
    out.files.push(path);

    let mut stat_rows = Vec::new();
    for (dataset, family, plot) in boxplots(results) {
        let path = dir.join(format!("boxplot_{}_{}.svg", file_slug(&dataset), family.as_str()));
        fs::write(&path, plot.to_svg()).map_err(|e| Error::io(&path, e))?;
        out.files.push(path);
        out.diagnostics.extend(plot.diagnostics.iter().cloned());
        for g in &plot.groups {
            let b = &g.stats;
            stat_rows.push(vec![
                dataset.clone(),
                family.to_string(),
                g.label.clone(),
                b.n.to_string(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
                b.lower_whisker.to_string(),
                b.upper_whisker.to_string(),
                b.outliers.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            ]);
        }
    }
    let path = dir.join("boxplot_stats.csv");
    write_csv(
        &path,
        &[
            "dataset",
            "family",
            "group",
            "n",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "lower_whisker",
            "upper_whisker",
            "outliers",
        ],
        stat_rows,
    )?;
    out.files.push(path);

    let path = dir.join("fit_log.csv");
    let rows = results
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.seed.to_string(),
                r.fold.to_string(),
                r.method.to_string(),
                r.family.to_string(),
                r.tuned.to_string(),
                r.selection_fits.to_string(),
                r.tuning_fits.to_string(),
                r.fit_count.to_string(),
            ]
        })
        .collect();
    write_csv(
        &path,
        &["dataset", "seed", "fold", "method", "family", "tuned", "selection_fits", "tuning_fits", "fit_count"],
        rows,
    )?;
    out.files.push(path);
    Ok(out)
}

/// Text table of medians: one row per (dataset, family, tuned), one column per method.
pub fn format_median_table(results: &[IterationResult]) -> String {
    let summary = median_summary(results);
    let mut methods: Vec<Method> = summary.keys().map(|k| k.method).collect();
    methods.sort();
    methods.dedup();
    let mut rows: BTreeMap<(String, Family, bool), BTreeMap<Method, f64>> = BTreeMap::new();
    for (k, m) in &summary {
        rows.entry((k.dataset.clone(), k.family, k.tuned)).or_default().insert(k.method, *m);
    }
    let mut s = format!("{:<12} {:<20} {:<6}", "dataset", "model", "tuned");
    for m in &methods {
        let _ = write!(s, " {:>9}", m.as_str());
    }
    s.push('\n');
    for ((ds, family, tuned), by_method) in rows {
        let _ = write!(s, "{:<12} {:<20} {:<6}", ds, family.title(), if tuned { "yes" } else { "no" });
        for m in &methods {
            let cell = by_method.get(m).copied();
            let _ = write!(s, " {:>9}", cell.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()));
        }
        s.push('\n');
    }
    s
}
