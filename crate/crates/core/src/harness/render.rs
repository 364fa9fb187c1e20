//! Text and CSV tables.

use std::fmt::Write;

use super::aggregate::{BenchmarkReport, ModelSummary, Stat};
use crate::lexicon::ClassGroup;
use crate::model::{Criterion, EditType};

pub fn format_mean_se(mean: f64, se: Option<f64>) -> String {
    match se {
        Some(se) => format!("{mean:.4} ± {se:.4}"),
        None => format!("{mean:.4}"),
    }
}

fn cell(s: Option<&Stat>) -> String {
    s.map_or_else(|| "-".to_string(), |s| format_mean_se(s.mean, s.se))
}

struct Table {
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self, out: &mut String) {
        let cols = self.header.len();
        let mut widths = vec![0; cols];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String]| {
            row.iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        writeln!(out, "{}", self.title).unwrap();
        writeln!(out, "{}", line(&self.header)).unwrap();
        let rule: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
        writeln!(out, "{}", "-".repeat(rule)).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", line(r)).unwrap();
        }
        writeln!(out).unwrap();
    }
}

const OVERALL: [Criterion; 6] = [
    Criterion::IQ,
    Criterion::OF,
    Criterion::BF,
    Criterion::OC,
    Criterion::BC,
    Criterion::Total,
];

fn edit_types_present(report: &BenchmarkReport) -> Vec<EditType> {
    EditType::ALL
        .into_iter()
        .filter(|t| report.models.iter().any(|m| m.by_edit_type.contains_key(t)))
        .collect()
}

fn groups_present(report: &BenchmarkReport) -> (Vec<ClassGroup>, Vec<ClassGroup>) {
    ClassGroup::ALL
        .into_iter()
        .partition(|g| report.models.iter().any(|m| m.by_class_group.contains_key(g)))
}

fn tables(report: &BenchmarkReport) -> (Vec<Table>, Vec<String>) {
    let name = |m: &ModelSummary| m.model_id.clone();
    let overall = Table {
        title: "Overall".into(),
        header: std::iter::once("Model".to_string())
            .chain(OVERALL.iter().map(|c| c.title().to_string()))
            .collect(),
        rows: report
            .models
            .iter()
            .map(|m| {
                std::iter::once(name(m))
                    .chain(OVERALL.iter().map(|c| cell(m.criteria.get(c))))
                    .collect()
            })
            .collect(),
    };
    let types = edit_types_present(report);
    let by_type = Table {
        title: "Total by edit type".into(),
        header: std::iter::once("Model".to_string())
            .chain(types.iter().map(|t| t.title().to_string()))
            .collect(),
        rows: report
            .models
            .iter()
            .map(|m| {
                std::iter::once(name(m))
                    .chain(types.iter().map(|t| cell(m.by_edit_type.get(t))))
                    .collect()
            })
            .collect(),
    };
    let (groups, empty) = groups_present(report);
    let by_group = Table {
        title: "Total by edited object class".into(),
        header: std::iter::once("Model".to_string())
            .chain(groups.iter().map(|g| g.title().to_string()))
            .collect(),
        rows: report
            .models
            .iter()
            .map(|m| {
                std::iter::once(name(m))
                    .chain(groups.iter().map(|g| cell(m.by_class_group.get(g))))
                    .collect()
            })
            .collect(),
    };
    let mut notes = report.notes.clone();
    if !empty.is_empty() {
        let names: Vec<&str> = empty.iter().map(|g| g.title()).collect();
        notes.push(format!("no samples for class groups: {}", names.join(", ")));
    }
    (vec![overall, by_type, by_group], notes)
}

/// The three tables plus notes and run metadata, as plain text.
pub fn render_text(report: &BenchmarkReport) -> String {
    let (tables, notes) = tables(report);
    let mut out = String::new();
    for t in &tables {
        t.render(&mut out);
    }
    if !notes.is_empty() {
        writeln!(out, "Notes").unwrap();
        for n in &notes {
            writeln!(out, "- {n}").unwrap();
        }
        writeln!(out).unwrap();
    }
    let md = &report.metadata;
    writeln!(
        out,
        "config {} | weights {} | seed {} | bootstrap B = {}",
        md.config_hash, md.weights_hash, md.seed, md.bootstrap_resamples
    )
    .unwrap();
    out
}

/// One row per statistic: `model,section,column,mean,se,n`.
pub fn render_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("model,section,column,mean,se,n\n");
    let mut row = |m: &str, section: &str, col: &str, s: &Stat| {
        let se = s.se.map(|e| format!("{e:.4}")).unwrap_or_default();
        writeln!(out, "{m},{section},{col},{:.4},{se},{}", s.mean, s.n).unwrap();
    };
    for m in &report.models {
        for c in OVERALL {
            if let Some(s) = m.criteria.get(&c) {
                row(&m.model_id, "overall", c.as_str(), s);
            }
        }
        for (t, s) in &m.by_edit_type {
            row(&m.model_id, "edit_type", t.as_str(), s);
        }
        for (g, s) in &m.by_class_group {
            row(&m.model_id, "class_group", g.title(), s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate::RunMetadata;

    #[test]
    fn table_number_shape() {
        assert_eq!(format_mean_se(0.7329, Some(0.0007)), "0.7329 ± 0.0007");
        assert_eq!(format_mean_se(0.5, None), "0.5000");
    }

    #[test]
    fn empty_groups_become_a_note() {
        let m = ModelSummary {
            model_id: "m".into(),
            samples: 1,
            criteria: [(Criterion::OF, Stat { mean: 0.25, se: Some(0.01), n: 3 })].into(),
            by_edit_type: [(EditType::Removal, Stat { mean: 0.5, se: None, n: 1 })].into(),
            by_class_group: [(ClassGroup::Animal, Stat { mean: 0.5, se: None, n: 1 })].into(),
        };
        let r = BenchmarkReport {
            metadata: RunMetadata::default(),
            models: vec![m],
            notes: vec![],
        };
        let text = render_text(&r);
        assert!(text.contains("0.2500 ± 0.0100"));
        assert!(text.contains("no samples for class groups: Whole Image, Person"));
        assert!(!text.contains("Vehicle  "));
        let csv = render_csv(&r);
        assert!(csv.contains("m,overall,OF,0.2500,0.0100,3\n"));
        assert!(csv.contains("m,class_group,Animal,0.5000,,1\n"));
    }
}
