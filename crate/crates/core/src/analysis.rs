//! Descriptive title analyses: content-word overlap with the abstract, title
//! length and windowed edit-distance overlap.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{content_words, tokenize, Stopwords};
use crate::{Error, Result};

/// Header line attached to every overlap report.
pub const EDIT_OVERLAP_DEFINITION: &str = "edit overlap = 1 - min over abstract token windows w with |len(w) - len(title)| <= 2 of token_edit_distance(title, w) / max(len(title), len(w))";

/// Share of the title's distinct content words that occur in the abstract.
/// `None` when the title has no content words.
pub fn lexical_overlap(title: &str, abstract_text: &str, stopwords: &Stopwords) -> Option<f64> {
    let title_words: std::collections::BTreeSet<String> = content_words(title, stopwords).into_iter().collect();
    if title_words.is_empty() {
        return None;
    }
    let abs_words: std::collections::HashSet<String> = content_words(abstract_text, stopwords).into_iter().collect();
    let hit = title_words.iter().filter(|w| abs_words.contains(*w)).count();
    Some(hit as f64 / title_words.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub system: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

/// Token counts per system; systems in key order. Systems without titles are skipped.
pub fn length_stats(titles_by_system: &BTreeMap<String, Vec<String>>) -> Vec<LengthStats> {
    titles_by_system
        .iter()
        .filter(|(_, t)| !t.is_empty())
        .map(|(system, titles)| {
            let mut lens: Vec<usize> = titles.iter().map(|t| tokenize(t).len()).collect();
            lens.sort_unstable();
            let n = lens.len();
            let median = if n % 2 == 1 {
                lens[n / 2] as f64
            } else {
                (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
            };
            LengthStats {
                system: system.clone(),
                n,
                mean: lens.iter().sum::<usize>() as f64 / n as f64,
                median,
            }
        })
        .collect()
}

/// `14.95 vs. 8.27 tokens`
pub fn format_length_comparison(a: &LengthStats, b: &LengthStats) -> String {
    format!("{:.2} vs. {:.2} tokens", a.mean, b.mean)
}

/// Levenshtein distance over token sequences.
pub fn token_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best normalised similarity between the title and any abstract window whose
/// length is within two tokens of the title's. Abstracts shorter than that
/// are compared whole. An empty title scores 0.
pub fn edit_overlap(title: &str, abstract_text: &str) -> f64 {
    let t = tokenize(title);
    let a = tokenize(abstract_text);
    if t.is_empty() {
        return 0.0;
    }
    let sim = |w: &[String]| 1.0 - token_edit_distance(&t, w) as f64 / t.len().max(w.len()) as f64;
    let lo = t.len().saturating_sub(2).max(1);
    let hi = t.len() + 2;
    if a.len() < lo {
        return sim(&a);
    }
    let mut best: f64 = 0.0;
    for len in lo..=hi.min(a.len()) {
        for w in a.windows(len) {
            best = best.max(sim(w));
            if best == 1.0 {
                return 1.0;
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisItem {
    pub system: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub system: String,
    pub titles: usize,
    /// Mean over titles with at least one content word.
    pub lexical_overlap: Option<f64>,
    /// Titles without content words, excluded from `lexical_overlap`.
    pub undefined_overlap: usize,
    pub mean_length: f64,
    pub edit_overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub stopwords_version: String,
    pub rows: Vec<OverlapRow>,
}

pub fn overlap_report(items: &[AnalysisItem], stopwords: &Stopwords) -> Result<OverlapReport> {
    if items.is_empty() {
        return Err(Error::Empty("no titles to analyse".into()));
    }
    let mut by_system: BTreeMap<&str, Vec<&AnalysisItem>> = BTreeMap::new();
    for it in items {
        by_system.entry(&it.system).or_default().push(it);
    }
    let rows = by_system
        .into_iter()
        .map(|(system, items)| {
            let overlaps: Vec<f64> = items
                .iter()
                .filter_map(|i| lexical_overlap(&i.title, &i.abstract_text, stopwords))
                .collect();
            let n = items.len() as f64;
            OverlapRow {
                system: system.to_string(),
                titles: items.len(),
                lexical_overlap: (!overlaps.is_empty()).then(|| overlaps.iter().sum::<f64>() / overlaps.len() as f64),
                undefined_overlap: items.len() - overlaps.len(),
                mean_length: items.iter().map(|i| tokenize(&i.title).len() as f64).sum::<f64>() / n,
                edit_overlap: items.iter().map(|i| edit_overlap(&i.title, &i.abstract_text)).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(OverlapReport {
        stopwords_version: stopwords.version().to_string(),
        rows,
    })
}

impl OverlapReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "system",
            "titles",
            "lexical_overlap",
            "undefined_overlap",
            "mean_length",
            "edit_overlap",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.system.clone(),
                r.titles.to_string(),
                r.lexical_overlap.map(|v| format!("{v:.6}")).unwrap_or_default(),
                r.undefined_overlap.to_string(),
                format!("{:.6}", r.mean_length),
                format!("{:.6}", r.edit_overlap),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<!-- stopwords {}; {} -->", self.stopwords_version, EDIT_OVERLAP_DEFINITION);
        let _ = writeln!(out, "| system | titles | content-word overlap | mean length | edit overlap |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|");
        for r in &self.rows {
            let lex = r
                .lexical_overlap
                .map(|v| format!("{:.1}%", 100.0 * v))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.2} | {:.3} |",
                r.system, r.titles, lex, r.mean_length, r.edit_overlap
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sw() -> Stopwords {
        Stopwords::builtin()
    }

    #[test]
    fn overlap_by_hand() {
        let abs = "We study neural models for generation of text.";
        assert_eq!(lexical_overlap("Neural Title Generation", abs, &sw()), Some(2.0 / 3.0));
        assert_eq!(lexical_overlap("neural generation", abs, &sw()), Some(1.0));
        assert_eq!(lexical_overlap("Quantum cats", abs, &sw()), Some(0.0));
        assert_eq!(lexical_overlap("of the", abs, &sw()), None);
        // set semantics
        assert_eq!(
            lexical_overlap("generation neural neural", abs, &sw()),
            lexical_overlap("neural generation", abs, &sw())
        );
    }

    #[test]
    fn lengths() {
        let mut m = BTreeMap::new();
        m.insert("one".to_string(), vec!["Word".to_string()]);
        m.insert("mix".to_string(), vec!["a b".into(), "a b c d".into(), "a b c d e f g".into()]);
        let s = length_stats(&m);
        assert_eq!((s[0].system.as_str(), s[0].mean, s[0].median), ("mix", 13.0 / 3.0, 4.0));
        assert_eq!(s[1].mean, 1.0);
        let a = LengthStats {
            system: "x".into(),
            n: 1,
            mean: 14.95,
            median: 0.0,
        };
        let b = LengthStats { mean: 8.27, ..a.clone() };
        assert_eq!(format_length_comparison(&a, &b), "14.95 vs. 8.27 tokens");
    }

    #[test]
    fn edit_overlap_cases() {
        let abs = "we propose a simple neural model for title generation from abstracts";
        assert_eq!(edit_overlap("neural model for title", abs), 1.0);
        assert_eq!(edit_overlap("quantum cats dance", abs), 0.0);
        assert_eq!(edit_overlap("", abs), 0.0);
        // abstract shorter than title - 2: whole abstract, 2 of 5 tokens differ
        assert!((edit_overlap("a b c d e", "a b c") - 0.6).abs() < 1e-12);
        assert_eq!(token_edit_distance(&["a", "b", "c"], &["a", "x", "c", "d"]), 2);
    }

    #[test]
    fn report_outputs() {
        let items = vec![
            AnalysisItem {
                system: "HUMAN".into(),
                title: "Neural Title Generation".into(),
                abstract_text: "neural generation".into(),
            },
            AnalysisItem {
                system: "HUMAN".into(),
                title: "Of The".into(),
                abstract_text: "neural generation".into(),
            },
        ];
        let r = overlap_report(&items, &sw()).unwrap();
        assert_eq!(r.rows[0].undefined_overlap, 1);
        assert!(r.to_markdown().contains("| HUMAN | 2 | 66.7% | 2.50 |"));
        assert!(r.to_csv().unwrap().starts_with("system,titles,"));
        assert!(overlap_report(&[], &sw()).is_err());
    }
}
