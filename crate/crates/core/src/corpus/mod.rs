//! Abstract/title records: ingestion, filtering, tokenization and dataset splits.

mod split;
mod tokenize;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use split::{make_constrained_split, write_split, DatasetSplit, SplitCounts, SplitSpec};
pub use tokenize::{content_words, tokenize, Stopwords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "NLP")]
    Nlp,
    #[serde(rename = "ML")]
    Ml,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Nlp => "NLP",
            Source::Ml => "ML",
        })
    }
}

/// Three-level humor annotation. Serialized as the integer 0, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum HumorLabel {
    NotFunny = 0,
    MediumFunny = 1,
    Funny = 2,
}

impl HumorLabel {
    pub const ALL: [HumorLabel; 3] = [HumorLabel::NotFunny, HumorLabel::MediumFunny, HumorLabel::Funny];

    pub fn value(self) -> u8 {
        self as u8
    }

    /// Collapse to the binary scheme: medium funny and funny both count as funny.
    pub fn is_funny(self) -> bool {
        self != HumorLabel::NotFunny
    }
}

impl TryFrom<u8> for HumorLabel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(HumorLabel::NotFunny),
            1 => Ok(HumorLabel::MediumFunny),
            2 => Ok(HumorLabel::Funny),
            other => Err(format!("humor label must be 0, 1 or 2, got {other}")),
        }
    }
}

impl From<HumorLabel> for u8 {
    fn from(l: HumorLabel) -> u8 {
        l as u8
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelOrigin {
    Human,
    Classifier,
    #[default]
    None,
}

impl FromStr for LabelOrigin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Human" => Ok(LabelOrigin::Human),
            "Classifier" => Ok(LabelOrigin::Classifier),
            "None" | "" => Ok(LabelOrigin::None),
            other => Err(format!("unknown humor_label_origin {other:?}")),
        }
    }
}

/// One abstract/title pair with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub venue: String,
    pub year: i32,
    pub source: Source,
    #[serde(default)]
    pub humor_label: Option<HumorLabel>,
    #[serde(default)]
    pub humor_label_origin: LabelOrigin,
}

impl PaperRecord {
    pub fn is_funny(&self) -> bool {
        self.humor_label.is_some_and(HumorLabel::is_funny)
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::parse(line, "empty id"));
        }
        if self.title.trim().is_empty() {
            return Err(Error::parse(line, format!("record {:?} has an empty title", self.id)));
        }
        if self.abstract_text.trim().is_empty() {
            return Err(Error::parse(line, format!("record {:?} has an empty abstract", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<PaperRecord>> {
    let file = File::open(path)?;
    match format {
        CorpusFormat::Jsonl => parse_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => parse_csv(file),
    }
}

/// Parse one record per line. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<PaperRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PaperRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        push_unique(&mut records, &mut seen, record, line_no)?;
    }
    Ok(records)
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    venue: String,
    year: i32,
    source: Source,
    humor_label: Option<u8>,
    #[serde(default)]
    humor_label_origin: String,
}

/// Parse the CSV form (header row required, empty `humor_label` means none).
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<PaperRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line_no = rec.position().map_or(0, |p| p.line() as usize);
        let row: CsvRow = rec.deserialize(Some(&headers))?;
        let humor_label = row
            .humor_label
            .map(HumorLabel::try_from)
            .transpose()
            .map_err(|e| Error::parse(line_no, e))?;
        let humor_label_origin = row
            .humor_label_origin
            .parse()
            .map_err(|e: String| Error::parse(line_no, e))?;
        let record = PaperRecord {
            id: row.id,
            title: row.title,
            abstract_text: row.abstract_text,
            venue: row.venue,
            year: row.year,
            source: row.source,
            humor_label,
            humor_label_origin,
        };
        push_unique(&mut records, &mut seen, record, line_no)?;
    }
    Ok(records)
}

fn push_unique(
    records: &mut Vec<PaperRecord>,
    seen: &mut HashSet<String>,
    record: PaperRecord,
    line_no: usize,
) -> Result<()> {
    record.validate(line_no)?;
    if !seen.insert(record.id.clone()) {
        return Err(Error::DuplicateId(record.id));
    }
    records.push(record);
    Ok(())
}

pub fn write_jsonl<W: std::io::Write>(mut out: W, records: &[PaperRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_abstract_words: usize,
    pub min_year: i32,
    pub main_conference_only: bool,
    /// Venues accepted when `main_conference_only` is set. Compared case-insensitively.
    #[serde(default)]
    pub venue_allow_list: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_abstract_words: 400,
            min_year: 2001,
            main_conference_only: false,
            venue_allow_list: Vec::new(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_abstract_words == 0 {
            return Err(Error::Config("max_abstract_words must be positive".into()));
        }
        Ok(())
    }

    pub fn accepts(&self, record: &PaperRecord) -> bool {
        // whitespace-token count of the raw abstract; strict less-than
        let words = record.abstract_text.split_whitespace().count();
        if words >= self.max_abstract_words || record.year < self.min_year {
            return false;
        }
        if self.main_conference_only {
            return self
                .venue_allow_list
                .iter()
                .any(|v| v.eq_ignore_ascii_case(record.venue.trim()));
        }
        true
    }
}

pub fn filter_corpus(records: &[PaperRecord], cfg: &FilterConfig) -> Vec<PaperRecord> {
    records.iter().filter(|r| cfg.accepts(r)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: &str, words: usize, year: i32) -> PaperRecord {
        PaperRecord {
            id: id.into(),
            title: format!("Title {id}"),
            abstract_text: vec!["word"; words].join(" "),
            venue: "ACL".into(),
            year,
            source: Source::Nlp,
            humor_label: None,
            humor_label_origin: LabelOrigin::None,
        }
    }

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","title":"T","abstract":"An abstract.","venue":"ACL","year":2019,"source":"NLP","humor_label":null,"humor_label_origin":"None"}}"#
        )
    }

    #[test]
    fn empty_file_gives_no_records() {
        assert!(parse_jsonl("".as_bytes()).unwrap().is_empty());
        assert!(parse_csv("id,title,abstract,venue,year,source,humor_label,humor_label_origin\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn three_lines_three_records() {
        let text = [line("a"), line("b"), line("c")].join("\n");
        let recs = parse_jsonl(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].id, "c");
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = [line("p0"), line("p1"), line("p2"), line("p3"), line("p1")].join("\n");
        let err = parse_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "p1"), "{err}");
        assert!(err.to_string().contains("p1"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json\n", line("a"));
        match parse_jsonl(text.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let bad_label = line("x").replace("\"humor_label\":null", "\"humor_label\":3");
        assert!(matches!(parse_jsonl(bad_label.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip_fields() {
        let text = "id,title,abstract,venue,year,source,humor_label,humor_label_origin\n\
                    p1,A Title,\"Some, abstract\",EMNLP,2020,ML,2,Human\n\
                    p2,B,Other,ACL,2005,NLP,,None\n";
        let recs = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(recs[0].abstract_text, "Some, abstract");
        assert_eq!(recs[0].humor_label, Some(HumorLabel::Funny));
        assert_eq!(recs[0].humor_label_origin, LabelOrigin::Human);
        assert_eq!(recs[1].humor_label, None);
        let dup = format!("{text}p1,X,Y,ACL,2005,NLP,,None\n");
        assert!(matches!(parse_csv(dup.as_bytes()), Err(Error::DuplicateId(id)) if id == "p1"));
    }

    #[test]
    fn abstract_length_is_strict() {
        let cfg = FilterConfig::default();
        assert!(!cfg.accepts(&record("a", 400, 2010)));
        assert!(cfg.accepts(&record("a", 399, 2010)));
    }

    #[test]
    fn year_after_2000() {
        let cfg = FilterConfig::default();
        assert!(!cfg.accepts(&record("a", 10, 2000)));
        assert!(cfg.accepts(&record("a", 10, 2001)));
        assert!(filter_corpus(&[], &cfg).is_empty());
    }

    #[test]
    fn venue_allow_list() {
        let cfg = FilterConfig {
            main_conference_only: true,
            venue_allow_list: vec!["acl".into(), "EMNLP".into()],
            ..FilterConfig::default()
        };
        let mut r = record("a", 10, 2010);
        assert!(cfg.accepts(&r));
        r.venue = "ACL Workshop".into();
        assert!(!cfg.accepts(&r));
    }

    proptest::proptest! {
        #[test]
        fn tightening_never_adds(words in proptest::collection::vec((1usize..600, 1990i32..2022), 0..40),
                                 max_a in 1usize..600, dmax in 0usize..300,
                                 min_a in 1990i32..2022, dmin in 0i32..10) {
            let recs: Vec<_> = words.iter().enumerate()
                .map(|(i, &(w, y))| record(&i.to_string(), w, y)).collect();
            let loose = FilterConfig { max_abstract_words: max_a + dmax, min_year: min_a, ..Default::default() };
            let tight = FilterConfig { max_abstract_words: max_a, min_year: min_a + dmin, ..Default::default() };
            let l: HashSet<_> = filter_corpus(&recs, &loose).into_iter().map(|r| r.id).collect();
            for r in filter_corpus(&recs, &tight) {
                proptest::prop_assert!(l.contains(&r.id));
            }
        }
    }
}
