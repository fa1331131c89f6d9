//! Pseudo training data: keep generations whose classifier label matches the
//! requested humor constraint, drop funny titles built on over-frequent
//! n-grams, and pair the survivors with the original titles.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, PaperRecord};
use crate::{Error, Result};

/// A system title generated under a binary humor constraint (1 = funny).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTitle {
    /// Defaults to `<abstract_id>#<constraint>`.
    #[serde(default)]
    pub id: String,
    pub abstract_id: String,
    pub constraint: u8,
    pub text: String,
    /// Binary label from the humor classifier, joined in after ingest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_label: Option<u8>,
}

pub fn parse_generations<R: BufRead>(reader: R) -> Result<Vec<GeneratedTitle>> {
    let mut out: Vec<GeneratedTitle> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut g: GeneratedTitle = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if g.constraint > 1 || g.assigned_label.is_some_and(|l| l > 1) {
            return Err(Error::parse(i + 1, "constraint and label must be 0 or 1"));
        }
        if g.id.is_empty() {
            g.id = format!("{}#{}", g.abstract_id, g.constraint);
        }
        if !seen.insert(g.id.clone()) {
            return Err(Error::DuplicateId(g.id));
        }
        out.push(g);
    }
    Ok(out)
}

pub fn write_generations(titles: &[GeneratedTitle]) -> String {
    titles
        .iter()
        .map(|t| serde_json::to_string(t).expect("plain struct") + "\n")
        .collect()
}

/// Join a `id,label` CSV of classifier labels onto the generations.
/// Medium funny (2) collapses to funny.
pub fn join_labels<R: Read>(titles: &mut [GeneratedTitle], labels_csv: R) -> Result<()> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        label: u8,
    }
    let mut labels = HashMap::new();
    let mut rdr = csv::Reader::from_reader(labels_csv);
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row?;
        if r.label > 2 {
            return Err(Error::parse(i + 2, format!("label {} outside {{0,1,2}}", r.label)));
        }
        labels.insert(r.id, u8::from(r.label > 0));
    }
    for t in titles.iter_mut() {
        let l = labels.get(&t.id).ok_or_else(|| Error::Unknown {
            what: "label for generation",
            id: t.id.clone(),
        })?;
        t.assigned_label = Some(*l);
    }
    Ok(())
}

/// Titles whose assigned label equals the constraint. Unlabeled titles are dropped.
pub fn keep_label_consistent(generated: &[GeneratedTitle]) -> Vec<GeneratedTitle> {
    generated
        .iter()
        .filter(|g| g.assigned_label == Some(g.constraint))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramScope {
    FunnyPseudoOnly,
    AllPseudo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgramFilterConfig {
    pub n_values: BTreeSet<usize>,
    /// Number of titles an n-gram may occur in; `None` disables the filter.
    pub max_corpus_frequency: Option<usize>,
    pub scope: NgramScope,
}

impl Default for NgramFilterConfig {
    fn default() -> Self {
        NgramFilterConfig {
            n_values: [2, 3].into(),
            max_corpus_frequency: Some(10),
            scope: NgramScope::FunnyPseudoOnly,
        }
    }
}

impl NgramFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Config("n-gram sizes must be a non-empty set of positive integers".into()));
        }
        if self.max_corpus_frequency == Some(0) {
            return Err(Error::Config("n-gram frequency threshold must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_funny(t: &GeneratedTitle) -> bool {
    t.assigned_label.unwrap_or(t.constraint) == 1
}

/// Distinct n-grams of a title, tokens joined by a single space.
pub fn ngrams(text: &str, n_values: &BTreeSet<usize>) -> BTreeSet<String> {
    let tokens = tokenize(text);
    let mut out = BTreeSet::new();
    for &n in n_values {
        if n == 0 || n > tokens.len() {
            continue;
        }
        for w in tokens.windows(n) {
            out.insert(w.join(" "));
        }
    }
    out
}

/// Number of titles in scope containing each n-gram.
pub fn ngram_document_frequency(titles: &[GeneratedTitle], cfg: &NgramFilterConfig) -> BTreeMap<String, usize> {
    let mut freq = BTreeMap::new();
    for t in titles {
        if cfg.scope == NgramScope::FunnyPseudoOnly && !is_funny(t) {
            continue;
        }
        for g in ngrams(&t.text, &cfg.n_values) {
            *freq.entry(g).or_insert(0) += 1;
        }
    }
    freq
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Removal {
    pub id: String,
    pub abstract_id: String,
    pub text: String,
    /// Most frequent offending n-gram (ties: lexicographically first).
    pub ngram: String,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NgramFilterResult {
    pub kept: Vec<GeneratedTitle>,
    pub removed: Vec<Removal>,
}

/// Remove funny titles containing an n-gram whose frequency over the scope
/// exceeds the threshold. Not-funny titles always pass.
pub fn ngram_frequency_filter(titles: &[GeneratedTitle], cfg: &NgramFilterConfig) -> Result<NgramFilterResult> {
    cfg.validate()?;
    let Some(limit) = cfg.max_corpus_frequency else {
        return Ok(NgramFilterResult {
            kept: titles.to_vec(),
            removed: Vec::new(),
        });
    };
    let freq = ngram_document_frequency(titles, cfg);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for t in titles {
        let worst = if is_funny(t) {
            ngrams(&t.text, &cfg.n_values)
                .into_iter()
                .map(|g| {
                    let f = freq.get(&g).copied().unwrap_or(0);
                    (g, f)
                })
                .filter(|(_, f)| *f > limit)
                .fold(None::<(String, usize)>, |best, (g, f)| match best {
                    Some((_, bf)) if bf >= f => best,
                    _ => Some((g, f)),
                })
        } else {
            None
        };
        match worst {
            Some((ngram, frequency)) => removed.push(Removal {
                id: t.id.clone(),
                abstract_id: t.abstract_id.clone(),
                text: t.text.clone(),
                ngram,
                frequency,
            }),
            None => kept.push(t.clone()),
        }
    }
    Ok(NgramFilterResult { kept, removed })
}

/// Over-threshold n-grams still present in funny titles of `titles`; empty after a correct filter.
pub fn recheck(titles: &[GeneratedTitle], cfg: &NgramFilterConfig) -> Vec<(String, usize)> {
    let Some(limit) = cfg.max_corpus_frequency else {
        return Vec::new();
    };
    let freq = ngram_document_frequency(titles, cfg);
    let mut present = BTreeSet::new();
    for t in titles.iter().filter(|t| is_funny(t)) {
        present.extend(ngrams(&t.text, &cfg.n_values));
    }
    freq.into_iter()
        .filter(|(g, f)| *f > limit && present.contains(g))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginalTitle {
    pub abstract_id: String,
    pub text: String,
    /// Binary humor label.
    pub label: u8,
}

impl OriginalTitle {
    /// Unlabeled records are skipped.
    pub fn from_record(r: &PaperRecord) -> Option<Self> {
        r.humor_label.map(|l| OriginalTitle {
            abstract_id: r.id.clone(),
            text: r.title.clone(),
            label: u8::from(l.is_funny()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTitle {
    pub abstract_id: String,
    pub text: String,
    pub label: u8,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub id: String,
    pub abstract_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeResult {
    /// Original then pseudo for each kept abstract, in original order.
    pub instances: Vec<TrainingTitle>,
    pub rejected: Vec<Rejection>,
    /// Abstracts without a surviving opposite-label pseudo title.
    pub excluded_abstracts: usize,
}

impl MergeResult {
    pub fn pseudo_share(&self) -> f64 {
        if self.instances.is_empty() {
            return 0.0;
        }
        let p = self.instances.iter().filter(|t| t.provenance == Provenance::Pseudo).count();
        p as f64 / self.instances.len() as f64
    }

    pub fn to_jsonl(&self) -> String {
        self.instances
            .iter()
            .map(|t| serde_json::to_string(t).expect("plain struct") + "\n")
            .collect()
    }
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for MergeResult {
    /// `15,474 instances in total, 50% pseudo`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} instances in total, {:.0}% pseudo",
            thousands(self.instances.len()),
            100.0 * self.pseudo_share()
        )
    }
}

/// Pair each original title with the first surviving pseudo title of the
/// opposite label for the same abstract.
pub fn merge_pseudo(originals: &[OriginalTitle], pseudo_kept: &[GeneratedTitle]) -> Result<MergeResult> {
    let mut orig_label: HashMap<&str, u8> = HashMap::new();
    for o in originals {
        if o.label > 1 {
            return Err(Error::Config(format!("original label for {} must be binary", o.abstract_id)));
        }
        if orig_label.insert(&o.abstract_id, o.label).is_some() {
            return Err(Error::DuplicateId(o.abstract_id.clone()));
        }
    }
    let mut chosen: HashMap<&str, &GeneratedTitle> = HashMap::new();
    let mut rejected = Vec::new();
    let mut reject = |g: &GeneratedTitle, reason: &str| {
        rejected.push(Rejection {
            id: g.id.clone(),
            abstract_id: g.abstract_id.clone(),
            reason: reason.to_string(),
        })
    };
    for g in pseudo_kept {
        let label = g.assigned_label.unwrap_or(g.constraint);
        match orig_label.get(g.abstract_id.as_str()) {
            None => reject(g, "no original title for this abstract"),
            Some(&l) if l == label => reject(g, "pseudo label equals the original title's label"),
            Some(_) if chosen.contains_key(g.abstract_id.as_str()) => {
                reject(g, "abstract already has a pseudo title")
            }
            Some(_) => {
                chosen.insert(&g.abstract_id, g);
            }
        }
    }
    let mut instances = Vec::new();
    let mut excluded = 0;
    for o in originals {
        let Some(g) = chosen.get(o.abstract_id.as_str()) else {
            excluded += 1;
            continue;
        };
        instances.push(TrainingTitle {
            abstract_id: o.abstract_id.clone(),
            text: o.text.clone(),
            label: o.label,
            provenance: Provenance::Original,
        });
        instances.push(TrainingTitle {
            abstract_id: o.abstract_id.clone(),
            text: g.text.clone(),
            label: 1 - o.label,
            provenance: Provenance::Pseudo,
        });
    }
    Ok(MergeResult {
        instances,
        rejected,
        excluded_abstracts: excluded,
    })
}
