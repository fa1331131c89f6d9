//! Append-only judgment log.
//!
//! One JSON object per line: `{"seq":N,"judgment":{...}}`, with `seq` starting at
//! 1 and increasing by one. The effective campaign state is a fold over the log
//! in which a later judgment replaces an earlier one with the same
//! (instance, annotator, criterion) key.
//!
//! A trailing line without a newline is an interrupted write that was never
//! acknowledged; opening the log truncates it. Any other malformed line is
//! corruption and opening fails.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BwsSelection, Campaign, Judgment, PairChoice, RankAnnotation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JudgmentKey {
    pub instance_id: String,
    pub annotator_id: String,
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    pub judgment: Judgment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub seq: u64,
    /// The judgment superseded an earlier one by the same annotator.
    pub replaced: bool,
    /// The idempotency key was already seen; nothing new was written.
    #[serde(default)]
    pub duplicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectiveState {
    last_seq: u64,
    latest: BTreeMap<JudgmentKey, LogEntry>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    last_seq: u64,
    entries: Vec<LogEntry>,
}

const SNAPSHOT_VERSION: u32 = 1;

impl EffectiveState {
    pub fn replay<'a>(entries: impl IntoIterator<Item = &'a LogEntry>) -> Self {
        let mut state = EffectiveState::default();
        for e in entries {
            state.apply(e);
        }
        state
    }

    /// Fold one entry in; returns whether it replaced an earlier judgment.
    pub fn apply(&mut self, entry: &LogEntry) -> bool {
        self.last_seq = self.last_seq.max(entry.seq);
        self.latest.insert(entry.judgment.key(), entry.clone()).is_some()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    pub fn judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.latest.values().map(|e| &e.judgment)
    }

    pub fn has_judgment(&self, instance_id: &str, annotator_id: &str) -> bool {
        self.latest
            .keys()
            .any(|k| k.instance_id == instance_id && k.annotator_id == annotator_id)
    }

    pub fn bws_selections(&self) -> Vec<BwsSelection> {
        self.judgments()
            .filter_map(|j| match j {
                Judgment::BestWorst(s) => Some(s.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn rankings(&self) -> Vec<RankAnnotation> {
        self.judgments()
            .filter_map(|j| match j {
                Judgment::Ranking(r) => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn pair_choices(&self) -> Vec<PairChoice> {
        self.judgments()
            .filter_map(|j| match j {
                Judgment::Pairwise(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }

    /// Canonical serialized form; two states are equal iff their snapshots are byte-identical.
    pub fn to_snapshot(&self) -> String {
        let snap = Snapshot {
            format_version: SNAPSHOT_VERSION,
            last_seq: self.last_seq,
            entries: self.latest.values().cloned().collect(),
        };
        serde_json::to_string(&snap).expect("judgments always serialize")
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| Error::parse(1, e.to_string()))?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(Error::Version {
                expected: SNAPSHOT_VERSION,
                found: snap.format_version,
            });
        }
        let mut state = EffectiveState {
            last_seq: snap.last_seq,
            latest: BTreeMap::new(),
        };
        for e in snap.entries {
            if e.seq > snap.last_seq {
                return Err(Error::parse(1, format!("snapshot entry seq {} beyond last_seq", e.seq)));
            }
            state.latest.insert(e.judgment.key(), e);
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub entries: Vec<LogEntry>,
    /// Byte length of the well-formed, newline-terminated prefix.
    pub valid_len: usize,
    pub torn_tail: bool,
}

/// Parse raw log bytes. An unterminated last line is reported as a torn tail, not an error.
pub fn parse_log(bytes: &[u8]) -> Result<ParsedLog> {
    let mut entries: Vec<LogEntry> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Ok(ParsedLog {
                entries,
                valid_len: offset,
                torn_tail: true,
            });
        };
        let line = &bytes[offset..offset + nl];
        offset += nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let entry: LogEntry = serde_json::from_slice(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let expected = entries.last().map_or(1, |e| e.seq + 1);
        if entry.seq != expected {
            return Err(Error::parse(
                line_no,
                format!("sequence number {} out of order (expected {expected})", entry.seq),
            ));
        }
        entries.push(entry);
    }
    Ok(ParsedLog {
        entries,
        valid_len: bytes.len(),
        torn_tail: false,
    })
}

/// Judgment log with its derived effective state. Callers serialize access (single writer).
#[derive(Debug)]
pub struct JudgmentLog {
    file: Option<File>,
    entries: Vec<LogEntry>,
    state: EffectiveState,
    by_idempotency_key: HashMap<String, Receipt>,
}

impl JudgmentLog {
    pub fn in_memory() -> Self {
        JudgmentLog {
            file: None,
            entries: Vec::new(),
            state: EffectiveState::default(),
            by_idempotency_key: HashMap::new(),
        }
    }

    /// Open (or create) a file-backed log and replay it.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let parsed = parse_log(&bytes)?;
        if parsed.torn_tail {
            log::warn!(
                "{}: discarding {} bytes of an interrupted write",
                path.display(),
                bytes.len() - parsed.valid_len
            );
            file.set_len(parsed.valid_len as u64)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        let mut log = Self::from_entries(parsed.entries);
        log.file = Some(file);
        Ok(log)
    }

    pub fn from_entries(entries: Vec<LogEntry>) -> Self {
        let mut state = EffectiveState::default();
        let mut by_idempotency_key = HashMap::new();
        for e in &entries {
            let replaced = state.apply(e);
            if let Some(k) = &e.idempotency_key {
                by_idempotency_key.insert(
                    k.clone(),
                    Receipt {
                        seq: e.seq,
                        replaced,
                        duplicate: false,
                    },
                );
            }
        }
        JudgmentLog {
            file: None,
            entries,
            state,
            by_idempotency_key,
        }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn state(&self) -> &EffectiveState {
        &self.state
    }

    /// Validate and durably append a judgment. The receipt is only returned after
    /// the line has been written and synced.
    pub fn append(
        &mut self,
        campaign: &Campaign,
        judgment: Judgment,
        idempotency_key: Option<String>,
    ) -> Result<Receipt> {
        if let Some(prev) = idempotency_key.as_ref().and_then(|k| self.by_idempotency_key.get(k)) {
            return Ok(Receipt {
                duplicate: true,
                ..*prev
            });
        }
        campaign.validate(&judgment)?;
        let entry = LogEntry {
            seq: self.entries.last().map_or(1, |e| e.seq + 1),
            idempotency_key,
            judgment,
        };
        if let Some(file) = self.file.as_mut() {
            let mut line = serde_json::to_vec(&entry).map_err(std::io::Error::from)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        let replaced = self.state.apply(&entry);
        let receipt = Receipt {
            seq: entry.seq,
            replaced,
            duplicate: false,
        };
        if let Some(k) = &entry.idempotency_key {
            self.by_idempotency_key.insert(k.clone(), receipt);
        }
        self.entries.push(entry);
        Ok(receipt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tests::{bws, instance};
    use crate::annotation::{create_campaign, AssignmentPolicy, CampaignKind, CampaignOptions};

    fn campaign() -> Campaign {
        create_campaign(
            "c",
            CampaignKind::BestWorst,
            vec![instance("i0", 6), instance("i1", 6)],
            Some(&AssignmentPolicy::All(vec!["a".into(), "b".into()])),
            CampaignOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn sequence_numbers_are_monotone() {
        let c = campaign();
        let mut log = JudgmentLog::in_memory();
        let r1 = log.append(&c, Judgment::BestWorst(bws("i0", "a", [0, 1], [2, 3])), None).unwrap();
        let r2 = log.append(&c, Judgment::BestWorst(bws("i0", "b", [0, 1], [2, 3])), None).unwrap();
        assert_eq!((r1.seq, r2.seq), (1, 2));
    }

    #[test]
    fn invalid_judgment_is_not_logged() {
        let c = campaign();
        let mut log = JudgmentLog::in_memory();
        assert!(log.append(&c, Judgment::BestWorst(bws("i0", "a", [0, 1], [1, 2])), None).is_err());
        assert!(log.entries().is_empty());
    }

    #[test]
    fn resubmission_replaces_effective_state() {
        let c = campaign();
        let mut log = JudgmentLog::in_memory();
        log.append(&c, Judgment::BestWorst(bws("i0", "a", [0, 1], [2, 3])), None).unwrap();
        let r = log.append(&c, Judgment::BestWorst(bws("i0", "a", [4, 5], [2, 3])), None).unwrap();
        assert!(r.replaced);
        assert_eq!(log.entries().len(), 2);
        let sel = log.state().bws_selections();
        assert_eq!(sel.len(), 1);
        assert!(sel[0].best.contains("i0-c4"));
        // replay of the full log gives the same state
        assert_eq!(EffectiveState::replay(log.entries()), *log.state());
    }

    #[test]
    fn idempotency_key_dedupes() {
        let c = campaign();
        let mut log = JudgmentLog::in_memory();
        let j = Judgment::BestWorst(bws("i0", "a", [0, 1], [2, 3]));
        let r1 = log.append(&c, j.clone(), Some("k1".into())).unwrap();
        let r2 = log.append(&c, j, Some("k1".into())).unwrap();
        assert_eq!(r1.seq, r2.seq);
        assert!(r2.duplicate);
        assert_eq!(log.entries().len(), 1);
    }

    #[test]
    fn file_log_survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let c = campaign();
        {
            let mut log = JudgmentLog::open(&path).unwrap();
            log.append(&c, Judgment::BestWorst(bws("i0", "a", [0, 1], [2, 3])), None).unwrap();
            log.append(&c, Judgment::BestWorst(bws("i1", "a", [0, 1], [2, 3])), None).unwrap();
        }
        // simulate a crash in the middle of the third write
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":3,"judgment":{"type":"best_wo"#).unwrap();
        drop(f);

        let mut log = JudgmentLog::open(&path).unwrap();
        assert_eq!(log.entries().len(), 2);
        let r = log.append(&c, Judgment::BestWorst(bws("i0", "b", [0, 1], [2, 3])), None).unwrap();
        assert_eq!(r.seq, 3);
        drop(log);
        let again = JudgmentLog::open(&path).unwrap();
        assert_eq!(again.entries().len(), 3);
        assert_eq!(again.state().to_snapshot(), EffectiveState::replay(again.entries()).to_snapshot());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let bytes = b"{\"seq\":1,\"judgment\":{\"type\":\"pairwise\",\"instance_id\":\"i\",\"annotator_id\":\"a\",\"choice\":\"first\"}}\ngarbage\n";
        assert!(matches!(parse_log(bytes), Err(Error::Parse { line: 2, .. })));
        let gap = b"{\"seq\":2,\"judgment\":{\"type\":\"pairwise\",\"instance_id\":\"i\",\"annotator_id\":\"a\",\"choice\":\"first\"}}\n";
        assert!(parse_log(gap).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let c = campaign();
        let mut log = JudgmentLog::in_memory();
        log.append(&c, Judgment::BestWorst(bws("i0", "a", [0, 1], [2, 3])), None).unwrap();
        log.append(&c, Judgment::BestWorst(bws("i1", "b", [5, 1], [2, 3])), None).unwrap();
        let text = log.state().to_snapshot();
        let back = EffectiveState::from_snapshot(&text).unwrap();
        assert_eq!(back, *log.state());
    }
}
