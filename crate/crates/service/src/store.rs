//! File-backed campaign store.
//!
//! ```text
//! <data_dir>/campaigns/<id>.json   campaign definition
//! <data_dir>/logs/<id>.jsonl       append-only judgment log (source of truth)
//! <data_dir>/snapshots/<id>.json   effective state, rewritten every N appends
//! ```
//!
//! Writes to one campaign go through a single mutex-guarded appender; readers
//! get the latest immutable state without taking that lock.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use a2t_core::annotation::{Campaign, EffectiveState, Judgment, JudgmentLog, Receipt};
use serde::{Deserialize, Serialize};

use crate::{Result, ServiceError};

/// Campaign ids double as file names.
pub fn check_campaign_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::Data(format!(
            "campaign id {id:?} must be 1-128 characters of [A-Za-z0-9._-] not starting with '.'"
        )))
    }
}

/// Write via a temporary file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(ServiceError::file(&tmp))?;
    fs::File::open(&tmp).and_then(|f| f.sync_all()).map_err(ServiceError::file(&tmp))?;
    fs::rename(&tmp, path).map_err(ServiceError::file(path))?;
    Ok(())
}

#[derive(Debug)]
pub struct CampaignHandle {
    campaign: Arc<Campaign>,
    log: Mutex<JudgmentLog>,
    view: RwLock<Arc<EffectiveState>>,
    snapshot_path: PathBuf,
    snapshot_every: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub assigned: usize,
    pub done: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub campaign_id: String,
    pub instances: usize,
    /// Instances judged by every assigned annotator.
    pub complete_instances: usize,
    /// Effective judgments (resubmissions counted once).
    pub judgments: usize,
    pub last_seq: u64,
    pub annotators: BTreeMap<String, AnnotatorProgress>,
}

impl CampaignHandle {
    pub fn campaign(&self) -> &Arc<Campaign> {
        &self.campaign
    }

    pub fn state(&self) -> Arc<EffectiveState> {
        self.view.read().expect("state lock poisoned").clone()
    }

    /// Validate, append and fsync each judgment in order. All judgments are
    /// validated before anything is written. Blocking.
    pub fn record(&self, batch: Vec<(Judgment, Option<String>)>) -> Result<Vec<Receipt>> {
        for (j, _) in &batch {
            self.campaign.validate(j)?;
        }
        let mut log = self.log.lock().expect("log lock poisoned");
        let mut receipts = Vec::with_capacity(batch.len());
        for (j, key) in batch {
            receipts.push(log.append(&self.campaign, j, key)?);
        }
        let state = log.state().clone();
        let wrote = receipts.iter().any(|r| !r.duplicate);
        if wrote && self.snapshot_every > 0 {
            let last = state.last_seq();
            let first = receipts.iter().filter(|r| !r.duplicate).map(|r| r.seq).min().unwrap_or(last);
            if (first..=last).any(|s| s % self.snapshot_every == 0) {
                if let Err(e) = write_atomic(&self.snapshot_path, state.to_snapshot().as_bytes()) {
                    log::warn!("snapshot for {} not written: {e}", self.campaign.id);
                }
            }
        }
        *self.view.write().expect("state lock poisoned") = Arc::new(state);
        Ok(receipts)
    }

    pub fn progress(&self) -> Progress {
        let state = self.state();
        let c = &self.campaign;
        let mut annotators: BTreeMap<String, AnnotatorProgress> = BTreeMap::new();
        let mut complete = 0;
        for inst in &c.instances {
            let assigned = c.assignments.get(&inst.id).map(Vec::as_slice).unwrap_or_default();
            let mut all = !assigned.is_empty();
            for a in assigned {
                let done = state.has_judgment(&inst.id, a);
                let p = annotators.entry(a.clone()).or_insert(AnnotatorProgress { assigned: 0, done: 0 });
                p.assigned += 1;
                p.done += usize::from(done);
                all &= done;
            }
            complete += usize::from(all);
        }
        Progress {
            campaign_id: c.id.clone(),
            instances: c.instances.len(),
            complete_instances: complete,
            judgments: state.len(),
            last_seq: state.last_seq(),
            annotators,
        }
    }
}

#[derive(Debug)]
pub struct CampaignStore {
    root: PathBuf,
    snapshot_every: u64,
    campaigns: RwLock<BTreeMap<String, Arc<CampaignHandle>>>,
}

impl CampaignStore {
    fn campaign_path(root: &Path, id: &str) -> PathBuf {
        root.join("campaigns").join(format!("{id}.json"))
    }

    fn log_path(root: &Path, id: &str) -> PathBuf {
        root.join("logs").join(format!("{id}.jsonl"))
    }

    fn snapshot_path(root: &Path, id: &str) -> PathBuf {
        root.join("snapshots").join(format!("{id}.json"))
    }

    /// Open (creating directories as needed) and replay every campaign log.
    /// Any inconsistency is reported and the store refuses to open.
    pub fn open(root: &Path, snapshot_every: u64) -> Result<Self> {
        for sub in ["campaigns", "logs", "snapshots"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(ServiceError::file(&dir))?;
        }
        let dir = root.join("campaigns");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(ServiceError::file(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter(|p| !p.to_string_lossy().ends_with(".manifest.json"))
            .collect();
        paths.sort();
        let mut campaigns = BTreeMap::new();
        for path in paths {
            let handle = Self::open_campaign(root, &path, snapshot_every)?;
            campaigns.insert(handle.campaign.id.clone(), Arc::new(handle));
        }
        Ok(CampaignStore {
            root: root.to_path_buf(),
            snapshot_every,
            campaigns: RwLock::new(campaigns),
        })
    }

    fn open_campaign(root: &Path, path: &Path, snapshot_every: u64) -> Result<CampaignHandle> {
        let corrupt = |msg: String| ServiceError::CorruptStore(format!("{}: {msg}", path.display()));
        let text = fs::read_to_string(path).map_err(ServiceError::file(path))?;
        let campaign: Campaign = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if campaign.id != stem {
            return Err(corrupt(format!("file holds campaign {:?}", campaign.id)));
        }
        let log_path = Self::log_path(root, &campaign.id);
        let log = JudgmentLog::open(&log_path)
            .map_err(|e| ServiceError::CorruptStore(format!("{}: {e}", log_path.display())))?;
        for entry in log.entries() {
            campaign.validate(&entry.judgment).map_err(|e| {
                ServiceError::CorruptStore(format!("{} seq {}: {e}", log_path.display(), entry.seq))
            })?;
        }
        let snapshot_path = Self::snapshot_path(root, &campaign.id);
        if let Ok(text) = fs::read_to_string(&snapshot_path) {
            let snap = EffectiveState::from_snapshot(&text)
                .map_err(|e| ServiceError::CorruptStore(format!("{}: {e}", snapshot_path.display())))?;
            if snap.last_seq() > log.state().last_seq() {
                return Err(ServiceError::CorruptStore(format!(
                    "{} covers seq {} but the log ends at {}; acknowledged judgments are missing",
                    snapshot_path.display(),
                    snap.last_seq(),
                    log.state().last_seq()
                )));
            }
        }
        let state = Arc::new(log.state().clone());
        Ok(CampaignHandle {
            campaign: Arc::new(campaign),
            log: Mutex::new(log),
            view: RwLock::new(state),
            snapshot_path,
            snapshot_every,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, id: &str) -> Option<Arc<CampaignHandle>> {
        self.campaigns.read().expect("store lock poisoned").get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<CampaignHandle>> {
        self.campaigns.read().expect("store lock poisoned").values().cloned().collect()
    }

    /// Persist a new campaign. Fails if the id is taken.
    pub fn create(&self, campaign: Campaign) -> Result<Arc<CampaignHandle>> {
        check_campaign_id(&campaign.id)?;
        let mut map = self.campaigns.write().expect("store lock poisoned");
        let path = Self::campaign_path(&self.root, &campaign.id);
        if map.contains_key(&campaign.id) || path.exists() {
            return Err(a2t_core::Error::DuplicateId(campaign.id.clone()).into());
        }
        let json = serde_json::to_string_pretty(&campaign).expect("campaigns serialize");
        write_atomic(&path, json.as_bytes())?;
        let handle = Arc::new(Self::open_campaign(&self.root, &path, self.snapshot_every)?);
        map.insert(campaign.id.clone(), handle.clone());
        Ok(handle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use a2t_core::annotation::{create_campaign, AssignmentPolicy, BwsSelection, CampaignKind, CampaignOptions};
    use a2t_core::annotation::{Candidate, TaskInstance};

    fn campaign(id: &str) -> Campaign {
        let instances = (0..3)
            .map(|i| TaskInstance {
                id: format!("i{i}"),
                abstract_id: format!("a{i}"),
                abstract_text: String::new(),
                candidates: (0..6)
                    .map(|k| Candidate {
                        id: format!("i{i}-c{k}"),
                        title: format!("t{k}"),
                        system: format!("s{k}"),
                    })
                    .collect(),
            })
            .collect();
        let policy = AssignmentPolicy::All(vec!["x".into(), "y".into()]);
        create_campaign(id, CampaignKind::BestWorst, instances, Some(&policy), CampaignOptions::default()).unwrap()
    }

    fn sel(inst: &str, ann: &str) -> Judgment {
        let ids = |ks: [usize; 2]| ks.iter().map(|k| format!("{inst}-c{k}")).collect();
        Judgment::BestWorst(BwsSelection {
            instance_id: inst.into(),
            annotator_id: ann.into(),
            best: ids([0, 1]),
            worst: ids([4, 5]),
            timestamp_ms: 0,
        })
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = CampaignStore::open(dir.path(), 2).unwrap();
        let h = store.create(campaign("c1")).unwrap();
        assert!(store.create(campaign("c1")).is_err());
        h.record(vec![(sel("i0", "x"), Some("k1".into())), (sel("i1", "x"), None)]).unwrap();
        let dup = h.record(vec![(sel("i0", "x"), Some("k1".into()))]).unwrap();
        assert!(dup[0].duplicate);
        let p = h.progress();
        assert_eq!((p.judgments, p.annotators["x"].done, p.complete_instances), (2, 2, 0));
        assert!(dir.path().join("snapshots/c1.json").exists());
        let before = h.state().to_snapshot();
        drop(store);

        let store = CampaignStore::open(dir.path(), 2).unwrap();
        assert_eq!(store.get("c1").unwrap().state().to_snapshot(), before);
    }

    #[test]
    fn invalid_batch_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = CampaignStore::open(dir.path(), 0).unwrap();
        let h = store.create(campaign("c1")).unwrap();
        let err = h.record(vec![(sel("i0", "x"), None), (sel("i0", "nobody"), None)]).unwrap_err();
        assert!(matches!(err, ServiceError::Core(_)));
        assert_eq!(h.state().len(), 0);
    }

    #[test]
    fn refuses_inconsistent_store() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = CampaignStore::open(dir.path(), 1).unwrap();
            let h = store.create(campaign("c1")).unwrap();
            h.record(vec![(sel("i0", "x"), None)]).unwrap();
        }
        fs::write(dir.path().join("logs/c1.jsonl"), "").unwrap();
        let err = CampaignStore::open(dir.path(), 1).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");

        fs::write(dir.path().join("campaigns/c1.json"), "{").unwrap();
        assert!(matches!(CampaignStore::open(dir.path(), 1), Err(ServiceError::CorruptStore(_))));
        assert!(check_campaign_id("../x").is_err());
    }
}
