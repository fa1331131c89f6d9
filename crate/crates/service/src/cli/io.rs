use std::fs;
use std::path::{Path, PathBuf};

use a2t_core::annotation::{parse_bws_export, parse_log, BwsSelection, Campaign, EffectiveState};
use serde::de::DeserializeOwned;

use super::args::CampaignSource;
use super::Run;
use crate::{Result, ServiceError};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(ServiceError::file(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(ServiceError::file(dir))?;
    }
    fs::write(path, text).map_err(ServiceError::file(path))
}

/// TOML when the extension is `.toml`, JSON otherwise.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let bad = |message: String| ServiceError::Config {
        path: path.to_path_buf(),
        message,
    };
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| bad(e.message().to_string()))
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|e| a2t_core::Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse_jsonl(&read_text(path)?).map_err(|e| match e {
        ServiceError::Core(c) => ServiceError::Data(format!("{}: {c}", path.display())),
        other => other,
    })
}

pub fn campaign_file(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join("campaigns").join(format!("{id}.json"))
}

pub fn log_file(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join("logs").join(format!("{id}.jsonl"))
}

pub fn read_campaign(path: &Path) -> Result<Campaign> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| ServiceError::Data(format!("{}: not a campaign: {e}", path.display())))
}

/// Campaign and effective state straight from the files, without taking the
/// log for writing, so this is safe next to a running server. An interrupted
/// last line is ignored.
pub fn read_campaign_state(run: &mut Run, data_dir: &Path, id: &str) -> Result<(Campaign, EffectiveState)> {
    crate::store::check_campaign_id(id)?;
    let cpath = campaign_file(data_dir, id);
    let campaign = read_campaign(&cpath)?;
    run.input(&cpath)?;
    let lpath = log_file(data_dir, id);
    let bytes = match fs::read(&lpath) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(ServiceError::File { path: lpath, source: e }),
    };
    let parsed = parse_log(&bytes).map_err(|e| ServiceError::Data(format!("{}: {e}", lpath.display())))?;
    if lpath.exists() {
        run.input(&lpath)?;
    }
    Ok((campaign, EffectiveState::replay(&parsed.entries)))
}

/// Best-worst selections from a data directory or from a campaign file plus an export CSV.
pub fn bws_source(
    run: &mut Run,
    source: &CampaignSource,
    export: Option<&Path>,
) -> Result<(Campaign, Vec<BwsSelection>)> {
    match (&source.data_dir, &source.id, &source.campaign) {
        (Some(dir), Some(id), _) => {
            let (c, state) = read_campaign_state(run, dir, id)?;
            Ok((c, state.bws_selections()))
        }
        (None, _, Some(cpath)) => {
            let c = read_campaign(cpath)?;
            run.input(cpath)?;
            let selections = match export {
                Some(e) => {
                    run.input(e)?;
                    parse_bws_export(&read_text(e)?)?
                }
                None => Vec::new(),
            };
            Ok((c, selections))
        }
        _ => Err(ServiceError::Usage("give --data-dir with --id, or --campaign".into())),
    }
}
