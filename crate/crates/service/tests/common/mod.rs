#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::thread;

use a2t_core::annotation::{
    create_campaign, AssignmentPolicy, BwsSelection, Campaign, CampaignKind, CampaignOptions, Candidate,
    TaskInstance,
};
use a2t_service::api::{router, AppState};
use a2t_service::config::AuthConfig;
use a2t_service::store::CampaignStore;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub const SYSTEMS: [&str; 6] = ["HUMAN", "BART_xsum", "BART_base", "T5_small", "PEGASUS", "GPT2"];

pub fn instances(n: usize) -> Vec<TaskInstance> {
    (0..n)
        .map(|i| TaskInstance {
            id: format!("i{i}"),
            abstract_id: format!("a{i}"),
            abstract_text: format!("Abstract number {i} about title generation."),
            candidates: SYSTEMS
                .iter()
                .map(|s| Candidate {
                    id: format!("a{i}-{s}"),
                    title: format!("Title {i} by {s}"),
                    system: s.to_string(),
                })
                .collect(),
        })
        .collect()
}

pub fn bws_campaign(id: &str, n: usize, annotators: &[&str]) -> Campaign {
    let policy = AssignmentPolicy::All(annotators.iter().map(|s| s.to_string()).collect());
    let opts = CampaignOptions {
        min_annotators_per_instance: 2,
        max_annotators_per_instance: 5,
        seed: 0,
    };
    create_campaign(id, CampaignKind::BestWorst, instances(n), Some(&policy), opts).unwrap()
}

/// Server on an ephemeral port in a background runtime; returns the base URL.
pub fn spawn(root: &Path, campaigns: Vec<Campaign>, auth: AuthConfig) -> String {
    let store = CampaignStore::open(root, 10).unwrap();
    for c in campaigns {
        store.create(c).unwrap();
    }
    let state = AppState::new(store, auth);
    let (tx, rx) = std::sync::mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(state)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn open_auth() -> AuthConfig {
    AuthConfig {
        required: false,
        ..AuthConfig::default()
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

pub fn get(agent: &ureq::Agent, url: &str, token: Option<&str>) -> Reply {
    let mut req = agent.get(url);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let mut resp = req.call().unwrap();
    Reply {
        status: resp.status().as_u16(),
        body: resp.body_mut().read_to_string().unwrap(),
    }
}

pub fn post(agent: &ureq::Agent, url: &str, token: Option<&str>, key: Option<&str>, body: &Value) -> Reply {
    let mut req = agent.post(url);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    if let Some(k) = key {
        req = req.header("Idempotency-Key", k);
    }
    let mut resp = req.send_json(body).unwrap();
    Reply {
        status: resp.status().as_u16(),
        body: resp.body_mut().read_to_string().unwrap(),
    }
}

/// Two best and two distinct worst picks out of the task's candidates.
pub fn random_selection(rng: &mut impl Rng, task: &Value, annotator: &str) -> BwsSelection {
    let mut ids: Vec<String> = task["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["candidate_id"].as_str().unwrap().to_string())
        .collect();
    ids.shuffle(rng);
    BwsSelection {
        instance_id: task["instance_id"].as_str().unwrap().to_string(),
        annotator_id: annotator.to_string(),
        best: ids[..2].iter().cloned().collect::<BTreeSet<_>>(),
        worst: ids[2..4].iter().cloned().collect::<BTreeSet<_>>(),
        timestamp_ms: 0,
    }
}

pub fn bws_body(s: &BwsSelection) -> Value {
    json!({ "judgment": { "type": "best_worst", "instance_id": s.instance_id, "annotator_id": s.annotator_id,
        "best": s.best, "worst": s.worst } })
}

/// Scripted annotator: asks for tasks until none remain. Returns what it sent.
pub fn annotate_all(
    agent: &ureq::Agent,
    base: &str,
    campaign: &str,
    annotator: &str,
    token: Option<&str>,
    rng: &mut impl Rng,
) -> Vec<BwsSelection> {
    let mut sent = Vec::new();
    loop {
        let r = get(agent, &format!("{base}/campaigns/{campaign}/next?annotator={annotator}"), token);
        assert_eq!(r.status, 200, "{}", r.body);
        let v = r.json();
        if v["task"].is_null() {
            assert_eq!(v["remaining"], 0);
            return sent;
        }
        let s = random_selection(rng, &v["task"], annotator);
        let r = post(agent, &format!("{base}/campaigns/{campaign}/judgments"), token, None, &bws_body(&s));
        assert_eq!(r.status, 200, "{}", r.body);
        sent.push(s);
    }
}
