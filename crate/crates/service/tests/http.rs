mod common;

use std::collections::BTreeMap;

use a2t_core::annotation::parse_bws_export;
use a2t_core::scoring::bws_scores;
use a2t_service::config::AuthConfig;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[test]
fn two_annotators_export_rederives_bws() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = bws_campaign("pilot", 10, &["alice", "bob"]);
    let base = spawn(dir.path(), vec![campaign.clone()], open_auth());
    let agent = agent();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let list = get(&agent, &format!("{base}/campaigns"), None).json();
    assert_eq!(list["campaigns"][0]["id"], "pilot");
    assert_eq!(list["campaigns"][0]["instances"], 10);

    let mut sent = annotate_all(&agent, &base, "pilot", "alice", None, &mut rng);
    sent.extend(annotate_all(&agent, &base, "pilot", "bob", None, &mut rng));
    assert_eq!(sent.len(), 20);

    let progress = get(&agent, &format!("{base}/campaigns/pilot/progress"), None).json();
    assert_eq!(progress["complete_instances"], 10);
    assert_eq!(progress["judgments"], 20);
    assert_eq!(progress["annotators"]["bob"]["done"], 10);

    let export = get(&agent, &format!("{base}/campaigns/pilot/export?view=analysis"), None);
    assert_eq!(export.status, 200);
    let from_export = bws_scores(&campaign, &parse_bws_export(&export.body).unwrap()).unwrap();
    let direct = bws_scores(&campaign, &sent).unwrap();
    assert_eq!(from_export.scores, direct.scores);
    assert_eq!(direct.scores.len(), 60);

    let blind = get(&agent, &format!("{base}/campaigns/pilot/export?view=annotator"), None);
    assert_eq!(blind.status, 200);
    for s in SYSTEMS {
        assert!(!blind.body.contains(&format!(",{s}")), "system tag {s} leaked");
    }
    assert!(!blind.body.contains("system"));
}

#[test]
fn finished_annotator_gets_empty_task() {
    let dir = tempfile::tempdir().unwrap();
    let base = spawn(dir.path(), vec![bws_campaign("c", 2, &["a", "b"])], open_auth());
    let agent = agent();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    annotate_all(&agent, &base, "c", "a", None, &mut rng);
    let r = get(&agent, &format!("{base}/campaigns/c/next?annotator=a"), None);
    assert_eq!(r.status, 200);
    let v = r.json();
    assert!(v["task"].is_null());
    assert_eq!(v["remaining"], 0);
    assert_eq!(v["progress"], json!({"assigned": 2, "done": 2}));

    let other = get(&agent, &format!("{base}/campaigns/c/next?annotator=b"), None).json();
    assert_eq!(other["remaining"], 2);
    assert!(!other["task"].is_null());
    assert!(other["task"]["candidates"][0].get("system").is_none());
}

#[test]
fn invalid_selections_are_rejected_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let base = spawn(dir.path(), vec![bws_campaign("c", 2, &["a", "b"])], open_auth());
    let agent = agent();
    let url = format!("{base}/campaigns/c/judgments");
    let judgment = |best: [&str; 2], worst: [&str; 2]| {
        json!({"judgment": {"type": "best_worst", "instance_id": "i0", "annotator_id": "a", "best": best, "worst": worst}})
    };

    let r = post(&agent, &url, None, None, &judgment(["a0-HUMAN", "a0-GPT2"], ["a0-GPT2", "a0-PEGASUS"]));
    assert_eq!(r.status, 422);
    assert_eq!(r.json()["error"], "overlapping_selection");

    let r = post(&agent, &url, None, None, &judgment(["a0-HUMAN", "a1-GPT2"], ["a0-T5_small", "a0-PEGASUS"]));
    assert_eq!(r.status, 422);
    assert_eq!(r.json()["error"], "unknown_candidate");

    let mut body = judgment(["a0-HUMAN", "a0-GPT2"], ["a0-T5_small", "a0-PEGASUS"]);
    body["judgment"]["annotator_id"] = json!("mallory");
    let r = post(&agent, &url, None, None, &body);
    assert_eq!(r.status, 403);
    assert_eq!(r.json()["error"], "unassigned_annotator");

    let r = post(&agent, &url, None, None, &json!({"judgment": {"type": "best_worst"}}));
    assert_eq!(r.status, 400);
    assert_eq!(r.json()["error"], "malformed_body");

    let r = get(&agent, &format!("{base}/campaigns/nope/progress"), None);
    assert_eq!(r.status, 404);
    assert_eq!(r.json()["error"], "unknown_campaign");

    // nothing was written by the rejected requests
    assert_eq!(get(&agent, &format!("{base}/campaigns/c/progress"), None).json()["judgments"], 0);
}

#[test]
fn idempotency_key_deduplicates_retries() {
    let dir = tempfile::tempdir().unwrap();
    let base = spawn(dir.path(), vec![bws_campaign("c", 3, &["a", "b"])], open_auth());
    let agent = agent();
    let url = format!("{base}/campaigns/c/judgments");
    let body = json!({"judgment": {"type": "best_worst", "instance_id": "i0", "annotator_id": "a",
        "best": ["a0-HUMAN", "a0-GPT2"], "worst": ["a0-T5_small", "a0-PEGASUS"]}});

    let first = post(&agent, &url, None, Some("k-1"), &body).json();
    let retry = post(&agent, &url, None, Some("k-1"), &body).json();
    assert_eq!(first["receipts"][0]["duplicate"], false);
    assert_eq!(retry["receipts"][0]["duplicate"], true);
    assert_eq!(first["receipts"][0]["seq"], retry["receipts"][0]["seq"]);
    assert_eq!(get(&agent, &format!("{base}/campaigns/c/progress"), None).json()["last_seq"], 1);

    // same content without a key is a resubmission that replaces the earlier one
    let again = post(&agent, &url, None, None, &body).json();
    assert_eq!(again["receipts"][0]["replaced"], true);
    let p = get(&agent, &format!("{base}/campaigns/c/progress"), None).json();
    assert_eq!((p["last_seq"].clone(), p["judgments"].clone()), (json!(2), json!(1)));

    // batches key each item separately
    let batch = json!({"idempotency_key": "b", "judgments": [
        {"type": "best_worst", "instance_id": "i1", "annotator_id": "a", "best": ["a1-HUMAN", "a1-GPT2"], "worst": ["a1-T5_small", "a1-PEGASUS"]},
        {"type": "best_worst", "instance_id": "i2", "annotator_id": "a", "best": ["a2-HUMAN", "a2-GPT2"], "worst": ["a2-T5_small", "a2-PEGASUS"]}
    ]});
    let r1 = post(&agent, &url, None, None, &batch).json();
    let r2 = post(&agent, &url, None, None, &batch).json();
    assert_eq!(r1["receipts"].as_array().unwrap().len(), 2);
    assert_eq!(r2["receipts"][0]["duplicate"], true);
    assert_eq!(r2["receipts"][1]["duplicate"], true);
    assert_eq!(get(&agent, &format!("{base}/campaigns/c/progress"), None).json()["judgments"], 3);
}

#[test]
fn sessions_gate_annotators_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let auth = AuthConfig {
        required: true,
        session_ttl_secs: 3600,
        access_codes: BTreeMap::from([
            ("a".to_string(), "code-a".to_string()),
            ("b".to_string(), "code-b".to_string()),
            ("z".to_string(), "code-z".to_string()),
        ]),
        admin_token: Some("admin-secret".into()),
    };
    let base = spawn(dir.path(), vec![bws_campaign("c", 2, &["a", "b"])], auth);
    let agent = agent();
    let session = |ann: &str, code: &str| {
        post(
            &agent,
            &format!("{base}/auth/session"),
            None,
            None,
            &json!({"annotator_id": ann, "campaign_id": "c", "access_code": code}),
        )
    };

    assert_eq!(session("a", "wrong").status, 401);
    assert_eq!(session("z", "code-z").status, 403, "z holds a code but no assignment");
    let token_a = session("a", "code-a").json()["token"].as_str().unwrap().to_string();
    assert_eq!(token_a.len(), 64);

    let next = format!("{base}/campaigns/c/next?annotator=a");
    assert_eq!(get(&agent, &next, None).status, 401);
    assert_eq!(get(&agent, &next, Some("forged")).status, 401);
    assert_eq!(get(&agent, &next, Some(&token_a)).status, 200);
    assert_eq!(get(&agent, &format!("{base}/campaigns/c/next?annotator=b"), Some(&token_a)).status, 403);
    // the session names the annotator when the query does not
    assert_eq!(get(&agent, &format!("{base}/campaigns/c/next"), Some(&token_a)).status, 200);

    let url = format!("{base}/campaigns/c/judgments");
    let as_b = json!({"judgment": {"type": "best_worst", "instance_id": "i0", "annotator_id": "b",
        "best": ["a0-HUMAN", "a0-GPT2"], "worst": ["a0-T5_small", "a0-PEGASUS"]}});
    assert_eq!(post(&agent, &url, Some(&token_a), None, &as_b).status, 403);
    let mut as_a = as_b.clone();
    as_a["judgment"]["annotator_id"] = json!("a");
    assert_eq!(post(&agent, &url, Some(&token_a), None, &as_a).status, 200);

    let analysis = format!("{base}/campaigns/c/export?view=analysis");
    assert_eq!(get(&agent, &analysis, Some(&token_a)).status, 403);
    assert_eq!(get(&agent, &analysis, Some("admin-secret")).status, 200);
    let blind = format!("{base}/campaigns/c/export?view=annotator");
    assert_eq!(get(&agent, &blind, None).status, 401);
    assert_eq!(get(&agent, &blind, Some(&token_a)).status, 200);
}
