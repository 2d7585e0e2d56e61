use std::collections::BTreeMap;
use std::sync::Arc;

use gazefuse::agent::{
    Agent, AgentError, AgentRequest, FailingTransport, HttpAgent, Journal, JournalingAgent, MockAgent, RemoteConfig,
    RetryPolicy, INTERPRET_TEMPLATE, PLAN_TEMPLATE,
};
use gazefuse::harness::builder::{s3_multi_step, s4_causal};
use gazefuse::harness::{run_scenario, RunConfig, Stage};
use gazefuse::responder::RuleBasedResponder;

fn req(template: &str, k: &str) -> AgentRequest {
    AgentRequest::new(template, BTreeMap::from([("transcript".to_string(), k.to_string())]))
}

#[test]
fn mock_lookup_prefers_exact_then_template_then_fallback() {
    let mut m = MockAgent::new();
    let a = req(INTERPRET_TEMPLATE, "a");
    let b = req(INTERPRET_TEMPLATE, "b");
    m.insert(INTERPRET_TEMPLATE, &a.variables_hash(), "exact");
    m.insert_for_template(INTERPRET_TEMPLATE, "template");
    assert_eq!(m.complete(&a).unwrap().text, "exact");
    assert_eq!(m.complete(&b).unwrap().text, "template");
    let err = m.complete(&req(PLAN_TEMPLATE, "x")).unwrap_err();
    assert!(matches!(err, AgentError::NoCannedResponse { .. }));

    let with_rules = MockAgent::with_fallback(Arc::new(RuleBasedResponder));
    // the rule responder declines requests it cannot decode
    assert!(matches!(with_rules.complete(&req(PLAN_TEMPLATE, "garbage")), Err(AgentError::NoCannedResponse { .. })));
}

#[test]
fn missing_credentials_fail_before_any_request() {
    let err = RemoteConfig::from_lookup(|_| None).unwrap_err();
    assert!(matches!(err, AgentError::CredentialMissing(_)));
    let err = RemoteConfig::from_lookup(|k| (k == "GAZEFUSE_AGENT_API_KEY").then(|| "k".to_string())).unwrap_err();
    assert!(matches!(err, AgentError::EndpointMissing(_)));

    let transport = Arc::new(FailingTransport::default());
    let cfg = RemoteConfig { endpoint: "http://127.0.0.1:9".into(), api_key: String::new(), model_id: None };
    let agent = HttpAgent::new(cfg, transport.clone());
    assert!(matches!(agent.complete(&req(PLAN_TEMPLATE, "x")), Err(AgentError::CredentialMissing(_))));
    assert_eq!(transport.calls(), 0);
}

#[test]
fn transport_failures_are_retried_then_surface_as_remote_errors() {
    let transport = Arc::new(FailingTransport::default());
    let cfg = RemoteConfig { endpoint: "http://127.0.0.1:9".into(), api_key: "key".into(), model_id: None };
    let slept = Arc::new(std::sync::Mutex::new(Vec::new()));
    let log = slept.clone();
    let agent = HttpAgent::new(cfg, transport.clone())
        .with_retry(RetryPolicy::default())
        .with_sleeper(move |d| log.lock().unwrap().push(d));
    let s = s3_multi_step();
    let request = gazefuse::interpreter::interpret_request(&s.transcript, &s.interpreter);
    let err = agent.complete(&request).unwrap_err();
    assert!(matches!(err, AgentError::Transport(_)), "{err:?}");
    assert_eq!(transport.calls(), 3);
    let delays = slept.lock().unwrap().clone();
    assert_eq!(delays.len(), 2);
    assert!(delays[0].as_millis() >= 500 && delays[0].as_millis() <= 625);
    assert!(delays[1].as_millis() >= 1000 && delays[1].as_millis() <= 1250);

    let r = run_scenario(&s, &agent, &RunConfig::default());
    assert_eq!(r.failure_stage, Some(Stage::Input));
    assert!(r.failure.unwrap().contains("network access is disabled"));
}

#[test]
fn journal_replay_reproduces_the_live_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.jsonl");
    let s = s4_causal();
    let live = {
        let journal = Arc::new(Journal::create(&path).unwrap());
        let agent = JournalingAgent::new(MockAgent::with_fallback(Arc::new(RuleBasedResponder)), journal)
            .for_scenario(&s.id);
        run_scenario(&s, &agent, &RunConfig::default())
    };
    assert!(live.success);
    let entries = gazefuse::agent::read_journal(&path).unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0].scenario_id.as_deref(), Some("s4_causal"));

    let replay = MockAgent::from_journal(&path).unwrap();
    let again = run_scenario(&s, &replay, &RunConfig::default());
    assert_eq!(again, live);

    // a journal for a different command has no answer for this one
    let other = s3_multi_step();
    let r = run_scenario(&other, &replay, &RunConfig::default());
    assert_eq!(r.failure_stage, Some(Stage::Input));
    assert!(r.failure.unwrap().contains("no canned response"));
}
