//! Offline stand-in for the language agents: answers interpret and plan
//! requests with the rule-based interpreter and planner.

use crate::agent::{AgentRequest, Responder, INTERPRET_TEMPLATE, PLAN_TEMPLATE};
use crate::interpreter::{interpret, serialize_o1, transcript_from_request, InterpreterConfig};
use crate::planner::{plan_rule_based, serialize_policy, state_from_request};

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedResponder;

impl Responder for RuleBasedResponder {
    fn respond(&self, req: &AgentRequest) -> Option<String> {
        match req.prompt_template_id.as_str() {
            INTERPRET_TEMPLATE => {
                let transcript = transcript_from_request(req)?;
                Some(match interpret(&transcript, &InterpreterConfig::default()) {
                    Ok(cmd) => serialize_o1(&cmd),
                    Err(e) => {
                        log::debug!("rule-based interpreter: {e}");
                        r#"{"slots":[]}"#.to_string()
                    }
                })
            }
            PLAN_TEMPLATE => {
                let state = state_from_request(req)?;
                Some(match plan_rule_based(&state) {
                    Ok(policy) => serialize_policy(&policy),
                    Err(e) => {
                        log::debug!("rule-based planner: {e}");
                        "[]".to_string()
                    }
                })
            }
            _ => None,
        }
    }
}
