#![allow(dead_code)]

use std::sync::Arc;

use xmaster_core::agent::{Agent, AgentConfig};
use xmaster_core::llm_gateway::{CallLog, CallRecord, FnModel, Gateway, GatewayError, GenRequest, RetryPolicy, Role as MsgRole};
use xmaster_core::sandbox::{ExecRequest, ExecutionResult, ScriptedSandbox};
use xmaster_core::workflow::Role;

/// Which workflow role issued a request, read from its system message.
pub fn role_of(req: &GenRequest) -> Role {
    let system = req
        .messages
        .iter()
        .find(|m| m.role == MsgRole::System)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    if system.starts_with("You are a critic") {
        Role::Critic
    } else if system.starts_with("You are a rewriter") {
        Role::Rewriter
    } else if system.starts_with("You are a selector") {
        Role::Selector
    } else {
        Role::Solver
    }
}

/// A model that runs one tool call per trace and then answers with
/// `answer(role, request)`.
pub fn role_model(
    answer: impl Fn(Role, &GenRequest) -> String + Send + Sync + 'static,
) -> FnModel {
    FnModel::new(move |req: &GenRequest, _| {
        let prefill = req.prefill();
        if prefill.ends_with("</execution_results>") {
            Ok(format!("Checked.</think>\n\n{}", answer(role_of(req), req)))
        } else {
            Ok("Let me check.<code>print('ok')</code>".to_string())
        }
    })
    .chunk_chars(7)
}

pub fn echo_sandbox() -> Arc<ScriptedSandbox> {
    Arc::new(ScriptedSandbox::new(|req: &ExecRequest, _| {
        Ok(ExecutionResult::success(&req.session_id, "ok\n"))
    }))
}

pub fn agent_with(model: FnModel, config: AgentConfig) -> (Agent, CallLog) {
    let log = CallLog::new();
    let gateway = Gateway::new(Arc::new(model))
        .with_retry(RetryPolicy::none())
        .with_log(log.clone());
    (Agent::new(gateway, echo_sandbox(), config).unwrap(), log)
}

pub fn agent(model: FnModel) -> (Agent, CallLog) {
    agent_with(model, AgentConfig::default())
}

/// Groups call records into maximal runs of the same role, in start order,
/// and checks that every call of one group ends before any call of the next
/// starts. Returns the roles of the waves.
pub fn barrier_waves(records: &[CallRecord]) -> Result<Vec<Role>, String> {
    let mut waves: Vec<(Role, Vec<&CallRecord>)> = Vec::new();
    for r in records {
        let role = role_of(&r.request);
        match waves.last_mut() {
            Some((last, group)) if *last == role => group.push(r),
            _ => waves.push((role, vec![r])),
        }
    }
    for pair in waves.windows(2) {
        let end = pair[0].1.iter().map(|r| r.end_seq).max().unwrap();
        let start = pair[1].1.iter().map(|r| r.start_seq).min().unwrap();
        if end >= start {
            return Err(format!("{:?} overlaps {:?}", pair[0].0, pair[1].0));
        }
    }
    Ok(waves.into_iter().map(|(r, _)| r).collect())
}

pub fn transport_error() -> GatewayError {
    GatewayError::Transport("connection reset".into())
}

/// Scripted behaviour of the whole pipeline on one question.
#[derive(Debug, Clone, Copy)]
pub struct Plan {
    /// How many of the solvers answer correctly.
    pub solvers: usize,
    /// Critics replace any answer with the gold one.
    pub critic_fixes: bool,
    /// How many of the rewriters answer correctly.
    pub rewriters: usize,
    /// The selector picks a correct candidate when there is one; otherwise
    /// it prefers a wrong one.
    pub selector_good: bool,
    /// The tool-free baseline answers correctly.
    pub baseline: bool,
}

pub const fn plan(solvers: usize, critic_fixes: bool, rewriters: usize, selector_good: bool, baseline: bool) -> Plan {
    Plan {
        solvers,
        critic_fixes,
        rewriters,
        selector_good,
        baseline,
    }
}

/// Ten questions `Q1`..`Q10` with gold answers `G1`..`G10`.
pub const SCENARIO: [Plan; 10] = [
    plan(5, false, 5, true, true),
    plan(3, false, 4, true, false),
    plan(0, true, 5, true, false),
    plan(2, false, 1, true, false),
    plan(2, false, 1, false, false),
    plan(0, false, 0, true, false),
    plan(4, false, 5, false, true),
    plan(1, false, 2, true, false),
    plan(1, true, 3, false, false),
    plan(0, false, 0, false, false),
];

pub fn scenario_dataset_jsonl() -> String {
    let cats = ["Math", "Physics"];
    (1..=SCENARIO.len())
        .map(|i| {
            serde_json::json!({
                "id": format!("q{i}"),
                "question": format!("Q{i}: what is the value?"),
                "gold_answer": format!("G{i}"),
                "category": cats[(i - 1) % 2],
            })
            .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn question_index(req: &GenRequest, role: Role) -> usize {
    let user = &req.messages.iter().find(|m| m.role == MsgRole::User).unwrap().content;
    let text = match role {
        Role::Solver => user.as_str(),
        _ => user.split("Question:\n").nth(1).unwrap(),
    };
    let digits: String = text[1..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().unwrap()
}

fn final_answers(text: &str) -> Vec<String> {
    text.split("## Solution ")
        .skip(1)
        .map(|block| block.split("Final Answer: ").nth(1).unwrap().lines().next().unwrap().trim().to_string())
        .collect()
}

/// A model that follows [`SCENARIO`]. `width` is the number of parallel
/// traces per stage; the k-th call of a stage for a question is correct when
/// `k % width` is below the planned count.
pub fn scenario_model(width: usize) -> FnModel {
    let counters: Arc<std::sync::Mutex<std::collections::HashMap<(usize, Role), usize>>> = Default::default();
    FnModel::new(move |req: &GenRequest, _| {
        let prefill = req.prefill();
        let role = role_of(req);
        let q = question_index(req, role);
        let plan = SCENARIO[q - 1];
        let gold = format!("G{q}");
        let wrong = format!("W{q}");
        if prefill == "<think>" {
            let a = if plan.baseline { &gold } else { &wrong };
            return Ok(format!("Thinking.</think>\n\nFinal Answer: {a}"));
        }
        if !prefill.ends_with("</execution_results>") {
            return Ok("Let me check.<code>print('ok')</code>".to_string());
        }
        let next = |role: Role| {
            let mut c = counters.lock().unwrap();
            let k = c.entry((q, role)).or_insert(0);
            let idx = *k % width;
            *k += 1;
            idx
        };
        let user = &req.messages.iter().find(|m| m.role == MsgRole::User).unwrap().content;
        let answer = match role {
            Role::Solver => {
                if next(role) < plan.solvers { gold } else { wrong }
            }
            Role::Critic => {
                let given = user.split("Final Answer: ").nth(1).map(|s| s.lines().next().unwrap().trim().to_string());
                if plan.critic_fixes { gold } else { given.unwrap_or(wrong) }
            }
            Role::Rewriter => {
                if next(role) < plan.rewriters { gold } else { wrong }
            }
            Role::Selector => {
                let cands = final_answers(user);
                let pick = if plan.selector_good {
                    cands.iter().position(|c| *c == gold)
                } else {
                    cands.iter().position(|c| *c != gold)
                };
                (pick.unwrap_or(0) + 1).to_string()
            }
        };
        Ok(format!("Checked.</think>\n\nFinal Answer: {answer}"))
    })
    .chunk_chars(9)
}
