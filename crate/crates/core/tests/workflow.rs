mod common;

use std::path::PathBuf;

use common::{agent, barrier_waves, role_model};
use xmaster_core::agent::Termination;
use xmaster_core::workflow::{build_role_prompt, run_workflow, Role, WorkflowConfig, WorkflowError};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn candidates(k: usize) -> Vec<String> {
    (1..=k)
        .map(|i| format!("Reasoning for candidate {i}.\n\nFinal Answer: {}", i * 11))
        .collect()
}

fn render(role: Role) -> String {
    let inputs = match role {
        Role::Solver => vec![],
        Role::Critic => candidates(1),
        Role::Rewriter | Role::Selector => candidates(5),
    };
    let p = build_role_prompt(role, "How many moons does Mars have?", &inputs).unwrap();
    format!("=== system ===\n{}\n=== user ===\n{}", p.system, p.user)
}

#[test]
fn role_prompts_match_golden_files() {
    for role in Role::ALL {
        let path = golden_dir().join(format!("{}.txt", role.as_str()));
        let got = render(role);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &got).unwrap();
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{role:?} prompt drifted from {}", path.display());
    }
}

#[tokio::test]
async fn full_pipeline_picks_selected_rewrite() {
    let model = role_model(|role, req| match role {
        Role::Solver => "Final Answer: 1".into(),
        Role::Critic => "Final Answer: 2".into(),
        Role::Rewriter => {
            // Distinct candidates so the selection is observable.
            let k = req.messages.len() + req.prefill().len() % 5;
            format!("Rewritten {k}\nFinal Answer: 2")
        }
        Role::Selector => "Solution 3 is the most careful.\nFinal Answer: 3".into(),
    });
    let (agent, log) = agent(model);
    let run = run_workflow(&agent, "q", &WorkflowConfig::default()).await.unwrap();
    assert_eq!(run.agent_runs(), 16);
    assert_eq!(run.selected, Some(3));
    assert!(!run.selection_fallback);
    let rewritten: Vec<String> = run
        .rewriter_traces
        .iter()
        .map(|t| t.answer_text().unwrap().to_string())
        .collect();
    assert_eq!(run.final_answer.as_deref(), Some(rewritten[2].as_str()));
    assert_eq!(run.final_extracted("Final Answer:").as_deref(), Some("2"));
    assert!(run.critic_traces.iter().all(|t| t.termination == Termination::Answered));

    let waves = barrier_waves(&log.records()).unwrap();
    assert_eq!(waves, vec![Role::Solver, Role::Critic, Role::Rewriter, Role::Selector]);

    // Critics see one solver solution each; rewriters and the selector see all five.
    let selector_req = log
        .records()
        .into_iter()
        .find(|r| common::role_of(&r.request) == Role::Selector)
        .unwrap();
    assert_eq!(selector_req.request.messages[1].content.matches("## Solution ").count(), 5);
}

#[tokio::test]
async fn unanimous_candidates_ignore_selector_output() {
    let model = role_model(|role, _| match role {
        Role::Selector => "I cannot decide.".into(),
        _ => "Final Answer: 5".into(),
    });
    let (agent, _) = agent(model);
    let run = run_workflow(&agent, "q", &WorkflowConfig::default()).await.unwrap();
    assert!(run.selection_fallback);
    assert_eq!(run.final_answer.as_deref(), Some("Final Answer: 5"));
}

#[tokio::test]
async fn ablations() {
    let model = || role_model(|_, _| "Final Answer: 5".into());

    let (a, log) = agent(model());
    let cfg = WorkflowConfig {
        scatter: false,
        ..WorkflowConfig::default()
    };
    let run = run_workflow(&a, "q", &cfg).await.unwrap();
    assert_eq!(run.agent_runs(), 3);
    assert!(run.selector_trace.is_none());
    assert_eq!(barrier_waves(&log.records()).unwrap(), vec![Role::Solver, Role::Critic, Role::Rewriter]);

    let (a, log) = agent(model());
    let cfg = WorkflowConfig {
        stack: false,
        ..WorkflowConfig::default()
    };
    let run = run_workflow(&a, "q", &cfg).await.unwrap();
    assert_eq!(run.agent_runs(), 10);
    assert!(run.rewriter_traces.is_empty() && run.selector_trace.is_none());
    assert_eq!(run.final_answer.as_deref(), Some("Final Answer: 5"));
    assert_eq!(barrier_waves(&log.records()).unwrap(), vec![Role::Solver, Role::Critic]);
}

#[tokio::test]
async fn failed_solver_gets_placeholder_and_all_failed_stage_errors() {
    let model = role_model(|role, _| match role {
        Role::Solver => String::new(),
        _ => "Final Answer: 1".into(),
    });
    // Solvers end their trace without an answer; critics still run.
    let (a, _) = agent(model);
    let run = run_workflow(&a, "q", &WorkflowConfig::default()).await;
    let Err(WorkflowError::StageFailure { role, run }) = run else {
        panic!("expected stage failure");
    };
    assert_eq!(role, Role::Solver);
    assert_eq!(run.solver_traces.len(), 5);
    assert!(run.critic_traces.is_empty());
    assert!(run.failure.unwrap().contains("solver"));
}

#[tokio::test]
async fn persisted_layout() {
    let (a, _) = agent(role_model(|_, _| "Final Answer: 5".into()));
    let run = run_workflow(&a, "q", &WorkflowConfig::default()).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.persist(dir.path()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 17);
    assert!(names.contains(&"run.json".to_string()));
    assert!(names.contains(&"selector.json".to_string()));
    assert!(names.contains(&"rewriter_5.json".to_string()));
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["agent_runs"], 16);
}
