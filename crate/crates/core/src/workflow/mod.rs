//! Multi-agent pipeline: solvers, critics, rewriters and a selector, each a
//! full agent trace, run stage by stage with a barrier in between.

mod prompts;

pub use prompts::{build_role_prompt, label_candidates, PromptSet, RolePrompt, RoleTemplate};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use futures::future::join_all;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{extract_from_text, Agent, AgentError, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Solver,
    Critic,
    Rewriter,
    Selector,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Solver, Role::Critic, Role::Rewriter, Role::Selector];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Solver => "solver",
            Role::Critic => "critic",
            Role::Rewriter => "rewriter",
            Role::Selector => "selector",
        }
    }
}

/// Shown to a critic whose solver produced nothing.
pub const MISSING_SOLUTION: &str = "(The solver did not produce a solution.)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    pub n_parallel: usize,
    pub scatter: bool,
    pub stack: bool,
    pub prompts: PromptSet,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            n_parallel: 5,
            scatter: true,
            stack: true,
            prompts: PromptSet::default(),
        }
    }
}

impl WorkflowConfig {
    /// Width of the scattered stages.
    pub fn width(&self) -> usize {
        if self.scatter {
            self.n_parallel
        } else {
            1
        }
    }

    /// Agent runs one query costs under this config.
    pub fn expected_agent_runs(&self) -> usize {
        let n = self.width();
        let stacked = match (self.stack, n) {
            (false, _) => 0,
            (true, 1) => 1,
            (true, n) => n + 1,
        };
        2 * n + stacked
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            n_parallel: self.n_parallel,
            scatter: self.scatter,
            stack: self.stack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub n_parallel: usize,
    pub scatter: bool,
    pub stack: bool,
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{role:?} prompt got {got} candidate(s)")]
    ArityMismatch { role: Role, got: usize },
    #[error("every {role:?} trace failed")]
    StageFailure { role: Role, run: Box<WorkflowRun> },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("persisting run: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowRun {
    pub query: String,
    pub config: ConfigSnapshot,
    pub solver_traces: Vec<Trace>,
    pub critic_traces: Vec<Trace>,
    pub rewriter_traces: Vec<Trace>,
    pub selector_trace: Option<Trace>,
    /// Full text of the chosen solution. Without stacking this is the first
    /// critiqued solution; score those with [`WorkflowRun::stage_answers`].
    pub final_answer: Option<String>,
    /// 1-based label among the successful rewriter outputs.
    pub selected: Option<usize>,
    /// Set when the selector's choice could not be read and candidate 1 was
    /// used instead.
    pub selection_fallback: bool,
    /// Milliseconds per stage.
    pub stage_timings: BTreeMap<Role, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl WorkflowRun {
    fn new(query: &str, config: &WorkflowConfig) -> Self {
        Self {
            query: query.to_string(),
            config: config.snapshot(),
            solver_traces: Vec::new(),
            critic_traces: Vec::new(),
            rewriter_traces: Vec::new(),
            selector_trace: None,
            final_answer: None,
            selected: None,
            selection_fallback: false,
            stage_timings: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn traces(&self, role: Role) -> Vec<&Trace> {
        match role {
            Role::Solver => self.solver_traces.iter().collect(),
            Role::Critic => self.critic_traces.iter().collect(),
            Role::Rewriter => self.rewriter_traces.iter().collect(),
            Role::Selector => self.selector_trace.iter().collect(),
        }
    }

    /// Extracted answer of each trace of a stage, in launch order.
    pub fn stage_answers(&self, role: Role) -> Vec<Option<String>> {
        self.traces(role).iter().map(|t| t.answer.clone()).collect()
    }

    /// Extracted form of the final answer.
    pub fn final_extracted(&self, marker: &str) -> Option<String> {
        self.final_answer
            .as_deref()
            .and_then(|a| extract_from_text(a, marker))
    }

    pub fn agent_runs(&self) -> usize {
        Role::ALL.iter().map(|&r| self.traces(r).len()).sum()
    }

    /// Writes `run.json` plus one `<role>_<k>.json` per trace.
    pub fn persist(&self, dir: &Path) -> Result<(), std::io::Error> {
        std::fs::create_dir_all(dir)?;
        let meta = serde_json::json!({
            "query": self.query,
            "config": self.config,
            "final_answer": self.final_answer,
            "selected": self.selected,
            "selection_fallback": self.selection_fallback,
            "stage_timings": self.stage_timings,
            "failure": self.failure,
            "agent_runs": self.agent_runs(),
        });
        std::fs::write(dir.join("run.json"), serde_json::to_vec_pretty(&meta)?)?;
        for role in Role::ALL {
            for (i, t) in self.traces(role).iter().enumerate() {
                let name = if role == Role::Selector {
                    "selector.json".to_string()
                } else {
                    format!("{}_{}.json", role.as_str(), i + 1)
                };
                std::fs::write(dir.join(name), serde_json::to_vec_pretty(t)?)?;
            }
        }
        Ok(())
    }
}

/// Answer-segment text of a trace, the unit passed between stages.
fn solution_text(trace: &Trace) -> Option<String> {
    trace.answer_text().map(str::to_string)
}

pub async fn run_workflow(agent: &Agent, query: &str, config: &WorkflowConfig) -> Result<WorkflowRun, WorkflowError> {
    let n = config.width();
    let mut run = WorkflowRun::new(query, config);

    let solver = config.prompts.build(Role::Solver, query, &[])?;
    let prompts = vec![solver; n];
    run.solver_traces = stage(agent, Role::Solver, &prompts, &mut run.stage_timings).await?;
    let solutions: Vec<Option<String>> = run.solver_traces.iter().map(solution_text).collect();
    check_stage(&mut run, Role::Solver, &solutions)?;

    let prompts = solutions
        .iter()
        .map(|s| {
            let s = s.clone().unwrap_or_else(|| MISSING_SOLUTION.to_string());
            config.prompts.build(Role::Critic, query, &[s])
        })
        .collect::<Result<Vec<_>, _>>()?;
    run.critic_traces = stage(agent, Role::Critic, &prompts, &mut run.stage_timings).await?;
    let critiqued: Vec<Option<String>> = run.critic_traces.iter().map(solution_text).collect();
    check_stage(&mut run, Role::Critic, &critiqued)?;

    if !config.stack {
        run.final_answer = critiqued.into_iter().flatten().next();
        return Ok(run);
    }

    let critiqued: Vec<String> = critiqued.into_iter().flatten().collect();
    let rewriter = config.prompts.build(Role::Rewriter, query, &critiqued)?;
    let prompts = vec![rewriter; n];
    run.rewriter_traces = stage(agent, Role::Rewriter, &prompts, &mut run.stage_timings).await?;
    let rewritten: Vec<Option<String>> = run.rewriter_traces.iter().map(solution_text).collect();
    check_stage(&mut run, Role::Rewriter, &rewritten)?;
    let rewritten: Vec<String> = rewritten.into_iter().flatten().collect();

    if n == 1 || rewritten.len() == 1 {
        run.selected = Some(1);
        run.final_answer = Some(rewritten[0].clone());
        return Ok(run);
    }

    let selector = config.prompts.build(Role::Selector, query, &rewritten)?;
    let mut traces = stage(agent, Role::Selector, &[selector], &mut run.stage_timings).await?;
    let trace = traces.pop().expect("one selector trace");
    let (index, fallback) = match trace.answer_text() {
        Some(text) => parse_selection_with(text, rewritten.len(), &agent.config().answer_marker),
        None => (1, true),
    };
    run.selector_trace = Some(trace);
    run.selected = Some(index);
    run.selection_fallback = fallback;
    run.final_answer = Some(rewritten[index - 1].clone());
    Ok(run)
}

async fn stage(
    agent: &Agent,
    role: Role,
    prompts: &[RolePrompt],
    timings: &mut BTreeMap<Role, u64>,
) -> Result<Vec<Trace>, AgentError> {
    let started = Instant::now();
    let traces = join_all(prompts.iter().map(|p| agent.solve(&p.user, &p.system))).await;
    timings.insert(role, started.elapsed().as_millis() as u64);
    tracing::debug!(?role, runs = prompts.len(), "stage finished");
    traces.into_iter().collect()
}

fn check_stage(run: &mut WorkflowRun, role: Role, outputs: &[Option<String>]) -> Result<(), WorkflowError> {
    if outputs.iter().any(Option::is_some) {
        return Ok(());
    }
    let reasons: Vec<String> = run
        .traces(role)
        .iter()
        .map(|t| format!("{:?}{}", t.termination, t.error.as_ref().map(|e| format!(": {e}")).unwrap_or_default()))
        .collect();
    run.failure = Some(format!("all {} traces failed ({})", role.as_str(), reasons.join("; ")));
    Err(WorkflowError::StageFailure {
        role,
        run: Box::new(run.clone()),
    })
}

/// Reads the chosen 1-based label from a selector answer: the last integer
/// in `1..=n`. Returns `(1, true)` when there is none.
pub fn parse_selection(text: &str, n: usize) -> (usize, bool) {
    static INT: OnceLock<Regex> = OnceLock::new();
    let re = INT.get_or_init(|| Regex::new(r"\d+").unwrap());
    re.find_iter(text)
        .filter_map(|m| m.as_str().parse::<usize>().ok())
        .filter(|&k| (1..=n).contains(&k))
        .last()
        .map(|k| (k, false))
        .unwrap_or((1, true))
}

/// Like [`parse_selection`] but looks after the answer marker first.
pub fn parse_selection_with(text: &str, n: usize, marker: &str) -> (usize, bool) {
    if let Some(tail) = extract_from_text(text, marker) {
        let (k, fallback) = parse_selection(&tail, n);
        if !fallback {
            return (k, false);
        }
    }
    parse_selection(text, n)
}
