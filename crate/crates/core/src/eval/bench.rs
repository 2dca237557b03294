use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::workflow::{run_workflow, Role, WorkflowConfig, WorkflowError, WorkflowRun};

use super::judge::{Judge, JudgeError, Verdict};
use super::report::{AblationGrid, Report};
use super::{EvalError, QuestionRecord};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub runs: usize,
    /// Workflows in flight at once.
    pub concurrency: usize,
    pub workflow: WorkflowConfig,
    pub out_dir: PathBuf,
    /// Also write every workflow run's traces under `out_dir/runs`.
    pub save_traces: bool,
}

impl BenchConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            runs: 3,
            concurrency: 4,
            workflow: WorkflowConfig::default(),
            out_dir: out_dir.into(),
            save_traces: true,
        }
    }
}

#[derive(Clone)]
pub struct BenchDeps {
    pub agent: Agent,
    /// Plain model without tools, scored as the first stage-table row.
    pub baseline: Option<Agent>,
    pub judge: Arc<dyn Judge>,
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub prediction: Option<String>,
    /// `None` when the judge was unavailable.
    pub correct: Option<bool>,
    pub rationale: String,
}

/// Checkpointed result of one question in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub category: String,
    pub run: usize,
    /// Solver, critic and rewriter outputs in launch order.
    pub stages: BTreeMap<Role, Vec<Scored>>,
    pub final_prediction: Option<String>,
    /// In [0, 1]; the mean over critic outputs when stacking is off. `None`
    /// when unscored.
    pub final_score: Option<f64>,
    pub baseline: Option<Scored>,
    pub selection_fallback: bool,
    pub solver_interactions: Vec<u32>,
    pub error: Option<String>,
}

/// Judges each distinct prediction of a question once.
struct MemoJudge<'a> {
    judge: &'a dyn Judge,
    record: &'a QuestionRecord,
    seen: HashMap<String, Result<Verdict, JudgeError>>,
}

impl MemoJudge<'_> {
    async fn score(&mut self, prediction: Option<&str>) -> Scored {
        let Some(p) = prediction else {
            return Scored {
                prediction: None,
                correct: Some(false),
                rationale: "no answer".into(),
            };
        };
        if !self.seen.contains_key(p) {
            let v = self.judge.judge(self.record, p).await;
            self.seen.insert(p.to_string(), v);
        }
        match &self.seen[p] {
            Ok(v) => Scored {
                prediction: Some(p.to_string()),
                correct: Some(v.correct),
                rationale: v.judge_rationale.clone(),
            },
            Err(e) => Scored {
                prediction: Some(p.to_string()),
                correct: None,
                rationale: e.to_string(),
            },
        }
    }
}

async fn evaluate(record: &QuestionRecord, run_no: usize, deps: &BenchDeps, cfg: &BenchConfig) -> QuestionOutcome {
    let wf = &cfg.workflow;
    let marker = deps.agent.config().answer_marker.clone();
    let (run, error) = match run_workflow(&deps.agent, &record.question, wf).await {
        Ok(run) => (Some(run), None),
        Err(WorkflowError::StageFailure { role, run }) => (Some(*run), Some(format!("{role:?} stage failed"))),
        Err(e) => (None, Some(e.to_string())),
    };
    if cfg.save_traces {
        if let Some(run) = &run {
            let dir = cfg
                .out_dir
                .join("runs")
                .join(format!("run{run_no}"))
                .join(file_key(&record.id));
            if let Err(e) = run.persist(&dir) {
                tracing::warn!(question = %record.id, error = %e, "could not save traces");
            }
        }
    }

    let mut judge = MemoJudge {
        judge: deps.judge.as_ref(),
        record,
        seen: HashMap::new(),
    };
    let mut stages = BTreeMap::new();
    let mut roles = vec![Role::Solver, Role::Critic];
    if wf.stack {
        roles.push(Role::Rewriter);
    }
    for role in roles {
        let mut answers = run.as_ref().map(|r| r.stage_answers(role)).unwrap_or_default();
        answers.resize(wf.width(), None);
        let mut scored = Vec::with_capacity(answers.len());
        for a in &answers {
            scored.push(judge.score(a.as_deref()).await);
        }
        stages.insert(role, scored);
    }

    let final_prediction = run.as_ref().and_then(|r| r.final_extracted(&marker));
    let final_score = if error.is_some() {
        Some(0.0)
    } else if wf.stack {
        judge
            .score(final_prediction.as_deref())
            .await
            .correct
            .map(|c| if c { 1.0 } else { 0.0 })
    } else {
        let verdicts: Vec<bool> = stages[&Role::Critic].iter().filter_map(|s| s.correct).collect();
        (!verdicts.is_empty()).then(|| verdicts.iter().filter(|&&c| c).count() as f64 / verdicts.len() as f64)
    };

    let baseline = match &deps.baseline {
        Some(agent) => {
            let prediction = match agent.solve(&record.question, "").await {
                Ok(t) => t.answer,
                Err(e) => {
                    tracing::warn!(question = %record.id, error = %e, "baseline run failed");
                    None
                }
            };
            Some(judge.score(prediction.as_deref()).await)
        }
        None => None,
    };

    QuestionOutcome {
        question_id: record.id.clone(),
        category: record.category.clone(),
        run: run_no,
        stages,
        final_prediction,
        final_score,
        baseline,
        selection_fallback: run.as_ref().is_some_and(|r: &WorkflowRun| r.selection_fallback),
        solver_interactions: run
            .as_ref()
            .map(|r| r.solver_traces.iter().map(|t| t.interactions).collect())
            .unwrap_or_default(),
        error,
    }
}

/// File-name-safe, collision-free form of a question id.
fn file_key(id: &str) -> String {
    let mut out = String::new();
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn checkpoint_path(out: &Path, run: usize, id: &str) -> PathBuf {
    out.join("checkpoints")
        .join(format!("run{run}"))
        .join(format!("{}.json", file_key(id)))
}

fn read_checkpoint(path: &Path) -> Result<Option<QuestionOutcome>, EvalError> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|source| EvalError::Checkpoint {
            path: path.display().to_string(),
            source,
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

/// Runs every question `cfg.runs` times, skipping (question, run) pairs that
/// already have a checkpoint, then writes `report.json` and `report.md`.
pub async fn run_benchmark(dataset: &[QuestionRecord], deps: &BenchDeps, cfg: &BenchConfig) -> Result<Report, EvalError> {
    if cfg.runs == 0 {
        return Err(EvalError::NoRuns);
    }
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut pending = Vec::new();
    for run in 1..=cfg.runs {
        for rec in dataset {
            if read_checkpoint(&checkpoint_path(&cfg.out_dir, run, &rec.id))?.is_none() {
                pending.push((run, rec));
            }
        }
    }
    tracing::info!(pending = pending.len(), total = cfg.runs * dataset.len(), "benchmark started");

    let mut done = stream::iter(pending)
        .map(|(run, rec)| async move { evaluate(rec, run, deps, cfg).await })
        .buffer_unordered(cfg.concurrency.max(1));
    while let Some(outcome) = done.next().await {
        let path = checkpoint_path(&cfg.out_dir, outcome.run, &outcome.question_id);
        let bytes = serde_json::to_vec_pretty(&outcome).expect("outcome serializes");
        write_atomic(&path, &bytes)?;
        tracing::info!(question = %outcome.question_id, run = outcome.run, score = ?outcome.final_score, "checkpointed");
    }

    let mut outcomes = Vec::with_capacity(cfg.runs * dataset.len());
    for run in 1..=cfg.runs {
        for rec in dataset {
            let path = checkpoint_path(&cfg.out_dir, run, &rec.id);
            outcomes.push(read_checkpoint(&path)?.expect("checkpoint written above"));
        }
    }
    let report = Report::build(
        dataset,
        &outcomes,
        cfg.runs,
        cfg.workflow.snapshot(),
        cfg.workflow.width(),
        deps.judge.name(),
    );
    std::fs::write(
        cfg.out_dir.join("report.json"),
        serde_json::to_vec_pretty(&report).expect("report serializes"),
    )?;
    std::fs::write(cfg.out_dir.join("report.md"), report.to_markdown())?;
    Ok(report)
}

/// Runs the benchmark under (scatter off, stack on), (scatter on, stack off)
/// and (both on), each in its own subdirectory, and writes `ablation.md` and
/// `ablation.json`.
pub async fn run_ablation(
    dataset: &[QuestionRecord],
    deps: &BenchDeps,
    cfg: &BenchConfig,
) -> Result<(AblationGrid, Vec<Report>), EvalError> {
    let mut reports = Vec::new();
    for (scatter, stack) in [(false, true), (true, false), (true, true)] {
        let mut c = cfg.clone();
        c.workflow.scatter = scatter;
        c.workflow.stack = stack;
        c.out_dir = cfg
            .out_dir
            .join(format!("scatter_{}_stack_{}", on_off(scatter), on_off(stack)));
        reports.push(run_benchmark(dataset, deps, &c).await?);
    }
    let grid = AblationGrid::from_reports(&reports);
    std::fs::write(cfg.out_dir.join("ablation.md"), grid.to_markdown())?;
    std::fs::write(
        cfg.out_dir.join("ablation.json"),
        serde_json::to_vec_pretty(&grid).expect("grid serializes"),
    )?;
    Ok((grid, reports))
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}
