use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::workflow::{ConfigSnapshot, Role};

use super::bench::{QuestionOutcome, Scored};
use super::QuestionRecord;

/// Keys of [`Report::per_stage`], in pipeline order.
pub const STAGE_KEYS: [&str; 4] = ["Solver-avg", "Critic-avg", "Rewriter-avg", "Selected"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub questions: usize,
    pub accuracy: f64,
}

/// How many of the n critic outputs (before) and n rewriter outputs (after)
/// were correct, counted per question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteHistogram {
    pub run: usize,
    pub before: Vec<usize>,
    pub after: Vec<usize>,
}

impl RewriteHistogram {
    pub fn bins(&self) -> usize {
        self.before.len()
    }
}

/// Percentages are in [0, 100]. Multi-run figures are means over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: usize,
    pub questions: usize,
    pub judge: String,
    pub config: ConfigSnapshot,
    pub overall_accuracy: f64,
    pub per_run_accuracy: Vec<f64>,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub per_stage: BTreeMap<String, f64>,
    pub baseline_accuracy: Option<f64>,
    /// (question, run) pairs left out because the judge was unavailable.
    pub unscored: usize,
    /// (question, run) pairs whose workflow failed; scored as incorrect.
    pub failed: usize,
    pub selection_fallbacks: usize,
    pub mean_solver_interactions: f64,
    pub histograms: Vec<RewriteHistogram>,
}

#[derive(Default)]
struct Tally {
    score: f64,
    count: usize,
}

impl Tally {
    fn add(&mut self, score: f64) {
        self.score += score;
        self.count += 1;
    }

    fn percent(&self) -> Option<f64> {
        (self.count > 0).then(|| 100.0 * self.score / self.count as f64)
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.score / self.count as f64
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Report {
    /// Builds the report from per-(question, run) outcomes.
    pub fn build(
        dataset: &[QuestionRecord],
        outcomes: &[QuestionOutcome],
        runs: usize,
        config: ConfigSnapshot,
        width: usize,
        judge: &str,
    ) -> Report {
        let mut per_run = Vec::new();
        let mut categories: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut stages: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut baseline = Vec::new();
        let mut histograms = Vec::new();
        let mut interactions = Tally::default();
        let (mut unscored, mut failed, mut fallbacks) = (0, 0, 0);

        for run in 1..=runs {
            let mine: Vec<&QuestionOutcome> = outcomes.iter().filter(|o| o.run == run).collect();
            let mut overall = Tally::default();
            let mut cats: BTreeMap<&str, Tally> = BTreeMap::new();
            let mut stage_tally: BTreeMap<&'static str, Tally> = BTreeMap::new();
            let mut base = Tally::default();
            let mut before = vec![0; width + 1];
            let mut after = vec![0; width + 1];

            for o in &mine {
                failed += usize::from(o.error.is_some());
                fallbacks += usize::from(o.selection_fallback);
                for &n in &o.solver_interactions {
                    interactions.add(f64::from(n));
                }
                match o.final_score {
                    Some(s) => {
                        overall.add(s);
                        cats.entry(o.category.as_str()).or_default().add(s);
                    }
                    None => unscored += 1,
                }
                for (role, key) in [(Role::Solver, STAGE_KEYS[0]), (Role::Critic, STAGE_KEYS[1]), (Role::Rewriter, STAGE_KEYS[2])] {
                    if let Some(list) = o.stages.get(&role) {
                        let t = stage_tally.entry(key).or_default();
                        for s in list.iter().filter_map(|s| s.correct) {
                            t.add(bit(s));
                        }
                    }
                }
                if config.stack {
                    if let Some(s) = o.final_score {
                        stage_tally.entry(STAGE_KEYS[3]).or_default().add(s);
                    }
                    let correct = |role| {
                        o.stages
                            .get(&role)
                            .map(|l: &Vec<Scored>| l.iter().filter(|s| s.correct == Some(true)).count())
                            .unwrap_or(0)
                            .min(width)
                    };
                    before[correct(Role::Critic)] += 1;
                    after[correct(Role::Rewriter)] += 1;
                }
                if let Some(c) = o.baseline.as_ref().and_then(|b| b.correct) {
                    base.add(bit(c));
                }
            }

            per_run.push(overall.percent().unwrap_or(0.0));
            for (cat, t) in cats {
                if let Some(p) = t.percent() {
                    categories.entry(cat.to_string()).or_default().push(p);
                }
            }
            for (key, t) in stage_tally {
                if let Some(p) = t.percent() {
                    stages.entry(key).or_default().push(p);
                }
            }
            if let Some(p) = base.percent() {
                baseline.push(p);
            }
            if config.stack {
                histograms.push(RewriteHistogram { run, before, after });
            }
        }

        let mut per_category = BTreeMap::new();
        for q in dataset {
            per_category
                .entry(q.category.clone())
                .or_insert(CategoryStats {
                    questions: 0,
                    accuracy: 0.0,
                })
                .questions += 1;
        }
        for (cat, values) in categories {
            if let Some(c) = per_category.get_mut(&cat) {
                c.accuracy = mean(&values);
            }
        }

        Report {
            runs,
            questions: dataset.len(),
            judge: judge.to_string(),
            config,
            overall_accuracy: mean(&per_run),
            per_run_accuracy: per_run,
            per_category,
            per_stage: stages.into_iter().map(|(k, v)| (k.to_string(), mean(&v))).collect(),
            baseline_accuracy: (!baseline.is_empty()).then(|| mean(&baseline)),
            unscored,
            failed,
            selection_fallbacks: fallbacks,
            mean_solver_interactions: interactions.mean(),
            histograms,
        }
    }

    pub fn stage_table(&self) -> StageTable {
        let get = |k: &str| self.per_stage.get(k).copied();
        StageTable {
            rows: vec![
                ("baseline".into(), self.baseline_accuracy),
                ("+Solver".into(), get(STAGE_KEYS[0])),
                ("+Critic".into(), get(STAGE_KEYS[1])),
                ("+Rewriter".into(), get(STAGE_KEYS[2])),
                ("+Selector".into(), get(STAGE_KEYS[3])),
            ],
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let c = &self.config;
        let _ = writeln!(md, "# Benchmark report\n");
        let _ = writeln!(
            md,
            "{} questions, {} run(s), judge `{}`, n = {}, scatter {}, stack {}.\n",
            self.questions,
            self.runs,
            self.judge,
            c.n_parallel,
            mark(c.scatter),
            mark(c.stack)
        );
        let _ = writeln!(md, "Overall accuracy: **{}**\n", pct(self.overall_accuracy));
        let runs: Vec<String> = self.per_run_accuracy.iter().map(|&a| pct(a)).collect();
        let _ = writeln!(md, "Per run: {}\n", runs.join(", "));
        let _ = writeln!(
            md,
            "Unscored: {}. Failed: {}. Selection fallbacks: {}. Mean solver tool calls: {:.2}.\n",
            self.unscored, self.failed, self.selection_fallbacks, self.mean_solver_interactions
        );
        let _ = writeln!(md, "## Stages\n");
        md.push_str(&self.stage_table().to_markdown());
        let _ = writeln!(md, "\n## Categories\n");
        let _ = writeln!(md, "| Category | Questions | Accuracy |");
        let _ = writeln!(md, "|---|---:|---:|");
        for (cat, s) in &self.per_category {
            let _ = writeln!(md, "| {cat} | {} | {} |", s.questions, pct(s.accuracy));
        }
        for h in &self.histograms {
            let _ = writeln!(md, "\n## Correct answers per question, run {}\n", h.run);
            let _ = writeln!(md, "| Correct | Before rewriting | After rewriting |");
            let _ = writeln!(md, "|---:|---:|---:|");
            for k in 0..h.bins() {
                let _ = writeln!(md, "| {k} | {} | {} |", h.before[k], h.after[k]);
            }
        }
        md
    }
}

fn pct(v: f64) -> String {
    format!("{v:.1}%")
}

fn mark(b: bool) -> &'static str {
    if b {
        "✓"
    } else {
        "✗"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTable {
    pub rows: Vec<(String, Option<f64>)>,
}

impl StageTable {
    pub fn to_markdown(&self) -> String {
        let mut md = String::from("| Stage | Accuracy |\n|---|---:|\n");
        for (name, v) in &self.rows {
            let _ = writeln!(md, "| {name} | {} |", v.map(pct).unwrap_or_else(|| "n/a".into()));
        }
        md
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub scatter: bool,
    pub stack: bool,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub rows: Vec<AblationRow>,
}

impl AblationGrid {
    pub fn from_reports(reports: &[Report]) -> Self {
        Self {
            rows: reports
                .iter()
                .map(|r| AblationRow {
                    scatter: r.config.scatter,
                    stack: r.config.stack,
                    accuracy: r.overall_accuracy,
                })
                .collect(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::from("| Scatter | Stack | Accuracy |\n|:---:|:---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(md, "| {} | {} | {} |", mark(r.scatter), mark(r.stack), pct(r.accuracy));
        }
        md
    }
}
