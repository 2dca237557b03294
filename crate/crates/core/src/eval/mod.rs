//! Benchmark harness: datasets, judges, multi-run scoring and reports.

mod bench;
mod judge;
mod report;

pub use bench::{run_ablation, run_benchmark, BenchConfig, BenchDeps, QuestionOutcome, Scored};
pub use judge::{
    default_judges, normalize, ExactMatchJudge, Judge, JudgeConfig, JudgeError, JudgeMode, JudgeRegistry, ModelJudge,
    parse_judgement, Verdict, DEFAULT_JUDGE_PROMPT,
};
pub use report::{AblationGrid, AblationRow, CategoryStats, Report, RewriteHistogram, StageTable, STAGE_KEYS};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AnswerType {
    #[default]
    ExactMatch,
    MultipleChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    #[serde(default = "default_category")]
    pub category: String,
    #[serde(default)]
    pub answer_type: AnswerType,
}

fn default_category() -> String {
    "uncategorized".to_string()
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Reads a JSONL dataset, one record per non-blank line.
pub fn load_dataset(path: &Path) -> Result<Vec<QuestionRecord>, EvalError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn parse_dataset(text: &str) -> Result<Vec<QuestionRecord>, EvalError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: QuestionRecord = serde_json::from_str(raw).map_err(|e| EvalError::SchemaError {
            line,
            message: e.to_string(),
        })?;
        for (field, value) in [("id", &rec.id), ("question", &rec.question), ("gold_answer", &rec.gold_answer)] {
            if value.trim().is_empty() {
                return Err(EvalError::SchemaError {
                    line,
                    message: format!("field `{field}` is empty"),
                });
            }
        }
        if !seen.insert(rec.id.clone()) {
            return Err(EvalError::DuplicateId { line, id: rec.id });
        }
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_valid_lines() {
        let text = r#"{"id":"a","question":"q1","gold_answer":"1","category":"Math"}
{"id":"b","question":"q2","gold_answer":"B","category":"Bio","answer_type":"MultipleChoice"}

{"id":"c","question":"q3","gold_answer":"3"}
"#;
        let recs = parse_dataset(text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].answer_type, AnswerType::MultipleChoice);
        assert_eq!(recs[2].category, "uncategorized");
    }

    #[test]
    fn missing_field_names_line() {
        let text = "{\"id\":\"a\",\"question\":\"q\",\"gold_answer\":\"1\"}\n{\"id\":\"b\",\"question\":\"q\"}\n";
        match parse_dataset(text) {
            Err(EvalError::SchemaError { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("gold_answer"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_dataset("{\"id\":\"a\",\"question\":\" \",\"gold_answer\":\"1\"}"),
            Err(EvalError::SchemaError { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids() {
        let text = "{\"id\":\"a\",\"question\":\"q\",\"gold_answer\":\"1\"}\n{\"id\":\"a\",\"question\":\"q\",\"gold_answer\":\"2\"}";
        assert!(matches!(parse_dataset(text), Err(EvalError::DuplicateId { line: 2, .. })));
    }
}
