use std::sync::{Arc, OnceLock};

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_gateway::{Gateway, GenParams, GenRequest, Message};
use crate::registry::Registry;
use crate::template::fill;

use super::{AnswerType, QuestionRecord};

/// Equivalence prompt in a widely used public judging format. Placeholders:
/// `{question}`, `{response}`, `{correct_answer}`.
pub const DEFAULT_JUDGE_PROMPT: &str = include_str!("../../config/judge_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JudgeMode {
    ModelJudge,
    ExactMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub question_id: String,
    pub correct: bool,
    pub judge_rationale: String,
    pub judge_mode: JudgeMode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
}

#[async_trait]
pub trait Judge: Send + Sync {
    fn name(&self) -> &str;

    async fn judge(&self, record: &QuestionRecord, prediction: &str) -> Result<Verdict, JudgeError>;
}

/// Case-folds, collapses whitespace and strips trailing punctuation.
pub fn normalize(s: &str) -> String {
    let folded = s.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() && !matches!(c, ')' | ']' | '}' | '%'))
        .trim_end()
        .to_string()
}

/// Option letter of a multiple-choice reply such as `B`, `(b)`, `B.` or
/// `B) text`.
fn choice_letter(s: &str) -> Option<char> {
    let t = s.trim().trim_start_matches('(');
    let mut chars = t.chars();
    let c = chars.next()?;
    let next = chars.next();
    (c.is_ascii_alphabetic() && matches!(next, None | Some(')' | '.' | ':' | ' ')))
        .then(|| c.to_ascii_uppercase())
}

fn exact_match(record: &QuestionRecord, prediction: &str) -> bool {
    if record.answer_type == AnswerType::MultipleChoice {
        if let (Some(a), Some(b)) = (choice_letter(&record.gold_answer), choice_letter(prediction)) {
            return a == b;
        }
    }
    normalize(&record.gold_answer) == normalize(prediction)
}

fn empty_verdict(record: &QuestionRecord, mode: JudgeMode) -> Verdict {
    Verdict {
        question_id: record.id.clone(),
        correct: false,
        judge_rationale: "empty prediction".into(),
        judge_mode: mode,
    }
}

#[derive(Debug, Default)]
pub struct ExactMatchJudge;

#[async_trait]
impl Judge for ExactMatchJudge {
    fn name(&self) -> &str {
        "exact"
    }

    async fn judge(&self, record: &QuestionRecord, prediction: &str) -> Result<Verdict, JudgeError> {
        if prediction.trim().is_empty() {
            return Ok(empty_verdict(record, JudgeMode::ExactMatch));
        }
        let correct = exact_match(record, prediction);
        Ok(Verdict {
            question_id: record.id.clone(),
            correct,
            judge_rationale: if correct {
                "normalized strings are equal".into()
            } else {
                "normalized strings differ".into()
            },
            judge_mode: JudgeMode::ExactMatch,
        })
    }
}

/// Asks a model whether the prediction matches the gold answer.
pub struct ModelJudge {
    gateway: Gateway,
    params: GenParams,
    prompt: String,
}

impl ModelJudge {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            params: GenParams {
                temperature: 0.0,
                max_new_tokens: 4096,
                ..GenParams::default()
            },
            prompt: DEFAULT_JUDGE_PROMPT.to_string(),
        }
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt = prompt.into();
        self
    }

    pub fn render_prompt(&self, record: &QuestionRecord, prediction: &str) -> String {
        fill(
            &self.prompt,
            &[
                ("question", record.question.as_str()),
                ("response", prediction),
                ("correct_answer", record.gold_answer.as_str()),
            ],
        )
    }
}

/// `(correct, reasoning)` from a judge reply.
pub fn parse_judgement(reply: &str) -> Option<(bool, String)> {
    static CORRECT: OnceLock<Regex> = OnceLock::new();
    static REASONING: OnceLock<Regex> = OnceLock::new();
    let correct = CORRECT.get_or_init(|| Regex::new(r"(?im)^\W*correct\W*:\W*(yes|no)\b").unwrap());
    let reasoning = REASONING.get_or_init(|| Regex::new(r"(?is)reasoning\W*:\s*(.*?)\n\W*correct\W*:").unwrap());
    let verdict = correct.captures_iter(reply).last()?[1].eq_ignore_ascii_case("yes");
    let rationale = reasoning
        .captures(reply)
        .map(|c| c[1].trim().to_string())
        .filter(|r| !r.is_empty())
        .unwrap_or_else(|| reply.trim().to_string());
    Some((verdict, rationale))
}

#[async_trait]
impl Judge for ModelJudge {
    fn name(&self) -> &str {
        "model"
    }

    async fn judge(&self, record: &QuestionRecord, prediction: &str) -> Result<Verdict, JudgeError> {
        if prediction.trim().is_empty() {
            return Ok(empty_verdict(record, JudgeMode::ModelJudge));
        }
        let request = GenRequest::new(
            vec![Message::user(self.render_prompt(record, prediction))],
            self.params.clone(),
        );
        for _ in 0..2 {
            let out = self
                .gateway
                .generate(&request)
                .await
                .map_err(|e| JudgeError::JudgeUnavailable(e.to_string()))?;
            if let Some((correct, rationale)) = parse_judgement(&out.text) {
                return Ok(Verdict {
                    question_id: record.id.clone(),
                    correct,
                    judge_rationale: rationale,
                    judge_mode: JudgeMode::ModelJudge,
                });
            }
            tracing::warn!(question = %record.id, "unparseable judge reply");
        }
        let mut v = ExactMatchJudge.judge(record, prediction).await?;
        v.judge_rationale = format!("judge reply unparseable twice; {}", v.judge_rationale);
        Ok(v)
    }
}

#[derive(Clone, Default)]
pub struct JudgeConfig {
    pub kind: String,
    /// Required by the model judge.
    pub gateway: Option<Gateway>,
    pub prompt: Option<String>,
}

pub type JudgeRegistry = Registry<dyn Judge, JudgeConfig>;

pub fn default_judges() -> JudgeRegistry {
    let mut reg = JudgeRegistry::new("judge");
    reg.register("exact", |_: &JudgeConfig| Ok(Arc::new(ExactMatchJudge) as Arc<dyn Judge>));
    reg.register("model", |cfg: &JudgeConfig| {
        let gateway = cfg.gateway.clone().ok_or("the model judge needs a gateway")?;
        let mut judge = ModelJudge::new(gateway);
        if let Some(p) = &cfg.prompt {
            judge = judge.with_prompt(p.clone());
        }
        Ok(Arc::new(judge) as Arc<dyn Judge>)
    });
    reg
}
