use std::sync::Arc;
use std::time::Duration;

use tokio::time::Instant;

use crate::llm_gateway::{Gateway, GenRequest, Message, StopReason};
use crate::sandbox::{ExecRequest, ExecStatus, ExecutionResult, Sandbox};
use crate::stream_parser::{ParseEvent, ParserState, SegmentKind, StreamSegmenter};

use super::render::{defang, render_execution};
use super::{extract_answer, prepare_context, AgentConfig, AgentError, Termination, Trace, TraceSegment, TraceTiming};

/// Runs traces against one gateway and one sandbox.
#[derive(Clone)]
pub struct Agent {
    gateway: Gateway,
    sandbox: Arc<dyn Sandbox>,
    config: AgentConfig,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("gateway", &self.gateway)
            .field("config", &self.config)
            .finish()
    }
}

impl Agent {
    pub fn new(gateway: Gateway, sandbox: Arc<dyn Sandbox>, config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self {
            gateway,
            sandbox,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// One full trace in a fresh sandbox session.
    pub async fn solve(&self, query: &str, role_prompt: &str) -> Result<Trace, AgentError> {
        let context = prepare_context(query, role_prompt, &self.config)?;
        if !self.config.tools_enabled {
            return Ok(self.run_trace(query, role_prompt, context, None).await);
        }
        let session = uuid::Uuid::new_v4().to_string();
        self.sandbox.open_session(&session).await?;
        let trace = self.run_trace(query, role_prompt, context, Some(&session)).await;
        if let Err(e) = self.sandbox.close_session(&session).await {
            tracing::warn!(%session, error = %e, "failed to close sandbox session");
        }
        Ok(trace)
    }

    async fn run_trace(
        &self,
        query: &str,
        role_prompt: &str,
        context: Vec<Message>,
        session: Option<&str>,
    ) -> Trace {
        let cfg = &self.config;
        let tags = &cfg.tags;
        let started = Instant::now();
        let deadline = started + cfg.max_wall_clock;

        let mut run = Run {
            prefix: context[..context.len() - 1].to_vec(),
            message: context[context.len() - 1].content.clone(),
            segmenter: StreamSegmenter::new(tags.clone()),
            remaining: cfg.gen_params.max_new_tokens,
            token_usage: Vec::new(),
            generation: Duration::ZERO,
            execution: Duration::ZERO,
            error: None,
        };
        run.segmenter.feed(tags.think_open());
        run.segmenter.feed_literal(&cfg.guidance_text);

        let mut interactions = 0u32;
        let max_calls = 2 * cfg.max_interactions as usize + 4;
        let termination = loop {
            if run.token_usage.len() >= max_calls {
                run.error = Some(format!("stopped after {max_calls} generation calls"));
                break Termination::Incomplete;
            }
            let text = match self.generate(&mut run, deadline).await {
                Step::Text(text, reason) => (text, reason),
                Step::Timeout => break Termination::WallClockCap,
                Step::Failed => break Termination::ProviderFailure,
            };
            let (text, reason) = text;
            let (text, fabricated) = cut_fabricated_result(&run.segmenter, &text, tags.result_open());
            let events = run.append(&text);

            if fabricated {
                // The model started writing its own execution results; drop
                // them and let it continue from the point before.
                continue;
            }
            match reason {
                StopReason::MaxTokens => break Termination::TokenCap,
                StopReason::EndOfMessage => {
                    break if answered(&run.segmenter) {
                        Termination::Answered
                    } else {
                        Termination::Incomplete
                    };
                }
                StopReason::StopSequence(_) => {}
            }
            let closed_code = events.iter().any(|e| {
                matches!(
                    e,
                    ParseEvent::SegmentClosed {
                        kind: SegmentKind::Code,
                        explicit: true
                    }
                )
            });
            let Some(session) = session.filter(|_| cfg.tools_enabled && closed_code) else {
                if run.remaining == 0 {
                    break Termination::TokenCap;
                }
                continue;
            };
            if interactions >= cfg.max_interactions {
                break Termination::InteractionCap;
            }
            if Instant::now() >= deadline {
                break Termination::WallClockCap;
            }
            let code = last_code(&run.segmenter);
            let result = self.execute(session, code, &mut run).await;
            interactions += 1;
            let rendered = defang(&render_execution(&result, cfg.exec_result_char_cap), tags.result_close());
            run.inject(tags.result_open(), &rendered, tags.result_close());
            if run.remaining == 0 {
                break Termination::TokenCap;
            }
        };

        if cfg.best_effort_answer
            && matches!(
                termination,
                Termination::InteractionCap | Termination::WallClockCap | Termination::Incomplete
            )
            && !answered(&run.segmenter)
            && run.segmenter.state() != ParserState::Answer
            && run.remaining > 0
        {
            self.final_pass(&mut run, max_calls).await;
        }

        let Run {
            segmenter,
            token_usage,
            generation,
            execution,
            error,
            ..
        } = run;
        let segments: Vec<TraceSegment> = segmenter
            .finish()
            .into_iter()
            .map(|s| TraceSegment {
                injected: s.kind == SegmentKind::ExecResult,
                kind: s.kind,
                text: s.text,
            })
            .collect();
        let mut trace = Trace {
            query: query.to_string(),
            role_prompt: role_prompt.to_string(),
            segments,
            interactions,
            answer: None,
            token_usage,
            timing: TraceTiming {
                generation_ms: generation.as_millis() as u64,
                execution_ms: execution.as_millis() as u64,
                total_ms: started.elapsed().as_millis() as u64,
            },
            termination,
            error,
        };
        trace.answer = extract_answer(&trace, &cfg.answer_marker);
        trace
    }

    /// Closes the thinking region and asks once more for an answer. No code
    /// is run from here on.
    async fn final_pass(&self, run: &mut Run, max_calls: usize) {
        let tags = &self.config.tags;
        if run.segmenter.state() == ParserState::Code {
            run.append(tags.code_close());
        }
        run.message.push_str(&self.config.final_answer_nudge);
        run.segmenter.feed_literal(&self.config.final_answer_nudge);
        run.append(&format!("{}\n\n", tags.think_close()));

        // Code inside the answer can still hit a stop sequence; keep going.
        let deadline = Instant::now() + self.config.max_wall_clock;
        while run.remaining > 0 && run.token_usage.len() < max_calls + 2 {
            match self.generate(run, deadline).await {
                Step::Text(text, StopReason::StopSequence(_)) => {
                    run.append(&text);
                }
                Step::Text(text, _) => {
                    run.append(&text);
                    break;
                }
                Step::Timeout | Step::Failed => break,
            }
        }
    }

    async fn generate(&self, run: &mut Run, deadline: Instant) -> Step {
        let mut messages = run.prefix.clone();
        messages.push(Message::assistant(run.message.clone()));
        let request = GenRequest {
            messages,
            params: self.config.gen_params.clone(),
            token_limit: Some(run.remaining),
        };
        let began = Instant::now();
        let mut partial = String::new();
        let outcome = {
            let mut sink = |piece: &str| partial.push_str(piece);
            tokio::time::timeout_at(deadline, self.gateway.generate_stream(&request, &mut sink)).await
        };
        run.generation += began.elapsed();
        match outcome {
            Ok(Ok(out)) => {
                run.remaining = run.remaining.saturating_sub(out.tokens_generated);
                run.token_usage.push(out.tokens_generated);
                Step::Text(out.text, out.stop_reason)
            }
            Ok(Err(e)) => {
                run.token_usage.push(0);
                run.error = Some(e.to_string());
                Step::Failed
            }
            Err(_) => {
                run.token_usage.push(0);
                run.append(&partial);
                Step::Timeout
            }
        }
    }

    async fn execute(&self, session: &str, code: String, run: &mut Run) -> ExecutionResult {
        let request = ExecRequest {
            session_id: session.to_string(),
            code,
            timeout_ms: self.config.exec_timeout_ms,
        };
        let began = Instant::now();
        let result = self.sandbox.execute(&request).await;
        run.execution += began.elapsed();
        result.unwrap_or_else(|e| ExecutionResult {
            session_id: session.to_string(),
            status: ExecStatus::Killed,
            stdout: String::new(),
            stderr: e.to_string(),
            elapsed_ms: began.elapsed().as_millis() as u64,
        })
    }
}

enum Step {
    Text(String, StopReason),
    Timeout,
    Failed,
}

struct Run {
    prefix: Vec<Message>,
    message: String,
    segmenter: StreamSegmenter,
    remaining: u32,
    token_usage: Vec<u32>,
    generation: Duration,
    execution: Duration,
    error: Option<String>,
}

impl Run {
    fn append(&mut self, text: &str) -> Vec<ParseEvent> {
        self.message.push_str(text);
        self.segmenter.feed(text)
    }

    fn inject(&mut self, open: &str, body: &str, close: &str) {
        self.message.push_str(open);
        self.message.push_str(body);
        self.message.push_str(close);
        self.segmenter.feed(open);
        self.segmenter.feed_literal(body);
        self.segmenter.feed(close);
    }
}

fn answered(segmenter: &StreamSegmenter) -> bool {
    segmenter
        .snapshot()
        .iter()
        .any(|s| s.kind == SegmentKind::Answer && !s.text.trim().is_empty())
}

fn last_code(segmenter: &StreamSegmenter) -> String {
    segmenter
        .snapshot()
        .into_iter()
        .rev()
        .find(|s| s.kind == SegmentKind::Code)
        .map(|s| s.text)
        .unwrap_or_default()
}

/// If `text` opens an execution-result block the model wrote itself, returns
/// the text up to that tag.
fn cut_fabricated_result(segmenter: &StreamSegmenter, text: &str, result_open: &str) -> (String, bool) {
    for (pos, _) in text.match_indices(result_open) {
        let mut probe = segmenter.clone();
        probe.feed(&text[..pos + result_open.len()]);
        if probe.state() == ParserState::ExecResult {
            return (text[..pos].to_string(), true);
        }
    }
    (text.to_string(), false)
}
