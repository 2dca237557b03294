//! Incremental segmentation of a reasoning model's output stream.
//!
//! The grammar is small: one thinking region opened by `<think>` and closed
//! by `</think>`, inside which the model may emit `<code>...</code>` blocks and
//! the runtime injects `<execution_results>...</execution_results>` blocks.
//! Everything after the first `</think>` is the answer.
//!
//! [`StreamParser`] consumes arbitrary chunks and emits [`ParseEvent`]s as soon
//! as they are fully determined. [`SegmentCollector`] folds those events into
//! [`Segment`]s. Segmentation is lossless: [`reconstruct`] rebuilds the exact
//! input from the segment list.

mod collect;
mod tags;

pub use collect::{reconstruct, Segment, SegmentCollector};
pub use tags::{Tag, TagSet, TagSetError};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Think,
    Code,
    ExecResult,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseEvent {
    SegmentOpened(SegmentKind),
    TextDelta(String),
    /// A special tag that is not valid where it appeared. Its literal text
    /// belongs to the currently open segment.
    MalformedTag(String),
    /// `explicit` is false when the segment was closed by end of stream
    /// rather than by its delimiter.
    SegmentClosed {
        kind: SegmentKind,
        explicit: bool,
    },
    StreamEnded,
}

/// Where the parser currently is in the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParserState {
    /// Nothing seen yet.
    Start,
    Think,
    Code,
    ExecResult,
    Answer,
}

#[derive(Debug, Clone)]
pub struct StreamParser {
    tags: TagSet,
    state: ParserState,
    held: String,
}

impl Default for StreamParser {
    fn default() -> Self {
        Self::new(TagSet::default())
    }
}

impl StreamParser {
    pub fn new(tags: TagSet) -> Self {
        Self {
            tags,
            state: ParserState::Start,
            held: String::new(),
        }
    }

    pub fn state(&self) -> ParserState {
        self.state
    }

    pub fn tags(&self) -> &TagSet {
        &self.tags
    }

    /// Bytes currently withheld because they may be the start of a tag.
    pub fn held(&self) -> &str {
        &self.held
    }

    pub fn feed(&mut self, chunk: &str) -> Vec<ParseEvent> {
        let mut events = Vec::new();
        self.held.push_str(chunk);

        loop {
            match self.tags.find_earliest(&self.held) {
                Some((pos, tag)) => {
                    let tag_len = self.tags.get(tag).len();
                    let rest = self.held.split_off(pos);
                    let before = std::mem::replace(&mut self.held, rest[tag_len..].to_string());
                    self.emit_text(before, &mut events);
                    self.on_tag(tag, &mut events);
                }
                None => {
                    let keep = self.tags.partial_suffix_len(&self.held);
                    let tail = self.held.split_off(self.held.len() - keep);
                    let ready = std::mem::replace(&mut self.held, tail);
                    self.emit_text(ready, &mut events);
                    break;
                }
            }
        }
        events
    }

    /// Appends `text` to the current segment without interpreting any tags in
    /// it. Withheld bytes are flushed first. Tags inside `text` surface as
    /// [`ParseEvent::MalformedTag`] so deltas stay tag-free.
    pub fn feed_literal(&mut self, text: &str) -> Vec<ParseEvent> {
        let mut events = Vec::new();
        let held = std::mem::take(&mut self.held);
        self.emit_text(held, &mut events);
        let mut rest = text;
        while let Some((pos, tag)) = self.tags.find_earliest(rest) {
            self.emit_text(rest[..pos].to_string(), &mut events);
            let lit = self.tags.get(tag).to_string();
            if self.state == ParserState::Start {
                self.state = ParserState::Answer;
                events.push(ParseEvent::SegmentOpened(SegmentKind::Answer));
            }
            rest = &rest[pos + lit.len()..];
            events.push(ParseEvent::MalformedTag(lit));
        }
        self.emit_text(rest.to_string(), &mut events);
        events
    }

    /// Flushes withheld bytes as literal text, closes every open segment and
    /// ends the stream.
    pub fn finalize(mut self) -> Vec<ParseEvent> {
        let mut events = Vec::new();
        let rest = std::mem::take(&mut self.held);
        self.emit_text(rest, &mut events);

        let close = |kind, events: &mut Vec<ParseEvent>| {
            events.push(ParseEvent::SegmentClosed {
                kind,
                explicit: false,
            })
        };
        match self.state {
            ParserState::Start => {}
            ParserState::Think => close(SegmentKind::Think, &mut events),
            ParserState::Code => {
                close(SegmentKind::Code, &mut events);
                close(SegmentKind::Think, &mut events);
            }
            ParserState::ExecResult => {
                close(SegmentKind::ExecResult, &mut events);
                close(SegmentKind::Think, &mut events);
            }
            ParserState::Answer => close(SegmentKind::Answer, &mut events),
        }
        events.push(ParseEvent::StreamEnded);
        events
    }

    fn emit_text(&mut self, text: String, events: &mut Vec<ParseEvent>) {
        if text.is_empty() {
            return;
        }
        if self.state == ParserState::Start {
            self.state = ParserState::Answer;
            events.push(ParseEvent::SegmentOpened(SegmentKind::Answer));
        }
        events.push(ParseEvent::TextDelta(text));
    }

    fn on_tag(&mut self, tag: Tag, events: &mut Vec<ParseEvent>) {
        use ParserState as S;
        let literal = || ParseEvent::MalformedTag(self.tags.get(tag).to_string());
        match (self.state, tag) {
            (S::Start, Tag::ThinkOpen) => {
                self.state = S::Think;
                events.push(ParseEvent::SegmentOpened(SegmentKind::Think));
            }
            (S::Start, _) => {
                let ev = literal();
                self.state = S::Answer;
                events.push(ParseEvent::SegmentOpened(SegmentKind::Answer));
                events.push(ev);
            }
            (S::Think, Tag::CodeOpen) => {
                self.state = S::Code;
                events.push(ParseEvent::SegmentOpened(SegmentKind::Code));
            }
            (S::Think, Tag::ResultOpen) => {
                self.state = S::ExecResult;
                events.push(ParseEvent::SegmentOpened(SegmentKind::ExecResult));
            }
            (S::Think, Tag::ThinkClose) => {
                self.state = S::Answer;
                events.push(ParseEvent::SegmentClosed {
                    kind: SegmentKind::Think,
                    explicit: true,
                });
                events.push(ParseEvent::SegmentOpened(SegmentKind::Answer));
            }
            (S::Code, Tag::CodeClose) => {
                self.state = S::Think;
                events.push(ParseEvent::SegmentClosed {
                    kind: SegmentKind::Code,
                    explicit: true,
                });
            }
            (S::ExecResult, Tag::ResultClose) => {
                self.state = S::Think;
                events.push(ParseEvent::SegmentClosed {
                    kind: SegmentKind::ExecResult,
                    explicit: true,
                });
            }
            _ => events.push(literal()),
        }
    }
}

/// Feeds a parser and a collector together. This is what the agent loop uses
/// to track the growing assistant message.
#[derive(Debug, Clone)]
pub struct StreamSegmenter {
    parser: StreamParser,
    collector: SegmentCollector,
}

impl Default for StreamSegmenter {
    fn default() -> Self {
        Self::new(TagSet::default())
    }
}

impl StreamSegmenter {
    pub fn new(tags: TagSet) -> Self {
        Self {
            collector: SegmentCollector::new(tags.clone()),
            parser: StreamParser::new(tags),
        }
    }

    pub fn feed(&mut self, chunk: &str) -> Vec<ParseEvent> {
        let events = self.parser.feed(chunk);
        for ev in &events {
            self.collector.push(ev);
        }
        events
    }

    pub fn state(&self) -> ParserState {
        self.parser.state()
    }

    pub fn feed_literal(&mut self, text: &str) -> Vec<ParseEvent> {
        let events = self.parser.feed_literal(text);
        for ev in &events {
            self.collector.push(ev);
        }
        events
    }

    /// Raw bytes consumed so far, including withheld ones.
    pub fn consumed(&self) -> usize {
        self.collector.offset() + self.parser.held().len()
    }


    /// Segments completed so far plus the one currently open.
    pub fn snapshot(&self) -> Vec<Segment> {
        self.collector.snapshot()
    }

    pub fn finish(self) -> Vec<Segment> {
        let Self {
            parser,
            mut collector,
        } = self;
        for ev in parser.finalize() {
            collector.push(&ev);
        }
        collector.into_segments()
    }
}

/// Batch form: identical to feeding `full_text` in any chunking and
/// collecting the events.
pub fn segment(full_text: &str) -> Vec<Segment> {
    segment_with(full_text, &TagSet::default())
}

pub fn segment_with(full_text: &str, tags: &TagSet) -> Vec<Segment> {
    let mut s = StreamSegmenter::new(tags.clone());
    s.feed(full_text);
    s.finish()
}
