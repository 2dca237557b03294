use serde::{Deserialize, Serialize};

use super::{ParseEvent, SegmentKind, TagSet};

/// One span of model output. `text` excludes delimiters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    /// Offsets of `text` in the raw stream.
    pub byte_span: (usize, usize),
    /// Whether the segment ended at a delimiter rather than at end of stream.
    /// Answer segments are never terminated.
    pub terminated: bool,
}

#[derive(Debug, Clone)]
struct OpenPiece {
    kind: SegmentKind,
    start: usize,
    text: String,
}

/// Folds [`ParseEvent`]s into [`Segment`]s.
///
/// Think text is split around nested code and result blocks; empty think
/// pieces are dropped unless the whole thinking region would otherwise leave
/// no segment at all.
#[derive(Debug, Clone)]
pub struct SegmentCollector {
    tags: TagSet,
    offset: usize,
    segments: Vec<Segment>,
    current: Option<OpenPiece>,
    nested_in_region: usize,
}

impl SegmentCollector {
    pub fn new(tags: TagSet) -> Self {
        Self {
            tags,
            offset: 0,
            segments: Vec::new(),
            current: None,
            nested_in_region: 0,
        }
    }

    /// Bytes of raw stream accounted for so far.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn push(&mut self, event: &ParseEvent) {
        match event {
            ParseEvent::SegmentOpened(kind) => {
                match kind {
                    SegmentKind::Think => {
                        self.offset += self.tags.think_open().len();
                        self.nested_in_region = 0;
                    }
                    SegmentKind::Code | SegmentKind::ExecResult => {
                        self.flush_think(true, false);
                        self.offset += if *kind == SegmentKind::Code {
                            self.tags.code_open().len()
                        } else {
                            self.tags.result_open().len()
                        };
                    }
                    SegmentKind::Answer => {}
                }
                self.open(*kind);
            }
            ParseEvent::TextDelta(t) | ParseEvent::MalformedTag(t) => {
                if let Some(piece) = self.current.as_mut() {
                    piece.text.push_str(t);
                }
                self.offset += t.len();
            }
            ParseEvent::SegmentClosed { kind, explicit } => match kind {
                SegmentKind::Code | SegmentKind::ExecResult => {
                    self.close_current(*explicit);
                    if *explicit {
                        self.offset += if *kind == SegmentKind::Code {
                            self.tags.code_close().len()
                        } else {
                            self.tags.result_close().len()
                        };
                    }
                    self.nested_in_region += 1;
                    self.open(SegmentKind::Think);
                }
                SegmentKind::Think => {
                    self.flush_think(*explicit, true);
                    self.current = None;
                    if *explicit {
                        self.offset += self.tags.think_close().len();
                    }
                }
                SegmentKind::Answer => self.close_current(false),
            },
            ParseEvent::StreamEnded => {}
        }
    }

    fn open(&mut self, kind: SegmentKind) {
        self.current = Some(OpenPiece {
            kind,
            start: self.offset,
            text: String::new(),
        });
    }

    fn close_current(&mut self, terminated: bool) {
        if let Some(p) = self.current.take() {
            self.segments.push(finish(p, terminated));
        }
    }

    fn flush_think(&mut self, terminated: bool, closing_region: bool) {
        match self.current.take() {
            Some(p) if p.kind == SegmentKind::Think => {
                if !p.text.is_empty() || closing_region && self.nested_in_region == 0 {
                    self.segments.push(finish(p, terminated));
                }
            }
            other => self.current = other,
        }
    }

    /// Completed segments plus the currently open one (if it has content).
    pub fn snapshot(&self) -> Vec<Segment> {
        let mut out = self.segments.clone();
        if let Some(p) = &self.current {
            if !p.text.is_empty() || p.kind != SegmentKind::Think {
                out.push(finish(p.clone(), false));
            }
        }
        out
    }

    pub fn into_segments(self) -> Vec<Segment> {
        self.segments
    }
}

fn finish(p: OpenPiece, terminated: bool) -> Segment {
    let end = p.start + p.text.len();
    Segment {
        kind: p.kind,
        text: p.text,
        byte_span: (p.start, end),
        terminated: terminated && p.kind != SegmentKind::Answer,
    }
}

/// Rebuilds the raw stream from its segments.
pub fn reconstruct(segments: &[Segment], tags: &TagSet) -> String {
    let mut out = String::new();
    let mut in_region = false;
    for seg in segments {
        if seg.kind != SegmentKind::Answer && !in_region {
            out.push_str(tags.think_open());
            in_region = true;
        }
        match seg.kind {
            SegmentKind::Think => out.push_str(&seg.text),
            SegmentKind::Code => {
                out.push_str(tags.code_open());
                out.push_str(&seg.text);
                if seg.terminated {
                    out.push_str(tags.code_close());
                }
            }
            SegmentKind::ExecResult => {
                out.push_str(tags.result_open());
                out.push_str(&seg.text);
                if seg.terminated {
                    out.push_str(tags.result_close());
                }
            }
            SegmentKind::Answer => {
                if in_region {
                    out.push_str(tags.think_close());
                }
                out.push_str(&seg.text);
            }
        }
    }
    out
}
