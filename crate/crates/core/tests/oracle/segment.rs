//! Whole-string reference segmenter. Scans the complete text in one pass and
//! builds segments directly, without the event stream.
#![allow(dead_code)]

use xmaster_core::stream_parser::{Segment, SegmentKind, TagSet};

fn seg(kind: SegmentKind, text: &str, start: usize, terminated: bool) -> Segment {
    Segment {
        kind,
        text: text.to_string(),
        byte_span: (start, start + text.len()),
        terminated: terminated && kind != SegmentKind::Answer,
    }
}

/// The earliest tag at or after `from`, as (position, tag literal).
fn next_tag<'a>(text: &str, from: usize, tags: &'a [&'a str; 6]) -> Option<(usize, &'a str)> {
    tags.iter()
        .filter_map(|t| text[from..].find(t).map(|p| (from + p, *t)))
        .min_by_key(|(p, _)| *p)
}

pub fn reference_segments(text: &str, tags: &TagSet) -> Vec<Segment> {
    let all = [
        tags.think_open(),
        tags.think_close(),
        tags.code_open(),
        tags.code_close(),
        tags.result_open(),
        tags.result_close(),
    ];
    let mut out = Vec::new();
    if text.is_empty() {
        return out;
    }
    if !text.starts_with(tags.think_open()) {
        out.push(seg(SegmentKind::Answer, text, 0, false));
        return out;
    }

    let mut pos = tags.think_open().len();
    let mut think_start = pos;
    let mut nested = 0;
    loop {
        let Some((at, tag)) = next_tag(text, pos, &all) else {
            // End of stream inside thinking.
            let rest = &text[think_start..];
            if !rest.is_empty() || nested == 0 {
                out.push(seg(SegmentKind::Think, rest, think_start, false));
            }
            return out;
        };
        let (kind, close) = if tag == tags.code_open() {
            (SegmentKind::Code, tags.code_close())
        } else if tag == tags.result_open() {
            (SegmentKind::ExecResult, tags.result_close())
        } else if tag == tags.think_close() {
            let think = &text[think_start..at];
            if !think.is_empty() || nested == 0 {
                out.push(seg(SegmentKind::Think, think, think_start, true));
            }
            let answer_start = at + tag.len();
            out.push(seg(SegmentKind::Answer, &text[answer_start..], answer_start, false));
            return out;
        } else {
            // Any other tag is literal thinking text.
            pos = at + tag.len();
            continue;
        };
        let think = &text[think_start..at];
        if !think.is_empty() {
            out.push(seg(SegmentKind::Think, think, think_start, true));
        }
        let body_start = at + tag.len();
        match text[body_start..].find(close) {
            Some(p) => {
                out.push(seg(kind, &text[body_start..body_start + p], body_start, true));
                nested += 1;
                pos = body_start + p + close.len();
                think_start = pos;
            }
            None => {
                out.push(seg(kind, &text[body_start..], body_start, false));
                return out;
            }
        }
    }
}
