use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    ThinkOpen,
    ThinkClose,
    CodeOpen,
    CodeClose,
    ResultOpen,
    ResultClose,
}

impl Tag {
    pub const ALL: [Tag; 6] = [
        Tag::ThinkOpen,
        Tag::ThinkClose,
        Tag::CodeOpen,
        Tag::CodeClose,
        Tag::ResultOpen,
        Tag::ResultClose,
    ];
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TagSetError {
    #[error("tag {0:?} is empty")]
    Empty(Tag),
    #[error("tag {a:?} occurs inside tag {b:?}")]
    Overlapping { a: Tag, b: Tag },
}

/// The six delimiter strings. No tag may be empty or occur inside another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTagSet", into = "RawTagSet")]
pub struct TagSet {
    tags: [String; 6],
}

#[derive(Serialize, Deserialize)]
struct RawTagSet {
    think_open: String,
    think_close: String,
    code_open: String,
    code_close: String,
    result_open: String,
    result_close: String,
}

impl TryFrom<RawTagSet> for TagSet {
    type Error = TagSetError;

    fn try_from(r: RawTagSet) -> Result<Self, Self::Error> {
        TagSet::new(
            &r.think_open,
            &r.think_close,
            &r.code_open,
            &r.code_close,
            &r.result_open,
            &r.result_close,
        )
    }
}

impl From<TagSet> for RawTagSet {
    fn from(t: TagSet) -> Self {
        let [think_open, think_close, code_open, code_close, result_open, result_close] = t.tags;
        RawTagSet {
            think_open,
            think_close,
            code_open,
            code_close,
            result_open,
            result_close,
        }
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::new(
            "<think>",
            "</think>",
            "<code>",
            "</code>",
            "<execution_results>",
            "</execution_results>",
        )
        .expect("default tags are valid")
    }
}

impl TagSet {
    pub fn new(
        think_open: &str,
        think_close: &str,
        code_open: &str,
        code_close: &str,
        result_open: &str,
        result_close: &str,
    ) -> Result<Self, TagSetError> {
        let tags = [
            think_open,
            think_close,
            code_open,
            code_close,
            result_open,
            result_close,
        ]
        .map(str::to_string);
        for (i, a) in Tag::ALL.iter().enumerate() {
            if tags[i].is_empty() {
                return Err(TagSetError::Empty(*a));
            }
            for (j, b) in Tag::ALL.iter().enumerate() {
                if i != j && tags[j].contains(tags[i].as_str()) {
                    return Err(TagSetError::Overlapping { a: *a, b: *b });
                }
            }
        }
        Ok(Self { tags })
    }

    pub fn get(&self, tag: Tag) -> &str {
        &self.tags[tag as usize]
    }

    pub fn think_open(&self) -> &str {
        self.get(Tag::ThinkOpen)
    }

    pub fn think_close(&self) -> &str {
        self.get(Tag::ThinkClose)
    }

    pub fn code_open(&self) -> &str {
        self.get(Tag::CodeOpen)
    }

    pub fn code_close(&self) -> &str {
        self.get(Tag::CodeClose)
    }

    pub fn result_open(&self) -> &str {
        self.get(Tag::ResultOpen)
    }

    pub fn result_close(&self) -> &str {
        self.get(Tag::ResultClose)
    }

    pub fn max_len(&self) -> usize {
        self.tags.iter().map(String::len).max().unwrap_or(0)
    }

    /// Earliest complete tag occurrence in `text`.
    pub fn find_earliest(&self, text: &str) -> Option<(usize, Tag)> {
        Tag::ALL
            .iter()
            .filter_map(|&t| text.find(self.get(t)).map(|pos| (pos, t)))
            .min_by_key(|&(pos, _)| pos)
    }

    /// Length of the longest suffix of `text` that is a proper prefix of some
    /// tag. Always below `max_len()`.
    pub fn partial_suffix_len(&self, text: &str) -> usize {
        let limit = self.max_len().saturating_sub(1).min(text.len());
        (1..=limit)
            .rev()
            .find(|&n| {
                let start = text.len() - n;
                text.is_char_boundary(start)
                    && self.tags.iter().any(|t| t.len() > n && t.starts_with(&text[start..]))
            })
            .unwrap_or(0)
    }
}
