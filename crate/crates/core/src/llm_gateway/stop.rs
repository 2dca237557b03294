/// Chunking-invariant stop-sequence detection over decoded text.
///
/// Text that might be the beginning of a stop sequence is withheld until it
/// is disambiguated, so the emitted chunks never contain text past a match.
#[derive(Debug, Clone)]
pub struct StopScanner {
    stops: Vec<String>,
    include: bool,
    held: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scan {
    /// Text that is safe to emit (possibly empty).
    Emit(String),
    /// A stop sequence matched. `emit` is the final text to emit, ending at or
    /// before the sequence according to the inclusion flag.
    Stopped { emit: String, matched: String },
}

impl StopScanner {
    pub fn new(stops: &[String], include: bool) -> Self {
        Self {
            stops: stops.iter().filter(|s| !s.is_empty()).cloned().collect(),
            include,
            held: String::new(),
        }
    }

    pub fn push(&mut self, chunk: &str) -> Scan {
        self.held.push_str(chunk);
        let earliest = self
            .stops
            .iter()
            .filter_map(|s| self.held.find(s.as_str()).map(|p| (p, s)))
            .min_by_key(|(p, s)| (*p, std::cmp::Reverse(s.len())));
        if let Some((pos, stop)) = earliest {
            let end = if self.include { pos + stop.len() } else { pos };
            let matched = stop.clone();
            let emit = self.held[..end].to_string();
            self.held.clear();
            return Scan::Stopped { emit, matched };
        }
        let keep = self.partial_suffix_len();
        let tail = self.held.split_off(self.held.len() - keep);
        Scan::Emit(std::mem::replace(&mut self.held, tail))
    }

    /// Releases withheld text at end of stream.
    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.held)
    }

    fn partial_suffix_len(&self) -> usize {
        let text = &self.held;
        let longest = self.stops.iter().map(String::len).max().unwrap_or(0);
        let limit = longest.saturating_sub(1).min(text.len());
        (1..=limit)
            .rev()
            .find(|&n| {
                let start = text.len() - n;
                text.is_char_boundary(start)
                    && self
                        .stops
                        .iter()
                        .any(|s| s.len() > n && s.starts_with(&text[start..]))
            })
            .unwrap_or(0)
    }
}
