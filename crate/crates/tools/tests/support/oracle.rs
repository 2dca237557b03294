//! Brute-force lexical relevance scorer, written independently of the
//! library: character vectors instead of byte offsets, linear scans instead
//! of maps, selection instead of sorting.

pub struct Scored {
    pub text: String,
    pub score: f64,
}

fn tokens(chars: &[char]) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for &c in chars {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn rank(content: &str, query: &str) -> Vec<Scored> {
    let chars: Vec<char> = content.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = usize::min(start + 1000, chars.len());
        spans.push((start, end));
        if end == chars.len() {
            break;
        }
        start += 800;
    }
    let query_chars: Vec<char> = query.chars().collect();
    let mut terms = tokens(&query_chars);
    terms.sort();
    terms.dedup();

    let window_tokens: Vec<Vec<String>> = spans.iter().map(|&(s, e)| tokens(&chars[s..e])).collect();
    let n = spans.len() as f64;
    let mut raw = vec![0.0; spans.len()];
    for term in &terms {
        let df = window_tokens.iter().filter(|w| w.iter().any(|t| t == term)).count();
        if df == 0 {
            continue;
        }
        let idf = (1.0 + n / df as f64).ln();
        for (i, w) in window_tokens.iter().enumerate() {
            let tf = w.iter().filter(|t| *t == term).count();
            raw[i] += tf as f64 * idf;
        }
    }
    for (i, w) in window_tokens.iter().enumerate() {
        raw[i] /= (w.len().max(1) as f64).sqrt();
    }
    let top = raw.iter().cloned().fold(0.0_f64, f64::max);
    let scores: Vec<f64> = raw.iter().map(|r| if top > 0.0 { r / top } else { 0.0 }).collect();

    let mut taken = vec![false; spans.len()];
    let mut out = Vec::new();
    while out.len() < 8 && out.len() < spans.len() {
        let mut best: Option<usize> = None;
        for i in 0..spans.len() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        let (s, e) = spans[b];
        out.push(Scored {
            text: chars[s..e].iter().collect(),
            score: scores[b],
        });
    }
    out
}
