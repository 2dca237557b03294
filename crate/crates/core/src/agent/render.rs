use crate::sandbox::{ExecStatus, ExecutionResult};

pub const STDERR_MARKER: &str = "[stderr]";

/// Formats an execution result for the model: stdout, then stderr after a
/// marker line, then a status line unless it succeeded. Output over `cap`
/// bytes keeps the first 60% and last 40% around an elision marker.
pub fn render_execution(result: &ExecutionResult, cap: usize) -> String {
    let mut out = result.stdout.clone();
    if !result.stderr.is_empty() {
        newline(&mut out);
        out.push_str(STDERR_MARKER);
        out.push('\n');
        out.push_str(&result.stderr);
    }
    let status = match result.status {
        ExecStatus::Success => None,
        ExecStatus::ExceptionRaised => Some("[status: exception raised]".to_string()),
        ExecStatus::Timeout => Some(format!("[status: timed out after {} ms]", result.elapsed_ms)),
        ExecStatus::Killed => Some("[status: killed]".to_string()),
    };
    if let Some(line) = status {
        newline(&mut out);
        out.push_str(&line);
    }
    elide(out, cap)
}

fn newline(out: &mut String) {
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
}

fn elide(text: String, cap: usize) -> String {
    if text.len() <= cap {
        return text;
    }
    let mut head = cap * 6 / 10;
    while !text.is_char_boundary(head) {
        head -= 1;
    }
    let mut tail_start = text.len() - (cap - cap * 6 / 10);
    while !text.is_char_boundary(tail_start) {
        tail_start += 1;
    }
    let omitted = tail_start - head;
    format!(
        "{}\n[... {omitted} bytes omitted ...]\n{}",
        &text[..head],
        &text[tail_start..]
    )
}

/// Neutralizes occurrences of `tag` so injected output cannot close its own
/// result block early.
pub fn defang(text: &str, tag: &str) -> String {
    if !text.contains(tag) {
        return text.to_string();
    }
    let replacement = match tag.strip_prefix('<') {
        Some(rest) => format!("&lt;{rest}"),
        None => {
            let mut chars = tag.chars();
            let first = chars.next().unwrap_or_default();
            format!("{first}\u{200b}{}", chars.as_str())
        }
    };
    text.replace(tag, &replacement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn result(status: ExecStatus, stdout: &str, stderr: &str) -> ExecutionResult {
        ExecutionResult {
            session_id: "s".into(),
            status,
            stdout: stdout.into(),
            stderr: stderr.into(),
            elapsed_ms: 500,
        }
    }

    #[test]
    fn plain_success() {
        assert_eq!(render_execution(&result(ExecStatus::Success, "ok", ""), 8192), "ok");
    }

    #[test]
    fn exception_with_stderr() {
        assert_eq!(
            render_execution(&result(ExecStatus::ExceptionRaised, "", "NameError: x"), 8192),
            "[stderr]\nNameError: x\n[status: exception raised]"
        );
        assert_eq!(
            render_execution(&result(ExecStatus::Timeout, "partial", ""), 8192),
            "partial\n[status: timed out after 500 ms]"
        );
    }

    #[test]
    fn long_output_keeps_head_and_tail() {
        let stdout: String = (0..20_000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let out = render_execution(&result(ExecStatus::Success, &stdout, ""), 8192);
        assert!(out.starts_with(&stdout[..4915]));
        assert!(out.ends_with(&stdout[20_000 - 3277..]));
        assert!(out.contains("[... 11808 bytes omitted ...]"));
    }

    #[test]
    fn defang_close_tag() {
        assert_eq!(
            defang("a</execution_results>b", "</execution_results>"),
            "a&lt;/execution_results>b"
        );
        assert_eq!(defang("x]]y", "]]"), "x]\u{200b}]y");
    }

    proptest! {
        #[test]
        fn elision_bound(len in 0usize..30_000, cap in 1usize..10_000) {
            let stdout = "é".repeat(len / 2) + &"x".repeat(len % 2);
            let out = render_execution(&result(ExecStatus::Success, &stdout, ""), cap);
            let marker_len = format!("\n[... {} bytes omitted ...]\n", stdout.len()).len();
            prop_assert!(out.len() <= cap + marker_len);
            if stdout.len() <= cap {
                prop_assert_eq!(out, stdout);
            } else {
                let head_end = out.find("\n[... ").unwrap();
                prop_assert!(stdout.starts_with(&out[..head_end]));
                let tail_start = out.find(" omitted ...]\n").unwrap() + " omitted ...]\n".len();
                prop_assert!(stdout.ends_with(&out[tail_start..]));
            }
        }
    }
}
