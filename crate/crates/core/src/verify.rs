//! Answer extraction, normalization, and correctness checking.

use std::io::Write;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

/// Returns the content of the last `\boxed{...}` expression with balanced
/// braces, or `None` when the solution has no well-formed boxed answer.
pub fn extract_boxed(solution: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let mut candidates: Vec<usize> = Vec::new();
    let mut from = 0;
    while let Some(pos) = solution[from..].find(MARKER) {
        candidates.push(from + pos);
        from += pos + MARKER.len();
    }
    for &start in candidates.iter().rev() {
        let body_start = start + MARKER.len();
        let mut depth = 1usize;
        for (i, c) in solution[body_start..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(solution[body_start..body_start + i].to_string());
                    }
                }
                _ => {}
            }
        }
        // Unbalanced: fall back to the previous occurrence.
    }
    None
}

/// Every balanced `\boxed{...}` content in order of appearance.
pub fn extract_boxed_all(text: &str) -> Vec<String> {
    const MARKER: &str = "\\boxed{";
    let mut found = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(MARKER) {
        let body_start = from + pos + MARKER.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, c) in text[body_start..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(body_start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                found.push(text[body_start..e].to_string());
                from = e + 1;
            }
            None => break,
        }
    }
    found
}

/// Canonicalizes an answer string: trims whitespace, strips surrounding
/// math-mode markers and thousands separators, and normalizes integer
/// forms (leading zeros, unary plus). Non-integer content is otherwise
/// kept verbatim. Idempotent.
pub fn normalize_answer(s: &str) -> String {
    let mut t = s.trim();
    loop {
        let before = t;
        for (open, close) in [("$$", "$$"), ("$", "$"), ("\\(", "\\)"), ("\\[", "\\]")] {
            if t.len() >= open.len() + close.len() && t.starts_with(open) && t.ends_with(close) {
                t = t[open.len()..t.len() - close.len()].trim();
            }
        }
        if t == before {
            break;
        }
    }

    // Drop commas sitting directly between digits (thousands separators).
    let chars: Vec<char> = t.chars().collect();
    let mut out = String::with_capacity(t.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ','
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit()
        {
            continue;
        }
        out.push(c);
    }

    if let Some(canon) = canonical_integer(&out) {
        return canon;
    }
    out
}

/// Canonical form for integer-shaped strings: no unary plus, no leading
/// zeros, "-0" collapsed to "0".
fn canonical_integer(s: &str) -> Option<String> {
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", s.strip_prefix('+').unwrap_or(s)),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let trimmed = digits.trim_start_matches('0');
    let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
    let sign = if trimmed == "0" { "" } else { sign };
    Some(format!("{sign}{trimmed}"))
}

/// True iff the candidate answer matches the gold answer: equal after
/// normalization, or both parse as numbers and are numerically equal. A
/// missing answer is wrong.
pub fn check(answer: Option<&str>, gold: &str) -> bool {
    let Some(answer) = answer else {
        return false;
    };
    let a = normalize_answer(answer);
    let g = normalize_answer(gold);
    if a == g {
        return true;
    }
    match (a.parse::<f64>(), g.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// External verifier boundary: a command that reads the candidate and gold
/// answers as two stdin lines and prints "1" (equivalent) or "0".
#[derive(Debug, Clone)]
pub struct PluginVerifier {
    command: Vec<String>,
}

impl PluginVerifier {
    pub fn new(command: Vec<String>) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Verifier("empty plugin command".into()));
        }
        Ok(PluginVerifier { command })
    }

    pub fn check(&self, answer: &str, gold: &str) -> Result<bool> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Verifier(format!("spawn {}: {e}", self.command[0])))?;
        child
            .stdin
            .as_mut()
            .expect("piped stdin")
            .write_all(format!("{answer}\n{gold}\n").as_bytes())
            .map_err(|e| Error::Verifier(format!("write stdin: {e}")))?;
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Verifier(format!("wait: {e}")))?;
        let text = String::from_utf8_lossy(&output.stdout);
        match text.trim() {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(Error::Verifier(format!(
                "plugin emitted {other:?}, expected \"1\" or \"0\""
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extracts_simple_box() {
        assert_eq!(extract_boxed("thus \\boxed{42}"), Some("42".into()));
        assert_eq!(extract_boxed("no box"), None);
        assert_eq!(extract_boxed(""), None);
    }

    #[test]
    fn extracts_last_box() {
        assert_eq!(
            extract_boxed("\\boxed{1} then \\boxed{2}"),
            Some("2".into())
        );
    }

    #[test]
    fn balances_nested_braces() {
        assert_eq!(
            extract_boxed("so $\\boxed{\\frac{1}{2}}$"),
            Some("\\frac{1}{2}".into())
        );
    }

    #[test]
    fn extract_all_in_order() {
        assert_eq!(
            extract_boxed_all("\\boxed{1} mid \\boxed{\\frac{2}{3}} end \\boxed{4"),
            vec!["1".to_string(), "\\frac{2}{3}".to_string()]
        );
        assert!(extract_boxed_all("nothing").is_empty());
    }

    #[test]
    fn unbalanced_last_falls_back_to_earlier() {
        assert_eq!(
            extract_boxed("\\boxed{7} and \\boxed{broken"),
            Some("7".into())
        );
        assert_eq!(extract_boxed("\\boxed{broken"), None);
    }

    #[test]
    fn normalizes_integers() {
        assert_eq!(normalize_answer(" 042 "), "42");
        assert_eq!(normalize_answer("1,000"), "1000");
        assert_eq!(normalize_answer("+7"), "7");
        assert_eq!(normalize_answer("-007"), "-7");
        assert_eq!(normalize_answer("000"), "0");
        assert_eq!(normalize_answer("-0"), "0");
    }

    #[test]
    fn strips_math_markers_keeps_latex() {
        assert_eq!(normalize_answer("$\\frac{1}{2}$"), "\\frac{1}{2}");
        assert_eq!(normalize_answer("\\(x+1\\)"), "x+1");
        assert_eq!(normalize_answer("$$12$$"), "12");
    }

    #[test]
    fn check_examples() {
        assert!(check(Some("042"), "42"));
        assert!(!check(Some("41"), "42"));
        assert!(!check(None, "42"));
        assert!(check(Some("0.5"), ".5"));
        assert!(check(Some("1,000"), "1000"));
    }

    #[test]
    fn check_is_symmetric_on_samples() {
        for (a, b) in [("042", "42"), ("1,000", "1000"), ("x", "y"), ("3", "4")] {
            assert_eq!(check(Some(a), b), check(Some(b), a));
        }
    }

    #[test]
    fn integer_golds_agree_with_integer_equality() {
        for a in -5i64..=5 {
            for g in -5i64..=5 {
                assert_eq!(
                    check(Some(&a.to_string()), &g.to_string()),
                    a == g,
                    "a={a} g={g}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in ".{0,40}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once);
        }

        #[test]
        fn check_is_reflexive_on_normalized(s in "[0-9a-zA-Z+\\-.]{0,12}") {
            let n = normalize_answer(&s);
            if !n.is_empty() {
                prop_assert!(check(Some(&n), &n));
            }
        }
    }

    #[test]
    fn plugin_verifier_round_trip() {
        // `cat` echoes both lines; use a shell comparison instead.
        let plugin = PluginVerifier::new(vec![
            "sh".into(),
            "-c".into(),
            "read a; read b; if [ \"$a\" = \"$b\" ]; then echo 1; else echo 0; fi".into(),
        ])
        .unwrap();
        assert!(plugin.check("42", "42").unwrap());
        assert!(!plugin.check("41", "42").unwrap());
    }
}
