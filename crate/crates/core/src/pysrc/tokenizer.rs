//! Minimal Python tokenizer.
//!
//! Produces just enough structure to locate definitions, parameter lists,
//! imports, and annotation expressions without altering any source bytes:
//! names, numbers, strings (all prefix/quote forms), operators, comments,
//! and logical newlines (suppressed inside brackets and after backslash
//! continuations). Indentation is reported per logical line rather than as
//! INDENT/DEDENT tokens.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Name,
    Number,
    Str,
    Op,
    Comment,
    /// End of a logical line (bracket depth zero, no continuation).
    Newline,
}

#[derive(Debug, Clone, Copy)]
pub struct Tok {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    pub line: u32,
    /// Indentation (in bytes) of the logical line this token starts,
    /// recorded only on the first token of each logical line.
    pub logical_indent: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum TokenizeError {
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: u32 },
}

pub fn tokenize(text: &str) -> Result<Vec<Tok>, TokenizeError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line: u32 = 1;
    let mut depth: i32 = 0;
    let mut at_line_start = true;
    let mut pending_indent: Option<u32> = None;
    let mut last_was_newline = true;

    while i < bytes.len() {
        if at_line_start {
            let mut indent = 0u32;
            while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
                indent += 1;
                i += 1;
            }
            at_line_start = false;
            if depth == 0 {
                pending_indent = Some(indent);
            }
            continue;
        }
        let b = bytes[i];
        match b {
            b'\n' => {
                if depth == 0 && !last_was_newline {
                    toks.push(Tok {
                        kind: TokKind::Newline,
                        start: i,
                        end: i + 1,
                        line,
                        logical_indent: None,
                    });
                    last_was_newline = true;
                    pending_indent = None;
                }
                line += 1;
                i += 1;
                at_line_start = true;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
            }
            b'\\' if i + 1 < bytes.len() && (bytes[i + 1] == b'\n' || bytes[i + 1] == b'\r') => {
                // explicit continuation
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                if i < bytes.len() {
                    line += 1;
                    i += 1;
                }
                // consume leading whitespace of the continued line
                while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
                    i += 1;
                }
            }
            b'#' => {
                let start = i;
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                push_tok(&mut toks, TokKind::Comment, start, i, line, &mut pending_indent);
                last_was_newline = false;
            }
            b'\'' | b'"' => {
                let start = i;
                let start_line = line;
                i = scan_string(bytes, i, &mut line)
                    .ok_or(TokenizeError::UnterminatedString { line: start_line })?;
                push_tok(&mut toks, TokKind::Str, start, i, start_line, &mut pending_indent);
                last_was_newline = false;
            }
            _ if is_ident_start(text, i) => {
                let start = i;
                i = scan_ident(text, i);
                // string prefix directly attached to a quote?
                if i - start <= 2
                    && i < bytes.len()
                    && (bytes[i] == b'\'' || bytes[i] == b'"')
                    && text[start..i].bytes().all(|c| matches!(
                        c,
                        b'r' | b'R' | b'b' | b'B' | b'f' | b'F' | b'u' | b'U'
                    ))
                {
                    let start_line = line;
                    i = scan_string(bytes, i, &mut line)
                        .ok_or(TokenizeError::UnterminatedString { line: start_line })?;
                    push_tok(&mut toks, TokKind::Str, start, i, start_line, &mut pending_indent);
                } else {
                    push_tok(&mut toks, TokKind::Name, start, i, line, &mut pending_indent);
                }
                last_was_newline = false;
            }
            b'0'..=b'9' => {
                let start = i;
                i = scan_number(bytes, i);
                push_tok(&mut toks, TokKind::Number, start, i, line, &mut pending_indent);
                last_was_newline = false;
            }
            b'.' if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() => {
                let start = i;
                i = scan_number(bytes, i + 1);
                push_tok(&mut toks, TokKind::Number, start, i, line, &mut pending_indent);
                last_was_newline = false;
            }
            _ => {
                match b {
                    b'(' | b'[' | b'{' => depth += 1,
                    b')' | b']' | b'}' => depth -= 1,
                    _ => {}
                }
                let start = i;
                // '->' is the one multi-byte operator we care about as a unit
                if b == b'-' && i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    i += 2;
                } else {
                    i += utf8_len(bytes[i]);
                }
                push_tok(&mut toks, TokKind::Op, start, i, line, &mut pending_indent);
                last_was_newline = false;
            }
        }
    }
    Ok(toks)
}

fn push_tok(
    toks: &mut Vec<Tok>,
    kind: TokKind,
    start: usize,
    end: usize,
    line: u32,
    pending_indent: &mut Option<u32>,
) {
    toks.push(Tok { kind, start, end, line, logical_indent: pending_indent.take() });
}

fn is_ident_start(text: &str, i: usize) -> bool {
    match text[i..].chars().next() {
        Some(c) => c == '_' || c.is_alphabetic(),
        None => false,
    }
}

fn scan_ident(text: &str, mut i: usize) -> usize {
    for c in text[i..].chars() {
        if c == '_' || c.is_alphanumeric() {
            i += c.len_utf8();
        } else {
            break;
        }
    }
    i
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len()
        && (bytes[i].is_ascii_alphanumeric()
            || bytes[i] == b'.'
            || bytes[i] == b'_'
            || ((bytes[i] == b'+' || bytes[i] == b'-')
                && i > 0
                && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
    {
        i += 1;
    }
    i
}

/// Scan a string literal starting at the opening quote; returns the index
/// one past the closing quote, or None if unterminated.
fn scan_string(bytes: &[u8], start: usize, line: &mut u32) -> Option<usize> {
    let quote = bytes[start];
    let triple = start + 2 < bytes.len() && bytes[start + 1] == quote && bytes[start + 2] == quote;
    let mut i = start + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' && i + 1 < bytes.len() {
            if bytes[i + 1] == b'\n' {
                *line += 1;
            }
            i += 2;
            continue;
        }
        if b == b'\n' {
            if !triple {
                return None; // unterminated single-quoted string
            }
            *line += 1;
            i += 1;
            continue;
        }
        if b == quote {
            if triple {
                if i + 2 < bytes.len() && bytes[i + 1] == quote && bytes[i + 2] == quote {
                    return Some(i + 3);
                }
                i += 1;
            } else {
                return Some(i + 1);
            }
        } else {
            i += utf8_len(b);
        }
    }
    None
}

fn utf8_len(b: u8) -> usize {
    match b {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(TokKind, String)> {
        tokenize(text)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, text[t.start..t.end].to_string()))
            .collect()
    }

    #[test]
    fn basic_def_tokens() {
        let toks = kinds("def f(a, b=1):\n    return a\n");
        assert_eq!(toks[0], (TokKind::Name, "def".into()));
        assert_eq!(toks[1], (TokKind::Name, "f".into()));
        assert!(toks.iter().any(|(k, s)| *k == TokKind::Op && s == ":"));
    }

    #[test]
    fn newlines_suppressed_inside_brackets() {
        let toks = kinds("f(a,\n  b)\ng()\n");
        let newlines: Vec<_> =
            toks.iter().filter(|(k, _)| *k == TokKind::Newline).collect();
        assert_eq!(newlines.len(), 2);
    }

    #[test]
    fn strings_with_prefixes_and_triples() {
        let toks = kinds("x = rb'\\d+'\ny = f\"{a!r}\"\nz = '''multi\nline'''\n");
        let strs: Vec<_> = toks.iter().filter(|(k, _)| *k == TokKind::Str).collect();
        assert_eq!(strs.len(), 3);
    }

    #[test]
    fn arrow_is_single_op() {
        let toks = kinds("def f() -> int: ...\n");
        assert!(toks.iter().any(|(k, s)| *k == TokKind::Op && s == "->"));
    }

    #[test]
    fn indent_recorded_on_logical_line_start() {
        let toks = tokenize("def f():\n    return 1\n").unwrap();
        let first = toks.iter().find(|t| t.logical_indent == Some(4)).unwrap();
        assert_eq!(first.kind, TokKind::Name);
    }

    #[test]
    fn unterminated_string_is_reported() {
        assert!(tokenize("x = 'oops\n").is_err());
    }

    #[test]
    fn backslash_continuation_joins_lines() {
        let toks = kinds("x = 1 + \\\n    2\ny = 3\n");
        let newlines = toks.iter().filter(|(k, _)| *k == TokKind::Newline).count();
        assert_eq!(newlines, 2);
    }
}
