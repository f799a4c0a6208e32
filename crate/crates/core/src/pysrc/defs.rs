//! Structural index of one Python source file: function and class
//! definitions with exact byte spans for every editable position, plus the
//! module's import table. Nothing here rewrites source; spans feed the
//! editor, which only inserts (or, when explicitly asked, replaces
//! annotation spans).

use std::collections::BTreeMap;

use super::tokenizer::{tokenize, Tok, TokKind, TokenizeError};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("line {line}: malformed {what}")]
    Malformed { line: u32, what: &'static str },
}

/// Role markers for parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamStar {
    Plain,
    /// `*args`
    VarPositional,
    /// `**kwargs`
    VarKeyword,
}

#[derive(Debug, Clone)]
pub struct ParamInfo {
    pub name: String,
    pub star: ParamStar,
    /// Byte span of the parameter name token.
    pub name_span: (usize, usize),
    /// Byte span of an existing annotation expression, if any.
    pub annotation: Option<(usize, usize)>,
    /// Byte span of an existing default expression, if any.
    pub default: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefKind {
    Function,
    Method,
}

#[derive(Debug, Clone)]
pub struct DefInfo {
    pub name: String,
    /// Dotted path within the module, `<locals>` inserted for nesting in
    /// functions, matching runtime qualified names.
    pub qualname: String,
    pub kind: DefKind,
    pub is_async: bool,
    /// First line of the statement: the first decorator when present.
    pub first_line: u32,
    /// Line of the `def` keyword itself.
    pub def_line: u32,
    pub indent: u32,
    pub params: Vec<ParamInfo>,
    /// Byte offset just past the function name token (where an inline
    /// type-parameter list is inserted).
    pub after_name: usize,
    /// Byte span of an existing return annotation expression, if any.
    pub return_annotation: Option<(usize, usize)>,
    /// Byte offset of the `)` closing the parameter list.
    pub close_paren: usize,
    /// Byte offset of the `:` terminating the header.
    pub header_colon: usize,
    /// Byte offset of the start of the top-level statement enclosing this
    /// def (the def itself, or its outermost class/def ancestor), including
    /// decorators. Module-level declarations are inserted here.
    pub top_level_start: usize,
    /// Decorator names, in order.
    pub decorators: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ClassDefInfo {
    pub name: String,
    pub qualname: String,
    pub first_line: u32,
    pub def_line: u32,
    pub indent: u32,
}

/// One binding introduced by imports: `name` is usable in annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportBinding {
    /// `import a.b` / `import a.b as c`: binds module under `bound`.
    Module { bound: String, module: String },
    /// `from m import x as y`: binds `bound` to `m.x`.
    Item { bound: String, module: String, item: String },
}

#[derive(Debug, Clone, Default)]
pub struct ImportIndex {
    pub bindings: Vec<ImportBinding>,
    /// Byte offset just past the last top-level import in the file header
    /// region (after its trailing newline); new imports are inserted here.
    pub insert_offset: usize,
    /// True if the header region contained `from __future__ import ...`.
    pub has_future: bool,
}

impl ImportIndex {
    pub fn is_bound(&self, name: &str) -> bool {
        self.bindings.iter().any(|b| match b {
            ImportBinding::Module { bound, .. } => bound == name,
            ImportBinding::Item { bound, .. } => bound == name,
        })
    }

    pub fn lookup(&self, name: &str) -> Option<&ImportBinding> {
        self.bindings.iter().find(|b| match b {
            ImportBinding::Module { bound, .. } => bound == name,
            ImportBinding::Item { bound, .. } => bound == name,
        })
    }
}

/// Parsed view of one source file.
#[derive(Debug)]
pub struct PyFile {
    pub text: String,
    pub defs: Vec<DefInfo>,
    pub classes: Vec<ClassDefInfo>,
    pub imports: ImportIndex,
}

impl PyFile {
    pub fn parse(text: &str) -> Result<PyFile, ParseError> {
        let toks = tokenize(text)?;
        let mut p = Indexer {
            text,
            toks: &toks,
            defs: Vec::new(),
            classes: Vec::new(),
            blocks: Vec::new(),
        };
        p.run()?;
        let imports = index_imports(text, &toks);
        Ok(PyFile { text: text.to_string(), defs: p.defs, classes: p.classes, imports })
    }

    /// Find a def by qualified name and first line.
    pub fn find_def(&self, qualname: &str, first_line: u32) -> Option<&DefInfo> {
        self.defs.iter().find(|d| d.qualname == qualname && d.first_line == first_line)
    }

    /// Find a def by qualified name alone (stub lookups have no line).
    pub fn find_def_by_qualname(&self, qualname: &str) -> Vec<&DefInfo> {
        self.defs.iter().filter(|d| d.qualname == qualname).collect()
    }

    /// Map of top-level class name -> definition line for forward-reference
    /// decisions.
    pub fn class_lines(&self) -> BTreeMap<&str, u32> {
        self.classes.iter().map(|c| (c.name.as_str(), c.def_line)).collect()
    }
}

enum BlockKind {
    Class,
    Func,
}

struct Block {
    kind: BlockKind,
    name: String,
    indent: u32,
    start_offset: usize,
}

struct Indexer<'a> {
    text: &'a str,
    toks: &'a [Tok],
    defs: Vec<DefInfo>,
    classes: Vec<ClassDefInfo>,
    blocks: Vec<Block>,
}

impl<'a> Indexer<'a> {
    fn tok_text(&self, t: &Tok) -> &'a str {
        &self.text[t.start..t.end]
    }

    fn qualname_for(&self, name: &str) -> String {
        let mut parts: Vec<&str> = Vec::new();
        for b in &self.blocks {
            parts.push(&b.name);
            if matches!(b.kind, BlockKind::Func) {
                parts.push("<locals>");
            }
        }
        parts.push(name);
        parts.join(".")
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let toks = self.toks;
        let mut i = 0usize;
        // Decorator accumulation for the upcoming def/class.
        let mut pending: Option<(u32, usize, Vec<String>)> = None;
        while i < toks.len() {
            let t = &toks[i];
            let Some(indent) = t.logical_indent else {
                i += 1;
                continue;
            };
            // A logical line at indent I closes any block at indent >= I.
            while self.blocks.last().map(|b| b.indent >= indent).unwrap_or(false) {
                self.blocks.pop();
            }
            if t.kind == TokKind::Op && self.tok_text(t) == "@" {
                let deco_name = toks
                    .get(i + 1)
                    .filter(|n| n.kind == TokKind::Name)
                    .map(|n| self.tok_text(n).to_string())
                    .unwrap_or_default();
                match &mut pending {
                    Some((_, _, names)) => names.push(deco_name),
                    None => pending = Some((t.line, t.start, vec![deco_name])),
                }
                i = skip_logical_line(toks, i);
                continue;
            }
            if t.kind == TokKind::Name {
                let word = self.tok_text(t);
                let (is_async, kw_idx) = if word == "async"
                    && toks.get(i + 1).map(|n| self.tok_text(n) == "def").unwrap_or(false)
                {
                    (true, i + 1)
                } else {
                    (false, i)
                };
                let kw = self.tok_text(&toks[kw_idx]);
                if kw == "def" {
                    i = self.parse_def(kw_idx, indent, is_async, t.start, pending.take())?;
                    continue;
                }
                if kw == "class" {
                    let (line0, start0) = pending
                        .take()
                        .map(|(l, s, _)| (l, s))
                        .unwrap_or((t.line, t.start));
                    if let Some(name_tok) = toks.get(kw_idx + 1) {
                        let name = self.tok_text(name_tok).to_string();
                        let qualname = self.qualname_for(&name);
                        self.classes.push(ClassDefInfo {
                            name: name.clone(),
                            qualname,
                            first_line: line0,
                            def_line: t.line,
                            indent,
                            });
                        self.blocks.push(Block {
                            kind: BlockKind::Class,
                            name,
                            indent,
                            start_offset: start0,
                        });
                    }
                    i = skip_logical_line(toks, i);
                    continue;
                }
            }
            pending = None;
            i = skip_logical_line(toks, i);
        }
        Ok(())
    }

    fn parse_def(
        &mut self,
        def_idx: usize,
        indent: u32,
        is_async: bool,
        stmt_start: usize,
        pending: Option<(u32, usize, Vec<String>)>,
    ) -> Result<usize, ParseError> {
        let toks = self.toks;
        let def_tok = &toks[def_idx];
        let name_tok = toks
            .get(def_idx + 1)
            .filter(|t| t.kind == TokKind::Name)
            .ok_or(ParseError::Malformed { line: def_tok.line, what: "def header" })?;
        let name = self.tok_text(name_tok).to_string();
        let (first_line, stmt_start, decorators) = match pending {
            Some((l, s, d)) => (l, s, d),
            None => (def_tok.line, stmt_start, Vec::new()),
        };

        // Find '(' (skipping a possible PEP 695 type-parameter list).
        let mut j = def_idx + 2;
        let mut bracket_depth = 0i32;
        while j < toks.len() {
            let tt = self.tok_text(&toks[j]);
            if toks[j].kind == TokKind::Op {
                match tt {
                    "[" => bracket_depth += 1,
                    "]" => bracket_depth -= 1,
                    "(" if bracket_depth == 0 => break,
                    _ => {}
                }
            }
            j += 1;
        }
        if j >= toks.len() {
            return Err(ParseError::Malformed { line: def_tok.line, what: "parameter list" });
        }
        let open_paren = j;

        // Parse parameters until the matching ')'.
        let mut params = Vec::new();
        let mut depth = 1i32;
        let mut k = open_paren + 1;
        let mut cur: Option<ParamInfo> = None;
        let mut star_pending = ParamStar::Plain;
        let mut seg_state = SegState::ExpectName;
        let mut expr_start: Option<usize> = None;
        let mut lambda_depth = 0u32;
        let close_paren;
        loop {
            if k >= toks.len() {
                return Err(ParseError::Malformed { line: def_tok.line, what: "parameter list" });
            }
            let tok = &toks[k];
            let tt = self.tok_text(tok);
            if tok.kind == TokKind::Op {
                match tt {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth -= 1;
                        if depth == 0 {
                            close_segment(
                                self.text, &mut cur, &mut params, seg_state, expr_start, tok.start,
                            );
                            close_paren = tok.start;
                            break;
                        }
                    }
                    "," if depth == 1 && lambda_depth == 0 => {
                        close_segment(
                            self.text, &mut cur, &mut params, seg_state, expr_start, tok.start,
                        );
                        seg_state = SegState::ExpectName;
                        star_pending = ParamStar::Plain;
                        expr_start = None;
                        k += 1;
                        continue;
                    }
                    "*" if depth == 1 && seg_state == SegState::ExpectName => {
                        if toks.get(k + 1).map(|n| self.tok_text(n) == "*").unwrap_or(false) {
                            star_pending = ParamStar::VarKeyword;
                            k += 2;
                        } else {
                            star_pending = ParamStar::VarPositional;
                            k += 1;
                        }
                        continue;
                    }
                    ":" if depth == 1 && seg_state == SegState::AfterName && lambda_depth == 0 => {
                        seg_state = SegState::InAnnotation;
                        expr_start = None;
                        k += 1;
                        continue;
                    }
                    "=" if depth == 1 && lambda_depth == 0 => {
                        // close an annotation span if one is open
                        if seg_state == SegState::InAnnotation {
                            if let (Some(c), Some(s)) = (&mut cur, expr_start) {
                                c.annotation = Some((s, trim_back(self.text, s, tok.start)));
                            }
                        }
                        seg_state = SegState::InDefault;
                        expr_start = None;
                        k += 1;
                        continue;
                    }
                    _ => {}
                }
            }
            if tok.kind == TokKind::Name && tt == "lambda" {
                lambda_depth += 1;
            }
            if tok.kind == TokKind::Op && tt == ":" && lambda_depth > 0 {
                lambda_depth -= 1;
                k += 1;
                continue;
            }
            match seg_state {
                SegState::ExpectName => {
                    if tok.kind == TokKind::Name {
                        cur = Some(ParamInfo {
                            name: tt.to_string(),
                            star: star_pending,
                            name_span: (tok.start, tok.end),
                            annotation: None,
                            default: None,
                        });
                        seg_state = SegState::AfterName;
                    }
                    // bare '*' and '/' markers produce no ParamInfo
                }
                SegState::InAnnotation | SegState::InDefault => {
                    if expr_start.is_none() && tok.kind != TokKind::Comment {
                        expr_start = Some(tok.start);
                    }
                }
                SegState::AfterName => {}
            }
            k += 1;
        }

        // Return annotation and header colon.
        let mut m = k + 1;
        let mut return_annotation = None;
        let mut header_colon = None;
        let mut depth2 = 0i32;
        let mut lambda_depth2 = 0u32;
        let mut arrow_expr_start: Option<usize> = None;
        let mut in_arrow = false;
        while m < toks.len() {
            let tok = &toks[m];
            let tt = self.tok_text(tok);
            if tok.kind == TokKind::Op {
                match tt {
                    "(" | "[" | "{" => depth2 += 1,
                    ")" | "]" | "}" => depth2 -= 1,
                    "->" if depth2 == 0 => {
                        in_arrow = true;
                        arrow_expr_start = None;
                        m += 1;
                        continue;
                    }
                    ":" if depth2 == 0 => {
                        if lambda_depth2 > 0 {
                            lambda_depth2 -= 1;
                        } else {
                            if in_arrow {
                                if let Some(s) = arrow_expr_start {
                                    return_annotation =
                                        Some((s, trim_back(self.text, s, tok.start)));
                                }
                            }
                            header_colon = Some(tok.start);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            if tok.kind == TokKind::Name && tt == "lambda" {
                lambda_depth2 += 1;
            }
            if in_arrow && arrow_expr_start.is_none() && tok.kind != TokKind::Comment {
                arrow_expr_start = Some(tok.start);
            }
            m += 1;
        }
        let header_colon =
            header_colon.ok_or(ParseError::Malformed { line: def_tok.line, what: "def header" })?;

        let qualname = self.qualname_for(&name);
        let kind = if matches!(self.blocks.last().map(|b| &b.kind), Some(BlockKind::Class)) {
            DefKind::Method
        } else {
            DefKind::Function
        };
        let top_level_start =
            self.blocks.first().map(|b| b.start_offset).unwrap_or(stmt_start);
        self.defs.push(DefInfo {
            name: name.clone(),
            qualname,
            kind,
            is_async,
            first_line,
            def_line: def_tok.line,
            indent,
            params,
            after_name: name_tok.end,
            return_annotation,
            close_paren,
            header_colon,
            top_level_start,
            decorators,
        });
        self.blocks.push(Block {
            kind: BlockKind::Func,
            name,
            indent,
            start_offset: stmt_start,
        });
        // Continue scanning after the header colon.
        Ok(m + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegState {
    ExpectName,
    AfterName,
    InAnnotation,
    InDefault,
}

fn close_segment(
    text: &str,
    cur: &mut Option<ParamInfo>,
    params: &mut Vec<ParamInfo>,
    state: SegState,
    expr_start: Option<usize>,
    end: usize,
) {
    if let Some(mut p) = cur.take() {
        match state {
            SegState::InAnnotation => {
                if let Some(s) = expr_start {
                    p.annotation = Some((s, trim_back(text, s, end)));
                }
            }
            SegState::InDefault => {
                if let Some(s) = expr_start {
                    p.default = Some((s, trim_back(text, s, end)));
                }
            }
            _ => {}
        }
        params.push(p);
    }
}

fn trim_back(text: &str, start: usize, mut end: usize) -> usize {
    while end > start && text.as_bytes()[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    end
}

fn skip_logical_line(toks: &[Tok], mut i: usize) -> usize {
    while i < toks.len() && toks[i].kind != TokKind::Newline {
        i += 1;
    }
    i + 1
}

fn index_imports(text: &str, toks: &[Tok]) -> ImportIndex {
    let mut idx = ImportIndex::default();
    let mut i = 0usize;
    let mut header_done = false;
    while i < toks.len() {
        let t = &toks[i];
        let Some(indent) = t.logical_indent else {
            i += 1;
            continue;
        };
        if indent != 0 {
            i = skip_logical_line(toks, i);
            continue;
        }
        let word = &text[t.start..t.end];
        let is_import = t.kind == TokKind::Name && (word == "import" || word == "from");
        if is_import {
            let line_end = logical_line_end(text, toks, i);
            parse_import_line(text, toks, i, &mut idx);
            if !header_done {
                idx.insert_offset = line_end;
            }
            i = skip_logical_line(toks, i);
            continue;
        }
        // Docstrings and comments may precede imports without ending the
        // header region; any other statement does.
        let is_trivia = matches!(t.kind, TokKind::Str | TokKind::Comment);
        if !is_trivia {
            header_done = true;
        }
        i = skip_logical_line(toks, i);
    }
    idx
}

fn logical_line_end(text: &str, toks: &[Tok], start: usize) -> usize {
    let mut i = start;
    while i < toks.len() && toks[i].kind != TokKind::Newline {
        i += 1;
    }
    if i < toks.len() {
        toks[i].end
    } else {
        text.len()
    }
}

fn parse_import_line(text: &str, toks: &[Tok], start: usize, idx: &mut ImportIndex) {
    let words: Vec<(TokKind, &str)> = {
        let mut v = Vec::new();
        let mut i = start;
        while i < toks.len() && toks[i].kind != TokKind::Newline {
            if toks[i].kind != TokKind::Comment {
                v.push((toks[i].kind, &text[toks[i].start..toks[i].end]));
            }
            i += 1;
        }
        v
    };
    if words.is_empty() {
        return;
    }
    if words[0].1 == "import" {
        // import a.b.c [as d][, e.f [as g]]...
        let mut i = 1;
        while i < words.len() {
            let mut module = String::new();
            while i < words.len() && (words[i].0 == TokKind::Name || words[i].1 == ".") {
                if words[i].1 == "as" {
                    break;
                }
                module.push_str(words[i].1);
                i += 1;
            }
            let bound = if i < words.len() && words[i].1 == "as" {
                i += 1;
                let b = words.get(i).map(|w| w.1.to_string()).unwrap_or_default();
                i += 1;
                b
            } else {
                module.split('.').next().unwrap_or("").to_string()
            };
            if !module.is_empty() && !bound.is_empty() {
                idx.bindings.push(ImportBinding::Module { bound, module });
            }
            while i < words.len() && words[i].1 != "," {
                i += 1;
            }
            i += 1;
        }
    } else if words[0].1 == "from" {
        let mut i = 1;
        let mut module = String::new();
        while i < words.len() && words[i].1 != "import" {
            module.push_str(words[i].1);
            i += 1;
        }
        if module == "__future__" {
            idx.has_future = true;
        }
        i += 1; // past 'import'
        while i < words.len() {
            if words[i].1 == "(" || words[i].1 == ")" || words[i].1 == "," {
                i += 1;
                continue;
            }
            if words[i].1 == "*" {
                i += 1;
                continue;
            }
            let item = words[i].1.to_string();
            let mut bound = item.clone();
            if words.get(i + 1).map(|w| w.1 == "as").unwrap_or(false) {
                bound = words.get(i + 2).map(|w| w.1.to_string()).unwrap_or_default();
                i += 3;
            } else {
                i += 1;
            }
            if !item.is_empty() && !bound.is_empty() {
                idx.bindings.push(ImportBinding::Item {
                    bound,
                    module: module.clone(),
                    item,
                });
            }
        }
    }
}
