//! Insertion-only source editing: parameter and return annotations, inline
//! type-parameter lists, generated typevar declarations, and import lines.
//!
//! No existing byte is touched unless annotation overwriting is explicitly
//! requested, so stripping every inserted token restores the original file
//! exactly. Annotated parameters keep their spelling: `b=None` becomes
//! `b: int|None=None`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::generalize::Signature;
use crate::model::{FunctionKey, TypeKind, TypeSpec};
use crate::pysrc::defs::{ParseError, PyFile};
use crate::pysrc::tokenizer::{tokenize, TokKind};
use crate::render::{render_signature, FileContext, PyVersion, TypevarRegistry};

#[derive(Debug, Error)]
pub enum EditError {
    #[error("source does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("edited output failed to re-parse; refusing to write: {0}")]
    Reparse(String),
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub version: PyVersion,
    /// Replace existing annotations instead of leaving them untouched.
    pub overwrite: bool,
    /// Module name of the file.
    pub module: String,
    /// Alternate runtime module name (scripts run as `__main__`).
    pub module_alias: Option<String>,
}

/// Outcome of annotating one file.
#[derive(Debug)]
pub struct FileOutcome {
    pub new_text: String,
    pub changed: bool,
    /// Keys that did not match any definition (file changed since tracing).
    pub stale: Vec<FunctionKey>,
    /// Functions skipped with a reason (e.g. an existing type-parameter
    /// list).
    pub skipped: Vec<(FunctionKey, String)>,
    pub annotated_functions: usize,
}

#[derive(Debug)]
enum Edit {
    Insert(usize, String),
    Replace(usize, usize, String),
}

impl Edit {
    fn offset(&self) -> usize {
        match self {
            Edit::Insert(o, _) => *o,
            Edit::Replace(o, _, _) => *o,
        }
    }
}

/// Annotate `text` with `sigs`. Signatures must belong to this file; they
/// are matched to definitions by (qualified name, first line).
pub fn annotate_file(
    text: &str,
    sigs: &[Signature],
    opts: &AnnotateOptions,
) -> Result<FileOutcome, EditError> {
    let file = PyFile::parse(text)?;
    let mut fctx = FileContext {
        module: opts.module.clone(),
        module_alias: opts.module_alias.clone(),
        class_lines: Default::default(),
    };
    for c in &file.classes {
        fctx.class_lines.insert(c.name.clone(), c.def_line);
    }

    let mut registry = TypevarRegistry::default();
    seed_registry(&mut registry, text);

    let mut edits: Vec<Edit> = Vec::new();
    let mut imports_needed: BTreeSet<(String, String)> = BTreeSet::new();
    let mut stale = Vec::new();
    let mut skipped = Vec::new();
    let mut annotated_functions = 0usize;

    for sig in sigs {
        let Some(def) = file.find_def(&sig.fn_key.qualified_name, sig.fn_key.first_line) else {
            stale.push(sig.fn_key.clone());
            continue;
        };
        if has_type_param_list(text, def.after_name) && !sig.typevars.is_empty() {
            skipped.push((
                sig.fn_key.clone(),
                "definition already has a type-parameter list".to_string(),
            ));
            continue;
        }

        // None-valued defaults render as optional.
        let mut sig = sig.clone();
        for p in sig.params.iter_mut() {
            let Some(def_param) = def.params.iter().find(|dp| dp.name == p.name) else {
                continue;
            };
            let defaults_to_none = def_param
                .default
                .map(|(s, e)| text[s..e].trim() == "None")
                .unwrap_or(false);
            if defaults_to_none
                && p.spec.kind() != TypeKind::NoneType
                && p.spec.kind() != TypeKind::TypeVar
                && !(p.spec.kind() == TypeKind::Union
                    && p.spec.args().iter().any(|m| m.kind() == TypeKind::NoneType))
            {
                p.spec = TypeSpec::union([p.spec.clone(), TypeSpec::none()]);
            }
        }

        let defining_class = sig.fn_key.qualified_parent().map(|s| s.to_string());
        let rendered = render_signature(
            &sig,
            opts.version,
            defining_class.as_deref(),
            &fctx,
            def.def_line,
            &mut registry,
        );

        let mut local_edits: Vec<Edit> = Vec::new();
        for dp in &def.params {
            let Some(ann) = rendered.params.get(&dp.name) else { continue };
            match dp.annotation {
                Some((s, e)) => {
                    if opts.overwrite && text[s..e].trim() != ann {
                        local_edits.push(Edit::Replace(s, e, ann.clone()));
                    }
                }
                None => {
                    local_edits.push(Edit::Insert(dp.name_span.1, format!(": {ann}")));
                }
            }
        }
        if let Some(ret) = &rendered.return_annotation {
            match def.return_annotation {
                Some((s, e)) => {
                    if opts.overwrite && text[s..e].trim() != *ret {
                        local_edits.push(Edit::Replace(s, e, ret.clone()));
                    }
                }
                None => {
                    local_edits.push(Edit::Insert(def.header_colon, format!(" -> {ret}")));
                }
            }
        }

        if local_edits.is_empty() {
            continue;
        }
        annotated_functions += 1;
        if let Some(list) = &rendered.type_param_list {
            local_edits.push(Edit::Insert(def.after_name, list.clone()));
        }
        for (_, decl) in &rendered.typevar_decls {
            let line = format!("{decl}\n");
            if !text.contains(&line) {
                local_edits.push(Edit::Insert(def.top_level_start, line));
            }
        }
        imports_needed.extend(rendered.imports.iter().cloned());
        edits.extend(local_edits);
    }

    // Import lines for names not already available in the file.
    let import_text = build_import_lines(&file, &fctx, &imports_needed);
    if !import_text.is_empty() {
        let offset = import_insert_offset(&file, text);
        edits.push(Edit::Insert(offset, import_text));
    }

    if edits.is_empty() {
        return Ok(FileOutcome {
            new_text: text.to_string(),
            changed: false,
            stale,
            skipped,
            annotated_functions,
        });
    }

    edits.sort_by(|a, b| b.offset().cmp(&a.offset()));
    let mut out = text.to_string();
    for e in &edits {
        match e {
            Edit::Insert(o, s) => out.insert_str(*o, s),
            Edit::Replace(s, e_, t) => out.replace_range(*s..*e_, t),
        }
    }

    // The rewritten file must still tokenize and keep the same definitions.
    match PyFile::parse(&out) {
        Ok(reparsed) => {
            if reparsed.defs.len() != file.defs.len() {
                return Err(EditError::Reparse("definition count changed".to_string()));
            }
        }
        Err(e) => return Err(EditError::Reparse(e.to_string())),
    }

    Ok(FileOutcome { new_text: out, changed: true, stale, skipped, annotated_functions })
}

fn seed_registry(registry: &mut TypevarRegistry, text: &str) {
    // Existing generated typevars keep their numbers reserved.
    let mut max = 0u32;
    for (idx, _) in text.match_indices("rt_T") {
        let digits: String = text[idx + 4..].chars().take_while(|c| c.is_ascii_digit()).collect();
        if let Ok(n) = digits.parse::<u32>() {
            max = max.max(n);
        }
    }
    registry.reserve_through(max);
}

fn has_type_param_list(text: &str, after_name: usize) -> bool {
    text[after_name..].chars().find(|c| !c.is_whitespace()) == Some('[')
}

fn build_import_lines(
    file: &PyFile,
    fctx: &FileContext,
    needed: &BTreeSet<(String, String)>,
) -> String {
    use std::collections::BTreeMap;
    let mut by_module: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (module, name) in needed {
        if module.is_empty() || module == "builtins" {
            continue;
        }
        if fctx.is_local_module(module) {
            continue;
        }
        if file.imports.is_bound(name) {
            continue;
        }
        if fctx.class_lines.contains_key(name.as_str()) {
            continue;
        }
        by_module.entry(module).or_default().push(name);
    }
    let mut out = String::new();
    for (module, mut names) in by_module {
        names.sort();
        names.dedup();
        out.push_str(&format!("from {module} import {}\n", names.join(", ")));
    }
    out
}

fn import_insert_offset(file: &PyFile, text: &str) -> usize {
    if file.imports.insert_offset > 0 {
        return file.imports.insert_offset;
    }
    // No imports: place after a module docstring when present, else at the
    // very top (after shebang/encoding comments).
    if let Ok(toks) = tokenize(text) {
        let mut it = toks.iter();
        if let Some(first) = it.find(|t| t.kind != TokKind::Comment) {
            if first.kind == TokKind::Str {
                // docstring: insert after its logical line
                for t in toks.iter() {
                    if t.kind == TokKind::Newline && t.start >= first.end {
                        return t.end;
                    }
                }
            }
        }
        for t in toks.iter() {
            if t.kind == TokKind::Comment {
                continue;
            }
            return line_start(text, t.start);
        }
    }
    0
}

fn line_start(text: &str, offset: usize) -> usize {
    text[..offset].rfind('\n').map(|p| p + 1).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalize::SigParam;

    fn int() -> TypeSpec {
        TypeSpec::concrete("builtins", "int")
    }
    fn opts() -> AnnotateOptions {
        AnnotateOptions {
            version: PyVersion::V312,
            overwrite: false,
            module: "m".into(),
            module_alias: Some("__main__".into()),
        }
    }
    fn sig(key: FunctionKey, params: Vec<SigParam>, ret: TypeSpec) -> Signature {
        let mut s = Signature {
            fn_key: key,
            params,
            return_type: ret,
            typevars: Default::default(),
            imports_needed: Default::default(),
        };
        s.refresh_imports();
        s
    }

    #[test]
    fn inserts_param_and_return_annotations() {
        let src = "def f(a, b=None):\n    return [1]\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 1),
            vec![
                SigParam {
                    name: "a".into(),
                    spec: TypeSpec::protocol("typing", "ValuesView", vec![int()]),
                    has_default: false,
                },
                SigParam {
                    name: "b".into(),
                    spec: TypeSpec::union([int(), TypeSpec::none()]),
                    has_default: true,
                },
            ],
            TypeSpec::generic("builtins", "list", vec![int()]),
        );
        let out = annotate_file(src, &[s], &opts()).unwrap();
        assert_eq!(
            out.new_text,
            "from typing import ValuesView\ndef f(a: ValuesView[int], b: int|None=None) -> list[int]:\n    return [1]\n"
        );
    }

    #[test]
    fn none_default_renders_optional_even_if_unobserved() {
        let src = "def f(b=None):\n    return b\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 1),
            vec![SigParam { name: "b".into(), spec: int(), has_default: true }],
            int(),
        );
        let out = annotate_file(src, &[s], &opts()).unwrap();
        assert!(out.new_text.contains("b: int|None=None"));
    }

    #[test]
    fn untraced_file_is_byte_identical() {
        let src = "x = 1\n\ndef f(a):\n    return a\n";
        let out = annotate_file(src, &[], &opts()).unwrap();
        assert!(!out.changed);
        assert_eq!(out.new_text, src);
    }

    #[test]
    fn existing_annotations_left_alone_without_overwrite() {
        let src = "def f(a: str, b) -> bool:\n    return True\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 1),
            vec![
                SigParam { name: "a".into(), spec: int(), has_default: false },
                SigParam { name: "b".into(), spec: int(), has_default: false },
            ],
            int(),
        );
        let out = annotate_file(src, &[s], &opts()).unwrap();
        assert_eq!(out.new_text, "def f(a: str, b: int) -> bool:\n    return True\n");
    }

    #[test]
    fn overwrite_replaces_existing_annotations() {
        let src = "def f(a: str) -> bool:\n    return True\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 1),
            vec![SigParam { name: "a".into(), spec: int(), has_default: false }],
            int(),
        );
        let mut o = opts();
        o.overwrite = true;
        let out = annotate_file(src, &[s], &o).unwrap();
        assert_eq!(out.new_text, "def f(a: int) -> int:\n    return True\n");
    }

    #[test]
    fn stale_keys_reported() {
        let src = "def f(a):\n    return a\n";
        let s = sig(FunctionKey::new("/m.py", "f", 99), vec![], int());
        let out = annotate_file(src, &[s], &opts()).unwrap();
        assert_eq!(out.stale.len(), 1);
        assert!(!out.changed);
    }

    #[test]
    fn applying_twice_is_idempotent() {
        let src = "def f(a):\n    return a\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 1),
            vec![SigParam { name: "a".into(), spec: int(), has_default: false }],
            int(),
        );
        let once = annotate_file(src, &[s.clone()], &opts()).unwrap();
        let twice = annotate_file(&once.new_text, &[s], &opts()).unwrap();
        assert_eq!(once.new_text, twice.new_text);
    }

    #[test]
    fn stripping_insertions_restores_original() {
        let src = "import os\n\ndef f(a, b=2):\n    return a\n";
        let s = sig(
            FunctionKey::new("/m.py", "f", 3),
            vec![
                SigParam { name: "a".into(), spec: int(), has_default: false },
                SigParam { name: "b".into(), spec: int(), has_default: true },
            ],
            int(),
        );
        let out = annotate_file(src, &[s], &opts()).unwrap();
        let restored = out
            .new_text
            .replace(": int", "")
            .replace(" -> int", "");
        assert_eq!(restored, src);
    }

    #[test]
    fn typevar_signature_renders_inline_on_312() {
        let mut typevars = std::collections::BTreeMap::new();
        typevars.insert(1u32, vec![int(), TypeSpec::concrete("builtins", "str")]);
        let s = Signature {
            fn_key: FunctionKey::new("/m.py", "add", 1),
            params: vec![
                SigParam { name: "a".into(), spec: TypeSpec::typevar(1), has_default: false },
                SigParam { name: "b".into(), spec: TypeSpec::typevar(1), has_default: false },
            ],
            return_type: TypeSpec::typevar(1),
            typevars,
            imports_needed: Default::default(),
        };
        let src = "def add(a, b):\n    return a + b\n";
        let out = annotate_file(src, &[s.clone()], &opts()).unwrap();
        assert_eq!(
            out.new_text,
            "def add[T1: (int, str)](a: T1, b: T1) -> T1:\n    return a + b\n"
        );
        let mut o310 = opts();
        o310.version = PyVersion::V310;
        let out310 = annotate_file(src, &[s], &o310).unwrap();
        assert_eq!(
            out310.new_text,
            "from typing import TypeVar\nrt_T1 = TypeVar(\"rt_T1\", int, str)\ndef add(a: rt_T1, b: rt_T1) -> rt_T1:\n    return a + b\n"
        );
    }

    #[test]
    fn method_annotations_insert_into_class_body() {
        let src = "class C:\n    def m(self, v):\n        return self\n";
        let s = sig(
            FunctionKey::new("/m.py", "C.m", 2),
            vec![
                SigParam { name: "self".into(), spec: TypeSpec::self_type(), has_default: false },
                SigParam { name: "v".into(), spec: int(), has_default: false },
            ],
            TypeSpec::self_type(),
        );
        let out = annotate_file(src, &[s], &opts()).unwrap();
        assert_eq!(
            out.new_text,
            "from typing import Self\nclass C:\n    def m(self: Self, v: int) -> Self:\n        return self\n"
        );
    }
}
