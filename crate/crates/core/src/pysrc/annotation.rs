//! Parse annotation expressions (`list[int]`, `Medium | None`,
//! `Optional[dict[str, int]]`, `"Forward"`) into [`TypeSpec`] values,
//! resolving names through a file's import table and locally defined
//! classes. Used to read declared parent-method signatures from source and
//! stub files; best-effort by design — anything unrecognized degrades to an
//! opaque concrete type carrying its raw text.

use crate::model::{TypeKind, TypeSpec};

use super::defs::{ImportBinding, ImportIndex};

/// Name-resolution context for one file.
pub struct ResolveCtx<'a> {
    pub imports: &'a ImportIndex,
    /// Module name of the file being parsed (empty when unknown).
    pub module: &'a str,
    /// Qualified names of classes defined in this file, e.g. `Line`,
    /// `Outer.Inner`.
    pub local_classes: &'a [String],
}

const BUILTIN_TYPES: &[&str] = &[
    "int", "float", "complex", "str", "bytes", "bytearray", "bool", "object", "list", "dict",
    "set", "frozenset", "tuple", "type", "range", "memoryview", "slice", "BaseException",
    "Exception",
];

/// typing names that are structural protocols in our model.
const TYPING_PROTOCOLS: &[&str] = &[
    "Iterator", "Iterable", "Generator", "AsyncIterator", "AsyncIterable", "AsyncGenerator",
    "Coroutine", "Awaitable", "Callable", "Collection", "Container", "Hashable", "ItemsView",
    "KeysView", "Mapping", "MappingView", "MutableMapping", "MutableSequence", "MutableSet",
    "Reversible", "Sequence", "Sized", "ValuesView",
];

/// typing aliases for builtin containers.
fn typing_alias(name: &str) -> Option<&'static str> {
    Some(match name {
        "List" => "list",
        "Dict" => "dict",
        "Set" => "set",
        "FrozenSet" => "frozenset",
        "Tuple" => "tuple",
        "Type" => "type",
        _ => return None,
    })
}

pub fn parse_annotation(text: &str, ctx: &ResolveCtx<'_>) -> TypeSpec {
    let mut p = Parser { text, pos: 0, ctx };
    let spec = p.parse_union();
    p.skip_ws();
    if p.pos < p.text.len() {
        // Trailing garbage: treat the whole thing as opaque.
        return opaque(text);
    }
    spec
}

fn opaque(text: &str) -> TypeSpec {
    TypeSpec::concrete("", text.trim())
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    ctx: &'a ResolveCtx<'a>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() {
            let b = self.text.as_bytes()[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn parse_union(&mut self) -> TypeSpec {
        let mut members = vec![self.parse_atom()];
        loop {
            self.skip_ws();
            if self.peek() == Some(b'|') {
                self.pos += 1;
                members.push(self.parse_atom());
            } else {
                break;
            }
        }
        if members.len() == 1 {
            members.pop().unwrap()
        } else {
            TypeSpec::union(members)
        }
    }

    fn parse_atom(&mut self) -> TypeSpec {
        self.skip_ws();
        match self.peek() {
            Some(b'"') | Some(b'\'') => {
                let quote = self.peek().unwrap();
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.text.len() && self.text.as_bytes()[self.pos] != quote {
                    self.pos += 1;
                }
                let inner = &self.text[start..self.pos];
                if self.pos < self.text.len() {
                    self.pos += 1;
                }
                // Forward reference: parse the inner expression.
                let mut p = Parser { text: inner, pos: 0, ctx: self.ctx };
                let spec = p.parse_union();
                p.skip_ws();
                if p.pos < inner.len() {
                    opaque(inner)
                } else {
                    spec
                }
            }
            Some(b'[') => {
                // Bare bracket list (e.g. Callable's argument list): keep
                // the items as an anonymous group.
                let items = self.parse_bracket_list();
                TypeSpec::generic("", "", items)
            }
            Some(b'.') => {
                // Ellipsis
                let rest = &self.text[self.pos..];
                if rest.starts_with("...") {
                    self.pos += 3;
                    TypeSpec::ellipsis()
                } else {
                    self.pos += 1;
                    TypeSpec::any()
                }
            }
            Some(c) if c == b'_' || (c as char).is_alphabetic() => {
                let path = self.parse_dotted_name();
                self.skip_ws();
                let args = if self.peek() == Some(b'[') {
                    Some(self.parse_bracket_list())
                } else {
                    None
                };
                self.resolve_name(&path, args)
            }
            Some(_) => {
                // Number or anything else: opaque literal token.
                let start = self.pos;
                while self.pos < self.text.len()
                    && !matches!(self.text.as_bytes()[self.pos], b',' | b']' | b'|' | b'[')
                {
                    self.pos += 1;
                }
                opaque(&self.text[start..self.pos])
            }
            None => TypeSpec::any(),
        }
    }

    fn parse_dotted_name(&mut self) -> Vec<&'a str> {
        let mut parts = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.text.len() {
                let c = self.text[self.pos..].chars().next().unwrap();
                if c == '_' || c.is_alphanumeric() {
                    self.pos += c.len_utf8();
                } else {
                    break;
                }
            }
            parts.push(&self.text[start..self.pos]);
            self.skip_ws();
            if self.peek() == Some(b'.')
                && !self.text[self.pos..].starts_with("...")
            {
                self.pos += 1;
            } else {
                break;
            }
        }
        parts
    }

    fn parse_bracket_list(&mut self) -> Vec<TypeSpec> {
        debug_assert_eq!(self.peek(), Some(b'['));
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(b',') => {
                    self.pos += 1;
                }
                None => break,
                _ => items.push(self.parse_union()),
            }
        }
        items
    }

    fn resolve_name(&self, path: &[&str], args: Option<Vec<TypeSpec>>) -> TypeSpec {
        let joined = path.join(".");
        let head = path[0];

        // Special forms first.
        if path.len() == 1 || (path.len() == 2 && (head == "typing" || head == "typing_extensions"))
        {
            let last = *path.last().unwrap();
            match last {
                "None" => return TypeSpec::none(),
                "Any" => return TypeSpec::any(),
                "Self" => return TypeSpec::self_type(),
                "Never" | "NoReturn" => return TypeSpec::never(),
                "Optional" => {
                    let mut members = args.unwrap_or_default();
                    members.push(TypeSpec::none());
                    return TypeSpec::union(members);
                }
                "Union" => {
                    return TypeSpec::union(args.unwrap_or_default());
                }
                _ => {}
            }
            if let Some(builtin) = typing_alias(last) {
                return self.finish("builtins", builtin, args);
            }
            if TYPING_PROTOCOLS.contains(&last) {
                return TypeSpec::protocol("typing", last, args.unwrap_or_default());
            }
        }

        if path.len() == 1 {
            // Local class?
            if let Some(q) = self
                .ctx
                .local_classes
                .iter()
                .find(|q| q.as_str() == head || q.ends_with(&format!(".{head}")))
            {
                return self.finish(self.ctx.module, q.clone().as_str(), args);
            }
            match self.ctx.imports.lookup(head) {
                Some(ImportBinding::Item { module, item, .. }) => {
                    return self.finish(module, item, args);
                }
                Some(ImportBinding::Module { .. }) => {}
                None => {}
            }
            if BUILTIN_TYPES.contains(&head) {
                return self.finish("builtins", head, args);
            }
            // Unresolved bare name: keep it, attributed to this module.
            return self.finish(self.ctx.module, head, args);
        }

        // Dotted: resolve the head as a module alias when possible.
        if let Some(ImportBinding::Module { module, .. }) = self.ctx.imports.lookup(head) {
            let rest = path[1..].join(".");
            return self.finish(module, &rest, args);
        }
        if let Some(ImportBinding::Item { module, item, .. }) = self.ctx.imports.lookup(head) {
            let mut full = item.clone();
            for p in &path[1..] {
                full.push('.');
                full.push_str(p);
            }
            return self.finish(module, &full, args);
        }
        // Fully dotted path used directly (e.g. collections.abc.Iterator).
        let (module, name) = joined.rsplit_once('.').unwrap();
        self.finish(module, name, args)
    }

    fn finish(&self, module: &str, name: &str, args: Option<Vec<TypeSpec>>) -> TypeSpec {
        match args {
            Some(args) => TypeSpec::generic(module, name, args),
            None => TypeSpec::concrete(module, name),
        }
    }
}

/// Structural "admits" check used by override widening and its tests:
/// `is_same_or_unions_into` is true when `sub` equals `sup` or is a member
/// of `sup` when `sup` is a union.
pub fn member_of(sub: &TypeSpec, sup: &TypeSpec) -> bool {
    if sub == sup {
        return true;
    }
    sup.kind() == TypeKind::Union && sup.args().contains(sub)
}
