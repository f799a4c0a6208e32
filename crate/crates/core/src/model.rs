//! Core data model: inferred types, function identities, call traces, and
//! the trace store that buffers observations between collection and analysis.
//!
//! [`TypeSpec`] values are immutable once built; all constructors normalize
//! their input so that structural equality and hashing behave as documented
//! (union members are kept flattened, deduplicated, and canonically sorted).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Classification of a [`TypeSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeKind {
    /// A nominal, importable type such as `int` or `pkg.Widget`.
    #[serde(rename = "concrete")]
    Concrete,
    /// A parameterized type: `list[int]`, `dict[str, float]`.
    #[serde(rename = "generic")]
    Generic,
    /// A union of two or more member types.
    #[serde(rename = "union")]
    Union,
    /// A signature-scoped type variable; see `typevar_id`.
    #[serde(rename = "typevar")]
    TypeVar,
    /// The receiver type of the enclosing class (`Self`).
    #[serde(rename = "self")]
    SelfType,
    /// The empty (bottom) type.
    #[serde(rename = "never")]
    Never,
    /// Unknown; renders as `Any`.
    #[serde(rename = "any")]
    Any,
    /// The `None` type.
    #[serde(rename = "none")]
    NoneType,
    /// A structural (protocol) type such as `Iterator` or `ValuesView`.
    #[serde(rename = "protocol")]
    Protocol,
    /// A numerical array annotated with element kind and shape.
    #[serde(rename = "shape-annotated")]
    Shaped,
}

/// One axis of an observed or generalized array shape: either a literal
/// extent or a dimension variable name such as `D1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeDim {
    Lit(u64),
    Var(String),
}

impl fmt::Display for ShapeDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeDim::Lit(n) => write!(f, "{n}"),
            ShapeDim::Var(v) => write!(f, "{v}"),
        }
    }
}

/// Structured representation of an inferred type.
///
/// Fields are private; use the constructors, which enforce the invariants:
/// unions are flattened, deduplicated, sorted, and have at least two members;
/// typevars carry no module/name; `Never` has no arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeSpec {
    kind: TypeKind,
    module: String,
    name: String,
    args: Vec<TypeSpec>,
    typevar_id: u32,
    shape: Option<Vec<ShapeDim>>,
}

impl TypeSpec {
    /// A nominal type. `module` is empty or `"builtins"` for types needing
    /// no import.
    pub fn concrete(module: &str, name: &str) -> Self {
        TypeSpec {
            kind: TypeKind::Concrete,
            module: module.to_string(),
            name: name.to_string(),
            args: Vec::new(),
            typevar_id: 0,
            shape: None,
        }
    }

    /// A parameterized type, e.g. `generic("builtins", "list", vec![int])`.
    pub fn generic(module: &str, name: &str, args: Vec<TypeSpec>) -> Self {
        TypeSpec {
            kind: TypeKind::Generic,
            module: module.to_string(),
            name: name.to_string(),
            args,
            typevar_id: 0,
            shape: None,
        }
    }

    /// A structural protocol type, e.g. `protocol("typing", "Iterator", vec![int])`.
    pub fn protocol(module: &str, name: &str, args: Vec<TypeSpec>) -> Self {
        TypeSpec {
            kind: TypeKind::Protocol,
            module: module.to_string(),
            name: name.to_string(),
            args,
            typevar_id: 0,
            shape: None,
        }
    }

    /// A union of the given members. Flattens nested unions, drops
    /// duplicates, sorts canonically, and collapses singletons. `Never`
    /// members are absorbed when any other member is present.
    pub fn union(members: impl IntoIterator<Item = TypeSpec>) -> Self {
        let mut flat = Vec::new();
        for m in members {
            match m.kind {
                TypeKind::Union => flat.extend(m.args),
                _ => flat.push(m),
            }
        }
        let non_never: Vec<TypeSpec> =
            flat.iter().filter(|t| t.kind != TypeKind::Never).cloned().collect();
        if !non_never.is_empty() {
            flat = non_never;
        }
        flat.sort_by(|a, b| a.canon_key().cmp(&b.canon_key()));
        flat.dedup();
        match flat.len() {
            0 => TypeSpec::never(),
            1 => flat.pop().unwrap(),
            _ => TypeSpec {
                kind: TypeKind::Union,
                module: String::new(),
                name: String::new(),
                args: flat,
                typevar_id: 0,
                shape: None,
            },
        }
    }

    /// A type variable with the given 1-based id.
    pub fn typevar(id: u32) -> Self {
        debug_assert!(id >= 1);
        TypeSpec {
            kind: TypeKind::TypeVar,
            module: String::new(),
            name: String::new(),
            args: Vec::new(),
            typevar_id: id,
            shape: None,
        }
    }

    pub fn self_type() -> Self {
        TypeSpec { kind: TypeKind::SelfType, ..TypeSpec::marker() }
    }

    pub fn never() -> Self {
        TypeSpec { kind: TypeKind::Never, ..TypeSpec::marker() }
    }

    pub fn any() -> Self {
        TypeSpec { kind: TypeKind::Any, ..TypeSpec::marker() }
    }

    pub fn none() -> Self {
        TypeSpec { kind: TypeKind::NoneType, ..TypeSpec::marker() }
    }

    /// Literal `...` as it appears in `tuple[int, ...]`.
    pub fn ellipsis() -> Self {
        TypeSpec::concrete("", "...")
    }

    /// A shape-annotated array type. `module`/`name` identify the element
    /// kind (e.g. `jaxtyping.Float64`); `base` is the array type itself.
    pub fn shaped(module: &str, name: &str, base: TypeSpec, dims: Vec<ShapeDim>) -> Self {
        TypeSpec {
            kind: TypeKind::Shaped,
            module: module.to_string(),
            name: name.to_string(),
            args: vec![base],
            typevar_id: 0,
            shape: Some(dims),
        }
    }

    fn marker() -> Self {
        TypeSpec {
            kind: TypeKind::Any,
            module: String::new(),
            name: String::new(),
            args: Vec::new(),
            typevar_id: 0,
            shape: None,
        }
    }

    pub fn kind(&self) -> TypeKind {
        self.kind
    }

    pub fn module(&self) -> &str {
        &self.module
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[TypeSpec] {
        &self.args
    }

    pub fn typevar_id(&self) -> u32 {
        self.typevar_id
    }

    pub fn shape(&self) -> Option<&[ShapeDim]> {
        self.shape.as_deref()
    }

    /// True for `int`, `float`, and `complex` from builtins.
    pub fn is_builtin_numeric(&self) -> bool {
        self.kind == TypeKind::Concrete
            && (self.module.is_empty() || self.module == "builtins")
            && matches!(self.name.as_str(), "int" | "float" | "complex")
    }

    /// Replace every typevar with the given id by `with`, recursively.
    pub fn substitute_typevar(&self, id: u32, with: &TypeSpec) -> TypeSpec {
        if self.kind == TypeKind::TypeVar && self.typevar_id == id {
            return with.clone();
        }
        let mut out = self.clone();
        out.args = self.args.iter().map(|a| a.substitute_typevar(id, with)).collect();
        if out.kind == TypeKind::Union {
            TypeSpec::union(out.args)
        } else {
            out
        }
    }

    /// Collect the ids of all typevars appearing in this spec.
    pub fn typevar_ids(&self, out: &mut Vec<u32>) {
        if self.kind == TypeKind::TypeVar {
            out.push(self.typevar_id);
        }
        for a in &self.args {
            a.typevar_ids(out);
        }
    }

    /// A canonical textual key; total order used for deterministic sorting
    /// of union members, trace tie-breaks, and serialized output.
    pub fn canon_key(&self) -> String {
        let mut s = String::new();
        self.write_canon(&mut s);
        s
    }

    fn write_canon(&self, s: &mut String) {
        use std::fmt::Write;
        let tag = match self.kind {
            TypeKind::Concrete => "c",
            TypeKind::Generic => "g",
            TypeKind::Union => "u",
            TypeKind::TypeVar => "v",
            TypeKind::SelfType => "s",
            TypeKind::Never => "0",
            TypeKind::Any => "a",
            TypeKind::NoneType => "n",
            TypeKind::Protocol => "p",
            TypeKind::Shaped => "h",
        };
        let _ = write!(s, "{tag}:{}:{}:{}", self.module, self.name, self.typevar_id);
        if let Some(dims) = &self.shape {
            s.push('<');
            for d in dims {
                let _ = write!(s, "{d} ");
            }
            s.push('>');
        }
        s.push('[');
        for a in &self.args {
            a.write_canon(s);
            s.push(',');
        }
        s.push(']');
    }
}

/// Stable identity of an annotatable function: defining file, dotted path
/// within the module, and the first line of the definition statement
/// (the first decorator line, when decorators are present).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionKey {
    pub source_path: PathBuf,
    pub qualified_name: String,
    pub first_line: u32,
}

impl FunctionKey {
    pub fn new(source_path: impl Into<PathBuf>, qualified_name: &str, first_line: u32) -> Self {
        FunctionKey {
            source_path: source_path.into(),
            qualified_name: qualified_name.to_string(),
            first_line,
        }
    }

    /// Dotted prefix before the final name component, if any. For methods
    /// this is the defining class's qualified name.
    pub fn qualified_parent(&self) -> Option<&str> {
        self.qualified_name.rsplit_once('.').map(|(p, _)| p)
    }
}

impl fmt::Display for FunctionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.source_path.display(), self.qualified_name, self.first_line)
    }
}

/// The types observed for one sampled invocation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CallTrace {
    args: Vec<(String, TypeSpec)>,
    return_type: TypeSpec,
    yield_type: Option<TypeSpec>,
    send_type: Option<TypeSpec>,
}

impl CallTrace {
    pub fn new(
        args: Vec<(String, TypeSpec)>,
        return_type: TypeSpec,
        yield_type: Option<TypeSpec>,
        send_type: Option<TypeSpec>,
    ) -> Self {
        CallTrace { args, return_type, yield_type, send_type }
    }

    pub fn args(&self) -> &[(String, TypeSpec)] {
        &self.args
    }

    pub fn return_type(&self) -> &TypeSpec {
        &self.return_type
    }

    pub fn yield_type(&self) -> Option<&TypeSpec> {
        self.yield_type.as_ref()
    }

    pub fn send_type(&self) -> Option<&TypeSpec> {
        self.send_type.as_ref()
    }

    pub fn is_generator(&self) -> bool {
        self.yield_type.is_some()
    }

    /// Canonical key for deterministic ordering among traces.
    pub fn canon_key(&self) -> String {
        let mut s = String::new();
        for (n, t) in &self.args {
            s.push_str(n);
            s.push('=');
            s.push_str(&t.canon_key());
            s.push(';');
        }
        s.push_str("->");
        s.push_str(&self.return_type.canon_key());
        if let Some(y) = &self.yield_type {
            s.push_str(";y=");
            s.push_str(&y.canon_key());
        }
        if let Some(v) = &self.send_type {
            s.push_str(";s=");
            s.push_str(&v.canon_key());
        }
        s
    }
}

/// Saturation bound for trace counts.
pub const COUNT_CAP: u64 = u64::MAX / 2;

/// Multiset of call traces per function, with occurrence counts.
#[derive(Debug, Clone, Default)]
pub struct TraceStore {
    entries: BTreeMap<FunctionKey, Vec<(CallTrace, u64)>>,
}

impl PartialEq for TraceStore {
    fn eq(&self, other: &Self) -> bool {
        if self.entries.len() != other.entries.len() {
            return false;
        }
        self.entries.keys().all(|k| {
            other.entries.contains_key(k) && self.sorted_traces(k) == other.sorted_traces(k)
        })
    }
}

impl Eq for TraceStore {}

impl TraceStore {
    pub fn new() -> Self {
        TraceStore::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Record one observation of `trace` for `fn_key`, saturating at
    /// [`COUNT_CAP`].
    pub fn record(&mut self, fn_key: FunctionKey, trace: CallTrace) {
        self.add(fn_key, trace, 1);
    }

    /// Add `count` observations of `trace`.
    pub fn add(&mut self, fn_key: FunctionKey, trace: CallTrace, count: u64) {
        let traces = self.entries.entry(fn_key).or_default();
        for (t, c) in traces.iter_mut() {
            if *t == trace {
                *c = (*c + count).min(COUNT_CAP);
                return;
            }
        }
        traces.push((trace, count.min(COUNT_CAP)));
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionKey> {
        self.entries.keys()
    }

    pub fn traces(&self, fn_key: &FunctionKey) -> &[(CallTrace, u64)] {
        self.entries.get(fn_key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FunctionKey, &[(CallTrace, u64)])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Total number of recorded calls for one function.
    pub fn total_count(&self, fn_key: &FunctionKey) -> u64 {
        self.traces(fn_key).iter().map(|(_, c)| c).sum()
    }

    /// Merge another store into this one; counts are summed per
    /// (function, trace). Commutative and associative up to ordering.
    pub fn merge_from(&mut self, other: TraceStore) {
        for (k, traces) in other.entries {
            for (t, c) in traces {
                self.add(k.clone(), t, c);
            }
        }
    }

    /// Traces of one function in canonical order: descending count, ties
    /// broken by the serialized form.
    pub fn sorted_traces(&self, fn_key: &FunctionKey) -> Vec<(CallTrace, u64)> {
        let mut v: Vec<(CallTrace, u64)> = self.traces(fn_key).to_vec();
        v.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.canon_key().cmp(&tb.canon_key())));
        v
    }
}

/// Merge two stores into a new one. Counts are summed per entry.
pub fn merge_stores(a: &TraceStore, b: &TraceStore) -> TraceStore {
    let mut out = a.clone();
    out.merge_from(b.clone());
    out
}

/// Runtime facts about one class observed during tracing: its ancestry and
/// attribute surface, captured so the analysis stage can reason about
/// overrides and common supertypes without re-running the program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub module: String,
    pub qualname: String,
    /// Defining source file, when known.
    pub path: Option<String>,
    /// Method-resolution order, self first, as (module, qualname) pairs.
    pub mro: Vec<(String, String)>,
    /// Sorted attribute/method names.
    pub attrs: Vec<String>,
}

impl ClassInfo {
    pub fn type_id(&self) -> (String, String) {
        (self.module.clone(), self.qualname.clone())
    }
}

/// Table of observed classes keyed by (module, qualname).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassTable {
    by_class: BTreeMap<(String, String), ClassInfo>,
}

impl ClassTable {
    pub fn new() -> Self {
        ClassTable::default()
    }

    pub fn insert(&mut self, info: ClassInfo) {
        self.by_class.insert(info.type_id(), info);
    }

    pub fn get(&self, module: &str, qualname: &str) -> Option<&ClassInfo> {
        self.by_class.get(&(module.to_string(), qualname.to_string()))
    }

    /// Look up by the rendered type of a spec (module + name).
    pub fn get_for(&self, spec: &TypeSpec) -> Option<&ClassInfo> {
        self.get(spec.module(), spec.name())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassInfo> {
        self.by_class.values()
    }

    pub fn is_empty(&self) -> bool {
        self.by_class.is_empty()
    }

    /// True when `sub` has `sup` in its recorded MRO (strictly or as itself).
    pub fn is_subclass(&self, sub: &TypeSpec, sup: &TypeSpec) -> bool {
        if sub == sup {
            return true;
        }
        let Some(info) = self.get_for(sub) else { return false };
        info.mro.iter().any(|(m, q)| m == sup.module() && q == sup.name())
    }
}
