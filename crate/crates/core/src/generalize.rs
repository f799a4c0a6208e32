//! Call-trace filtering and generalization.
//!
//! Rare traces are dropped first: traces are ordered by descending count and
//! the minimal prefix covering the requested share of calls is kept; the
//! remainder becomes the anomaly report. The retained traces are then
//! transposed into per-position columns and each column is rebuilt:
//!
//! - if every entry is a specialization of one generic, the rebuild recurses
//!   into the generic's argument columns;
//! - if the column's across-trace type sequence occurs at more than one
//!   position and contains at least two distinct types, the positions share
//!   a type variable constrained to those types;
//! - otherwise the column becomes the simplified union of its distinct types.
//!
//! Array-shape columns are generalized separately (see [`crate::shape`]),
//! replacing dimensions that vary together with shared dimension variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::{CallTrace, ClassTable, FunctionKey, TypeKind, TypeSpec};
use crate::shape::{self, ShapeColumn};

/// One parameter of a generalized signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigParam {
    pub name: String,
    pub spec: TypeSpec,
    pub has_default: bool,
}

/// Generalized per-function result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub fn_key: FunctionKey,
    pub params: Vec<SigParam>,
    pub return_type: TypeSpec,
    /// Constraint sets per typevar id, in first-seen order.
    pub typevars: BTreeMap<u32, Vec<TypeSpec>>,
    pub imports_needed: BTreeSet<(String, String)>,
}

impl Signature {
    /// Recompute `imports_needed` from the current parameter and return
    /// specs plus typevar constraints.
    pub fn refresh_imports(&mut self) {
        let mut set = BTreeSet::new();
        for p in &self.params {
            collect_imports(&p.spec, &mut set);
        }
        collect_imports(&self.return_type, &mut set);
        for constraints in self.typevars.values() {
            for c in constraints {
                collect_imports(c, &mut set);
            }
        }
        self.imports_needed = set;
    }

    /// Drop typevar entries no longer referenced by any param or return.
    pub fn prune_typevars(&mut self) {
        let mut used = Vec::new();
        for p in &self.params {
            p.spec.typevar_ids(&mut used);
        }
        self.return_type.typevar_ids(&mut used);
        self.typevars.retain(|id, _| used.contains(id));
    }
}

/// Imports required to render `spec`: every concrete, protocol, or
/// shape-annotated name whose module is neither empty nor `builtins`.
pub fn collect_imports(spec: &TypeSpec, out: &mut BTreeSet<(String, String)>) {
    let module = spec.module();
    if !module.is_empty() && module != "builtins" {
        // Dotted names import their root component.
        let root = spec.name().split('.').next().unwrap_or(spec.name());
        out.insert((module.to_string(), root.to_string()));
    }
    for a in spec.args() {
        collect_imports(a, out);
    }
}

/// A trace excluded by coverage filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub trace: CallTrace,
    pub count: u64,
    /// This trace's share of all calls to the function.
    pub share: f64,
}

/// Result of [`filter_traces`].
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub retained: Vec<(CallTrace, u64)>,
    pub anomalies: Vec<Anomaly>,
}

/// Keep the minimal prefix of traces (by descending count, ties broken by
/// canonical form) whose cumulative share of calls reaches `coverage`.
pub fn filter_traces(traces: &[(CallTrace, u64)], coverage: f64) -> FilterOutcome {
    assert!(!traces.is_empty(), "filter_traces requires at least one trace");
    assert!(coverage > 0.0 && coverage <= 1.0, "coverage must be in (0, 1]");
    let mut sorted: Vec<(CallTrace, u64)> = traces.to_vec();
    sorted.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.canon_key().cmp(&tb.canon_key())));
    let total: u64 = sorted.iter().map(|(_, c)| *c).sum();
    let mut cumulative = 0u64;
    let mut cut = sorted.len();
    for (i, (_, c)) in sorted.iter().enumerate() {
        cumulative += *c;
        if cumulative as f64 >= coverage * total as f64 {
            cut = i + 1;
            break;
        }
    }
    let anomalies = sorted[cut..]
        .iter()
        .map(|(t, c)| Anomaly { trace: t.clone(), count: *c, share: *c as f64 / total as f64 })
        .collect();
    sorted.truncate(cut);
    FilterOutcome { retained: sorted, anomalies }
}

/// Union simplification: collapse mixed builtin numerics to the widest
/// member present (the numeric tower), absorb members that are subclasses
/// of other members, and replace the whole set with a common supertype when
/// one defines every attribute the members share. `None` members survive
/// and render as optionals.
pub fn simplify_union(types: &[TypeSpec], classes: &ClassTable) -> TypeSpec {
    let mut members: Vec<TypeSpec> = Vec::new();
    for t in types {
        if t.kind() == TypeKind::Union {
            members.extend(t.args().iter().cloned());
        } else {
            members.push(t.clone());
        }
    }
    members.sort_by(|a, b| a.canon_key().cmp(&b.canon_key()));
    members.dedup();
    if members.len() > 1 {
        members.retain(|t| t.kind() != TypeKind::Never);
    }
    if members.len() == 1 {
        return members.pop().unwrap();
    }

    // Numeric tower: int -> float -> complex.
    let numeric: Vec<&TypeSpec> = members.iter().filter(|t| t.is_builtin_numeric()).collect();
    if numeric.len() >= 2 {
        let widest = ["complex", "float", "int"]
            .iter()
            .find(|n| numeric.iter().any(|t| t.name() == **n))
            .unwrap()
            .to_string();
        members.retain(|t| !t.is_builtin_numeric());
        members.push(TypeSpec::concrete("builtins", &widest));
        members.sort_by(|a, b| a.canon_key().cmp(&b.canon_key()));
    }

    // Absorb members into other members that are their recorded ancestors.
    if members.len() > 1 && !classes.is_empty() {
        let snapshot = members.clone();
        members.retain(|t| {
            !snapshot
                .iter()
                .any(|other| other != t && classes.is_subclass(t, other))
        });
    }

    // Whole-set replacement by a common supertype covering the shared
    // attribute surface.
    if members.len() > 1 {
        if let Some(sup) = common_supertype(&members, classes) {
            return sup;
        }
    }

    TypeSpec::union(members)
}

/// Find the most derived common ancestor of all members that defines every
/// attribute the members share, if any. Requires recorded class info for
/// every member.
fn common_supertype(members: &[TypeSpec], classes: &ClassTable) -> Option<TypeSpec> {
    if classes.is_empty() || members.iter().any(|t| t.kind() != TypeKind::Concrete) {
        return None;
    }
    let infos: Option<Vec<_>> = members.iter().map(|t| classes.get_for(t)).collect();
    let infos = infos?;
    let mut shared: BTreeSet<&String> = infos[0].attrs.iter().collect();
    for info in &infos[1..] {
        let theirs: BTreeSet<&String> = info.attrs.iter().collect();
        shared = shared.intersection(&theirs).cloned().collect();
    }
    // Candidates: classes on every member's MRO, scored by MRO depth.
    let mut candidates: Vec<(String, String)> = infos[0].mro.clone();
    for info in &infos[1..] {
        candidates.retain(|c| info.mro.contains(c));
    }
    candidates.retain(|(m, q)| !(m == "builtins" && q == "object"));
    let mut best: Option<(usize, TypeSpec)> = None;
    for (m, q) in candidates {
        let Some(cinfo) = classes.get(&m, &q) else { continue };
        let cattrs: BTreeSet<&String> = cinfo.attrs.iter().collect();
        if !shared.iter().all(|a| cattrs.contains(*a)) {
            continue;
        }
        let depth = cinfo.mro.len();
        let spec = TypeSpec::concrete(&m, &q);
        if best.as_ref().map(|(d, _)| depth > *d).unwrap_or(true) {
            best = Some((depth, spec));
        }
    }
    best.map(|(_, s)| s)
}

/// Options controlling generalization.
#[derive(Debug, Clone, Default)]
pub struct GeneralizeOptions {
    pub infer_shapes: bool,
}

/// Output of [`generalize`].
#[derive(Debug, Clone)]
pub struct Generalized {
    pub signature: Signature,
    pub warnings: Vec<String>,
}

/// Distinguished non-parameter slots.
const RETURN_SLOT: &str = "\u{0}return";
const YIELD_SLOT: &str = "\u{0}yield";
const SEND_SLOT: &str = "\u{0}send";

type Column = Vec<Option<TypeSpec>>;

struct Ctx<'a> {
    classes: &'a ClassTable,
    options: &'a GeneralizeOptions,
    seq_counts: HashMap<String, usize>,
    typevar_memo: HashMap<String, u32>,
    typevars: BTreeMap<u32, Vec<TypeSpec>>,
    next_typevar: u32,
    shape_memo: HashMap<String, String>,
    next_dimvar: u32,
    warnings: Vec<String>,
}

fn column_seq_key(column: &Column) -> String {
    let mut s = String::new();
    for entry in column {
        match entry {
            Some(t) => s.push_str(&t.canon_key()),
            None => s.push('_'),
        }
        s.push('|');
    }
    s
}

/// True when every present entry is a parameterized type with the same
/// constructor and arity, so the column can be transposed into its
/// argument columns.
fn uniform_generic(column: &Column) -> Option<(TypeKind, String, String, usize)> {
    let mut sig: Option<(TypeKind, String, String, usize)> = None;
    for entry in column.iter().flatten() {
        match entry.kind() {
            TypeKind::Generic | TypeKind::Protocol if !entry.args().is_empty() => {
                let this = (
                    entry.kind(),
                    entry.module().to_string(),
                    entry.name().to_string(),
                    entry.args().len(),
                );
                match &sig {
                    None => sig = Some(this),
                    Some(s) if *s == this => {}
                    Some(_) => return None,
                }
            }
            _ => return None,
        }
    }
    sig
}

fn shape_column(column: &Column) -> Option<ShapeColumn> {
    shape::column_from_specs(column)
}

fn walk_count(column: &Column, ctx: &mut Ctx<'_>) {
    if column.iter().flatten().next().is_none() {
        return;
    }
    if let Some((_, _, _, arity)) = uniform_generic(column) {
        for i in 0..arity {
            let sub: Column = column
                .iter()
                .map(|e| e.as_ref().map(|t| t.args()[i].clone()))
                .collect();
            walk_count(&sub, ctx);
        }
        return;
    }
    if ctx.options.infer_shapes && shape_column(column).is_some() {
        return;
    }
    *ctx.seq_counts.entry(column_seq_key(column)).or_insert(0) += 1;
}

fn rebuild(column: &Column, ctx: &mut Ctx<'_>) -> TypeSpec {
    let present: Vec<&TypeSpec> = column.iter().flatten().collect();
    if present.is_empty() {
        return TypeSpec::any();
    }
    if let Some((kind, module, name, arity)) = uniform_generic(column) {
        let mut args = Vec::with_capacity(arity);
        for i in 0..arity {
            let sub: Column = column
                .iter()
                .map(|e| e.as_ref().map(|t| t.args()[i].clone()))
                .collect();
            args.push(rebuild(&sub, ctx));
        }
        return match kind {
            TypeKind::Protocol => TypeSpec::protocol(&module, &name, args),
            _ => TypeSpec::generic(&module, &name, args),
        };
    }
    if ctx.options.infer_shapes {
        if let Some(col) = shape_column(column) {
            return shape::generalize_column(&col, &mut ctx.shape_memo, &mut ctx.next_dimvar);
        }
        // Shape annotations that cannot be generalized together (mixed
        // ranks or kinds) fall back to their bare array types.
        if column.iter().flatten().any(|t| t.kind() == TypeKind::Shaped) {
            let stripped: Column = column
                .iter()
                .map(|e| {
                    e.as_ref().map(|t| {
                        if t.kind() == TypeKind::Shaped {
                            t.args()[0].clone()
                        } else {
                            t.clone()
                        }
                    })
                })
                .collect();
            ctx.warnings.push(
                "mixed array ranks or element kinds at one position; shape annotation dropped"
                    .to_string(),
            );
            return rebuild(&stripped, ctx);
        }
    }
    let mut distinct: Vec<TypeSpec> = Vec::new();
    for t in &present {
        if !distinct.contains(t) {
            distinct.push((*t).clone());
        }
    }
    let key = column_seq_key(column);
    if distinct.len() >= 2 && ctx.seq_counts.get(&key).copied().unwrap_or(0) >= 2 {
        let id = match ctx.typevar_memo.get(&key) {
            Some(id) => *id,
            None => {
                let id = ctx.next_typevar;
                ctx.next_typevar += 1;
                ctx.typevar_memo.insert(key, id);
                ctx.typevars.insert(id, distinct.clone());
                id
            }
        };
        return TypeSpec::typevar(id);
    }
    simplify_union(&distinct, ctx.classes)
}

/// Generalize retained traces into a signature per Algorithm-style column
/// rebuilding. Traces are aligned by parameter name; parameters absent from
/// a trace contribute no entry for it.
pub fn generalize(
    fn_key: &FunctionKey,
    retained: &[(CallTrace, u64)],
    classes: &ClassTable,
    options: &GeneralizeOptions,
) -> Generalized {
    assert!(!retained.is_empty(), "generalize requires at least one retained trace");
    let traces: Vec<&CallTrace> = retained.iter().map(|(t, _)| t).collect();

    // Parameter order: first-seen across traces.
    let mut param_names: Vec<String> = Vec::new();
    for t in &traces {
        for (n, _) in t.args() {
            if !param_names.iter().any(|p| p == n) {
                param_names.push(n.clone());
            }
        }
    }

    let mut slots: Vec<(String, Column)> = Vec::new();
    for name in &param_names {
        let column: Column = traces
            .iter()
            .map(|t| t.args().iter().find(|(n, _)| n == name).map(|(_, ty)| ty.clone()))
            .collect();
        slots.push((name.clone(), column));
    }
    slots.push((
        RETURN_SLOT.to_string(),
        traces.iter().map(|t| Some(t.return_type().clone())).collect(),
    ));
    let has_yield = traces.iter().any(|t| t.yield_type().is_some());
    if has_yield {
        slots.push((
            YIELD_SLOT.to_string(),
            traces.iter().map(|t| t.yield_type().cloned()).collect(),
        ));
    }
    let has_send = traces.iter().any(|t| t.send_type().is_some());
    if has_send {
        slots.push((
            SEND_SLOT.to_string(),
            traces.iter().map(|t| t.send_type().cloned()).collect(),
        ));
    }

    let mut ctx = Ctx {
        classes,
        options,
        seq_counts: HashMap::new(),
        typevar_memo: HashMap::new(),
        typevars: BTreeMap::new(),
        next_typevar: 1,
        shape_memo: HashMap::new(),
        next_dimvar: 1,
        warnings: Vec::new(),
    };
    for (_, column) in &slots {
        walk_count(column, &mut ctx);
    }

    let mut rebuilt: BTreeMap<&str, TypeSpec> = BTreeMap::new();
    let mut params = Vec::new();
    for (name, column) in &slots {
        let spec = rebuild(column, &mut ctx);
        if name == RETURN_SLOT || name == YIELD_SLOT || name == SEND_SLOT {
            rebuilt.insert(name.as_str(), spec);
        } else {
            let has_default = column.iter().any(|e| e.is_none());
            params.push(SigParam { name: name.clone(), spec, has_default });
        }
    }

    let plain_return = rebuilt.remove(RETURN_SLOT).expect("return slot present");
    let return_type = if has_yield {
        let yield_t = rebuilt.remove(YIELD_SLOT).unwrap_or_else(TypeSpec::any);
        let send_t = rebuilt.remove(SEND_SLOT);
        compose_generator(yield_t, send_t, plain_return)
    } else {
        plain_return
    };

    let mut signature = Signature {
        fn_key: fn_key.clone(),
        params,
        return_type,
        typevars: ctx.typevars,
        imports_needed: BTreeSet::new(),
    };
    signature.refresh_imports();
    Generalized { signature, warnings: ctx.warnings }
}

/// Render slot types as `Generator[yield, send, return]`, collapsing to
/// `Iterator[yield]` when the send and return slots carry no information.
fn compose_generator(yield_t: TypeSpec, send_t: Option<TypeSpec>, return_t: TypeSpec) -> TypeSpec {
    let send_trivial =
        send_t.as_ref().map(|t| t.kind() == TypeKind::NoneType).unwrap_or(true);
    let return_trivial =
        matches!(return_t.kind(), TypeKind::NoneType | TypeKind::Never);
    if send_trivial && return_trivial {
        TypeSpec::protocol("typing", "Iterator", vec![yield_t])
    } else {
        TypeSpec::protocol(
            "typing",
            "Generator",
            vec![yield_t, send_t.unwrap_or_else(TypeSpec::none), return_t],
        )
    }
}
