//! Brute-force reference implementations used to cross-check the fast
//! paths. These deliberately share no logic with [`crate::generalize`]:
//! column grouping is quadratic pairwise comparison, union simplification
//! re-derives the numeric tower from scratch, and trace filtering
//! enumerates prefixes. Slow by design; correctness anchors only.

use std::collections::BTreeMap;

use crate::generalize::{SigParam, Signature};
use crate::model::{CallTrace, FunctionKey, TypeKind, TypeSpec};

/// Deterministic splitmix64 for seed-addressed random cases.
pub struct CaseRng(u64);

impl CaseRng {
    pub fn new(seed: u64) -> Self {
        CaseRng(seed)
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n.max(1)
    }
}

/// One random type from a 5-type universe with container nesting up to
/// `depth` levels (list and dict constructors).
pub fn random_type(rng: &mut CaseRng, depth: u32) -> TypeSpec {
    let base = |rng: &mut CaseRng| {
        let names = ["int", "str", "float", "bool", "bytes"];
        TypeSpec::concrete("builtins", names[rng.below(names.len() as u64) as usize])
    };
    if depth == 0 {
        return base(rng);
    }
    match rng.below(8) {
        0 | 1 => TypeSpec::generic("builtins", "list", vec![random_type(rng, depth - 1)]),
        2 => TypeSpec::generic(
            "builtins",
            "dict",
            vec![TypeSpec::concrete("builtins", "str"), random_type(rng, depth - 1)],
        ),
        _ => base(rng),
    }
}

/// A random trace set: up to 4 traces over up to 3 argument positions with
/// aligned parameter names, nesting depth <= 2. Generated column-major,
/// sometimes reusing an earlier column's sequence (possibly wrapped in a
/// container) so cross-position patterns occur often enough to exercise
/// the typevar branch.
pub fn random_trace_set(seed: u64) -> Vec<(CallTrace, u64)> {
    let mut rng = CaseRng::new(seed);
    let n_traces = 1 + rng.below(4) as usize;
    let n_args = rng.below(4) as usize; // 0..=3
    let n_slots = n_args + 1;
    let mut columns: Vec<Vec<TypeSpec>> = Vec::new();
    for _ in 0..n_slots {
        let reuse = !columns.is_empty() && rng.below(10) < 4;
        let column = if reuse {
            let src = columns[rng.below(columns.len() as u64) as usize].clone();
            match rng.below(3) {
                0 => src
                    .into_iter()
                    .map(|t| TypeSpec::generic("builtins", "list", vec![t]))
                    .collect(),
                _ => src,
            }
        } else {
            (0..n_traces).map(|_| random_type(&mut rng, 2)).collect()
        };
        columns.push(column);
    }
    let mut out = Vec::new();
    for i in 0..n_traces {
        let args: Vec<(String, TypeSpec)> =
            (0..n_args).map(|a| (format!("p{a}"), columns[a][i].clone())).collect();
        let trace = CallTrace::new(args, columns[n_args][i].clone(), None, None);
        let count = 1 + rng.below(10);
        out.push((trace, count));
    }
    out
}

/// Exhaustive minimal-prefix filter: sort traces by descending count with
/// canonical tie-breaks, then try every prefix length from shortest to
/// longest and keep the first whose share reaches `coverage`.
pub fn filter_by_prefix_enumeration(
    traces: &[(CallTrace, u64)],
    coverage: f64,
) -> (Vec<(CallTrace, u64)>, Vec<(CallTrace, u64)>) {
    let mut sorted: Vec<(CallTrace, u64)> = traces.to_vec();
    sorted.sort_by(|(ta, ca), (tb, cb)| {
        cb.cmp(ca).then_with(|| ta.canon_key().cmp(&tb.canon_key()))
    });
    let total: u64 = sorted.iter().map(|(_, c)| *c).sum();
    for k in 1..=sorted.len() {
        let covered: u64 = sorted[..k].iter().map(|(_, c)| *c).sum();
        if covered as f64 >= coverage * total as f64 {
            let rest = sorted[k..].to_vec();
            sorted.truncate(k);
            return (sorted, rest);
        }
    }
    (sorted, Vec::new())
}

#[derive(Debug, Clone)]
enum Node {
    /// Expanded generic: every present entry shares this constructor.
    Expanded { kind: TypeKind, module: String, name: String, children: Vec<Node> },
    /// Unexpanded column of per-trace entries.
    Leaf { entries: Vec<Option<TypeSpec>> },
}

fn expand(entries: Vec<Option<TypeSpec>>) -> Node {
    let present: Vec<&TypeSpec> = entries.iter().flatten().collect();
    if !present.is_empty() {
        let first = present[0];
        let expandable = matches!(first.kind(), TypeKind::Generic | TypeKind::Protocol)
            && !first.args().is_empty()
            && present.iter().all(|t| {
                t.kind() == first.kind()
                    && t.module() == first.module()
                    && t.name() == first.name()
                    && t.args().len() == first.args().len()
            });
        if expandable {
            let arity = first.args().len();
            let kind = first.kind();
            let module = first.module().to_string();
            let name = first.name().to_string();
            let mut children = Vec::new();
            for i in 0..arity {
                let sub: Vec<Option<TypeSpec>> = entries
                    .iter()
                    .map(|e| e.as_ref().map(|t| t.args()[i].clone()))
                    .collect();
                children.push(expand(sub));
            }
            return Node::Expanded { kind, module, name, children };
        }
    }
    Node::Leaf { entries }
}

fn collect_leaves<'a>(node: &'a Node, out: &mut Vec<&'a Vec<Option<TypeSpec>>>) {
    match node {
        Node::Expanded { children, .. } => {
            for c in children {
                collect_leaves(c, out);
            }
        }
        Node::Leaf { entries } => out.push(entries),
    }
}

fn naive_simplify(mut distinct: Vec<TypeSpec>) -> TypeSpec {
    distinct.sort_by(|a, b| a.canon_key().cmp(&b.canon_key()));
    distinct.dedup();
    if distinct.len() > 1 {
        distinct.retain(|t| t.kind() != TypeKind::Never);
    }
    let is_num = |t: &TypeSpec, n: &str| {
        t.kind() == TypeKind::Concrete
            && (t.module() == "builtins" || t.module().is_empty())
            && t.name() == n
    };
    let has_int = distinct.iter().any(|t| is_num(t, "int"));
    let has_float = distinct.iter().any(|t| is_num(t, "float"));
    let has_complex = distinct.iter().any(|t| is_num(t, "complex"));
    let numerics = [has_int, has_float, has_complex].iter().filter(|b| **b).count();
    if numerics >= 2 {
        let keep = if has_complex {
            "complex"
        } else if has_float {
            "float"
        } else {
            "int"
        };
        distinct.retain(|t| !(is_num(t, "int") || is_num(t, "float") || is_num(t, "complex")));
        distinct.push(TypeSpec::concrete("builtins", keep));
    }
    TypeSpec::union(distinct)
}

/// Reference generalization: expand generic columns, group equal leaf
/// sequences pairwise, assign typevars to repeated non-constant groups in
/// first-use order, union everything else naively.
pub fn generalize_by_exhaustive_grouping(
    fn_key: &FunctionKey,
    retained: &[(CallTrace, u64)],
) -> Signature {
    let traces: Vec<&CallTrace> = retained.iter().map(|(t, _)| t).collect();
    let mut param_names: Vec<String> = Vec::new();
    for t in &traces {
        for (n, _) in t.args() {
            if !param_names.iter().any(|p| p == n) {
                param_names.push(n.clone());
            }
        }
    }

    let mut slot_nodes: Vec<(String, Node, bool)> = Vec::new();
    for name in &param_names {
        let entries: Vec<Option<TypeSpec>> = traces
            .iter()
            .map(|t| t.args().iter().find(|(n, _)| n == name).map(|(_, ty)| ty.clone()))
            .collect();
        let has_absent = entries.iter().any(|e| e.is_none());
        slot_nodes.push((name.clone(), expand(entries), has_absent));
    }
    slot_nodes.push((
        "\u{0}return".into(),
        expand(traces.iter().map(|t| Some(t.return_type().clone())).collect()),
        false,
    ));
    let has_yield = traces.iter().any(|t| t.yield_type().is_some());
    if has_yield {
        slot_nodes.push((
            "\u{0}yield".into(),
            expand(traces.iter().map(|t| t.yield_type().cloned()).collect()),
            false,
        ));
    }
    let has_send = traces.iter().any(|t| t.send_type().is_some());
    if has_send {
        slot_nodes.push((
            "\u{0}send".into(),
            expand(traces.iter().map(|t| t.send_type().cloned()).collect()),
            false,
        ));
    }

    // Pairwise leaf grouping.
    let mut leaves: Vec<&Vec<Option<TypeSpec>>> = Vec::new();
    for (_, node, _) in &slot_nodes {
        collect_leaves(node, &mut leaves);
    }
    let mut assignments: Vec<Option<u32>> = vec![None; leaves.len()];
    let mut typevars: BTreeMap<u32, Vec<TypeSpec>> = BTreeMap::new();
    let mut next = 1u32;
    for i in 0..leaves.len() {
        if assignments[i].is_some() {
            continue;
        }
        let mut distinct: Vec<TypeSpec> = Vec::new();
        for t in leaves[i].iter().flatten() {
            if !distinct.contains(t) {
                distinct.push(t.clone());
            }
        }
        if distinct.len() < 2 {
            continue;
        }
        let peers: Vec<usize> = (i + 1..leaves.len()).filter(|j| leaves[*j] == leaves[i]).collect();
        if peers.is_empty() {
            continue;
        }
        let id = next;
        next += 1;
        typevars.insert(id, distinct);
        assignments[i] = Some(id);
        for j in peers {
            assignments[j] = Some(id);
        }
    }

    // Rebuild in the same traversal order, consuming assignments.
    let mut leaf_idx = 0usize;
    fn rebuild(node: &Node, assignments: &[Option<u32>], leaf_idx: &mut usize) -> TypeSpec {
        match node {
            Node::Expanded { kind, module, name, children } => {
                let args: Vec<TypeSpec> =
                    children.iter().map(|c| rebuild(c, assignments, leaf_idx)).collect();
                match kind {
                    TypeKind::Protocol => TypeSpec::protocol(module, name, args),
                    _ => TypeSpec::generic(module, name, args),
                }
            }
            Node::Leaf { entries } => {
                let id = assignments[*leaf_idx];
                *leaf_idx += 1;
                if let Some(id) = id {
                    return TypeSpec::typevar(id);
                }
                let present: Vec<&TypeSpec> = entries.iter().flatten().collect();
                if present.is_empty() {
                    return TypeSpec::any();
                }
                let mut distinct: Vec<TypeSpec> = Vec::new();
                for t in &present {
                    if !distinct.contains(*t) {
                        distinct.push((*t).clone());
                    }
                }
                naive_simplify(distinct)
            }
        }
    }

    let mut params = Vec::new();
    let mut specials: BTreeMap<String, TypeSpec> = BTreeMap::new();
    for (name, node, has_absent) in &slot_nodes {
        let spec = rebuild(node, &assignments, &mut leaf_idx);
        if name.starts_with('\u{0}') {
            specials.insert(name.clone(), spec);
        } else {
            params.push(SigParam { name: name.clone(), spec, has_default: *has_absent });
        }
    }

    let plain_return = specials.remove("\u{0}return").expect("return slot");
    let return_type = if has_yield {
        let y = specials.remove("\u{0}yield").unwrap_or_else(TypeSpec::any);
        let s = specials.remove("\u{0}send");
        let send_trivial = s.as_ref().map(|t| t.kind() == TypeKind::NoneType).unwrap_or(true);
        let ret_trivial = matches!(plain_return.kind(), TypeKind::NoneType | TypeKind::Never);
        if send_trivial && ret_trivial {
            TypeSpec::protocol("typing", "Iterator", vec![y])
        } else {
            TypeSpec::protocol(
                "typing",
                "Generator",
                vec![y, s.unwrap_or_else(TypeSpec::none), plain_return],
            )
        }
    } else {
        plain_return
    };

    let mut sig = Signature {
        fn_key: fn_key.clone(),
        params,
        return_type,
        typevars,
        imports_needed: Default::default(),
    };
    sig.refresh_imports();
    sig
}
