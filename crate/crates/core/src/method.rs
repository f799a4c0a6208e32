//! Method post-processing: receiver and co-varying positions become `Self`,
//! and overriding methods widen their parameters with the overridden
//! declaration so substitutability is preserved.

use crate::generalize::{simplify_union, Signature};
use crate::model::{ClassTable, TypeKind, TypeSpec};

/// How a method receives its class context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    /// `self`
    Instance,
    /// `cls`
    Class,
}

/// A parent method's declared signature (from inline annotations or stubs).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParentSig {
    pub params: Vec<(String, TypeSpec)>,
    pub return_type: Option<TypeSpec>,
}

impl ParentSig {
    pub fn param(&self, name: &str) -> Option<&TypeSpec> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Merge declarations from several ancestors: per-slot unions.
    pub fn merge(mut sigs: Vec<ParentSig>) -> Option<ParentSig> {
        if sigs.is_empty() {
            return None;
        }
        let mut out = sigs.remove(0);
        for s in sigs {
            for (name, spec) in s.params {
                match out.params.iter_mut().find(|(n, _)| *n == name) {
                    Some((_, existing)) => {
                        if *existing != spec {
                            *existing = TypeSpec::union([existing.clone(), spec]);
                        }
                    }
                    None => out.params.push((name, spec)),
                }
            }
            out.return_type = match (out.return_type.take(), s.return_type) {
                (Some(a), Some(b)) if a != b => Some(TypeSpec::union([a, b])),
                (Some(a), _) => Some(a),
                (None, b) => b,
            };
        }
        Some(out)
    }
}

/// Class context for one method, assembled by the pipeline from runtime
/// class records and source/stub lookups.
#[derive(Debug, Clone, Default)]
pub struct ClassContext {
    /// (module, qualname) of the class the method is defined on.
    pub defining_class: (String, String),
    /// The defining class's method-resolution order.
    pub mro: Vec<(String, String)>,
    /// Declared signature of the overridden method, when the method
    /// overrides one.
    pub overridden: Option<ParentSig>,
}

/// Rewrite the receiver parameter to `Self` (`type[Self]` for class
/// receivers) and rewrite any position observed as the receiver's class —
/// or co-varying with it through a shared typevar — to `Self` as well.
pub fn apply_self(sig: &Signature, receiver: Option<(&str, ReceiverKind)>) -> Signature {
    let Some((recv_name, recv_kind)) = receiver else {
        return sig.clone();
    };
    let Some(recv_idx) = sig.params.iter().position(|p| p.name == recv_name) else {
        return sig.clone();
    };
    let mut out = sig.clone();
    let recv_spec = out.params[recv_idx].spec.clone();

    match recv_spec.kind() {
        TypeKind::TypeVar => {
            // Positions sharing the receiver's typevar vary with the
            // receiver class and become Self with it.
            let id = recv_spec.typevar_id();
            for p in out.params.iter_mut() {
                p.spec = p.spec.substitute_typevar(id, &TypeSpec::self_type());
            }
            out.return_type = out.return_type.substitute_typevar(id, &TypeSpec::self_type());
            out.typevars.remove(&id);
        }
        TypeKind::Concrete => {
            for (i, p) in out.params.iter_mut().enumerate() {
                if i != recv_idx && p.spec == recv_spec {
                    p.spec = TypeSpec::self_type();
                }
            }
            if out.return_type == recv_spec {
                out.return_type = TypeSpec::self_type();
            }
        }
        _ => {}
    }

    out.params[recv_idx].spec = match recv_kind {
        ReceiverKind::Instance => TypeSpec::self_type(),
        ReceiverKind::Class => {
            TypeSpec::generic("builtins", "type", vec![TypeSpec::self_type()])
        }
    };
    out.prune_typevars();
    out.refresh_imports();
    out
}

/// Widen an overriding method's parameters with the overridden
/// declaration: each becomes the simplified union of observed and declared
/// types (which collapses to the declared type when the observation is a
/// recorded subclass of it). The return type stays as observed.
pub fn widen_override(
    sig: &Signature,
    ctx: &ClassContext,
    classes: &ClassTable,
    receiver_name: Option<&str>,
) -> Signature {
    let Some(parent) = &ctx.overridden else {
        return sig.clone();
    };
    let mut out = sig.clone();
    for p in out.params.iter_mut() {
        if Some(p.name.as_str()) == receiver_name {
            continue;
        }
        let Some(declared) = parent.param(&p.name) else { continue };
        if matches!(p.spec.kind(), TypeKind::SelfType | TypeKind::TypeVar)
            || matches!(declared.kind(), TypeKind::SelfType | TypeKind::Any)
        {
            continue;
        }
        p.spec = simplify_union(&[p.spec.clone(), declared.clone()], classes);
    }
    out.refresh_imports();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalize::SigParam;
    use crate::model::{ClassInfo, FunctionKey};
    use std::collections::BTreeMap;

    fn fkey(q: &str) -> FunctionKey {
        FunctionKey::new("/m.py", q, 1)
    }
    fn line() -> TypeSpec {
        TypeSpec::concrete("m", "Line")
    }
    fn medium() -> TypeSpec {
        TypeSpec::concrete("m", "Medium")
    }
    fn nonstd() -> TypeSpec {
        TypeSpec::concrete("m", "NonStandardMedium")
    }
    fn float_t() -> TypeSpec {
        TypeSpec::concrete("builtins", "float")
    }
    fn sig(q: &str, params: Vec<(&str, TypeSpec)>, ret: TypeSpec) -> Signature {
        let mut s = Signature {
            fn_key: fkey(q),
            params: params
                .into_iter()
                .map(|(n, t)| SigParam { name: n.into(), spec: t, has_default: false })
                .collect(),
            return_type: ret,
            typevars: BTreeMap::new(),
            imports_needed: Default::default(),
        };
        s.refresh_imports();
        s
    }

    #[test]
    fn zoom_receiver_and_return_become_self() {
        let s = sig("Line.zoom", vec![("self", line()), ("factor", float_t())], line());
        let out = apply_self(&s, Some(("self", ReceiverKind::Instance)));
        assert_eq!(out.params[0].spec, TypeSpec::self_type());
        assert_eq!(out.params[1].spec, float_t());
        assert_eq!(out.return_type, TypeSpec::self_type());
    }

    #[test]
    fn no_receiver_means_no_change() {
        let s = sig("C.helper", vec![("v", float_t())], float_t());
        assert_eq!(apply_self(&s, None), s);
    }

    #[test]
    fn subclass_receiver_still_becomes_self() {
        // Method defined on Shape, observed receiver Line: Self, not Line.
        let s = sig("Shape.scale", vec![("self", line()), ("factor", float_t())], line());
        let out = apply_self(&s, Some(("self", ReceiverKind::Instance)));
        assert_eq!(out.params[0].spec, TypeSpec::self_type());
        assert_eq!(out.return_type, TypeSpec::self_type());
    }

    #[test]
    fn class_receiver_uses_type_of_self() {
        let s = sig("C.make", vec![("cls", TypeSpec::concrete("m", "C"))], TypeSpec::concrete("m", "C"));
        let out = apply_self(&s, Some(("cls", ReceiverKind::Class)));
        assert_eq!(
            out.params[0].spec,
            TypeSpec::generic("builtins", "type", vec![TypeSpec::self_type()])
        );
        assert_eq!(out.return_type, TypeSpec::self_type());
    }

    #[test]
    fn receiver_typevar_collapses_to_self_everywhere() {
        let mut typevars = BTreeMap::new();
        typevars.insert(1u32, vec![line(), TypeSpec::concrete("m", "Circle")]);
        let mut s = Signature {
            fn_key: fkey("Shape.clone"),
            params: vec![SigParam {
                name: "self".into(),
                spec: TypeSpec::typevar(1),
                has_default: false,
            }],
            return_type: TypeSpec::typevar(1),
            typevars,
            imports_needed: Default::default(),
        };
        s.refresh_imports();
        let out = apply_self(&s, Some(("self", ReceiverKind::Instance)));
        assert_eq!(out.params[0].spec, TypeSpec::self_type());
        assert_eq!(out.return_type, TypeSpec::self_type());
        assert!(out.typevars.is_empty());
    }

    #[test]
    fn override_widens_with_parent_declaration() {
        let s = sig("Line.draw", vec![("self", line()), ("medium", nonstd())], TypeSpec::none());
        let ctx = ClassContext {
            defining_class: ("m".into(), "Line".into()),
            mro: vec![("m".into(), "Line".into()), ("m".into(), "Shape".into())],
            overridden: Some(ParentSig {
                params: vec![("medium".into(), medium())],
                return_type: Some(TypeSpec::none()),
            }),
        };
        let out = widen_override(&s, &ctx, &ClassTable::new(), Some("self"));
        assert_eq!(out.params[1].spec, TypeSpec::union([medium(), nonstd()]));
        assert_eq!(out.return_type, TypeSpec::none());
    }

    #[test]
    fn observed_subtype_reduces_to_parent_type() {
        let mut classes = ClassTable::new();
        classes.insert(ClassInfo {
            module: "m".into(),
            qualname: "Screen".into(),
            path: None,
            mro: vec![
                ("m".into(), "Screen".into()),
                ("m".into(), "Medium".into()),
                ("builtins".into(), "object".into()),
            ],
            attrs: vec!["plot".into()],
        });
        let screen = TypeSpec::concrete("m", "Screen");
        let s = sig("Line.draw", vec![("self", line()), ("medium", screen)], TypeSpec::none());
        let ctx = ClassContext {
            defining_class: ("m".into(), "Line".into()),
            mro: vec![],
            overridden: Some(ParentSig {
                params: vec![("medium".into(), medium())],
                return_type: None,
            }),
        };
        let out = widen_override(&s, &ctx, &classes, Some("self"));
        assert_eq!(out.params[1].spec, medium());
    }

    #[test]
    fn non_overriding_method_unchanged() {
        let s = sig("Line.draw", vec![("self", line()), ("medium", nonstd())], TypeSpec::none());
        let ctx = ClassContext::default();
        assert_eq!(widen_override(&s, &ctx, &ClassTable::new(), Some("self")), s);
    }

    #[test]
    fn merged_parents_union_per_slot() {
        let p = ParentSig::merge(vec![
            ParentSig { params: vec![("m".into(), medium())], return_type: None },
            ParentSig { params: vec![("m".into(), nonstd())], return_type: Some(TypeSpec::none()) },
        ])
        .unwrap();
        assert_eq!(p.param("m"), Some(&TypeSpec::union([medium(), nonstd()])));
        assert_eq!(p.return_type, Some(TypeSpec::none()));
    }
}
