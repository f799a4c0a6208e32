//! Render [`TypeSpec`] values as annotation source text for a target
//! Python version.
//!
//! Version rules: the bar operator spells unions from 3.10 up, with
//! `Union`/`Optional` below; `Self` and `Never` exist from 3.11 up, falling
//! back to the (quoted) defining-class name and, for container elements, to
//! the bare container; typevars render as inline type-parameter lists from
//! 3.12 up and as generated module-level `TypeVar` declarations named
//! `rt_T1`, `rt_T2`, ... below.

use std::collections::{BTreeMap, BTreeSet};

use crate::generalize::Signature;
use crate::model::{TypeKind, TypeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PyVersion {
    V39,
    V310,
    V311,
    V312,
    V313,
}

impl PyVersion {
    pub fn parse(s: &str) -> Option<PyVersion> {
        Some(match s {
            "3.9" => PyVersion::V39,
            "3.10" => PyVersion::V310,
            "3.11" => PyVersion::V311,
            "3.12" => PyVersion::V312,
            "3.13" => PyVersion::V313,
            _ => return None,
        })
    }

    pub fn bar_unions(self) -> bool {
        self >= PyVersion::V310
    }

    pub fn self_and_never(self) -> bool {
        self >= PyVersion::V311
    }

    pub fn inline_type_params(self) -> bool {
        self >= PyVersion::V312
    }
}

impl std::fmt::Display for PyVersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PyVersion::V39 => "3.9",
            PyVersion::V310 => "3.10",
            PyVersion::V311 => "3.11",
            PyVersion::V312 => "3.12",
            PyVersion::V313 => "3.13",
        };
        f.write_str(s)
    }
}

/// Where the file's own classes are defined, for forward-reference and
/// import decisions.
#[derive(Debug, Default, Clone)]
pub struct FileContext {
    /// Module name of the file being annotated.
    pub module: String,
    /// Alternate module name the file may be known as at runtime
    /// (scripts execute as `__main__`).
    pub module_alias: Option<String>,
    /// Top-level class name -> def line.
    pub class_lines: BTreeMap<String, u32>,
}

impl FileContext {
    pub(crate) fn is_local_module(&self, module: &str) -> bool {
        module == self.module || self.module_alias.as_deref() == Some(module)
    }
}

/// Context for rendering one signature.
pub struct RenderCtx<'a> {
    pub version: PyVersion,
    /// Typevar id -> rendered name.
    pub typevar_names: &'a BTreeMap<u32, String>,
    /// Bare name of the class defining the method, for `Self` fallbacks.
    pub defining_class: Option<&'a str>,
    pub file: &'a FileContext,
    /// Line of the def being annotated; same-file classes defined at or
    /// after it must be quoted.
    pub use_line: u32,
}


/// Render `spec`, accumulating required imports. The bool is true when the
/// produced text references a name not yet bound at evaluation time and the
/// whole annotation must therefore be quoted.
pub fn render_type(
    spec: &TypeSpec,
    ctx: &RenderCtx<'_>,
    imports: &mut BTreeSet<(String, String)>,
) -> (String, bool) {
    let mut needs_quote = false;
    let text = render_inner(spec, ctx, imports, &mut needs_quote);
    (text, needs_quote)
}

/// Render `spec` as a complete annotation, quoting the whole expression if
/// any component requires it.
pub fn render_annotation(
    spec: &TypeSpec,
    ctx: &RenderCtx<'_>,
    imports: &mut BTreeSet<(String, String)>,
) -> String {
    let (text, needs_quote) = render_type(spec, ctx, imports);
    if needs_quote {
        format!("\"{text}\"")
    } else {
        text
    }
}

fn render_inner(
    spec: &TypeSpec,
    ctx: &RenderCtx<'_>,
    imports: &mut BTreeSet<(String, String)>,
    needs_quote: &mut bool,
) -> String {
    match spec.kind() {
        TypeKind::NoneType => "None".to_string(),
        TypeKind::Any => {
            imports.insert(("typing".into(), "Any".into()));
            "Any".to_string()
        }
        TypeKind::Never => {
            if ctx.version.self_and_never() {
                imports.insert(("typing".into(), "Never".into()));
                "Never".to_string()
            } else {
                imports.insert(("typing".into(), "NoReturn".into()));
                "NoReturn".to_string()
            }
        }
        TypeKind::SelfType => {
            if ctx.version.self_and_never() {
                imports.insert(("typing".into(), "Self".into()));
                "Self".to_string()
            } else {
                let name = ctx.defining_class.unwrap_or("Any");
                if name == "Any" {
                    imports.insert(("typing".into(), "Any".into()));
                } else {
                    *needs_quote = true;
                }
                name.to_string()
            }
        }
        TypeKind::TypeVar => ctx
            .typevar_names
            .get(&spec.typevar_id())
            .cloned()
            .unwrap_or_else(|| format!("T{}", spec.typevar_id())),
        TypeKind::Concrete => render_named(spec, ctx, imports, needs_quote),
        TypeKind::Protocol | TypeKind::Generic => {
            // Pre-3.11 fallback: a container whose parameters mention the
            // empty type renders bare.
            if !ctx.version.self_and_never() && spec.args().iter().any(contains_never) {
                return render_named(spec, ctx, imports, needs_quote);
            }
            let base = render_named(spec, ctx, imports, needs_quote);
            if spec.args().is_empty() {
                return base;
            }
            let args: Vec<String> = spec
                .args()
                .iter()
                .map(|a| render_inner(a, ctx, imports, needs_quote))
                .collect();
            format!("{base}[{}]", args.join(", "))
        }
        TypeKind::Union => {
            let mut members: Vec<&TypeSpec> = spec.args().iter().collect();
            // None renders last: `int|None`.
            let had_none = members.iter().any(|m| m.kind() == TypeKind::NoneType);
            members.retain(|m| m.kind() != TypeKind::NoneType);
            let mut texts: Vec<String> = members
                .iter()
                .map(|m| render_inner(m, ctx, imports, needs_quote))
                .collect();
            if ctx.version.bar_unions() {
                if had_none {
                    texts.push("None".to_string());
                }
                texts.join("|")
            } else if had_none {
                imports.insert(("typing".into(), "Optional".into()));
                if texts.len() == 1 {
                    format!("Optional[{}]", texts[0])
                } else {
                    imports.insert(("typing".into(), "Union".into()));
                    format!("Optional[Union[{}]]", texts.join(", "))
                }
            } else {
                imports.insert(("typing".into(), "Union".into()));
                format!("Union[{}]", texts.join(", "))
            }
        }
        TypeKind::Shaped => {
            imports.insert((spec.module().to_string(), spec.name().to_string()));
            let base = render_inner(&spec.args()[0], ctx, imports, needs_quote);
            let dims: Vec<String> =
                spec.shape().unwrap_or(&[]).iter().map(|d| d.to_string()).collect();
            format!("{}[{base}, \"{}\"]", spec.name(), dims.join(" "))
        }
    }
}

fn contains_never(spec: &TypeSpec) -> bool {
    spec.kind() == TypeKind::Never || spec.args().iter().any(contains_never)
}

fn render_named(
    spec: &TypeSpec,
    ctx: &RenderCtx<'_>,
    imports: &mut BTreeSet<(String, String)>,
    needs_quote: &mut bool,
) -> String {
    let module = spec.module();
    let name = spec.name();
    if module.is_empty() || module == "builtins" {
        return name.to_string();
    }
    if ctx.file.is_local_module(module) {
        // Same-file type: no import. Quote when the name will not yet be
        // bound at evaluation time: classes defined at or after the line of
        // use, unknown names, and the class whose body encloses the def.
        let root = name.split('.').next().unwrap_or(name);
        let encloses = ctx
            .defining_class
            .map(|c| c.split('.').next().unwrap_or(c) == root)
            .unwrap_or(false);
        match ctx.file.class_lines.get(root) {
            Some(line) if *line >= ctx.use_line || encloses => *needs_quote = true,
            Some(_) => {}
            None => *needs_quote = true,
        }
        return name.to_string();
    }
    let root = name.split('.').next().unwrap_or(name);
    imports.insert((module.to_string(), root.to_string()));
    name.to_string()
}

/// A signature rendered to insertion-ready strings.
#[derive(Debug, Clone, Default)]
pub struct RenderedSig {
    /// Parameter name -> annotation text (no leading `: `).
    pub params: BTreeMap<String, String>,
    pub return_annotation: Option<String>,
    /// `[T1: (int, str)]` inline list for 3.12+ targets.
    pub type_param_list: Option<String>,
    /// Module-level declarations (name, full line) for pre-3.12 targets;
    /// already registered in the per-file registry.
    pub typevar_decls: Vec<(String, String)>,
    pub imports: BTreeSet<(String, String)>,
}

/// Allocates `rt_T*` names per file for pre-3.12 targets, deduplicating
/// identical constraint sets.
#[derive(Debug, Default)]
pub struct TypevarRegistry {
    by_constraints: BTreeMap<String, String>,
    next: u32,
}

impl TypevarRegistry {
    /// Reserve numbers up to and including `n` (names already present in
    /// the file being edited).
    pub fn reserve_through(&mut self, n: u32) {
        self.next = self.next.max(n);
    }

    fn name_for(&mut self, constraints_key: &str) -> (String, bool) {
        if let Some(name) = self.by_constraints.get(constraints_key) {
            return (name.clone(), false);
        }
        self.next += 1;
        let name = format!("rt_T{}", self.next);
        self.by_constraints.insert(constraints_key.to_string(), name.clone());
        (name, true)
    }
}

/// Render every annotation of `sig` for the target version.
pub fn render_signature(
    sig: &Signature,
    version: PyVersion,
    defining_class: Option<&str>,
    file: &FileContext,
    use_line: u32,
    registry: &mut TypevarRegistry,
) -> RenderedSig {
    let mut imports = BTreeSet::new();
    let mut typevar_names: BTreeMap<u32, String> = BTreeMap::new();
    let mut typevar_decls = Vec::new();
    let mut type_param_list = None;

    if !sig.typevars.is_empty() {
        if version.inline_type_params() {
            let mut parts = Vec::new();
            for (id, constraints) in &sig.typevars {
                let name = format!("T{id}");
                typevar_names.insert(*id, name.clone());
                let ctx = RenderCtx {
                    version,
                    typevar_names: &typevar_names,
                    defining_class,
                    file,
                    use_line,
                };
                let texts: Vec<String> = constraints
                    .iter()
                    .map(|c| render_type(c, &ctx, &mut imports).0)
                    .collect();
                parts.push(format!("{name}: ({})", texts.join(", ")));
            }
            type_param_list = Some(format!("[{}]", parts.join(", ")));
        } else {
            for (id, constraints) in &sig.typevars {
                let ctx = RenderCtx {
                    version,
                    typevar_names: &typevar_names,
                    defining_class,
                    file,
                    use_line,
                };
                let mut texts = Vec::new();
                for c in constraints {
                    texts.push(render_annotation(c, &ctx, &mut imports));
                }
                let key = texts.join(",");
                let (name, fresh) = registry.name_for(&key);
                if fresh {
                    imports.insert(("typing".into(), "TypeVar".into()));
                    let line = format!("{name} = TypeVar(\"{name}\", {})", texts.join(", "));
                    typevar_decls.push((name.clone(), line));
                }
                typevar_names.insert(*id, name);
            }
        }
    }

    let ctx = RenderCtx { version, typevar_names: &typevar_names, defining_class, file, use_line };
    let mut params = BTreeMap::new();
    for p in &sig.params {
        params.insert(p.name.clone(), render_annotation(&p.spec, &ctx, &mut imports));
    }
    let return_annotation = Some(render_annotation(&sig.return_type, &ctx, &mut imports));

    RenderedSig { params, return_annotation, type_param_list, typevar_decls, imports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalize::SigParam;
    use crate::model::FunctionKey;

    fn int() -> TypeSpec {
        TypeSpec::concrete("builtins", "int")
    }
    fn str_t() -> TypeSpec {
        TypeSpec::concrete("builtins", "str")
    }

    fn ctx<'a>(
        version: PyVersion,
        names: &'a BTreeMap<u32, String>,
        file: &'a FileContext,
    ) -> RenderCtx<'a> {
        RenderCtx { version, typevar_names: names, defining_class: Some("Line"), file, use_line: 100 }
    }

    #[test]
    fn int_renders_bare_on_every_target() {
        let names = BTreeMap::new();
        let file = FileContext::default();
        for v in [PyVersion::V39, PyVersion::V310, PyVersion::V311, PyVersion::V312] {
            let mut imports = BTreeSet::new();
            assert_eq!(render_type(&int(), &ctx(v, &names, &file), &mut imports).0, "int");
            assert!(imports.is_empty());
        }
    }

    #[test]
    fn unions_spell_by_version() {
        let names = BTreeMap::new();
        let file = FileContext::default();
        let u = TypeSpec::union([int(), TypeSpec::none()]);
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&u, &ctx(PyVersion::V310, &names, &file), &mut imports).0,
            "int|None"
        );
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&u, &ctx(PyVersion::V39, &names, &file), &mut imports).0,
            "Optional[int]"
        );
        assert!(imports.contains(&("typing".into(), "Optional".into())));
        let u3 = TypeSpec::union([int(), str_t(), TypeSpec::none()]);
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&u3, &ctx(PyVersion::V39, &names, &file), &mut imports).0,
            "Optional[Union[int, str]]"
        );
    }

    #[test]
    fn never_falls_back_below_311() {
        let names = BTreeMap::new();
        let file = FileContext::default();
        let lst = TypeSpec::generic("builtins", "list", vec![TypeSpec::never()]);
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&lst, &ctx(PyVersion::V311, &names, &file), &mut imports).0,
            "list[Never]"
        );
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&lst, &ctx(PyVersion::V310, &names, &file), &mut imports).0,
            "list"
        );
        let mut imports = BTreeSet::new();
        assert_eq!(
            render_type(&TypeSpec::never(), &ctx(PyVersion::V39, &names, &file), &mut imports).0,
            "NoReturn"
        );
    }

    #[test]
    fn self_falls_back_to_quoted_class() {
        let names = BTreeMap::new();
        let file = FileContext::default();
        let mut imports = BTreeSet::new();
        let (text, quote) =
            render_type(&TypeSpec::self_type(), &ctx(PyVersion::V312, &names, &file), &mut imports);
        assert_eq!((text.as_str(), quote), ("Self", false));
        assert!(imports.contains(&("typing".into(), "Self".into())));
        let mut imports = BTreeSet::new();
        let (text, quote) =
            render_type(&TypeSpec::self_type(), &ctx(PyVersion::V310, &names, &file), &mut imports);
        assert_eq!((text.as_str(), quote), ("Line", true));
    }

    #[test]
    fn same_file_forward_reference_is_quoted() {
        let names = BTreeMap::new();
        let mut file = FileContext::default();
        file.module = "m".into();
        file.class_lines.insert("Late".into(), 200);
        file.class_lines.insert("Early".into(), 3);
        let c = RenderCtx {
            version: PyVersion::V312,
            typevar_names: &names,
            defining_class: None,
            file: &file,
            use_line: 100,
        };
        let mut imports = BTreeSet::new();
        let (t1, q1) = render_type(&TypeSpec::concrete("m", "Late"), &c, &mut imports);
        assert_eq!((t1.as_str(), q1), ("Late", true));
        let (t2, q2) = render_type(&TypeSpec::concrete("m", "Early"), &c, &mut imports);
        assert_eq!((t2.as_str(), q2), ("Early", false));
        assert!(imports.is_empty());
    }

    #[test]
    fn inline_type_params_on_312() {
        let mut typevars = BTreeMap::new();
        typevars.insert(1u32, vec![int(), str_t()]);
        let sig = Signature {
            fn_key: FunctionKey::new("/m.py", "add", 1),
            params: vec![
                SigParam { name: "a".into(), spec: TypeSpec::typevar(1), has_default: false },
                SigParam { name: "b".into(), spec: TypeSpec::typevar(1), has_default: false },
            ],
            return_type: TypeSpec::typevar(1),
            typevars,
            imports_needed: Default::default(),
        };
        let file = FileContext::default();
        let mut reg = TypevarRegistry::default();
        let out = render_signature(&sig, PyVersion::V312, None, &file, 1, &mut reg);
        assert_eq!(out.type_param_list.as_deref(), Some("[T1: (int, str)]"));
        assert_eq!(out.params["a"], "T1");
        assert_eq!(out.return_annotation.as_deref(), Some("T1"));
        assert!(out.typevar_decls.is_empty());
    }

    #[test]
    fn module_level_typevars_below_312() {
        let mut typevars = BTreeMap::new();
        typevars.insert(1u32, vec![int(), str_t()]);
        let sig = Signature {
            fn_key: FunctionKey::new("/m.py", "add", 1),
            params: vec![SigParam {
                name: "a".into(),
                spec: TypeSpec::typevar(1),
                has_default: false,
            }],
            return_type: TypeSpec::typevar(1),
            typevars,
            imports_needed: Default::default(),
        };
        let file = FileContext::default();
        let mut reg = TypevarRegistry::default();
        let out = render_signature(&sig, PyVersion::V310, None, &file, 1, &mut reg);
        assert_eq!(out.type_param_list, None);
        assert_eq!(out.params["a"], "rt_T1");
        assert_eq!(
            out.typevar_decls,
            vec![("rt_T1".to_string(), "rt_T1 = TypeVar(\"rt_T1\", int, str)".to_string())]
        );
        assert!(out.imports.contains(&("typing".into(), "TypeVar".into())));
        // identical constraints in a second signature reuse the name
        let out2 = render_signature(&sig, PyVersion::V310, None, &file, 1, &mut reg);
        assert_eq!(out2.params["a"], "rt_T1");
        assert!(out2.typevar_decls.is_empty());
    }

    #[test]
    fn shaped_renders_jaxtyping_form() {
        use crate::model::ShapeDim;
        let spec = TypeSpec::shaped(
            "jaxtyping",
            "Float64",
            TypeSpec::concrete("numpy", "ndarray"),
            vec![ShapeDim::Lit(2), ShapeDim::Lit(3)],
        );
        let names = BTreeMap::new();
        let file = FileContext::default();
        let mut imports = BTreeSet::new();
        let (text, _) = render_type(&spec, &ctx(PyVersion::V312, &names, &file), &mut imports);
        assert_eq!(text, "Float64[ndarray, \"2 3\"]");
        assert!(imports.contains(&("jaxtyping".into(), "Float64".into())));
        assert!(imports.contains(&("numpy".into(), "ndarray".into())));
    }
}
