//! Stub-repository lookups: declared method signatures for classes whose
//! sources carry no inline annotations. Stub files use ordinary `.pyi`
//! syntax; names are resolved through each stub's own imports. Overloaded
//! declarations merge into per-slot unions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use crate::method::ParentSig;
use crate::pysrc::{parse_annotation, DefInfo, PyFile, ResolveCtx};

/// A tiny bundled stub set covering ubiquitous bases; real deployments
/// point `--stubs` at a full stub collection.
const BUNDLED: &[(&str, &str)] = &[(
    "builtins",
    r#"class object:
    def __init__(self) -> None: ...
    def __eq__(self, other: object) -> bool: ...
    def __ne__(self, other: object) -> bool: ...
    def __str__(self) -> str: ...
    def __repr__(self) -> str: ...
    def __hash__(self) -> int: ...

class BaseException:
    def __init__(self, *args: object) -> None: ...

class Exception(BaseException): ...
"#,
)];

pub struct StubRepo {
    roots: Vec<PathBuf>,
    use_bundled: bool,
    cache: Mutex<HashMap<String, Option<ParsedStub>>>,
}

struct ParsedStub {
    file: PyFile,
    classes: Vec<String>,
}

impl StubRepo {
    pub fn new(roots: Vec<PathBuf>) -> Self {
        StubRepo { roots, use_bundled: true, cache: Mutex::new(HashMap::new()) }
    }

    pub fn bundled_only() -> Self {
        StubRepo::new(Vec::new())
    }

    fn module_source(&self, module: &str) -> Option<String> {
        let rel: PathBuf = module.split('.').collect();
        for root in &self.roots {
            for candidate in [
                root.join(&rel).with_extension("pyi"),
                root.join(&rel).join("__init__.pyi"),
            ] {
                if let Ok(text) = std::fs::read_to_string(&candidate) {
                    return Some(text);
                }
            }
        }
        if self.use_bundled {
            if let Some((_, text)) = BUNDLED.iter().find(|(m, _)| *m == module) {
                return Some(text.to_string());
            }
        }
        None
    }

    fn parsed(&self, module: &str) -> Option<()> {
        let mut cache = self.cache.lock().unwrap();
        if !cache.contains_key(module) {
            let parsed = self.module_source(module).and_then(|src| match PyFile::parse(&src) {
                Ok(file) => {
                    let classes = file.classes.iter().map(|c| c.qualname.clone()).collect();
                    Some(ParsedStub { file, classes })
                }
                Err(_) => None, // malformed stubs are skipped
            });
            cache.insert(module.to_string(), parsed);
        }
        cache.get(module).and_then(|p| p.as_ref()).map(|_| ())
    }

    /// Declared parameter and return types of `module.class_qualname.method`,
    /// or `None` when the stub or the method is absent.
    pub fn lookup_method(
        &self,
        module: &str,
        class_qualname: &str,
        method: &str,
    ) -> Option<ParentSig> {
        self.parsed(module)?;
        let cache = self.cache.lock().unwrap();
        let stub = cache.get(module)?.as_ref()?;
        let qualname = format!("{class_qualname}.{method}");
        let defs: Vec<&DefInfo> = stub.file.find_def_by_qualname(&qualname);
        if defs.is_empty() {
            return None;
        }
        let ctx = ResolveCtx {
            imports: &stub.file.imports,
            module,
            local_classes: &stub.classes,
        };
        let mut sigs = Vec::new();
        for def in defs {
            let mut params = Vec::new();
            for p in &def.params {
                if let Some((s, e)) = p.annotation {
                    params.push((
                        p.name.clone(),
                        parse_annotation(&stub.file.text[s..e], &ctx),
                    ));
                }
            }
            let return_type = def
                .return_annotation
                .map(|(s, e)| parse_annotation(&stub.file.text[s..e], &ctx));
            sigs.push(ParentSig { params, return_type });
        }
        ParentSig::merge(sigs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TypeSpec;
    use std::io::Write;

    #[test]
    fn bundled_object_signature() {
        let repo = StubRepo::bundled_only();
        let sig = repo.lookup_method("builtins", "object", "__eq__").unwrap();
        assert_eq!(sig.param("other"), Some(&TypeSpec::concrete("builtins", "object")));
        assert_eq!(sig.return_type, Some(TypeSpec::concrete("builtins", "bool")));
    }

    #[test]
    fn missing_names_return_none() {
        let repo = StubRepo::bundled_only();
        assert!(repo.lookup_method("builtins", "object", "nope").is_none());
        assert!(repo.lookup_method("nosuch.module", "C", "m").is_none());
    }

    #[test]
    fn fixture_tree_with_overloads_and_imports() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("pkg")).unwrap();
        let mut f = std::fs::File::create(dir.path().join("pkg/base.pyi")).unwrap();
        write!(
            f,
            "from typing import overload\nfrom pkg.other import Widget\n\nclass Base:\n    @overload\n    def get(self, k: int) -> str: ...\n    @overload\n    def get(self, k: str) -> Widget: ...\n"
        )
        .unwrap();
        let repo = StubRepo::new(vec![dir.path().to_path_buf()]);
        let sig = repo.lookup_method("pkg.base", "Base", "get").unwrap();
        // overload slots union by hand: k: int|str, return str|Widget
        assert_eq!(
            sig.param("k"),
            Some(&TypeSpec::union([
                TypeSpec::concrete("builtins", "int"),
                TypeSpec::concrete("builtins", "str")
            ]))
        );
        assert_eq!(
            sig.return_type,
            Some(TypeSpec::union([
                TypeSpec::concrete("builtins", "str"),
                TypeSpec::concrete("pkg.other", "Widget")
            ]))
        );
    }

    #[test]
    fn malformed_stub_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.pyi"), "def broken(((\n").unwrap();
        let repo = StubRepo::new(vec![dir.path().to_path_buf()]);
        assert!(repo.lookup_method("bad", "C", "m").is_none());
    }
}
