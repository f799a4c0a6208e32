//! Python source handling: tokenizer, structural def/class/import index,
//! and annotation-expression parsing.

pub mod annotation;
pub mod defs;
pub mod tokenizer;

pub use annotation::{parse_annotation, ResolveCtx};
pub use defs::{
    ClassDefInfo, DefInfo, DefKind, ImportBinding, ImportIndex, ParamInfo, ParamStar, ParseError,
    PyFile,
};

use std::path::Path;

/// Derive a dotted module name for a file under `source_root`; falls back
/// to the file stem when the file lies outside the root.
pub fn module_name_for(path: &Path, source_root: &Path) -> String {
    let rel = path.strip_prefix(source_root).unwrap_or(path);
    let no_ext = rel.with_extension("");
    let parts: Vec<String> = no_ext
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    let mut parts = parts;
    if parts.last().map(|p| p == "__init__").unwrap_or(false) {
        parts.pop();
    }
    if parts.is_empty() {
        return String::new();
    }
    parts.join(".")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn module_names_from_paths() {
        let root = PathBuf::from("/src");
        assert_eq!(module_name_for(&root.join("m.py"), &root), "m");
        assert_eq!(module_name_for(&root.join("pkg/sub.py"), &root), "pkg.sub");
        assert_eq!(module_name_for(&root.join("pkg/__init__.py"), &root), "pkg");
    }
}
