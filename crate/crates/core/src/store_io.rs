//! Trace interchange format: line-delimited JSON, one record per line.
//!
//! Line 1 is a header carrying format metadata and the run-level sampling
//! seed. Subsequent lines are either class records (`{"class": ...}`) or
//! trace records:
//!
//! ```text
//! {"fn": {"path": ..., "qualname": ..., "line": N},
//!  "args": [[name, typespec], ...], "ret": typespec,
//!  "yield": typespec|null, "send": typespec|null, "count": N}
//! ```
//!
//! where `typespec` is the recursive form
//! `{"kind": ..., "module": ..., "name": ..., "args": [...],
//!   "typevar": N|null, "shape": [...]|null}`.
//!
//! Serialization is deterministic (sorted functions, traces by descending
//! count then canonical form), so re-serializing a deserialized store is
//! byte-identical.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CallTrace, ClassInfo, ClassTable, FunctionKey, ShapeDim, TraceStore, TypeKind, TypeSpec,
};

pub const FORMAT_NAME: &str = "runtype-traces";
pub const FORMAT_VERSION: u32 = 1;

/// Errors reading the trace interchange format. Each variant names the
/// 1-based line where the problem was found; trace records also carry
/// their 0-based record index.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: missing or invalid header: {detail}")]
    Header { line: usize, detail: String },
    #[error("line {line}: record {record}: {detail}")]
    Record { line: usize, record: usize, detail: String },
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Header line of a trace file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TraceMeta {
    pub format: String,
    pub version: u32,
    pub seed: u64,
}

impl Default for TraceMeta {
    fn default() -> Self {
        TraceMeta { format: FORMAT_NAME.to_string(), version: FORMAT_VERSION, seed: 0 }
    }
}

impl TraceMeta {
    pub fn with_seed(seed: u64) -> Self {
        TraceMeta { seed, ..TraceMeta::default() }
    }
}

// Wire forms. Field order here defines the on-disk field order.

#[derive(Serialize, Deserialize)]
struct WireType {
    kind: TypeKind,
    module: String,
    name: String,
    args: Vec<WireType>,
    typevar: Option<u32>,
    shape: Option<Vec<String>>,
}

impl WireType {
    fn from_spec(t: &TypeSpec) -> WireType {
        WireType {
            kind: t.kind(),
            module: t.module().to_string(),
            name: t.name().to_string(),
            args: t.args().iter().map(WireType::from_spec).collect(),
            typevar: (t.kind() == TypeKind::TypeVar).then(|| t.typevar_id()),
            shape: t.shape().map(|dims| dims.iter().map(|d| d.to_string()).collect()),
        }
    }

    fn into_spec(self) -> Result<TypeSpec, String> {
        let args = self
            .args
            .into_iter()
            .map(WireType::into_spec)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match self.kind {
            TypeKind::Concrete => TypeSpec::concrete(&self.module, &self.name),
            TypeKind::Generic => TypeSpec::generic(&self.module, &self.name, args),
            TypeKind::Protocol => TypeSpec::protocol(&self.module, &self.name, args),
            TypeKind::Union => {
                if args.len() < 2 {
                    return Err("union must have at least two members".into());
                }
                TypeSpec::union(args)
            }
            TypeKind::TypeVar => {
                let id = self.typevar.ok_or("typevar record lacks id")?;
                if id < 1 {
                    return Err("typevar id must be >= 1".into());
                }
                TypeSpec::typevar(id)
            }
            TypeKind::SelfType => TypeSpec::self_type(),
            TypeKind::Never => {
                if !args.is_empty() {
                    return Err("never type cannot have arguments".into());
                }
                TypeSpec::never()
            }
            TypeKind::Any => TypeSpec::any(),
            TypeKind::NoneType => TypeSpec::none(),
            TypeKind::Shaped => {
                let dims = self
                    .shape
                    .ok_or("shape-annotated type lacks shape")?
                    .into_iter()
                    .map(|d| match d.parse::<u64>() {
                        Ok(n) => ShapeDim::Lit(n),
                        Err(_) => ShapeDim::Var(d),
                    })
                    .collect();
                let mut it = args.into_iter();
                let base = it.next().ok_or("shape-annotated type lacks base")?;
                TypeSpec::shaped(&self.module, &self.name, base, dims)
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
struct WireFn {
    path: String,
    qualname: String,
    line: u32,
}

#[derive(Serialize, Deserialize)]
struct WireTrace {
    #[serde(rename = "fn")]
    func: WireFn,
    args: Vec<(String, WireType)>,
    ret: WireType,
    #[serde(rename = "yield")]
    yield_type: Option<WireType>,
    send: Option<WireType>,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct WireClass {
    class: ClassInfo,
}

/// Write a store (plus optional class table) in interchange format.
pub fn write_store<W: Write>(
    w: &mut W,
    meta: &TraceMeta,
    store: &TraceStore,
    classes: &ClassTable,
) -> std::io::Result<()> {
    let mut line = serde_json::to_string(meta).expect("header serializes");
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for info in classes.iter() {
        let rec = WireClass { class: info.clone() };
        let mut line = serde_json::to_string(&rec).expect("class serializes");
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    let mut keys: Vec<&FunctionKey> = store.functions().collect();
    keys.sort();
    for key in keys {
        for (trace, count) in store.sorted_traces(key) {
            let rec = WireTrace {
                func: WireFn {
                    path: key.source_path.to_string_lossy().into_owned(),
                    qualname: key.qualified_name.clone(),
                    line: key.first_line,
                },
                args: trace
                    .args()
                    .iter()
                    .map(|(n, t)| (n.clone(), WireType::from_spec(t)))
                    .collect(),
                ret: WireType::from_spec(trace.return_type()),
                yield_type: trace.yield_type().map(WireType::from_spec),
                send: trace.send_type().map(WireType::from_spec),
                count,
            };
            let mut line = serde_json::to_string(&rec).expect("trace serializes");
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

/// Serialize a store to bytes with the given metadata.
pub fn serialize_store(store: &TraceStore, classes: &ClassTable, meta: &TraceMeta) -> Vec<u8> {
    let mut out = Vec::new();
    write_store(&mut out, meta, store, classes).expect("in-memory write cannot fail");
    out
}

/// Parse a trace stream. Returns the metadata, store, and class table.
pub fn read_store<R: BufRead>(r: R) -> Result<(TraceMeta, TraceStore, ClassTable), FormatError> {
    let mut store = TraceStore::new();
    let mut classes = ClassTable::new();
    let mut meta: Option<TraceMeta> = None;
    let mut record_index = 0usize;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        if meta.is_none() {
            let parsed: TraceMeta = serde_json::from_str(trimmed)
                .map_err(|e| FormatError::Header { line: line_no, detail: e.to_string() })?;
            if parsed.format != FORMAT_NAME {
                return Err(FormatError::Header {
                    line: line_no,
                    detail: format!("unknown format {:?}", parsed.format),
                });
            }
            meta = Some(parsed);
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| {
            FormatError::Record { line: line_no, record: record_index, detail: e.to_string() }
        })?;
        let obj = value.as_object().ok_or_else(|| FormatError::Line {
            line: line_no,
            detail: "record is not an object".into(),
        })?;
        if obj.contains_key("class") {
            let rec: WireClass = serde_json::from_value(value.clone()).map_err(|e| {
                FormatError::Line { line: line_no, detail: format!("bad class record: {e}") }
            })?;
            classes.insert(rec.class);
            continue;
        }
        if obj.contains_key("fn") {
            let rec: WireTrace = serde_json::from_value(value.clone()).map_err(|e| {
                FormatError::Record { line: line_no, record: record_index, detail: e.to_string() }
            })?;
            let into_record_err = |detail: String| FormatError::Record {
                line: line_no,
                record: record_index,
                detail,
            };
            if rec.count == 0 {
                return Err(into_record_err("count must be positive".into()));
            }
            let key =
                FunctionKey::new(rec.func.path, &rec.func.qualname, rec.func.line);
            let args = rec
                .args
                .into_iter()
                .map(|(n, t)| t.into_spec().map(|t| (n, t)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(into_record_err)?;
            let ret = rec.ret.into_spec().map_err(into_record_err)?;
            let yield_type = rec
                .yield_type
                .map(WireType::into_spec)
                .transpose()
                .map_err(into_record_err)?;
            let send = rec.send.map(WireType::into_spec).transpose().map_err(into_record_err)?;
            store.add(key, CallTrace::new(args, ret, yield_type, send), rec.count);
            record_index += 1;
            continue;
        }
        // Unknown record kinds are skipped for forward compatibility.
    }
    let meta = meta.ok_or(FormatError::Header { line: 1, detail: "empty stream".into() })?;
    Ok((meta, store, classes))
}

/// Deserialize a store from bytes.
pub fn deserialize_store(bytes: &[u8]) -> Result<(TraceMeta, TraceStore, ClassTable), FormatError> {
    read_store(std::io::BufReader::new(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int() -> TypeSpec {
        TypeSpec::concrete("builtins", "int")
    }

    #[test]
    fn empty_store_round_trips_as_header_only() {
        let meta = TraceMeta::with_seed(7);
        let bytes = serialize_store(&TraceStore::new(), &ClassTable::new(), &meta);
        assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 1);
        let (meta2, store, classes) = deserialize_store(&bytes).unwrap();
        assert_eq!(meta2, meta);
        assert!(store.is_empty());
        assert!(classes.is_empty());
    }

    #[test]
    fn simple_store_round_trips_byte_identical() {
        let mut store = TraceStore::new();
        let key = FunctionKey::new("/src/m.py", "add", 3);
        let trace = CallTrace::new(
            vec![("a".into(), int()), ("b".into(), int())],
            int(),
            None,
            None,
        );
        store.add(key, trace, 2);
        let meta = TraceMeta::default();
        let bytes = serialize_store(&store, &ClassTable::new(), &meta);
        let (_, store2, _) = deserialize_store(&bytes).unwrap();
        assert_eq!(store2, store);
        let bytes2 = serialize_store(&store2, &ClassTable::new(), &meta);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn truncated_record_reports_line_and_index() {
        let mut store = TraceStore::new();
        let key = FunctionKey::new("/src/m.py", "f", 1);
        store.add(key, CallTrace::new(vec![], int(), None, None), 1);
        let bytes = serialize_store(&store, &ClassTable::new(), &TraceMeta::default());
        let text = String::from_utf8(bytes).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = lines[1].len() - 10;
        let truncated = &lines[1][..cut];
        lines[1] = truncated;
        let bad = lines.join("\n");
        let err = deserialize_store(bad.as_bytes()).unwrap_err();
        match err {
            FormatError::Record { line, record, .. } => {
                assert_eq!(line, 2);
                assert_eq!(record, 0);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn zero_count_rejected() {
        let good = concat!(
            r#"{"format":"runtype-traces","version":1,"seed":0}"#,
            "\n",
            r#"{"fn":{"path":"/m.py","qualname":"f","line":1},"args":[],"ret":{"kind":"none","module":"","name":"","args":[],"typevar":null,"shape":null},"yield":null,"send":null,"count":0}"#,
        );
        assert!(deserialize_store(good.as_bytes()).is_err());
    }

    #[test]
    fn class_records_round_trip() {
        let mut classes = ClassTable::new();
        classes.insert(ClassInfo {
            module: "m".into(),
            qualname: "C".into(),
            path: Some("/src/m.py".into()),
            mro: vec![("m".into(), "C".into()), ("builtins".into(), "object".into())],
            attrs: vec!["f".into(), "g".into()],
        });
        let bytes = serialize_store(&TraceStore::new(), &classes, &TraceMeta::default());
        let (_, _, classes2) = deserialize_store(&bytes).unwrap();
        assert_eq!(classes2, classes);
    }
}
