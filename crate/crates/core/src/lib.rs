//! Core analysis library: the trace data model and interchange format,
//! call-trace filtering and generalization, method post-processing, array
//! shape generalization, and Python source annotation.
//!
//! Runtime collection lives in the companion agent crate; everything here
//! is pure with respect to the traced program and deterministic for fixed
//! inputs.

pub mod edit;
pub mod generalize;
pub mod method;
pub mod model;
pub mod oracle;
pub mod pysrc;
pub mod render;
pub mod shape;
pub mod store_io;
pub mod stubs;

pub use generalize::{filter_traces, generalize, simplify_union, Signature};
pub use model::{CallTrace, ClassInfo, ClassTable, FunctionKey, TraceStore, TypeKind, TypeSpec};
pub use store_io::{deserialize_store, serialize_store, FormatError, TraceMeta};
