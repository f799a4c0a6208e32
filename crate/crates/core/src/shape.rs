//! Array-shape generalization.
//!
//! Shape-annotated observations at one position are merged across traces
//! per dimension slot: a slot whose extent is constant stays a literal, a
//! varying slot becomes a dimension variable, and two slots share a
//! variable exactly when their across-trace value sequences are identical.
//! Variables are named `D1`, `D2`, ... in first-use order.

use std::collections::HashMap;

use crate::model::{ShapeDim, TypeKind, TypeSpec};

/// Uniform shape observations at one position: every retained trace's entry
/// shares the element kind, array base, and rank.
#[derive(Debug, Clone)]
pub struct ShapeColumn {
    pub kind_module: String,
    pub kind_name: String,
    pub base: TypeSpec,
    /// Per-trace dimension vectors; `None` for traces lacking the slot.
    pub dims: Vec<Option<Vec<u64>>>,
    pub rank: usize,
}

/// Build a [`ShapeColumn`] from a column of optional specs, or `None` when
/// the entries are not uniformly shape-annotated with equal kind, base, and
/// rank, or when a shape contains non-literal dimensions.
pub fn column_from_specs(column: &[Option<TypeSpec>]) -> Option<ShapeColumn> {
    let mut out: Option<ShapeColumn> = None;
    for entry in column.iter().flatten() {
        if entry.kind() != TypeKind::Shaped {
            return None;
        }
        let dims: Option<Vec<u64>> = entry
            .shape()
            .unwrap_or(&[])
            .iter()
            .map(|d| match d {
                ShapeDim::Lit(n) => Some(*n),
                ShapeDim::Var(_) => None,
            })
            .collect();
        let dims = dims?;
        let base = entry.args().first()?.clone();
        match &out {
            None => {
                out = Some(ShapeColumn {
                    kind_module: entry.module().to_string(),
                    kind_name: entry.name().to_string(),
                    base,
                    rank: dims.len(),
                    dims: Vec::new(),
                });
            }
            Some(c) => {
                if c.kind_module != entry.module()
                    || c.kind_name != entry.name()
                    || c.base != base
                    || c.rank != dims.len()
                {
                    return None;
                }
            }
        }
    }
    let mut col = out?;
    if col.rank == 0 {
        return None;
    }
    for entry in column {
        match entry {
            Some(t) => {
                let dims = t
                    .shape()
                    .unwrap_or(&[])
                    .iter()
                    .map(|d| match d {
                        ShapeDim::Lit(n) => *n,
                        ShapeDim::Var(_) => unreachable!("filtered above"),
                    })
                    .collect();
                col.dims.push(Some(dims));
            }
            None => col.dims.push(None),
        }
    }
    Some(col)
}

/// Generalize one shape column. `memo` maps slot value-sequences to
/// variable names shared across the whole signature; `next_var` numbers
/// fresh variables.
pub fn generalize_column(
    col: &ShapeColumn,
    memo: &mut HashMap<String, String>,
    next_var: &mut u32,
) -> TypeSpec {
    let mut dims = Vec::with_capacity(col.rank);
    for axis in 0..col.rank {
        let values: Vec<Option<u64>> =
            col.dims.iter().map(|d| d.as_ref().map(|v| v[axis])).collect();
        let present: Vec<u64> = values.iter().flatten().copied().collect();
        let constant = present.windows(2).all(|w| w[0] == w[1]);
        if constant {
            dims.push(ShapeDim::Lit(present[0]));
        } else {
            let key = values
                .iter()
                .map(|v| v.map(|n| n.to_string()).unwrap_or_else(|| "_".into()))
                .collect::<Vec<_>>()
                .join(",");
            let name = memo
                .entry(key)
                .or_insert_with(|| {
                    let name = format!("D{}", *next_var);
                    *next_var += 1;
                    name
                })
                .clone();
            dims.push(ShapeDim::Var(name));
        }
    }
    TypeSpec::shaped(&col.kind_module, &col.kind_name, col.base.clone(), dims)
}
