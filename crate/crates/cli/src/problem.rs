//! Problem file schema and validation.
//!
//! Problems are JSON documents:
//!
//! ```json
//! {
//!   "group": "sl2",
//!   "representation": "adjoint",
//!   "space": "affine",
//!   "points": [{"id": "H", "vec": [0.0, 1.41, 0.0]}],
//!   "tolerances": {"zero_tolerance": 1e-6},
//!   "seed": 42
//! }
//! ```
//!
//! `group` and `representation` accept either preset names or explicit
//! matrix lists (row-major nested arrays). Schema violations are reported
//! with JSON-pointer paths so batch failures are actionable.

use polystab_core::action::{presets as rep_presets, Point, Representation, Space};
use polystab_core::liealg::presets as group_presets;
use polystab_core::ReductiveStructure;
use serde_json::Value;

/// A fully validated problem.
#[derive(Debug)]
pub struct Problem {
    pub rep: Representation,
    pub points: Vec<(String, Point)>,
    pub zero_tolerance: Option<f64>,
    pub flow_tolerance: Option<f64>,
    pub max_iters: Option<usize>,
    pub component_tolerance: Option<f64>,
    pub starts_per_dim: Option<usize>,
    pub seed: u64,
}

/// Schema violations with their JSON-pointer locations.
#[derive(Debug)]
pub struct SchemaErrors(pub Vec<String>);

impl std::fmt::Display for SchemaErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.0 {
            writeln!(f, "schema error at {e}")?;
        }
        Ok(())
    }
}

fn field<'v>(v: &'v Value, ptr: &str, key: &str, errors: &mut Vec<String>) -> Option<&'v Value> {
    match v.get(key) {
        Some(x) => Some(x),
        None => {
            errors.push(format!("{ptr}/{key}: missing required field"));
            None
        }
    }
}

fn as_f64(v: &Value, ptr: &str, errors: &mut Vec<String>) -> Option<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            errors.push(format!("{ptr}: expected a finite number"));
            None
        }
    }
}

fn number_vec(v: &Value, ptr: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
    let arr = match v.as_array() {
        Some(a) => a,
        None => {
            errors.push(format!("{ptr}: expected an array of numbers"));
            return None;
        }
    };
    let mut out = Vec::with_capacity(arr.len());
    for (i, x) in arr.iter().enumerate() {
        out.push(as_f64(x, &format!("{ptr}/{i}"), errors)?);
    }
    Some(out)
}

/// Row-major nested array as a square matrix of the given size.
fn matrix(
    v: &Value,
    ptr: &str,
    expect: usize,
    errors: &mut Vec<String>,
) -> Option<nalgebra::DMatrix<f64>> {
    let rows = match v.as_array() {
        Some(a) => a,
        None => {
            errors.push(format!("{ptr}: expected a nested array (matrix)"));
            return None;
        }
    };
    if rows.len() != expect {
        errors.push(format!("{ptr}: expected {expect} rows, got {}", rows.len()));
        return None;
    }
    let mut data = Vec::with_capacity(expect * expect);
    for (i, row) in rows.iter().enumerate() {
        let r = number_vec(row, &format!("{ptr}/{i}"), errors)?;
        if r.len() != expect {
            errors.push(format!(
                "{ptr}/{i}: expected {expect} columns, got {}",
                r.len()
            ));
            return None;
        }
        data.extend(r);
    }
    Some(nalgebra::DMatrix::from_row_slice(expect, expect, &data))
}

fn matrix_list(
    v: &Value,
    ptr: &str,
    expect: usize,
    errors: &mut Vec<String>,
) -> Option<Vec<nalgebra::DMatrix<f64>>> {
    let arr = match v.as_array() {
        Some(a) => a,
        None => {
            errors.push(format!("{ptr}: expected an array of matrices"));
            return None;
        }
    };
    let mut out = Vec::with_capacity(arr.len());
    for (i, m) in arr.iter().enumerate() {
        out.push(matrix(m, &format!("{ptr}/{i}"), expect, errors)?);
    }
    Some(out)
}

fn parse_group(v: &Value, errors: &mut Vec<String>) -> Option<ReductiveStructure> {
    match v {
        Value::String(name) => match group_presets::by_name(name) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("/group: {e}"));
                None
            }
        },
        Value::Object(_) => {
            let dim = field(v, "/group", "ambient_dim", errors)?;
            let dim = dim.as_u64().map(|d| d as usize).or_else(|| {
                errors.push("/group/ambient_dim: expected a positive integer".into());
                None
            })?;
            let bk = field(v, "/group", "basis_k", errors)?;
            let bk = matrix_list(bk, "/group/basis_k", dim, errors)?;
            let bp = field(v, "/group", "basis_p", errors)?;
            let bp = matrix_list(bp, "/group/basis_p", dim, errors)?;
            match ReductiveStructure::new(dim, bk, bp) {
                Ok(s) => Some(s),
                Err(e) => {
                    errors.push(format!("/group: {e}"));
                    None
                }
            }
        }
        _ => {
            errors.push("/group: expected a preset name or an object".into());
            None
        }
    }
}

fn parse_representation(
    v: &Value,
    structure: &ReductiveStructure,
    space: Space,
    errors: &mut Vec<String>,
) -> Option<Representation> {
    match v {
        Value::String(name) => match rep_presets::by_name(structure, name, space) {
            Ok(r) => Some(r),
            Err(e) => {
                errors.push(format!("/representation: {e}"));
                None
            }
        },
        Value::Object(_) => {
            let dim = field(v, "/representation", "dim_v", errors)?;
            let dim = dim.as_u64().map(|d| d as usize).or_else(|| {
                errors.push("/representation/dim_v: expected a positive integer".into());
                None
            })?;
            let rk = field(v, "/representation", "rho_k", errors)?;
            let rk = matrix_list(rk, "/representation/rho_k", dim, errors)?;
            let rp = field(v, "/representation", "rho_p", errors)?;
            let rp = matrix_list(rp, "/representation/rho_p", dim, errors)?;
            match Representation::new(structure.clone(), dim, rk, rp, space) {
                Ok(r) => Some(r),
                Err(e) => {
                    errors.push(format!("/representation: {e}"));
                    None
                }
            }
        }
        _ => {
            errors.push("/representation: expected a preset name or an object".into());
            None
        }
    }
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str) -> Result<Problem, SchemaErrors> {
    let mut errors = Vec::new();
    let root: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Err(SchemaErrors(vec![format!("/: invalid JSON: {e}")])),
    };
    if !root.is_object() {
        return Err(SchemaErrors(vec!["/: expected a JSON object".into()]));
    }

    let space = match field(&root, "", "space", &mut errors).and_then(|v| v.as_str()) {
        Some("affine") => Some(Space::Affine),
        Some("projective") => Some(Space::Projective),
        Some(other) => {
            errors.push(format!(
                "/space: expected \"affine\" or \"projective\", got {other:?}"
            ));
            None
        }
        None => {
            if errors.is_empty() {
                errors.push("/space: expected a string".into());
            }
            None
        }
    };

    let structure =
        field(&root, "", "group", &mut errors).and_then(|g| parse_group(g, &mut errors));

    let rep = match (structure.as_ref(), space) {
        (Some(s), Some(sp)) => field(&root, "", "representation", &mut errors)
            .and_then(|r| parse_representation(r, s, sp, &mut errors)),
        _ => None,
    };

    let mut points = Vec::new();
    if let Some(parray) = field(&root, "", "points", &mut errors) {
        match parray.as_array() {
            Some(arr) => {
                let mut seen = std::collections::HashSet::new();
                for (i, p) in arr.iter().enumerate() {
                    let ptr = format!("/points/{i}");
                    let id = field(p, &ptr, "id", &mut errors).and_then(|v| {
                        v.as_str().map(str::to_string).or_else(|| {
                            errors.push(format!("{ptr}/id: expected a string"));
                            None
                        })
                    });
                    let vec = field(p, &ptr, "vec", &mut errors)
                        .and_then(|v| number_vec(v, &format!("{ptr}/vec"), &mut errors));
                    if let (Some(id), Some(vec), Some(rep)) = (id, vec, rep.as_ref()) {
                        if !seen.insert(id.clone()) {
                            errors.push(format!("{ptr}/id: duplicate id {id:?}"));
                            continue;
                        }
                        match rep.point(vec) {
                            Ok(pt) => points.push((id, pt)),
                            Err(e) => errors.push(format!("{ptr}/vec: {e}")),
                        }
                    }
                }
            }
            None => errors.push("/points: expected an array".into()),
        }
    }

    let mut zero_tolerance = None;
    let mut flow_tolerance = None;
    let mut max_iters = None;
    let mut component_tolerance = None;
    let mut starts_per_dim = None;
    if let Some(tols) = root.get("tolerances") {
        if !tols.is_object() {
            errors.push("/tolerances: expected an object".into());
        } else {
            if let Some(v) = tols.get("zero_tolerance") {
                zero_tolerance = as_f64(v, "/tolerances/zero_tolerance", &mut errors);
            }
            if let Some(v) = tols.get("flow_tolerance") {
                flow_tolerance = as_f64(v, "/tolerances/flow_tolerance", &mut errors);
            }
            if let Some(v) = tols.get("component_tolerance") {
                component_tolerance = as_f64(v, "/tolerances/component_tolerance", &mut errors);
            }
            if let Some(v) = tols.get("max_iters") {
                match v.as_u64() {
                    Some(n) => max_iters = Some(n as usize),
                    None => errors.push("/tolerances/max_iters: expected an integer".into()),
                }
            }
            if let Some(v) = tols.get("starts_per_dim") {
                match v.as_u64() {
                    Some(n) if n > 0 => starts_per_dim = Some(n as usize),
                    _ => errors
                        .push("/tolerances/starts_per_dim: expected a positive integer".into()),
                }
            }
        }
    }

    let seed = match root.get("seed") {
        None => 0,
        Some(v) => match v.as_u64() {
            Some(s) => s,
            None => {
                errors.push("/seed: expected a non-negative integer".into());
                0
            }
        },
    };

    if !errors.is_empty() {
        return Err(SchemaErrors(errors));
    }
    Ok(Problem {
        rep: rep.expect("validated"),
        points,
        zero_tolerance,
        flow_tolerance,
        max_iters,
        component_tolerance,
        starts_per_dim,
        seed,
    })
}
