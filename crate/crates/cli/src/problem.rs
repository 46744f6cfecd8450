//! Problem files: JSON with complex entries as `[re, im]` pairs, validated
//! by hand so that every error carries a JSON-pointer path.

use std::fmt;
use std::f64::consts::PI;

use mw1::spectra::{sample_spectrum, SpectrumId, Variant};
use mw1::{
    Boundary, CMat, DensityLikeMatrix, Grid1D, HermitianMatrix, LFamily, MatrixField, Params, ProblemKind,
    SolverConfig, C64,
};
use serde_json::{Map, Value};

/// Malformed input, located by a JSON pointer (`""` is the document root).
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

impl std::error::Error for InputError {}

fn err(path: &str, message: impl Into<String>) -> InputError {
    InputError { path: path.to_string(), message: message.into() }
}

fn child(path: &str, key: impl fmt::Display) -> String {
    format!("{path}/{key}")
}

#[derive(Clone, Debug)]
pub enum Marginal {
    Matrix(DensityLikeMatrix),
    Field(MatrixField),
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub kind: ProblemKind,
    pub rho0: Marginal,
    pub rho1: Marginal,
    pub l: LFamily,
    pub params: Params,
    pub grid: Option<Grid1D>,
    pub solver: SolverConfig,
}

/// Grid settings that the command line may override.
#[derive(Clone, Copy, Debug, Default)]
pub struct GridOverrides {
    pub points: Option<usize>,
    pub boundary: Option<Boundary>,
    pub variant: Option<Variant>,
}

const TOP_KEYS: [&str; 9] = ["kind", "rho0", "rho1", "L", "alpha", "beta1", "beta2", "grid", "solver"];

pub fn parse_kind(s: &str) -> Option<ProblemKind> {
    Some(match s {
        "balanced_matrix" | "w1" => ProblemKind::BalancedMatrix,
        "unbalanced_matrix" | "v1" => ProblemKind::UnbalancedMatrix,
        "balanced_field" | "field_w1" => ProblemKind::BalancedField,
        "unbalanced_field" | "field_v1" => ProblemKind::UnbalancedField,
        _ => return None,
    })
}

pub fn parse_problem(text: &str, overrides: GridOverrides) -> Result<Problem, InputError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
    let obj = object(&doc, "")?;
    reject_unknown(obj, "", &TOP_KEYS)?;

    let kind_value = obj.get("kind").ok_or_else(|| err("", "missing key \"kind\""))?;
    let kind_str = kind_value.as_str().ok_or_else(|| err("/kind", "expected a string"))?;
    let kind = parse_kind(kind_str).ok_or_else(|| {
        err(
            "/kind",
            format!("unknown kind {kind_str:?}; expected balanced_matrix, unbalanced_matrix, balanced_field or unbalanced_field"),
        )
    })?;

    let l_value = obj.get("L").ok_or_else(|| err("", "missing key \"L\""))?;
    let l = parse_family(l_value, "/L")?;

    let number = |key: &str| -> Result<Option<f64>, InputError> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => {
                let x = v.as_f64().ok_or_else(|| err(&child("", key), "expected a number"))?;
                if !(x > 0.0 && x.is_finite()) {
                    return Err(err(&child("", key), "must be a positive number"));
                }
                Ok(Some(x))
            }
        }
    };
    let defaults = Params::default();
    let params = Params {
        alpha: number("alpha")?.unwrap_or(defaults.alpha),
        beta1: number("beta1")?.unwrap_or(defaults.beta1),
        beta2: number("beta2")?.unwrap_or(defaults.beta2),
    };

    let solver = match obj.get("solver") {
        None => SolverConfig::default(),
        Some(v) => {
            object(v, "/solver")?;
            let cfg: SolverConfig = serde_json::from_value(v.clone()).map_err(|e| err("/solver", e.to_string()))?;
            cfg.validate().map_err(|e| err("/solver", e.to_string()))?;
            cfg
        }
    };

    let (grid, rho0, rho1) = if kind.is_field() {
        let grid = parse_grid(obj.get("grid"), overrides)?;
        let variant = overrides.variant;
        let rho0 = parse_field(required(obj, "rho0")?, "/rho0", &grid, variant)?;
        let rho1 = parse_field(required(obj, "rho1")?, "/rho1", &grid, variant)?;
        (Some(grid), Marginal::Field(rho0), Marginal::Field(rho1))
    } else {
        if obj.contains_key("grid") {
            return Err(err("/grid", "matrix problems take no grid"));
        }
        let rho0 = parse_density(required(obj, "rho0")?, "/rho0")?;
        let rho1 = parse_density(required(obj, "rho1")?, "/rho1")?;
        (None, Marginal::Matrix(rho0), Marginal::Matrix(rho1))
    };
    let n = match &rho0 {
        Marginal::Matrix(m) => m.n(),
        Marginal::Field(f) => f.n(),
    };
    let n1 = match &rho1 {
        Marginal::Matrix(m) => m.n(),
        Marginal::Field(f) => f.n(),
    };
    if n1 != n {
        return Err(err("/rho1", format!("size {n1} differs from rho0 size {n}")));
    }
    if l.n() != n {
        return Err(err("/L", format!("matrices are {}×{}, marginals are {n}×{n}", l.n(), l.n())));
    }
    Ok(Problem { kind, rho0, rho1, l, params, grid, solver })
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, InputError> {
    obj.get(key).ok_or_else(|| err("", format!("missing key {key:?}")))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, InputError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn reject_unknown(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), InputError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(err(&child(path, k), "unknown key")),
        None => Ok(()),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, InputError> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn complex(v: &Value, path: &str) -> Result<C64, InputError> {
    let pair = array(v, path).map_err(|_| err(path, "expected a [re, im] pair"))?;
    if pair.len() != 2 {
        return Err(err(path, "expected a [re, im] pair"));
    }
    let part = |i: usize| {
        pair[i]
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(&child(path, i), "expected a finite number"))
    };
    Ok(C64::new(part(0)?, part(1)?))
}

/// Row-major square complex matrix.
pub fn matrix(v: &Value, path: &str) -> Result<CMat, InputError> {
    let rows = array(v, path)?;
    let n = rows.len();
    if n == 0 {
        return Err(err(path, "matrix must be non-empty"));
    }
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let rp = child(path, i);
        let entries = array(row, &rp)?;
        if entries.len() != n {
            return Err(err(&rp, format!("row has {} entries, expected {n}", entries.len())));
        }
        for (j, e) in entries.iter().enumerate() {
            m[(i, j)] = complex(e, &child(&rp, j))?;
        }
    }
    Ok(m)
}

fn hermitian(v: &Value, path: &str) -> Result<HermitianMatrix, InputError> {
    HermitianMatrix::new(matrix(v, path)?).map_err(|e| err(path, e.to_string()))
}

fn parse_density(v: &Value, path: &str) -> Result<DensityLikeMatrix, InputError> {
    DensityLikeMatrix::new(hermitian(v, path)?).map_err(|e| err(path, e.to_string()))
}

fn parse_family(v: &Value, path: &str) -> Result<LFamily, InputError> {
    let items = array(v, path)?;
    let blocks = items
        .iter()
        .enumerate()
        .map(|(k, m)| hermitian(m, &child(path, k)))
        .collect::<Result<Vec<_>, _>>()?;
    LFamily::new(blocks).map_err(|e| err(path, e.to_string()))
}

fn parse_grid(v: Option<&Value>, overrides: GridOverrides) -> Result<Grid1D, InputError> {
    let (mut points, mut spacing, mut boundary) = (None, None, Boundary::Periodic);
    if let Some(v) = v {
        let obj = object(v, "/grid")?;
        reject_unknown(obj, "/grid", &["M", "h", "boundary"])?;
        if let Some(m) = obj.get("M") {
            let m = m
                .as_u64()
                .filter(|&m| m >= 2)
                .ok_or_else(|| err("/grid/M", "expected an integer ≥ 2"))?;
            points = Some(m as usize);
        }
        match obj.get("h") {
            None => {}
            Some(Value::String(s)) if s == "auto2pi" => {}
            Some(h) => {
                let h = h
                    .as_f64()
                    .filter(|h| *h > 0.0 && h.is_finite())
                    .ok_or_else(|| err("/grid/h", "expected a positive number or \"auto2pi\""))?;
                spacing = Some(h);
            }
        }
        if let Some(b) = obj.get("boundary") {
            boundary = match b.as_str() {
                Some("periodic") => Boundary::Periodic,
                Some("zero_flux") => Boundary::ZeroFlux,
                _ => return Err(err("/grid/boundary", "expected \"periodic\" or \"zero_flux\"")),
            };
        }
    }
    let points = overrides.points.or(points).unwrap_or(512);
    let boundary = overrides.boundary.unwrap_or(boundary);
    let spacing = spacing.unwrap_or(2.0 * PI / points as f64);
    Grid1D::new(points, spacing, boundary).map_err(|e| err("/grid", e.to_string()))
}

fn parse_field(v: &Value, path: &str, grid: &Grid1D, variant: Option<Variant>) -> Result<MatrixField, InputError> {
    let field = match v {
        Value::Object(obj) => {
            reject_unknown(obj, path, &["spectrum", "variant"])?;
            let id_path = child(path, "spectrum");
            let id = match obj.get("spectrum").and_then(Value::as_str) {
                Some("rho0") => SpectrumId::Rho0,
                Some("rho1") => SpectrumId::Rho1,
                Some("rho2") => SpectrumId::Rho2,
                _ => return Err(err(&id_path, "expected \"rho0\", \"rho1\" or \"rho2\"")),
            };
            let file_variant = match obj.get("variant") {
                None => None,
                Some(v) => Some(
                    serde_json::from_value::<Variant>(v.clone())
                        .map_err(|_| err(&child(path, "variant"), "expected \"as_printed\" or \"canonical\""))?,
                ),
            };
            let variant = variant.or(file_variant).unwrap_or_default();
            sample_spectrum(id, grid, variant).map_err(|e| err(path, e.to_string()))?
        }
        Value::Array(items) => {
            if items.len() != grid.len() {
                return Err(err(path, format!("{} samples on a grid of {} points", items.len(), grid.len())));
            }
            let values = items
                .iter()
                .enumerate()
                .map(|(k, m)| hermitian(m, &child(path, k)))
                .collect::<Result<Vec<_>, _>>()?;
            MatrixField::new(*grid, values).map_err(|e| err(path, e.to_string()))?
        }
        _ => return Err(err(path, "expected an array of matrices or a {\"spectrum\": …} object")),
    };
    field.validate_density().map_err(|e| err(path, e.to_string()))?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAULI: &str = r#"{
        "kind": "balanced_matrix",
        "rho0": [[[1,0],[0,0]],[[0,0],[0,0]]],
        "rho1": [[[0,0],[0,0]],[[0,0],[1,0]]],
        "L": [[[[0,0],[1,0]],[[1,0],[0,0]]]]
    }"#;

    #[test]
    fn parses_pauli() {
        let p = parse_problem(PAULI, GridOverrides::default()).unwrap();
        assert_eq!(p.kind, ProblemKind::BalancedMatrix);
        assert_eq!(p.l.len(), 1);
    }

    #[test]
    fn error_paths() {
        let bad = PAULI.replace("[[[1,0],[0,0]],[[0,0],[0,0]]]", "[[[1,0],[0,0]],[[0,0],[0]]]");
        let e = parse_problem(&bad, GridOverrides::default()).unwrap_err();
        assert_eq!(e.path, "/rho0/1/1");
        let bad = PAULI.replace("\"kind\"", "\"extra\": 1, \"kind\"");
        assert_eq!(parse_problem(&bad, GridOverrides::default()).unwrap_err().path, "/extra");
        let bad = PAULI.replace("\"L\": [", "\"solver\": {\"tol_gapp\": 1}, \"L\": [");
        assert_eq!(parse_problem(&bad, GridOverrides::default()).unwrap_err().path, "/solver");
    }

    #[test]
    fn spectrum_fields() {
        let text = r#"{"kind": "unbalanced_field", "rho0": {"spectrum": "rho0"}, "rho1": {"spectrum": "rho2"},
            "L": [[[[1,0],[0,0]],[[0,0],[0,0]]], [[[1,0],[1,0]],[[1,0],[0,0]]]],
            "grid": {"M": 16, "h": "auto2pi"}}"#;
        let p = parse_problem(text, GridOverrides::default()).unwrap();
        assert_eq!(p.grid.unwrap().len(), 16);
        let p = parse_problem(text, GridOverrides { points: Some(8), ..Default::default() }).unwrap();
        assert_eq!(p.grid.unwrap().len(), 8);
    }
}
