//! Certificate JSON and CSV output.

use std::fmt::Write as _;

use mw1::spectra::Table;
use mw1::{BlockVector, CMat, Certificate, FluxPoint, HermitianMatrix, MatrixField, Structure};
use serde_json::{json, Value};

use crate::problem::{matrix, InputError};

fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn flux_json(p: &FluxPoint) -> Value {
    json!({
        "spatial": p.spatial.as_ref().map(matrix_json),
        "rotational": p.rotational.as_ref().map(|u| Value::Array(u.blocks().iter().map(matrix_json).collect())),
        "source": p.source.as_ref().map(|v| matrix_json(v.matrix())),
    })
}

pub fn certificate_json(cert: &Certificate) -> Value {
    json!({
        "value": cert.primal_value,
        "dual_value": cert.dual_value,
        "gap": cert.gap,
        "residual": cert.residual,
        "iterations": cert.iterations,
        "converged": cert.converged,
        "flux": cert.flux.iter().map(flux_json).collect::<Vec<_>>(),
        "potential": cert.potential.iter().map(|f| matrix_json(f.matrix())).collect::<Vec<_>>(),
    })
}

/// Flux and potential of a certificate file.
pub fn load_certificate(text: &str) -> Result<(Vec<FluxPoint>, Vec<HermitianMatrix>), InputError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| InputError { path: String::new(), message: e.to_string() })?;
    let at = |path: &str, message: &str| InputError { path: path.to_string(), message: message.to_string() };
    let flux = doc
        .get("flux")
        .and_then(Value::as_array)
        .ok_or_else(|| at("/flux", "expected an array"))?;
    let mut points = Vec::with_capacity(flux.len());
    for (k, p) in flux.iter().enumerate() {
        let path = format!("/flux/{k}");
        let field = |key: &str| p.get(key).filter(|v| !v.is_null());
        let spatial = field("spatial").map(|v| matrix(v, &format!("{path}/spatial"))).transpose()?;
        let source = match field("source") {
            Some(v) => Some(
                HermitianMatrix::new(matrix(v, &format!("{path}/source"))?)
                    .map_err(|e| at(&format!("{path}/source"), &e.to_string()))?,
            ),
            None => None,
        };
        let rotational = match field("rotational") {
            Some(v) => {
                let rp = format!("{path}/rotational");
                let blocks = v
                    .as_array()
                    .ok_or_else(|| at(&rp, "expected an array"))?
                    .iter()
                    .enumerate()
                    .map(|(b, m)| matrix(m, &format!("{rp}/{b}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let tags = vec![Structure::General; blocks.len()];
                Some(BlockVector::new(blocks, tags).map_err(|e| at(&rp, &e.to_string()))?)
            }
            None => None,
        };
        points.push(FluxPoint { spatial, rotational, source });
    }
    let potential = doc
        .get("potential")
        .and_then(Value::as_array)
        .ok_or_else(|| at("/potential", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let path = format!("/potential/{k}");
            HermitianMatrix::new(matrix(m, &path)?).map_err(|e| at(&path, &e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((points, potential))
}

pub fn table_csv(table: &Table) -> String {
    let mut out = String::from("beta1,beta2,pair,value,dual_value,gap,relative_gap,iterations,converged,reference\n");
    for row in &table.rows {
        for e in &row.entries {
            let reference = e.reference.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{}-{},{:.6},{:.6},{:.3e},{:.3e},{},{},{}",
                row.beta.0,
                row.beta.1,
                e.pair.0.name(),
                e.pair.1.name(),
                e.value,
                e.dual_value,
                e.gap,
                e.gap / e.value.max(1.0),
                e.iterations,
                e.converged,
                reference
            );
        }
    }
    out
}

/// One row per grid point and field: `theta,field,re00,im00,re01,…`.
pub fn fields_csv(fields: &[(&str, &MatrixField)]) -> String {
    let n = fields.first().map_or(0, |(_, f)| f.n());
    let mut out = String::from("theta,field");
    for i in 0..n {
        for j in 0..n {
            let _ = write!(out, ",re{i}{j},im{i}{j}");
        }
    }
    out.push('\n');
    for (name, field) in fields {
        for (k, v) in field.values().iter().enumerate() {
            let _ = write!(out, "{},{name}", field.grid().coordinate(k));
            for z in v.matrix().transpose().iter() {
                let _ = write!(out, ",{},{}", z.re, z.im);
            }
            out.push('\n');
        }
    }
    out
}
