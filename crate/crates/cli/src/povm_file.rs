//! POVM files: a JSON array of elements, each a row-major array of rows of
//! `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64;
use qadv_core::qmat::{validate_povm, CMatrix, HermitianMatrix};
use qadv_core::Povm;

use crate::CliError;

type Element = Vec<Vec<[f64; 2]>>;

pub fn to_json(povm: &Povm) -> serde_json::Value {
    let elements: Vec<Element> = povm
        .elements()
        .iter()
        .map(|e| {
            let m = e.matrix();
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        })
        .collect();
    serde_json::json!(elements)
}

pub fn from_json(value: serde_json::Value) -> Result<Povm, CliError> {
    let raw: Vec<Element> =
        serde_json::from_value(value).map_err(|e| CliError::Validation(format!("malformed POVM: {e}")))?;
    let mut elements = Vec::with_capacity(raw.len());
    for rows in raw {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(CliError::Validation("POVM elements must be square".into()));
        }
        let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        elements.push(HermitianMatrix::new(m)?);
    }
    Ok(validate_povm(elements)?)
}

pub fn read(path: &Path) -> Result<Povm, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("malformed POVM JSON: {e}")))?;
    from_json(value)
}
