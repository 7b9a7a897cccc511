//! JSON encoding of complex matrices: row-major nested lists of `[re, im]` pairs.

use attractor::{ComplexMatrix, C64};
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Serializes a complex number as `[re, im]`.
#[derive(Debug, Clone, Copy)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

/// Serializes a matrix as a list of rows.
#[derive(Debug, Clone)]
pub struct Mat(pub ComplexMatrix);

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = &self.0;
        let mut rows = s.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            let row: Vec<Cx> = (0..m.ncols()).map(|j| Cx(m[(i, j)])).collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

pub fn mats(items: &[ComplexMatrix]) -> Vec<Mat> {
    items.iter().cloned().map(Mat).collect()
}

pub fn cxs(items: &[C64]) -> Vec<Cx> {
    items.iter().copied().map(Cx).collect()
}

pub fn parse_complex(v: &Value, path: &str) -> Result<C64, CliError> {
    let pair = v.as_array().filter(|a| a.len() == 2);
    match pair.map(|a| (a[0].as_f64(), a[1].as_f64())) {
        Some((Some(re), Some(im))) => Ok(C64::new(re, im)),
        _ => Err(CliError::input(format!("{path}: expected a complex number encoded as [re, im]"))),
    }
}

pub fn parse_matrix(v: &Value, path: &str) -> Result<ComplexMatrix, CliError> {
    let rows = v.as_array().ok_or_else(|| CliError::input(format!("{path}: expected a matrix (list of rows)")))?;
    if rows.is_empty() {
        return Err(CliError::input(format!("{path}: matrix has no rows")));
    }
    let mut entries = Vec::new();
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| CliError::input(format!("{path}[{i}]: expected a row (list of [re, im] pairs)")))?;
        match width {
            None if row.is_empty() => return Err(CliError::input(format!("{path}[{i}]: row is empty"))),
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::input(format!("{path}[{i}]: row has {} entries, expected {w}", row.len())))
            }
            _ => {}
        }
        for (j, z) in row.iter().enumerate() {
            entries.push(parse_complex(z, &format!("{path}[{i}][{j}]"))?);
        }
    }
    let cols = width.unwrap_or(0);
    Ok(ComplexMatrix::from_row_slice(rows.len(), cols, &entries))
}

pub fn parse_matrix_list(v: &Value, path: &str) -> Result<Vec<ComplexMatrix>, CliError> {
    let items = v.as_array().ok_or_else(|| CliError::input(format!("{path}: expected a list of matrices")))?;
    items.iter().enumerate().map(|(k, m)| parse_matrix(m, &format!("{path}[{k}]"))).collect()
}

pub fn parse_usize(v: &Value, path: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| CliError::input(format!("{path}: expected a non-negative integer")))
}

pub fn parse_usize_list(v: &Value, path: &str) -> Result<Vec<usize>, CliError> {
    let items = v.as_array().ok_or_else(|| CliError::input(format!("{path}: expected a list of integers")))?;
    items.iter().enumerate().map(|(k, x)| parse_usize(x, &format!("{path}[{k}]"))).collect()
}

/// Converts a one-based permutation from a file into the zero-based form.
pub fn parse_permutation(v: &Value, path: &str) -> Result<Vec<usize>, CliError> {
    let perm = parse_usize_list(v, path)?;
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for (k, &p) in perm.iter().enumerate() {
        if p == 0 || p > n || seen[p - 1] {
            return Err(CliError::input(format!(
                "{path}: not a permutation of 1..{n} (entry {} is {p})",
                k + 1
            )));
        }
        seen[p - 1] = true;
        out.push(p - 1);
    }
    Ok(out)
}

pub fn one_based(items: &[usize]) -> Vec<usize> {
    items.iter().map(|k| k + 1).collect()
}

/// Rejects keys outside `allowed` so that typos do not silently change the input.
pub fn check_keys(obj: &serde_json::Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), CliError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(CliError::input(format!("{path}: unknown field '{k}' (allowed: {})", allowed.join(", ")))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn matrix_roundtrip_is_row_major() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, -1.0), C64::new(0.0, 3.0), C64::new(4.0, 0.0)]);
        let v = serde_json::to_value(Mat(m.clone())).unwrap();
        assert_eq!(v, json!([[[1.0, 0.0], [2.0, -1.0]], [[0.0, 3.0], [4.0, 0.0]]]));
        assert_eq!(parse_matrix(&v, "m").unwrap(), m);
    }

    #[test]
    fn malformed_matrices_name_the_path() {
        let err = parse_matrix(&json!([[[1.0, 0.0]], [[1.0]]]), "kraus[0]").unwrap_err();
        assert!(err.to_string().contains("kraus[0][1][0]"), "{err}");
        let err = parse_matrix(&json!([[[1.0, 0.0]], []]), "choi").unwrap_err();
        assert!(err.to_string().contains("choi[1]"), "{err}");
        assert!(parse_matrix(&json!([]), "x").is_err());
        assert!(parse_complex(&json!("1+2i"), "z").is_err());
    }

    #[test]
    fn permutations_are_one_based() {
        assert_eq!(parse_permutation(&json!([2, 1, 3]), "p").unwrap(), vec![1, 0, 2]);
        assert!(parse_permutation(&json!([0, 1]), "p").is_err());
        assert!(parse_permutation(&json!([1, 1]), "p").is_err());
        assert_eq!(one_based(&[1, 0]), vec![2, 1]);
    }
}
