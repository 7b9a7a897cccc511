//! Reading channel files, unfold specs and saved decomposition reports.

use std::io::Read;
use std::path::Path;

use attractor::channel::{is_cptp, markovian_channel, zoo, ZooParams};
use attractor::structure::{AttractorDecomposition, Block};
use attractor::unfold::{SpecBlock, UnfoldSpec};
use attractor::{Channel, GklsGenerator, Subspace, Tolerances};
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::json::{check_keys, parse_matrix, parse_matrix_list, parse_permutation, parse_usize, parse_usize_list};

const CHANNEL_FORMS: [&str; 5] = ["kraus", "choi", "superop", "gkls", "zoo"];

/// Reads JSON from a path, or from stdin when the path is `-`.
pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::input(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: malformed JSON: {e}", path.display())))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object().ok_or_else(|| CliError::input(format!("{path}: expected a JSON object")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, CliError> {
    obj.get(key).ok_or_else(|| CliError::input(format!("{path}: missing required field '{key}'")))
}

/// Parses a channel file and rejects anything that is not CPTP.
///
/// Exactly one of `kraus`, `choi`, `superop`, `gkls` or `zoo` must be present
/// next to `dim`. Generators are checked after exponentiation.
pub fn load_channel(v: &Value, tol: &Tolerances) -> Result<Channel, CliError> {
    let obj = object(v, "channel")?;
    let mut allowed = vec!["dim", "description"];
    allowed.extend(CHANNEL_FORMS);
    check_keys(obj, &allowed, "channel")?;
    let dim = parse_usize(field(obj, "dim", "channel")?, "dim")?;
    if dim == 0 {
        return Err(CliError::input("dim: must be positive"));
    }
    let present: Vec<&'static str> = CHANNEL_FORMS.iter().copied().filter(|k| obj.contains_key(*k)).collect();
    let form = match present.as_slice() {
        [one] => *one,
        [] => return Err(CliError::input(format!("channel: exactly one of {} is required", CHANNEL_FORMS.join(", ")))),
        many => return Err(CliError::input(format!("channel: conflicting representations {}", many.join(" and ")))),
    };
    let body = &obj[form];
    let channel = match form {
        "kraus" => {
            let ops = parse_matrix_list(body, "kraus")?;
            if ops.is_empty() {
                return Err(CliError::input("kraus: at least one operator is required"));
            }
            for (k, a) in ops.iter().enumerate() {
                require_shape(a, dim, dim, &format!("kraus[{k}]"))?;
            }
            Channel::from_kraus(ops).map_err(invalid)?
        }
        "choi" => {
            let m = parse_matrix(body, "choi")?;
            require_shape(&m, dim * dim, dim * dim, "choi")?;
            Channel::from_choi(dim, m).map_err(invalid)?
        }
        "superop" => {
            let m = parse_matrix(body, "superop")?;
            require_shape(&m, dim * dim, dim * dim, "superop")?;
            Channel::from_superop(dim, m).map_err(invalid)?
        }
        "gkls" => {
            let g = object(body, "gkls")?;
            check_keys(g, &["hamiltonian", "noise_ops"], "gkls")?;
            let h = parse_matrix(field(g, "hamiltonian", "gkls")?, "gkls.hamiltonian")?;
            require_shape(&h, dim, dim, "gkls.hamiltonian")?;
            let noise = match g.get("noise_ops") {
                Some(n) => parse_matrix_list(n, "gkls.noise_ops")?,
                None => Vec::new(),
            };
            for (k, l) in noise.iter().enumerate() {
                require_shape(l, dim, dim, &format!("gkls.noise_ops[{k}]"))?;
            }
            let generator = GklsGenerator::new(h, noise).map_err(|e| CliError::input(format!("gkls: {e}")))?;
            markovian_channel(&generator)?
        }
        _ => load_zoo(body, dim)?,
    };
    if channel.dim() != dim {
        return Err(CliError::input(format!("dim: file says {dim} but the channel acts on dimension {}", channel.dim())));
    }
    check_cptp(&channel, tol, form)?;
    Ok(channel)
}

fn invalid(e: attractor::Error) -> CliError {
    CliError::input(e.to_string())
}

fn require_shape(m: &attractor::ComplexMatrix, rows: usize, cols: usize, path: &str) -> Result<(), CliError> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(CliError::input(format!("{path}: expected a {rows}x{cols} matrix, found {}x{}", m.nrows(), m.ncols())))
    }
}

fn check_cptp(ch: &Channel, tol: &Tolerances, form: &str) -> Result<(), CliError> {
    let r = is_cptp(ch, tol);
    if !r.cp {
        return Err(CliError::input(format!(
            "{form}: map is not completely positive (minimum Choi eigenvalue {:e}, Hermiticity defect {:e})",
            r.min_choi_eig, r.choi_hermiticity_defect
        )));
    }
    if !r.tp {
        return Err(CliError::input(format!("{form}: map is not trace preserving (defect {:e})", r.tp_defect)));
    }
    Ok(())
}

fn load_zoo(v: &Value, dim: usize) -> Result<Channel, CliError> {
    let z = object(v, "zoo")?;
    check_keys(z, &["name", "params", "seed"], "zoo")?;
    let name = field(z, "name", "zoo")?
        .as_str()
        .ok_or_else(|| CliError::input("zoo.name: expected a string"))?;
    let mut params = ZooParams { dim: Some(dim), ..Default::default() };
    if let Some(seed) = z.get("seed") {
        params.seed = Some(seed.as_u64().ok_or_else(|| CliError::input("zoo.seed: expected a non-negative integer"))?);
    }
    if let Some(p) = z.get("params") {
        let p = object(p, "zoo.params")?;
        check_keys(p, &["rho", "unitary", "rank", "blocks", "num_kraus", "num_noise"], "zoo.params")?;
        if let Some(x) = p.get("rho") {
            params.rho = Some(parse_matrix(x, "zoo.params.rho")?);
        }
        if let Some(x) = p.get("unitary") {
            params.unitary = Some(parse_matrix(x, "zoo.params.unitary")?);
        }
        if let Some(x) = p.get("rank") {
            params.rank = Some(parse_usize(x, "zoo.params.rank")?);
        }
        if let Some(x) = p.get("blocks") {
            params.blocks = Some(parse_usize_list(x, "zoo.params.blocks")?);
        }
        if let Some(x) = p.get("num_kraus") {
            params.num_kraus = Some(parse_usize(x, "zoo.params.num_kraus")?);
        }
        if let Some(x) = p.get("num_noise") {
            params.num_noise = Some(parse_usize(x, "zoo.params.num_noise")?);
        }
    }
    zoo(name, &params).map_err(|e| CliError::input(format!("zoo: {e}")))
}

/// Parses an unfold spec. The permutation is one-based in the file.
pub fn load_spec(v: &Value, tol: &Tolerances) -> Result<UnfoldSpec, CliError> {
    let obj = object(v, "spec")?;
    check_keys(obj, &["dim_h0_perp", "blocks", "permutation", "sink_state", "description"], "spec")?;
    let dim_h0_perp = parse_usize(field(obj, "dim_h0_perp", "spec")?, "dim_h0_perp")?;
    let items = field(obj, "blocks", "spec")?
        .as_array()
        .ok_or_else(|| CliError::input("blocks: expected a list of blocks"))?;
    let mut blocks = Vec::with_capacity(items.len());
    for (k, b) in items.iter().enumerate() {
        let path = format!("blocks[{k}]");
        let o = object(b, &path)?;
        check_keys(o, &["d", "m", "rho", "unitary"], &path)?;
        blocks.push(SpecBlock {
            d: parse_usize(field(o, "d", &path)?, &format!("{path}.d"))?,
            m: parse_usize(field(o, "m", &path)?, &format!("{path}.m"))?,
            rho: parse_matrix(field(o, "rho", &path)?, &format!("{path}.rho"))?,
            unitary: parse_matrix(field(o, "unitary", &path)?, &format!("{path}.unitary"))?,
        });
    }
    let permutation = parse_permutation(field(obj, "permutation", "spec")?, "permutation")?;
    let sink_state = match obj.get("sink_state") {
        None | Some(Value::Null) => None,
        Some(s) => Some(parse_matrix(s, "sink_state")?),
    };
    let spec = UnfoldSpec { dim_h0_perp, blocks, permutation, sink_state };
    spec.validate(tol).map_err(invalid)?;
    Ok(spec)
}

/// Rebuilds the decomposition stored in a `decompose` report.
pub fn load_decomposition(v: &Value, dim: usize) -> Result<AttractorDecomposition, CliError> {
    let obj = object(v, "report")?;
    if obj.get("command").and_then(Value::as_str) != Some("decompose") {
        return Err(CliError::input("report: expected the output of the decompose command"));
    }
    let rdim = parse_usize(field(obj, "dim", "report")?, "report.dim")?;
    if rdim != dim {
        return Err(CliError::input(format!("report.dim: report is for dimension {rdim}, channel has dimension {dim}")));
    }
    let h0 = parse_matrix(field(obj, "h0_isometry", "report")?, "report.h0_isometry")?;
    if h0.nrows() != dim {
        return Err(CliError::input(format!("report.h0_isometry: expected {dim} rows, found {}", h0.nrows())));
    }
    let items = field(obj, "blocks", "report")?
        .as_array()
        .ok_or_else(|| CliError::input("report.blocks: expected a list of blocks"))?;
    let mut blocks = Vec::with_capacity(items.len());
    for (k, b) in items.iter().enumerate() {
        let path = format!("report.blocks[{k}]");
        let o = object(b, &path)?;
        let d = parse_usize(field(o, "d", &path)?, &format!("{path}.d"))?;
        let m = parse_usize(field(o, "m", &path)?, &format!("{path}.m"))?;
        let rho = parse_matrix(field(o, "rho", &path)?, &format!("{path}.rho"))?;
        let unitary = parse_matrix(field(o, "unitary", &path)?, &format!("{path}.unitary"))?;
        let isometry = parse_matrix(field(o, "isometry", &path)?, &format!("{path}.isometry"))?;
        require_shape(&rho, m, m, &format!("{path}.rho"))?;
        require_shape(&unitary, d, d, &format!("{path}.unitary"))?;
        require_shape(&isometry, dim, d * m, &format!("{path}.isometry"))?;
        blocks.push(Block { d, m, isometry, rho, unitary });
    }
    let permutation = parse_permutation(field(obj, "permutation", "report")?, "report.permutation")?;
    if permutation.len() != blocks.len() {
        return Err(CliError::input(format!(
            "report.permutation: has {} entries for {} blocks",
            permutation.len(),
            blocks.len()
        )));
    }
    Ok(AttractorDecomposition { h0: Subspace { isometry: h0 }, blocks, permutation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn message(r: Result<Channel, CliError>) -> String {
        match r {
            Err(CliError::Input(m)) => m,
            Err(e) => panic!("expected an input error, got {e}"),
            Ok(_) => panic!("expected an error"),
        }
    }

    #[test]
    fn every_form_loads_the_same_channel() {
        let x = json!([[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]);
        let kraus = load_channel(&json!({"dim": 2, "kraus": [x]}), &tol()).unwrap();
        let s = crate::json::Mat(kraus.superop());
        let c = crate::json::Mat(kraus.choi());
        let from_s = load_channel(&json!({"dim": 2, "superop": s}), &tol()).unwrap();
        let from_c = load_channel(&json!({"dim": 2, "choi": c}), &tol()).unwrap();
        assert!(attractor::linalg::max_abs(&(from_s.superop() - kraus.superop())) < 1e-14);
        assert!(attractor::linalg::max_abs(&(from_c.superop() - kraus.superop())) < 1e-14);
    }

    #[test]
    fn violations_name_the_invariant() {
        let half = json!([[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]);
        assert!(message(load_channel(&json!({"dim": 2, "kraus": [half]}), &tol())).contains("trace preserving"));
        let neg = json!([
            [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [-0.5, 0.0], [0.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.0], [0.5, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
        ]);
        assert!(message(load_channel(&json!({"dim": 2, "choi": neg}), &tol())).contains("completely positive"));
        assert!(message(load_channel(&json!({"dim": 2}), &tol())).contains("exactly one"));
        let both = json!({"dim": 2, "zoo": {"name": "identity"}, "kraus": []});
        assert!(message(load_channel(&both, &tol())).contains("conflicting"));
        let typo = json!({"dim": 2, "zoo": {"name": "identity", "sed": 1}});
        assert!(message(load_channel(&typo, &tol())).contains("'sed'"));
        assert!(message(load_channel(&json!({"dim": 2, "zoo": {"name": "nope"}}), &tol())).contains("nope"));
    }

    #[test]
    fn zoo_dimension_must_agree() {
        let v = json!({"dim": 3, "zoo": {"name": "pauli_xz"}});
        assert!(message(load_channel(&v, &tol())).contains("dimension 2"));
    }

    #[test]
    fn spec_permutation_is_one_based() {
        let one = json!([[[1.0, 0.0]]]);
        let v = json!({
            "dim_h0_perp": 0,
            "blocks": [{"d": 1, "m": 1, "rho": one, "unitary": one}, {"d": 1, "m": 1, "rho": one, "unitary": one}],
            "permutation": [2, 1]
        });
        assert_eq!(load_spec(&v, &tol()).unwrap().permutation, vec![1, 0]);
    }
}
