//! End-to-end runs of the `attractor` binary on the bundled inputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use attractor::unfold::{random_shape, random_spec, UnfoldSpec};
use attractor::ComplexMatrix;
use serde_json::{json, Value};

const COMMANDS: [&str; 6] = ["spectrum", "attractor", "decompose", "cycles", "recover", "classify"];
const CHANNELS: [&str; 4] = ["pauli_xz", "wolf_indivisible", "amplitude_damping", "dephasing_gkls"];
const SPECS: [&str; 2] = ["two_cycle_spec", "rotating_block_spec"];

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn data(name: &str) -> String {
    crate_dir().join("data").join(format!("{name}.json")).display().to_string()
}

fn run_with(args: &[&str], env: &[(&str, &str)], stdin: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_attractor"));
    cmd.args(args).env_remove("ATTRACTOR_TOL_EQ");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("binary runs");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    } else {
        drop(child.stdin.take());
    }
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with(args, &[], None)
}

fn ok(args: &[&str]) -> Value {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r.json()
}

fn write_temp(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path.display().to_string()
}

fn validator(schema: &str) -> jsonschema::Validator {
    let path = crate_dir().join("schemas").join(format!("{schema}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_valid(schema: &str, v: &Value) {
    let errors: Vec<String> = validator(schema).iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn reports_conform_to_schemas() {
    for name in CHANNELS {
        assert_valid("channel", &serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap());
        for cmd in COMMANDS {
            assert_valid(cmd, &ok(&[cmd, &data(name)]));
        }
        assert_valid("verify", &ok(&["verify", &data(name)]));
    }
    for name in SPECS {
        assert_valid("unfold-spec", &serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap());
        let out = ok(&["unfold", &data(name)]);
        assert_valid("unfold", &out);
        assert_valid("channel", &out["channel"]);
    }
}

#[test]
fn schemas_reject_malformed_documents() {
    let channel = validator("channel");
    assert!(!channel.is_valid(&json!({"dim": 2})));
    assert!(!channel.is_valid(&json!({"dim": 2, "zoo": {"name": "pauli_xz"}, "choi": [[[1, 0]]]})));
    assert!(!channel.is_valid(&json!({"dim": 2, "kraus": [[[1, 0]]]})));
    let mut report = ok(&["classify", &data("pauli_xz")]);
    report["extra"] = json!(1);
    assert!(!validator("classify").is_valid(&report));
}

#[test]
fn indivisible_qubit_spectrum() {
    let out = ok(&["spectrum", &data("wolf_indivisible")]);
    let (re, im) = complex(&out["determinant"]);
    assert!((re + 1.0 / 27.0).abs() < 1e-12 && im.abs() < 1e-12, "{re} {im}");
    let mut eigs: Vec<f64> = out["eigenvalues"].as_array().unwrap().iter().map(|z| complex(z).0).collect();
    eigs.sort_by(f64::total_cmp);
    for (got, want) in eigs.iter().zip([-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]) {
        assert!((got - want).abs() < 1e-12, "{eigs:?}");
    }
    assert_eq!(out["peripheral"].as_array().unwrap().len(), 1);
    assert!((out["spectral_gap"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let cl = ok(&["classify", &data("wolf_indivisible")]);
    assert_eq!(cl["primitive"], json!(true));
}

#[test]
fn pauli_mixture_swaps_two_blocks() {
    let out = ok(&["decompose", &data("pauli_xz")]);
    assert_eq!(out["permutation"], json!([2, 1]));
    assert_eq!(out["cycles"], json!([[1, 2]]));
    let blocks = out["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    for b in blocks {
        assert_eq!((b["d"].as_u64(), b["m"].as_u64()), (Some(1), Some(1)));
    }
    assert_eq!(out["checks"]["passed"], json!(true));
    assert_eq!(out["classification"]["permutation_trivial"], json!(false));
    let cyc = ok(&["cycles", &data("pauli_xz")]);
    assert_eq!(cyc["period"], json!(2));
}

#[test]
fn generator_input_is_exponentiated() {
    // Off-diagonal entries rotate at unit frequency and decay at rate 2 * 0.3^2.
    let out = ok(&["spectrum", &data("dephasing_gkls")]);
    let eigs: Vec<(f64, f64)> = out["eigenvalues"].as_array().unwrap().iter().map(complex).collect();
    let r = (-0.18f64).exp();
    for want in [(1.0, 0.0), (1.0, 0.0), (r * 1f64.cos(), -r * 1f64.sin()), (r * 1f64.cos(), r * 1f64.sin())] {
        assert!(eigs.iter().any(|z| (z.0 - want.0).hypot(z.1 - want.1) < 1e-10), "{want:?} not in {eigs:?}");
    }
}

#[test]
fn amplitude_damping_is_not_faithful() {
    let out = ok(&["spectrum", &data("amplitude_damping")]);
    let mut eigs: Vec<f64> = out["eigenvalues"].as_array().unwrap().iter().map(|z| complex(z).0).collect();
    eigs.sort_by(f64::total_cmp);
    for (got, want) in eigs.iter().zip([0.64, 0.8, 0.8, 1.0]) {
        assert!((got - want).abs() < 1e-12, "{eigs:?}");
    }
    let rec = ok(&["recover", &data("amplitude_damping")]);
    assert_eq!(rec["faithful"], json!(false));
    assert_eq!(rec["eigvec_correspondence"], Value::Null);
    let att = ok(&["attractor", &data("amplitude_damping")]);
    assert_eq!(att["fixed_identity"], json!([[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]));
}

#[test]
fn unfold_then_decompose_recovers_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    for name in SPECS {
        let built = ok(&["unfold", &data(name)]);
        assert_eq!(built["checks"]["passed"], json!(true), "{name}");
        let ch = write_temp(dir.path(), &format!("{name}.channel.json"), &built["channel"]);
        let report = ok(&["decompose", &ch, "--expect-spec", &data(name)]);
        assert_eq!(report["equivalence"]["verdict"], json!("pass"), "{name}: {}", report["equivalence"]);
        let saved = write_temp(dir.path(), &format!("{name}.report.json"), &report);
        let check = run(&["verify", &ch, &saved]);
        assert_eq!(check.code, 0, "{name}: {}", check.stdout);
        assert_eq!(check.json()["source"], json!("report"));
    }
}

fn matrix_json(m: &ComplexMatrix) -> Value {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect::<Value>()).collect()
}

fn spec_json(spec: &UnfoldSpec) -> Value {
    json!({
        "dim_h0_perp": spec.dim_h0_perp,
        "blocks": spec.blocks.iter().map(|b| json!({"d": b.d, "m": b.m, "rho": matrix_json(&b.rho), "unitary": matrix_json(&b.unitary)})).collect::<Vec<_>>(),
        "permutation": spec.permutation.iter().map(|p| p + 1).collect::<Vec<_>>(),
        "sink_state": spec.sink_state.as_ref().map(matrix_json),
    })
}

#[test]
fn random_specs_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..6 {
        let spec = random_spec(&random_shape(200 + seed, 7), seed);
        let spec_file = write_temp(dir.path(), &format!("spec{seed}.json"), &spec_json(&spec));
        let built = ok(&["unfold", &spec_file]);
        let ch = write_temp(dir.path(), &format!("ch{seed}.json"), &built["channel"]);
        let report = ok(&["decompose", &ch, "--expect-spec", &spec_file]);
        assert_eq!(report["equivalence"]["verdict"], json!("pass"), "seed {seed}: {}", report["equivalence"]);
        let mut got: Vec<usize> = report["cycles"].as_array().unwrap().iter().map(|c| c.as_array().unwrap().len()).collect();
        let mut want: Vec<usize> = attractor::structure::permutation_cycles(&spec.permutation).iter().map(Vec::len).collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn mismatched_expectation_fails_equivalence() {
    let built = ok(&["unfold", &data("two_cycle_spec")]);
    let dir = tempfile::tempdir().unwrap();
    let ch = write_temp(dir.path(), "ch.json", &built["channel"]);
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(data("two_cycle_spec")).unwrap()).unwrap();
    spec["blocks"][0]["rho"] = json!([[[0.6, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.4, 0.0]]]);
    let other = write_temp(dir.path(), "other.json", &spec);
    let report = ok(&["decompose", &ch, "--expect-spec", &other]);
    assert_eq!(report["equivalence"]["verdict"], json!("fail"));
}

#[test]
fn verify_exits_one_on_a_tampered_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = ok(&["decompose", &data("pauli_xz")]);
    assert_eq!(run(&["verify", &data("pauli_xz")]).code, 0);
    // Claiming a trivial permutation contradicts the channel's action.
    report["permutation"] = json!([1, 2]);
    let saved = write_temp(dir.path(), "report.json", &report);
    let r = run(&["verify", &data("pauli_xz"), &saved]);
    assert_eq!(r.code, 1, "{}", r.stdout);
    let out = r.json();
    assert_eq!(out["passed"], json!(false));
    assert!(out["worst_defect"].as_f64().unwrap() > out["decomposition"]["tolerance"].as_f64().unwrap());
}

#[test]
fn invalid_inputs_exit_two_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let half = json!([[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]);
    let cases = [
        (json!({"dim": 2, "kraus": [half]}), "trace preserving"),
        (
            json!({"dim": 2, "superop": [
                [[1, 0], [0, 0], [0, 0], [0, 0]],
                [[0, 0], [0, 0], [1, 0], [0, 0]],
                [[0, 0], [1, 0], [0, 0], [0, 0]],
                [[0, 0], [0, 0], [0, 0], [1, 0]]
            ]}),
            "completely positive",
        ),
        (json!({"dim": 3, "zoo": {"name": "pauli_xz"}}), "dimension"),
        (json!({"dim": 2, "kraus": [[[[1, 0]]]]}), "kraus[0]"),
        (json!({"dim": 2, "zoo": {"name": "nonexistent"}}), "nonexistent"),
        (json!({"dim": 2}), "exactly one"),
    ];
    for (k, (input, needle)) in cases.iter().enumerate() {
        let path = write_temp(dir.path(), &format!("case{k}.json"), input);
        let r = run(&["spectrum", &path]);
        assert_eq!(r.code, 2, "case {k}: {}", r.stdout);
        assert!(r.stderr.contains(needle), "case {k}: expected '{needle}' in {}", r.stderr);
        assert!(r.stdout.is_empty());
    }
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(data("two_cycle_spec")).unwrap()).unwrap();
    spec["permutation"] = json!([1, 1]);
    let bad_spec = write_temp(dir.path(), "spec.json", &spec);
    let r = run(&["unfold", &bad_spec]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("permutation"), "{}", r.stderr);

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    let r = run(&["classify", garbage.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("malformed JSON"), "{}", r.stderr);
    assert_eq!(run(&["classify", "/nonexistent/file.json"]).code, 2);
    assert_eq!(run(&["spectrum", &data("pauli_xz"), "--tol-eq", "-1"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
}

#[test]
fn tolerance_precedence_is_flag_then_env_then_default() {
    let equality = |r: Run| r.json()["settings"]["equality"].as_f64().unwrap();
    let file = data("wolf_indivisible");
    assert_eq!(equality(run(&["classify", &file])), 1e-8);
    assert_eq!(equality(run_with(&["classify", &file], &[("ATTRACTOR_TOL_EQ", "1e-6")], None)), 1e-6);
    assert_eq!(equality(run_with(&["classify", &file, "--tol-eq", "1e-7"], &[("ATTRACTOR_TOL_EQ", "1e-6")], None)), 1e-7);
    let r = run_with(&["classify", &file], &[("ATTRACTOR_TOL_EQ", "zero")], None);
    assert_eq!(r.code, 2);
    let out = ok(&["spectrum", &file, "--tol-eig", "1e-6", "--seed", "7"]);
    assert_eq!(out["settings"]["eig_peripheral"], json!(1e-6));
    assert_eq!(out["settings"]["seed"], json!(7));
}

#[test]
fn output_is_deterministic_and_ordered() {
    for cmd in ["decompose", "cycles"] {
        let a = run(&[cmd, &data("pauli_xz")]).stdout;
        let b = run(&[cmd, &data("pauli_xz")]).stdout;
        assert_eq!(a, b);
    }
    let out = run(&["decompose", &data("pauli_xz")]).stdout;
    let keys = ["\"command\"", "\"settings\"", "\"dim\"", "\"h0_dim\"", "\"h0_isometry\"", "\"blocks\"", "\"permutation\"", "\"cycles\"", "\"checks\"", "\"classification\"", "\"equivalence\""];
    let positions: Vec<usize> = keys.iter().map(|k| out.find(k).unwrap_or_else(|| panic!("{k} missing"))).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
    let pretty = run(&["--pretty", "decompose", &data("pauli_xz")]);
    assert!(pretty.stdout.lines().count() > 10);
    assert_eq!(pretty.json(), serde_json::from_str::<Value>(&out).unwrap());
}

#[test]
fn reads_channels_from_stdin() {
    let text = std::fs::read_to_string(data("wolf_indivisible")).unwrap();
    let r = run_with(&["classify", "-"], &[], Some(&text));
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["primitive"], json!(true));
}
