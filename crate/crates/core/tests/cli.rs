use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qms_core::cli::format::{matrix_from_json, ModelFile};
use qms_core::cli::report::AnalysisReport;
use qms_core::linalg::{fro, Operator};
use qms_core::semigroup::{generator_distance, to_superoperator, Picture};
use qms_core::{GeneratorSpec, C64};
use serde_json::{json, Value};
use tempfile::TempDir;

fn qms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qms"))
        .args(args)
        .env_remove("QMS_TOL")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn zeros(n: usize) -> Value {
    json!(vec![vec![0.0; n]; n])
}

fn dephasing(gamma: f64) -> Value {
    let g = gamma.sqrt();
    json!({"dim": 2, "channels": [[[g, 0], [0, -g]]], "hamiltonian": zeros(2)})
}

fn amplitude_damping(gamma: f64) -> Value {
    json!({"dim": 2, "channels": [[[0, gamma.sqrt()], [0, 0]]], "hamiltonian": zeros(2)})
}

fn obstructed_qutrit() -> Value {
    json!({
        "dim": 3,
        "channels": [
            [[1, 0, 0], [0, [0, 1], 0], [0, 0, 2]],
            zeros(3),
            [[[0, 2], 0, 0], [0, 1, 0], [0, 0, -1]]
        ],
        "hamiltonian": zeros(3)
    })
}

fn jump_qubit(theta: f64, nu: f64) -> Value {
    let phase = json!([theta.cos(), theta.sin()]);
    json!({
        "dim": 2,
        "channels": [[[nu.sqrt(), 0], [0, [nu.sqrt() * theta.cos(), nu.sqrt() * theta.sin()]]]],
        "hamiltonian": zeros(2),
        "classical": {"jumps": [{"matrix": [[1, 0], [0, phase]], "rate": nu}]}
    })
}

fn report(out: &Output) -> AnalysisReport {
    serde_json::from_slice(&out.stdout).expect("report parses")
}

fn model_of(out: &Output) -> ModelFile {
    serde_json::from_slice(&out.stdout).expect("model parses")
}

fn spec_of(m: &ModelFile) -> GeneratorSpec {
    let n = m.dim;
    let couplings = m
        .channels
        .iter()
        .map(|c| matrix_from_json(c, n, "c").unwrap())
        .collect();
    let h = matrix_from_json(m.hamiltonian.as_ref().unwrap(), n, "h").unwrap();
    GeneratorSpec::new(couplings, h).unwrap()
}

fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn analyze_qubit_dephasing() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &dephasing(0.5));
    let out = qms(&["analyze", "--model", s(&m)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r.bistochastic);
    assert!(r.minimal);
    assert!(r.maximally_dephasing);
    assert_eq!(r.Delta_max, 0.0);
    assert_eq!(r.Delta_argmax, None);
    assert!(r.self_adjointizable);
    assert!(r.diffusive_dilation);
    // Γ_01 = ½|λ_0 − λ_1|² = 2γ.
    assert!((r.Gamma.as_ref().unwrap()[0][1] - 1.0).abs() < 1e-12);
    assert!(!r.notes.is_empty());
}

#[test]
fn analyze_obstructed_qutrit() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &obstructed_qutrit());
    let out = qms(&["analyze", "--model", s(&m)]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r.maximally_dephasing);
    assert_eq!(r.Delta_max, 5.0);
    assert_eq!(r.Delta_argmax, Some([1, 2, 3]));
    assert_eq!(r.Delta_value, -5.0);
    assert!(!r.self_adjointizable);
    assert!(!r.diffusive_dilation);
}

#[test]
fn report_round_trips() {
    let dir = TempDir::new().unwrap();
    for (k, model) in [dephasing(0.3), obstructed_qutrit(), amplitude_damping(1.0)]
        .iter()
        .enumerate()
    {
        let m = write(&dir, &format!("m{k}.json"), model);
        let out = qms(&["analyze", "--model", s(&m)]);
        assert_eq!(code(&out), 0);
        let first = report(&out);
        let text = serde_json::to_string(&first).unwrap();
        let second: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(first, second);
        // Consistency between verdicts.
        assert!(!first.diffusive_dilation || first.self_adjointizable);
        assert!(!first.self_adjointizable || first.maximally_dephasing);
    }
}

#[test]
fn parse_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dim\": 2, \"channels\": [").unwrap();
    assert_eq!(code(&qms(&["analyze", "--model", s(&bad)])), 3);

    let ragged = write(
        &dir,
        "ragged.json",
        &json!({"dim": 2, "channels": [[[1, 0], [0]]], "hamiltonian": zeros(2)}),
    );
    assert_eq!(code(&qms(&["analyze", "--model", s(&ragged)])), 3);

    let unknown = write(
        &dir,
        "unknown.json",
        &json!({"dim": 2, "hamiltonain": zeros(2)}),
    );
    assert_eq!(code(&qms(&["analyze", "--model", s(&unknown)])), 3);

    let entry = write(
        &dir,
        "entry.json",
        &json!({"dim": 1, "hamiltonian": [[[1, 2, 3]]]}),
    );
    assert_eq!(code(&qms(&["analyze", "--model", s(&entry)])), 3);
}

#[test]
fn invalid_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let h = write(
        &dir,
        "h.json",
        &json!({"dim": 2, "hamiltonian": [[0, 1], [0, 0]]}),
    );
    assert_eq!(code(&qms(&["analyze", "--model", s(&h)])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&qms(&["analyze", "--model", s(&missing)])), 2);
    let m = write(&dir, "m.json", &dephasing(0.5));
    assert_eq!(code(&qms(&["--tol", "-1", "analyze", "--model", s(&m)])), 2);
    assert_eq!(code(&qms(&["evolve", "--model", s(&m), "--tmax", "-1"])), 2);
}

#[test]
fn tolerance_flag_and_env() {
    let dir = TempDir::new().unwrap();
    // Hermitian up to 1e-6.
    let m = write(
        &dir,
        "m.json",
        &json!({"dim": 2, "hamiltonian": [[1, [0, 1e-6]], [[0, 1e-6], -1]]}),
    );
    assert_eq!(code(&qms(&["analyze", "--model", s(&m)])), 2);
    assert_eq!(
        code(&qms(&["analyze", "--model", s(&m), "--tol", "1e-3"])),
        0
    );
    let out = Command::new(env!("CARGO_BIN_EXE_qms"))
        .args(["analyze", "--model", s(&m)])
        .env("QMS_TOL", "1e-3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_qms"))
        .args(["evolve", "--model", s(&m), "--tmax", "1"])
        .env("QMS_TOL", "1e-12")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn evolve_amplitude_damping() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &amplitude_damping(1.0));
    let st = write(&dir, "rho.json", &json!([[0, 0], [0, 1]]));
    let out = qms(&[
        "evolve",
        "--model",
        s(&m),
        "--state",
        s(&st),
        "--tmax",
        "5",
        "--steps",
        "50",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header.len(), 1 + 8 + 2);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 51);
    for row in &rows {
        let t = row[0];
        assert!((row[col("rho_1_1_re")] - (-t).exp()).abs() < 1e-10);
        assert!((row[col("trace")] - 1.0).abs() < 1e-10);
        let p = (-t).exp();
        let purity = (1.0 - p).powi(2) + p * p;
        assert!((row[col("purity")] - purity).abs() < 1e-10);
    }
}

#[test]
fn evolve_dephasing_keeps_diagonal() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &dephasing(0.25));
    let st = write(&dir, "rho.json", &json!([[0.5, 0.5], [0.5, 0.5]]));
    let out = qms(&[
        "evolve",
        "--model",
        s(&m),
        "--state",
        s(&st),
        "--tmax",
        "4",
        "--steps",
        "8",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&out);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &rows {
        assert!((row[col("rho_0_0_re")] - 0.5).abs() < 1e-12);
        assert!((row[col("rho_1_1_re")] - 0.5).abs() < 1e-12);
        // Coherence decays at 2γ.
        assert!((row[col("rho_0_1_re")] - 0.5 * (-0.5 * row[0]).exp()).abs() < 1e-10);
    }
}

#[test]
fn evolve_zero_time_is_one_row() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &amplitude_damping(1.0));
    let st = write(
        &dir,
        "rho.json",
        &json!([[0.25, [0.1, 0.2]], [[0.1, -0.2], 0.75]]),
    );
    let out = qms(&["evolve", "--model", s(&m), "--state", s(&st), "--tmax", "0"]);
    assert_eq!(code(&out), 0);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(
        &rows[0][..9],
        &[0.0, 0.25, 0.0, 0.1, 0.2, 0.1, -0.2, 0.75, 0.0]
    );

    let out = qms(&["evolve", "--model", s(&m), "--tmax", "0"]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows[0][1], 0.5);
}

#[test]
fn simulate_jump_qubit() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &jump_qubit(std::f64::consts::PI / 3.0, 1.0));
    let csv_path = dir.path().join("out.csv");
    let args = [
        "simulate",
        "--model",
        s(&m),
        "--traj",
        "100000",
        "--seed",
        "7",
        "--tmax",
        "2",
        "--steps",
        "4",
    ];
    let out = qms(&[&args[..], &["--out", s(&csv_path)]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("t,max_abs_dev,stderr,dev_over_stderr\n"));
    assert_eq!(text.lines().count(), 6);

    let out = qms(&[&args[..], &["--expect-rate", "2"]].concat());
    assert_eq!(code(&out), 1);
}

#[test]
fn simulate_without_classical_section() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &dephasing(1.0));
    assert_eq!(
        code(&qms(&["simulate", "--model", s(&m), "--traj", "10"])),
        2
    );
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &jump_qubit(1.0, 0.7));
    let args = [
        "simulate",
        "--model",
        s(&m),
        "--traj",
        "2000",
        "--seed",
        "3",
    ];
    let a = qms(&args);
    let b = qms(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = qms(&[&args[..], &["--mode", "trotter", "--dt", "0.01"]].concat());
    assert_eq!(code(&c), 0);
}

#[test]
fn transform_self_adjoint_round_trip() {
    let dir = TempDir::new().unwrap();
    let m = write(
        &dir,
        "m.json",
        &json!({
            "dim": 3,
            // Real columns shifted by a complex constant: Δ ≡ 0.
            "channels": [
                [[[1, 0.5], 0, 0], [0, [2, 0.5], 0], [0, 0, [-1, 0.5]]],
                [[[0.3, -1], 0, 0], [0, [-0.7, -1], 0], [0, 0, [0.1, -1]]]
            ],
            "hamiltonian": [[1, 0, 0], [0, -0.5, 0], [0, 0, 2]]
        }),
    );
    let out = qms(&["transform", "--self-adjoint", "--model", s(&m)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sa = model_of(&out);
    let spec = spec_of(&sa);
    for l in &spec.couplings {
        assert!(fro(&(l - l.adjoint())) < 1e-10);
    }
    let original = spec_of(&serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap());
    assert!(generator_distance(&spec, &original).unwrap() < 1e-9);

    let sa_path = dir.path().join("sa.json");
    std::fs::write(&sa_path, &out.stdout).unwrap();
    let before = report(&qms(&["analyze", "--model", s(&m)]));
    let after = report(&qms(&["analyze", "--model", s(&sa_path)]));
    let (zb, za) = (before.z.unwrap(), after.z.unwrap());
    let zb = matrix_from_json(&zb, 3, "z").unwrap();
    let za = matrix_from_json(&za, 3, "z").unwrap();
    assert!(fro(&(zb - za)) < 1e-9);
}

#[test]
fn transform_obstructed_exits_4() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &obstructed_qutrit());
    let out = qms(&["transform", "--self-adjoint", "--model", s(&m)]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Delta_1,2,3"));
}

#[test]
fn transform_identity_euclidean_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut model = obstructed_qutrit();
    model["classical"] = json!({"diffusions": [{"matrix": [[1, 0, 0], [0, 0, 0], [0, 0, -1]]}], "hamiltonian": zeros(3)});
    let m = write(&dir, "m.json", &model);
    let e = write(
        &dir,
        "e.json",
        &json!({"T": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "beta": [0, 0, 0], "e": 0.0}),
    );
    let out = qms(&["transform", "--euclidean", s(&e), "--model", s(&m)]);
    assert_eq!(code(&out), 0);
    let original = ModelFile::load(&m)
        .unwrap()
        .to_model(Default::default())
        .unwrap();
    let back = model_of(&out).to_model(Default::default()).unwrap();
    assert_eq!(original, back);
}

#[test]
fn transform_center_zeroes_expectations() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &jump_qubit(0.4, 1.3));
    let st = write(
        &dir,
        "rho.json",
        &json!([[0.3, [0.1, 0.1]], [[0.1, -0.1], 0.7]]),
    );
    let rho = Operator::from_fn(2, 2, |i, j| {
        let (re, im) = [[(0.3, 0.0), (0.1, 0.1)], [(0.1, -0.1), (0.7, 0.0)]][i][j];
        C64::new(re, im)
    });
    let out = qms(&["transform", "--center", s(&st), "--model", s(&m)]);
    assert_eq!(code(&out), 0);
    let spec = spec_of(&model_of(&out));
    assert!((&rho * &spec.couplings[0]).trace().norm() < 1e-12);
    assert!((&rho * &spec.hamiltonian).trace().norm() < 1e-12);

    let out = qms(&["transform", "--model", s(&m), "--center"]);
    assert_eq!(code(&out), 0);
    let spec = spec_of(&model_of(&out));
    assert!(spec.couplings[0].trace().norm() < 1e-12);
}

#[test]
fn compose_concat_gives_depolarizing() {
    let dir = TempDir::new().unwrap();
    let g: f64 = 0.3;
    let a = g.sqrt();
    let x = write(
        &dir,
        "x.json",
        &json!({"dim": 2, "channels": [[[0, a], [a, 0]]], "hamiltonian": zeros(2)}),
    );
    let y = write(
        &dir,
        "y.json",
        &json!({"dim": 2, "channels": [[[0, [0, -a]], [[0, a], 0]]], "hamiltonian": zeros(2)}),
    );
    let z = write(&dir, "z.json", &dephasing(g));
    let xy = dir.path().join("xy.json");
    assert_eq!(
        code(&qms(&[
            "compose",
            "--concat",
            s(&x),
            s(&y),
            "--out",
            s(&xy)
        ])),
        0
    );
    let out = qms(&["compose", "--concat", s(&xy), s(&z)]);
    assert_eq!(code(&out), 0);
    let spec = spec_of(&model_of(&out));
    assert_eq!(spec.multiplicity(), 3);
    // 𝓛(σ_u) = −4γ σ_u for every Pauli, 𝓛(1) = 0.
    let sup = to_superoperator(&spec, Picture::Heisenberg);
    let mut expected = Operator::zeros(4, 4);
    for (i, v) in [(1, 1.0), (2, 1.0)] {
        expected[(i, i)] = (-4.0 * g * v).into();
    }
    expected[(0, 0)] = (-2.0 * g).into();
    expected[(3, 3)] = (-2.0 * g).into();
    expected[(0, 3)] = (2.0 * g).into();
    expected[(3, 0)] = (2.0 * g).into();
    assert!(fro(&(sup.matrix - expected)) < 1e-12);
}

#[test]
fn compose_series_with_scalar_triple_matches_transform() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &obstructed_qutrit());
    let (c, sn) = (0.6f64, 0.8f64);
    // T acts on channels 1 and 3, β and e arbitrary.
    let t = json!([[c, 0, [0, sn]], [0, [0, 1], 0], [[0, sn], 0, c]]);
    let beta = json!([[0.5, -1.0], 2.0, [0.0, 0.3]]);
    let e = 0.75;
    let tf = write(&dir, "t.json", &json!({"T": t, "beta": beta, "e": e}));
    let id = |v: Value| json!([[v.clone(), 0, 0], [0, v.clone(), 0], [0, 0, v]]);
    let mut scattering = vec![vec![json!(0); 9]; 9];
    let tm = [
        [(c, 0.0), (0.0, 0.0), (0.0, sn)],
        [(0.0, 0.0), (0.0, 1.0), (0.0, 0.0)],
        [(0.0, sn), (0.0, 0.0), (c, 0.0)],
    ];
    for (j, row) in tm.iter().enumerate() {
        for (k, &(re, im)) in row.iter().enumerate() {
            for a in 0..3 {
                scattering[3 * j + a][3 * k + a] = json!([re, im]);
            }
        }
    }
    let scalar = write(
        &dir,
        "scalar.json",
        &json!({
            "dim": 3,
            "channels": [id(json!([0.5, -1.0])), id(json!(2.0)), id(json!([0.0, 0.3]))],
            "hamiltonian": id(json!(e)),
            "scattering": scattering
        }),
    );
    let series = qms(&["compose", "--series", s(&m), s(&scalar)]);
    assert_eq!(
        code(&series),
        0,
        "{}",
        String::from_utf8_lossy(&series.stderr)
    );
    let transformed = qms(&["transform", "--euclidean", s(&tf), "--model", s(&m)]);
    assert_eq!(
        code(&transformed),
        0,
        "{}",
        String::from_utf8_lossy(&transformed.stderr)
    );
    let a = model_of(&series)
        .to_model(Default::default())
        .unwrap()
        .triple;
    let b = model_of(&transformed)
        .to_model(Default::default())
        .unwrap()
        .triple;
    assert!(fro(&(&a.scattering - &b.scattering)) < 1e-14);
    assert!(fro(&(&a.hamiltonian - &b.hamiltonian)) < 1e-14);
    for (x, y) in a.couplings.iter().zip(&b.couplings) {
        assert!(fro(&(x - y)) < 1e-14);
    }
}

#[test]
fn compose_incompatible_dims_exit_2() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &dephasing(1.0));
    let b = write(&dir, "b.json", &obstructed_qutrit());
    assert_eq!(code(&qms(&["compose", "--series", s(&a), s(&b)])), 2);
    assert_eq!(code(&qms(&["compose", "--concat", s(&a), s(&b)])), 2);
}
