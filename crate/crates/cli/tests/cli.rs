use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_capnet");

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn capnet(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8 stdout")
}

const NET: &str = "fixtures/relu3.json";
const DATA: &str = "fixtures/points3.json";

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn report_csv_header_and_rows() {
    let o = capnet(&["report", "--network", NET, "--data", DATA, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let (headers, rows) = csv_rows(&stdout(&o));
    assert_eq!(headers, ["name", "value", "exact_constants", "citation"]);
    assert!(rows.len() >= 8);
    for row in &rows {
        assert!(row[1] == "inapplicable" || row[1].parse::<f64>().is_ok(), "{row:?}");
        assert!(row[2] == "true" || row[2] == "false");
    }
    let frob = rows.iter().find(|r| r[0] == "bound_frobenius_sqrtd").unwrap();
    assert_eq!(frob[2], "true");
}

#[test]
fn report_marks_inapplicable_for_max_output() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("max.json");
    std::fs::write(
        &net,
        r#"{"input_dim": 2, "layers": [
            {"rows": 3, "cols": 2, "activation": "max_to_scalar", "data": [1, 0, 0, 1, 1, 1]},
            {"rows": 1, "cols": 1, "data": [2]}
        ]}"#,
    )
    .unwrap();
    let data = dir.path().join("pts.json");
    std::fs::write(&data, r#"{"points": [[1, 0], [0, 1], [0.5, 0.5]]}"#).unwrap();
    let o = capnet(&[
        "report",
        "--network",
        net.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&stdout(&o));
    let frob = rows.iter().find(|r| r[0] == "bound_frobenius_sqrtd").unwrap();
    assert_eq!(frob[1], "inapplicable");
    let ney = rows.iter().find(|r| r[0] == "bound_ney15").unwrap();
    assert!(ney[1].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn report_json_is_structured() {
    let o = capnet(&["report", "--network", NET, "--data", DATA, "--format", "structured"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["entries"].as_array().unwrap().len() >= 8);
    assert_eq!(v["context"]["m"], 12);
}

#[test]
fn compress_writes_network_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("small.json");
    let o = capnet(&[
        "compress",
        "--network",
        NET,
        "--data",
        DATA,
        "--r",
        "2",
        "--samples",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let small = capnet::network::Network::load(&out).unwrap();
    assert_eq!(small.depth(), 3);
    let cert_text = std::fs::read_to_string(dir.path().join("small.json.cert.json")).unwrap();
    let cert: serde_json::Value = serde_json::from_str(&cert_text).unwrap();
    assert_eq!(cert["r_prime"], 2);
    let lemma = cert["lemma_bound"].as_f64().unwrap();
    let theorem = cert["theorem_bound"].as_f64().unwrap();
    assert!(lemma <= theorem);
    assert!(stdout(&o).contains("within_lemma      true"));
}

#[test]
fn exit_codes() {
    let missing = capnet(&["report", "--network", "no/such/file.json", "--data", DATA]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no/such/file.json"));

    assert_eq!(capnet(&["report", "--network", NET]).status.code(), Some(1));
    assert_eq!(capnet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(capnet(&["--help"]).status.code(), Some(0));

    let bad_p = capnet(&["report", "--network", NET, "--data", DATA, "--p", "0.5"]);
    assert_eq!(bad_p.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"points": [[1, 0]]}"#).unwrap();
    let shape = capnet(&["report", "--network", NET, "--data", wrong.to_str().unwrap()]);
    assert_eq!(shape.status.code(), Some(2));
}

#[test]
fn verify_failure_exits_three() {
    let o = capnet(&["verify", "--suite", "cover"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS"));
    let all = capnet(&["verify", "--suite", "all"]);
    // The depth-tuning inequality has known counterexamples when b n < c.
    assert_eq!(all.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&all.stderr).contains("depth-tuning inequality"));
}

#[test]
fn sweep_doubles_and_plateaus() {
    let o = capnet(&["sweep", "--depths", "2-64", "--m", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let (headers, rows) = csv_rows(&stdout(&o));
    assert_eq!(headers[0], "depth");
    assert_eq!(rows.len(), 63);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let ney: Vec<f64> = rows.iter().map(|r| r[col("bound_ney15")].parse().unwrap()).collect();
    for w in ney.windows(2) {
        assert!((w[1] / w[0] - 2.0).abs() < 1e-12);
    }
    let plateau: Vec<f64> = rows
        .iter()
        .filter(|r| r[col("first_branch_active")] == "true")
        .map(|r| r[col("bound_depth_independent_frobenius")].parse().unwrap())
        .collect();
    assert!(!plateau.is_empty());
    assert!(plateau.iter().all(|v| (v - plateau[0]).abs() < 1e-9));
}

#[test]
fn chain_estimates_match_across_depths() {
    // Every chain of depth >= 2 computes the same function class, and the
    // sweep reuses the seed, so estimates at two depths agree within noise.
    let o = capnet(&[
        "sweep", "--depths", "2,5", "--samples", "24", "--restarts", "3", "--steps", "80",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (headers, rows) = csv_rows(&stdout(&o));
    let est = headers.iter().position(|h| h == "mc_estimate").unwrap();
    let se = headers.iter().position(|h| h == "mc_std_error").unwrap();
    let a: f64 = rows[0][est].parse().unwrap();
    let b: f64 = rows[1][est].parse().unwrap();
    let sa: f64 = rows[0][se].parse().unwrap();
    let sb: f64 = rows[1][se].parse().unwrap();
    assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}");
}

#[test]
fn lowerbound_rows_in_window() {
    let o = capnet(&["lowerbound", "--h", "2,4", "--m", "8", "--p", "1,2,inf", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let (headers, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    let w = headers.iter().position(|h| h == "within_window").unwrap();
    assert!(rows.iter().all(|r| r[w] == "true"));
}

#[test]
fn rademacher_reports_reference_bound() {
    let o = capnet(&[
        "rademacher", "--network", NET, "--data", DATA, "--samples", "6", "--restarts", "2", "--steps", "60",
        "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let value = v["value"].as_f64().unwrap();
    let bound = v["reference_bound"].as_f64().unwrap();
    assert!(value > 0.0 && value <= bound);
}
