use std::process::{Command, Output};

use qsurf::output::format_float;
use serde_json::Value;

fn qsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsurf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header and data records of a CSV table, skipping `#` metadata lines.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const CRB: &[&str] = &["crb-sweep", "--var", "dx", "--from", "0.1", "--to", "5", "--points", "50", "--dz", "0.5"];

#[test]
fn crb_sweep_has_one_row_per_point() {
    let mut args = CRB.to_vec();
    args.extend(["--format", "csv"]);
    let o = qsurf(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# kzr: 100"));
    let (header, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 50);
    assert_eq!(&header[..2], ["dx", "dz"]);
    assert!(header.iter().any(|h| h == "crb_ms_dx"));
    assert!(rows.iter().all(|r| r.last().unwrap() == "ok"));
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
    assert_eq!(rows[49][0].parse::<f64>().unwrap(), 5.0);
}

#[test]
fn chernoff_sweep_columns() {
    let o = qsurf(&[
        "chernoff-sweep",
        "--var",
        "dz",
        "--from",
        "0.001",
        "--to",
        "0.1",
        "--points",
        "20",
        "--dx",
        "0.5",
        "--log",
    ]);
    assert!(o.status.success());
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 20);
    for col in ["xi_q", "xi_ms", "xi_di", "fid_bound"] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    let dz: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((dz[1] / dz[0] - dz[19] / dz[18]).abs() < 1e-12, "log spacing");
}

#[test]
fn sweeps_are_deterministic() {
    let args = ["chernoff-sweep", "--var", "dx", "--from", "0.2", "--to", "2", "--points", "6", "--dz", "0.7"];
    let a = qsurf(&args);
    let b = qsurf(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_values_round_trip_and_match_json() {
    let base = ["crb-sweep", "--var", "dz", "--from", "0.1", "--to", "2", "--points", "5", "--dx", "0.8"];
    let csv_out = qsurf(&base);
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    let json_out = qsurf(&json_args);
    assert!(csv_out.status.success() && json_out.status.success());

    let (header, rows) = parse_csv(&stdout(&csv_out));
    let json: Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    assert_eq!(json["metadata"]["kzr"], "100");
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len());
    for (row, jrow) in rows.iter().zip(json_rows) {
        for (name, field) in header.iter().zip(row) {
            if name == "status" {
                continue;
            }
            let v: f64 = field.parse().unwrap();
            assert_eq!(&format_float(v), field, "printed value is not a fixed point");
            assert_eq!(jrow[name].as_f64().unwrap().to_bits(), v.to_bits(), "{name}");
        }
    }
}

#[test]
fn degenerate_point_keeps_sweep_alive() {
    let o = qsurf(&["crb-sweep", "--var", "dx", "--from", "0", "--to", "1", "--points", "3", "--dz", "0.5"]);
    assert!(o.status.success());
    let (_, rows) = parse_csv(&stdout(&o));
    assert_ne!(rows[0].last().unwrap(), "ok");
    assert_eq!(rows[0][2], "NaN");
    assert_eq!(rows[1].last().unwrap(), "ok");
    assert_eq!(rows[2].last().unwrap(), "ok");
}

#[test]
fn point_reports() {
    for cmd in ["qfim", "fim-ms", "fim-di"] {
        let o = qsurf(&[cmd, "--dx", "0.6", "--dz", "0.4"]);
        assert!(o.status.success(), "{cmd}");
        let (header, rows) = parse_csv(&stdout(&o));
        assert_eq!(header, ["param", "dx", "dz"]);
        assert_eq!(rows.len(), 2);
    }
    let o = qsurf(&["qfim", "--dx", "0.6", "--dz", "0.4", "--raw", "--path", "oracle"]);
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(header, ["param", "dx1", "dx2", "dz3"]);
    assert_eq!(rows.len(), 3);
}

#[test]
fn qfim_paths_agree_through_the_cli() {
    let read = |path: &str| -> Vec<f64> {
        let (_, rows) = parse_csv(&stdout(&qsurf(&["qfim", "--dx", "1.1", "--dz", "0.6", "--path", path])));
        rows.iter().flat_map(|r| r[1..].iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
    };
    let r = read("reduced");
    for other in [read("general"), read("oracle")] {
        for (a, b) in r.iter().zip(&other) {
            assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        }
    }
}

#[test]
fn mode_contributions() {
    let o = qsurf(&["mode-contrib", "--dx", "0.3", "--dz", "0.3", "--modes-max-order", "4"]);
    assert!(o.status.success());
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(header[0], "channel");
    assert_eq!(rows.len(), 15);
    let o = qsurf(&[
        "mode-contrib",
        "--var",
        "dx",
        "--from",
        "0.1",
        "--to",
        "1",
        "--points",
        "4",
        "--dz",
        "0.3",
        "--modes-max-order",
        "2",
    ]);
    assert!(o.status.success());
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 4);
    assert!(header.iter().any(|h| h == "f_dx_1_0"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"kzr": 10, "dx": 0.5, "dz": 0.2, "modes-max-order": 6, "format": "json"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = qsurf(&["fim-ms", "--config", cfg]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metadata"]["kzr"], "10");
    assert_eq!(v["metadata"]["modes_max_order"], "6");

    let o = qsurf(&["fim-ms", "--config", cfg, "--kzr", "1000", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# kzr: 1000"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.csv");
    let o = qsurf(&["qfim", "--dx", "0.5", "--dz", "0.5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().contains("param,dx,dz"));
}

#[test]
fn selftest_passes() {
    let o = qsurf(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"kzR": 10}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["no-such-command"],
        vec!["qfim", "--dx", "0.5"],
        vec!["qfim", "--dx", "abc", "--dz", "0.5"],
        vec!["crb-sweep", "--var", "dx", "--from", "1", "--to", "0.5", "--points", "3", "--dz", "0.5"],
        vec!["chernoff-sweep", "--var", "dz", "--from", "0", "--to", "1", "--points", "3", "--dx", "0.5", "--log"],
        vec!["qfim", "--dx", "0.5", "--dz", "0.5", "--kzr", "-1"],
        vec!["qfim", "--config", bad_cfg.to_str().unwrap()],
        vec!["qfim", "--config", "/nonexistent/config.json"],
    ];
    for args in cases {
        assert_eq!(qsurf(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn computation_errors_exit_1() {
    // coincident edge emitters make the QFIM undefined
    let o = qsurf(&["qfim", "--dx", "0", "--dz", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn shipped_configs_run() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let cmd = match name.split('_').next().unwrap() {
            "crb" => "crb-sweep",
            "chernoff" => "chernoff-sweep",
            "modes" => "mode-contrib",
            other => panic!("unexpected config prefix {other}"),
        };
        let o = qsurf(&[cmd, "--config", path.to_str().unwrap(), "--points", "3", "--modes-max-order", "4"]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let (_, rows) = parse_csv(&stdout(&o));
        assert_eq!(rows.len(), 3, "{name}");
        seen += 1;
    }
    assert_eq!(seen, 6);
}
