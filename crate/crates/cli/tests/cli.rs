use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn phlayout() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phlayout"));
    cmd.env_remove("PHLAYOUT_SEED");
    cmd
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn barcode_prints_json() {
    let out = phlayout()
        .args(["barcode", "--weighting", "given", "--graph"])
        .arg(fixture("four_node.edges"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    let measures: Vec<f64> = json["bars"].as_array().unwrap().iter().map(|b| b["persistence"].as_f64().unwrap()).collect();
    assert_eq!(measures, [1.0, 3.0, 4.0]);
    assert_eq!(json["components"], 1);
}

#[test]
fn barcode_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.edges");
    std::fs::write(&bad, "a b -1\n").unwrap();
    let out = phlayout().args(["barcode", "--graph"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn batch_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "graph = {:?}\niterations = 150\nthreshold = 0.3\nrepulse_ranks = [0]\nhalo_rank = 0\noutput_dir = \"out\"\n",
            fixture("barbell.edges")
        ),
    );
    let out = phlayout().args(["batch", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["layout.json", "render.svg", "metrics.json", "timing.log"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name} missing");
    }
    let layout: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/layout.json")).unwrap()).unwrap();
    assert_eq!(layout["iteration"], 150);
    assert_eq!(layout["positions"].as_object().unwrap().len(), 150);
    let timing = std::fs::read_to_string(dir.path().join("out/timing.log")).unwrap();
    assert!(timing.contains("barcode_ms=") && timing.contains("mean_step_ms="));
}

#[test]
fn batch_rejects_missing_rank() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "graph = {:?}\nweighting = \"given\"\nrepulse_ranks = [3]\n",
            fixture("four_node.edges")
        ),
    );
    let out = phlayout().args(["batch", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bar rank 3 out of range"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn batch_contraction_on_small_graph() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "graph = {:?}\nweighting = \"given\"\niterations = 2000\nthreshold = 4.5\n",
            fixture("four_node.edges")
        ),
    );
    let out = phlayout().args(["batch", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/metrics.json")).unwrap()).unwrap();
    assert!(metrics["E_C"].as_f64().unwrap() > 0.0, "{metrics}");
    assert!(metrics["E_R"].is_null());
}

#[test]
fn seed_env_changes_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let config = dir.path().join(format!("{out}.toml"));
        std::fs::write(
            &config,
            format!("graph = {:?}\nweighting = \"given\"\niterations = 5\noutput_dir = {out:?}\n", fixture("four_node.edges")),
        )
        .unwrap();
        let result = phlayout()
            .env("PHLAYOUT_SEED", seed)
            .args(["batch", "--config"])
            .arg(&config)
            .output()
            .unwrap();
        assert!(result.status.success());
        std::fs::read_to_string(dir.path().join(out).join("layout.json")).unwrap()
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_speaks_the_protocol() {
    let mut child = phlayout()
        .args(["serve", "--port", "0", "--weighting", "given", "--graph"])
        .arg(fixture("four_node.edges"))
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut banner).unwrap();
    let _server = Server(child);
    let addr = banner.trim().strip_prefix("listening on ").unwrap().to_string();

    let stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let script = [
        r#"{"kind":"hover_bar","payload":{"bar":0}}"#,
        r#"{"kind":"toggle_repulsion","payload":{"bar":0}}"#,
        r#"{"kind":"toggle_repulsion","payload":{"bar":99}}"#,
        r#"{"kind":"set_threshold","payload":{"threshold":2.5}}"#,
        r#"{"kind":"step_n","payload":{"n":2}}"#,
        r#"{"kind":"snapshot_request"}"#,
        "not json",
    ];
    let mut counters = Vec::new();
    for line in script {
        writeln!(writer, "{line}").unwrap();
        loop {
            let mut reply = String::new();
            reader.read_line(&mut reply).unwrap();
            let reply: Value = serde_json::from_str(&reply).unwrap();
            match reply["kind"].as_str().unwrap() {
                "frame" => counters.push(reply["counter"].as_u64().unwrap()),
                "ack" | "error" => {
                    let expect_error = line.contains("99") || line == "not json";
                    assert_eq!(reply["kind"] == "error", expect_error, "{line} -> {reply}");
                    break;
                }
                _ => {}
            }
        }
    }
    assert_eq!(counters.len(), 3);
    assert!(counters.windows(2).all(|w| w[0] < w[1]));
}
