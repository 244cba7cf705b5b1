//! End-to-end checks of the command-line surface.

use std::process::Command;

fn hoov() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hoov"))
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hoov-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn usage_errors_exit_2() {
    let out = hoov().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hoov().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hoov().args(["synth", "--sessions"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // diagnostics land on stderr, one line leading with "error:"
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn data_errors_exit_3() {
    let dir = tmp_dir("dataerr");
    let out = hoov()
        .args(["pinch", "--file", dir.join("missing.hoovrec").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tmp_dir("synthdet");
    for sub in ["a", "b"] {
        let out = hoov()
            .args([
                "synth",
                "--sessions",
                "2",
                "--seed",
                "7",
                "--duration",
                "3",
                "--out",
                dir.join(sub).to_str().unwrap(),
            ])
            .env("HOOV_LOG", "quiet")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["rec_00000007.hoovrec", "rec_00000008.hoovrec", "recordings.json"] {
        let a = std::fs::read(dir.join("a").join(name)).unwrap();
        let b = std::fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn dataset_default_grid_has_17_fovs() {
    let dir = tmp_dir("grid17");
    let recs = dir.join("recs");
    let status = hoov()
        .args(["synth", "--sessions", "4", "--seed", "3", "--duration", "6", "--out"])
        .arg(&recs)
        .env("HOOV_LOG", "quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let data = dir.join("data");
    let out = hoov()
        .args(["dataset", "--in"])
        .arg(&recs)
        .args(["--out"])
        .arg(&data)
        .args(["--split", "0.5,0.25,0.25"])
        .env("HOOV_LOG", "quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("dataset.json")).unwrap()).unwrap();
    let grid = manifest["fov_grid"].as_array().unwrap();
    assert_eq!(grid.len(), 17);
    assert_eq!(grid[0], 40.0);
    assert_eq!(grid[16], 120.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn pinch_prints_event_timestamps() {
    let dir = tmp_dir("pinchcli");
    let recs = dir.join("recs");
    let status = hoov()
        .args(["synth", "--sessions", "1", "--seed", "19", "--duration", "8", "--out"])
        .arg(&recs)
        .env("HOOV_LOG", "quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let out = hoov()
        .args(["pinch", "--file"])
        .arg(recs.join("rec_00000019.hoovrec"))
        .env("HOOV_LOG", "quiet")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    // one "t score" pair per line
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 2, "line {line:?}");
        parts[0].parse::<f64>().unwrap();
        parts[1].parse::<f64>().unwrap();
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn train_eval_serve_replay_workflow() {
    let dir = tmp_dir("workflow");
    let recs = dir.join("recs");
    let data = dir.join("data");
    let run = dir.join("run");
    let report = dir.join("report");

    let status = hoov()
        .args(["synth", "--sessions", "6", "--seed", "2", "--duration", "6", "--out"])
        .arg(&recs)
        .env("HOOV_LOG", "quiet")
        .status()
        .unwrap();
    assert!(status.success());

    let status = hoov()
        .args(["dataset", "--in"])
        .arg(&recs)
        .arg("--out")
        .arg(&data)
        .args(["--fov-min", "80", "--fov-max", "120", "--fov-step", "20"])
        .args(["--split", "0.5,0.25,0.25"])
        .env("HOOV_LOG", "quiet")
        .status()
        .unwrap();
    assert!(status.success());

    let out = hoov()
        .args(["train", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&run)
        .args(["--model", "tiny", "--max-iters", "20", "--val-every", "10"])
        .args(["--batch-size", "4", "--lr", "0.001"])
        .env("HOOV_LOG", "quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = run.join("best.ckpt");
    assert!(ckpt.exists());
    assert!(run.join("train_log.csv").exists());
    // train prints the checkpoint path on stdout
    assert!(String::from_utf8_lossy(&out.stdout).contains("best.ckpt"));

    let out = hoov()
        .args(["eval", "--data"])
        .arg(&data)
        .arg("--checkpoint")
        .arg(&ckpt)
        .args(["--fov", "100", "--report"])
        .arg(&report)
        .env("HOOV_LOG", "quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.csv", "report.md", "error_vs_time.csv", "summary.json"] {
        assert!(report.join(f).exists(), "missing {f}");
    }
    let header = std::fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(header.starts_with(
        "condition,mean_pos_cm,median_pos_cm,std_pos_cm,mean_drop_cm,mean_grab_cm,mean_comp_cm,mean_rot_deg,median_rot_deg,std_rot_deg"
    ));

    // serve on an ephemeral port, then replay against it
    let port = 40000 + (std::process::id() % 20000) as u16;
    let addr = format!("127.0.0.1:{port}");
    let mut server = hoov()
        .args(["serve", "--listen", &addr, "--checkpoint"])
        .arg(&ckpt)
        .env("HOOV_LOG", "quiet")
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(500));
    let out = hoov()
        .args(["replay", "--file"])
        .arg(recs.join("rec_00000002.hoovrec"))
        .args(["--connect", &addr, "--fov", "100"])
        .env("HOOV_LOG", "quiet")
        .output()
        .unwrap();
    let _ = server.kill();
    let _ = server.wait();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("estimates"));

    let _ = std::fs::remove_dir_all(&dir);
}
