//! Command-line entry point. Thin: parses flags, loads files, and calls
//! into the library. Exit codes: 0 ok, 2 usage, 3 data error, 4 runtime
//! error. `HOOV_LOG=quiet|info|debug` controls chatter.

use hoov::eval;
use hoov::fov::FovConfig;
use hoov::model::checkpoint::load_checkpoint;
use hoov::model::{HoovNet, ModelConfig};
use hoov::pinch::{detect_pinches, PinchDetector};
use hoov::stream::{replay_recording, serve, PipelineConfig};
use hoov::synth::dataset::DatasetManifest;
use hoov::synth::{generate_session, load_recording, save_recording, ArmModel, GenConfig};
use hoov::train::{init_params, train, TrainConfig};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const USAGE: &str = "hoov <command> [flags]

commands:
  synth    --sessions N --seed S --out DIR [--duration SECS]
  dataset  --in DIR --out DIR [--fov-min 40] [--fov-max 120] [--fov-step 5]
           [--split 0.7,0.15,0.15] [--seed S]
  train    --data DIR --out DIR [--config FILE] [--resume CKPT] [flags...]
  eval     --data DIR --checkpoint FILE --fov DEG --report DIR
  serve    --listen ADDR --checkpoint FILE
  replay   --file REC --connect ADDR [--fov DEG]
  pinch    --file REC

training flags (override --config): --model tiny|compact|default --lr F
  --batch-size N --max-iters N --val-every N --seed S --patience N
";

fn log_level() -> u8 {
    match std::env::var("HOOV_LOG").as_deref() {
        Ok("quiet") => 0,
        Ok("debug") => 2,
        _ => 1,
    }
}

macro_rules! info {
    ($($arg:tt)*) => {
        if log_level() >= 1 { eprintln!($($arg)*); }
    };
}

struct Args {
    flags: HashMap<String, String>,
}

impl Args {
    fn parse(argv: &[String]) -> Result<Self, String> {
        let mut flags = HashMap::new();
        let mut i = 0;
        while i < argv.len() {
            let a = &argv[i];
            if let Some(key) = a.strip_prefix("--") {
                let value = argv
                    .get(i + 1)
                    .ok_or_else(|| format!("flag --{key} needs a value"))?;
                flags.insert(key.to_string(), value.clone());
                i += 2;
            } else {
                return Err(format!("unexpected argument {a}"));
            }
        }
        Ok(Self { flags })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.flags.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing required flag --{key}"))
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, String> {
        match self.get(key) {
            Some(v) => v.parse().map_err(|_| format!("bad value for --{key}: {v}")),
            None => Ok(default),
        }
    }
}

enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = argv.first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    };
    let args = match Args::parse(&argv[1..]) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let result = match command.as_str() {
        "synth" => cmd_synth(&args),
        "dataset" => cmd_dataset(&args),
        "train" => cmd_train(&args),
        "eval" => cmd_eval(&args),
        "serve" => cmd_serve(&args),
        "replay" => cmd_replay(&args),
        "pinch" => cmd_pinch(&args),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn usage(e: String) -> CliError {
    CliError::Usage(e)
}

fn cmd_synth(args: &Args) -> Result<(), CliError> {
    let sessions: u64 = args.get_parsed("sessions", 0).map_err(usage)?;
    if sessions == 0 {
        return Err(usage("--sessions must be >= 1".into()));
    }
    let seed: u64 = args.get_parsed("seed", 0).map_err(usage)?;
    let duration: f64 = args.get_parsed("duration", 12.0).map_err(usage)?;
    let out_dir = PathBuf::from(args.require("out").map_err(usage)?);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let arm = ArmModel::default();
    let cfg = GenConfig::default();
    let mut names = Vec::new();
    for i in 0..sessions {
        let session_seed = seed.wrapping_add(i);
        let rec = generate_session(session_seed, &arm, duration, &cfg);
        let name = format!("rec_{session_seed:08}.hoovrec");
        save_recording(&rec, &out_dir.join(&name))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        names.push(name);
    }
    let manifest = serde_json::json!({
        "schema_version": 1,
        "seed": seed,
        "duration_s": duration,
        "recordings": names,
    });
    std::fs::write(
        out_dir.join("recordings.json"),
        serde_json::to_vec_pretty(&manifest).expect("manifest"),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    info!("wrote {sessions} recordings to {}", out_dir.display());
    Ok(())
}

fn list_recordings(dir: &Path) -> Result<Vec<String>, CliError> {
    let listing = dir.join("recordings.json");
    if listing.exists() {
        let bytes = std::fs::read(&listing).map_err(|e| CliError::Data(e.to_string()))?;
        let v: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Data(e.to_string()))?;
        let names = v["recordings"]
            .as_array()
            .ok_or_else(|| CliError::Data("recordings.json has no recordings array".into()))?;
        return Ok(names.iter().filter_map(|n| n.as_str().map(String::from)).collect());
    }
    // fall back to scanning the directory
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| {
            let name = entry.ok()?.file_name().into_string().ok()?;
            name.ends_with(".hoovrec").then_some(name)
        })
        .collect();
    names.sort();
    Ok(names)
}

fn cmd_dataset(args: &Args) -> Result<(), CliError> {
    let in_dir = PathBuf::from(args.require("in").map_err(usage)?);
    let out_dir = PathBuf::from(args.require("out").map_err(usage)?);
    let fov_min: f64 = args.get_parsed("fov-min", 40.0).map_err(usage)?;
    let fov_max: f64 = args.get_parsed("fov-max", 120.0).map_err(usage)?;
    let fov_step: f64 = args.get_parsed("fov-step", 5.0).map_err(usage)?;
    let seed: u64 = args.get_parsed("seed", 0).map_err(usage)?;
    let split_text = args.get("split").unwrap_or("0.7,0.15,0.15");
    let parts: Vec<f64> = split_text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad --split {split_text}")))?;
    if parts.len() != 3 {
        return Err(usage("--split needs three comma-separated fractions".into()));
    }
    if fov_step <= 0.0 || fov_max < fov_min {
        return Err(usage("bad fov range".into()));
    }

    let names = list_recordings(&in_dir)?;
    if names.is_empty() {
        return Err(CliError::Data(format!("no recordings in {}", in_dir.display())));
    }
    let mut grid = Vec::new();
    let mut f = fov_min;
    while f <= fov_max + 1e-9 {
        grid.push(f);
        f += fov_step;
    }

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    // reference recordings relative to the dataset manifest
    let rel = pathdiff(&in_dir, &out_dir);
    let manifest = DatasetManifest {
        schema_version: 1,
        recordings: names.iter().map(|n| rel.join(n).to_string_lossy().into_owned()).collect(),
        fov_grid: grid.clone(),
        split: (parts[0], parts[1], parts[2]),
        seed,
        max_seq_samples: 6400,
    };
    let manifest_path = out_dir.join("dataset.json");
    manifest.save(&manifest_path).map_err(|e| CliError::Runtime(e.to_string()))?;

    // sanity-build once so errors surface now rather than at train time
    let ds = manifest
        .build(&manifest_path)
        .map_err(CliError::Data)?;
    info!(
        "dataset: {} fov values, {} train / {} val / {} test sequences",
        grid.len(),
        ds.train.len(),
        ds.val.len(),
        ds.test.len()
    );
    Ok(())
}

/// Relative path from `to`'s directory to `from` (best effort).
fn pathdiff(from: &Path, to: &Path) -> PathBuf {
    let from = from.canonicalize().unwrap_or_else(|_| from.to_path_buf());
    let to = to.canonicalize().unwrap_or_else(|_| to.to_path_buf());
    let from_parts: Vec<_> = from.components().collect();
    let to_parts: Vec<_> = to.components().collect();
    let common = from_parts
        .iter()
        .zip(to_parts.iter())
        .take_while(|(a, b)| a == b)
        .count();
    let mut out = PathBuf::new();
    for _ in common..to_parts.len() {
        out.push("..");
    }
    for part in &from_parts[common..] {
        out.push(part);
    }
    out
}

fn parse_config_file(path: &str) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {path}: {e}")))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Data(format!("{path}:{}: expected key=value", lineno + 1)));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn model_by_name(name: &str) -> Result<ModelConfig, CliError> {
    match name {
        "tiny" => Ok(ModelConfig::tiny()),
        "compact" => Ok(ModelConfig::compact()),
        "default" => Ok(ModelConfig::default()),
        other => Err(usage(format!("unknown model preset {other}"))),
    }
}

fn cmd_train(args: &Args) -> Result<(), CliError> {
    let data_dir = PathBuf::from(args.require("data").map_err(usage)?);
    let out_dir = PathBuf::from(args.require("out").map_err(usage)?);

    // config file first, flags override
    let mut kv: HashMap<String, String> = HashMap::new();
    if let Some(cfg_path) = args.get("config") {
        kv = parse_config_file(cfg_path)?;
    }
    for key in ["model", "lr", "batch-size", "max-iters", "val-every", "seed", "patience"] {
        if let Some(v) = args.get(key) {
            kv.insert(key.replace('-', "_"), v.to_string());
        }
    }
    let get = |key: &str| kv.get(key).map(|s| s.as_str());
    let parse_kv = |key: &str, default: f64| -> Result<f64, CliError> {
        match get(key) {
            Some(v) => v.parse().map_err(|_| usage(format!("bad {key}: {v}"))),
            None => Ok(default),
        }
    };

    let model_cfg = model_by_name(get("model").unwrap_or("compact"))?;
    let mut cfg = TrainConfig {
        lr: parse_kv("lr", 1e-4)?,
        batch_size: parse_kv("batch_size", 16.0)? as usize,
        max_iters: parse_kv("max_iters", 20_000.0)? as u64,
        val_every: parse_kv("val_every", 250.0)? as u64,
        seed: parse_kv("seed", 0.0)? as u64,
        patience: parse_kv("patience", 20.0)? as usize,
        checkpoint_dir: out_dir.clone(),
        ..TrainConfig::default()
    };

    let manifest_path = data_dir.join("dataset.json");
    let manifest =
        DatasetManifest::load(&manifest_path).map_err(|e| CliError::Data(e.to_string()))?;
    info!("building dataset from {}", manifest_path.display());
    let dataset = manifest.build(&manifest_path).map_err(CliError::Data)?;
    info!(
        "dataset ready: {} train / {} val / {} test sequences",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len()
    );

    let mut net = match args.get("resume") {
        Some(ckpt) => {
            let (net, meta) =
                load_checkpoint(Path::new(ckpt)).map_err(|e| CliError::Data(e.to_string()))?;
            cfg.start_iteration = meta.iterations;
            info!("resuming from {ckpt} at iteration {}", meta.iterations);
            net
        }
        None => {
            let mut net = HoovNet::new(model_cfg);
            init_params(&mut net, cfg.seed);
            net
        }
    };
    info!("model has {} parameters", net.param_count());

    let outcome = train(&mut net, &dataset, &cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    info!(
        "trained {} iterations; best val MAE {:.2} cm; checkpoint {}",
        outcome.iterations,
        outcome.best_val_mae_cm,
        outcome.best_checkpoint.display()
    );
    println!("{}", outcome.best_checkpoint.display());
    Ok(())
}

fn cmd_eval(args: &Args) -> Result<(), CliError> {
    let data_dir = PathBuf::from(args.require("data").map_err(usage)?);
    let ckpt = args.require("checkpoint").map_err(usage)?;
    let fov_deg: f64 = args.get_parsed("fov", 120.0).map_err(usage)?;
    let report_dir = PathBuf::from(args.require("report").map_err(usage)?);
    std::fs::create_dir_all(&report_dir).map_err(|e| CliError::Runtime(e.to_string()))?;

    let (net, meta) = load_checkpoint(Path::new(ckpt)).map_err(|e| CliError::Data(e.to_string()))?;
    info!("checkpoint from iteration {}", meta.iterations);

    let manifest_path = data_dir.join("dataset.json");
    let manifest =
        DatasetManifest::load(&manifest_path).map_err(|e| CliError::Data(e.to_string()))?;
    let recordings =
        manifest.load_recordings(&manifest_path).map_err(|e| CliError::Data(e.to_string()))?;

    // evaluate the manifest's test split at the requested FOV
    let eval_manifest = DatasetManifest { fov_grid: vec![fov_deg], ..manifest.clone() };
    let dataset = {
        hoov::synth::dataset::build_dataset(
            &recordings,
            &eval_manifest.fov_grid,
            eval_manifest.split,
            eval_manifest.seed,
            eval_manifest.max_seq_samples,
        )
        .map_err(|e| CliError::Data(e.to_string()))?
    };
    let seqs = if dataset.test.is_empty() { &dataset.val } else { &dataset.test };
    if seqs.is_empty() {
        return Err(CliError::Data("no evaluation sequences at this FOV".into()));
    }

    let segments = eval::evaluate_sequences(&net, seqs);
    let report = eval::summarize(&segments, 0.5).map_err(|e| CliError::Data(e.to_string()))?;
    let label = format!("{fov_deg:.0}");
    eval::write_report_csv(&[(label.clone(), report.clone())], &report_dir.join("report.csv"))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eval::write_report_markdown(&[(label, report.clone())], &report_dir.join("report.md"))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eval::write_curve_csv(&report, &report_dir.join("error_vs_time.csv"))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // dead-reckoning baseline on the same sequences
    let baseline_mae_cm = eval::dead_reckoning_mae(seqs) * 100.0;
    let model_mae_cm = eval::model_mae(&net, seqs) * 100.0;

    // selection-success simulation over the grid
    let arm = ArmModel::default();
    let grid = eval::target_grid(arm.reach(), 1.70 + arm.shoulder_offset.z);
    let mut rng = hoov::rng::Rng::new(manifest.seed ^ 0x5e1ec7);
    let mut estimates = Vec::new();
    let mut true_ids = Vec::new();
    for seq in seqs.iter().take(200) {
        let (tp, _, times) = seq.targets();
        if let Ok(est) = net.forward(seq.x(), &seq.prior, &times) {
            // sample one step per sequence as a selection event
            let k = rng.below(est.len());
            estimates.push(est[k].position);
            true_ids.push(eval::nearest_target(
                hoov::geom::Vec3::from_array(tp[k]),
                &grid,
            ));
        }
    }
    let success = eval::selection_success(&estimates, &true_ids, &grid);

    let summary = serde_json::json!({
        "fov_deg": fov_deg,
        "sequences": seqs.len(),
        "model_mae_cm": model_mae_cm,
        "dead_reckoning_mae_cm": baseline_mae_cm,
        "selection_success": success,
        "report_samples": report.samples,
        "mean_pos_cm": report.mean_pos_cm,
        "mean_rot_deg": report.mean_rot_deg,
    });
    std::fs::write(
        report_dir.join("summary.json"),
        serde_json::to_vec_pretty(&summary).expect("summary"),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "model MAE {model_mae_cm:.2} cm | dead reckoning {baseline_mae_cm:.2} cm | selection {:.1}%",
        success * 100.0
    );
    Ok(())
}

fn cmd_serve(args: &Args) -> Result<(), CliError> {
    let listen = args.require("listen").map_err(usage)?;
    let ckpt = args.require("checkpoint").map_err(usage)?;
    let (net, _) = load_checkpoint(Path::new(ckpt)).map_err(|e| CliError::Data(e.to_string()))?;
    let listener = std::net::TcpListener::bind(listen)
        .map_err(|e| CliError::Runtime(format!("cannot bind {listen}: {e}")))?;
    info!("serving on {listen}");
    serve(listener, Arc::new(net), PipelineConfig::default(), None)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_replay(args: &Args) -> Result<(), CliError> {
    let file = args.require("file").map_err(usage)?;
    let connect = args.require("connect").map_err(usage)?;
    let fov_deg: f64 = args.get_parsed("fov", 140.0).map_err(usage)?;
    let rec = load_recording(Path::new(file)).map_err(|e| CliError::Data(e.to_string()))?;
    let fov = FovConfig::with_horizontal(fov_deg);
    let replies =
        replay_recording(connect, &rec, &fov).map_err(|e| CliError::Runtime(e.to_string()))?;
    let estimates = replies
        .iter()
        .filter(|m| matches!(m, hoov::stream::WireMsg::PoseEstimate { .. }))
        .count();
    let pinches = replies
        .iter()
        .filter(|m| matches!(m, hoov::stream::WireMsg::PinchEvent { .. }))
        .count();
    let tracked = replies.len() - estimates - pinches;
    println!("received {} frames: {tracked} tracked, {estimates} estimates, {pinches} pinches", replies.len());
    Ok(())
}

fn cmd_pinch(args: &Args) -> Result<(), CliError> {
    let file = args.require("file").map_err(usage)?;
    let rec = load_recording(Path::new(file)).map_err(|e| CliError::Data(e.to_string()))?;
    let events = detect_pinches(&rec.imu, PinchDetector::default());
    for e in &events {
        println!("{:.4} {:.3}", e.t, e.score);
    }
    info!("{} pinch events", events.len());
    Ok(())
}
