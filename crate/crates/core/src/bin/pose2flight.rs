use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pose2flight::bridge::{Bridge, BridgeConfig};
use pose2flight::bus::Topic;
use pose2flight::config::Config;
use pose2flight::control::{ControlMode, Key};
use pose2flight::distance::{evaluate, generate_synthetic_dataset, DistanceModel, Sample, TrainConfig};
use pose2flight::gesture::Gesture;
use pose2flight::pipeline::{LivePipeline, Recorder, StreamReader, VirtualSession};
use pose2flight::scene::{corpus_accuracy, gesture_corpus, jitter_frame, preset_frame, CorpusConfig};
use pose2flight::sim::udp::{ServerConfig, SimServer};
use pose2flight::skeleton::serialize_skeleton_frame;
use pose2flight::{Error, Result};

#[derive(Parser)]
#[command(name = "pose2flight", version, about = "Gesture, face and distance driven control of a simulated drone")]
struct Cli {
    /// Config file; defaults to $POSE2FLIGHT_CONFIG, then built-in values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline with the simulator on the wall clock. Keys are read
    /// from stdin, one per line (t, l, space, 1, 2, 3, r, up, down, left, right).
    Run {
        /// Skeleton stream to feed; otherwise frames come from the bridge.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Also serve the console bridge.
        #[arg(long)]
        bridge: bool,
        #[arg(long)]
        port: Option<u16>,
        /// Take off and switch to this mode before streaming.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Replays a skeleton stream through the pipeline.
    Replay {
        #[arg(long)]
        input: PathBuf,
        /// Wall-clock pacing; without it the run uses the virtual clock.
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Replays a stream and writes the given topics to a session log.
    Record {
        /// Comma-separated topic names, e.g. /gesture,/cmd.
        #[arg(long, value_delimiter = ',', required = true)]
        topics: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Trains the distance model on synthetic data (or --data).
    TrainDistance {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 960)]
        per_class: usize,
    },
    /// Held-out accuracy and readout error of a distance model.
    EvalDistance {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
    },
    /// Per-gesture accuracy on a generated corpus.
    EvalGesture {
        #[arg(long, default_value_t = 600)]
        per_gesture: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Joint jitter as a fraction of shoulder width.
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
    },
    /// Writes generated data.
    GenData {
        #[arg(value_enum)]
        kind: DataKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// distance: relative feature noise; stream/corpus: jitter as a
        /// fraction of shoulder width.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 960)]
        per_class: usize,
        /// stream: gesture to hold; omit for the idle pose.
        #[arg(long)]
        gesture: Option<String>,
        #[arg(long, default_value_t = 300)]
        frames: u64,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
    },
    /// Console bridge (WebSocket plus static files) over a live pipeline.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Standalone UDP drone simulator speaking the SDK text protocol.
    Sim {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        telemetry_port: Option<u16>,
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Keyboard,
    FaceTracking,
    GestureControl,
}

impl ModeArg {
    fn mode(self) -> ControlMode {
        match self {
            ModeArg::Keyboard => ControlMode::Keyboard,
            ModeArg::FaceTracking => ControlMode::FaceTracking,
            ModeArg::GestureControl => ControlMode::GestureControl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    /// Labeled distance features, one JSON sample per line.
    Distance,
    /// A skeleton stream holding one preset pose.
    Stream,
    /// Labeled gesture corpus, one {"gesture","frame"} per line.
    Corpus,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Run {
            input,
            fps,
            bridge,
            port,
            mode,
        } => cmd_run(&cfg, input, fps, bridge.then(|| port.unwrap_or(cfg.bridge.port)), mode),
        Command::Replay { input, fps, mode } => cmd_replay(&cfg, &input, fps, mode, None),
        Command::Record {
            topics,
            out,
            input,
            fps,
            mode,
        } => {
            let topics = topics.iter().map(|t| Topic::from_name(t.trim())).collect::<Result<Vec<_>>>()?;
            cmd_replay(&cfg, &input, fps, mode, Some((topics, out)))
        }
        Command::TrainDistance {
            out,
            data,
            seed,
            epochs,
            noise,
            per_class,
        } => {
            let train = match data {
                Some(p) => load_samples(&p)?,
                None => generate_synthetic_dataset(per_class, noise, seed),
            };
            let tc = TrainConfig {
                epochs,
                seed,
                ..TrainConfig::default()
            };
            let (model, report) = DistanceModel::train(&train, &tc)?;
            for (i, l) in report.epoch_losses.iter().enumerate() {
                println!("epoch {:>2}  loss {l:.4}", i + 1);
            }
            let held_out = generate_synthetic_dataset(200, noise, seed ^ 0x5eed);
            print_eval(&evaluate(&model, &held_out)?);
            model.save(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::EvalDistance {
            model,
            data,
            seed,
            noise,
            per_class,
        } => {
            let path = model
                .or(cfg.distance.model_path.clone())
                .ok_or_else(|| Error::Config("no model: pass --model or set distance.model_path".into()))?;
            let model = DistanceModel::load(&path)?;
            let samples = match data {
                Some(p) => load_samples(&p)?,
                None => generate_synthetic_dataset(per_class, noise, seed),
            };
            print_eval(&evaluate(&model, &samples)?);
            Ok(())
        }
        Command::EvalGesture {
            per_gesture,
            seed,
            noise,
        } => {
            let corpus_cfg = CorpusConfig {
                jitter_frac: noise,
                ..CorpusConfig::default()
            };
            let corpus = gesture_corpus(per_gesture, seed, &corpus_cfg);
            let acc = corpus_accuracy(&corpus, &cfg.view(), &cfg.gesture());
            for (g, a) in &acc {
                println!("{:<16} {:6.2}%", g.as_str(), a * 100.0);
            }
            let mean = acc.iter().map(|(_, a)| a).sum::<f64>() / acc.len() as f64;
            println!("{:<16} {:6.2}%", "average", mean * 100.0);
            Ok(())
        }
        Command::GenData {
            kind,
            out,
            seed,
            noise,
            per_class,
            gesture,
            frames,
            fps,
        } => gen_data(kind, &out, seed, noise, per_class, gesture.as_deref(), frames, fps),
        Command::Serve { port, static_dir } => {
            let pipeline = Arc::new(LivePipeline::start(&cfg, load_model(&cfg)?)?);
            let bridge = start_bridge(&cfg, &pipeline, port.unwrap_or(cfg.bridge.port), static_dir)?;
            println!("bridge on ws://{}", bridge.local_addr());
            while pipeline.is_running() {
                thread::sleep(Duration::from_millis(200));
            }
            Ok(())
        }
        Command::Sim {
            port,
            telemetry_port,
            time_scale,
        } => {
            let server = SimServer::spawn(ServerConfig {
                bind: SocketAddr::from(([0, 0, 0, 0], port.unwrap_or(cfg.sim.port))),
                telemetry_port: telemetry_port.unwrap_or(cfg.sim.telemetry_port),
                time_scale,
                sim: cfg.sim(),
            })?;
            println!("simulator on udp://{}", server.local_addr());
            loop {
                thread::sleep(Duration::from_secs(1));
            }
        }
    }
}

fn load_model(cfg: &Config) -> Result<Option<DistanceModel>> {
    cfg.distance.model_path.as_ref().map(DistanceModel::load).transpose()
}

fn start_bridge(cfg: &Config, pipeline: &Arc<LivePipeline>, port: u16, static_dir: Option<PathBuf>) -> Result<Bridge> {
    Bridge::spawn(
        BridgeConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], port)),
            static_dir: static_dir.or(cfg.bridge.static_dir.clone()),
            snapshot_hz: cfg.bridge.snapshot_hz,
        },
        pipeline.clone(),
    )
}

fn cmd_run(cfg: &Config, input: Option<PathBuf>, fps: f64, bridge_port: Option<u16>, mode: Option<ModeArg>) -> Result<()> {
    let pipeline = Arc::new(LivePipeline::start(cfg, load_model(cfg)?)?);
    let _bridge = bridge_port.map(|p| start_bridge(cfg, &pipeline, p, None)).transpose()?;
    if let Some(m) = mode {
        pipeline.send_key(Key::Takeoff)?;
        thread::sleep(Duration::from_secs(5));
        pipeline.send_key(Key::Mode(m.mode()))?;
    }
    let done = Arc::new(AtomicBool::new(false));
    {
        let (pipeline, done) = (pipeline.clone(), done.clone());
        thread::spawn(move || {
            for line in io::stdin().lock().lines().map_while(|l| l.ok()) {
                match Key::from_name(line.trim()) {
                    Some(k) => {
                        let _ = pipeline.send_key(k);
                    }
                    None if line.trim() == "q" => break,
                    None => eprintln!("unknown key {:?}", line.trim()),
                }
            }
            done.store(true, Ordering::Relaxed);
        });
    }
    if let Some(path) = input {
        let report = pipeline.replay(StreamReader::open(&path)?, fps)?;
        println!("streamed {} scenes at {:.1} fps", report.scenes, report.fps());
        pipeline.wait_processed(Duration::from_secs(5));
        print_snapshot(&pipeline);
        return Ok(());
    }
    let mut ticks = 0u64;
    while pipeline.is_running() && !done.load(Ordering::Relaxed) {
        thread::sleep(Duration::from_millis(100));
        ticks += 1;
        if ticks.is_multiple_of(10) {
            print_snapshot(&pipeline);
        }
    }
    Ok(())
}

fn print_snapshot(p: &LivePipeline) {
    let s = p.snapshot();
    let d = &s.drone;
    println!(
        "t={}ms mode={} pos=({:.0},{:.0},{:.0}) yaw={:.0} bat={:.0}% view={} gesture={} dist={}",
        p.now_ms(),
        s.mode.as_str(),
        d.x,
        d.y,
        d.z,
        d.yaw,
        d.battery,
        s.view.map_or("-", |v| v.as_str()),
        s.gesture.map_or("-", |g| g.gesture.as_str()),
        s.distance.map_or("-".into(), |e| format!("{:.0}cm", e.continuous_cm)),
    );
}

fn cmd_replay(
    cfg: &Config,
    input: &Path,
    fps: Option<f64>,
    mode: Option<ModeArg>,
    record: Option<(Vec<Topic>, PathBuf)>,
) -> Result<()> {
    let model = load_model(cfg)?;
    match fps {
        None => {
            let mut s = VirtualSession::new(cfg, model)?;
            if let Some((topics, out)) = &record {
                s.record(Box::new(BufWriter::new(File::create(out)?)), topics)?;
            }
            if let Some(m) = mode {
                s.key(Key::Takeoff)?;
                s.run_for(6000)?;
                s.key(Key::Mode(m.mode()))?;
            }
            let frames = StreamReader::open(input)?.collect::<Result<Vec<_>>>()?;
            let n = frames.len();
            let offset = s.now_ms();
            s.run_frames(frames.into_iter().map(|mut f| {
                f.timestamp_ms += offset;
                f
            }))?;
            s.finish_recording()?;
            let snap = s.snapshot();
            println!(
                "replayed {n} frames to t={}ms; gesture={} z={:.1}",
                s.now_ms(),
                snap.gesture.map_or("-", |g| g.gesture.as_str()),
                snap.drone.z
            );
        }
        Some(fps) => {
            let p = LivePipeline::start(cfg, model)?;
            let stop = Arc::new(AtomicBool::new(false));
            let rec_thread = match &record {
                Some((topics, out)) => {
                    let mut rec = Recorder::create(out, p.bus(), topics)?;
                    let stop = stop.clone();
                    Some(thread::spawn(move || -> Result<()> {
                        while !stop.load(Ordering::Relaxed) {
                            rec.pump()?;
                            thread::sleep(Duration::from_millis(10));
                        }
                        rec.close()?;
                        Ok(())
                    }))
                }
                None => None,
            };
            if let Some(m) = mode {
                p.send_key(Key::Takeoff)?;
                thread::sleep(Duration::from_secs(6));
                p.send_key(Key::Mode(m.mode()))?;
            }
            let report = p.replay(StreamReader::open(input)?, fps);
            p.wait_processed(Duration::from_secs(5));
            thread::sleep(Duration::from_millis(100));
            stop.store(true, Ordering::Relaxed);
            if let Some(t) = rec_thread {
                t.join().expect("recorder thread")?;
            }
            let report = report?;
            println!(
                "replayed {} scenes in {:.2}s ({:.1} fps), dropped {}",
                report.scenes,
                report.elapsed.as_secs_f64(),
                report.fps(),
                p.stats().dropped.load(Ordering::Relaxed)
            );
        }
    }
    if let Some((_, out)) = record {
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    kind: DataKind,
    out: &Path,
    seed: u64,
    noise: Option<f64>,
    per_class: usize,
    gesture: Option<&str>,
    frames: u64,
    fps: f64,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(out)?);
    match kind {
        DataKind::Distance => {
            for s in generate_synthetic_dataset(per_class, noise.unwrap_or(0.05), seed) {
                writeln!(w, "{}", serde_json::to_string(&s).expect("sample serializes"))?;
            }
        }
        DataKind::Stream => {
            let g = gesture
                .map(|name| Gesture::from_name(name).ok_or_else(|| Error::Config(format!("unknown gesture {name:?}"))))
                .transpose()?;
            if !(fps > 0.0) {
                return Err(Error::OutOfRange("fps must be > 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = preset_frame(g, 0);
            let sigma = noise.unwrap_or(0.0) * shoulder_px(&base);
            for i in 0..frames {
                let mut f = jitter_frame(&base, sigma, &mut rng);
                f.timestamp_ms = (i as f64 * 1000.0 / fps).round() as u64;
                writeln!(w, "{}", serialize_skeleton_frame(&f))?;
            }
        }
        DataKind::Corpus => {
            let cc = CorpusConfig {
                jitter_frac: noise.unwrap_or(0.03),
                ..CorpusConfig::default()
            };
            for (g, f) in gesture_corpus(per_class, seed, &cc) {
                let frame: serde_json::Value = serde_json::from_str(&serialize_skeleton_frame(&f)).expect("valid line");
                writeln!(w, "{}", serde_json::json!({"gesture": g.as_str(), "frame": frame}))?;
            }
        }
    }
    w.flush()?;
    println!("wrote {}", out.display());
    Ok(())
}

fn shoulder_px(f: &pose2flight::skeleton::SkeletonFrame) -> f64 {
    use pose2flight::skeleton::{joint_distance, JointId};
    joint_distance(f, JointId::RShoulder, JointId::LShoulder).unwrap_or(0.0)
}

fn load_samples(path: &Path) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line).map_err(|e| Error::ParseLine {
            line: i + 1,
            source: Box::new(Error::Schema(e.to_string())),
        })?;
        out.push(s);
    }
    Ok(out)
}

fn print_eval(r: &pose2flight::distance::EvalReport) {
    println!(
        "samples {}  class accuracy {:.2}%  MAE {:.2} cm  MSD {:+.2} cm",
        r.samples,
        r.class_accuracy * 100.0,
        r.mae_cm,
        r.msd_cm
    );
}
