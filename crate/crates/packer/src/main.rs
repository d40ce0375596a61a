use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use packer::client::TcpLink;
use packer::eval::{evaluate, NoiseModel};
use packer::io::{calibrate, load_scene, read_json, read_points, write_json};
use packer::server::SimServer;
use packer_core::calibration::CalibrationModel;
use packer_core::executor::{Executor, NoRescan, SceneSource};
use packer_core::kinematics::DeltaGeometry;
use packer_core::metrics::{evaluate_detections, render_metrics_table, ImageDetections};
use packer_core::perception::{ObjectFailure, Scene};
use packer_core::planner::{extract_pack_spec, grasp_to_world, plan_pack, LabelConfig, PackSpec, Plan};
use packer_core::sim::{SimConfig, SimObject, SimRobot};
use packer_core::GraspPlan;
use serde::Serialize;

/// Exit status: everything succeeded.
const SUCCESS: u8 = 0;
/// Some objects, slots or actions failed and were recorded.
const PARTIAL: u8 = 1;
const FATAL: u8 = 2;

#[derive(Parser)]
#[command(name = "packer", version, about = "Catering pack assembly with a delta robot")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grasp plans for every detection, as JSON on stdout.
    Grasp {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long, requires = "height")]
        calib: Option<PathBuf>,
        /// Camera-to-plane height in mm for world conversion.
        #[arg(long, requires = "calib")]
        height: Option<f64>,
    },
    /// Slot layout from a reference pack image.
    PackSpec {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick-and-place plan for a floor scene.
    Plan {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Robot geometry used to check configured depths.
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// Executes a plan against a robot; the report goes to stdout.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// HOST:PORT
        #[arg(long)]
        robot: String,
        /// Connect and reply timeout in seconds.
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
        /// Label configuration; the built-in catering table otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Calibration for rescanned scenes.
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Detections re-read after each knock-over.
        #[arg(long, requires_all = ["rescan_masks", "calib"])]
        rescan_dets: Option<PathBuf>,
        #[arg(long, requires = "rescan_dets")]
        rescan_masks: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serves the simulated robot over TCP until killed.
    Simulate {
        /// [HOST]:PORT, e.g. :7000
        #[arg(long)]
        listen: String,
        #[arg(long)]
        geometry: PathBuf,
        /// JSON list of simulated objects.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Delay before every reply.
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        /// Force model and grasp tolerances.
        #[arg(long)]
        sim_config: Option<PathBuf>,
    },
    /// Fits a calibration from measured points.
    Calibrate {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulated grasp-success table.
    Eval {
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Centre jitter, px.
        #[arg(long, default_value_t = NoiseModel::default().center_px)]
        sigma_center: f64,
        /// ψ jitter, degrees.
        #[arg(long, default_value_t = NoiseModel::default().psi_deg)]
        sigma_psi: f64,
        /// Width jitter, px.
        #[arg(long, default_value_t = NoiseModel::default().width_px)]
        sigma_width: f64,
    },
    /// Precision, recall and mAP50 per label.
    EvalDetections {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
}

#[derive(Serialize)]
struct GraspEntry {
    label: String,
    confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grasp: Option<GraspPlan>,
    /// Robot frame, when a calibration was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    world: Option<GraspPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<ObjectFailure>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn grasp(dets: PathBuf, masks: PathBuf, calib: Option<PathBuf>, height: Option<f64>) -> Result<u8> {
    let scene = load_scene(&dets, &masks)?;
    let map = match (calib, height) {
        (Some(path), Some(h)) => Some(read_json::<CalibrationModel>(&path)?.map_at(h)?),
        _ => None,
    };
    let entries: Vec<GraspEntry> = scene
        .objects
        .into_iter()
        .map(|o| {
            let world = o.grasp.as_ref().zip(map.as_ref()).map(|(g, m)| {
                let mut w = grasp_to_world(g, m, 0.0);
                w.depth_mm = None;
                w
            });
            let grasp = o.grasp.map(|mut g| {
                g.width_mm = world.as_ref().and_then(|w| w.width_mm);
                g
            });
            GraspEntry {
                label: o.detection.label,
                confidence: o.detection.confidence,
                grasp,
                world,
                failure: o.failure,
            }
        })
        .collect();
    print_json(&entries)?;
    Ok(if entries.iter().any(|e| e.failure.is_some()) { PARTIAL } else { SUCCESS })
}

fn pack_spec(dets: PathBuf, masks: PathBuf, out: PathBuf) -> Result<u8> {
    let spec = extract_pack_spec(&load_scene(&dets, &masks)?)?;
    write_json(&out, &spec)?;
    Ok(SUCCESS)
}

fn plan(spec: PathBuf, dets: PathBuf, masks: PathBuf, calib: PathBuf, config: PathBuf, out: PathBuf, geometry: Option<PathBuf>) -> Result<u8> {
    let spec: PackSpec = read_json(&spec)?;
    let floor = load_scene(&dets, &masks)?;
    let calibration: CalibrationModel = read_json(&calib)?;
    let config: LabelConfig = read_json(&config)?;
    let geometry = geometry.map(|g| read_json::<DeltaGeometry>(&g)).transpose()?;
    config.validate(geometry.as_ref())?;
    let plan = plan_pack(&spec, &floor, &config, &calibration)?;
    write_json(&out, &plan)?;
    for m in &plan.missing {
        log::warn!("slot {} ({}): {:?}", m.slot, m.label, m.reason);
    }
    Ok(if plan.has_shortfall() { PARTIAL } else { SUCCESS })
}

struct FileRescan {
    dets: PathBuf,
    masks: PathBuf,
}

impl SceneSource for FileRescan {
    fn rescan(&mut self) -> std::result::Result<Scene, String> {
        load_scene(&self.dets, &self.masks).map_err(|e| format!("{e:#}"))
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    plan: PathBuf,
    robot: String,
    timeout: f64,
    config: Option<PathBuf>,
    geometry: Option<PathBuf>,
    calib: Option<PathBuf>,
    rescan: Option<(PathBuf, PathBuf)>,
    out: Option<PathBuf>,
) -> Result<u8> {
    if !(timeout.is_finite() && timeout > 0.0) {
        bail!("--timeout must be positive");
    }
    let plan: Plan = read_json(&plan)?;
    let config = match config {
        Some(p) => read_json(&p)?,
        None => LabelConfig::default_catering(),
    };
    let geometry = match geometry {
        Some(p) => read_json(&p)?,
        None => DeltaGeometry::default(),
    };
    let calibration = calib.map(|p| read_json::<CalibrationModel>(&p)).transpose()?;
    let mut link = TcpLink::connect(robot.as_str(), Duration::from_secs_f64(timeout)).with_context(|| format!("robot at {robot}"))?;
    let executor = Executor {
        geometry: &geometry,
        calibration: calibration.as_ref(),
        config: &config,
    };
    let report = match rescan {
        Some((dets, masks)) => executor.execute(&plan, &mut link, &mut FileRescan { dets, masks }),
        None => executor.execute(&plan, &mut link, &mut NoRescan),
    };
    print_json(&report)?;
    if let Some(out) = out {
        write_json(&out, &report)?;
    }
    Ok(if report.all_succeeded() { SUCCESS } else { PARTIAL })
}

fn calibrate_points(points: PathBuf, out: PathBuf) -> Result<u8> {
    let model = calibrate(&read_points(&points)?)?;
    for p in model.planes() {
        log::info!("plane at {} mm: rms {:.3} mm", p.height_mm, p.rms_residual_mm);
    }
    write_json(&out, &model)?;
    Ok(SUCCESS)
}

fn simulate(listen: String, geometry: PathBuf, scene: PathBuf, seed: u64, latency_ms: u64, sim_config: Option<PathBuf>) -> Result<u8> {
    let geometry: DeltaGeometry = read_json(&geometry)?;
    let objects: Vec<SimObject> = read_json(&scene)?;
    let sim = match sim_config {
        Some(p) => read_json(&p)?,
        None => SimConfig::default(),
    };
    let addr = if listen.starts_with(':') { format!("0.0.0.0{listen}") } else { listen };
    let robot = SimRobot::new(geometry, sim, objects, seed)?;
    let server = SimServer::bind(addr.as_str(), robot)
        .with_context(|| format!("binding {addr}"))?
        .with_latency(Duration::from_millis(latency_ms));
    println!("listening on {}", server.local_addr()?);
    server.serve()?;
    Ok(SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Grasp { dets, masks, calib, height } => grasp(dets, masks, calib, height),
        Cmd::PackSpec { dets, masks, out } => pack_spec(dets, masks, out),
        Cmd::Plan {
            spec,
            dets,
            masks,
            calib,
            config,
            out,
            geometry,
        } => plan(spec, dets, masks, calib, config, out, geometry),
        Cmd::Run {
            plan,
            robot,
            timeout,
            config,
            geometry,
            calib,
            rescan_dets,
            rescan_masks,
            out,
        } => run(plan, robot, timeout, config, geometry, calib, rescan_dets.zip(rescan_masks), out),
        Cmd::Simulate {
            listen,
            geometry,
            scene,
            seed,
            latency_ms,
            sim_config,
        } => simulate(listen, geometry, scene, seed, latency_ms, sim_config),
        Cmd::Calibrate { points, out } => calibrate_points(points, out),
        Cmd::Eval {
            trials,
            config,
            seed,
            sigma_center,
            sigma_psi,
            sigma_width,
        } => read_json::<LabelConfig>(&config).map(|config| {
            let noise = NoiseModel {
                center_px: sigma_center,
                psi_deg: sigma_psi,
                width_px: sigma_width,
            };
            print!("{}", evaluate(&config, trials, noise, seed).render());
            SUCCESS
        }),
        Cmd::EvalDetections { pred, truth, iou } => (|| {
            let pred: Vec<ImageDetections> = read_json(&pred)?;
            let truth: Vec<ImageDetections> = read_json(&truth)?;
            print!("{}", render_metrics_table(&evaluate_detections(&pred, &truth, iou)?));
            Ok(SUCCESS)
        })(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(FATAL)
        }
    }
}
