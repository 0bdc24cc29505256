//! Command-line entry points.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use volstc_core::cluster::{ClusterIndex, ClusterParams, DEFAULT_EPS, DEFAULT_MIN_PTS, LAMBDA_A_OFFSET};
use volstc_core::format::{load_dataset_file, load_volume, save_dataset, save_volume};
use volstc_core::ingest::{load_dataset_paths, parse_timestamp, validate_dataset, DEFAULT_MIN_SAMPLES};
use volstc_core::render::{encode_png, render_frame, Basemap, ContextOptions, RenderSettings};
use volstc_core::transform::{build_volume_detailed, cross_validate, BuildOptions, CvOptions, Method, DEFAULT_WINDOW};
use volstc_core::{volume_to_render_space, Camera, GridSpec, SelectionState, Spotlight, ValueRange, Vec3};

use crate::engine::Engine;
use crate::error::ServiceError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] volstc_core::Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Argument(String),
}

#[derive(Debug, Parser)]
#[command(name = "volstc", version, about = "Space-time cube volumes from station time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load station and reading CSV files into a dataset file.
    Ingest(IngestArgs),
    /// Interpolate a dataset into a space-time volume.
    Transform(TransformArgs),
    /// Render one frame of a volume to PNG.
    Render(RenderArgs),
    /// Detect high-value voxel clusters and write their summaries as JSON.
    Clusters(ClustersArgs),
    /// Run the session server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub stations: PathBuf,
    #[arg(long)]
    pub readings: PathBuf,
    /// First step, ISO-8601 (UTC when no offset is given).
    #[arg(long)]
    pub t0: String,
    /// Step length in seconds.
    #[arg(long)]
    pub dt: u32,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub vmin: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub vmax: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Grid size as `MxN`.
    #[arg(long, value_parser = parse_size::<usize>)]
    pub grid: (usize, usize),
    /// `lon0,lat0,lon1,lat1`
    #[arg(long, value_parser = parse_extent, allow_hyphen_values = true)]
    pub extent: [f64; 4],
    #[arg(long, default_value = "kriging")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a leave-one-station-out report (JSON) here.
    #[arg(long)]
    pub cv_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// `ex,ey,ez/tx,ty,tz/ux,uy,uz/vfov`; defaults to a framing view.
    #[arg(long, value_parser = parse_camera, allow_hyphen_values = true)]
    pub camera: Option<CameraSpec>,
    /// `WxH`
    #[arg(long, value_parser = parse_size::<u32>, default_value = "512x512")]
    pub size: (u32, u32),
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_v: Option<f64>,
    #[arg(long)]
    pub surface: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_i: Option<f64>,
    /// Inclusive step range `t0:t1`.
    #[arg(long, value_parser = parse_trange)]
    pub trange: Option<(usize, usize)>,
    /// Spotlight `cx,cy,r` in cell coordinates.
    #[arg(long, value_parser = parse_spot)]
    pub spot: Option<Spotlight>,
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub z_scale: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClustersArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// Defaults to the volume minimum plus 25.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_a: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    pub min_pts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Basemap image drawn on the map plane.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Volumes to register at startup.
    #[arg(long)]
    pub volume: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub vfov: f64,
}

fn parse_list(s: &str, len: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != len {
        return Err(format!("expected {len} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

pub fn parse_size<T: std::str::FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<T>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn parse_extent(s: &str) -> Result<[f64; 4], String> {
    let v = parse_list(s, 4)?;
    Ok([v[0], v[1], v[2], v[3]])
}

pub fn parse_camera(s: &str) -> Result<CameraSpec, String> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != 4 {
        return Err(format!("expected eye/target/up/vfov, got `{s}`"));
    }
    let v3 = |p: &str| parse_list(p, 3).map(|v| Vec3::new(v[0], v[1], v[2]));
    Ok(CameraSpec {
        eye: v3(parts[0])?,
        target: v3(parts[1])?,
        up: v3(parts[2])?,
        vfov: parts[3].trim().parse().map_err(|e| format!("vfov: {e}"))?,
    })
}

pub fn parse_trange(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected t0:t1, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn parse_spot(s: &str) -> Result<Spotlight, String> {
    let v = parse_list(s, 3)?;
    Ok(Spotlight { cx: v[0], cy: v[1], r: v[2] })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Transform(a) => transform(a),
        Command::Render(a) => render(a),
        Command::Clusters(a) => clusters(a),
        Command::Serve(a) => serve(a),
    }
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let t0 = parse_timestamp(&a.t0)?.round() as i64;
    let range = ValueRange::new(a.vmin, a.vmax)?;
    let out = load_dataset_paths(&a.stations, &a.readings, t0, a.dt, a.steps, range)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let report = validate_dataset(&out.dataset, DEFAULT_MIN_SAMPLES);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    save_dataset(&out.dataset, &a.out)?;
    println!(
        "{} stations x {} steps, {:.2}% missing -> {}",
        report.station_count,
        report.timestamp_count,
        report.missing_fraction * 100.0,
        a.out.display()
    );
    Ok(())
}

fn transform(a: TransformArgs) -> Result<(), CliError> {
    let ds = load_dataset_file(&a.input)?;
    let [lon0, lat0, lon1, lat1] = a.extent;
    let grid = GridSpec::new((lon0, lat0, lon1, lat1), a.grid.0, a.grid.1)?;
    let report = build_volume_detailed(&ds, &grid, &BuildOptions::new(a.method, a.window))?;
    if !report.invalid_slices.is_empty() {
        eprintln!("warning: {} slice(s) filled from neighbors", report.invalid_slices.len());
    }
    save_volume(&report.volume, &a.out)?;
    if let Some(path) = &a.cv_report {
        let cv = cross_validate(&ds, &grid, a.method, &CvOptions::default())?;
        std::fs::write(path, serde_json::to_vec_pretty(&cv)?)?;
        println!("cross-validation: mae {:.4}, rmse {:.4}", cv.mae, cv.rmse);
    }
    println!("{}x{}x{} volume -> {}", grid.m, grid.n, ds.steps(), a.out.display());
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let volume = load_volume(&a.volume)?;
    let mut settings = RenderSettings::for_volume(&volume);
    if let Some(zs) = a.z_scale {
        settings.z_scale = zs;
        settings.step = 0.5 * zs.min(1.0);
    }
    if let Some(v) = a.lambda_v {
        settings = settings.with_lambda_v(v);
    }
    settings.surface_enabled = a.surface;
    if let Some(v) = a.lambda_i {
        settings.lambda_i = v;
    }
    let (w, h) = a.size;
    let camera = match a.camera {
        Some(c) => Camera { eye: c.eye, target: c.target, up: c.up, vfov: c.vfov, width: w, height: h },
        None => {
            let bounds = volume_to_render_space(&volume, settings.z_scale)?;
            Camera::framing(&bounds, crate::session::DEFAULT_AZIMUTH, crate::session::DEFAULT_ELEVATION, w, h)
        }
    };
    let mut selection = SelectionState::full(volume.steps());
    if let Some(r) = a.trange {
        selection.time_range = (r.0.min(r.1), r.0.max(r.1));
    }
    selection.spotlight = a.spot;
    let mut ctx = ContextOptions::default();
    if let Some(map) = &a.map {
        ctx.basemap = Some(Arc::new(Basemap::load(map)?));
    }
    let (image, meta) = render_frame(&volume, &camera, &settings, &selection, &ctx)?;
    std::fs::write(&a.out, encode_png(&image)?)?;
    println!("{}", serde_json::to_string(&meta)?);
    Ok(())
}

fn clusters(a: ClustersArgs) -> Result<(), CliError> {
    let volume = load_volume(&a.volume)?;
    let lambda_a = a.lambda_a.unwrap_or(volume.value_range().min + LAMBDA_A_OFFSET);
    let index = ClusterIndex::build(&volume, ClusterParams::new(lambda_a, a.eps, a.min_pts)?)?;
    std::fs::write(&a.out, serde_json::to_vec_pretty(&index.summaries)?)?;
    println!("{} cluster(s) -> {}", index.summaries.len(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let mut ctx = ContextOptions::default();
    if let Some(map) = &a.map {
        ctx.basemap = Some(Arc::new(Basemap::load(map)?));
    }
    let engine = Arc::new(Engine::new(ctx));
    for path in &a.volume {
        let id = engine.register_volume_path(path)?;
        tracing::info!(%id, path = %path.display(), "registered volume");
    }
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Argument(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, crate::api::router(engine))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
