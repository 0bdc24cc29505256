//! Volume registry, sessions and the shared cluster cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use volstc_core::cluster::{pick, ClusterIndex, ClusterParams, VoxelClusterSummary};
use volstc_core::format::load_volume;
use volstc_core::render::{encode_png, map_plane_point, render_frame, ContextOptions, FrameMeta};
use volstc_core::{SpaceTimeVolume, ValueRange};

use crate::error::{ServiceError, ServiceResult};
use crate::session::{Session, SessionView, StatePatch};

pub const MAX_FRAME_SIDE: u32 = 4096;

pub struct VolumeEntry {
    pub id: String,
    pub source: Option<PathBuf>,
    pub volume: Arc<SpaceTimeVolume>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub id: String,
    pub m: usize,
    pub n: usize,
    pub steps: usize,
    pub t0: i64,
    pub dt: u32,
    pub value_range: ValueRange,
    /// `[lon0, lat0, lon1, lat1]`
    pub extent: [f64; 4],
    pub default_z_scale: f64,
    pub source: Option<PathBuf>,
}

#[derive(Hash, PartialEq, Eq, Clone, Debug)]
struct ClusterKey {
    volume_id: String,
    lambda_a: u64,
    eps: u64,
    min_pts: usize,
}

type Slot = Arc<OnceLock<Result<Arc<ClusterIndex>, String>>>;

/// Cluster detections keyed by volume and parameters. Concurrent requests for one key
/// share a single computation.
#[derive(Default)]
pub struct ClusterCache {
    slots: Mutex<HashMap<ClusterKey, Slot>>,
    computations: AtomicUsize,
}

impl ClusterCache {
    pub fn get(&self, volume_id: &str, volume: &SpaceTimeVolume, params: ClusterParams) -> ServiceResult<Arc<ClusterIndex>> {
        params.validate()?;
        let key = ClusterKey {
            volume_id: volume_id.to_owned(),
            lambda_a: params.lambda_a.to_bits(),
            eps: params.eps.to_bits(),
            min_pts: params.min_pts,
        };
        let slot = self.slots.lock().unwrap_or_else(|e| e.into_inner()).entry(key).or_default().clone();
        slot.get_or_init(|| {
            self.computations.fetch_add(1, Ordering::Relaxed);
            ClusterIndex::build(volume, params).map(Arc::new).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(ServiceError::BadRequest)
    }

    /// Number of detections actually run.
    pub fn computations(&self) -> usize {
        self.computations.load(Ordering::Relaxed)
    }
}

pub struct FrameOutput {
    pub revision: u64,
    pub meta: FrameMeta,
    pub png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickOutcome {
    pub hit: Option<VoxelClusterSummary>,
    pub session: SessionView,
}

pub struct Engine {
    volumes: RwLock<HashMap<String, Arc<VolumeEntry>>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    clusters: ClusterCache,
    context: ContextOptions,
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl Engine {
    pub fn new(context: ContextOptions) -> Self {
        Self {
            volumes: RwLock::default(),
            sessions: RwLock::default(),
            clusters: ClusterCache::default(),
            context,
        }
    }

    pub fn cluster_cache(&self) -> &ClusterCache {
        &self.clusters
    }

    pub fn add_volume(&self, volume: SpaceTimeVolume, source: Option<PathBuf>) -> String {
        let id = new_id();
        let entry = Arc::new(VolumeEntry { id: id.clone(), source, volume: Arc::new(volume) });
        self.volumes.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), entry);
        id
    }

    pub fn register_volume_path(&self, path: &Path) -> ServiceResult<String> {
        let volume = load_volume(path)?;
        Ok(self.add_volume(volume, Some(path.to_path_buf())))
    }

    pub fn volume(&self, id: &str) -> ServiceResult<Arc<VolumeEntry>> {
        self.volumes
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::VolumeNotFound(id.to_owned()))
    }

    pub fn volume_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.volumes.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn volume_meta(&self, id: &str) -> ServiceResult<VolumeMeta> {
        let e = self.volume(id)?;
        let v = &e.volume;
        let g = v.grid();
        Ok(VolumeMeta {
            id: e.id.clone(),
            m: v.m(),
            n: v.n(),
            steps: v.steps(),
            t0: v.t0(),
            dt: v.dt(),
            value_range: v.value_range(),
            extent: [g.lon0, g.lat0, g.lon1, g.lat1],
            default_z_scale: v.default_z_scale(),
            source: e.source.clone(),
        })
    }

    pub fn create_session(&self, volume_id: &str) -> ServiceResult<SessionView> {
        let entry = self.volume(volume_id)?;
        let session = Arc::new(Session::new(new_id(), entry.id.clone(), entry.volume.clone()));
        let view = session.view();
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session.id.clone(), session);
        Ok(view)
    }

    pub fn session(&self, id: &str) -> ServiceResult<Arc<Session>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_owned()))
    }

    pub fn update_state(&self, id: &str, patch: &StatePatch) -> ServiceResult<SessionView> {
        self.session(id)?.update(patch)
    }

    pub fn frame(&self, id: &str, width: u32, height: u32) -> ServiceResult<FrameOutput> {
        if width > MAX_FRAME_SIDE || height > MAX_FRAME_SIDE {
            return Err(ServiceError::BadRequest(format!(
                "frame {width}x{height} exceeds the {MAX_FRAME_SIDE} pixel limit"
            )));
        }
        let session = self.session(id)?;
        let state = session.snapshot_for_frame(width, height);
        let camera = state.camera_for(width, height);
        let (image, mut meta) = render_frame(&session.volume, &camera, &state.settings, &state.selection, &self.context)?;
        meta.revision = state.revision;
        Ok(FrameOutput { revision: state.revision, meta, png: encode_png(&image)? })
    }

    /// Picks the cluster under a pixel of the last requested frame size. A hit narrows the
    /// selection to the cluster's time extent and a padded spotlight around it.
    pub fn pick(&self, id: &str, px: f64, py: f64) -> ServiceResult<PickOutcome> {
        let session = self.session(id)?;
        let volume = session.volume.clone();
        let (view, hit) = session.transact(|state, (w, h)| {
            if !(px >= 0.0 && py >= 0.0 && px < w as f64 && py < h as f64) {
                return Err(ServiceError::BadRequest(format!("pixel ({px}, {py}) outside the {w}x{h} viewport")));
            }
            let index = self.clusters.get(&session.volume_id, &volume, state.cluster_params)?;
            let camera = state.camera_for(w, h);
            let Some(hit) = pick(&volume, &index, &camera, &state.settings, &state.selection, px, py)? else {
                return Ok((None, None));
            };
            let mut next = state.clone();
            next.selection.time_range = (hit.t_min, hit.t_max);
            next.selection.spotlight = Some(hit.padded_spotlight());
            next.selection.selected_cluster = Some(hit.id);
            next.selection.validate(volume.steps())?;
            next.revision += 1;
            Ok((Some(next), Some(hit.clone())))
        })?;
        Ok(PickOutcome { hit, session: view })
    }

    /// Map-plane intersection under a pixel of the last requested frame size, in
    /// continuous cell coordinates.
    pub fn map_point(&self, id: &str, px: f64, py: f64) -> ServiceResult<Option<[f64; 2]>> {
        let session = self.session(id)?;
        let state = session.snapshot();
        let (w, h) = session.viewport();
        let camera = state.camera_for(w, h);
        Ok(map_plane_point(&session.volume, &camera, &state.settings, &state.selection, px, py).map(|(x, y)| [x, y]))
    }

    pub fn clusters(&self, volume_id: &str, params: ClusterParams) -> ServiceResult<Vec<VoxelClusterSummary>> {
        let entry = self.volume(volume_id)?;
        Ok(self.clusters.get(volume_id, &entry.volume, params)?.summaries.clone())
    }
}
