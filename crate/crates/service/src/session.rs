//! Per-session state and the patch protocol.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Deserializer, Serialize};
use volstc_core::cluster::ClusterParams;
use volstc_core::render::{Lighting, RenderSettings};
use volstc_core::{volume_to_render_space, Camera, SelectionState, SpaceTimeVolume, Spotlight};

use crate::error::{ServiceError, ServiceResult};

pub const DEFAULT_VIEWPORT: (u32, u32) = (512, 512);
pub const DEFAULT_AZIMUTH: f64 = -60.0;
pub const DEFAULT_ELEVATION: f64 = 25.0;

/// Everything a frame depends on besides the volume and the viewport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub camera: Camera,
    pub settings: RenderSettings,
    pub selection: SelectionState,
    pub cluster_params: ClusterParams,
    pub revision: u64,
}

impl SessionState {
    pub fn initial(volume: &SpaceTimeVolume) -> Self {
        let settings = RenderSettings::for_volume(volume);
        let bounds = volume_to_render_space(volume, settings.z_scale).expect("default z scale is positive");
        let (w, h) = DEFAULT_VIEWPORT;
        Self {
            camera: Camera::framing(&bounds, DEFAULT_AZIMUTH, DEFAULT_ELEVATION, w, h),
            cluster_params: ClusterParams::for_lambda_v(settings.lambda_v),
            settings,
            selection: SelectionState::full(volume.steps()),
            revision: 0,
        }
    }

    /// Camera sized to a viewport.
    pub fn camera_for(&self, width: u32, height: u32) -> Camera {
        Camera { width, height, ..self.camera }
    }

    /// Returns the patched state with the revision advanced, or an error and no change.
    pub fn apply(&self, patch: &StatePatch, steps: usize) -> ServiceResult<SessionState> {
        let mut next = self.clone();
        if let Some(c) = &patch.camera {
            let cam = &mut next.camera;
            if let Some(v) = c.eye {
                cam.eye = v.into();
            }
            if let Some(v) = c.target {
                cam.target = v.into();
            }
            if let Some(v) = c.up {
                cam.up = v.into();
            }
            if let Some(v) = c.vfov {
                cam.vfov = v;
            }
        }
        let s = &mut next.settings;
        if let Some(v) = patch.lambda_v {
            // thresholds that were tracking lambda_v keep tracking it
            if patch.lambda_i.is_none() && s.lambda_i == s.lambda_v {
                s.lambda_i = v;
            }
            let linked_a = ClusterParams::for_lambda_v(s.lambda_v).lambda_a;
            if patch.lambda_a.is_none() && next.cluster_params.lambda_a == linked_a {
                next.cluster_params.lambda_a = ClusterParams::for_lambda_v(v).lambda_a;
            }
            s.lambda_v = v;
        }
        set(&mut s.lambda_i, patch.lambda_i);
        set(&mut s.surface_enabled, patch.surface_enabled);
        set(&mut s.step, patch.step);
        set(&mut s.z_scale, patch.z_scale);
        set(&mut s.early_termination_alpha, patch.early_termination_alpha);
        set(&mut s.gradient_min, patch.gradient_min);
        set(&mut s.background, patch.background);
        set(&mut s.lighting, patch.lighting);
        set(&mut s.tf.opacity_max, patch.opacity_max);
        set(&mut s.tf.opacity_gamma, patch.opacity_gamma);

        let last = steps.saturating_sub(1) as i64;
        let (lo, hi) = next.selection.time_range;
        let lo = patch.t_lo.map_or(lo, |v| v.clamp(0, last) as usize);
        let hi = patch.t_hi.map_or(hi, |v| v.clamp(0, last) as usize);
        next.selection.time_range = (lo.min(hi), lo.max(hi));
        if let Some(s) = patch.spotlight {
            next.selection.spotlight = s;
        }
        if let Some(c) = patch.selected_cluster {
            next.selection.selected_cluster = c;
        }
        set(&mut next.cluster_params.lambda_a, patch.lambda_a);
        set(&mut next.cluster_params.eps, patch.eps);
        set(&mut next.cluster_params.min_pts, patch.min_pts);

        next.camera.validate()?;
        next.settings.validate()?;
        next.selection.validate(steps)?;
        next.cluster_params.validate()?;
        next.revision += 1;
        Ok(next)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Distinguishes an absent field (`None`) from an explicit `null` (`Some(None)`).
fn nullable<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPatch {
    pub eye: Option<[f64; 3]>,
    pub target: Option<[f64; 3]>,
    pub up: Option<[f64; 3]>,
    pub vfov: Option<f64>,
}

/// Partial update. Absent fields are left alone; `spotlight` and `selected_cluster`
/// accept `null` to clear.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePatch {
    pub camera: Option<CameraPatch>,
    pub lambda_v: Option<f64>,
    pub lambda_i: Option<f64>,
    pub surface_enabled: Option<bool>,
    pub step: Option<f64>,
    pub z_scale: Option<f64>,
    pub early_termination_alpha: Option<f64>,
    pub gradient_min: Option<f64>,
    pub background: Option<[f64; 3]>,
    pub lighting: Option<Lighting>,
    pub opacity_max: Option<f64>,
    pub opacity_gamma: Option<f64>,
    pub t_lo: Option<i64>,
    pub t_hi: Option<i64>,
    #[serde(default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
    pub spotlight: Option<Option<Spotlight>>,
    #[serde(default, deserialize_with = "nullable", skip_serializing_if = "Option::is_none")]
    pub selected_cluster: Option<Option<usize>>,
    pub lambda_a: Option<f64>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
}

pub struct Session {
    pub id: String,
    pub volume_id: String,
    pub volume: Arc<SpaceTimeVolume>,
    inner: Mutex<Inner>,
}

struct Inner {
    state: SessionState,
    viewport: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub volume_id: String,
    pub revision: u64,
    pub state: SessionState,
}

impl Session {
    pub fn new(id: String, volume_id: String, volume: Arc<SpaceTimeVolume>) -> Self {
        let state = SessionState::initial(&volume);
        Self {
            id,
            volume_id,
            volume,
            inner: Mutex::new(Inner { state, viewport: DEFAULT_VIEWPORT }),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        // a panic while holding the lock cannot leave a half-applied state: updates swap in
        // a fully validated copy
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn view(&self) -> SessionView {
        let state = self.lock().state.clone();
        self.view_of(state)
    }

    fn view_of(&self, state: SessionState) -> SessionView {
        SessionView {
            id: self.id.clone(),
            volume_id: self.volume_id.clone(),
            revision: state.revision,
            state,
        }
    }

    pub fn snapshot(&self) -> SessionState {
        self.lock().state.clone()
    }

    /// Snapshot for a frame of the given size; remembers the size for later picks.
    pub fn snapshot_for_frame(&self, width: u32, height: u32) -> SessionState {
        let mut g = self.lock();
        g.viewport = (width, height);
        g.state.clone()
    }

    pub fn viewport(&self) -> (u32, u32) {
        self.lock().viewport
    }

    pub fn update(&self, patch: &StatePatch) -> ServiceResult<SessionView> {
        let mut g = self.lock();
        let next = g.state.apply(patch, self.volume.steps())?;
        g.state = next.clone();
        Ok(self.view_of(next))
    }

    /// Runs `f` with exclusive access. `f` returns the replacement state, if any.
    pub fn transact<R>(
        &self,
        f: impl FnOnce(&SessionState, (u32, u32)) -> ServiceResult<(Option<SessionState>, R)>,
    ) -> ServiceResult<(SessionView, R)> {
        let mut g = self.lock();
        let (next, out) = f(&g.state, g.viewport)?;
        if let Some(next) = next {
            if next.revision != g.state.revision + 1 {
                return Err(ServiceError::Internal("state replaced without a revision step".into()));
            }
            g.state = next;
        }
        let state = g.state.clone();
        drop(g);
        Ok((self.view_of(state), out))
    }
}
