//! High-value voxel clusters: detection, summaries and screen-space picking.

mod circle;
mod dbscan;

pub use circle::{bounding_circle, minimal_enclosing_circle, Circle};
pub use dbscan::{dbscan, VoxelCoord};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Camera, SelectionState, SpaceTimeVolume, Spotlight};
use crate::render::{RenderSettings, Sampler};

pub const DEFAULT_EPS: f64 = 10.0;
pub const DEFAULT_MIN_PTS: usize = 100;
/// Default gap between the display threshold and the cluster threshold.
pub const LAMBDA_A_OFFSET: f64 = 25.0;
/// Padding, in cells, added to a cluster circle when it becomes the spotlight.
pub const SPOTLIGHT_PADDING: f64 = 2.0;
/// Above this many distinct projected points the summary circle falls back to the
/// bounding-box circle.
pub const DEFAULT_CIRCLE_CAP: usize = 4_000_000;
const CIRCLE_SEED: u64 = 0x5eed_c1c1e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelCluster {
    pub id: usize,
    /// `(x, y, t)` voxel indices in ascending linear-index order.
    pub members: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelClusterSummary {
    pub id: usize,
    pub member_count: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// Minimal circle around the members' `(x, y)` indices.
    pub circle: Circle,
    pub value_max: f64,
    pub centroid: [f64; 3],
}

impl VoxelClusterSummary {
    /// Spotlight covering the cluster in continuous cell coordinates, padded.
    pub fn padded_spotlight(&self) -> Spotlight {
        Spotlight {
            cx: self.circle.cx + 0.5,
            cy: self.circle.cy + 0.5,
            r: self.circle.r + SPOTLIGHT_PADDING,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub lambda_a: f64,
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterParams {
    pub fn new(lambda_a: f64, eps: f64, min_pts: usize) -> Result<Self> {
        let p = Self { lambda_a, eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(invalid("min_pts must be at least 1"));
        }
        if self.lambda_a.is_nan() {
            return Err(invalid("lambda_a must be a number"));
        }
        Ok(())
    }

    /// Defaults derived from a display threshold.
    pub fn for_lambda_v(lambda_v: f64) -> Self {
        Self {
            lambda_a: lambda_v + LAMBDA_A_OFFSET,
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

/// Thresholds the volume at `lambda_a` (strictly greater) and clusters the survivors.
pub fn detect_clusters(
    volume: &SpaceTimeVolume,
    lambda_a: f64,
    eps: f64,
    min_pts: usize,
) -> Result<Vec<VoxelCluster>> {
    ClusterParams::new(lambda_a, eps, min_pts)?;
    let (m, n) = (volume.m(), volume.n());
    let indices: Vec<usize> = volume
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v as f64 > lambda_a)
        .map(|(i, _)| i)
        .collect();
    let coords: Vec<VoxelCoord> = indices
        .iter()
        .map(|&i| [(i % m) as i32, ((i / m) % n) as i32, (i / (m * n)) as i32])
        .collect();
    let (labels, k) = dbscan(&coords, eps, min_pts);
    let mut clusters: Vec<VoxelCluster> = (0..k).map(|id| VoxelCluster { id, members: Vec::new() }).collect();
    for (&idx, label) in indices.iter().zip(&labels) {
        if let Some(id) = *label {
            clusters[id].members.push(volume.decode(idx));
        }
    }
    Ok(clusters)
}

/// Summary of a non-empty cluster. Values are read from `volume`.
pub fn summarize_cluster(cluster: &VoxelCluster, volume: &SpaceTimeVolume) -> Result<VoxelClusterSummary> {
    summarize_with_cap(cluster, volume, DEFAULT_CIRCLE_CAP)
}

pub fn summarize_with_cap(
    cluster: &VoxelCluster,
    volume: &SpaceTimeVolume,
    circle_cap: usize,
) -> Result<VoxelClusterSummary> {
    if cluster.members.is_empty() {
        return Err(invalid(format!("cluster {} has no members", cluster.id)));
    }
    let mut t_min = usize::MAX;
    let mut t_max = 0;
    let mut value_max = f64::NEG_INFINITY;
    let mut sum = [0.0f64; 3];
    let mut columns = Vec::with_capacity(cluster.members.len());
    for &(x, y, t) in &cluster.members {
        t_min = t_min.min(t);
        t_max = t_max.max(t);
        value_max = value_max.max(volume.get(x, y, t) as f64);
        sum[0] += x as f64;
        sum[1] += y as f64;
        sum[2] += t as f64;
        columns.push((x, y));
    }
    let count = cluster.members.len();
    columns.sort_unstable();
    columns.dedup();
    let projected: Vec<(f64, f64)> = columns.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let circle = if projected.len() > circle_cap {
        bounding_circle(&projected)
    } else {
        minimal_enclosing_circle(&projected, CIRCLE_SEED)
    }
    .expect("non-empty projection");
    Ok(VoxelClusterSummary {
        id: cluster.id,
        member_count: count,
        t_min,
        t_max,
        circle,
        value_max,
        centroid: sum.map(|s| s / count as f64),
    })
}

/// Detected clusters for one parameter set with a voxel lookup for picking.
#[derive(Debug, Clone)]
pub struct ClusterIndex {
    pub params: ClusterParams,
    pub clusters: Vec<VoxelCluster>,
    pub summaries: Vec<VoxelClusterSummary>,
    labels: HashMap<usize, usize>,
}

impl ClusterIndex {
    pub fn build(volume: &SpaceTimeVolume, params: ClusterParams) -> Result<Self> {
        let clusters = detect_clusters(volume, params.lambda_a, params.eps, params.min_pts)?;
        let summaries = clusters
            .iter()
            .map(|c| summarize_cluster(c, volume))
            .collect::<Result<Vec<_>>>()?;
        let mut labels = HashMap::new();
        for c in &clusters {
            for &(x, y, t) in &c.members {
                labels.insert(volume.index(x, y, t), c.id);
            }
        }
        Ok(Self { params, clusters, summaries, labels })
    }

    pub fn cluster_of(&self, volume: &SpaceTimeVolume, x: usize, y: usize, t: usize) -> Option<usize> {
        self.labels.get(&volume.index(x, y, t)).copied()
    }

    pub fn summary(&self, id: usize) -> Option<&VoxelClusterSummary> {
        self.summaries.get(id)
    }
}

/// Resolves pixel `(px, py)` to the first cluster along its ray.
///
/// Samples are spaced by `settings.step` over the ray's intersection with the box. Voxels
/// clipped away by `selection` are ignored, as are voxels at or below the index's `lambda_a`.
pub fn pick<'c>(
    volume: &SpaceTimeVolume,
    clusters: &'c ClusterIndex,
    camera: &Camera,
    settings: &RenderSettings,
    selection: &SelectionState,
    px: f64,
    py: f64,
) -> Result<Option<&'c VoxelClusterSummary>> {
    camera.validate()?;
    settings.validate()?;
    selection.validate(volume.steps())?;
    if !(px >= 0.0 && py >= 0.0 && px < camera.width as f64 && py < camera.height as f64) {
        return Err(invalid(format!(
            "pixel ({px}, {py}) outside a {}x{} viewport",
            camera.width, camera.height
        )));
    }
    let sampler = Sampler::with_selection(volume, settings.z_scale, selection, 0.0);
    let ray = camera.ray(px, py);
    let Some((t0, t1)) = sampler.bounds().intersect(&ray) else {
        return Ok(None);
    };
    let lambda_a = clusters.params.lambda_a;
    let mut last = None;
    let mut k = 0u64;
    loop {
        let s = t0 + (k as f64 + 0.5) * settings.step;
        if s > t1 {
            break;
        }
        k += 1;
        let Some((x, y, t)) = sampler.nearest_voxel(ray.at(s)) else {
            continue;
        };
        if last == Some((x, y, t)) {
            continue;
        }
        last = Some((x, y, t));
        if !sampler.voxel_visible(x, y, t) || volume.get(x, y, t) as f64 <= lambda_a {
            continue;
        }
        if let Some(id) = clusters.cluster_of(volume, x, y, t) {
            return Ok(clusters.summary(id));
        }
    }
    Ok(None)
}
