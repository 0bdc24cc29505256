//! DBSCAN over integer voxel coordinates with a uniform spatial hash.

use std::collections::HashMap;

/// Point coordinates in voxel index units `(x, y, t)`.
pub type VoxelCoord = [i32; 3];

struct SpatialHash {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl SpatialHash {
    fn new(points: &[VoxelCoord], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, buckets }
    }

    #[inline]
    fn key(p: &VoxelCoord, cell: f64) -> [i64; 3] {
        p.map(|c| (c as f64 / cell).floor() as i64)
    }

    /// Calls `f` for every point within `eps` of `p` (including `p` itself). Stops early
    /// when `f` returns `false`.
    fn for_each_neighbor(&self, points: &[VoxelCoord], p: &VoxelCoord, eps2: f64, mut f: impl FnMut(u32) -> bool) {
        let k = Self::key(p, self.cell);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(bucket) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        let q = &points[j as usize];
                        let d2 = ((q[0] - p[0]) as f64).powi(2)
                            + ((q[1] - p[1]) as f64).powi(2)
                            + ((q[2] - p[2]) as f64).powi(2);
                        if d2 <= eps2 && !f(j) {
                            return;
                        }
                    }
                }
            }
        }
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

/// Ordering key of a cluster: earliest step, then larger first, then smallest `(x, y)`,
/// then smallest point index.
fn canonical_key(points: &[VoxelCoord], members: &[u32]) -> (i32, std::cmp::Reverse<usize>, (i32, i32), u32) {
    let t_min = members.iter().map(|&i| points[i as usize][2]).min().unwrap();
    let xy_min = members
        .iter()
        .map(|&i| (points[i as usize][0], points[i as usize][1]))
        .min()
        .unwrap();
    let first = *members.iter().min().unwrap();
    (t_min, std::cmp::Reverse(members.len()), xy_min, first)
}

fn order_groups(points: &[VoxelCoord], groups: &mut [Vec<u32>]) {
    groups.sort_by_cached_key(|g| canonical_key(points, g));
}

/// Clusters `points`; returns per-point labels (`None` for noise) and the cluster count.
///
/// A point is core when at least `min_pts` points (itself included) lie within `eps`.
/// Clusters are the connected components of core points; a border point joins the
/// lowest-ranked cluster among its core neighbors, ranked by the canonical key of the core
/// sets. Final ids follow the canonical key of the complete clusters.
pub fn dbscan(points: &[VoxelCoord], eps: f64, min_pts: usize) -> (Vec<Option<usize>>, usize) {
    let n = points.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    let eps2 = eps * eps;
    let hash = SpatialHash::new(points, eps);

    let core: Vec<bool> = points
        .iter()
        .map(|p| {
            let mut count = 0usize;
            hash.for_each_neighbor(points, p, eps2, |_| {
                count += 1;
                count < min_pts
            });
            count >= min_pts
        })
        .collect();

    let mut parent: Vec<u32> = (0..n as u32).collect();
    for (i, p) in points.iter().enumerate() {
        if !core[i] {
            continue;
        }
        hash.for_each_neighbor(points, p, eps2, |j| {
            if core[j as usize] && j as usize > i {
                let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
            true
        });
    }

    let mut root_group: HashMap<u32, usize> = HashMap::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i as u32);
            let g = *root_group.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i as u32);
        }
    }
    order_groups(points, &mut groups);
    let mut rank = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            rank[i as usize] = g;
        }
    }

    for (i, p) in points.iter().enumerate() {
        if core[i] {
            continue;
        }
        let mut best = usize::MAX;
        hash.for_each_neighbor(points, p, eps2, |j| {
            if core[j as usize] {
                best = best.min(rank[j as usize]);
            }
            true
        });
        if best != usize::MAX {
            groups[best].push(i as u32);
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    order_groups(points, &mut groups);

    let mut labels = vec![None; n];
    for (id, members) in groups.iter().enumerate() {
        for &i in members {
            labels[i as usize] = Some(id);
        }
    }
    (labels, groups.len())
}
