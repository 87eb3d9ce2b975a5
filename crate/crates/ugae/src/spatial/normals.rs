//! PCA surface-normal estimation for point-to-plane distance metrics.
//!
//! Each point's normal is the eigenvector of the smallest eigenvalue of
//! its k-neighborhood covariance matrix. Signs are canonicalized (largest
//! magnitude component made positive) so repeated runs agree bit for bit;
//! downstream consumers square the projection, so the sign carries no
//! meaning.

use crate::cloud::PointCloud;

use super::{SpatialError, SpatialIndex};

/// Per-point unit normals plus a flag for neighborhoods whose covariance
/// vanished (all k neighbors coincident), where the normal falls back
/// to (0,0,1).
#[derive(Debug, Clone)]
pub struct NormalField {
    pub normals: Vec<[f64; 3]>,
    pub degenerate: Vec<bool>,
}

/// Estimate a unit normal for every point of `cloud` from its `k`
/// nearest neighbors (the point itself included).
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalField, SpatialError> {
    if k < 3 || cloud.len() < k {
        return Err(SpatialError::BadNeighborhood {
            k,
            points: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let mut normals = Vec::with_capacity(cloud.len());
    let mut degenerate = Vec::with_capacity(cloud.len());
    for &coord in cloud.coords() {
        let hood = index.knn(coord, k);
        let cov = neighborhood_covariance(cloud.coords(), &hood.indices);
        let (normal, ok) = sym3_smallest_eigenvector(cov);
        normals.push(normal);
        degenerate.push(!ok);
    }
    Ok(NormalField {
        normals,
        degenerate,
    })
}

fn neighborhood_covariance(coords: &[[u32; 3]], members: &[usize]) -> [[f64; 3]; 3] {
    let n = members.len() as f64;
    let mut sum = [0u64; 3];
    for &i in members {
        for axis in 0..3 {
            sum[axis] += coords[i][axis] as u64;
        }
    }
    let mean = [
        sum[0] as f64 / n,
        sum[1] as f64 / n,
        sum[2] as f64 / n,
    ];
    let mut cov = [[0f64; 3]; 3];
    for &i in members {
        let d = [
            coords[i][0] as f64 - mean[0],
            coords[i][1] as f64 - mean[1],
            coords[i][2] as f64 - mean[2],
        ];
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    for row in &mut cov {
        for v in row {
            *v /= n;
        }
    }
    cov
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric 3x3 matrix,
/// via cyclic Jacobi rotations. Returns `(vector, true)` normally and
/// `((0,0,1), false)` when the matrix is (numerically) zero, which has no
/// preferred direction.
pub fn sym3_smallest_eigenvector(m: [[f64; 3]; 3]) -> ([f64; 3], bool) {
    let scale = m
        .iter()
        .flatten()
        .fold(0f64, |acc, &v| acc.max(v.abs()));
    if scale < 1e-12 {
        return ([0.0, 0.0, 1.0], false);
    }
    let mut a = m;
    let mut v = [[0f64; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off < scale * 1e-15 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < scale * 1e-18 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // Rotate rows/columns p and q of a (keeping symmetry) and
            // accumulate the rotation into v.
            for i in 0..3 {
                let aip = a[i][p];
                let aiq = a[i][q];
                a[i][p] = c * aip - s * aiq;
                a[i][q] = s * aip + c * aiq;
            }
            for i in 0..3 {
                let api = a[p][i];
                let aqi = a[q][i];
                a[p][i] = c * api - s * aqi;
                a[q][i] = s * api + c * aqi;
            }
            for row in &mut v {
                let vip = row[p];
                let viq = row[q];
                row[p] = c * vip - s * viq;
                row[q] = s * vip + c * viq;
            }
        }
    }
    let eigvals = [a[0][0], a[1][1], a[2][2]];
    let mut smallest = 0;
    for i in 1..3 {
        if eigvals[i] < eigvals[smallest] {
            smallest = i;
        }
    }
    let mut n = [v[0][smallest], v[1][smallest], v[2][smallest]];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len < 1e-12 {
        return ([0.0, 0.0, 1.0], false);
    }
    for c in &mut n {
        *c /= len;
    }
    // Canonical sign: the component with the largest magnitude is positive.
    let lead = (0..3)
        .max_by(|&i, &j| {
            n[i].abs()
                .partial_cmp(&n[j].abs())
                .unwrap()
                .then(j.cmp(&i))
        })
        .unwrap();
    if n[lead] < 0.0 {
        for c in &mut n {
            *c = -*c;
        }
    }
    (n, true)
}
