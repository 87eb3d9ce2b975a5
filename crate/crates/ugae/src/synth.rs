//! Synthetic colored point clouds for tests and experiments: seeded
//! surface samplers (sphere, cube shell, plane) with deterministic
//! textures (checkerboard, axis gradient, noise).
//!
//! Coordinates are drawn directly on the integer grid and deduplicated,
//! and every texture except noise is a pure function of the voxel
//! coordinate, so one spec always produces one cloud.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{grid_max, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Cube,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    Checker,
    Gradient,
    Noise,
}

/// Everything needed to regenerate a cloud bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeSpec {
    pub shape: ShapeKind,
    /// Target number of distinct voxels; the output may hold fewer when
    /// the surface has fewer cells than requested.
    pub count: usize,
    pub depth: u8,
    pub texture: TextureKind,
    /// Checker cell edge length in voxels (ignored by other textures).
    pub period: u32,
    pub seed: u64,
}

const CHECKER_BRIGHT: [u8; 3] = [213, 213, 213];
const CHECKER_DARK: [u8; 3] = [42, 42, 42];

/// Generate the cloud described by `spec`.
pub fn generate(spec: &ShapeSpec) -> PointCloud {
    assert!(spec.count >= 1, "point count must be >= 1");
    assert!(spec.period >= 1, "texture period must be >= 1");
    let max = grid_max(spec.depth);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut seen = std::collections::HashSet::new();
    let mut coords: Vec<[u32; 3]> = Vec::with_capacity(spec.count);
    let push = |c: [u32; 3], seen: &mut std::collections::HashSet<[u32; 3]>,
                    coords: &mut Vec<[u32; 3]>| {
        if seen.insert(c) {
            coords.push(c);
        }
    };

    match spec.shape {
        ShapeKind::Plane => {
            // Horizontal slice at mid height. Fill it completely when the
            // request covers every cell; sample otherwise.
            let z = max / 2;
            let cells = (max as u64 + 1) * (max as u64 + 1);
            if spec.count as u64 >= cells {
                for x in 0..=max {
                    for y in 0..=max {
                        coords.push([x, y, z]);
                    }
                }
            } else {
                let mut attempts = 0u64;
                let cap = 200 * spec.count as u64;
                while coords.len() < spec.count && attempts < cap {
                    attempts += 1;
                    let c = [rng.gen_range(0..=max), rng.gen_range(0..=max), z];
                    push(c, &mut seen, &mut coords);
                }
            }
        }
        ShapeKind::Sphere => {
            let center = (max as f64 + 1.0) / 2.0;
            let radius = 0.45 * (max as f64 + 1.0);
            let mut attempts = 0u64;
            let cap = 200 * spec.count as u64;
            while coords.len() < spec.count && attempts < cap {
                attempts += 1;
                // Uniform direction on the unit sphere.
                let u: f64 = rng.gen_range(-1.0..=1.0);
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - u * u).sqrt();
                let dir = [r * theta.cos(), r * theta.sin(), u];
                let mut c = [0u32; 3];
                for axis in 0..3 {
                    let v = (center + radius * dir[axis]).round();
                    c[axis] = v.clamp(0.0, max as f64) as u32;
                }
                push(c, &mut seen, &mut coords);
            }
        }
        ShapeKind::Cube => {
            let center = (max as f64 + 1.0) / 2.0;
            let half = 0.42 * (max as f64 + 1.0);
            let mut attempts = 0u64;
            let cap = 200 * spec.count as u64;
            while coords.len() < spec.count && attempts < cap {
                attempts += 1;
                let face = rng.gen_range(0..6u8);
                let a: f64 = rng.gen_range(-half..=half);
                let b: f64 = rng.gen_range(-half..=half);
                let offs = match face {
                    0 => [half, a, b],
                    1 => [-half, a, b],
                    2 => [a, half, b],
                    3 => [a, -half, b],
                    4 => [a, b, half],
                    _ => [a, b, -half],
                };
                let mut c = [0u32; 3];
                for axis in 0..3 {
                    let v = (center + offs[axis]).round();
                    c[axis] = v.clamp(0.0, max as f64) as u32;
                }
                push(c, &mut seen, &mut coords);
            }
        }
    }

    // Canonical order before texturing so the noise stream is tied to the
    // final layout, not to sampling history.
    let bare = crate::cloud::merge_voxels(&coords, None, spec.depth);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let attrs: Vec<[u8; 3]> = bare
        .coords()
        .iter()
        .map(|&c| match spec.texture {
            TextureKind::Checker => checker_color(c, spec.period),
            TextureKind::Gradient => gradient_color(c, max),
            TextureKind::Noise => noise_rng.gen(),
        })
        .collect();
    PointCloud::new(bare.coords().to_vec(), Some(attrs), spec.depth)
        .expect("generated coordinates are in-grid by construction")
}

fn checker_color(c: [u32; 3], period: u32) -> [u8; 3] {
    let cell = c[0] / period + c[1] / period + c[2] / period;
    if cell % 2 == 0 {
        CHECKER_BRIGHT
    } else {
        CHECKER_DARK
    }
}

fn gradient_color(c: [u32; 3], max: u32) -> [u8; 3] {
    let scale = |v: u32| ((v as f64 / max as f64) * 255.0 + 0.5).floor() as u8;
    [scale(c[0]), scale(c[1]), scale(c[2])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::classify_frequency;
    use crate::ply::ply_bytes;

    fn spec(shape: ShapeKind, texture: TextureKind) -> ShapeSpec {
        ShapeSpec {
            shape,
            count: 3000,
            depth: 6,
            texture,
            period: 4,
            seed: 7,
        }
    }

    #[test]
    fn same_spec_gives_identical_ply_bytes() {
        for shape in [ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Plane] {
            for texture in [TextureKind::Checker, TextureKind::Gradient, TextureKind::Noise] {
                let s = spec(shape, texture);
                let a = generate(&s);
                let b = generate(&s);
                assert_eq!(
                    ply_bytes(&a, true),
                    ply_bytes(&b, true),
                    "{shape:?}/{texture:?}"
                );
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&spec(ShapeKind::Sphere, TextureKind::Noise));
        let mut s = spec(ShapeKind::Sphere, TextureKind::Noise);
        s.seed = 8;
        let b = generate(&s);
        assert_ne!(a.coords(), b.coords());
    }

    #[test]
    fn clouds_are_duplicate_free_and_near_requested_size() {
        for shape in [ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Plane] {
            let cloud = generate(&spec(shape, TextureKind::Gradient));
            let mut set = std::collections::HashSet::new();
            for &c in cloud.coords() {
                assert!(set.insert(c), "duplicate voxel {c:?} from {shape:?}");
            }
            assert_eq!(cloud.len(), 3000, "{shape:?}");
            assert_eq!(cloud.depth(), 6);
        }
    }

    #[test]
    fn dense_plane_request_fills_every_cell() {
        let s = ShapeSpec {
            shape: ShapeKind::Plane,
            count: 5000, // 64 * 64 = 4096 cells at depth 6
            depth: 6,
            texture: TextureKind::Checker,
            period: 4,
            seed: 1,
        };
        let cloud = generate(&s);
        assert_eq!(cloud.len(), 4096);
    }

    #[test]
    fn gradient_plane_has_near_uniform_frequency_scores() {
        // A constant gradient has the same local color contrast
        // everywhere, so the high-frequency half should not be visibly
        // clustered: compare mean coordinates of the two halves.
        let s = ShapeSpec {
            shape: ShapeKind::Plane,
            count: 4096,
            depth: 6,
            texture: TextureKind::Gradient,
            period: 4,
            seed: 3,
        };
        let cloud = generate(&s);
        let labels = classify_frequency(&cloud, 8, 0.5).unwrap();
        let mean_of = |flag: bool| -> [f64; 2] {
            let mut sum = [0.0f64; 2];
            let mut n = 0.0;
            for (c, &l) in cloud.coords().iter().zip(&labels.labels) {
                if l == flag {
                    sum[0] += c[0] as f64;
                    sum[1] += c[1] as f64;
                    n += 1.0;
                }
            }
            [sum[0] / n, sum[1] / n]
        };
        let hi = mean_of(true);
        let lo = mean_of(false);
        // Interior scores are uniform; only grid-edge points (fewer
        // neighbors on one side) break ties, so the centroids of the two
        // halves stay within a few voxels of each other on a 64-wide grid.
        for axis in 0..2 {
            assert!(
                (hi[axis] - lo[axis]).abs() < 6.0,
                "axis {axis}: high centroid {hi:?} vs low {lo:?}"
            );
        }
    }

    #[test]
    fn checker_boundaries_are_labeled_high_frequency() {
        let s = ShapeSpec {
            shape: ShapeKind::Plane,
            count: 4096,
            depth: 6,
            texture: TextureKind::Checker,
            period: 4,
            seed: 4,
        };
        let cloud = generate(&s);
        // Boundary-adjacent = a 4-neighbor in the plane lies in a cell of
        // the other parity. On a full period-4 plane that is the outer
        // ring of every 4x4 cell: 12 of 16 points.
        let is_boundary: Vec<bool> = cloud
            .coords()
            .iter()
            .map(|&[x, y, z]| {
                let here = checker_color([x, y, z], 4);
                [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    (0..=63).contains(&nx)
                        && (0..=63).contains(&ny)
                        && checker_color([nx as u32, ny as u32, z], 4) != here
                })
            })
            .collect();
        let boundary = is_boundary.iter().filter(|&&b| b).count();
        assert!(boundary > cloud.len() / 2);

        // Top half: every labeled point sits on a boundary (the high set
        // cannot cover all boundary points, since boundaries hold ~72% of
        // the cloud, but it must consist of nothing else).
        let half = classify_frequency(&cloud, 8, 0.5).unwrap();
        let misplaced = half
            .labels
            .iter()
            .zip(&is_boundary)
            .filter(|&(&high, &b)| high && !b)
            .count();
        assert_eq!(misplaced, 0, "{misplaced} high labels off the boundaries");

        // Widening the set to the boundary mass captures the boundaries
        // almost completely.
        let wide = classify_frequency(&cloud, 8, 0.75).unwrap();
        let hit = wide
            .labels
            .iter()
            .zip(&is_boundary)
            .filter(|&(&high, &b)| high && b)
            .count();
        assert!(
            hit as f64 >= 0.8 * boundary as f64,
            "{hit}/{boundary} boundary points labeled high"
        );
    }
}
