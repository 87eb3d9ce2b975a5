//! Exact kd-tree K-nearest-neighbor search over integer voxel coordinates.
//!
//! Squared distances are computed in integer arithmetic, so equidistance is
//! detected exactly, and candidates are ranked by the total order
//! (squared distance, Morton key, point index). Subtrees are pruned only
//! when their bounding box is strictly farther than the current k-th
//! candidate, which keeps every tie reachable; results are therefore unique
//! regardless of traversal order.

use crate::cloud::PointCloud;

use super::{morton_encode_unchecked, SpatialError};

const LEAF_SIZE: usize = 16;

/// Neighbors of one query, sorted ascending by
/// (squared distance, Morton key, index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub sq_dists: Vec<u64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Exact squared Euclidean distance between two voxels.
#[inline]
pub(crate) fn sq_dist(a: [u32; 3], b: [u32; 3]) -> u64 {
    let mut acc = 0u64;
    for axis in 0..3 {
        let d = a[axis] as i64 - b[axis] as i64;
        acc += (d * d) as u64;
    }
    acc
}

#[derive(Debug, Clone, Copy)]
struct Bbox {
    min: [u32; 3],
    max: [u32; 3],
}

impl Bbox {
    fn of(coords: &[[u32; 3]], order: &[u32]) -> Self {
        let mut min = [u32::MAX; 3];
        let mut max = [0u32; 3];
        for &i in order {
            for axis in 0..3 {
                let c = coords[i as usize][axis];
                min[axis] = min[axis].min(c);
                max[axis] = max[axis].max(c);
            }
        }
        Self { min, max }
    }

    /// Smallest possible squared distance from `q` to any point inside.
    fn min_sq_dist(&self, q: [u32; 3]) -> u64 {
        let mut acc = 0u64;
        for axis in 0..3 {
            let c = q[axis];
            let d = if c < self.min[axis] {
                (self.min[axis] - c) as u64
            } else if c > self.max[axis] {
                (c - self.max[axis]) as u64
            } else {
                0
            };
            acc += d * d;
        }
        acc
    }

    fn widest_axis(&self) -> usize {
        let ext = [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ];
        let widest = *ext.iter().max().unwrap();
        ext.iter().position(|&e| e == widest).unwrap()
    }
}

#[derive(Debug)]
enum NodeKind {
    Leaf { start: u32, end: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug)]
struct Node {
    bbox: Bbox,
    kind: NodeKind,
}

/// Read-only KNN index over a borrowed coordinate slice.
#[derive(Debug)]
pub struct SpatialIndex<'a> {
    coords: &'a [[u32; 3]],
    mortons: Vec<u64>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

/// One ranked candidate; `Ord` is the documented neighbor total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cand {
    sq: u64,
    morton: u64,
    index: u32,
}

impl<'a> SpatialIndex<'a> {
    pub fn build(cloud: &'a PointCloud) -> Result<Self, SpatialError> {
        Self::from_coords(cloud.coords())
    }

    pub fn from_coords(coords: &'a [[u32; 3]]) -> Result<Self, SpatialError> {
        if coords.is_empty() {
            return Err(SpatialError::EmptyCloud);
        }
        let mortons = coords.iter().map(|&c| morton_encode_unchecked(c)).collect();
        let mut order: Vec<u32> = (0..coords.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = build_node(coords, &mut order, 0, &mut nodes);
        Ok(Self {
            coords,
            mortons,
            order,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// The `k` nearest points to `query` under the neighbor total order.
    /// Returns fewer than `k` only when the indexed cloud is smaller.
    pub fn knn(&self, query: [u32; 3], k: usize) -> NeighborSet {
        self.knn_where(query, k, |_| true)
    }

    /// [`Self::knn`] restricted to points whose index satisfies `keep`.
    pub fn knn_where(
        &self,
        query: [u32; 3],
        k: usize,
        keep: impl Fn(usize) -> bool,
    ) -> NeighborSet {
        assert!(k >= 1, "knn requires k >= 1");
        let mut best: Vec<Cand> = Vec::with_capacity(k + 1);
        self.search(self.root, query, k, &keep, &mut best);
        NeighborSet {
            indices: best.iter().map(|c| c.index as usize).collect(),
            sq_dists: best.iter().map(|c| c.sq).collect(),
        }
    }

    /// KNN for many queries; results in query order.
    pub fn knn_batch(&self, queries: &[[u32; 3]], k: usize) -> Vec<NeighborSet> {
        queries.iter().map(|&q| self.knn(q, k)).collect()
    }

    fn search(
        &self,
        node: u32,
        query: [u32; 3],
        k: usize,
        keep: &impl Fn(usize) -> bool,
        best: &mut Vec<Cand>,
    ) {
        let node = &self.nodes[node as usize];
        match node.kind {
            NodeKind::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if !keep(i as usize) {
                        continue;
                    }
                    let cand = Cand {
                        sq: sq_dist(query, self.coords[i as usize]),
                        morton: self.mortons[i as usize],
                        index: i,
                    };
                    if best.len() == k && cand >= *best.last().unwrap() {
                        continue;
                    }
                    let pos = best.partition_point(|b| *b < cand);
                    best.insert(pos, cand);
                    if best.len() > k {
                        best.pop();
                    }
                }
            }
            NodeKind::Inner { left, right } => {
                let dl = self.nodes[left as usize].bbox.min_sq_dist(query);
                let dr = self.nodes[right as usize].bbox.min_sq_dist(query);
                let (first, first_d, second, second_d) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                // A child can be skipped only when it is strictly farther
                // than the current k-th candidate: at equal distance it may
                // still hold a tie that wins on (Morton, index).
                if best.len() < k || first_d <= best.last().unwrap().sq {
                    self.search(first, query, k, keep, best);
                }
                if best.len() < k || second_d <= best.last().unwrap().sq {
                    self.search(second, query, k, keep, best);
                }
            }
        }
    }
}

fn build_node(
    coords: &[[u32; 3]],
    order: &mut [u32],
    base: u32,
    nodes: &mut Vec<Node>,
) -> u32 {
    let bbox = Bbox::of(coords, order);
    if order.len() <= LEAF_SIZE {
        nodes.push(Node {
            bbox,
            kind: NodeKind::Leaf {
                start: base,
                end: base + order.len() as u32,
            },
        });
        return nodes.len() as u32 - 1;
    }
    let axis = bbox.widest_axis();
    let mid = order.len() / 2;
    // Key includes the index so every key is distinct: the two sides are
    // then unique sets, making the tree shape reproducible.
    order.select_nth_unstable_by_key(mid, |&i| (coords[i as usize][axis], i));
    let (left_slice, right_slice) = order.split_at_mut(mid);
    let left = build_node(coords, left_slice, base, nodes);
    let right = build_node(coords, right_slice, base + mid as u32, nodes);
    nodes.push(Node {
        bbox,
        kind: NodeKind::Inner { left, right },
    });
    nodes.len() as u32 - 1
}
