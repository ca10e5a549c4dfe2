//! Skeleton graph construction: base adjacency, disentangled k-hop
//! adjacencies, row-stochastic normalization, the frame-to-frame
//! spatio-temporal graph, and the dense sliding-window block adjacency.
//!
//! "Disentangled" means each scale k holds pairs at shortest-path distance
//! exactly k, computed by BFS rather than matrix powers, so scales never
//! overlap and close neighbors are not over-weighted.

use std::collections::VecDeque;

use thiserror::Error;

use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::skeleton::V2_JOINTS;

/// Bones of the 25-joint skeleton, 1-based pairs: spine and head, both arms
/// with hand tip and thumb attached to the hand, both legs.
pub const SKELETON_EDGES: [(usize, usize); 24] = [
    (1, 2),
    (2, 21),
    (21, 3),
    (3, 4),
    (21, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 22),
    (8, 23),
    (21, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (12, 24),
    (12, 25),
    (1, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (1, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    InvalidEdgeIndex(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("spatio-temporal graph needs at least one frame")]
    ZeroFrames,
    #[error("window length must be odd, got {0}")]
    EvenWindow(usize),
}

/// An undirected joint graph with 0-based node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonGraph {
    num_joints: usize,
    edges: Vec<(usize, usize)>,
}

impl SkeletonGraph {
    /// Validates indices, bans self-loops and duplicates, and stores each
    /// edge with the smaller index first.
    pub fn new(num_joints: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= num_joints || b >= num_joints {
                return Err(GraphError::InvalidEdgeIndex(a, b, num_joints));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if canon.contains(&e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            canon.push(e);
        }
        Ok(Self {
            num_joints,
            edges: canon,
        })
    }

    /// The default 25-joint skeleton (a tree with 24 bones).
    pub fn kinect_v2() -> Self {
        let edges: Vec<(usize, usize)> = SKELETON_EDGES
            .iter()
            .map(|&(a, b)| (a - 1, b - 1))
            .collect();
        Self::new(V2_JOINTS, &edges).expect("built-in edge list is valid")
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Binary adjacency matrix: 1 at both (i,j) and (j,i) for every edge, zero
/// diagonal.
pub fn base_adjacency(graph: &SkeletonGraph) -> Mat<u8> {
    let v = graph.num_joints();
    let mut a = Mat::zeros(v, v);
    for &(i, j) in graph.edges() {
        a[(i, j)] = 1;
        a[(j, i)] = 1;
    }
    a
}

/// All-pairs BFS distances over a binary adjacency; unreachable pairs are
/// `usize::MAX`.
pub fn bfs_distances(a: &Mat<u8>) -> Mat<usize> {
    let v = a.rows();
    let mut dist = Mat::filled(v, v, usize::MAX);
    for start in 0..v {
        dist[(start, start)] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let d = dist[(start, node)];
            for next in 0..v {
                if a[(node, next)] != 0 && dist[(start, next)] == usize::MAX {
                    dist[(start, next)] = d + 1;
                    queue.push_back(next);
                }
            }
        }
    }
    dist
}

/// Exact-distance k-hop adjacency: entry (i,j) is 1 iff the BFS shortest-path
/// distance is exactly `k`. `k = 0` yields the identity; `k` beyond the
/// diameter yields the zero matrix.
pub fn k_hop_adjacency(a: &Mat<u8>, k: usize) -> Mat<u8> {
    let dist = bfs_distances(a);
    let v = a.rows();
    let mut out = Mat::zeros(v, v);
    for i in 0..v {
        for j in 0..v {
            if dist[(i, j)] == k {
                out[(i, j)] = 1;
            }
        }
    }
    out
}

/// Row-stochastic propagation normalization: `D̂⁻¹·M̂` where `M̂` optionally
/// adds self-loops and `D̂` is its row-degree diagonal. Zero-degree rows stay
/// all-zero.
pub fn normalize_adjacency<T: Scalar>(m: &Mat<T>, add_self_loops: bool) -> Mat<T> {
    let v = m.rows();
    let mut out = m.clone();
    if add_self_loops {
        for i in 0..v.min(m.cols()) {
            out[(i, i)] += T::one();
        }
    }
    for i in 0..v {
        let degree: T = out.row(i).iter().copied().sum();
        if degree > T::zero() {
            let inv = T::one() / degree;
            for j in 0..out.cols() {
                out[(i, j)] *= inv;
            }
        }
    }
    out
}

/// The base adjacency, its exact-distance hop matrices for k = 0..=K, and
/// their row-stochastic normalized forms (no extra self-loops; scale 0 is
/// the identity and already carries them).
#[derive(Debug, Clone)]
pub struct MultiScaleAdjacency<T> {
    pub base: Mat<u8>,
    pub hops: Vec<Mat<u8>>,
    pub normalized: Vec<Mat<T>>,
}

impl<T: Scalar> MultiScaleAdjacency<T> {
    pub fn build(graph: &SkeletonGraph, max_scale: usize) -> Self {
        let base = base_adjacency(graph);
        let hops: Vec<Mat<u8>> = (0..=max_scale).map(|k| k_hop_adjacency(&base, k)).collect();
        let normalized = hops
            .iter()
            .map(|h| normalize_adjacency(&h.to_real::<T>(), false))
            .collect();
        Self {
            base,
            hops,
            normalized,
        }
    }

    pub fn num_joints(&self) -> usize {
        self.base.rows()
    }

    /// Number of scales carried (K + 1).
    pub fn num_scales(&self) -> usize {
        self.hops.len()
    }
}

/// Sparse spatio-temporal graph over `frames` copies of the joint set: node
/// `t·V + v` is joint `v` at frame `t`. Edges are the spatial bones within
/// each frame plus one temporal edge per joint between consecutive frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StGraph {
    pub frames: usize,
    pub num_joints: usize,
    /// Canonical undirected pairs (i < j), sorted.
    pub edges: Vec<(usize, usize)>,
}

impl StGraph {
    pub fn num_nodes(&self) -> usize {
        self.frames * self.num_joints
    }

    /// Dense binary form, mainly for dumps and small-case checks.
    pub fn to_dense(&self) -> Mat<u8> {
        let n = self.num_nodes();
        let mut m = Mat::zeros(n, n);
        for &(i, j) in &self.edges {
            m[(i, j)] = 1;
            m[(j, i)] = 1;
        }
        m
    }
}

/// Assemble the frame-to-frame spatio-temporal graph for `frames` frames.
pub fn st_graph(a: &Mat<u8>, frames: usize) -> Result<StGraph, GraphError> {
    if frames == 0 {
        return Err(GraphError::ZeroFrames);
    }
    let v = a.rows();
    let mut edges = Vec::new();
    for t in 0..frames {
        let off = t * v;
        for i in 0..v {
            for j in (i + 1)..v {
                if a[(i, j)] != 0 {
                    edges.push((off + i, off + j));
                }
            }
        }
    }
    for t in 0..frames.saturating_sub(1) {
        for joint in 0..v {
            edges.push((t * v + joint, (t + 1) * v + joint));
        }
    }
    edges.sort_unstable();
    Ok(StGraph {
        frames,
        num_joints: v,
        edges,
    })
}

/// Block adjacency for a τ-frame window: τ×τ tiles of one hop matrix, so
/// every joint connects to its k-hop spatial neighbors in every frame of the
/// window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowAdjacency {
    pub tau: usize,
    pub block: Mat<u8>,
}

impl WindowAdjacency {
    pub fn num_joints(&self) -> usize {
        self.block.rows() / self.tau
    }
}

pub fn window_adjacency(hop: &Mat<u8>, tau: usize) -> Result<WindowAdjacency, GraphError> {
    if tau == 0 || tau.is_multiple_of(2) {
        return Err(GraphError::EvenWindow(tau));
    }
    let v = hop.rows();
    let n = tau * v;
    let mut block = Mat::zeros(n, n);
    for a in 0..tau {
        for b in 0..tau {
            for i in 0..v {
                for j in 0..hop.cols() {
                    block[(a * v + i, b * v + j)] = hop[(i, j)];
                }
            }
        }
    }
    Ok(WindowAdjacency { tau, block })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Mat<u8> {
        let g = SkeletonGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        base_adjacency(&g)
    }

    #[test]
    fn default_skeleton_is_a_tree() {
        let g = SkeletonGraph::kinect_v2();
        assert_eq!(g.num_joints(), 25);
        assert_eq!(g.edges().len(), 24);
        let a = base_adjacency(&g);
        assert_eq!(a.count_nonzero(), 48);
        assert!(a.is_symmetric());
        assert!((0..25).all(|i| a[(i, i)] == 0));
        // connected: BFS reaches every node
        let dist = bfs_distances(&a);
        assert!((0..25).all(|j| dist[(0, j)] != usize::MAX));
    }

    #[test]
    fn head_joint_is_a_leaf() {
        let a = base_adjacency(&SkeletonGraph::kinect_v2());
        let head = 4 - 1; // joint 4, 1-based
        let degree: u32 = (0..25).map(|j| u32::from(a[(head, j)])).sum();
        assert_eq!(degree, 1);
    }

    #[test]
    fn graph_construction_guards() {
        assert!(matches!(
            SkeletonGraph::new(3, &[(0, 3)]).unwrap_err(),
            GraphError::InvalidEdgeIndex(0, 3, 3)
        ));
        assert!(matches!(
            SkeletonGraph::new(3, &[(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        ));
        assert!(matches!(
            SkeletonGraph::new(3, &[(0, 1), (1, 0)]).unwrap_err(),
            GraphError::DuplicateEdge(0, 1)
        ));
    }

    #[test]
    fn empty_edge_list_gives_zero_matrix() {
        let g = SkeletonGraph::new(4, &[]).unwrap();
        assert_eq!(base_adjacency(&g).count_nonzero(), 0);
    }

    #[test]
    fn khop_zero_is_identity() {
        assert_eq!(k_hop_adjacency(&path3(), 0), Mat::identity(3));
        let a = base_adjacency(&SkeletonGraph::kinect_v2());
        assert_eq!(k_hop_adjacency(&a, 0), Mat::identity(25));
    }

    #[test]
    fn khop_two_on_path_graph() {
        let h2 = k_hop_adjacency(&path3(), 2);
        let mut want = Mat::zeros(3, 3);
        want[(0, 2)] = 1;
        want[(2, 0)] = 1;
        assert_eq!(h2, want);
    }

    #[test]
    fn khop_partitions_by_bfs_distance() {
        let a = base_adjacency(&SkeletonGraph::kinect_v2());
        let dist = bfs_distances(&a);
        let max_d = (0..25)
            .flat_map(|i| (0..25).map(move |j| (i, j)))
            .map(|(i, j)| dist[(i, j)])
            .max()
            .unwrap();
        for k in 0..=max_d {
            let hop = k_hop_adjacency(&a, k);
            for i in 0..25 {
                for j in 0..25 {
                    assert_eq!(hop[(i, j)] == 1, dist[(i, j)] == k, "k={k} i={i} j={j}");
                }
            }
        }
        assert_eq!(k_hop_adjacency(&a, max_d + 1).count_nonzero(), 0);
    }

    #[test]
    fn normalization_row_sums() {
        let id: Mat<f64> = Mat::identity(4).to_real();
        assert_eq!(normalize_adjacency(&id, false), id);

        let with_loops = normalize_adjacency(&path3().to_real::<f64>(), true);
        let mid: Vec<f64> = with_loops.row(1).to_vec();
        for v in mid {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        for r in 0..3 {
            let sum: f64 = with_loops.row(r).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
        }
        assert!(with_loops.data().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let skeleton = normalize_adjacency(
            &base_adjacency(&SkeletonGraph::kinect_v2()).to_real::<f64>(),
            false,
        );
        assert!(skeleton.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn zero_rows_stay_zero() {
        let mut m = Mat::zeros(3, 3);
        m[(0, 1)] = 1;
        m[(1, 0)] = 1;
        let n = normalize_adjacency(&m.to_real::<f64>(), false);
        assert!(n.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn st_graph_counts() {
        let a = base_adjacency(&SkeletonGraph::kinect_v2());
        let one = st_graph(&a, 1).unwrap();
        assert_eq!(one.to_dense(), a);

        let t = 7;
        let st = st_graph(&a, t).unwrap();
        assert_eq!(st.num_nodes(), t * 25);
        assert_eq!(st.edges.len(), t * 24 + (t - 1) * 25);
        assert!(matches!(st_graph(&a, 0).unwrap_err(), GraphError::ZeroFrames));
    }

    #[test]
    fn window_tiles_exactly() {
        let g = SkeletonGraph::new(2, &[(0, 1)]).unwrap();
        let hop = base_adjacency(&g);
        let w1 = window_adjacency(&hop, 1).unwrap();
        assert_eq!(w1.block, hop);

        let w3 = window_adjacency(&hop, 3).unwrap();
        assert_eq!(w3.block.rows(), 6);
        for a in 0..3 {
            for b in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(w3.block[(a * 2 + i, b * 2 + j)], hop[(i, j)]);
                    }
                }
            }
        }
        assert!(w3.block.is_symmetric());
        assert!(matches!(
            window_adjacency(&hop, 2).unwrap_err(),
            GraphError::EvenWindow(2)
        ));
    }
}
