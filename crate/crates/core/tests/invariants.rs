//! Property tests for the library-wide invariants: remap purity, scale
//! preservation, hop-matrix disentanglement, permutation covariance and
//! equivariance, fusion validity, DMI order-freedom, and codec round-trips.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taction_core::depth::{compute_dmi, crop_roi, normalize_dmi, DepthFrame, DepthSequence};
use taction_core::fusion::{fuse_scores, top_prediction, FusionConfig};
use taction_core::gcn::{
    infer, ms_gcn_layer_preact, FeatureTensor, G3dLayer, HeadWeights, Layer, ModelWeights,
    MsGcnLayer,
};
use taction_core::graph::{
    base_adjacency, bfs_distances, k_hop_adjacency, normalize_adjacency, window_adjacency,
    MultiScaleAdjacency, SkeletonGraph,
};
use taction_core::mat::Mat;
use taction_core::score::ScoreVector;
use taction_core::skeleton::{
    center_translate, normalize_scale, remap_v1_to_v2, JointId, Point3, SkeletonFrame,
    SkeletonSequence, V1_FILL_TABLE,
};
use taction_core::tactile::{decode_frame, encode_frame, render_ascii, NodeState, TactileGlyph};

fn frame_from_coords(coords: Vec<(f64, f64, f64)>) -> SkeletonFrame<f64> {
    SkeletonFrame::new(
        coords
            .into_iter()
            .map(|(x, y, z)| Point3::new(x, y, z))
            .collect(),
    )
}

fn coord() -> impl Strategy<Value = (f64, f64, f64)> {
    (
        -10.0f64..10.0,
        -10.0f64..10.0,
        -10.0f64..10.0,
    )
}

proptest! {
    #[test]
    fn remap_matches_copy_table(coords in proptest::collection::vec(coord(), 20)) {
        let frame = frame_from_coords(coords);
        let out = remap_v1_to_v2(&frame).unwrap();
        // independent oracle: apply the copy table literally
        for target in 1..=25usize {
            let source = V1_FILL_TABLE
                .iter()
                .find(|(t, _)| *t == target)
                .map(|(_, s)| *s)
                .unwrap_or(target);
            prop_assert_eq!(out.joints[target - 1], frame.joints[source - 1]);
            prop_assert_eq!(out.valid[target - 1], target <= 20);
        }
    }

    #[test]
    fn scale_normalization_preserves_ratios(
        coords in proptest::collection::vec(coord(), 20),
        probe in (0usize..20, 0usize..20, 0usize..20, 0usize..20),
    ) {
        let frame = frame_from_coords(coords);
        let seq = SkeletonSequence::new(vec![frame], 30.0);
        let bone = seq.frames[0].joints[0].distance(seq.frames[0].joints[1]);
        prop_assume!(bone > 1e-3);
        let scaled = normalize_scale(&seq).unwrap();
        let (a, b, c, d) = probe;
        let before_ab = seq.frames[0].joints[a].distance(seq.frames[0].joints[b]);
        let before_cd = seq.frames[0].joints[c].distance(seq.frames[0].joints[d]);
        prop_assume!(before_cd > 1e-3);
        let after_ab = scaled.frames[0].joints[a].distance(scaled.frames[0].joints[b]);
        let after_cd = scaled.frames[0].joints[c].distance(scaled.frames[0].joints[d]);
        let before = before_ab / before_cd;
        let after = after_ab / after_cd;
        prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn centering_twice_is_centering_once(
        coords in proptest::collection::vec(coord(), 20),
        refj in 1usize..=20,
    ) {
        let seq = SkeletonSequence::new(vec![frame_from_coords(coords)], 30.0);
        let r = JointId::new(refj).unwrap();
        let once = center_translate(&seq, r).unwrap();
        let twice = center_translate(&once, r).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn fusion_keeps_distributions_valid(
        raw_a in proptest::collection::vec(0.001f64..1.0, 2..8),
        raw_b in proptest::collection::vec(0.001f64..1.0, 2..8),
        alpha in 0.0f64..=1.0,
    ) {
        let n = raw_a.len().min(raw_b.len());
        let norm = |v: &[f64]| {
            let total: f64 = v[..n].iter().sum();
            v[..n].iter().map(|x| x / total).collect::<Vec<_>>()
        };
        let classes: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let a = ScoreVector::new(classes.clone(), norm(&raw_a));
        let b = ScoreVector::new(classes, norm(&raw_b));
        let fused = fuse_scores(&a, &b, FusionConfig::new(alpha).unwrap()).unwrap();
        prop_assert!(fused.is_distribution(1e-6));
    }

    #[test]
    fn top_prediction_agrees_with_scan_oracle(
        raw in proptest::collection::vec(0.0f64..1.0, 1..10),
    ) {
        let classes: Vec<String> = (0..raw.len()).map(|i| format!("c{i}")).collect();
        let s = ScoreVector::new(classes, raw.clone());
        // oracle: remember the first strictly-greater element
        let mut best = 0usize;
        for (i, &v) in raw.iter().enumerate() {
            if v > raw[best] {
                best = i;
            }
        }
        prop_assert_eq!(top_prediction(&s).unwrap(), best);
    }

    #[test]
    fn top_prediction_ignores_positive_scaling(
        raw in proptest::collection::vec(0.001f64..1.0, 1..8),
        factor in 0.01f64..100.0,
    ) {
        let classes: Vec<String> = (0..raw.len()).map(|i| format!("c{i}")).collect();
        let s = ScoreVector::new(classes.clone(), raw.clone());
        let scaled = ScoreVector::new(classes, raw.iter().map(|x| x * factor).collect());
        prop_assert_eq!(top_prediction(&s).unwrap(), top_prediction(&scaled).unwrap());
    }

    #[test]
    fn dmi_is_frame_order_free_and_monotone(
        pixel_seed in proptest::collection::vec(proptest::collection::vec(0u8..=255, 12), 1..6),
        rotate_by in 0usize..6,
    ) {
        let frames: Vec<DepthFrame> = pixel_seed
            .iter()
            .map(|p| DepthFrame::new(4, 3, p.clone()).unwrap())
            .collect();
        let seq = DepthSequence::new(frames.clone(), 0).unwrap();
        let dmi = compute_dmi::<f64>(&seq).unwrap();

        let mut rotated = frames.clone();
        rotated.rotate_left(rotate_by % frames.len());
        let shuffled = DepthSequence::new(rotated, 0).unwrap();
        prop_assert_eq!(compute_dmi::<f64>(&shuffled).unwrap(), dmi.clone());

        // adding any frame can only raise (or keep) each pixel
        let mut extended = frames;
        extended.push(DepthFrame::new(4, 3, pixel_seed[0].clone()).unwrap());
        let bigger = compute_dmi::<f64>(&DepthSequence::new(extended, 0).unwrap()).unwrap();
        for (small, big) in dmi.values.iter().zip(&bigger.values) {
            prop_assert!(big >= small);
        }

        let norm = normalize_dmi(&dmi);
        prop_assert!(norm.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        if let Ok(cropped) = crop_roi(&norm, 0.25) {
            let kept = cropped.values.iter().filter(|&&v| v > 0.25).count();
            let total = norm.values.iter().filter(|&&v| v > 0.25).count();
            prop_assert_eq!(kept, total);
        }
    }

    #[test]
    fn glyph_frame_roundtrip(masks in proptest::collection::vec(0u8..=255, 9), full_at in 0usize..9) {
        let mut glyph = TactileGlyph::default();
        for (i, slot) in glyph.nodes.iter_mut().enumerate() {
            *slot = if i == full_at {
                NodeState::full()
            } else {
                NodeState::with_segments(masks[i])
            };
        }
        let frame = encode_frame(&glyph);
        prop_assert_eq!(decode_frame(&frame).unwrap(), glyph);
    }

    #[test]
    fn distinct_glyphs_render_distinctly(
        masks_a in proptest::collection::vec(0u8..=255, 9),
        masks_b in proptest::collection::vec(0u8..=255, 9),
        full_a in 0usize..9,
        full_b in 0usize..9,
    ) {
        let build = |masks: &[u8], full_at: usize| {
            let mut g = TactileGlyph::default();
            for (i, slot) in g.nodes.iter_mut().enumerate() {
                *slot = if i == full_at {
                    NodeState::full()
                } else {
                    NodeState::with_segments(masks[i])
                };
            }
            g
        };
        let a = build(&masks_a, full_a);
        let b = build(&masks_b, full_b);
        prop_assert_eq!(a == b, render_ascii(&a) == render_ascii(&b));
    }
}

// ---------------------------------------------------------------------------
// Graph invariants over random connected graphs
// ---------------------------------------------------------------------------

fn random_connected_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> SkeletonGraph {
    let v = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    for child in 1..v {
        edges.push((rng.random_range(0..child), child));
    }
    let extra = rng.random_range(0..=v / 2);
    for _ in 0..extra {
        let a = rng.random_range(0..v);
        let b = rng.random_range(0..v);
        if a == b {
            continue;
        }
        let e = (a.min(b), a.max(b));
        if !edges.contains(&e) && !edges.contains(&(e.1, e.0)) {
            edges.push(e);
        }
    }
    SkeletonGraph::new(v, &edges).unwrap()
}

#[test]
fn hop_matrices_partition_connected_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15e);
    for _ in 0..60 {
        let graph = random_connected_graph(&mut rng, 12);
        let v = graph.num_joints();
        let a = base_adjacency(&graph);
        let dist = bfs_distances(&a);
        let diameter = (0..v)
            .flat_map(|i| (0..v).map(move |j| (i, j)))
            .map(|(i, j)| dist[(i, j)])
            .max()
            .unwrap();

        let hops: Vec<Mat<u8>> = (0..=diameter).map(|k| k_hop_adjacency(&a, k)).collect();
        let mut coverage = Mat::zeros(v, v);
        for hop in &hops {
            for i in 0..v {
                for j in 0..v {
                    coverage[(i, j)] += hop[(i, j)];
                }
            }
        }
        // disjoint supports and exhaustive coverage: each pair in exactly one scale
        for i in 0..v {
            for j in 0..v {
                assert_eq!(coverage[(i, j)], 1, "pair ({i},{j}) covered once");
            }
        }
    }
}

fn permute_matrix(m: &Mat<u8>, perm: &[usize]) -> Mat<u8> {
    let v = m.rows();
    let mut out = Mat::zeros(v, v);
    for i in 0..v {
        for j in 0..v {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

#[test]
fn constructions_are_permutation_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
    for _ in 0..40 {
        let graph = random_connected_graph(&mut rng, 10);
        let v = graph.num_joints();
        let perm = random_permutation(&mut rng, v);
        let relabeled_edges: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .map(|&(a, b)| (perm[a], perm[b]))
            .collect();
        let relabeled = SkeletonGraph::new(v, &relabeled_edges).unwrap();

        let a = base_adjacency(&graph);
        let pa = base_adjacency(&relabeled);
        assert_eq!(pa, permute_matrix(&a, &perm));

        for k in 0..=3 {
            let hop = k_hop_adjacency(&a, k);
            let phop = k_hop_adjacency(&pa, k);
            assert_eq!(phop, permute_matrix(&hop, &perm));
        }

        // normalization commutes with conjugation
        let n = normalize_adjacency(&a.to_real::<f64>(), true);
        let pn = normalize_adjacency(&pa.to_real::<f64>(), true);
        for i in 0..v {
            for j in 0..v {
                assert!((pn[(perm[i], perm[j])] - n[(i, j)]).abs() < 1e-12);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Engine invariants
// ---------------------------------------------------------------------------

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
    Mat::from_vec(
        r,
        c,
        (0..r * c)
            .map(|_| f64::from(rng.random_range(-100i32..100)) / 64.0)
            .collect(),
    )
}

fn random_model(rng: &mut ChaCha8Rng, scales: usize, classes: usize) -> ModelWeights<f64> {
    let ms = MsGcnLayer {
        scale_weights: (0..scales).map(|_| random_mat(rng, 3, 4)).collect(),
        bias: (0..4).map(|_| f64::from(rng.random_range(-8i32..8)) / 16.0).collect(),
    };
    let g3d = G3dLayer {
        tau: 3,
        scale_weights: (0..2).map(|_| random_mat(rng, 4, 4)).collect(),
        bias: vec![0.0; 4],
    };
    let head = HeadWeights {
        class_matrix: random_mat(rng, 4, classes),
    };
    ModelWeights::new(vec![Layer::MsGcn(ms), Layer::G3d(g3d)], head).unwrap()
}

fn random_sequence(rng: &mut ChaCha8Rng, frames: usize, joints: usize) -> SkeletonSequence<f64> {
    let fs = (0..frames)
        .map(|_| {
            SkeletonFrame::new(
                (0..joints)
                    .map(|_| {
                        Point3::new(
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    SkeletonSequence::new(fs, 30.0)
}

#[test]
fn infer_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let graph = SkeletonGraph::kinect_v2();
    let v = graph.num_joints();
    let model = random_model(&mut rng, 4, 5);
    let adj = MultiScaleAdjacency::build(&graph, 3);

    for _ in 0..5 {
        let seq = random_sequence(&mut rng, 6, v);
        let base = infer(&seq, &model, &adj).unwrap();

        let perm = random_permutation(&mut rng, v);
        let relabeled_edges: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .map(|&(a, b)| (perm[a], perm[b]))
            .collect();
        let pgraph = SkeletonGraph::new(v, &relabeled_edges).unwrap();
        let padj = MultiScaleAdjacency::build(&pgraph, 3);
        let mut pseq = seq.clone();
        for (frame, pframe) in seq.frames.iter().zip(&mut pseq.frames) {
            for j in 0..v {
                pframe.joints[perm[j]] = frame.joints[j];
            }
        }
        let permuted = infer(&pseq, &model, &padj).unwrap();
        for (a, b) in base.scores.iter().zip(&permuted.scores) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn preactivation_is_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabc);
    let graph = random_connected_graph(&mut rng, 8);
    let adj = MultiScaleAdjacency::build(&graph, 2);
    let v = graph.num_joints();
    let layer = MsGcnLayer {
        scale_weights: (0..3)
            .map(|_| {
                Mat::from_vec(
                    2,
                    3,
                    (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect(),
        bias: vec![0.0; 3],
    };
    let x = FeatureTensor::new(
        2,
        v,
        2,
        (0..2 * v * 2).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let alpha = 2.75f64;
    let scaled = FeatureTensor::new(2, v, 2, x.data().iter().map(|&d| d * alpha).collect()).unwrap();
    let y = ms_gcn_layer_preact(&x, &adj, &layer).unwrap();
    let ys = ms_gcn_layer_preact(&scaled, &adj, &layer).unwrap();
    for (&a, &b) in y.data().iter().zip(ys.data()) {
        assert!((a * alpha - b).abs() < 1e-9);
    }
}

#[test]
fn infer_matches_chained_layer_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1234);
    let graph = random_connected_graph(&mut rng, 7);
    let v = graph.num_joints();
    let adj = MultiScaleAdjacency::build(&graph, 3);
    let model = random_model(&mut rng, 4, 5);
    let seq = random_sequence(&mut rng, 4, v);
    let got = infer(&seq, &model, &adj).unwrap();

    // oracle: naive per-layer loops chained by hand, then mean pool + softmax
    let frames = seq.len();
    let mut features: Vec<Vec<Vec<f64>>> = (0..frames)
        .map(|t| {
            (0..v)
                .map(|j| {
                    let p = seq.frames[t].joints[j];
                    vec![p.x, p.y, p.z]
                })
                .collect()
        })
        .collect();

    for layer in &model.layers {
        match layer {
            Layer::MsGcn(l) => {
                let c_in = features[0][0].len();
                let c_out = l.scale_weights[0].cols();
                let mut next = vec![vec![vec![0.0f64; c_out]; v]; frames];
                for t in 0..frames {
                    for i in 0..v {
                        for o in 0..c_out {
                            let mut acc = l.bias[o];
                            for (k, w) in l.scale_weights.iter().enumerate() {
                                for j in 0..v {
                                    for c in 0..c_in {
                                        acc += adj.normalized[k][(i, j)]
                                            * features[t][j][c]
                                            * w[(c, o)];
                                    }
                                }
                            }
                            next[t][i][o] = acc.max(0.0);
                        }
                    }
                }
                features = next;
            }
            Layer::G3d(l) => {
                let c_in = features[0][0].len();
                let c_out = l.scale_weights[0].cols();
                let tau = l.tau;
                let half = (tau - 1) / 2;
                let norms: Vec<Mat<f64>> = adj
                    .hops
                    .iter()
                    .take(l.scale_weights.len())
                    .map(|hop| {
                        normalize_adjacency(
                            &window_adjacency(hop, tau).unwrap().block.to_real::<f64>(),
                            false,
                        )
                    })
                    .collect();
                let mut next = vec![vec![vec![0.0f64; c_out]; v]; frames];
                for t in 0..frames {
                    let mut block = vec![vec![0.0f64; c_in]; tau * v];
                    for w in 0..tau {
                        let src = t as isize + w as isize - half as isize;
                        if src < 0 || src >= frames as isize {
                            continue;
                        }
                        for i in 0..v {
                            block[w * v + i].clone_from_slice(&features[src as usize][i]);
                        }
                    }
                    for i in 0..v {
                        for o in 0..c_out {
                            let mut acc = l.bias[o];
                            for (k, w) in l.scale_weights.iter().enumerate() {
                                for r in 0..tau * v {
                                    for c in 0..c_in {
                                        acc += norms[k][(half * v + i, r)]
                                            * block[r][c]
                                            * w[(c, o)];
                                    }
                                }
                            }
                            next[t][i][o] = acc.max(0.0);
                        }
                    }
                }
                features = next;
            }
        }
    }

    let channels = features[0][0].len();
    let mut pooled = vec![0.0f64; channels];
    for frame in &features {
        for joint in frame {
            for (c, &value) in joint.iter().enumerate() {
                pooled[c] += value;
            }
        }
    }
    for slot in &mut pooled {
        *slot /= (frames * v) as f64;
    }
    let classes = model.head.class_matrix.cols();
    let logits: Vec<f64> = (0..classes)
        .map(|j| (0..channels).map(|c| pooled[c] * model.head.class_matrix[(c, j)]).sum())
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();

    for (scored, expected) in got.scores.iter().zip(exps.iter().map(|e| e / total)) {
        assert!((scored - expected).abs() <= 1e-7, "{scored} vs {expected}");
    }
}

#[test]
fn window_blocks_stay_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x777);
    for _ in 0..20 {
        let graph = random_connected_graph(&mut rng, 8);
        let a = base_adjacency(&graph);
        for k in 0..3 {
            let hop = k_hop_adjacency(&a, k);
            for tau in [1, 3, 5] {
                let w = window_adjacency(&hop, tau).unwrap();
                assert!(w.block.is_symmetric());
            }
        }
    }
}
