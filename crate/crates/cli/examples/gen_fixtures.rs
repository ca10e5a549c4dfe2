//! Regenerates the committed fixture set under `fixtures/` at the workspace
//! root: synthetic skeleton captures, depth stacks, class centroids, the toy
//! model weights, the evaluation records, and the pipeline config.
//!
//! Everything is derived from fixed seeds and closed-form motion curves, so
//! reruns are byte-identical:
//!
//! ```text
//! cargo run -p taction-cli --example gen_fixtures
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taction_core::actions::{evaluation_classes, TESTED_ACTIONS};
use taction_core::depth::write_pgm;
use taction_core::fusion::{serialize_records, TrialRecord};
use taction_core::gcn::{save_weights, G3dLayer, HeadWeights, Layer, ModelWeights, MsGcnLayer};
use taction_core::mat::Mat;
use taction_core::numfmt::format_sig9;
use taction_core::skeleton::{Point3, SkeletonFrame, SkeletonSequence};
use taction_core::tactile::{default_registry, serialize_registry};

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn slug(name: &str) -> String {
    name.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect()
}

// -------------------------------------------------------------------------
// Skeleton captures: a standing 20-joint pose plus closed-form limb motion
// -------------------------------------------------------------------------

const BASE_POSE: [(f64, f64, f64); 20] = [
    (0.00, 0.90, 2.50),   // 1 spine base
    (0.00, 1.15, 2.50),   // 2 spine mid
    (0.00, 1.40, 2.50),   // 3 neck
    (0.00, 1.55, 2.50),   // 4 head
    (-0.18, 1.35, 2.50),  // 5 left shoulder
    (-0.25, 1.10, 2.50),  // 6 left elbow
    (-0.28, 0.88, 2.50),  // 7 left wrist
    (-0.30, 0.80, 2.50),  // 8 left hand
    (0.18, 1.35, 2.50),   // 9 right shoulder
    (0.25, 1.10, 2.50),   // 10 right elbow
    (0.28, 0.88, 2.50),   // 11 right wrist
    (0.30, 0.80, 2.50),   // 12 right hand
    (-0.09, 0.85, 2.50),  // 13 left hip
    (-0.10, 0.50, 2.50),  // 14 left knee
    (-0.11, 0.12, 2.50),  // 15 left ankle
    (-0.11, 0.05, 2.45),  // 16 left foot
    (0.09, 0.85, 2.50),   // 17 right hip
    (0.10, 0.50, 2.50),   // 18 right knee
    (0.11, 0.12, 2.50),   // 19 right ankle
    (0.11, 0.05, 2.45),   // 20 right foot
];

/// Per-joint displacement at phase `p` for one motion style.
fn motion(style: &str, joint: usize, p: f64) -> (f64, f64, f64) {
    let sway = 0.01 * (p * 0.7).sin();
    let local = match (style, joint) {
        // right arm waving overhead
        ("wave", 10) => (0.05 * p.sin(), 0.25, 0.0),
        ("wave", 11) => (0.22 * p.sin(), 0.52, 0.0),
        ("wave", 12) => (0.26 * p.sin(), 0.55, 0.02 * p.cos()),
        // right hand rising to the mouth and back
        ("drink", 10) => (-0.05 * p.sin().max(0.0), 0.18 * p.sin().max(0.0), -0.02),
        ("drink", 11) => (-0.20 * p.sin().max(0.0), 0.48 * p.sin().max(0.0), -0.06),
        ("drink", 12) => (-0.24 * p.sin().max(0.0), 0.60 * p.sin().max(0.0), -0.08),
        // right leg swinging forward
        ("kick", 18) => (0.0, 0.12 * p.sin().max(0.0), -0.18 * p.sin().max(0.0)),
        ("kick", 19) => (0.0, 0.30 * p.sin().max(0.0), -0.45 * p.sin().max(0.0)),
        ("kick", 20) => (0.0, 0.33 * p.sin().max(0.0), -0.52 * p.sin().max(0.0)),
        _ => (0.0, 0.0, 0.0),
    };
    (local.0 + sway, local.1, local.2)
}

fn skeleton_sequence(style: &str, frames: usize) -> SkeletonSequence<f32> {
    let fs = (0..frames)
        .map(|t| {
            let p = t as f64 / frames as f64 * std::f64::consts::PI * 2.0;
            SkeletonFrame::new(
                BASE_POSE
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y, z))| {
                        let (dx, dy, dz) = motion(style, i + 1, p);
                        Point3::new((x + dx) as f32, (y + dy) as f32, (z + dz) as f32)
                    })
                    .collect(),
            )
        })
        .collect();
    SkeletonSequence::new(fs, 30.0)
}

// -------------------------------------------------------------------------
// Depth stacks: far background with a near moving blob
// -------------------------------------------------------------------------

fn depth_stack(seed: usize, frames: usize, w: usize, h: usize) -> Vec<Vec<u8>> {
    (0..frames)
        .map(|t| {
            let cx = 4 + (seed * 3 + t * 5) % (w - 10);
            let cy = 3 + (seed * 2 + t * 3) % (h - 8);
            let mut pixels = vec![220u8; w * h];
            for y in cy..(cy + 6).min(h) {
                for x in cx..(cx + 7).min(w) {
                    let near = 40 + ((x + y + t * 11 + seed * 17) % 60) as u8;
                    pixels[y * w + x] = near;
                }
            }
            pixels
        })
        .collect()
}

fn centroid_image(class_index: usize, side: usize) -> Vec<u8> {
    (0..side * side)
        .map(|i| {
            let (x, y) = (i % side, i / side);
            (((x * (class_index + 3) + y * (2 * class_index + 1)) * 13 + class_index * 41) % 256)
                as u8
        })
        .collect()
}

// -------------------------------------------------------------------------
// Toy model: one spatial multi-scale layer, one windowed layer, linear head
// -------------------------------------------------------------------------

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f32> {
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-0.5f32..0.5))
            .collect(),
    )
}

fn toy_model(rng: &mut ChaCha8Rng, classes: usize) -> ModelWeights<f32> {
    let ms = MsGcnLayer {
        scale_weights: (0..4).map(|_| random_mat(rng, 3, 8)).collect(),
        bias: (0..8).map(|_| rng.random_range(-0.1f32..0.1)).collect(),
    };
    let g3d = G3dLayer {
        tau: 3,
        scale_weights: (0..2).map(|_| random_mat(rng, 8, 8)).collect(),
        bias: (0..8).map(|_| rng.random_range(-0.1f32..0.1)).collect(),
    };
    let head = HeadWeights {
        class_matrix: random_mat(rng, 8, classes),
    };
    ModelWeights::new(vec![Layer::MsGcn(ms), Layer::G3d(g3d)], head).expect("toy dims chain")
}

// -------------------------------------------------------------------------
// Evaluation records mirroring the trial table
// -------------------------------------------------------------------------

/// (action, correct-out-of-ten, wrong predictions cycled in order).
const TRIAL_ROWS: [(&str, usize, &[&str]); 18] = [
    ("Drink", 10, &[]),
    ("Brush teeth", 6, &["Phone call"]),
    ("Brush hair", 8, &["Touch neck", "Phone call"]),
    ("Eat meal/snacks", 10, &[]),
    ("Throw", 7, &["Salute"]),
    ("Sit down", 5, &["Take off/put on shoes"]),
    ("Stand up", 8, &["Head-shake"]),
    ("Jump up", 9, &["Stand up"]),
    (
        "Clapping",
        2,
        &["Writing", "Reading", "Playing with/using phone"],
    ),
    ("Hand waving", 6, &["Fan self"]),
    ("Playing with/using phone", 8, &["Writing"]),
    ("Phone call", 8, &["Brush teeth"]),
    ("Kicking something", 10, &[]),
    ("Falling", 5, &["Take off/put on shoes"]),
    ("Fan self", 10, &[]),
    ("Writing", 5, &["Reading", "Playing with/using phone"]),
    ("Reading", 6, &["Writing", "Playing with/using phone"]),
    ("Take off/put on shoes", 10, &[]),
];

fn trial_records() -> Vec<TrialRecord> {
    let mut records = Vec::new();
    for (action, correct, confusions) in TRIAL_ROWS {
        let tag = slug(action);
        for trial in 0..10 {
            let predicted = if trial < correct {
                action.to_string()
            } else {
                confusions[(trial - correct) % confusions.len()].to_string()
            };
            records.push(TrialRecord {
                sequence_id: format!("{tag}_{:02}", trial + 1),
                true_class: action.to_string(),
                predicted_class: predicted,
            });
        }
    }
    records
}

// -------------------------------------------------------------------------

fn write(path: &Path, bytes: &[u8]) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).expect("mkdir");
    }
    fs::write(path, bytes).unwrap_or_else(|e| panic!("writing {}: {e}", path.display()));
    println!("wrote {}", path.display());
}

fn main() {
    let root = fixtures_root();
    let classes: Vec<String> = TESTED_ACTIONS.iter().map(|s| s.to_string()).collect();

    // skeleton captures
    let clips = [("s01_wave", "wave", 24usize), ("s02_drink", "drink", 40), ("s03_kick", "kick", 17)];
    for (id, style, frames) in clips {
        let seq = skeleton_sequence(style, frames);
        write(
            &root.join(format!("skeletons/{id}.skl")),
            taction_core::skeleton::serialize_skeleton_file(&seq).as_bytes(),
        );
    }

    // depth stacks, one directory per sequence
    for (i, (id, _, _)) in clips.iter().enumerate() {
        for (t, pixels) in depth_stack(i + 1, 5, 32, 24).into_iter().enumerate() {
            write(
                &root.join(format!("depth/{id}/frame_{t:02}.pgm")),
                &write_pgm(32, 24, &pixels),
            );
        }
    }

    // class centroids with a name→file manifest (names may contain '/')
    let mut index = String::new();
    for (i, name) in classes.iter().enumerate() {
        let file = format!("{:02}_{}.pgm", i + 1, slug(name));
        index.push_str(&format!("{name}\t{file}\n"));
        write(
            &root.join("centroids").join(&file),
            &write_pgm(32, 32, &centroid_image(i, 32)),
        );
    }
    write(&root.join("centroids/index.tsv"), index.as_bytes());

    // model weights
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let model = toy_model(&mut rng, classes.len());
    write(&root.join("toy_model.msw"), &save_weights(&model));

    // label registry (same content as the built-in default)
    write(
        &root.join("registry.tgr"),
        serialize_registry(&default_registry()).as_bytes(),
    );

    // evaluation fixtures
    write(
        &root.join("table1_records.tsv"),
        serialize_records(&trial_records()).as_bytes(),
    );
    write(
        &root.join("eval_classes.txt"),
        (evaluation_classes().join("\n") + "\n").as_bytes(),
    );

    // pipeline configuration
    let mut config = String::new();
    config.push_str("model_path = \"toy_model.msw\"\n");
    config.push_str("registry_path = \"registry.tgr\"\n");
    config.push_str("centroids_dir = \"centroids\"\n");
    config.push_str("classes = [\n");
    for name in &classes {
        config.push_str(&format!("    {:?},\n", name));
    }
    config.push_str("]\n");
    config.push_str("scales_k = 3\n");
    config.push_str("window_tau = 3\n");
    config.push_str(&format!("fusion_alpha = {}\n", format_sig9(0.5f64)));
    config.push_str("temporal_len = 32\n");
    config.push_str("ref_joint = 1\n");
    config.push_str("depth_near_mm = 500.0\n");
    config.push_str("depth_far_mm = 4500.0\n");
    config.push_str("roi_threshold = 0.0\n");
    config.push_str("centroid_side = 32\n");
    config.push_str("centroid_temperature = 50.0\n");
    write(&root.join("pipeline.toml"), config.as_bytes());
}
