//! End-to-end pipeline: skeleton parsing through tactile frame encoding,
//! with deterministic result records.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rayon::prelude::*;

use taction_core::depth::{
    compute_dmi, crop_roi, nearest_centroid_classify, normalize_dmi, read_pgm_depth,
    ClassCentroid, DepthMotionImage, DepthSequence,
};
use taction_core::fusion::{fuse_scores, fuse_scores_product, top_prediction, FusionConfig};
use taction_core::gcn::{infer, load_weights, ModelWeights};
use taction_core::graph::{MultiScaleAdjacency, SkeletonGraph};
use taction_core::numfmt::format_sig9;
use taction_core::score::ScoreVector;
use taction_core::skeleton::{
    center_translate, normalize_scale, parse_skeleton_file, remap_sequence, resample_temporal,
    JointId, SkeletonSequence, V1_JOINTS,
};
use taction_core::tactile::{
    default_registry, encode_frame, lookup_label, parse_registry, render_ascii, LabelRegistry,
};

use crate::config::{FusionRule, PipelineConfig};

/// Error with the exit-code split the CLI promises: 1 for input and
/// configuration problems, 2 for processing failures.
#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Processing(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Processing(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) | CliError::Processing(e) => {
                if f.alternate() {
                    write!(f, "{e:#}")
                } else {
                    write!(f, "{e}")
                }
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input_err<T>(e: anyhow::Error) -> CliResult<T> {
    Err(CliError::Input(e))
}

pub trait StageContext<T> {
    /// Attach a stage label and classify as an input error.
    fn input_stage(self, stage: &str) -> CliResult<T>;
    /// Attach a stage label and classify as a processing error.
    fn processing_stage(self, stage: &str) -> CliResult<T>;
}

impl<T, E> StageContext<T> for Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn input_stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Input(anyhow!(e).context(format!("stage {stage}"))))
    }

    fn processing_stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Processing(anyhow!(e).context(format!("stage {stage}"))))
    }
}

/// One per-sequence pipeline outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub sequence_id: String,
    pub class_id: u32,
    pub class_name: String,
    pub score: f64,
    pub frame: [u8; 22],
    pub glyph_preview: String,
}

impl RunResult {
    /// The result-record line:
    /// `sequence_id<TAB>class_id<TAB>class_name<TAB>score<TAB>frame_hex`.
    pub fn record_line(&self) -> String {
        let hex: String = self.frame.iter().map(|b| format!("{b:02x}")).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.sequence_id,
            self.class_id,
            self.class_name,
            format_sig9(self.score),
            hex
        )
    }
}

/// Loaded, immutable state shared by all sequences of a run.
pub struct RunContext {
    pub config: PipelineConfig,
    pub model: ModelWeights<f64>,
    pub adjacency: MultiScaleAdjacency<f64>,
    pub registry: LabelRegistry,
    pub centroids: Vec<ClassCentroid<f64>>,
}

pub fn read_to_string_input(path: &Path, stage: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        CliError::Input(anyhow!(e).context(format!("stage {stage}: reading {}", path.display())))
    })
}

pub fn read_bytes_input(path: &Path, stage: &str) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| {
        CliError::Input(anyhow!(e).context(format!("stage {stage}: reading {}", path.display())))
    })
}

pub fn load_registry(config: &PipelineConfig) -> CliResult<LabelRegistry> {
    match &config.registry_path {
        None => Ok(default_registry()),
        Some(path) => {
            let text = read_to_string_input(path, "registry-load")?;
            parse_registry(&text).input_stage("registry-load")
        }
    }
}

pub fn load_model(config: &PipelineConfig) -> CliResult<ModelWeights<f64>> {
    let path = config.model_path.as_ref().ok_or_else(|| {
        CliError::Input(anyhow!("stage model-load: no model_path configured"))
    })?;
    let bytes = read_bytes_input(path, "model-load")?;
    let model: ModelWeights<f64> = load_weights(&bytes).input_stage("model-load")?;
    model
        .with_class_names(config.classes.clone())
        .input_stage("model-load")
}

/// Read per-class centroid images from a directory. With an `index.tsv`
/// manifest (`class_name<TAB>file` per line) present, its entries and order
/// are used; otherwise every `.pgm` is taken with its file stem as the class
/// name, lexicographic order. Class names with `/` in them need the
/// manifest.
pub fn load_centroids(dir: &Path, config: &PipelineConfig) -> CliResult<Vec<ClassCentroid<f64>>> {
    let index = dir.join("index.tsv");
    let named: Vec<(String, PathBuf)> = if index.is_file() {
        let text = read_to_string_input(&index, "centroid-load")?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((name, file)) = line.split_once('\t') else {
                return input_err(anyhow!(
                    "stage centroid-load: malformed index line {} in {}",
                    i + 1,
                    index.display()
                ));
            };
            entries.push((name.to_string(), dir.join(file)));
        }
        entries
    } else {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| {
                CliError::Input(
                    anyhow!(e).context(format!("stage centroid-load: reading {}", dir.display())),
                )
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "pgm"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let stem = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                (stem, p)
            })
            .collect()
    };

    let mut centroids = Vec::with_capacity(named.len());
    for (class_name, path) in named {
        let bytes = read_bytes_input(&path, "centroid-load")?;
        let frame = read_pgm_depth(&bytes, (config.depth_near_mm, config.depth_far_mm))
            .input_stage("centroid-load")?;
        // centroids live in normalized-DMI space: 8-bit storage maps to [0, 1]
        let values: Vec<f64> = frame.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        let image = DepthMotionImage::new(frame.width, frame.height, values)
            .input_stage("centroid-load")?;
        centroids.push(ClassCentroid { class_name, image });
    }
    if centroids.is_empty() {
        return input_err(anyhow!(
            "stage centroid-load: no centroids in {}",
            dir.display()
        ));
    }
    Ok(centroids)
}

impl RunContext {
    pub fn new(config: PipelineConfig) -> CliResult<Self> {
        let model = load_model(&config)?;
        if model.num_classes() != config.classes.len() {
            return input_err(anyhow!(
                "stage model-load: model head has {} classes, config lists {}",
                model.num_classes(),
                config.classes.len()
            ));
        }
        let registry = load_registry(&config)?;
        let adjacency = MultiScaleAdjacency::build(&SkeletonGraph::kinect_v2(), config.scales_k);
        let centroids = match &config.centroids_dir {
            Some(dir) => load_centroids(dir, &config)?,
            None => Vec::new(),
        };
        Ok(Self {
            config,
            model,
            adjacency,
            registry,
            centroids,
        })
    }
}

/// Remap (when the capture is 20-joint), center, scale, resample.
///
/// Preprocessing stays in `f32` — the SKL1 emitter's nine significant digits
/// reproduce exactly that precision, so a written intermediate re-parses to
/// the identical sequence and stage-by-stage runs match `run` byte for byte.
pub fn preprocess(
    seq: &SkeletonSequence<f32>,
    config: &PipelineConfig,
) -> CliResult<SkeletonSequence<f32>> {
    let seq = if seq.num_joints() == V1_JOINTS {
        remap_sequence(seq).processing_stage("remap")?
    } else {
        seq.clone()
    };
    let ref_joint = JointId::new(config.ref_joint)
        .ok_or_else(|| CliError::Input(anyhow!("stage center: bad ref_joint")))?;
    let seq = center_translate(&seq, ref_joint).processing_stage("center")?;
    let seq = normalize_scale(&seq).processing_stage("scale")?;
    resample_temporal(&seq, config.temporal_len).processing_stage("resample")
}

/// Lossless widening of capture-precision coordinates into the compute type.
pub fn widen(seq: &SkeletonSequence<f32>) -> SkeletonSequence<f64> {
    let frames = seq
        .frames
        .iter()
        .map(|f| taction_core::skeleton::SkeletonFrame {
            joints: f
                .joints
                .iter()
                .map(|p| taction_core::skeleton::Point3::new(
                    f64::from(p.x),
                    f64::from(p.y),
                    f64::from(p.z),
                ))
                .collect(),
            valid: f.valid.clone(),
        })
        .collect();
    let mut out = SkeletonSequence::new(frames, f64::from(seq.frame_rate_hz));
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    out
}

/// Depth branch: PGM stack → DMI → normalize → crop → centroid scores.
pub fn depth_scores(
    frames_dir: &Path,
    ctx: &RunContext,
) -> CliResult<ScoreVector<f64>> {
    let seq = read_depth_dir(frames_dir, &ctx.config)?;
    let dmi = compute_dmi::<f64>(&seq).processing_stage("dmi")?;
    let normalized = normalize_dmi(&dmi);
    let cropped = crop_roi(&normalized, ctx.config.roi_threshold).processing_stage("crop")?;
    nearest_centroid_classify(
        &cropped,
        &ctx.centroids,
        ctx.config.centroid_temperature,
        Some(ctx.config.centroid_side),
    )
    .processing_stage("classify")
}

/// Load every `.pgm` in a directory as one depth sequence, lexicographic
/// order = temporal order.
pub fn read_depth_dir(dir: &Path, config: &PipelineConfig) -> CliResult<DepthSequence> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| {
            CliError::Input(anyhow!(e).context(format!("stage dmi: reading {}", dir.display())))
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "pgm"))
        .collect();
    paths.sort();
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        let bytes = read_bytes_input(path, "dmi")?;
        frames.push(
            read_pgm_depth(&bytes, (config.depth_near_mm, config.depth_far_mm))
                .input_stage("dmi")?,
        );
    }
    DepthSequence::new(frames, 0).input_stage("dmi")
}

/// Process one sequence end to end.
pub fn run_sequence(
    sequence_id: &str,
    skeleton_text: &str,
    depth_dir: Option<&Path>,
    external_depth_scores: Option<&ScoreVector<f64>>,
    ctx: &RunContext,
) -> CliResult<RunResult> {
    let wrap = |e: CliError| match e {
        CliError::Input(err) => CliError::Input(err.context(format!("sequence {sequence_id}"))),
        CliError::Processing(err) => {
            CliError::Processing(err.context(format!("sequence {sequence_id}")))
        }
    };
    run_sequence_inner(skeleton_text, depth_dir, external_depth_scores, ctx)
        .map_err(wrap)
        .map(|mut r| {
            r.sequence_id = sequence_id.to_string();
            r
        })
}

fn run_sequence_inner(
    skeleton_text: &str,
    depth_dir: Option<&Path>,
    external_depth_scores: Option<&ScoreVector<f64>>,
    ctx: &RunContext,
) -> CliResult<RunResult> {
    let raw: SkeletonSequence<f32> =
        parse_skeleton_file(skeleton_text).input_stage("parse")?;
    let prepared = widen(&preprocess(&raw, &ctx.config)?);
    let skel_scores = infer(&prepared, &ctx.model, &ctx.adjacency).processing_stage("infer")?;

    let depth = match (external_depth_scores, depth_dir) {
        (Some(scores), _) => Some(scores.clone()),
        (None, Some(dir)) => Some(depth_scores(dir, ctx)?),
        (None, None) => None,
    };
    let fused = match depth {
        Some(depth_scores) => match ctx.config.fusion_rule {
            FusionRule::Weighted => {
                let cfg = FusionConfig::new(ctx.config.fusion_alpha).processing_stage("fuse")?;
                fuse_scores(&skel_scores, &depth_scores, cfg).processing_stage("fuse")?
            }
            FusionRule::Product => {
                fuse_scores_product(&skel_scores, &depth_scores).processing_stage("fuse")?
            }
        },
        None => skel_scores,
    };

    let best = top_prediction(&fused).processing_stage("fuse")?;
    let class_name = fused.classes[best].clone();
    let class_id = ctx
        .registry
        .id_of(&class_name)
        .ok_or_else(|| {
            CliError::Processing(anyhow!(
                "stage label: class {class_name:?} has no registry entry"
            ))
        })?;
    let glyph = lookup_label(class_id, &ctx.registry).processing_stage("label")?;
    let frame = encode_frame(glyph);
    Ok(RunResult {
        sequence_id: String::new(),
        class_id,
        class_name,
        score: fused.scores[best],
        frame,
        glyph_preview: render_ascii(glyph),
    })
}

/// Discover skeleton inputs: a single `.skl` file or every `.skl` in a
/// directory, lexicographic order. Sequence id = file stem.
pub fn discover_skeletons(input: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let meta = fs::metadata(input).map_err(|e| {
        CliError::Input(anyhow!(e).context(format!("stage parse: reading {}", input.display())))
    })?;
    let mut files = Vec::new();
    if meta.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| {
                CliError::Input(
                    anyhow!(e).context(format!("stage parse: reading {}", input.display())),
                )
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "skl"))
            .collect();
        paths.sort();
        files.extend(paths);
    } else {
        files.push(input.to_path_buf());
    }
    if files.is_empty() {
        return input_err(anyhow!(
            "stage parse: no .skl inputs under {}",
            input.display()
        ));
    }
    Ok(files
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            (id, p)
        })
        .collect())
}

/// Run the whole fixture set. `depth_root`, when given, supplies per-sequence
/// depth stacks at `<depth_root>/<sequence_id>/*.pgm`; `scores_root` supplies
/// external depth scores at `<scores_root>/<sequence_id>.scores`. Results
/// come back in input order regardless of worker scheduling.
pub fn run_all(
    skeleton_input: &Path,
    depth_root: Option<&Path>,
    scores_root: Option<&Path>,
    jobs: usize,
    ctx: &RunContext,
) -> CliResult<Vec<RunResult>> {
    let sequences = discover_skeletons(skeleton_input)?;
    let mut inputs = Vec::with_capacity(sequences.len());
    for (id, path) in sequences {
        let text = read_to_string_input(&path, "parse")?;
        let depth_dir = depth_root.map(|root| root.join(&id)).filter(|p| p.is_dir());
        let external = match scores_root {
            Some(root) => {
                let path = root.join(format!("{id}.scores"));
                if path.is_file() {
                    let text = read_to_string_input(&path, "fuse")?;
                    Some(ScoreVector::<f64>::from_text(&text).ok_or_else(|| {
                        CliError::Input(anyhow!(
                            "stage fuse: malformed score file {}",
                            path.display()
                        ))
                    })?)
                } else {
                    None
                }
            }
            None => None,
        };
        inputs.push((id, text, depth_dir, external));
    }

    let process = |(id, text, depth_dir, external): &(String, String, Option<PathBuf>, Option<ScoreVector<f64>>)| {
        run_sequence(id, text, depth_dir.as_deref(), external.as_ref(), ctx)
    };

    if jobs <= 1 {
        inputs.iter().map(process).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Processing(anyhow!(e).context("stage run: worker pool")))?;
        pool.install(|| inputs.par_iter().map(process).collect())
    }
}
