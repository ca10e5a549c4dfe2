//! Subcommand definitions and dispatch. Each stage command exposes exactly
//! one library operation with file I/O around it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use taction_core::depth::{
    compute_dmi, crop_roi, dmi_from_text, dmi_to_pgm, dmi_to_text, nearest_centroid_classify,
    normalize_dmi, DepthMotionImage,
};
use taction_core::fusion::{
    confusion_matrix, fuse_scores, fuse_scores_product, parse_records, top_prediction,
    trial_tally, FusionConfig,
};
use taction_core::gcn::{infer, load_weights, Layer, ModelWeights};
use taction_core::graph::{
    base_adjacency, k_hop_adjacency, window_adjacency, MultiScaleAdjacency, SkeletonGraph,
};
use taction_core::mat::dump_square;
use taction_core::numfmt::format_sig9;
use taction_core::score::ScoreVector;
use taction_core::skeleton::{
    parse_skeleton_file, remap_sequence, serialize_skeleton_file, SkeletonSequence,
};
use taction_core::tactile::{
    decode_frame, encode_frame, lookup_label, parse_registry, render_ascii, validate_glyph,
    NodeState, TactileGlyph, ValidationMode,
};

use crate::config::{FusionRule, PipelineConfig};
use crate::pipeline::{
    self, input_err, load_centroids, load_registry, preprocess, read_bytes_input,
    read_to_string_input, CliError, CliResult, RunContext, StageContext,
};

#[derive(Parser)]
#[command(
    name = "taction",
    version,
    about = "Action recognition from skeleton/depth captures with tactile glyph output"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Output style for table-like results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Parallel workers for `run`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Skeleton file operations.
    Skel {
        #[command(subcommand)]
        cmd: SkelCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Joint-graph construction and dumps.
    Graph {
        #[command(subcommand)]
        cmd: GraphCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Model weight inspection and inference.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Depth motion image operations.
    Dmi {
        #[command(subcommand)]
        cmd: DmiCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fuse two score files.
    Fuse {
        /// Skeleton-stream score file.
        #[arg(long)]
        skel: PathBuf,
        /// Depth-stream score file.
        #[arg(long)]
        depth: PathBuf,
        /// Skeleton-stream weight; configured value when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        /// Fusion rule; configured value when omitted.
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Trial evaluation over prediction records.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Tactile glyph tools.
    Glyph {
        #[command(subcommand)]
        cmd: GlyphCmd,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Full pipeline over a fixture set.
    Run {
        /// Skeleton input: one .skl file or a directory of them.
        #[arg(long)]
        skeleton: PathBuf,
        /// Depth root: per-sequence PGM stacks at `<root>/<sequence_id>/`.
        #[arg(long)]
        depth: Option<PathBuf>,
        /// External depth scores: `<root>/<sequence_id>.scores` files.
        #[arg(long)]
        depth_scores: Option<PathBuf>,
        /// Override the configured fusion alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Print an ASCII glyph preview per sequence to stderr.
        #[arg(long)]
        render: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum SkelCmd {
    /// Parse and validate; prints a summary, optionally re-emits canonically.
    Parse {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fill in the five v2-only joints of a 20-joint capture.
    Remap {
        #[arg(long)]
        input: PathBuf,
    },
    /// Remap, center, scale-normalize, and resample.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Override the configured temporal length.
        #[arg(long)]
        target_len: Option<usize>,
        /// Override the configured reference joint (1-based).
        #[arg(long)]
        ref_joint: Option<usize>,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Print node/edge counts for a graph.
    Build {
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Dump the base adjacency matrix.
    Dump {
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Dump the exact-distance k-hop adjacency.
    Khop {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Row-normalize the dumped matrix.
        #[arg(long)]
        normalize: bool,
    },
    /// Dump the τ-frame window block adjacency of a hop matrix.
    Window {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        edges: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Load, checksum, and dimension-check an MSW1 file.
    LoadCheck {
        #[arg(long)]
        model: PathBuf,
    },
    /// Preprocess a skeleton file and run the forward pass.
    Infer {
        #[arg(long)]
        input: PathBuf,
        /// Override the configured model path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DmiCmd {
    /// Accumulate a directory of PGM depth frames into a raw DMI.
    Compute {
        #[arg(long)]
        input: PathBuf,
    },
    /// Divide by the global maximum.
    Normalize {
        #[arg(long)]
        input: PathBuf,
    },
    /// Crop to the informative region.
    Crop {
        #[arg(long)]
        input: PathBuf,
        /// Override the configured threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score against per-class centroid images.
    Classify {
        #[arg(long)]
        input: PathBuf,
        /// Directory of `<class>.pgm` centroids; configured dir when omitted.
        #[arg(long)]
        centroids: Option<PathBuf>,
        #[arg(long)]
        temperature: Option<f64>,
        /// Square side both image and centroids are resized to.
        #[arg(long)]
        side: Option<usize>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Per-action scores with confusion sets.
    Tally {
        #[arg(long)]
        records: PathBuf,
        /// Class list file (one name per line); the built-in evaluation list
        /// when omitted.
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Dense true×predicted count matrix.
    Confusion {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GlyphCmd {
    /// Check glyph invariants; exits nonzero on violations.
    Validate {
        /// Nine node tokens, TGR1 style: F or two hex digits each.
        #[arg(long)]
        nodes: Option<String>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        class_id: Option<u32>,
        /// Allow any FULL count instead of exactly one.
        #[arg(long)]
        relaxed: bool,
    },
    /// Encode to the 22-byte device frame (hex to stdout, raw with --output).
    Encode {
        #[arg(long)]
        nodes: Option<String>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        class_id: Option<u32>,
    },
    /// Decode a device frame back to node tokens.
    Decode {
        /// 44 hex digits.
        #[arg(long)]
        hex: Option<String>,
        /// Raw 22-byte frame file.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// ASCII preview of a glyph.
    Render {
        #[arg(long)]
        nodes: Option<String>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        class_id: Option<u32>,
    },
    /// Load a registry file and report its contents.
    RegistryCheck {
        #[arg(long)]
        registry: PathBuf,
    },
}

fn write_output(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| {
            CliError::Input(anyhow!(e).context(format!("writing {}", path.display())))
        }),
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn write_output_bytes(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, bytes).map_err(|e| {
            CliError::Input(anyhow!(e).context(format!("writing {}", path.display())))
        }),
        None => input_err(anyhow!("binary output needs --output")),
    }
}

fn load_config(common: &CommonOpts) -> CliResult<PipelineConfig> {
    match &common.config {
        Some(path) => PipelineConfig::load(path).map_err(CliError::Input),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_skeleton(path: &Path) -> CliResult<SkeletonSequence<f32>> {
    let text = read_to_string_input(path, "parse")?;
    parse_skeleton_file(&text).input_stage("parse")
}

/// Graph from an edge-list file (`num_nodes`, then `i j` pairs, 0-based) or
/// the default 25-joint skeleton.
fn load_graph(edges: Option<&Path>) -> CliResult<SkeletonGraph> {
    let Some(path) = edges else {
        return Ok(SkeletonGraph::kinect_v2());
    };
    let text = read_to_string_input(path, "graph")?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let v: usize = lines
        .next()
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| CliError::Input(anyhow!("stage graph: bad node count line")))?;
    let mut pairs = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return input_err(anyhow!("stage graph: bad edge line {line:?}"));
        }
        let a: usize = fields[0]
            .parse()
            .map_err(|_| CliError::Input(anyhow!("stage graph: bad edge line {line:?}")))?;
        let b: usize = fields[1]
            .parse()
            .map_err(|_| CliError::Input(anyhow!("stage graph: bad edge line {line:?}")))?;
        pairs.push((a, b));
    }
    SkeletonGraph::new(v, &pairs).input_stage("graph")
}

/// DMI from a `.pgm` (raw 8-bit) or `.txt` (plain-text matrix) file.
fn load_dmi(path: &Path, config: &PipelineConfig) -> CliResult<DepthMotionImage<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("txt") => {
            let text = read_to_string_input(path, "dmi")?;
            dmi_from_text(&text).input_stage("dmi")
        }
        _ => {
            let bytes = read_bytes_input(path, "dmi")?;
            let frame =
                taction_core::depth::read_pgm_depth(&bytes, (config.depth_near_mm, config.depth_far_mm))
                    .input_stage("dmi")?;
            let values = frame.pixels.iter().map(|&p| f64::from(p)).collect();
            DepthMotionImage::new(frame.width, frame.height, values).input_stage("dmi")
        }
    }
}

fn write_dmi(img: &DepthMotionImage<f64>, output: Option<&Path>) -> CliResult<()> {
    match output.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("pgm") => write_output_bytes(output, &dmi_to_pgm(img)),
        _ => write_output(output, &dmi_to_text(img)),
    }
}

fn load_score_file(path: &Path) -> CliResult<ScoreVector<f64>> {
    let text = read_to_string_input(path, "fuse")?;
    ScoreVector::from_text(&text)
        .ok_or_else(|| CliError::Input(anyhow!("stage fuse: malformed score file {}", path.display())))
}

fn parse_nodes_arg(tokens: &str) -> CliResult<TactileGlyph> {
    let parts: Vec<&str> = tokens.split_whitespace().collect();
    if parts.len() != 9 {
        return input_err(anyhow!("stage glyph: expected 9 node tokens, got {}", parts.len()));
    }
    let mut glyph = TactileGlyph::default();
    for (slot, part) in glyph.nodes.iter_mut().zip(&parts) {
        *slot = if *part == "F" {
            NodeState::full()
        } else if part.len() == 2 && part.chars().all(|c| c.is_ascii_hexdigit()) {
            NodeState::with_segments(u8::from_str_radix(part, 16).unwrap())
        } else {
            return input_err(anyhow!("stage glyph: invalid node token {part:?}"));
        };
    }
    Ok(glyph)
}

fn resolve_glyph(
    nodes: Option<&str>,
    registry: Option<&Path>,
    class_id: Option<u32>,
    config: &PipelineConfig,
) -> CliResult<TactileGlyph> {
    match (nodes, class_id) {
        (Some(tokens), None) => parse_nodes_arg(tokens),
        (None, Some(id)) => {
            let reg = match registry {
                Some(path) => {
                    let text = read_to_string_input(path, "label")?;
                    parse_registry(&text).input_stage("label")?
                }
                None => load_registry(config)?,
            };
            lookup_label(id, &reg).input_stage("label").copied()
        }
        _ => input_err(anyhow!(
            "stage glyph: give either --nodes or --class-id (with an optional --registry)"
        )),
    }
}

fn glyph_tokens(g: &TactileGlyph) -> String {
    g.nodes
        .iter()
        .map(|n| {
            if n.full {
                "F".to_string()
            } else {
                format!("{:02X}", n.segments)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn eval_classes(path: Option<&Path>) -> CliResult<Vec<String>> {
    match path {
        Some(p) => {
            let text = read_to_string_input(p, "eval")?;
            let classes: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            if classes.is_empty() {
                return input_err(anyhow!("stage eval: empty class list {}", p.display()));
            }
            Ok(classes)
        }
        None => Ok(taction_core::actions::evaluation_classes()),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Skel { cmd, common } => run_skel(cmd, &common),
        Command::Graph { cmd, common } => run_graph(cmd, &common),
        Command::Model { cmd, common } => run_model(cmd, &common),
        Command::Dmi { cmd, common } => run_dmi(cmd, &common),
        Command::Fuse {
            skel,
            depth,
            alpha,
            rule,
            common,
        } => run_fuse(&skel, &depth, alpha, rule, &common),
        Command::Eval { cmd, common } => run_eval(cmd, &common),
        Command::Glyph { cmd, common } => run_glyph(cmd, &common),
        Command::Run {
            skeleton,
            depth,
            depth_scores,
            alpha,
            render,
            common,
        } => run_pipeline_cmd(
            &skeleton,
            depth.as_deref(),
            depth_scores.as_deref(),
            alpha,
            render,
            &common,
        ),
    }
}

fn run_skel(cmd: SkelCmd, common: &CommonOpts) -> CliResult<()> {
    let config = load_config(common)?;
    match cmd {
        SkelCmd::Parse { input } => {
            let seq = load_skeleton(&input)?;
            let summary = format!(
                "frames {}  joints {}  rate_hz {}\n",
                seq.len(),
                seq.num_joints(),
                format_sig9(seq.frame_rate_hz)
            );
            match &common.output {
                Some(_) => {
                    write_output(common.output.as_deref(), &serialize_skeleton_file(&seq))?;
                    print!("{summary}");
                }
                None => print!("{summary}"),
            }
            Ok(())
        }
        SkelCmd::Remap { input } => {
            let seq = load_skeleton(&input)?;
            let out = remap_sequence(&seq).processing_stage("remap")?;
            write_output(common.output.as_deref(), &serialize_skeleton_file(&out))
        }
        SkelCmd::Preprocess {
            input,
            target_len,
            ref_joint,
        } => {
            let mut config = config;
            if let Some(t) = target_len {
                config.temporal_len = t;
            }
            if let Some(r) = ref_joint {
                config.ref_joint = r;
            }
            config.validate().map_err(CliError::Input)?;
            let seq = load_skeleton(&input)?;
            let out = preprocess(&seq, &config)?;
            write_output(common.output.as_deref(), &serialize_skeleton_file(&out))
        }
    }
}

fn run_graph(cmd: GraphCmd, common: &CommonOpts) -> CliResult<()> {
    match cmd {
        GraphCmd::Build { edges } => {
            let graph = load_graph(edges.as_deref())?;
            let a = base_adjacency(&graph);
            let degrees: Vec<usize> = (0..graph.num_joints())
                .map(|i| a.row(i).iter().filter(|&&v| v != 0).count())
                .collect();
            let mut text = format!(
                "nodes {}\nedges {}\nmax_degree {}\n",
                graph.num_joints(),
                graph.edges().len(),
                degrees.iter().max().copied().unwrap_or(0)
            );
            for &(i, j) in graph.edges() {
                text.push_str(&format!("{i} {j}\n"));
            }
            write_output(common.output.as_deref(), &text)
        }
        GraphCmd::Dump { edges } => {
            let graph = load_graph(edges.as_deref())?;
            let dump = dump_square(&base_adjacency(&graph).to_real::<f64>());
            write_output(common.output.as_deref(), &dump)
        }
        GraphCmd::Khop { k, edges, normalize } => {
            let graph = load_graph(edges.as_deref())?;
            let hop = k_hop_adjacency(&base_adjacency(&graph), k);
            let dump = if normalize {
                dump_square(&taction_core::graph::normalize_adjacency(
                    &hop.to_real::<f64>(),
                    false,
                ))
            } else {
                dump_square(&hop.to_real::<f64>())
            };
            write_output(common.output.as_deref(), &dump)
        }
        GraphCmd::Window { k, tau, edges } => {
            let config = load_config(common)?;
            let tau = tau.unwrap_or(config.window_tau);
            let graph = load_graph(edges.as_deref())?;
            let hop = k_hop_adjacency(&base_adjacency(&graph), k);
            let window = window_adjacency(&hop, tau).input_stage("graph")?;
            write_output(common.output.as_deref(), &dump_square(&window.block.to_real::<f64>()))
        }
    }
}

fn model_summary(model: &ModelWeights<f64>) -> String {
    let mut out = String::new();
    let mut params = 0usize;
    for (i, layer) in model.layers.iter().enumerate() {
        let (kind, tau) = match layer {
            Layer::MsGcn(_) => ("ms-gcn", None),
            Layer::G3d(l) => ("g3d", Some(l.tau)),
        };
        let scales = layer.scale_weights().len();
        params += scales * layer.in_channels() * layer.out_channels() + layer.out_channels();
        out.push_str(&format!(
            "layer {i}: {kind}  c_in {}  c_out {}  scales {}{}\n",
            layer.in_channels(),
            layer.out_channels(),
            scales,
            tau.map(|t| format!("  tau {t}")).unwrap_or_default()
        ));
    }
    params += model.head.class_matrix.rows() * model.head.class_matrix.cols();
    out.push_str(&format!(
        "head: c {}  classes {}\nparameters {}\n",
        model.head.class_matrix.rows(),
        model.head.class_matrix.cols(),
        params
    ));
    out
}

fn run_model(cmd: ModelCmd, common: &CommonOpts) -> CliResult<()> {
    let config = load_config(common)?;
    match cmd {
        ModelCmd::LoadCheck { model } => {
            let bytes = read_bytes_input(&model, "model-load")?;
            let model: ModelWeights<f64> = load_weights(&bytes).input_stage("model-load")?;
            write_output(common.output.as_deref(), &model_summary(&model))
        }
        ModelCmd::Infer { input, model } => {
            let mut config = config;
            if let Some(m) = model {
                config.model_path = Some(m);
            }
            let model = pipeline::load_model(&config)?;
            let adjacency = MultiScaleAdjacency::build(&SkeletonGraph::kinect_v2(), config.scales_k);
            // the forward pass wants a preprocessed capture; chain
            // `skel preprocess` in front for raw recordings
            let seq = pipeline::widen(&load_skeleton(&input)?);
            let scores = infer(&seq, &model, &adjacency).processing_stage("infer")?;
            let best = top_prediction(&scores).processing_stage("infer")?;
            eprintln!(
                "top: {} ({})",
                scores.classes[best],
                format_sig9(scores.scores[best])
            );
            write_output(common.output.as_deref(), &scores.to_text())
        }
    }
}

fn run_dmi(cmd: DmiCmd, common: &CommonOpts) -> CliResult<()> {
    let config = load_config(common)?;
    match cmd {
        DmiCmd::Compute { input } => {
            let seq = pipeline::read_depth_dir(&input, &config)?;
            let dmi = compute_dmi::<f64>(&seq).processing_stage("dmi")?;
            write_dmi(&dmi, common.output.as_deref())
        }
        DmiCmd::Normalize { input } => {
            let img = load_dmi(&input, &config)?;
            write_dmi(&normalize_dmi(&img), common.output.as_deref())
        }
        DmiCmd::Crop { input, threshold } => {
            let img = load_dmi(&input, &config)?;
            let threshold = threshold.unwrap_or(config.roi_threshold);
            let cropped = crop_roi(&img, threshold).processing_stage("crop")?;
            if let Some(roi) = cropped.roi {
                eprintln!("roi: x {}..={}  y {}..={}", roi.x0, roi.x1, roi.y0, roi.y1);
            }
            write_dmi(&cropped, common.output.as_deref())
        }
        DmiCmd::Classify {
            input,
            centroids,
            temperature,
            side,
        } => {
            let img = load_dmi(&input, &config)?;
            let dir = centroids
                .or_else(|| config.centroids_dir.clone())
                .ok_or_else(|| {
                    CliError::Input(anyhow!("stage classify: no centroids directory given"))
                })?;
            let centroids = load_centroids(&dir, &config)?;
            let scores = nearest_centroid_classify(
                &img,
                &centroids,
                temperature.unwrap_or(config.centroid_temperature),
                Some(side.unwrap_or(config.centroid_side)),
            )
            .processing_stage("classify")?;
            let best = top_prediction(&scores).processing_stage("classify")?;
            eprintln!(
                "top: {} ({})",
                scores.classes[best],
                format_sig9(scores.scores[best])
            );
            write_output(common.output.as_deref(), &scores.to_text())
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Weighted,
    Product,
}

fn run_fuse(
    skel: &Path,
    depth: &Path,
    alpha: Option<f64>,
    rule: Option<RuleArg>,
    common: &CommonOpts,
) -> CliResult<()> {
    let config = load_config(common)?;
    let s = load_score_file(skel)?;
    let d = load_score_file(depth)?;
    let rule = rule
        .map(|r| match r {
            RuleArg::Weighted => FusionRule::Weighted,
            RuleArg::Product => FusionRule::Product,
        })
        .unwrap_or(config.fusion_rule);
    let fused = match rule {
        FusionRule::Weighted => {
            let cfg = FusionConfig::new(alpha.unwrap_or(config.fusion_alpha)).input_stage("fuse")?;
            fuse_scores(&s, &d, cfg).processing_stage("fuse")?
        }
        FusionRule::Product => fuse_scores_product(&s, &d).processing_stage("fuse")?,
    };
    let best = top_prediction(&fused).processing_stage("fuse")?;
    eprintln!(
        "top: {} ({})",
        fused.classes[best],
        format_sig9(fused.scores[best])
    );
    write_output(common.output.as_deref(), &fused.to_text())
}

fn run_eval(cmd: EvalCmd, common: &CommonOpts) -> CliResult<()> {
    match cmd {
        EvalCmd::Tally { records, classes } => {
            let text = read_to_string_input(&records, "eval")?;
            let records = parse_records(&text).input_stage("eval")?;
            let classes = eval_classes(classes.as_deref())?;
            let table = trial_tally(&records, &classes).processing_stage("eval")?;
            let rendered = match common.format {
                Format::Text => table.render(),
                Format::Tsv => table.to_tsv(),
            };
            write_output(common.output.as_deref(), &rendered)
        }
        EvalCmd::Confusion { records, classes } => {
            let text = read_to_string_input(&records, "eval")?;
            let records = parse_records(&text).input_stage("eval")?;
            let classes = eval_classes(classes.as_deref())?;
            let m = confusion_matrix(&records, &classes).processing_stage("eval")?;
            let mut out = String::new();
            match common.format {
                Format::Tsv => {
                    for (i, row) in m.iter().enumerate() {
                        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                        out.push_str(&format!("{}\t{}\n", classes[i], cells.join("\t")));
                    }
                }
                Format::Text => {
                    let width = classes.iter().map(|c| c.len()).max().unwrap_or(4);
                    for (i, row) in m.iter().enumerate() {
                        let cells: Vec<String> = row.iter().map(|c| format!("{c:>3}")).collect();
                        out.push_str(&format!(
                            "{:<width$}  {}\n",
                            classes[i],
                            cells.join(" ")
                        ));
                    }
                }
            }
            write_output(common.output.as_deref(), &out)
        }
    }
}

fn run_glyph(cmd: GlyphCmd, common: &CommonOpts) -> CliResult<()> {
    let config = load_config(common)?;
    match cmd {
        GlyphCmd::Validate {
            nodes,
            registry,
            class_id,
            relaxed,
        } => {
            let glyph = resolve_glyph(nodes.as_deref(), registry.as_deref(), class_id, &config)?;
            let mode = if relaxed {
                ValidationMode::Relaxed
            } else {
                ValidationMode::Registry
            };
            let report = validate_glyph(&glyph, mode);
            if report.is_valid() {
                write_output(common.output.as_deref(), "valid\n")
            } else {
                let mut out = String::new();
                for v in &report.violations {
                    out.push_str(&format!("violation: {v:?}\n"));
                }
                write_output(common.output.as_deref(), &out)?;
                Err(CliError::Processing(anyhow!(
                    "stage glyph: {} violation(s)",
                    report.violations.len()
                )))
            }
        }
        GlyphCmd::Encode {
            nodes,
            registry,
            class_id,
        } => {
            let glyph = resolve_glyph(nodes.as_deref(), registry.as_deref(), class_id, &config)?;
            let frame = encode_frame(&glyph);
            let hex: String = frame.iter().map(|b| format!("{b:02x}")).collect();
            if common.output.is_some() {
                write_output_bytes(common.output.as_deref(), &frame)?;
            }
            println!("{hex}");
            Ok(())
        }
        GlyphCmd::Decode { hex, input } => {
            let bytes: Vec<u8> = match (hex, input) {
                (Some(h), None) => {
                    let h = h.trim();
                    if h.len() % 2 != 0 || !h.chars().all(|c| c.is_ascii_hexdigit()) {
                        return input_err(anyhow!("stage glyph: malformed hex frame"));
                    }
                    (0..h.len())
                        .step_by(2)
                        .map(|i| u8::from_str_radix(&h[i..i + 2], 16).unwrap())
                        .collect()
                }
                (None, Some(path)) => read_bytes_input(&path, "glyph")?,
                _ => return input_err(anyhow!("stage glyph: give either --hex or --input")),
            };
            let glyph = decode_frame(&bytes).processing_stage("glyph")?;
            write_output(
                common.output.as_deref(),
                &format!("{}\n", glyph_tokens(&glyph)),
            )
        }
        GlyphCmd::Render {
            nodes,
            registry,
            class_id,
        } => {
            let glyph = resolve_glyph(nodes.as_deref(), registry.as_deref(), class_id, &config)?;
            write_output(common.output.as_deref(), &render_ascii(&glyph))
        }
        GlyphCmd::RegistryCheck { registry } => {
            let text = read_to_string_input(&registry, "registry-load")?;
            let reg = parse_registry(&text).input_stage("registry-load")?;
            let mut out = format!("entries {}\n", reg.len());
            for (id, name, _) in reg.iter() {
                out.push_str(&format!("{id}\t{name}\n"));
            }
            write_output(common.output.as_deref(), &out)
        }
    }
}

fn run_pipeline_cmd(
    skeleton: &Path,
    depth: Option<&Path>,
    depth_scores: Option<&Path>,
    alpha: Option<f64>,
    render: bool,
    common: &CommonOpts,
) -> CliResult<()> {
    let mut config = load_config(common)?;
    if let Some(a) = alpha {
        config.fusion_alpha = a;
    }
    config.validate().map_err(CliError::Input)?;
    let ctx = RunContext::new(config)?;
    let results = pipeline::run_all(skeleton, depth, depth_scores, common.jobs.max(1), &ctx)?;
    let mut out = String::new();
    for r in &results {
        out.push_str(&r.record_line());
        out.push('\n');
        if render {
            eprintln!("{} -> {} ({})", r.sequence_id, r.class_name, r.class_id);
            eprint!("{}", r.glyph_preview);
        }
    }
    write_output(common.output.as_deref(), &out)
}
