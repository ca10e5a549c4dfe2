//! Desk-scale toolkit turning recorded skeleton and depth sequences into
//! recognized action classes and tactile glyph frames for a touch-output
//! device.
//!
//! The pipeline: parse a skeleton capture, fill in missing Kinect v1 joints,
//! center/scale/resample it, run a multi-scale graph-convolution classifier
//! over the joint graph, optionally fuse with a depth-motion-image stream,
//! then map the winning action class to a tactile glyph and its 22-byte
//! device frame.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`);
//! concrete aliases for the common instantiations live at the crate root.
//! Every operation is a pure function over immutable inputs and safe to call
//! concurrently.

pub mod actions;
pub mod depth;
pub mod fusion;
pub mod gcn;
pub mod graph;
pub mod mat;
pub mod numfmt;
pub mod scalar;
pub mod score;
pub mod skeleton;
pub mod tactile;

pub use scalar::Scalar;

pub use skeleton::{JointId, Point3, SkeletonFrame, SkeletonSequence};

pub use graph::{MultiScaleAdjacency, SkeletonGraph, StGraph, WindowAdjacency};

pub use gcn::{FeatureTensor, ModelWeights};

pub use score::ScoreVector;

pub use depth::{DepthFrame, DepthMotionImage, DepthSequence};

pub use fusion::{ActionScoreTable, FusionConfig, TrialRecord};

pub use tactile::{LabelRegistry, NodeState, TactileGlyph};

/// `f32` instantiations, matching the wire formats' stored precision.
pub type SkeletonSequence32 = skeleton::SkeletonSequence<f32>;
pub type ModelWeights32 = gcn::ModelWeights<f32>;
pub type ScoreVector32 = score::ScoreVector<f32>;
pub type DepthMotionImage32 = depth::DepthMotionImage<f32>;

/// `f64` instantiations, used for pipeline compute.
pub type SkeletonSequence64 = skeleton::SkeletonSequence<f64>;
pub type ModelWeights64 = gcn::ModelWeights<f64>;
pub type ScoreVector64 = score::ScoreVector<f64>;
pub type DepthMotionImage64 = depth::DepthMotionImage<f64>;
