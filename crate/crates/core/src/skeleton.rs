//! Skeleton sequence model, SKL1 text parsing, Kinect v1→v2 joint fill-in,
//! and sequence preprocessing (translation, scale normalization, temporal
//! resampling).
//!
//! Joints follow the 25-joint Kinect v2 numbering (1-based). A Kinect v1
//! capture carries only the first 20 joints; [`remap_v1_to_v2`] fills the
//! remaining five by copying neighboring joints and marks them invalid so
//! downstream consumers can tell measured data from copies.

use std::fmt;

use thiserror::Error;

use crate::numfmt::format_sig9;
use crate::scalar::Scalar;

/// Joint count of a Kinect v1 capture.
pub const V1_JOINTS: usize = 20;
/// Joint count of the full skeleton.
pub const V2_JOINTS: usize = 25;

/// Fill-in table for the five joints a v1 sensor does not provide:
/// `(target, source)` in 1-based joint numbering.
pub const V1_FILL_TABLE: [(usize, usize); 5] = [(21, 3), (22, 7), (23, 7), (24, 11), (25, 11)];

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("malformed SKL1 header: {0}")]
    MalformedHeader(String),
    #[error("frame count mismatch: header says {expected}, stream holds {actual}")]
    FrameCountMismatch { expected: usize, actual: usize },
    #[error("non-finite coordinate at line {line}")]
    NonFiniteCoordinate { line: usize },
    #[error("unsupported joint count {0} (expected 20 or 25)")]
    UnsupportedJointCount(usize),
    #[error("malformed joint line {line}: {reason}")]
    MalformedJointLine { line: usize, reason: String },
    #[error("frame has {0} joints, remap needs exactly 20")]
    WrongJointCount(usize),
    #[error("empty sequence")]
    EmptySequence,
    #[error("reference joint {0} out of range for this sequence")]
    JointOutOfRange(usize),
    #[error("degenerate reference bone (length {0} below 1e-6)")]
    DegenerateBone(f64),
    #[error("target length must be positive")]
    ZeroTargetLength,
}

/// 1-based joint index in the 25-joint numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointId(usize);

impl JointId {
    /// Accepts only 1..=25.
    pub fn new(index: usize) -> Option<Self> {
        (1..=V2_JOINTS).contains(&index).then_some(Self(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// Zero-based position for array access.
    pub fn slot(self) -> usize {
        self.0 - 1
    }

    /// True for the five joints only a v2 sensor measures.
    pub fn is_v2_only(self) -> bool {
        self.0 > V1_JOINTS
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 3D joint position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn distance(self, rhs: Self) -> T {
        let d = self - rhs;
        (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Scalar> std::ops::Sub for Point3<T> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// One frame of joint positions plus per-joint validity flags
/// (tracked vs. filled-in).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame<T> {
    pub joints: Vec<Point3<T>>,
    pub valid: Vec<bool>,
}

impl<T: Scalar> SkeletonFrame<T> {
    pub fn new(joints: Vec<Point3<T>>) -> Self {
        let valid = vec![true; joints.len()];
        Self { joints, valid }
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }
}

/// An ordered capture of skeleton frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence<T> {
    pub frames: Vec<SkeletonFrame<T>>,
    pub frame_rate_hz: T,
    pub subject_id: Option<u32>,
    pub label: Option<u32>,
}

impl<T: Scalar> SkeletonSequence<T> {
    pub fn new(frames: Vec<SkeletonFrame<T>>, frame_rate_hz: T) -> Self {
        Self {
            frames,
            frame_rate_hz,
            subject_id: None,
            label: None,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn num_joints(&self) -> usize {
        self.frames.first().map_or(0, SkeletonFrame::num_joints)
    }
}

/// Parse the SKL1 text format.
///
/// Grammar: line 1 is `skl <version> <num_frames> <num_joints> <frame_rate_hz>`,
/// followed by `num_frames` blocks of `num_joints` lines `x y z [v]` where the
/// validity flag `v` is 0 or 1 and defaults to 1. Lines starting with `#` are
/// comments; blank lines are skipped.
pub fn parse_skeleton_file<T: Scalar>(text: &str) -> Result<SkeletonSequence<T>, SkeletonError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (_, header) = lines
        .next()
        .ok_or_else(|| SkeletonError::MalformedHeader("empty stream".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "skl" {
        return Err(SkeletonError::MalformedHeader(format!(
            "expected `skl <version> <frames> <joints> <rate>`, got {header:?}"
        )));
    }
    let version: u32 = fields[1]
        .parse()
        .map_err(|_| SkeletonError::MalformedHeader("bad version field".into()))?;
    if version != 1 {
        return Err(SkeletonError::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let num_frames: usize = fields[2]
        .parse()
        .map_err(|_| SkeletonError::MalformedHeader("bad frame count field".into()))?;
    if num_frames == 0 {
        return Err(SkeletonError::MalformedHeader(
            "zero frames (empty sequences are rejected)".into(),
        ));
    }
    let num_joints: usize = fields[3]
        .parse()
        .map_err(|_| SkeletonError::MalformedHeader("bad joint count field".into()))?;
    if num_joints != V1_JOINTS && num_joints != V2_JOINTS {
        return Err(SkeletonError::UnsupportedJointCount(num_joints));
    }
    let frame_rate: T = fields[4]
        .parse()
        .map_err(|_| SkeletonError::MalformedHeader("bad frame rate field".into()))?;
    if !frame_rate.is_finite() || frame_rate <= T::zero() {
        return Err(SkeletonError::MalformedHeader(
            "frame rate must be positive and finite".into(),
        ));
    }

    let mut frames = Vec::with_capacity(num_frames);
    'outer: for _ in 0..num_frames {
        let mut joints = Vec::with_capacity(num_joints);
        let mut valid = Vec::with_capacity(num_joints);
        for _ in 0..num_joints {
            let Some((line_no, line)) = lines.next() else {
                break 'outer;
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 && toks.len() != 4 {
                return Err(SkeletonError::MalformedJointLine {
                    line: line_no,
                    reason: format!("expected 3 or 4 fields, got {}", toks.len()),
                });
            }
            let mut coord = [T::zero(); 3];
            for (slot, tok) in coord.iter_mut().zip(&toks[..3]) {
                *slot = tok.parse().map_err(|_| SkeletonError::MalformedJointLine {
                    line: line_no,
                    reason: format!("bad coordinate {tok:?}"),
                })?;
            }
            let point = Point3::new(coord[0], coord[1], coord[2]);
            if !point.is_finite() {
                return Err(SkeletonError::NonFiniteCoordinate { line: line_no });
            }
            let v = match toks.get(3) {
                None => true,
                Some(&"1") => true,
                Some(&"0") => false,
                Some(other) => {
                    return Err(SkeletonError::MalformedJointLine {
                        line: line_no,
                        reason: format!("validity flag must be 0 or 1, got {other:?}"),
                    })
                }
            };
            joints.push(point);
            valid.push(v);
        }
        frames.push(SkeletonFrame { joints, valid });
    }

    if frames.len() != num_frames {
        return Err(SkeletonError::FrameCountMismatch {
            expected: num_frames,
            actual: frames.len(),
        });
    }
    if lines.next().is_some() {
        return Err(SkeletonError::FrameCountMismatch {
            expected: num_frames,
            actual: num_frames + 1,
        });
    }
    Ok(SkeletonSequence::new(frames, frame_rate))
}

/// Emit the canonical SKL1 text for a sequence: 9-significant-digit decimals,
/// validity flag written only when false.
pub fn serialize_skeleton_file<T: Scalar>(seq: &SkeletonSequence<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "skl 1 {} {} {}\n",
        seq.len(),
        seq.num_joints(),
        format_sig9(seq.frame_rate_hz)
    ));
    for frame in &seq.frames {
        for (p, &v) in frame.joints.iter().zip(&frame.valid) {
            out.push_str(&format_sig9(p.x));
            out.push(' ');
            out.push_str(&format_sig9(p.y));
            out.push(' ');
            out.push_str(&format_sig9(p.z));
            if !v {
                out.push_str(" 0");
            }
            out.push('\n');
        }
    }
    out
}

/// Expand a 20-joint Kinect v1 frame to the 25-joint layout.
///
/// Joints 1..20 are copied unchanged; the five v2-only joints are filled from
/// [`V1_FILL_TABLE`] and flagged invalid.
pub fn remap_v1_to_v2<T: Scalar>(frame: &SkeletonFrame<T>) -> Result<SkeletonFrame<T>, SkeletonError> {
    if frame.num_joints() != V1_JOINTS {
        return Err(SkeletonError::WrongJointCount(frame.num_joints()));
    }
    let mut joints = frame.joints.clone();
    let mut valid = frame.valid.clone();
    joints.resize(V2_JOINTS, Point3::default());
    valid.resize(V2_JOINTS, false);
    for (target, source) in V1_FILL_TABLE {
        joints[target - 1] = frame.joints[source - 1];
        valid[target - 1] = false;
    }
    Ok(SkeletonFrame { joints, valid })
}

/// Apply [`remap_v1_to_v2`] to every frame; 25-joint sequences pass through.
pub fn remap_sequence<T: Scalar>(
    seq: &SkeletonSequence<T>,
) -> Result<SkeletonSequence<T>, SkeletonError> {
    if seq.is_empty() {
        return Err(SkeletonError::EmptySequence);
    }
    if seq.num_joints() == V2_JOINTS {
        return Ok(seq.clone());
    }
    let frames = seq
        .frames
        .iter()
        .map(remap_v1_to_v2)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = SkeletonSequence::new(frames, seq.frame_rate_hz);
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    Ok(out)
}

/// Translate the whole sequence so `ref_joint` of the first frame lands at
/// the origin. One global shift preserves the motion trajectory.
pub fn center_translate<T: Scalar>(
    seq: &SkeletonSequence<T>,
    ref_joint: JointId,
) -> Result<SkeletonSequence<T>, SkeletonError> {
    if seq.is_empty() {
        return Err(SkeletonError::EmptySequence);
    }
    if ref_joint.slot() >= seq.num_joints() {
        return Err(SkeletonError::JointOutOfRange(ref_joint.index()));
    }
    let origin = seq.frames[0].joints[ref_joint.slot()];
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for p in &mut frame.joints {
            *p = *p - origin;
        }
    }
    Ok(out)
}

/// Joints of the reference bone used by [`normalize_scale`]: spine base to
/// spine mid (1-based).
pub const REFERENCE_BONE: (usize, usize) = (1, 2);

/// Divide every coordinate by the first frame's reference-bone length, making
/// that bone unit length.
pub fn normalize_scale<T: Scalar>(
    seq: &SkeletonSequence<T>,
) -> Result<SkeletonSequence<T>, SkeletonError> {
    if seq.is_empty() {
        return Err(SkeletonError::EmptySequence);
    }
    let (a, b) = REFERENCE_BONE;
    if b > seq.num_joints() {
        return Err(SkeletonError::JointOutOfRange(b));
    }
    let first = &seq.frames[0];
    let len = first.joints[a - 1].distance(first.joints[b - 1]);
    if len < T::from_f64(1e-6).unwrap() {
        return Err(SkeletonError::DegenerateBone(len.to_f64().unwrap_or(0.0)));
    }
    let inv = T::one() / len;
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for p in &mut frame.joints {
            *p = p.scale(inv);
        }
    }
    Ok(out)
}

/// Indices selected by [`resample_temporal`]: `i mod n` when growing
/// (loop padding), `round(i*n/m)` clipped to the last frame when shrinking.
pub fn resample_schedule(current: usize, target: usize) -> Vec<usize> {
    (0..target)
        .map(|i| {
            if target > current {
                i % current
            } else {
                // round(i*current/target), half away from zero, in integers
                ((2 * i * current + target) / (2 * target)).min(current - 1)
            }
        })
        .collect()
}

/// Resample to exactly `target_len` frames: loop-pad shorter sequences,
/// uniformly subsample longer ones by index rounding.
pub fn resample_temporal<T: Scalar>(
    seq: &SkeletonSequence<T>,
    target_len: usize,
) -> Result<SkeletonSequence<T>, SkeletonError> {
    if seq.is_empty() {
        return Err(SkeletonError::EmptySequence);
    }
    if target_len == 0 {
        return Err(SkeletonError::ZeroTargetLength);
    }
    let frames = resample_schedule(seq.len(), target_len)
        .into_iter()
        .map(|i| seq.frames[i].clone())
        .collect();
    let mut out = SkeletonSequence::new(frames, seq.frame_rate_hz);
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    Ok(out)
}
