//! Multi-scale graph-convolution forward pass and the MSW1 weights format.
//!
//! Two layer kinds feed a pooling/softmax head:
//!
//! * spatial multi-scale layers — per frame, aggregate features over every
//!   hop scale with scale-specific weights and sum the results;
//! * windowed space-time layers — stack τ consecutive frames into one block
//!   graph so features flow across space and time in a single aggregation.
//!
//! Everything here is a pure function of its inputs; weights are immutable
//! after load and inference is deterministic.

use thiserror::Error;

use crate::graph::{normalize_adjacency, window_adjacency, MultiScaleAdjacency, WindowAdjacency};
use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::score::{softmax, ScoreVector};
use crate::skeleton::SkeletonSequence;

pub const MSW1_MAGIC: [u8; 4] = [0x4D, 0x53, 0x57, 0x31];
pub const MSW1_VERSION: u8 = 0x01;

const KIND_MS_GCN: u8 = 0x01;
const KIND_G3D: u8 = 0x02;
const KIND_HEAD: u8 = 0x03;

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("window length must be odd, got {0}")]
    EvenWindow(usize),
    #[error("bad magic bytes (not an MSW1 stream)")]
    BadMagic,
    #[error("unsupported MSW1 version {0}")]
    VersionUnsupported(u8),
    #[error("weight dimension chain broken: {0}")]
    DimChainBroken(String),
    #[error("truncated MSW1 stream")]
    TruncatedStream,
    #[error("MSW1 checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("non-finite value in feature tensor")]
    NonFinite,
}

/// Dense feature map over `frames × joints × channels`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    frames: usize,
    joints: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn new(frames: usize, joints: usize, channels: usize, data: Vec<T>) -> Result<Self, GcnError> {
        if data.len() != frames * joints * channels {
            return Err(GcnError::DimMismatch(format!(
                "buffer {} != {}×{}×{}",
                data.len(),
                frames,
                joints,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GcnError::NonFinite);
        }
        Ok(Self {
            frames,
            joints,
            channels,
            data,
        })
    }

    pub fn zeros(frames: usize, joints: usize, channels: usize) -> Self {
        Self {
            frames,
            joints,
            channels,
            data: vec![T::zero(); frames * joints * channels],
        }
    }

    /// Three channels (x, y, z) per joint per frame.
    pub fn from_sequence(seq: &SkeletonSequence<T>) -> Self {
        let mut data = Vec::with_capacity(seq.len() * seq.num_joints() * 3);
        for frame in &seq.frames {
            for p in &frame.joints {
                data.extend_from_slice(&[p.x, p.y, p.z]);
            }
        }
        Self {
            frames: seq.len(),
            joints: seq.num_joints(),
            channels: 3,
            data,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn at(&self, t: usize, v: usize, c: usize) -> T {
        self.data[(t * self.joints + v) * self.channels + c]
    }

    pub fn set(&mut self, t: usize, v: usize, c: usize, value: T) {
        self.data[(t * self.joints + v) * self.channels + c] = value;
    }

    /// The `joints × channels` slice of one frame as a matrix.
    pub fn frame_matrix(&self, t: usize) -> Mat<T> {
        let start = t * self.joints * self.channels;
        Mat::from_vec(
            self.joints,
            self.channels,
            self.data[start..start + self.joints * self.channels].to_vec(),
        )
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Weights of one spatial multi-scale layer: one `C_in × C_out` matrix per
/// scale plus a shared output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MsGcnLayer<T> {
    pub scale_weights: Vec<Mat<T>>,
    pub bias: Vec<T>,
}

/// Weights of one windowed space-time layer.
#[derive(Debug, Clone, PartialEq)]
pub struct G3dLayer<T> {
    pub tau: usize,
    pub scale_weights: Vec<Mat<T>>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    MsGcn(MsGcnLayer<T>),
    G3d(G3dLayer<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn scale_weights(&self) -> &[Mat<T>] {
        match self {
            Layer::MsGcn(l) => &l.scale_weights,
            Layer::G3d(l) => &l.scale_weights,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.scale_weights()[0].rows()
    }

    pub fn out_channels(&self) -> usize {
        self.scale_weights()[0].cols()
    }
}

/// Classification head: `C × num_classes` matrix applied after global mean
/// pooling, followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights<T> {
    pub class_matrix: Mat<T>,
}

/// A full loadable model: feature layers in order, then the head. Class
/// names are runtime metadata (the MSW1 stream carries none) and default to
/// `class_1..class_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T> {
    pub layers: Vec<Layer<T>>,
    pub head: HeadWeights<T>,
    pub class_names: Vec<String>,
}

impl<T: Scalar> ModelWeights<T> {
    pub fn new(layers: Vec<Layer<T>>, head: HeadWeights<T>) -> Result<Self, GcnError> {
        let n = head.class_matrix.cols();
        let class_names = (1..=n).map(|i| format!("class_{i}")).collect();
        let model = Self {
            layers,
            head,
            class_names,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        self.head.class_matrix.cols()
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self, GcnError> {
        if names.len() != self.num_classes() {
            return Err(GcnError::DimMismatch(format!(
                "{} class names for a {}-class head",
                names.len(),
                self.num_classes()
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    /// Check every per-layer shape and the channel chain through the head.
    pub fn validate(&self) -> Result<(), GcnError> {
        let mut channels: Option<usize> = None;
        for (idx, layer) in self.layers.iter().enumerate() {
            let weights = layer.scale_weights();
            if weights.is_empty() {
                return Err(GcnError::DimChainBroken(format!(
                    "layer {idx} declares no scales"
                )));
            }
            let (c_in, c_out) = (weights[0].rows(), weights[0].cols());
            if weights.iter().any(|w| w.rows() != c_in || w.cols() != c_out) {
                return Err(GcnError::DimChainBroken(format!(
                    "layer {idx}: scale matrices disagree on dimensions"
                )));
            }
            let bias = match layer {
                Layer::MsGcn(l) => &l.bias,
                Layer::G3d(l) => &l.bias,
            };
            if bias.len() != c_out {
                return Err(GcnError::DimChainBroken(format!(
                    "layer {idx}: bias length {} != C_out {c_out}",
                    bias.len()
                )));
            }
            if let Layer::G3d(l) = layer {
                if l.tau == 0 || l.tau.is_multiple_of(2) {
                    return Err(GcnError::EvenWindow(l.tau));
                }
            }
            if let Some(prev) = channels {
                if prev != c_in {
                    return Err(GcnError::DimChainBroken(format!(
                        "layer {idx} expects C_in {c_in}, previous layer emits {prev}"
                    )));
                }
            }
            channels = Some(c_out);
        }
        if let Some(prev) = channels {
            if prev != self.head.class_matrix.rows() {
                return Err(GcnError::DimChainBroken(format!(
                    "head expects C {}, last layer emits {prev}",
                    self.head.class_matrix.rows()
                )));
            }
        }
        if self.class_names.len() != self.num_classes() {
            return Err(GcnError::DimChainBroken(format!(
                "{} class names for a {}-class head",
                self.class_names.len(),
                self.num_classes()
            )));
        }
        Ok(())
    }
}

fn relu<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

fn check_scales<T: Scalar>(
    available: usize,
    layer_weights: &[Mat<T>],
    x_channels: usize,
) -> Result<(), GcnError> {
    if layer_weights.len() > available {
        return Err(GcnError::DimMismatch(format!(
            "layer uses {} scales, adjacency provides {available}",
            layer_weights.len()
        )));
    }
    if layer_weights[0].rows() != x_channels {
        return Err(GcnError::DimMismatch(format!(
            "input has {x_channels} channels, weights expect {}",
            layer_weights[0].rows()
        )));
    }
    Ok(())
}

/// Pre-activation spatial multi-scale aggregation:
/// per frame, `Σ_k norm(Ã_k) · X_t · W_k + bias`.
pub fn ms_gcn_layer_preact<T: Scalar>(
    x: &FeatureTensor<T>,
    adj: &MultiScaleAdjacency<T>,
    layer: &MsGcnLayer<T>,
) -> Result<FeatureTensor<T>, GcnError> {
    if x.joints() != adj.num_joints() {
        return Err(GcnError::DimMismatch(format!(
            "feature joints {} != adjacency joints {}",
            x.joints(),
            adj.num_joints()
        )));
    }
    check_scales(adj.num_scales(), &layer.scale_weights, x.channels())?;
    let c_out = layer.scale_weights[0].cols();
    let mut out = FeatureTensor::zeros(x.frames(), x.joints(), c_out);
    for t in 0..x.frames() {
        let xt = x.frame_matrix(t);
        let mut acc = Mat::zeros_real(x.joints(), c_out);
        for (norm_hop, w) in adj.normalized.iter().zip(&layer.scale_weights) {
            acc.add_assign(&norm_hop.matmul(&xt).matmul(w));
        }
        for v in 0..x.joints() {
            for c in 0..c_out {
                out.set(t, v, c, acc[(v, c)] + layer.bias[c]);
            }
        }
    }
    Ok(out)
}

/// Spatial multi-scale layer with ReLU activation.
pub fn ms_gcn_layer<T: Scalar>(
    x: &FeatureTensor<T>,
    adj: &MultiScaleAdjacency<T>,
    layer: &MsGcnLayer<T>,
) -> Result<FeatureTensor<T>, GcnError> {
    let mut out = ms_gcn_layer_preact(x, adj, layer)?;
    out.data = out.data.into_iter().map(relu).collect();
    Ok(out)
}

/// Windowed space-time layer. For each output frame, the τ surrounding
/// frames (zero-padded at the borders) are stacked into a `(τ·V) × C_in`
/// block; each scale's tiled window adjacency is row-normalized and applied,
/// the results summed, and the center-frame rows kept.
pub fn g3d_layer<T: Scalar>(
    x: &FeatureTensor<T>,
    windows: &[WindowAdjacency],
    layer: &G3dLayer<T>,
) -> Result<FeatureTensor<T>, GcnError> {
    let tau = layer.tau;
    if tau == 0 || tau.is_multiple_of(2) {
        return Err(GcnError::EvenWindow(tau));
    }
    if windows.iter().any(|w| w.tau != tau || w.num_joints() != x.joints()) {
        return Err(GcnError::DimMismatch(
            "window adjacency does not match layer τ and joint count".into(),
        ));
    }
    check_scales(windows.len(), &layer.scale_weights, x.channels())?;

    let v = x.joints();
    let c_in = x.channels();
    let c_out = layer.scale_weights[0].cols();
    let half = (tau - 1) / 2;
    let normalized: Vec<Mat<T>> = windows
        .iter()
        .map(|w| normalize_adjacency(&w.block.to_real::<T>(), false))
        .collect();

    let mut out = FeatureTensor::zeros(x.frames(), v, c_out);
    for t in 0..x.frames() {
        // stack frames t-half ..= t+half, zero frames outside the sequence
        let mut block = Mat::zeros_real(tau * v, c_in);
        for (w, offset) in (-(half as isize)..=half as isize).enumerate() {
            let src = t as isize + offset;
            if src < 0 || src >= x.frames() as isize {
                continue;
            }
            for i in 0..v {
                for c in 0..c_in {
                    block[(w * v + i, c)] = x.at(src as usize, i, c);
                }
            }
        }
        let mut acc = Mat::zeros_real(tau * v, c_out);
        for (norm_window, weight) in normalized.iter().zip(&layer.scale_weights) {
            acc.add_assign(&norm_window.matmul(&block).matmul(weight));
        }
        for i in 0..v {
            for c in 0..c_out {
                out.set(t, i, c, relu(acc[(half * v + i, c)] + layer.bias[c]));
            }
        }
    }
    Ok(out)
}

/// Mean-pool over frames and joints, multiply by the class matrix, softmax.
pub fn global_pool_and_classify<T: Scalar>(
    x: &FeatureTensor<T>,
    head: &HeadWeights<T>,
    class_names: &[String],
) -> Result<ScoreVector<T>, GcnError> {
    if x.channels() != head.class_matrix.rows() {
        return Err(GcnError::DimMismatch(format!(
            "features have {} channels, head expects {}",
            x.channels(),
            head.class_matrix.rows()
        )));
    }
    if class_names.len() != head.class_matrix.cols() {
        return Err(GcnError::DimMismatch(format!(
            "{} class names for a {}-class head",
            class_names.len(),
            head.class_matrix.cols()
        )));
    }
    let count = T::from_usize(x.frames() * x.joints()).unwrap();
    let mut pooled = vec![T::zero(); x.channels()];
    for t in 0..x.frames() {
        for v in 0..x.joints() {
            for (c, slot) in pooled.iter_mut().enumerate() {
                *slot += x.at(t, v, c);
            }
        }
    }
    for slot in &mut pooled {
        *slot /= count;
    }
    let mut logits = vec![T::zero(); head.class_matrix.cols()];
    for (c, &p) in pooled.iter().enumerate() {
        for (j, logit) in logits.iter_mut().enumerate() {
            *logit += p * head.class_matrix[(c, j)];
        }
    }
    Ok(ScoreVector::new(class_names.to_vec(), softmax(&logits)))
}

/// Full forward pass over a preprocessed sequence: every configured layer in
/// order, then the pooled softmax head.
pub fn infer<T: Scalar>(
    seq: &SkeletonSequence<T>,
    model: &ModelWeights<T>,
    adj: &MultiScaleAdjacency<T>,
) -> Result<ScoreVector<T>, GcnError> {
    let mut features = FeatureTensor::from_sequence(seq);
    for layer in &model.layers {
        features = match layer {
            Layer::MsGcn(l) => ms_gcn_layer(&features, adj, l)?,
            Layer::G3d(l) => {
                let windows = adj
                    .hops
                    .iter()
                    .take(l.scale_weights.len())
                    .map(|hop| window_adjacency(hop, l.tau))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| GcnError::DimMismatch(e.to_string()))?;
                g3d_layer(&features, &windows, l)?
            }
        };
    }
    global_pool_and_classify(&features, &model.head, &model.class_names)
}

// ---------------------------------------------------------------------------
// MSW1 binary format
// ---------------------------------------------------------------------------

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GcnError> {
        if self.pos + n > self.bytes.len() {
            return Err(GcnError::TruncatedStream);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, GcnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, GcnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, GcnError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_matrix<T: Scalar>(out: &mut Vec<u8>, m: &Mat<T>) {
    for &v in m.data() {
        out.extend_from_slice(&v.to_f32_wire().to_le_bytes());
    }
}

fn read_matrix<T: Scalar>(r: &mut Reader<'_>, rows: usize, cols: usize) -> Result<Mat<T>, GcnError> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(T::from_f32_exact(r.f32()?));
    }
    Ok(Mat::from_vec(rows, cols, data))
}

fn checksum(payload: &[u8]) -> u32 {
    payload
        .iter()
        .fold(0u32, |acc, &b| acc.wrapping_add(u32::from(b)))
}

/// Serialize to the MSW1 byte layout: magic, version, layer count, layer
/// records (kind, dims, scale count, τ for windowed layers, row-major f32
/// matrices, bias), then a trailing u32 checksum — the byte sum of
/// everything before it, mod 2³². All integers and floats little-endian.
pub fn save_weights<T: Scalar>(model: &ModelWeights<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MSW1_MAGIC);
    out.push(MSW1_VERSION);
    push_u32(&mut out, (model.layers.len() + 1) as u32);
    for layer in &model.layers {
        match layer {
            Layer::MsGcn(l) => {
                out.push(KIND_MS_GCN);
                push_u32(&mut out, l.scale_weights[0].rows() as u32);
                push_u32(&mut out, l.scale_weights[0].cols() as u32);
                push_u32(&mut out, l.scale_weights.len() as u32);
                for w in &l.scale_weights {
                    push_matrix(&mut out, w);
                }
                for &b in &l.bias {
                    out.extend_from_slice(&b.to_f32_wire().to_le_bytes());
                }
            }
            Layer::G3d(l) => {
                out.push(KIND_G3D);
                push_u32(&mut out, l.scale_weights[0].rows() as u32);
                push_u32(&mut out, l.scale_weights[0].cols() as u32);
                push_u32(&mut out, l.scale_weights.len() as u32);
                push_u32(&mut out, l.tau as u32);
                for w in &l.scale_weights {
                    push_matrix(&mut out, w);
                }
                for &b in &l.bias {
                    out.extend_from_slice(&b.to_f32_wire().to_le_bytes());
                }
            }
        }
    }
    out.push(KIND_HEAD);
    push_u32(&mut out, model.head.class_matrix.rows() as u32);
    push_u32(&mut out, model.head.class_matrix.cols() as u32);
    push_matrix(&mut out, &model.head.class_matrix);
    let sum = checksum(&out);
    push_u32(&mut out, sum);
    out
}

/// Parse and fully validate an MSW1 stream.
pub fn load_weights<T: Scalar>(bytes: &[u8]) -> Result<ModelWeights<T>, GcnError> {
    if bytes.len() < MSW1_MAGIC.len() {
        return Err(GcnError::TruncatedStream);
    }
    if bytes[..4] != MSW1_MAGIC {
        return Err(GcnError::BadMagic);
    }
    if bytes.len() < 4 + 1 + 4 + 4 {
        return Err(GcnError::TruncatedStream);
    }
    let version = bytes[4];
    if version != MSW1_VERSION {
        return Err(GcnError::VersionUnsupported(version));
    }
    let payload_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[payload_len..].try_into().unwrap());
    let computed = checksum(&bytes[..payload_len]);
    if stored != computed {
        return Err(GcnError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader {
        bytes: &bytes[..payload_len],
        pos: 5,
    };
    let num_records = r.u32()? as usize;
    if num_records == 0 {
        return Err(GcnError::DimChainBroken("no layer records".into()));
    }
    let mut layers = Vec::new();
    let mut head = None;
    for i in 0..num_records {
        let kind = r.u8()?;
        match kind {
            KIND_MS_GCN | KIND_G3D => {
                if head.is_some() {
                    return Err(GcnError::DimChainBroken(
                        "feature layer after the head record".into(),
                    ));
                }
                let c_in = r.u32()? as usize;
                let c_out = r.u32()? as usize;
                let scales = r.u32()? as usize;
                if scales == 0 || c_in == 0 || c_out == 0 {
                    return Err(GcnError::DimChainBroken(format!(
                        "record {i}: zero dimension"
                    )));
                }
                let tau = if kind == KIND_G3D { r.u32()? as usize } else { 0 };
                let mut scale_weights = Vec::with_capacity(scales);
                for _ in 0..scales {
                    scale_weights.push(read_matrix(&mut r, c_in, c_out)?);
                }
                let mut bias = Vec::with_capacity(c_out);
                for _ in 0..c_out {
                    bias.push(T::from_f32_exact(r.f32()?));
                }
                layers.push(if kind == KIND_MS_GCN {
                    Layer::MsGcn(MsGcnLayer {
                        scale_weights,
                        bias,
                    })
                } else {
                    Layer::G3d(G3dLayer {
                        tau,
                        scale_weights,
                        bias,
                    })
                });
            }
            KIND_HEAD => {
                if head.is_some() {
                    return Err(GcnError::DimChainBroken("duplicate head record".into()));
                }
                let c = r.u32()? as usize;
                let classes = r.u32()? as usize;
                if c == 0 || classes == 0 {
                    return Err(GcnError::DimChainBroken("head with zero dimension".into()));
                }
                head = Some(HeadWeights {
                    class_matrix: read_matrix(&mut r, c, classes)?,
                });
            }
            other => {
                return Err(GcnError::DimChainBroken(format!(
                    "unknown layer kind {other:#04x}"
                )));
            }
        }
    }
    if r.pos != payload_len {
        return Err(GcnError::DimChainBroken(
            "trailing bytes after the declared records".into(),
        ));
    }
    let head = head.ok_or_else(|| GcnError::DimChainBroken("missing head record".into()))?;
    ModelWeights::new(layers, head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SkeletonGraph;
    use crate::skeleton::{Point3, SkeletonFrame};

    fn tiny_adj(v: usize, edges: &[(usize, usize)], k: usize) -> MultiScaleAdjacency<f64> {
        MultiScaleAdjacency::build(&SkeletonGraph::new(v, edges).unwrap(), k)
    }

    fn tensor(frames: usize, joints: usize, channels: usize, seed: u64) -> FeatureTensor<f64> {
        // small deterministic LCG so unit tests need no RNG dependency
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let data = (0..frames * joints * channels).map(|_| next()).collect();
        FeatureTensor::new(frames, joints, channels, data).unwrap()
    }

    fn naive_ms_gcn(
        x: &FeatureTensor<f64>,
        adj: &MultiScaleAdjacency<f64>,
        layer: &MsGcnLayer<f64>,
        activate: bool,
    ) -> FeatureTensor<f64> {
        let (frames, v, c_in) = (x.frames(), x.joints(), x.channels());
        let c_out = layer.scale_weights[0].cols();
        let mut out = FeatureTensor::zeros(frames, v, c_out);
        for t in 0..frames {
            for i in 0..v {
                for o in 0..c_out {
                    let mut acc = layer.bias[o];
                    for (k, w) in layer.scale_weights.iter().enumerate() {
                        for j in 0..v {
                            for c in 0..c_in {
                                acc += adj.normalized[k][(i, j)] * x.at(t, j, c) * w[(c, o)];
                            }
                        }
                    }
                    out.set(t, i, o, if activate { acc.max(0.0) } else { acc });
                }
            }
        }
        out
    }

    fn layer_2x2(scales: usize, bias: f64) -> MsGcnLayer<f64> {
        let mats = (0..scales)
            .map(|k| {
                Mat::from_vec(
                    2,
                    2,
                    vec![0.5 + k as f64, -0.25, 0.75, 0.1 * (k as f64 + 1.0)],
                )
            })
            .collect();
        MsGcnLayer {
            scale_weights: mats,
            bias: vec![bias; 2],
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let adj = tiny_adj(3, &[(0, 1), (1, 2)], 1);
        let x = tensor(2, 3, 2, 7);
        let layer = MsGcnLayer {
            scale_weights: vec![Mat::zeros_real(2, 2); 2],
            bias: vec![0.0; 2],
        };
        let y = ms_gcn_layer(&x, &adj, &layer).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_scale_is_per_frame_linear_map() {
        let adj = tiny_adj(3, &[(0, 1), (1, 2)], 0); // only scale 0 = identity
        let x = tensor(2, 3, 2, 11);
        let w = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let layer = MsGcnLayer {
            scale_weights: vec![w.clone()],
            bias: vec![0.0; 2],
        };
        let y = ms_gcn_layer(&x, &adj, &layer).unwrap();
        for t in 0..2 {
            let want = x.frame_matrix(t).matmul(&w);
            for v in 0..3 {
                for c in 0..2 {
                    assert!((y.at(t, v, c) - want[(v, c)].max(0.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ms_gcn_matches_naive_loops() {
        let adj = tiny_adj(3, &[(0, 1), (1, 2)], 1);
        let x = tensor(2, 3, 2, 23);
        let layer = layer_2x2(2, 0.125);
        let fast = ms_gcn_layer(&x, &adj, &layer).unwrap();
        let slow = naive_ms_gcn(&x, &adj, &layer, true);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn preact_is_linear_in_input() {
        let adj = tiny_adj(3, &[(0, 1), (1, 2)], 1);
        let x = tensor(2, 3, 2, 5);
        let layer = layer_2x2(2, 0.0);
        let y1 = ms_gcn_layer_preact(&x, &adj, &layer).unwrap();
        let scaled = FeatureTensor::new(
            2,
            3,
            2,
            x.data().iter().map(|&v| v * 3.5).collect(),
        )
        .unwrap();
        let y2 = ms_gcn_layer_preact(&scaled, &adj, &layer).unwrap();
        for (a, b) in y1.data().iter().zip(y2.data()) {
            assert!((a * 3.5 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn g3d_tau_one_degenerates_to_ms_gcn() {
        let adj = tiny_adj(3, &[(0, 1), (1, 2)], 1);
        let x = tensor(3, 3, 2, 31);
        let shared = layer_2x2(2, 0.2);
        let g3d = G3dLayer {
            tau: 1,
            scale_weights: shared.scale_weights.clone(),
            bias: shared.bias.clone(),
        };
        let windows: Vec<WindowAdjacency> = adj
            .hops
            .iter()
            .take(2)
            .map(|h| window_adjacency(h, 1).unwrap())
            .collect();
        let a = g3d_layer(&x, &windows, &g3d).unwrap();
        let b = ms_gcn_layer(&x, &adj, &shared).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn g3d_zero_input_is_zero() {
        let adj = tiny_adj(2, &[(0, 1)], 1);
        let x = FeatureTensor::<f64>::zeros(4, 2, 2);
        let layer = G3dLayer {
            tau: 3,
            scale_weights: layer_2x2(2, 0.0).scale_weights,
            bias: vec![0.0; 2],
        };
        let windows: Vec<WindowAdjacency> = adj
            .hops
            .iter()
            .take(2)
            .map(|h| window_adjacency(h, 3).unwrap())
            .collect();
        let y = g3d_layer(&x, &windows, &layer).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn g3d_matches_naive_stacking() {
        let adj = tiny_adj(2, &[(0, 1)], 1);
        let x = tensor(3, 2, 2, 43);
        let layer = G3dLayer {
            tau: 3,
            scale_weights: layer_2x2(2, 0.0).scale_weights,
            bias: vec![0.05, -0.05],
        };
        let windows: Vec<WindowAdjacency> = adj
            .hops
            .iter()
            .take(2)
            .map(|h| window_adjacency(h, 3).unwrap())
            .collect();
        let fast = g3d_layer(&x, &windows, &layer).unwrap();

        // naive: explicit padding, full block product, center extraction
        let (v, c_in, c_out, tau, half) = (2usize, 2usize, 2usize, 3usize, 1usize);
        let norms: Vec<Mat<f64>> = windows
            .iter()
            .map(|w| normalize_adjacency(&w.block.to_real::<f64>(), false))
            .collect();
        for t in 0..3 {
            let mut block = Mat::zeros_real(tau * v, c_in);
            for w in 0..tau {
                let src = t as isize + w as isize - half as isize;
                if src < 0 || src >= 3 {
                    continue;
                }
                for i in 0..v {
                    for c in 0..c_in {
                        block[(w * v + i, c)] = x.at(src as usize, i, c);
                    }
                }
            }
            for i in 0..v {
                for o in 0..c_out {
                    let mut acc = layer.bias[o];
                    for (k, w) in layer.scale_weights.iter().enumerate() {
                        for r in 0..tau * v {
                            for c in 0..c_in {
                                acc += norms[k][(half * v + i, r)] * block[(r, c)] * w[(c, o)];
                            }
                        }
                    }
                    assert!((fast.at(t, i, o) - acc.max(0.0)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn head_softmax_examples() {
        let head = HeadWeights {
            class_matrix: Mat::from_vec(1, 2, vec![0.0, 0.0]),
        };
        let names = vec!["a".to_string(), "b".to_string()];
        let x = tensor(2, 3, 1, 3);
        let sv = global_pool_and_classify(&x, &head, &names).unwrap();
        assert!((sv.scores[0] - 0.5).abs() < 1e-12);
        assert!(sv.is_distribution(1e-6));

        // logits [1, 2] via a 1-channel all-ones pooled feature
        let head = HeadWeights {
            class_matrix: Mat::from_vec(1, 2, vec![1.0, 2.0]),
        };
        let ones = FeatureTensor::new(1, 1, 1, vec![1.0]).unwrap();
        let sv = global_pool_and_classify(&ones, &head, &names).unwrap();
        let e1 = 1.0f64.exp();
        let e2 = 2.0f64.exp();
        assert!((sv.scores[0] - e1 / (e1 + e2)).abs() < 1e-12);
        assert!((sv.scores[1] - e2 / (e1 + e2)).abs() < 1e-12);
        assert!(sv.scores.iter().all(|&s| s > 0.0));
    }

    fn toy_model() -> ModelWeights<f64> {
        // dyadic weights are exact in both f32 and f64, so the MSW1
        // round-trip compares equal at full precision
        let ms = MsGcnLayer {
            scale_weights: vec![
                Mat::from_vec(3, 2, vec![0.25, -0.125, 0.5, 0.375, -0.25, 0.625]),
                Mat::from_vec(3, 2, vec![0.125, 0.125, -0.375, 0.25, 0.5, -0.5]),
            ],
            bias: vec![0.015625, -0.03125],
        };
        let g3d = G3dLayer {
            tau: 3,
            scale_weights: vec![
                Mat::from_vec(2, 2, vec![0.375, 0.25, -0.125, 0.5]),
                Mat::from_vec(2, 2, vec![-0.25, 0.5, 0.375, 0.125]),
            ],
            bias: vec![0.0, 0.0625],
        };
        let head = HeadWeights {
            class_matrix: Mat::from_vec(2, 3, vec![0.5, -0.5, 0.25, 0.125, 0.875, -0.375]),
        };
        ModelWeights::new(vec![Layer::MsGcn(ms), Layer::G3d(g3d)], head).unwrap()
    }

    fn toy_sequence(frames: usize, joints: usize) -> SkeletonSequence<f64> {
        let fs = (0..frames)
            .map(|t| {
                SkeletonFrame::new(
                    (0..joints)
                        .map(|j| {
                            Point3::new(
                                (t as f64 * 0.3 + j as f64).sin(),
                                (j as f64 * 0.7).cos(),
                                0.1 * t as f64,
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        SkeletonSequence::new(fs, 30.0)
    }

    #[test]
    fn infer_is_deterministic_with_right_shape() {
        let model = toy_model();
        let adj = tiny_adj(4, &[(0, 1), (1, 2), (2, 3)], 1);
        let seq = toy_sequence(5, 4);
        let a = infer(&seq, &model, &adj).unwrap();
        let b = infer(&seq, &model, &adj).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.is_distribution(1e-6));
    }

    #[test]
    fn msw1_roundtrip_and_guards() {
        let model = toy_model();
        let bytes = save_weights(&model);
        let back: ModelWeights<f64> = load_weights(&bytes).unwrap();
        assert_eq!(back.layers, model.layers);
        assert_eq!(back.head, model.head);
        assert_eq!(save_weights(&back), bytes);

        assert!(matches!(
            load_weights::<f64>(&bytes[..bytes.len() - 9]).unwrap_err(),
            GcnError::TruncatedStream | GcnError::ChecksumMismatch { .. }
        ));
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            load_weights::<f64>(&bad_magic).unwrap_err(),
            GcnError::BadMagic
        ));
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            load_weights::<f64>(&bad_version).unwrap_err(),
            GcnError::VersionUnsupported(9)
        ));
        let mut corrupt = bytes.clone();
        corrupt[10] ^= 0xff;
        assert!(matches!(
            load_weights::<f64>(&corrupt).unwrap_err(),
            GcnError::ChecksumMismatch { .. }
        ));
    }

    #[test]
    fn scale_count_must_match_matrices() {
        // a layer claiming 3 scales but holding 2 matrices fails validation
        let layer = MsGcnLayer {
            scale_weights: vec![Mat::zeros_real(2, 2); 2],
            bias: vec![0.0; 2],
        };
        let head = HeadWeights {
            class_matrix: Mat::zeros_real(2, 2),
        };
        let model = ModelWeights::new(vec![Layer::MsGcn(layer)], head).unwrap();
        let mut bytes = save_weights(&model);
        // bump the declared scale count from 2 to 3; stream then truncates
        let scales_at = 4 + 1 + 4 + 1 + 4 + 4;
        bytes[scales_at] = 3;
        let len = bytes.len();
        let sum = checksum(&bytes[..len - 4]);
        bytes[len - 4..].copy_from_slice(&sum.to_le_bytes());
        assert!(matches!(
            load_weights::<f64>(&bytes).unwrap_err(),
            GcnError::TruncatedStream | GcnError::DimChainBroken(_)
        ));

        // chain break across layers
        let l1 = Layer::MsGcn(MsGcnLayer {
            scale_weights: vec![Mat::zeros_real(3, 2)],
            bias: vec![0.0; 2],
        });
        let l2 = Layer::MsGcn(MsGcnLayer {
            scale_weights: vec![Mat::zeros_real(4, 2)],
            bias: vec![0.0; 2],
        });
        let head = HeadWeights {
            class_matrix: Mat::zeros_real(2, 2),
        };
        assert!(matches!(
            ModelWeights::new(vec![l1, l2], head).unwrap_err(),
            GcnError::DimChainBroken(_)
        ));
    }
}
