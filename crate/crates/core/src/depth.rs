//! Depth-frame stacks, the Depth Motion Image descriptor, and a
//! nearest-centroid baseline classifier standing in for a CNN stream.
//!
//! A DMI summarizes a depth clip in one image: each pixel is 255 minus the
//! temporal minimum depth at that position, so close-passing body parts
//! leave bright traces. The raw image is normalized by its global maximum
//! and cropped to the informative region before classification.

use thiserror::Error;

use crate::numfmt::format_exact;
use crate::scalar::Scalar;
use crate::score::{softmax, ScoreVector};

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("empty depth sequence")]
    EmptySequence,
    #[error("frame {index} is {got_w}×{got_h}, sequence is {want_w}×{want_h}")]
    DimMismatchAcrossFrames {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("no pixel above threshold {0}")]
    AllBelowThreshold(f64),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no centroids provided")]
    NoCentroids,
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error("depth range mapping needs near < far")]
    BadDepthRange,
}

/// Default raw-depth window mapped onto 0..255, in millimeters.
pub const DEFAULT_DEPTH_RANGE_MM: (f64, f64) = (500.0, 4500.0);

/// One 8-bit quantized depth frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, DepthError> {
        if pixels.len() != width * height {
            return Err(DepthError::DimMismatch(format!(
                "{} pixels for {width}×{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// An ordered stack of same-size depth frames covering `[start_index,
/// start_index + len)` of the source clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthSequence {
    pub frames: Vec<DepthFrame>,
    pub start_index: usize,
}

impl DepthSequence {
    pub fn new(frames: Vec<DepthFrame>, start_index: usize) -> Result<Self, DepthError> {
        let first = frames.first().ok_or(DepthError::EmptySequence)?;
        let (w, h) = (first.width, first.height);
        for (i, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(DepthError::DimMismatchAcrossFrames {
                    index: i,
                    got_w: f.width,
                    got_h: f.height,
                    want_w: w,
                    want_h: h,
                });
            }
        }
        Ok(Self {
            frames,
            start_index,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// Single-channel motion descriptor image. Raw values live in [0, 255];
/// normalized values in [0, 1]. `roi`, when set, records the crop rectangle
/// in the coordinates of the pre-crop image.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMotionImage<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    pub roi: Option<Rect>,
}

impl<T: Scalar> DepthMotionImage<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self, DepthError> {
        if values.len() != width * height {
            return Err(DepthError::DimMismatch(format!(
                "{} values for {width}×{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            roi: None,
        })
    }

    pub fn at(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }
}

/// Accumulate a depth stack into a raw DMI: each pixel is
/// `255 − min over frames` of the depth at that position.
pub fn compute_dmi<T: Scalar>(seq: &DepthSequence) -> Result<DepthMotionImage<T>, DepthError> {
    if seq.is_empty() {
        return Err(DepthError::EmptySequence);
    }
    let (w, h) = (seq.frames[0].width, seq.frames[0].height);
    let mut mins = vec![u8::MAX; w * h];
    for frame in &seq.frames {
        for (slot, &p) in mins.iter_mut().zip(&frame.pixels) {
            *slot = (*slot).min(p);
        }
    }
    let values = mins
        .into_iter()
        .map(|m| T::from_u8(255 - m).unwrap())
        .collect();
    DepthMotionImage::new(w, h, values)
}

/// Divide every value by the global maximum. An all-zero image stays
/// all-zero.
pub fn normalize_dmi<T: Scalar>(img: &DepthMotionImage<T>) -> DepthMotionImage<T> {
    let max = img.max_value();
    let mut out = img.clone();
    if max > T::zero() {
        for v in &mut out.values {
            *v /= max;
        }
    }
    out
}

/// Crop to the tightest axis-aligned rectangle holding every pixel strictly
/// above `threshold`; the rectangle is recorded in `roi`.
pub fn crop_roi<T: Scalar>(
    img: &DepthMotionImage<T>,
    threshold: T,
) -> Result<DepthMotionImage<T>, DepthError> {
    let mut bounds: Option<Rect> = None;
    for y in 0..img.height {
        for x in 0..img.width {
            if img.at(x, y) > threshold {
                bounds = Some(match bounds {
                    None => Rect {
                        x0: x,
                        y0: y,
                        x1: x,
                        y1: y,
                    },
                    Some(r) => Rect {
                        x0: r.x0.min(x),
                        y0: r.y0.min(y),
                        x1: r.x1.max(x),
                        y1: r.y1.max(y),
                    },
                });
            }
        }
    }
    let rect = bounds.ok_or_else(|| {
        DepthError::AllBelowThreshold(threshold.to_f64().unwrap_or(f64::NAN))
    })?;
    let mut values = Vec::with_capacity(rect.width() * rect.height());
    for y in rect.y0..=rect.y1 {
        for x in rect.x0..=rect.x1 {
            values.push(img.at(x, y));
        }
    }
    Ok(DepthMotionImage {
        width: rect.width(),
        height: rect.height(),
        values,
        roi: Some(rect),
    })
}

/// Nearest-neighbor resize to `side × side`.
pub fn resize_nearest<T: Scalar>(img: &DepthMotionImage<T>, side: usize) -> DepthMotionImage<T> {
    assert!(side > 0, "resize target must be positive");
    let mut values = Vec::with_capacity(side * side);
    for y in 0..side {
        let sy = y * img.height / side;
        for x in 0..side {
            let sx = x * img.width / side;
            values.push(img.at(sx, sy));
        }
    }
    DepthMotionImage {
        width: side,
        height: side,
        values,
        roi: None,
    }
}

/// A labeled mean image for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCentroid<T> {
    pub class_name: String,
    pub image: DepthMotionImage<T>,
}

/// Score a DMI against per-class centroids: `softmax(−d²/temperature)` over
/// squared Euclidean pixel distances. With `resize_side` set, the image and
/// every centroid are first resized to that square; otherwise dimensions
/// must already agree.
pub fn nearest_centroid_classify<T: Scalar>(
    img: &DepthMotionImage<T>,
    centroids: &[ClassCentroid<T>],
    temperature: T,
    resize_side: Option<usize>,
) -> Result<ScoreVector<T>, DepthError> {
    if centroids.is_empty() {
        return Err(DepthError::NoCentroids);
    }
    if temperature <= T::zero() {
        return Err(DepthError::DimMismatch(
            "temperature must be positive".into(),
        ));
    }
    let probe = match resize_side {
        Some(side) => resize_nearest(img, side),
        None => img.clone(),
    };
    let mut logits = Vec::with_capacity(centroids.len());
    for c in centroids {
        let reference = match resize_side {
            Some(side) => resize_nearest(&c.image, side),
            None => c.image.clone(),
        };
        if reference.width != probe.width || reference.height != probe.height {
            return Err(DepthError::DimMismatch(format!(
                "centroid {:?} is {}×{}, image is {}×{}",
                c.class_name, reference.width, reference.height, probe.width, probe.height
            )));
        }
        let d2: T = probe
            .values
            .iter()
            .zip(&reference.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        logits.push(-d2 / temperature);
    }
    let classes = centroids.iter().map(|c| c.class_name.clone()).collect();
    Ok(ScoreVector::new(classes, softmax(&logits)))
}

// ---------------------------------------------------------------------------
// PGM (P5) ingestion and export
// ---------------------------------------------------------------------------

fn pgm_header_tokens(bytes: &[u8]) -> Result<(Vec<usize>, usize), DepthError> {
    // magic already consumed by caller; gather width, height, maxval while
    // honoring '#' comments, then return the offset of the pixel data
    let mut tokens = Vec::new();
    let mut pos = 2;
    while tokens.len() < 3 {
        match bytes.get(pos) {
            None => return Err(DepthError::MalformedPgm("truncated header".into())),
            Some(b'#') => {
                while let Some(&b) = bytes.get(pos) {
                    pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(_) => {
                let start = pos;
                while let Some(&b) = bytes.get(pos) {
                    if b.is_ascii_whitespace() {
                        break;
                    }
                    pos += 1;
                }
                let text = std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| DepthError::MalformedPgm("non-ASCII header".into()))?;
                let value: usize = text
                    .parse()
                    .map_err(|_| DepthError::MalformedPgm(format!("bad header token {text:?}")))?;
                tokens.push(value);
            }
        }
    }
    // exactly one whitespace byte separates the header from pixel data
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((tokens, pos + 1)),
        _ => Err(DepthError::MalformedPgm(
            "missing separator before pixel data".into(),
        )),
    }
}

/// Read a binary PGM (P5) as a quantized depth frame. 8-bit samples pass
/// through; 16-bit samples (big-endian per PGM) are mapped linearly from
/// `depth_range_mm` onto 0..255 with clamping.
pub fn read_pgm_depth(bytes: &[u8], depth_range_mm: (f64, f64)) -> Result<DepthFrame, DepthError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(DepthError::MalformedPgm("not a binary PGM (P5)".into()));
    }
    let (near, far) = depth_range_mm;
    if near >= far {
        return Err(DepthError::BadDepthRange);
    }
    let (tokens, data_at) = pgm_header_tokens(bytes)?;
    let (width, height, maxval) = (tokens[0], tokens[1], tokens[2]);
    if width == 0 || height == 0 {
        return Err(DepthError::MalformedPgm("zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(DepthError::MalformedPgm(format!("bad maxval {maxval}")));
    }
    let count = width * height;
    let data = &bytes[data_at..];
    let pixels = if maxval < 256 {
        if data.len() < count {
            return Err(DepthError::MalformedPgm("truncated pixel data".into()));
        }
        data[..count].to_vec()
    } else {
        if data.len() < 2 * count {
            return Err(DepthError::MalformedPgm("truncated pixel data".into()));
        }
        let scale = 255.0 / (far - near);
        data[..2 * count]
            .chunks_exact(2)
            .map(|pair| {
                let raw = f64::from(u16::from_be_bytes([pair[0], pair[1]]));
                ((raw - near) * scale).round().clamp(0.0, 255.0) as u8
            })
            .collect()
    };
    DepthFrame::new(width, height, pixels)
}

/// Write an 8-bit binary PGM (P5).
pub fn write_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Export a raw DMI as an 8-bit PGM; values are rounded and clamped to 0..255.
pub fn dmi_to_pgm<T: Scalar>(img: &DepthMotionImage<T>) -> Vec<u8> {
    let pixels: Vec<u8> = img
        .values
        .iter()
        .map(|v| {
            v.to_f64()
                .map(|f| f.round().clamp(0.0, 255.0) as u8)
                .unwrap_or(0)
        })
        .collect();
    write_pgm(img.width, img.height, &pixels)
}

/// Render a DMI as plain-text: `height width` on the first line, then one
/// row per line with 9-significant-digit values.
pub fn dmi_to_text<T: Scalar>(img: &DepthMotionImage<T>) -> String {
    let mut out = format!("{} {}\n", img.height, img.width);
    for y in 0..img.height {
        let row: Vec<String> = (0..img.width)
            .map(|x| format_exact(img.at(x, y)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parse the [`dmi_to_text`] format.
pub fn dmi_from_text<T: Scalar>(text: &str) -> Result<DepthMotionImage<T>, DepthError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| DepthError::MalformedPgm("empty text matrix".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| DepthError::MalformedPgm("bad dims".into())))
        .collect::<Result<_, _>>()?;
    if dims.len() != 2 {
        return Err(DepthError::MalformedPgm("expected `height width`".into()));
    }
    let (height, width) = (dims[0], dims[1]);
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..height {
        let line = lines
            .next()
            .ok_or_else(|| DepthError::MalformedPgm("missing row".into()))?;
        for tok in line.split_whitespace() {
            let v: T = tok
                .parse()
                .map_err(|_| DepthError::MalformedPgm(format!("bad value {tok:?}")))?;
            values.push(v);
        }
    }
    DepthMotionImage::new(width, height, values)
}
