//! Tactile glyph language: a 3×3 cell of circular nodes, each node eight
//! raisable cuboid segments at 45° steps plus a FULL state marking the head.
//! Includes the class→glyph registry (TGR1 text), the 22-byte device wire
//! frame (TGF1), and an ASCII preview renderer.

use std::collections::BTreeMap;

use thiserror::Error;

/// Nodes per glyph cell (3×3).
pub const GLYPH_NODES: usize = 9;
/// Wire frame size in bytes.
pub const FRAME_LEN: usize = 22;
/// Wire frame magic: "TG".
pub const FRAME_MAGIC: [u8; 2] = [0x54, 0x47];
/// Wire frame version.
pub const FRAME_VERSION: u8 = 0x01;

/// Segment bit assignments, clockwise from the top cuboid.
pub mod segment {
    pub const N: u8 = 0x01;
    pub const NE: u8 = 0x02;
    pub const E: u8 = 0x04;
    pub const SE: u8 = 0x08;
    pub const S: u8 = 0x10;
    pub const SW: u8 = 0x20;
    pub const W: u8 = 0x40;
    pub const NW: u8 = 0x80;
}

#[derive(Debug, Error)]
pub enum TactileError {
    #[error("frame is {0} bytes, expected 22")]
    WrongFrameLength(usize),
    #[error("bad frame magic")]
    BadMagic,
    #[error("unsupported frame version {0:#04x}")]
    BadVersion(u8),
    #[error("checksum mismatch: stored {stored:#04x}, computed {computed:#04x}")]
    BadChecksum { stored: u8, computed: u8 },
    #[error("reserved bits set in node word {node}")]
    ReservedBitsSet { node: usize },
    #[error("node word {node} has FULL with nonzero segments")]
    InvalidNodeState { node: usize },
    #[error("duplicate class id {0}")]
    DuplicateClassId(u32),
    #[error("invalid node token {token:?} on line {line}")]
    InvalidNodeToken { line: usize, token: String },
    #[error("glyph for class {class_id} violates registry invariants: {reason}")]
    GlyphInvariantViolation { class_id: u32, reason: String },
    #[error("classes {0} and {1} share an identical glyph")]
    DuplicateGlyph(u32, u32),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("malformed registry line {line}: {reason}")]
    MalformedRegistryLine { line: usize, reason: String },
    #[error("class name {0:?} contains a tab or newline")]
    InvalidClassName(String),
}

/// State of one node: a segment mask, or FULL (which supersedes segments —
/// a FULL node must carry a zero mask).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeState {
    pub segments: u8,
    pub full: bool,
}

impl NodeState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self {
            segments: 0,
            full: true,
        }
    }

    pub fn with_segments(mask: u8) -> Self {
        Self {
            segments: mask,
            full: false,
        }
    }

    pub fn is_empty(self) -> bool {
        !self.full && self.segments == 0
    }

    pub fn is_consistent(self) -> bool {
        !(self.full && self.segments != 0)
    }
}

/// A 3×3 grid of node states, row-major from the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TactileGlyph {
    pub nodes: [NodeState; GLYPH_NODES],
}

impl TactileGlyph {
    pub fn node(&self, row: usize, col: usize) -> NodeState {
        self.nodes[row * 3 + col]
    }
}

/// How strictly [`validate_glyph`] treats the FULL count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Exactly one FULL node (the head), as registry glyphs require.
    Registry,
    /// Any FULL count, for experimentation.
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlyphViolation {
    /// Node has `full` set together with a nonzero segment mask.
    FullWithSegments { node: usize },
    /// Registry mode requires exactly one FULL node.
    WrongFullCount { found: usize },
    /// Nothing raised at all.
    AllEmpty,
}

/// Validation report; an empty violation list means the glyph is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphReport {
    pub violations: Vec<GlyphViolation>,
}

impl GlyphReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_glyph(g: &TactileGlyph, mode: ValidationMode) -> GlyphReport {
    let mut violations = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        if !node.is_consistent() {
            violations.push(GlyphViolation::FullWithSegments { node: i });
        }
    }
    let full_count = g.nodes.iter().filter(|n| n.full).count();
    if mode == ValidationMode::Registry && full_count != 1 {
        violations.push(GlyphViolation::WrongFullCount { found: full_count });
    }
    if g.nodes.iter().all(|n| n.is_empty()) {
        violations.push(GlyphViolation::AllEmpty);
    }
    GlyphReport { violations }
}

// ---------------------------------------------------------------------------
// TGF1 wire frame
// ---------------------------------------------------------------------------

fn node_word(n: NodeState) -> u16 {
    u16::from(n.segments) | (u16::from(n.full) << 8)
}

/// Encode as the 22-byte TGF1 frame: magic, version, nine 16-bit
/// little-endian node words (bits 0..7 segment mask, bit 8 FULL, bits 9..15
/// reserved zero), then an XOR checksum over the 18 payload bytes.
pub fn encode_frame(g: &TactileGlyph) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[0] = FRAME_MAGIC[0];
    out[1] = FRAME_MAGIC[1];
    out[2] = FRAME_VERSION;
    for (i, &node) in g.nodes.iter().enumerate() {
        let word = node_word(node).to_le_bytes();
        out[3 + 2 * i] = word[0];
        out[3 + 2 * i + 1] = word[1];
    }
    out[FRAME_LEN - 1] = out[3..3 + 18].iter().fold(0, |acc, &b| acc ^ b);
    out
}

/// Decode and fully check a TGF1 frame.
pub fn decode_frame(bytes: &[u8]) -> Result<TactileGlyph, TactileError> {
    if bytes.len() != FRAME_LEN {
        return Err(TactileError::WrongFrameLength(bytes.len()));
    }
    if bytes[..2] != FRAME_MAGIC {
        return Err(TactileError::BadMagic);
    }
    if bytes[2] != FRAME_VERSION {
        return Err(TactileError::BadVersion(bytes[2]));
    }
    let stored = bytes[FRAME_LEN - 1];
    let computed = bytes[3..3 + 18].iter().fold(0, |acc: u8, &b| acc ^ b);
    if stored != computed {
        return Err(TactileError::BadChecksum { stored, computed });
    }
    let mut glyph = TactileGlyph::default();
    for i in 0..GLYPH_NODES {
        let word = u16::from_le_bytes([bytes[3 + 2 * i], bytes[3 + 2 * i + 1]]);
        if word & 0xFE00 != 0 {
            return Err(TactileError::ReservedBitsSet { node: i });
        }
        let node = NodeState {
            segments: (word & 0x00FF) as u8,
            full: word & 0x0100 != 0,
        };
        if !node.is_consistent() {
            return Err(TactileError::InvalidNodeState { node: i });
        }
        glyph.nodes[i] = node;
    }
    Ok(glyph)
}

// ---------------------------------------------------------------------------
// TGR1 registry text
// ---------------------------------------------------------------------------

/// Immutable map from action-class id to its name and glyph. Loading
/// enforces the registry invariants: exactly one FULL node per glyph, no
/// duplicate ids, no two classes sharing a glyph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelRegistry {
    entries: BTreeMap<u32, (String, TactileGlyph)>,
}

impl LabelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        class_id: u32,
        class_name: &str,
        glyph: TactileGlyph,
    ) -> Result<(), TactileError> {
        if class_name.contains('\t') || class_name.contains('\n') {
            return Err(TactileError::InvalidClassName(class_name.to_string()));
        }
        if self.entries.contains_key(&class_id) {
            return Err(TactileError::DuplicateClassId(class_id));
        }
        let report = validate_glyph(&glyph, ValidationMode::Registry);
        if !report.is_valid() {
            return Err(TactileError::GlyphInvariantViolation {
                class_id,
                reason: format!("{:?}", report.violations),
            });
        }
        if let Some((&other, _)) = self.entries.iter().find(|(_, (_, g))| *g == glyph) {
            return Err(TactileError::DuplicateGlyph(other, class_id));
        }
        self.entries.insert(class_id, (class_name.to_string(), glyph));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, &TactileGlyph)> {
        self.entries
            .iter()
            .map(|(&id, (name, glyph))| (id, name.as_str(), glyph))
    }

    pub fn class_name(&self, class_id: u32) -> Result<&str, TactileError> {
        self.entries
            .get(&class_id)
            .map(|(name, _)| name.as_str())
            .ok_or(TactileError::UnknownClass(class_id))
    }

    /// Find the id registered under a class name (names are data, so this is
    /// a linear scan).
    pub fn id_of(&self, class_name: &str) -> Option<u32> {
        self.entries
            .iter()
            .find(|(_, (name, _))| name == class_name)
            .map(|(&id, _)| id)
    }
}

/// The glyph registered for a class id.
pub fn lookup_label(class_id: u32, registry: &LabelRegistry) -> Result<&TactileGlyph, TactileError> {
    registry
        .entries
        .get(&class_id)
        .map(|(_, glyph)| glyph)
        .ok_or(TactileError::UnknownClass(class_id))
}

fn parse_node_token(token: &str, line: usize) -> Result<NodeState, TactileError> {
    if token == "F" {
        return Ok(NodeState::full());
    }
    if token.len() == 2 && token.chars().all(|c| c.is_ascii_hexdigit()) {
        let mask = u8::from_str_radix(token, 16).expect("checked hex digits");
        return Ok(NodeState::with_segments(mask));
    }
    Err(TactileError::InvalidNodeToken {
        line,
        token: token.to_string(),
    })
}

/// Parse the TGR1 registry text: one `class_id<TAB>class_name<TAB>n1 … n9`
/// entry per line, where each node token is `F` (full) or two hex digits of
/// segment mask; `#` starts a comment.
pub fn parse_registry(text: &str) -> Result<LabelRegistry, TactileError> {
    let mut registry = LabelRegistry::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(TactileError::MalformedRegistryLine {
                line: line_no,
                reason: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| TactileError::MalformedRegistryLine {
                line: line_no,
                reason: format!("bad class id {:?}", fields[0]),
            })?;
        let tokens: Vec<&str> = fields[2].split_whitespace().collect();
        if tokens.len() != GLYPH_NODES {
            return Err(TactileError::MalformedRegistryLine {
                line: line_no,
                reason: format!("expected 9 node tokens, got {}", tokens.len()),
            });
        }
        let mut glyph = TactileGlyph::default();
        for (slot, token) in glyph.nodes.iter_mut().zip(&tokens) {
            *slot = parse_node_token(token, line_no)?;
        }
        registry.insert(class_id, fields[1], glyph)?;
    }
    Ok(registry)
}

/// Emit TGR1 text in ascending class-id order with uppercase hex masks.
pub fn serialize_registry(registry: &LabelRegistry) -> String {
    let mut out = String::new();
    for (id, name, glyph) in registry.iter() {
        let tokens: Vec<String> = glyph
            .nodes
            .iter()
            .map(|n| {
                if n.full {
                    "F".to_string()
                } else {
                    format!("{:02X}", n.segments)
                }
            })
            .collect();
        out.push_str(&format!("{id}\t{name}\t{}\n", tokens.join(" ")));
    }
    out
}

/// The registry shipped with the toolkit: nineteen action classes with
/// original stick-figure glyph designs.
pub fn default_registry() -> LabelRegistry {
    parse_registry(DEFAULT_REGISTRY_TEXT).expect("shipped registry is valid")
}

/// Raw text of the shipped registry file.
pub const DEFAULT_REGISTRY_TEXT: &str = include_str!("../data/default_registry.tgr");

// ---------------------------------------------------------------------------
// ASCII preview
// ---------------------------------------------------------------------------

const TILE: usize = 3;

fn node_tile(n: NodeState) -> [[char; TILE]; TILE] {
    if n.full {
        return [['#'; TILE]; TILE];
    }
    let mut tile = [[' '; TILE]; TILE];
    tile[1][1] = '.';
    let strokes: [(u8, usize, usize, char); 8] = [
        (segment::N, 0, 1, '|'),
        (segment::NE, 0, 2, '/'),
        (segment::E, 1, 2, '-'),
        (segment::SE, 2, 2, '\\'),
        (segment::S, 2, 1, '|'),
        (segment::SW, 2, 0, '/'),
        (segment::W, 1, 0, '-'),
        (segment::NW, 0, 0, '\\'),
    ];
    for (bit, row, col, ch) in strokes {
        if n.segments & bit != 0 {
            tile[row][col] = ch;
        }
    }
    tile
}

/// Render a glyph as a fixed-size text grid: each node a 3×3 character tile
/// (FULL nodes as a solid block, each segment as its compass stroke), tiles
/// separated by one space. Nine lines of eleven characters.
pub fn render_ascii(g: &TactileGlyph) -> String {
    let mut out = String::new();
    for row in 0..3 {
        let tiles: Vec<[[char; TILE]; TILE]> =
            (0..3).map(|col| node_tile(g.node(row, col))).collect();
        for line in 0..TILE {
            let rendered: Vec<String> = tiles
                .iter()
                .map(|t| t[line].iter().collect::<String>())
                .collect();
            out.push_str(&rendered.join(" "));
            out.push('\n');
        }
    }
    out
}
