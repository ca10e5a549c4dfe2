//! Pipeline configuration: one TOML file with a documented key set; command
//! line flags override individual keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use taction_core::actions::TESTED_ACTIONS;

fn default_scales_k() -> usize {
    3
}

fn default_window_tau() -> usize {
    3
}

fn default_fusion_alpha() -> f64 {
    0.5
}

fn default_temporal_len() -> usize {
    32
}

fn default_ref_joint() -> usize {
    1
}

fn default_depth_near_mm() -> f64 {
    500.0
}

fn default_depth_far_mm() -> f64 {
    4500.0
}

fn default_roi_threshold() -> f64 {
    0.0
}

fn default_centroid_side() -> usize {
    64
}

fn default_centroid_temperature() -> f64 {
    1.0
}

fn default_classes() -> Vec<String> {
    TESTED_ACTIONS.iter().map(|s| s.to_string()).collect()
}

/// How the two streams' score vectors combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    /// Convex combination weighted by `fusion_alpha`.
    #[default]
    Weighted,
    /// Renormalized elementwise product.
    Product,
}

/// Everything `taction run` and the stage commands need. Relative paths
/// resolve against the directory of the config file they came from.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model_path: Option<PathBuf>,
    /// Label registry; the built-in nineteen-class registry when unset.
    pub registry_path: Option<PathBuf>,
    /// Directory of per-class centroid PGMs for the depth baseline.
    pub centroids_dir: Option<PathBuf>,
    /// Ordered class names; must match the model head width.
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    /// Largest hop distance K; scales 0..=K feed the layers.
    #[serde(default = "default_scales_k")]
    pub scales_k: usize,
    /// Default window length for `graph window`.
    #[serde(default = "default_window_tau")]
    pub window_tau: usize,
    /// Skeleton-stream weight in score fusion.
    #[serde(default = "default_fusion_alpha")]
    pub fusion_alpha: f64,
    /// Fusion rule; the weighted sum unless configured otherwise.
    #[serde(default)]
    pub fusion_rule: FusionRule,
    /// Frames after temporal resampling.
    #[serde(default = "default_temporal_len")]
    pub temporal_len: usize,
    /// Reference joint for centering (1-based).
    #[serde(default = "default_ref_joint")]
    pub ref_joint: usize,
    #[serde(default = "default_depth_near_mm")]
    pub depth_near_mm: f64,
    #[serde(default = "default_depth_far_mm")]
    pub depth_far_mm: f64,
    #[serde(default = "default_roi_threshold")]
    pub roi_threshold: f64,
    #[serde(default = "default_centroid_side")]
    pub centroid_side: usize,
    #[serde(default = "default_centroid_temperature")]
    pub centroid_temperature: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model_path: None,
            registry_path: None,
            centroids_dir: None,
            classes: default_classes(),
            scales_k: default_scales_k(),
            window_tau: default_window_tau(),
            fusion_alpha: default_fusion_alpha(),
            temporal_len: default_temporal_len(),
            ref_joint: default_ref_joint(),
            fusion_rule: FusionRule::default(),
            depth_near_mm: default_depth_near_mm(),
            depth_far_mm: default_depth_far_mm(),
            roi_threshold: default_roi_threshold(),
            centroid_side: default_centroid_side(),
            centroid_temperature: default_centroid_temperature(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("stage config: reading {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("stage config: parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for slot in [
            &mut cfg.model_path,
            &mut cfg.registry_path,
            &mut cfg.centroids_dir,
        ] {
            if let Some(p) = slot.take() {
                *slot = Some(if p.is_absolute() { p } else { base.join(p) });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks for every numeric field.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            bail!("stage config: class list is empty");
        }
        if !(0.0..=1.0).contains(&self.fusion_alpha) {
            bail!("stage config: fusion_alpha {} outside [0, 1]", self.fusion_alpha);
        }
        if self.temporal_len == 0 {
            bail!("stage config: temporal_len must be positive");
        }
        if !(1..=25).contains(&self.ref_joint) {
            bail!("stage config: ref_joint {} outside 1..=25", self.ref_joint);
        }
        if self.depth_near_mm >= self.depth_far_mm {
            bail!("stage config: depth_near_mm must be below depth_far_mm");
        }
        if self.window_tau == 0 || self.window_tau.is_multiple_of(2) {
            bail!("stage config: window_tau must be odd");
        }
        if self.centroid_side == 0 {
            bail!("stage config: centroid_side must be positive");
        }
        if self.centroid_temperature <= 0.0 {
            bail!("stage config: centroid_temperature must be positive");
        }
        Ok(())
    }
}
