//! JSON pipeline configuration.
//!
//! Every section and field is optional; missing values take the defaults
//! below. Relative paths are resolved against the directory holding the
//! config file.

use std::path::{Path, PathBuf};

use edof_core::align::{AlignParams, RansacParams};
use edof_core::fusion::{FusionParams, SelectionMode, TrainConfig};
use edof_core::synth::{CaptureOptions, GridOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Grid index of the benchmark view; the centre view when absent.
    pub benchmark_view: Option<usize>,
    pub blocks: BlockConfig,
    pub align: AlignConfig,
    pub fusion: FusionConfig,
    pub train: TrainSection,
    pub output: PathBuf,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputConfig::Synth(SynthConfig::default()),
            benchmark_view: None,
            blocks: BlockConfig::default(),
            align: AlignConfig::default(),
            fusion: FusionConfig::default(),
            train: TrainSection::default(),
            output: PathBuf::from("out"),
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    /// Render a synthetic grid.
    Synth(SynthConfig),
    /// Read views listed in a manifest.
    Directory {
        path: PathBuf,
        #[serde(default = "default_manifest")]
        manifest: PathBuf,
    },
}

fn default_manifest() -> PathBuf {
    PathBuf::from("manifest.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Scene and capture seed; `rng_seed` when absent.
    pub seed: Option<u64>,
    /// `[height, width]`.
    pub canvas: [usize; 2],
    pub layers: usize,
    pub depths: usize,
    pub max_shift: f64,
    pub perturbation: f64,
    pub blur_coefficient: f64,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let g = GridOptions::default();
        SynthConfig {
            seed: None,
            canvas: [g.canvas.0, g.canvas.1],
            layers: g.n_layers,
            depths: g.capture.n_depths,
            max_shift: g.capture.max_shift,
            perturbation: g.capture.perturbation,
            blur_coefficient: g.capture.blur_coefficient,
            noise_sigma: g.capture.noise_sigma,
        }
    }
}

impl SynthConfig {
    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            canvas: (self.canvas[0], self.canvas[1]),
            n_layers: self.layers,
            capture: CaptureOptions {
                n_depths: self.depths,
                max_shift: self.max_shift,
                perturbation: self.perturbation,
                blur_coefficient: self.blur_coefficient,
                noise_sigma: self.noise_sigma,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockConfig {
    pub rows: usize,
    pub cols: usize,
    pub coverage_threshold: f64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        let f = FusionParams::default();
        BlockConfig {
            rows: f.block_rows,
            cols: f.block_cols,
            coverage_threshold: f.coverage_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub detect_threshold: f64,
    pub max_points: usize,
    pub ratio_threshold: f64,
    pub ransac_threshold: f64,
    pub ransac_confidence: f64,
    pub ransac_max_iterations: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        let a = AlignParams::default();
        AlignConfig {
            detect_threshold: a.detect_threshold,
            max_points: a.max_points,
            ratio_threshold: a.ratio_threshold,
            ransac_threshold: a.ransac.inlier_threshold,
            ransac_confidence: a.ransac.confidence,
            ransac_max_iterations: a.ransac.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Network file to load (`run`) or write (`train`); `<output>/network.edfn`
    /// when absent.
    pub network: Option<PathBuf>,
    pub alpha: f64,
    /// Softmax temperature; the mean information measure of the training
    /// pairs when absent.
    pub temperature: Option<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            network: None,
            alpha: TrainConfig::default().alpha,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: Option<usize>,
    /// Number of block pairs to collect.
    pub pairs: usize,
    /// Seed of the first synthetic training grid; later grids use the
    /// following seeds.
    pub first_grid_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            epochs: t.epochs,
            batch_size: t.batch_size,
            patch_size: t.patch_size,
            pairs: 200,
            first_grid_seed: 1000,
        }
    }
}

impl PipelineConfig {
    /// Parses JSON; syntax errors carry line and column.
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        if let InputConfig::Directory { path, .. } = &mut self.input {
            fix(path);
        }
        if let Some(n) = &mut self.fusion.network {
            fix(n);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.blocks.rows == 0 || self.blocks.cols == 0 {
            return bad("blocks.rows and blocks.cols must be positive");
        }
        if !(0.0..=1.0).contains(&self.blocks.coverage_threshold) {
            return bad("blocks.coverage_threshold must lie in [0, 1]");
        }
        if !(self.align.ratio_threshold > 0.0 && self.align.ratio_threshold <= 1.0) {
            return bad("align.ratio_threshold must lie in (0, 1]");
        }
        if !(self.align.ransac_threshold > 0.0) {
            return bad("align.ransac_threshold must be positive");
        }
        if !(self.align.ransac_confidence > 0.0 && self.align.ransac_confidence <= 1.0) {
            return bad("align.ransac_confidence must lie in (0, 1]");
        }
        if self.align.ransac_max_iterations == 0 {
            return bad("align.ransac_max_iterations must be positive");
        }
        if !(self.fusion.alpha >= 0.0) {
            return bad("fusion.alpha must be nonnegative");
        }
        if let Some(c) = self.fusion.temperature {
            if !(c > 0.0) {
                return bad("fusion.temperature must be positive");
            }
        }
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let InputConfig::Synth(s) = &self.input {
            if s.canvas[0] < 64 || s.canvas[1] < 64 {
                return bad("input.synth.canvas must be at least 64x64");
            }
            if s.layers == 0 || s.depths == 0 {
                return bad("input.synth.layers and input.synth.depths must be positive");
            }
        }
        Ok(())
    }

    pub fn align_params(&self) -> AlignParams {
        AlignParams {
            detect_threshold: self.align.detect_threshold,
            max_points: self.align.max_points,
            ratio_threshold: self.align.ratio_threshold,
            ransac: RansacParams {
                inlier_threshold: self.align.ransac_threshold,
                confidence: self.align.ransac_confidence,
                max_iterations: self.align.ransac_max_iterations,
                seed: self.rng_seed,
            },
        }
    }

    pub fn fusion_params(&self, skip_optimize: bool) -> FusionParams {
        FusionParams {
            block_rows: self.blocks.rows,
            block_cols: self.blocks.cols,
            coverage_threshold: self.blocks.coverage_threshold,
            mode: if skip_optimize {
                SelectionMode::AllViewsInOrder
            } else {
                SelectionMode::Sharpest
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            alpha: self.fusion.alpha,
            temperature: self.fusion.temperature,
            rng_seed: self.rng_seed,
            patch_size: self.train.patch_size,
        }
    }

    pub fn network_path(&self) -> PathBuf {
        self.fusion.network.clone().unwrap_or_else(|| self.output.join("network.edfn"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = PipelineConfig::from_json("{\n  \"rng_seed\": ,\n}").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(PipelineConfig::from_json("{\"unknown\": 1}").is_err());
    }

    #[test]
    fn directory_input_and_paths() {
        let mut cfg = PipelineConfig::from_json(r#"{"input": {"directory": {"path": "data"}}, "output": "o"}"#).unwrap();
        cfg.resolve(Path::new("/cfg"));
        assert_eq!(
            cfg.input,
            InputConfig::Directory {
                path: PathBuf::from("/cfg/data"),
                manifest: PathBuf::from("manifest.json")
            }
        );
        assert_eq!(cfg.network_path(), PathBuf::from("/cfg/o/network.edfn"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cfg = PipelineConfig::from_json(r#"{"fusion": {"temperature": 0.0}}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = PipelineConfig::from_json(r#"{"train": {"batch_size": 0}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
