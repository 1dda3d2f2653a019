//! Stage orchestration shared by the subcommands.

use std::path::{Path, PathBuf};

use edof_core::align::{register_grid, unaligned, warp_registered, AlignedView, Homography};
use edof_core::fusion::{block_pairs, fuse_pipeline, train, BlockSource, FusionNet, FusionOutput, TrainOutcome, TrainingPair};
use edof_core::grid::{View, ViewGrid};
use edof_core::metrics::{evaluate, MetricsReport};
use edof_core::synth::{generate, SynthGrid};
use edof_core::{Executor, ImageF};
use serde::{Deserialize, Serialize};

use crate::config::{InputConfig, PipelineConfig, SynthConfig};
use crate::error::{CliError, CliResult};
use crate::io::{read_png, read_pfm};
use crate::netfile;

/// Ablation and training switches from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub skip_align: bool,
    pub skip_optimize: bool,
    pub train: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub file: PathBuf,
    pub row: usize,
    pub col: usize,
    #[serde(default)]
    pub focus_depth: Option<f64>,
}

/// Describes a grid stored as image files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: usize,
    pub cols: usize,
    pub views: Vec<ManifestView>,
    /// All-in-focus reference in the benchmark view's frame (PFM).
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub benchmark_view: Option<usize>,
}

pub struct LoadedGrid {
    pub grid: ViewGrid,
    pub benchmark: usize,
    /// All-in-focus reference in the benchmark frame, when known.
    pub reference: Option<ImageF>,
    pub synth: Option<SynthGrid>,
}

pub fn view_name(row: usize, col: usize) -> String {
    format!("view_r{row}c{col}")
}

fn core_config(e: edof_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn synth_grid(s: &SynthConfig, seed: u64) -> CliResult<SynthGrid> {
    generate(&s.grid_options(), seed).map_err(core_config)
}

fn benchmark_of(cfg: &PipelineConfig, grid: &ViewGrid, manifest: Option<usize>) -> CliResult<usize> {
    let b = cfg.benchmark_view.or(manifest).unwrap_or_else(|| grid.center_index());
    if b >= grid.len() {
        return Err(CliError::Config(format!("benchmark_view {b} is outside the {}-view grid", grid.len())));
    }
    Ok(b)
}

/// Reference image of a synthetic grid in the frame of view `benchmark`.
pub fn synth_reference(g: &SynthGrid, benchmark: usize) -> CliResult<ImageF> {
    g.reference(&g.truth.homographies[benchmark], g.grid.view_size())
        .map_err(CliError::Fusion)
}

pub fn load_grid(cfg: &PipelineConfig) -> CliResult<LoadedGrid> {
    match &cfg.input {
        InputConfig::Synth(s) => {
            let g = synth_grid(s, s.seed.unwrap_or(cfg.rng_seed))?;
            let benchmark = benchmark_of(cfg, &g.grid, None)?;
            let reference = synth_reference(&g, benchmark)?;
            Ok(LoadedGrid {
                grid: g.grid.clone(),
                benchmark,
                reference: Some(reference),
                synth: Some(g),
            })
        }
        InputConfig::Directory { path, manifest } => {
            let mpath = path.join(manifest);
            let text = std::fs::read_to_string(&mpath).map_err(|e| CliError::io(&mpath, e))?;
            let m: Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", mpath.display())))?;
            let mut views = Vec::with_capacity(m.views.len());
            for v in &m.views {
                views.push(View {
                    image: read_png(&path.join(&v.file))?,
                    row: v.row,
                    col: v.col,
                    focus_depth: v.focus_depth,
                });
            }
            let grid = ViewGrid::new(m.rows, m.cols, views).map_err(core_config)?;
            let benchmark = benchmark_of(cfg, &grid, m.benchmark_view)?;
            let reference = match &m.reference {
                Some(r) => Some(read_pfm(&path.join(r))?),
                None => None,
            };
            if let Some(r) = &reference {
                if r.size() != grid.view_size() {
                    return Err(CliError::Config("reference size differs from the view size".into()));
                }
            }
            Ok(LoadedGrid {
                grid,
                benchmark,
                reference,
                synth: None,
            })
        }
    }
}

/// Registers and warps every view, or passes views through unaligned.
pub fn align_views<E: Executor>(
    cfg: &PipelineConfig,
    grid: &ViewGrid,
    benchmark: usize,
    skip_align: bool,
    exec: &E,
) -> CliResult<Vec<AlignedView>> {
    if skip_align {
        return Ok(unaligned(grid));
    }
    let regs = register_grid(grid, benchmark, &cfg.align_params(), exec).map_err(CliError::Alignment)?;
    let mut ok = Vec::with_capacity(regs.len());
    let mut first_err = None;
    for r in regs {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                log::error!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(CliError::Alignment(e));
    }
    warp_registered(grid, &ok, exec).map_err(CliError::Alignment)
}

/// `reference` (benchmark frame) placed on the aligned canvas.
pub fn reference_on_canvas(reference: &ImageF, aligned: &[AlignedView]) -> ImageF {
    let (dx, dy) = aligned[0].offset;
    let (h, w) = aligned[0].image.size();
    let mut out = ImageF::new(h, w, reference.channels());
    out.mask_mut().iter_mut().for_each(|m| *m = false);
    out.paste(reference, dy, dx);
    out
}

/// Reference of a synthetic grid rendered over the whole aligned canvas.
pub fn synth_reference_on_canvas(g: &SynthGrid, benchmark: usize, aligned: &[AlignedView]) -> CliResult<ImageF> {
    let (dx, dy) = aligned[0].offset;
    let h = Homography::translation(dx as f64, dy as f64).compose(&g.truth.homographies[benchmark]);
    g.reference(&h, aligned[0].image.size()).map_err(CliError::Fusion)
}

/// Block pairs for training, from synthetic grids or the configured
/// directory.
pub fn training_pairs<E: Executor>(cfg: &PipelineConfig, exec: &E) -> CliResult<Vec<TrainingPair>> {
    let params = cfg.fusion_params(false);
    let want = cfg.train.pairs;
    let mut pairs = Vec::new();
    match &cfg.input {
        InputConfig::Synth(s) => {
            let mut seed = cfg.train.first_grid_seed;
            let limit = seed + 10 * want.max(1) as u64;
            while pairs.len() < want && seed < limit {
                let g = synth_grid(s, seed)?;
                let bench = benchmark_of(cfg, &g.grid, None)?;
                let aligned = align_views(cfg, &g.grid, bench, false, exec)?;
                let views: Vec<ImageF> = aligned.into_iter().map(|a| a.image).collect();
                pairs.extend(block_pairs(&views, &params).map_err(CliError::Fusion)?);
                log::info!("training grid {seed}: {} pairs so far", pairs.len());
                seed += 1;
            }
        }
        InputConfig::Directory { .. } => {
            let loaded = load_grid(cfg)?;
            let aligned = align_views(cfg, &loaded.grid, loaded.benchmark, false, exec)?;
            let views: Vec<ImageF> = aligned.into_iter().map(|a| a.image).collect();
            pairs = block_pairs(&views, &params).map_err(CliError::Fusion)?;
        }
    }
    pairs.truncate(want);
    if pairs.is_empty() && cfg.train.epochs > 0 {
        return Err(CliError::Config("no training pairs could be collected".into()));
    }
    Ok(pairs)
}

/// Trains from the seeded initialization. The returned network has its
/// parameters rounded as in the network file, so a saved and reloaded
/// network behaves identically.
pub fn train_network<E: Executor>(cfg: &PipelineConfig, exec: &E) -> CliResult<(FusionNet, TrainOutcome)> {
    let init = FusionNet::new(cfg.rng_seed);
    let pairs = training_pairs(cfg, exec)?;
    if cfg.train.epochs == 0 {
        let net = netfile::quantized(&init).map_err(CliError::Config)?;
        return Ok((
            net.clone(),
            TrainOutcome {
                net,
                loss_history: Vec::new(),
                temperature: cfg.fusion.temperature.unwrap_or(f64::NAN),
            },
        ));
    }
    log::info!("training on {} pairs for {} epochs", pairs.len(), cfg.train.epochs);
    let outcome = train(&init, &cfg.train_config(), &pairs, exec).map_err(CliError::fusion)?;
    // Parameters beyond f32 range are a divergence the f64 checks miss.
    let net = netfile::quantized(&outcome.net).map_err(|_| {
        CliError::Diverged(edof_core::Error::TrainingDiverged {
            epoch: cfg.train.epochs,
            batch: 0,
        })
    })?;
    Ok((net, outcome))
}

/// Everything a run produces before it is written out.
pub struct RunOutcome {
    pub loaded: LoadedGrid,
    pub aligned: Vec<AlignedView>,
    pub fusion: FusionOutput,
    pub reference: Option<ImageF>,
    pub metrics: MetricsReport,
}

pub fn run_pipeline<E: Executor>(cfg: &PipelineConfig, flags: Flags, net: &FusionNet, exec: &E) -> CliResult<RunOutcome> {
    let loaded = load_grid(cfg)?;
    run_loaded(cfg, flags, net, loaded, exec)
}

pub fn run_loaded<E: Executor>(
    cfg: &PipelineConfig,
    flags: Flags,
    net: &FusionNet,
    loaded: LoadedGrid,
    exec: &E,
) -> CliResult<RunOutcome> {
    let aligned = align_views(cfg, &loaded.grid, loaded.benchmark, flags.skip_align, exec)?;
    let fusion = fuse_pipeline(&aligned, net, &cfg.fusion_params(flags.skip_optimize), exec).map_err(CliError::fusion)?;
    let reference = match &loaded.synth {
        Some(g) => Some(synth_reference_on_canvas(g, loaded.benchmark, &aligned)?),
        None => loaded.reference.as_ref().map(|r| reference_on_canvas(r, &aligned)),
    };
    let metrics = evaluate(&fusion.image, reference.as_ref()).map_err(CliError::Fusion)?;
    Ok(RunOutcome {
        loaded,
        aligned,
        fusion,
        reference,
        metrics,
    })
}

pub fn metrics_json(m: &MetricsReport) -> serde_json::Value {
    serde_json::json!({
        "ie": m.ie,
        "lc": m.lc,
        "ssim_vs_reference": m.ssim_vs_reference,
        "valid_pixel_fraction": m.valid_pixel_fraction,
    })
}

pub fn homography_json(h: &Homography) -> Vec<f64> {
    h.to_row_major().to_vec()
}

pub fn alignment_json(grid: &ViewGrid, aligned: &[AlignedView]) -> serde_json::Value {
    let views: Vec<serde_json::Value> = aligned
        .iter()
        .map(|a| {
            let v = grid.view(a.view_index);
            serde_json::json!({
                "view": a.view_index,
                "row": v.row,
                "col": v.col,
                "homography": homography_json(&a.homography),
                "homography_total": homography_json(&a.homography_total),
                "matches": a.match_count,
                "inliers": a.inlier_count,
            })
        })
        .collect();
    let (h, w) = aligned[0].image.size();
    serde_json::json!({
        "offset": [aligned[0].offset.0, aligned[0].offset.1],
        "canvas": [h, w],
        "views": views,
    })
}

pub fn blocks_json(fusion: &FusionOutput) -> serde_json::Value {
    let blocks: Vec<serde_json::Value> = fusion
        .blocks
        .iter()
        .map(|b| {
            let cell = fusion.grid.cell(b.position);
            let (kind, views) = match &b.source {
                BlockSource::Fused(v) => ("fused", v.clone()),
                BlockSource::Fallback(v) => ("fallback", vec![*v]),
            };
            serde_json::json!({
                "position": [b.position.0, b.position.1],
                "cell": {"y": cell.y, "x": cell.x, "height": cell.height, "width": cell.width},
                "source": kind,
                "views": views,
                "scores": b.scores,
                "coverage": b.coverage,
            })
        })
        .collect();
    serde_json::json!({ "rows": fusion.grid.rows, "cols": fusion.grid.cols, "blocks": blocks })
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
