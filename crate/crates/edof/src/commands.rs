//! The five subcommands. Each writes its files under the configured output
//! directory and returns a JSON summary.

use std::path::Path;

use edof_core::fusion::{BlockSource, FusionNet};
use edof_core::metrics::evaluate;
use edof_core::Executor;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::io::{read_png, read_pfm, write_bytes, write_mask_png, write_pfm, write_png};
use crate::netfile;
use crate::pipeline::{
    align_views, alignment_json, blocks_json, file_name, homography_json, load_grid, metrics_json, run_loaded,
    train_network, view_name, Flags, LoadedGrid, Manifest, ManifestView,
};

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_views(dir: &Path, loaded: &LoadedGrid) -> CliResult<Vec<ManifestView>> {
    let mut entries = Vec::with_capacity(loaded.grid.len());
    for v in loaded.grid.views() {
        let file = Path::new("views").join(format!("{}.png", view_name(v.row, v.col)));
        write_png(&dir.join(&file), &v.image)?;
        entries.push(ManifestView {
            file,
            row: v.row,
            col: v.col,
            focus_depth: v.focus_depth,
        });
    }
    Ok(entries)
}

/// Renders the configured synthetic grid: view PNGs, the reference as PFM,
/// a ground-truth sidecar and a manifest usable as directory input.
pub fn synth(cfg: &PipelineConfig) -> CliResult<Value> {
    let loaded = load_grid(cfg)?;
    let Some(g) = &loaded.synth else {
        return Err(CliError::Config("synth needs a synthetic input section".into()));
    };
    let out = &cfg.output;
    let views = write_views(out, &loaded)?;
    let reference = loaded.reference.as_ref().expect("synthetic grids carry a reference");
    write_pfm(&out.join("ground_truth.pfm"), reference)?;
    let seed = match &cfg.input {
        crate::config::InputConfig::Synth(s) => s.seed.unwrap_or(cfg.rng_seed),
        _ => unreachable!(),
    };
    let sidecar = json!({
        "seed": seed,
        "benchmark_view": loaded.benchmark,
        "reference_frame": "benchmark view",
        "homographies": g.truth.homographies.iter().map(homography_json).collect::<Vec<_>>(),
        "focus_depths": g.truth.focus_depths,
        "layers": g.scene.layers.iter().map(|l| json!({
            "depth": l.depth,
            "texture_seed": l.texture_seed,
            "region": {"x": l.region.x, "y": l.region.y, "width": l.region.width, "height": l.region.height},
        })).collect::<Vec<_>>(),
        "blur_coefficient": g.capture.blur_coefficient,
        "noise_sigma": g.capture.noise_sigma,
    });
    write_json(&out.join("ground_truth.json"), &sidecar)?;
    let manifest = Manifest {
        rows: loaded.grid.rows(),
        cols: loaded.grid.cols(),
        views,
        reference: Some("ground_truth.pfm".into()),
        benchmark_view: Some(loaded.benchmark),
    };
    let manifest_value = serde_json::to_value(&manifest).expect("manifest serializes");
    write_json(&out.join("manifest.json"), &manifest_value)?;
    Ok(json!({
        "command": "synth",
        "views": loaded.grid.len(),
        "view_size": [loaded.grid.view_size().0, loaded.grid.view_size().1],
        "benchmark_view": loaded.benchmark,
    }))
}

fn write_aligned(dir: &Path, loaded: &LoadedGrid, aligned: &[edof_core::align::AlignedView]) -> CliResult<Value> {
    for a in aligned {
        let v = loaded.grid.view(a.view_index);
        let name = view_name(v.row, v.col);
        write_png(&dir.join(format!("{name}.png")), &a.image)?;
        write_mask_png(&dir.join(format!("{name}_mask.png")), &a.image)?;
    }
    let registration = alignment_json(&loaded.grid, aligned);
    write_json(&dir.join("registration.json"), &registration)?;
    Ok(registration)
}

/// Registers and warps the views into `aligned/`.
pub fn align<E: Executor>(cfg: &PipelineConfig, flags: Flags, exec: &E) -> CliResult<Value> {
    let loaded = load_grid(cfg)?;
    let aligned = align_views(cfg, &loaded.grid, loaded.benchmark, flags.skip_align, exec)?;
    let registration = write_aligned(&cfg.output.join("aligned"), &loaded, &aligned)?;
    Ok(json!({
        "command": "align",
        "benchmark_view": loaded.benchmark,
        "canvas": registration["canvas"],
        "offset": registration["offset"],
        "inliers": aligned.iter().map(|a| a.inlier_count).collect::<Vec<_>>(),
    }))
}

/// Trains the fusion network and writes it to the network path.
pub fn train<E: Executor>(cfg: &PipelineConfig, exec: &E) -> CliResult<Value> {
    let (net, outcome) = train_network(cfg, exec)?;
    let path = cfg.network_path();
    netfile::save(&path, &net)?;
    let history = json!({
        "epochs": cfg.train.epochs,
        "temperature": outcome.temperature,
        "loss_history": outcome.loss_history,
    });
    write_json(&path.with_extension("history.json"), &history)?;
    Ok(json!({
        "command": "train",
        "network": file_name(&path),
        "parameters": net.parameter_count(),
        "temperature": outcome.temperature,
        "final_loss": outcome.loss_history.last(),
    }))
}

fn obtain_network<E: Executor>(cfg: &PipelineConfig, flags: Flags, exec: &E) -> CliResult<FusionNet> {
    let path = cfg.network_path();
    if flags.train {
        let (net, _) = train_network(cfg, exec)?;
        netfile::save(&path, &net)?;
        return Ok(net);
    }
    if !path.exists() {
        return Err(CliError::Config(format!(
            "no network at {}; run `train` first or pass --train",
            path.display()
        )));
    }
    netfile::load(&path)
}

/// Full pipeline: alignment, block selection, fusion and evaluation.
pub fn run<E: Executor>(cfg: &PipelineConfig, flags: Flags, exec: &E) -> CliResult<Value> {
    let net = obtain_network(cfg, flags, exec)?;
    let loaded = load_grid(cfg)?;
    let out = &cfg.output;
    if loaded.synth.is_some() {
        write_views(out, &loaded)?;
    }
    let outcome = run_loaded(cfg, flags, &net, loaded, exec)?;
    write_aligned(&out.join("aligned"), &outcome.loaded, &outcome.aligned)?;
    let blocks = blocks_json(&outcome.fusion);
    write_json(&out.join("blocks").join("selection.json"), &blocks)?;
    for (b, (_, img)) in outcome.fusion.blocks.iter().zip(&outcome.fusion.fused_blocks) {
        if matches!(b.source, BlockSource::Fused(_)) {
            let name = format!("block_r{}c{}.png", b.position.0, b.position.1);
            write_png(&out.join("fused").join(name), img)?;
        }
    }
    write_png(&out.join("result.png"), &outcome.fusion.image)?;
    write_mask_png(&out.join("result_mask.png"), &outcome.fusion.image)?;
    let (h, w) = outcome.fusion.image.size();
    let report = json!({
        "benchmark_view": outcome.loaded.benchmark,
        "skip_align": flags.skip_align,
        "skip_optimize": flags.skip_optimize,
        "network": file_name(&cfg.network_path()),
        "canvas": [h, w],
        "alignment": alignment_json(&outcome.loaded.grid, &outcome.aligned),
        "blocks": blocks,
        "metrics": metrics_json(&outcome.metrics),
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(json!({
        "command": "run",
        "canvas": [h, w],
        "metrics": metrics_json(&outcome.metrics),
    }))
}

fn read_image(path: &Path) -> CliResult<edof_core::ImageF> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => read_pfm(path),
        _ => read_png(path),
    }
}

/// Metrics of an image file, optionally against a reference of equal size.
pub fn eval(image: &Path, reference: Option<&Path>) -> CliResult<Value> {
    let img = read_image(image)?;
    let reference = reference.map(read_image).transpose()?;
    if let Some(r) = &reference {
        if r.size() != img.size() {
            return Err(CliError::Config("image and reference differ in size".into()));
        }
    }
    let m = evaluate(&img, reference.as_ref()).map_err(CliError::Fusion)?;
    Ok(json!({ "command": "eval", "metrics": metrics_json(&m) }))
}
