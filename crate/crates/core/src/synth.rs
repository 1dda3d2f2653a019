//! Synthetic varifocal multiview grids with known ground truth.
//!
//! A scene is a stack of fronto-parallel textured layers at different depths.
//! Each view composites the layers with a depth-dependent Gaussian defocus
//! (σ = κ·|layer depth − focus depth|), warps the result by the view's
//! homography and adds Gaussian noise. Because the layers are planar, one
//! homography per view relates it exactly to the canonical frame.
//!
//! Textures are procedural (value noise plus modulated checker detail) and
//! defined at every coordinate, so views are rendered from a raster padded
//! around the canonical frame and never show empty canvas.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::{dlt, frame_corners, warp_image, Homography};
use crate::grid::{View, ViewGrid};
use crate::image::gaussian_blur;
use crate::{Error, ImageF, Result};

/// Axis-aligned rectangle in canonical pixel coordinates, `[x, x + width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    /// Membership, with edges lying on the canvas border extended outwards so
    /// that layers continue beyond the canonical frame.
    fn contains_extended(&self, x: f64, y: f64, canvas: (usize, usize)) -> bool {
        let (ch, cw) = canvas;
        let x0 = if self.x == 0 { f64::NEG_INFINITY } else { self.x as f64 };
        let y0 = if self.y == 0 { f64::NEG_INFINITY } else { self.y as f64 };
        let x1 = if self.x + self.width >= cw { f64::INFINITY } else { (self.x + self.width) as f64 };
        let y1 = if self.y + self.height >= ch { f64::INFINITY } else { (self.y + self.height) as f64 };
        x >= x0 && x < x1 && y >= y0 && y < y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    /// Depth in scene units.
    pub depth: f64,
    pub texture_seed: u64,
    pub region: Rect,
}

/// Layers are painted in order; later layers occlude earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub layers: Vec<Layer>,
    /// `(height, width)` of the canonical frame.
    pub canvas: (usize, usize),
    pub rng_seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.canvas;
        if h == 0 || w == 0 {
            return Err(Error::param("scene canvas must be nonempty"));
        }
        if self.layers.len() < 2 {
            return Err(Error::param("a scene needs at least two layers"));
        }
        let first = self.layers[0].depth;
        if self.layers.iter().all(|l| l.depth == first) {
            return Err(Error::param("scene layers need at least two distinct depths"));
        }
        if self.layers.iter().any(|l| !l.depth.is_finite()) {
            return Err(Error::param("layer depths must be finite"));
        }
        for y in 0..h {
            for x in 0..w {
                if self.layer_at(x as f64, y as f64).is_none() {
                    return Err(Error::param("layer regions must cover the canvas"));
                }
            }
        }
        Ok(())
    }

    /// Index of the topmost layer covering canonical point `(x, y)`.
    pub fn layer_at(&self, x: f64, y: f64) -> Option<usize> {
        self.layers.iter().rposition(|l| l.region.contains_extended(x, y, self.canvas))
    }

    /// A random scene: a full-frame background plus `n_layers - 1` rectangles
    /// covering 30–55 % of each side, with depths cycling through `depths`.
    pub fn random(canvas: (usize, usize), depths: &[f64], n_layers: usize, seed: u64) -> Result<Self> {
        if depths.len() < 2 || n_layers < 2 {
            return Err(Error::param("random scenes need at least two depths and two layers"));
        }
        let (h, w) = canvas;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce9_e000);
        let offset = rng.gen_range(0..depths.len());
        let mut layers = vec![Layer {
            depth: depths[offset],
            texture_seed: rng.gen(),
            region: Rect { x: 0, y: 0, width: w, height: h },
        }];
        for i in 1..n_layers {
            let rw = ((w as f64) * rng.gen_range(0.30..0.55)) as usize;
            let rh = ((h as f64) * rng.gen_range(0.30..0.55)) as usize;
            let x = rng.gen_range(0..=w - rw);
            let y = rng.gen_range(0..=h - rh);
            layers.push(Layer {
                depth: depths[(offset + i) % depths.len()],
                texture_seed: rng.gen(),
                region: Rect { x, y, width: rw, height: rh },
            });
        }
        Ok(SceneSpec {
            layers,
            canvas,
            rng_seed: seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSlot {
    pub focus_depth: f64,
    /// Maps canonical coordinates to this view's pixel coordinates.
    pub homography: Homography,
}

/// Capture setup for a `rows × cols` grid, slots stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSpec {
    pub rows: usize,
    pub cols: usize,
    pub slots: Vec<ViewSlot>,
    /// κ: defocus σ in pixels per scene unit of depth mismatch.
    pub blur_coefficient: f64,
    pub noise_sigma: f64,
}

impl CaptureSpec {
    pub fn validate(&self, scene: &SceneSpec) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.slots.len() != self.rows * self.cols {
            return Err(Error::param("capture needs exactly rows x cols slots"));
        }
        if self.blur_coefficient < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::param("blur coefficient and noise sigma must be nonnegative"));
        }
        for slot in &self.slots {
            if slot.homography.inverse().is_err() {
                return Err(Error::NotInvertible);
            }
        }
        for layer in &scene.layers {
            if !self.slots.iter().any(|s| s.focus_depth == layer.depth) {
                return Err(Error::param("every layer depth must be some view's focus depth"));
            }
        }
        Ok(())
    }
}

/// Evenly spaced depths `0, 1, …, n - 1`.
pub fn depth_levels(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureOptions {
    pub n_depths: usize,
    /// Maximum translation per axis, pixels.
    pub max_shift: f64,
    /// Maximum corner displacement of the perspective perturbation, as a
    /// fraction of the smaller canvas side.
    pub perturbation: f64,
    pub blur_coefficient: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        CaptureOptions {
            n_depths: 3,
            max_shift: 20.0,
            perturbation: 0.02,
            blur_coefficient: 1.5,
            noise_sigma: 0.005,
            seed: 0,
        }
    }
}

/// Depth index for grid slot `(row, col)`: a cyclic Latin-square layout so
/// horizontally adjacent views never share a focus depth.
pub fn focus_index(row: usize, col: usize, n_depths: usize) -> usize {
    let stride = if n_depths <= 3 { 1 } else { 3 };
    (row * stride + col) % n_depths
}

/// 3×3 capture with cyclic focus depths. The centre slot is the canonical
/// frame (identity); every other slot gets a random translation of up to
/// `max_shift` pixels composed with a random corner perturbation.
pub fn default_capture(options: &CaptureOptions, canvas: (usize, usize)) -> Result<CaptureSpec> {
    if options.n_depths == 0 {
        return Err(Error::param("n_depths must be at least 1"));
    }
    if options.n_depths > 9 {
        return Err(Error::param("n_depths must be at most 9"));
    }
    if options.max_shift < 0.0 || options.perturbation < 0.0 {
        return Err(Error::param("shift and perturbation must be nonnegative"));
    }
    let depths = depth_levels(options.n_depths);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xca97_0000);
    let corners = frame_corners(canvas);
    let max_disp = options.perturbation * canvas.0.min(canvas.1) as f64 / core::f64::consts::SQRT_2;
    let mut slots = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            let focus_depth = depths[focus_index(r, c, options.n_depths)];
            let homography = if (r, c) == (1, 1) {
                Homography::identity()
            } else {
                let mut shift = (0.0, 0.0);
                if options.max_shift > 0.0 {
                    shift = (
                        rng.gen_range(-options.max_shift..=options.max_shift),
                        rng.gen_range(-options.max_shift..=options.max_shift),
                    );
                }
                let perturb = if max_disp > 0.0 {
                    let moved = corners.map(|(x, y)| {
                        (x + rng.gen_range(-max_disp..=max_disp), y + rng.gen_range(-max_disp..=max_disp))
                    });
                    dlt(&corners, &moved)?
                } else {
                    Homography::identity()
                };
                Homography::translation(shift.0, shift.1).compose(&perturb)
            };
            slots.push(ViewSlot { focus_depth, homography });
        }
    }
    Ok(CaptureSpec {
        rows: 3,
        cols: 3,
        slots,
        blur_coefficient: options.blur_coefficient,
        noise_sigma: options.noise_sigma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Zero-blur, noise-free composite in the canonical frame.
    pub all_in_focus: ImageF,
    /// Canonical → view homography per slot.
    pub homographies: Vec<Homography>,
    pub focus_depths: Vec<f64>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic lattice value in `[-1, 1]`.
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1656_67b1) ^ (iy as u64).wrapping_mul(0x27d4_eb2f_1656_67c5)));
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn value_noise(seed: u64, x: f64, y: f64, spacing: f64) -> f64 {
    let (gx, gy) = (x / spacing, y / spacing);
    let (x0, y0) = (gx.floor(), gy.floor());
    let (tx, ty) = (gx - x0, gy - y0);
    let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

/// Procedural texture value at canonical coordinates `(x, y)`, in `[0, 1]`.
pub fn texture_value(seed: u64, x: f64, y: f64) -> f64 {
    let s = splitmix(seed);
    let base = 0.5
        + 0.26 * value_noise(s, x, y, 37.0)
        + 0.16 * value_noise(s ^ 0x11, x, y, 13.0)
        + 0.08 * value_noise(s ^ 0x22, x, y, 5.0);
    let modulation = 0.5 + 0.5 * value_noise(s ^ 0x33, x, y, 23.0);
    let period = 3.0;
    let (cx, cy) = ((x / period).floor() as i64, (y / period).floor() as i64);
    let checker = if (cx + cy).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    (base + 0.12 * modulation * checker).clamp(0.0, 1.0)
}

/// Texture sampled on `[0, h) × [0, w)`.
pub fn texture_image(h: usize, w: usize, seed: u64) -> ImageF {
    ImageF::from_fn(h, w, |y, x| texture_value(seed, x as f64, y as f64))
}

/// Pre-rendered layer rasters over the canonical frame padded by `margin`.
pub struct Renderer<'a> {
    scene: &'a SceneSpec,
    margin: usize,
    layers: Vec<ImageF>,
    /// Topmost layer index per padded pixel.
    owner: Vec<usize>,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a SceneSpec, margin: usize) -> Result<Self> {
        scene.validate()?;
        let (h, w) = scene.canvas;
        let (ph, pw) = (h + 2 * margin, w + 2 * margin);
        let m = margin as f64;
        let layers = scene
            .layers
            .iter()
            .map(|l| ImageF::from_fn(ph, pw, |y, x| texture_value(l.texture_seed, x as f64 - m, y as f64 - m)))
            .collect();
        let mut owner = vec![0; ph * pw];
        for y in 0..ph {
            for x in 0..pw {
                owner[y * pw + x] = scene.layer_at(x as f64 - m, y as f64 - m).unwrap_or(0);
            }
        }
        Ok(Renderer {
            scene,
            margin,
            layers,
            owner,
        })
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    /// Padded composite with per-layer blur `sigmas[layer]`.
    pub fn composite(&self, sigmas: &[f64]) -> ImageF {
        let blurred: Vec<ImageF> = self
            .layers
            .iter()
            .zip(sigmas)
            .map(|(l, &s)| gaussian_blur(l, s))
            .collect();
        let (ph, pw) = self.layers[0].size();
        let mut out = ImageF::new(ph, pw, 1);
        for (i, &o) in self.owner.iter().enumerate() {
            out.data_mut()[i] = blurred[o].data()[i];
        }
        out
    }

    /// Maps padded-raster coordinates into the frame reached by `h`
    /// (canonical → target).
    fn through_padding(&self, h: &Homography) -> Homography {
        let m = self.margin as f64;
        h.compose(&Homography::translation(-m, -m))
    }

    /// Zero-blur composite seen through `h` (canonical → target frame) on a
    /// `canvas` of the given size.
    pub fn reference(&self, h: &Homography, canvas: (usize, usize)) -> Result<ImageF> {
        let sharp = self.composite(&vec![0.0; self.layers.len()]);
        warp_image(&sharp, &self.through_padding(h), canvas)
    }

    /// The all-in-focus image in the canonical frame.
    pub fn all_in_focus(&self) -> ImageF {
        let sharp = self.composite(&vec![0.0; self.layers.len()]);
        let (h, w) = self.scene.canvas;
        sharp.crop(self.margin, self.margin, h, w)
    }
}

/// Padding needed so that every view frame pulls only from the padded
/// raster, including the blur footprint.
fn required_margin(scene: &SceneSpec, capture: &CaptureSpec) -> Result<usize> {
    let (h, w) = scene.canvas;
    let max_depth_gap = scene
        .layers
        .iter()
        .flat_map(|l| capture.slots.iter().map(move |s| (l.depth - s.focus_depth).abs()))
        .fold(0.0, f64::max);
    let blur_reach = (3.0 * capture.blur_coefficient * max_depth_gap).ceil() + 2.0;
    let mut reach: f64 = 0.0;
    for slot in &capture.slots {
        let inv = slot.homography.inverse()?;
        for (x, y) in frame_corners(scene.canvas) {
            let (cx, cy) = inv.apply(x, y).ok_or(Error::DegenerateHomography)?;
            reach = reach.max(-cx).max(-cy).max(cx - (w as f64 - 1.0)).max(cy - (h as f64 - 1.0));
        }
    }
    Ok((reach.max(0.0) + blur_reach + 2.0).ceil() as usize)
}

/// Extra padding beyond what the views need, so references over expanded
/// alignment canvases are still fully rendered.
pub const REFERENCE_SLACK: usize = 64;

fn gaussian_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * core::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

/// Adds zero-mean Gaussian noise and clamps to `[0, 1]`.
pub fn add_noise(image: &mut ImageF, sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image.data_mut();
    for pair in data.chunks_mut(2) {
        let (a, b) = gaussian_pair(&mut rng);
        pair[0] = (pair[0] + sigma * a).clamp(0.0, 1.0);
        if pair.len() > 1 {
            pair[1] = (pair[1] + sigma * b).clamp(0.0, 1.0);
        }
    }
}

/// Renders every view of the capture plus the ground truth.
pub fn render_scene(scene: &SceneSpec, capture: &CaptureSpec) -> Result<(ViewGrid, GroundTruth)> {
    capture.validate(scene)?;
    let margin = required_margin(scene, capture)? + REFERENCE_SLACK;
    let renderer = Renderer::new(scene, margin)?;
    render_with(&renderer, scene, capture)
}

pub(crate) fn render_with(renderer: &Renderer<'_>, scene: &SceneSpec, capture: &CaptureSpec) -> Result<(ViewGrid, GroundTruth)> {
    let mut views = Vec::with_capacity(capture.slots.len());
    for (i, slot) in capture.slots.iter().enumerate() {
        let sigmas: Vec<f64> = scene
            .layers
            .iter()
            .map(|l| capture.blur_coefficient * (l.depth - slot.focus_depth).abs())
            .collect();
        let composite = renderer.composite(&sigmas);
        let mut image = warp_image(&composite, &renderer.through_padding(&slot.homography), scene.canvas)?;
        add_noise(&mut image, capture.noise_sigma, splitmix(scene.rng_seed ^ splitmix(i as u64 + 1)));
        views.push(View {
            image,
            row: i / capture.cols,
            col: i % capture.cols,
            focus_depth: Some(slot.focus_depth),
        });
    }
    let grid = ViewGrid::new(capture.rows, capture.cols, views)?;
    let truth = GroundTruth {
        all_in_focus: renderer.all_in_focus(),
        homographies: capture.slots.iter().map(|s| s.homography).collect(),
        focus_depths: capture.slots.iter().map(|s| s.focus_depth).collect(),
    };
    Ok((grid, truth))
}

/// Options for [`generate`]: a random scene plus a default capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub canvas: (usize, usize),
    pub n_layers: usize,
    pub capture: CaptureOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            canvas: (512, 512),
            n_layers: 4,
            capture: CaptureOptions::default(),
        }
    }
}

/// A rendered synthetic grid with everything needed to score it.
#[derive(Debug, Clone)]
pub struct SynthGrid {
    pub scene: SceneSpec,
    pub capture: CaptureSpec,
    pub grid: ViewGrid,
    pub truth: GroundTruth,
}

impl SynthGrid {
    /// Planted view → benchmark homography (`H_b · H_v⁻¹`).
    pub fn planted_registration(&self, view: usize, benchmark: usize) -> Result<Homography> {
        let hb = self.truth.homographies[benchmark];
        let hv = self.truth.homographies[view].inverse()?;
        Ok(hb.compose(&hv))
    }

    /// All-in-focus reference through `h` (canonical → target) on `canvas`.
    pub fn reference(&self, h: &Homography, canvas: (usize, usize)) -> Result<ImageF> {
        let margin = required_margin(&self.scene, &self.capture)? + REFERENCE_SLACK;
        Renderer::new(&self.scene, margin)?.reference(h, canvas)
    }
}

/// Random scene + default capture, both derived from `seed`.
pub fn generate(options: &GridOptions, seed: u64) -> Result<SynthGrid> {
    let depths = depth_levels(options.capture.n_depths);
    let scene = SceneSpec::random(options.canvas, &depths, options.n_layers, seed)?;
    let capture = default_capture(
        &CaptureOptions {
            seed,
            ..options.capture
        },
        options.canvas,
    )?;
    let (grid, truth) = render_scene(&scene, &capture)?;
    Ok(SynthGrid {
        scene,
        capture,
        grid,
        truth,
    })
}
