//! Colour-image segmentation: pixels are clustered as points in RGB space
//! with nearest-mean assignment, and outliers are typed by the cluster they
//! were assigned to before flagging.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageEncoder, ImageReader};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{fit, AlgoConfig, AssignmentRule, ClusteringResult};
use crate::constraints::ConstraintConfig;
use crate::data::ObservationSet;
use crate::error::{Error, Result};

/// Row-major RGB pixels with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        if let Some(bad) = pixels.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Image(format!("channel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [f64; 3]) {
        self.pixels[y * self.width + x] = color;
    }

    pub fn to_observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(
            self.pixels.iter().flatten().copied().collect(),
            self.pixels.len(),
            3,
        )
    }

    fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flatten()
            .map(|v| (v * 255.0).round() as u8)
            .collect()
    }
}

fn image_err(e: impl std::fmt::Display) -> Error {
    Error::Image(e.to_string())
}

/// Decodes a PNG or binary PPM file. Alpha is dropped; 8-bit samples are
/// divided by 255 and 16-bit samples by 65535.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelGrid> {
    let path = path.as_ref();
    let img = ImageReader::open(path)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    from_dynamic(img)
}

pub fn decode_image(bytes: &[u8]) -> Result<PixelGrid> {
    let img = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()?
        .decode()
        .map_err(image_err)?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<PixelGrid> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => img
            .to_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 65535.0))
            .collect(),
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 255.0))
            .collect(),
    };
    PixelGrid::new(w, h, pixels)
}

/// Binary PPM (P6), 8 bits per channel.
pub fn encode_ppm(grid: &PixelGrid) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(
            &grid.to_rgb8(),
            grid.width as u32,
            grid.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(image_err)?;
    Ok(out)
}

pub fn write_ppm(grid: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_ppm(grid)?)?;
    w.flush()?;
    Ok(())
}

pub fn write_png(grid: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    image::save_buffer(
        path,
        &grid.to_rgb8(),
        grid.width as u32,
        grid.height as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(image_err)
}

/// Segmentation settings: beta 0.2, T 0.02, c 20, c1 0.1, nearest-mean
/// assignment.
pub fn default_config() -> AlgoConfig {
    AlgoConfig {
        beta: 0.2,
        threshold: 0.02,
        constraint: ConstraintConfig { c: 20.0, c1: 0.1 },
        assignment: AssignmentRule::Euclidean,
        ..AlgoConfig::default()
    }
}

const BROWN: [f64; 3] = [0.55, 0.27, 0.07];

fn hsv(h: f64) -> [f64; 3] {
    let h6 = (h.fract() * 6.0).rem_euclid(6.0);
    let x = 1.0 - (h6 % 2.0 - 1.0).abs();
    match h6 as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

/// Colour for outliers of type `j`: white, brown, then hues spaced by the
/// golden ratio.
pub fn outlier_color(j: usize) -> [f64; 3] {
    match j {
        0 => [1.0, 1.0, 1.0],
        1 => BROWN,
        _ => hsv((j - 2) as f64 * 0.618_033_988_749_895),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    pub result: ClusteringResult,
    /// Fitted means clamped to `[0, 1]`, one per cluster.
    pub cluster_colors: Vec<[f64; 3]>,
    /// `(type, colour)` for each outlier type that occurs.
    pub outlier_colors: Vec<(usize, [f64; 3])>,
}

impl Segmentation {
    pub fn k(&self) -> usize {
        self.cluster_colors.len()
    }

    pub fn palette_len(&self) -> usize {
        self.cluster_colors.len() + self.outlier_colors.len()
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for (&z, &f) in self
            .result
            .assignments
            .iter()
            .zip(&self.result.outlier_flags)
        {
            if !f {
                counts[z] += 1;
            }
        }
        counts
    }

    pub fn outlier_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for t in self.result.outlier_types.iter().flatten() {
            counts[*t] += 1;
        }
        counts
    }
}

/// Clusters the pixels of `grid` into `k` groups.
pub fn segment(grid: &PixelGrid, k: usize, cfg: &AlgoConfig) -> Result<Segmentation> {
    if k < 2 {
        return Err(Error::InvalidConfig("segmentation needs k >= 2".into()));
    }
    let data = grid.to_observations()?;
    let result = fit(&data, k, cfg)?;
    let cluster_colors = result
        .params
        .components
        .iter()
        .map(|c| [0, 1, 2].map(|d| c.mean[d].clamp(0.0, 1.0)))
        .collect();
    let mut present = vec![false; k];
    for t in result.outlier_types.iter().flatten() {
        present[*t] = true;
    }
    let outlier_colors = (0..k)
        .filter(|&j| present[j])
        .map(|j| (j, outlier_color(j)))
        .collect();
    Ok(Segmentation {
        width: grid.width,
        height: grid.height,
        result,
        cluster_colors,
        outlier_colors,
    })
}

/// Regular pixels take their cluster colour, outliers their type colour.
pub fn reconstruct(seg: &Segmentation) -> Result<PixelGrid> {
    let type_color: Vec<[f64; 3]> = (0..seg.k()).map(outlier_color).collect();
    let pixels = seg
        .result
        .assignments
        .par_iter()
        .zip(&seg.result.outlier_types)
        .map(|(&z, t)| match t {
            Some(t) => type_color[*t],
            None => seg.cluster_colors[z],
        })
        .collect();
    PixelGrid::new(seg.width, seg.height, pixels)
}

/// JSON sidecar describing a segmentation. Cluster order matches the
/// `means`, `cluster_counts` and `outlier_counts` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub config: AlgoConfig,
    pub objective: f64,
    pub iterations: usize,
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 3]>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub cluster_counts: Vec<usize>,
    pub outlier_counts: Vec<usize>,
    pub cluster_colors: Vec<[f64; 3]>,
    pub outlier_colors: Vec<OutlierColor>,
}

/// Colour of one outlier type; `cluster` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierColor {
    pub cluster: usize,
    pub color: [f64; 3],
}

impl SegmentationSummary {
    pub fn new(seg: &Segmentation, cfg: &AlgoConfig) -> Self {
        let params = &seg.result.params;
        Self {
            width: seg.width,
            height: seg.height,
            k: seg.k(),
            config: cfg.clone(),
            objective: seg.result.objective,
            iterations: seg.result.iterations,
            weights: params.weights.clone(),
            means: params
                .components
                .iter()
                .map(|c| [c.mean[0], c.mean[1], c.mean[2]])
                .collect(),
            covariances: params
                .components
                .iter()
                .map(|c| {
                    c.cov
                        .matrix()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect()
                })
                .collect(),
            cluster_counts: seg.cluster_counts(),
            outlier_counts: seg.outlier_counts(),
            cluster_colors: seg.cluster_colors.clone(),
            outlier_colors: seg
                .outlier_colors
                .iter()
                .map(|&(j, color)| OutlierColor {
                    cluster: j + 1,
                    color,
                })
                .collect(),
        }
    }
}

/// Left half pure blue, right half pure green, with a fraction of pixels
/// replaced by white. Returns the image and each pixel's true region
/// (`None` for noise).
pub fn two_tone(
    width: usize,
    height: usize,
    noise_fraction: f64,
    seed: u64,
) -> Result<(PixelGrid, Vec<Option<usize>>)> {
    const BLUE: [f64; 3] = [0.0, 0.0, 1.0];
    const GREEN: [f64; 3] = [0.0, 1.0, 0.0];
    let n = width * height;
    let mut truth: Vec<Option<usize>> = (0..n)
        .map(|i| Some(usize::from(i % width >= width / 2)))
        .collect();
    let mut pixels: Vec<[f64; 3]> = truth
        .iter()
        .map(|t| if *t == Some(0) { BLUE } else { GREEN })
        .collect();
    let noisy = (noise_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in sample(&mut rng, n, noisy.min(n)) {
        pixels[i] = [1.0; 3];
        truth[i] = None;
    }
    Ok((PixelGrid::new(width, height, pixels)?, truth))
}
