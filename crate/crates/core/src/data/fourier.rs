use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::idx::{ImageDataset, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::field::C64;

/// Two-dimensional DFT with negative exponent and no normalization factor.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_plan: Arc<dyn Fft<f64>>,
    col_plan: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_plan: planner.plan_fft_forward(cols),
            col_plan: planner.plan_fft_forward(rows),
        }
    }

    pub fn transform(&self, image: ArrayView2<'_, f64>) -> Array2<C64> {
        assert_eq!(image.dim(), (self.rows, self.cols), "image shape");
        let mut out = image.mapv(|v| C64::new(v, 0.0));
        for mut row in out.rows_mut() {
            let mut buf = row.to_vec();
            self.row_plan.process(&mut buf);
            row.assign(&ndarray::ArrayView1::from(&buf));
        }
        for mut col in out.columns_mut() {
            let mut buf = col.to_vec();
            self.col_plan.process(&mut buf);
            col.assign(&ndarray::ArrayView1::from(&buf));
        }
        out
    }
}

/// Moves the zero frequency of each axis to index `n / 2`.
pub fn fftshift(spectrum: &Array2<C64>) -> Array2<C64> {
    let (r, c) = spectrum.dim();
    Array2::from_shape_fn((r, c), |(i, j)| spectrum[[(i + r - r / 2) % r, (j + c - c / 2) % c]])
}

/// Start of a centered `k`-wide window in a 28-wide grid.
pub fn crop_start(k: usize) -> usize {
    (IMAGE_SIDE - k) / 2
}

fn check_crop(k: usize) -> Result<()> {
    if !(1..=IMAGE_SIDE).contains(&k) {
        return Err(Error::Argument(format!("crop size {k} outside 1..=28")));
    }
    Ok(())
}

/// Centered `k x k` window of the shifted spectrum of a 28x28 image, without scaling.
pub fn fourier_crop(image: ArrayView2<'_, f64>, k: usize) -> Result<Array2<C64>> {
    check_crop(k)?;
    if image.dim() != (IMAGE_SIDE, IMAGE_SIDE) {
        return Err(Error::Argument(format!("image must be 28x28, got {:?}", image.dim())));
    }
    Ok(crop_with(&Fft2::new(IMAGE_SIDE, IMAGE_SIDE), image, k))
}

fn crop_with(fft: &Fft2, image: ArrayView2<'_, f64>, k: usize) -> Array2<C64> {
    let shifted = fftshift(&fft.transform(image));
    let s0 = crop_start(k);
    shifted.slice(s![s0..s0 + k, s0..s0 + k]).to_owned()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Full complex coefficients.
    Complex,
    /// Coefficient magnitudes as real amplitudes.
    Magnitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop_size: usize,
    pub encoding: Encoding,
    /// Mean crop energy over the training split after scaling.
    pub target_energy: f64,
}

impl PreprocessConfig {
    pub fn mzi() -> Self {
        Self {
            crop_size: 6,
            encoding: Encoding::Complex,
            target_energy: 1.0,
        }
    }

    pub fn dpu() -> Self {
        Self {
            crop_size: 4,
            ..Self::mzi()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_crop(self.crop_size)?;
        if !(self.target_energy.is_finite() && self.target_energy > 0.0) {
            return Err(Error::Config(format!(
                "target energy must be positive, got {}",
                self.target_energy
            )));
        }
        Ok(())
    }
}

/// Crop pipeline with its amplitude scale frozen from a training split.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    config: PreprocessConfig,
    scale: f64,
    fft: Fft2,
}

impl Preprocessor {
    /// Fits the scale so the mean crop energy over `train` equals the target.
    pub fn fit(config: PreprocessConfig, train: &ImageDataset) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Argument("cannot fit a crop scale on an empty dataset".into()));
        }
        let mut p = Self {
            config,
            scale: 1.0,
            fft: Fft2::new(IMAGE_SIDE, IMAGE_SIDE),
        };
        let mean = (0..train.len())
            .map(|i| p.crop_raw(train.image(i)).iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / train.len() as f64;
        if mean <= 0.0 {
            return Err(Error::Argument("training crops carry no energy".into()));
        }
        p.scale = (config.target_energy / mean).sqrt();
        Ok(p)
    }

    pub fn with_scale(config: PreprocessConfig, scale: f64) -> Result<Self> {
        config.validate()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("crop scale must be positive, got {scale}")));
        }
        Ok(Self {
            config,
            scale,
            fft: Fft2::new(IMAGE_SIDE, IMAGE_SIDE),
        })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn crop_raw(&self, image: ArrayView2<'_, f64>) -> Array2<C64> {
        let c = crop_with(&self.fft, image, self.config.crop_size);
        match self.config.encoding {
            Encoding::Complex => c,
            Encoding::Magnitude => c.mapv(|v| C64::new(v.norm(), 0.0)),
        }
    }

    /// Scaled crop of one image.
    pub fn crop(&self, image: ArrayView2<'_, f64>) -> Array2<C64> {
        let s = self.scale;
        self.crop_raw(image).mapv(|v| v * s)
    }
}
