//! Seeded synthetic test images: simple shapes on a uniform background with
//! additive Gaussian noise, plus the exact ground-truth mask.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::grid::{ImageGrid, ScalarField};
use crate::metrics::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic image spec: {0}")]
    InvalidSpec(String),
}

/// A foreground shape with its intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc {
        center_i: f64,
        center_j: f64,
        radius: f64,
        intensity: f64,
    },
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
        intensity: f64,
    },
}

impl Shape {
    fn intensity(&self) -> f64 {
        match *self {
            Shape::Disc { intensity, .. } | Shape::Rect { intensity, .. } => intensity,
        }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        match *self {
            Shape::Disc {
                center_i,
                center_j,
                radius,
                ..
            } => {
                let di = i as f64 - center_i;
                let dj = j as f64 - center_j;
                di * di + dj * dj <= radius * radius
            }
            Shape::Rect {
                top,
                left,
                height,
                width,
                ..
            } => i >= top && i < top + height && j >= left && j < left + width,
        }
    }

    fn in_bounds(&self, grid_height: usize, grid_width: usize) -> bool {
        match *self {
            Shape::Disc {
                center_i,
                center_j,
                radius,
                ..
            } => {
                radius >= 0.0
                    && center_i - radius >= 0.0
                    && center_j - radius >= 0.0
                    && center_i + radius <= (grid_height - 1) as f64
                    && center_j + radius <= (grid_width - 1) as f64
            }
            Shape::Rect {
                top,
                left,
                height,
                width,
                ..
            } => height >= 1 && width >= 1 && top + height <= grid_height && left + width <= grid_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub shapes: Vec<Shape>,
    pub background: f64,
    /// Standard deviation of the additive Gaussian noise; samples are drawn
    /// per pixel in row-major order and the result is clipped to [0,1].
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidSpec(
                "image dimensions must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(SynthError::InvalidSpec(format!(
                "background intensity {} outside [0,1]",
                self.background
            )));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(SynthError::InvalidSpec(format!(
                "noise sigma {} must be finite and non-negative",
                self.noise_sigma
            )));
        }
        for (idx, shape) in self.shapes.iter().enumerate() {
            if !(0.0..=1.0).contains(&shape.intensity()) {
                return Err(SynthError::InvalidSpec(format!(
                    "shape {idx} intensity {} outside [0,1]",
                    shape.intensity()
                )));
            }
            if !shape.in_bounds(self.height, self.width) {
                return Err(SynthError::InvalidSpec(format!(
                    "shape {idx} does not fit inside {}x{}",
                    self.height, self.width
                )));
            }
        }
        Ok(())
    }
}

/// Render `spec`: shapes painted over the background in order, seeded
/// Gaussian noise added pixel by pixel, intensities clipped to [0,1]. The
/// mask marks every pixel covered by any shape.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(ImageGrid, BinaryMask), SynthError> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut clean = ScalarField::filled(h, w, spec.background);
    let mut mask = vec![0u8; h * w];
    for shape in &spec.shapes {
        for i in 0..h {
            for j in 0..w {
                if shape.contains(i, j) {
                    clean.set(i, j, shape.intensity());
                    mask[i * w + j] = 1;
                }
            }
        }
    }
    let values = if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| SynthError::InvalidSpec(format!("bad noise parameters: {e}")))?;
        clean
            .data()
            .iter()
            .map(|&v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
            .collect()
    } else {
        clean.data().to_vec()
    };
    let image = ImageGrid::new(h, w, values)
        .expect("clipped synthetic intensities are always valid");
    Ok((image, BinaryMask::from_bits(h, w, mask)))
}
