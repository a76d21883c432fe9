//! Dense 2-D fields and the discrete differential operators used by the solver.
//!
//! Fields are stored row-major as `f64`. The gradient uses forward differences
//! with a Neumann boundary (difference components at the last row/column are
//! zero) and the divergence uses backward differences with out-of-range terms
//! dropped. That pairing makes divergence the exact negative adjoint of the
//! gradient on flows with zero normal component at the lower/right boundary,
//! which is the only kind of flow the solver ever produces.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("data length {got} does not match a {height}x{width} grid")]
    ShapeMismatch {
        height: usize,
        width: usize,
        got: usize,
    },
    #[error("intensity {value} at flat index {index} is not a finite value in [0,1]")]
    IntensityOutOfRange { index: usize, value: f64 },
}

/// Dense 2-D scalar field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != height * width {
            return Err(GridError::ShapeMismatch {
                height,
                width,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.height && j < self.width);
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.height && j < self.width);
        self.data[i * self.width + j] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two same-shape fields.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(self.same_shape(other), "zip_map requires matching shapes");
        ScalarField {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute pointwise difference against `other`.
    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        assert!(self.same_shape(other), "sup_diff requires matching shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ScalarField {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.width + j]
    }
}

/// Dense 2-D vector field: per pixel a pair (y, x) where y is the
/// row-direction component and x the column-direction component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    height: usize,
    width: usize,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl VectorField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            y: vec![0.0; height * width],
            x: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.height && j < self.width);
        self.y[i * self.width + j]
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.height && j < self.width);
        self.x[i * self.width + j]
    }

    #[inline]
    pub fn set_y(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.height && j < self.width);
        self.y[i * self.width + j] = value;
    }

    #[inline]
    pub fn set_x(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.height && j < self.width);
        self.x[i * self.width + j] = value;
    }

    pub fn same_shape_as(&self, f: &ScalarField) -> bool {
        self.height == f.height() && self.width == f.width()
    }

    pub fn all_finite(&self) -> bool {
        self.y.iter().chain(&self.x).all(|v| v.is_finite())
    }
}

/// Image intensities, kept finite and inside [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    field: ScalarField,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, GridError> {
        Self::from_field(ScalarField::from_vec(height, width, values)?)
    }

    pub fn from_field(field: ScalarField) -> Result<Self, GridError> {
        for (index, &value) in field.data().iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(GridError::IntensityOutOfRange { index, value });
            }
        }
        Ok(Self { field })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, GridError> {
        Self::from_field(ScalarField::from_fn(height, width, f))
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.field
    }
}

impl std::ops::Deref for ImageGrid {
    type Target = ScalarField;

    fn deref(&self) -> &ScalarField {
        &self.field
    }
}

/// Forward-difference gradient with a Neumann boundary: the y component of the
/// last row and the x component of the last column are zero.
pub fn gradient(f: &ScalarField) -> VectorField {
    let (h, w) = (f.height(), f.width());
    let mut out = VectorField::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            if i + 1 < h {
                out.set_y(i, j, f.get(i + 1, j) - f.get(i, j));
            }
            if j + 1 < w {
                out.set_x(i, j, f.get(i, j + 1) - f.get(i, j));
            }
        }
    }
    out
}

/// Backward-difference divergence, the negative adjoint of [`gradient`]:
/// div p(i,j) = y(i,j) - y(i-1,j) + x(i,j) - x(i,j-1), out-of-range terms dropped.
pub fn divergence(p: &VectorField) -> ScalarField {
    ScalarField::from_fn(p.height(), p.width(), |i, j| {
        let mut d = p.y(i, j) + p.x(i, j);
        if i > 0 {
            d -= p.y(i - 1, j);
        }
        if j > 0 {
            d -= p.x(i, j - 1);
        }
        d
    })
}

/// Sum of `f` over the (2*radius+1)^2 box around each pixel, windows clipped
/// at the borders. Separable: one horizontal pass, one vertical pass.
pub fn box_neighborhood_sum(f: &ScalarField, radius: usize) -> ScalarField {
    let (h, w) = (f.height(), f.width());
    let horizontal = ScalarField::from_fn(h, w, |i, j| {
        let lo = j.saturating_sub(radius);
        let hi = (j + radius).min(w.saturating_sub(1));
        (lo..=hi).map(|jj| f.get(i, jj)).sum()
    });
    ScalarField::from_fn(h, w, |i, j| {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(h.saturating_sub(1));
        (lo..=hi).map(|ii| horizontal.get(ii, j)).sum()
    })
}
