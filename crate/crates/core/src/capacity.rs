//! MAP capacity refreshes under a Markov-random-field prior.
//!
//! Each refresh turns the current flows and level fields into new level
//! estimates through a mean-filtering multiplier, then rebuilds the
//! capacities as absolute deviations of the image from those levels. The
//! spatial capacity is the (optionally pixel-normalized) absolute difference
//! of the total source and sink capacity mass.

use crate::grid::{box_neighborhood_sum, ImageGrid, ScalarField};

/// Source/sink capacities, the scalar spatial capacity, and the level fields
/// the next refresh will read.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityFields {
    pub c_s: ScalarField,
    pub c_t: ScalarField,
    /// Spatial flow bound, >= 0.
    pub c: f64,
    pub s_level: ScalarField,
    pub t_level: ScalarField,
}

#[derive(Debug, Clone, Copy)]
pub struct PriorConfig {
    /// Smoothing weight of the prior, > 0.
    pub beta: f64,
    /// Neighborhood half-width; the window is (2*radius+1)^2, clipped at
    /// borders.
    pub radius: usize,
    /// When true the sink multiplier averages p_t + t_level instead of the
    /// default p_t + s_level.
    pub sink_uses_t_level: bool,
    /// Exponent clamp bound applied before exponentiation.
    pub exponent_cap: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta: 5.0,
            radius: 2,
            sink_uses_t_level: false,
            exponent_cap: 50.0,
        }
    }
}

/// exp(clamp(beta / (2 |N(x)|) * window_sum(flow + level), +-cap)) per pixel.
fn prior_multiplier(flow: &ScalarField, level: &ScalarField, cfg: &PriorConfig) -> ScalarField {
    let combined = flow.zip_map(level, |a, b| a + b);
    let sums = box_neighborhood_sum(&combined, cfg.radius);
    let ones = ScalarField::filled(flow.height(), flow.width(), 1.0);
    let counts = box_neighborhood_sum(&ones, cfg.radius);
    sums.zip_map(&counts, |sum, count| {
        let exponent = cfg.beta / (2.0 * count) * sum;
        exponent.clamp(-cfg.exponent_cap, cfg.exponent_cap).exp()
    })
}

/// New source capacity from the current source flow and level estimate.
/// Returns (C_s, next s level, multiplier G_s).
pub fn source_capacity_update(
    image: &ImageGrid,
    p_s: &ScalarField,
    s_level: &ScalarField,
    cfg: &PriorConfig,
) -> (ScalarField, ScalarField, ScalarField) {
    assert!(
        image.same_shape(p_s) && image.same_shape(s_level),
        "source capacity update requires matching shapes"
    );
    let g_s = prior_multiplier(p_s, s_level, cfg);
    let s_next = g_s.zip_map(p_s, |g, flow| g + cfg.beta * (1.0 - flow));
    let c_s = image.as_field().zip_map(&s_next, |i, s| (i - s).abs());
    (c_s, s_next, g_s)
}

/// New sink capacity from the current sink flow and level estimates.
/// Returns (C_t, next t level, multiplier G_t).
pub fn sink_capacity_update(
    image: &ImageGrid,
    p_t: &ScalarField,
    s_level: &ScalarField,
    t_level: &ScalarField,
    cfg: &PriorConfig,
) -> (ScalarField, ScalarField, ScalarField) {
    assert!(
        image.same_shape(p_t) && image.same_shape(s_level) && image.same_shape(t_level),
        "sink capacity update requires matching shapes"
    );
    let level = if cfg.sink_uses_t_level { t_level } else { s_level };
    let g_t = prior_multiplier(p_t, level, cfg);
    let t_next = g_t.zip_map(p_t, |g, flow| g + cfg.beta * flow);
    let c_t = image.as_field().zip_map(&t_next, |i, t| (i - t).abs());
    (c_t, t_next, g_t)
}

/// |sum C_s - sum C_t|, divided by the pixel count when `normalize` is set
/// (the default used by the segmenter) so the bound does not grow with image
/// size.
pub fn spatial_capacity_update(c_s: &ScalarField, c_t: &ScalarField, normalize: bool) -> f64 {
    assert!(
        c_s.same_shape(c_t),
        "spatial capacity update requires matching shapes"
    );
    let raw = (c_s.sum() - c_t.sum()).abs();
    if normalize && !c_s.is_empty() {
        raw / c_s.len() as f64
    } else {
        raw
    }
}
