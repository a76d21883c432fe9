//! Segmentation agreement metrics: Dice overlap and percentile Hausdorff
//! distance between binary masks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("mask shapes differ: {a_height}x{a_width} vs {b_height}x{b_width}")]
    ShapeMismatch {
        a_height: usize,
        a_width: usize,
        b_height: usize,
        b_width: usize,
    },
    #[error("Hausdorff distance is undefined for an empty mask")]
    EmptyMask,
}

/// Binary mask; stored as one byte per pixel, strictly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(u8::from(f(i, j)));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_bits(height: usize, width: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), height * width, "mask data length mismatch");
        assert!(
            data.iter().all(|&v| v <= 1),
            "mask values must be 0 or 1"
        );
        Self {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        debug_assert!(i < self.height && j < self.width);
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn is_set(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(idx, _)| (idx / width, idx % width))
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

fn check_shapes(a: &BinaryMask, b: &BinaryMask) -> Result<(), MetricError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricError::ShapeMismatch {
            a_height: a.height,
            a_width: a.width,
            b_height: b.height,
            b_width: b.width,
        })
    }
}

/// Dice overlap 2|a n b| / (|a| + |b|). Two empty masks agree perfectly
/// (1.0); exactly one empty mask scores 0.0.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricError> {
    check_shapes(a, b)?;
    let mut na = 0usize;
    let mut nb = 0usize;
    let mut inter = 0usize;
    for (&va, &vb) in a.data.iter().zip(&b.data) {
        na += va as usize;
        nb += vb as usize;
        inter += (va & vb) as usize;
    }
    Ok(match (na, nb) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => 2.0 * inter as f64 / (na + nb) as f64,
    })
}

/// Directed nearest-neighbor distances from every 1-pixel of `from` to the
/// 1-pixel set of `to`, as exact squared Euclidean lengths.
fn directed_squared_distances(from: &BinaryMask, to: &BinaryMask) -> Vec<u64> {
    let targets: Vec<(i64, i64)> = to.ones().map(|(i, j)| (i as i64, j as i64)).collect();
    from.ones()
        .map(|(i, j)| {
            let (i, j) = (i as i64, j as i64);
            targets
                .iter()
                .map(|&(ti, tj)| {
                    let di = i - ti;
                    let dj = j - tj;
                    (di * di + dj * dj) as u64
                })
                .min()
                .expect("non-empty target set")
        })
        .collect()
}

/// Nearest-rank percentile of a list of squared distances, returned as a
/// Euclidean length.
fn nearest_rank_distance(mut squared: Vec<u64>, percentile: f64) -> f64 {
    squared.sort_unstable();
    let n = squared.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    let rank = rank.clamp(1, n);
    (squared[rank - 1] as f64).sqrt()
}

/// Symmetric percentile Hausdorff distance over region pixel sets: the larger
/// of the two directed nearest-rank percentiles. `percentile` must lie in
/// (0, 100]; 100 gives the classical supremum form.
pub fn hausdorff_percentile(
    a: &BinaryMask,
    b: &BinaryMask,
    percentile: f64,
) -> Result<f64, MetricError> {
    assert!(
        percentile > 0.0 && percentile <= 100.0,
        "percentile must be in (0, 100]"
    );
    check_shapes(a, b)?;
    if a.count_ones() == 0 || b.count_ones() == 0 {
        return Err(MetricError::EmptyMask);
    }
    let forward = nearest_rank_distance(directed_squared_distances(a, b), percentile);
    let backward = nearest_rank_distance(directed_squared_distances(b, a), percentile);
    Ok(forward.max(backward))
}

/// 95th-percentile Hausdorff distance, the outlier-robust variant.
pub fn hausdorff95(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricError> {
    hausdorff_percentile(a, b, 95.0)
}
