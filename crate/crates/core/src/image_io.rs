//! Image ingestion and mask emission.
//!
//! Inputs: 8-bit PGM (P2 ascii / P5 binary, hand-parsed so malformed files
//! report a byte offset) and 8-bit grayscale or RGB PNG. All intensities are
//! divided by 255. Masks are written as 8-bit grayscale PNG with 0/255
//! values.

use std::fs;
use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageFormat};
use thiserror::Error;

use crate::grid::ImageGrid;
use crate::metrics::BinaryMask;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported image format: {detail}")]
    UnsupportedFormat { detail: String },
    #[error("corrupt image file: {detail}")]
    CorruptFile {
        /// Byte offset of the defect when the decoder can tell.
        offset: Option<usize>,
        detail: String,
    },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

fn corrupt(offset: usize, message: impl Into<String>) -> IoError {
    let detail = format!("{} (byte {offset})", message.into());
    IoError::CorruptFile {
        offset: Some(offset),
        detail,
    }
}

/// Pull whitespace- and comment-delimited PGM header tokens while tracking
/// the byte offset.
struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmTokens<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    fn skip_separators(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<u32, IoError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(corrupt(start, format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u32>()
            .map_err(|_| corrupt(start, format!("{what} out of range")))
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid, IoError> {
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        _ => unreachable!("dispatched on magic"),
    };
    let mut tokens = PgmTokens::new(bytes, 2);
    let width = tokens.next_number("width")? as usize;
    let height = tokens.next_number("height")? as usize;
    let maxval_offset = {
        tokens.skip_separators();
        tokens.pos
    };
    let maxval = tokens.next_number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(IoError::UnsupportedFormat {
            detail: format!(
                "only 8-bit PGM is supported, maxval {maxval} at byte {maxval_offset}"
            ),
        });
    }
    if width == 0 || height == 0 {
        return Err(corrupt(2, "zero image dimension"));
    }
    let pixel_count = width * height;
    let mut values = Vec::with_capacity(pixel_count);
    if binary {
        // A single whitespace byte separates the header from the raster.
        let data_start = tokens.pos + 1;
        if tokens.pos >= bytes.len() || !bytes[tokens.pos].is_ascii_whitespace() {
            return Err(corrupt(tokens.pos, "expected whitespace before raster"));
        }
        if bytes.len() < data_start + pixel_count {
            return Err(corrupt(
                bytes.len(),
                format!(
                    "raster truncated, expected {pixel_count} bytes from byte {data_start}"
                ),
            ));
        }
        values.extend(
            bytes[data_start..data_start + pixel_count]
                .iter()
                .map(|&b| b as f64 / 255.0),
        );
    } else {
        for _ in 0..pixel_count {
            let offset = {
                tokens.skip_separators();
                tokens.pos
            };
            let v = tokens.next_number("pixel value")?;
            if v > 255 {
                return Err(corrupt(offset, format!("pixel value {v} exceeds 255")));
            }
            values.push(v as f64 / 255.0);
        }
    }
    ImageGrid::new(height, width, values).map_err(|e| IoError::CorruptFile {
        offset: None,
        detail: e.to_string(),
    })
}

fn decode_png(bytes: &[u8]) -> Result<ImageGrid, IoError> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        IoError::CorruptFile {
            offset: None,
            detail: format!("png decode failed: {e}"),
        }
    })?;
    match decoded {
        DynamicImage::ImageLuma8(gray) => {
            let (w, h) = gray.dimensions();
            ImageGrid::from_fn(h as usize, w as usize, |i, j| {
                gray.get_pixel(j as u32, i as u32)[0] as f64 / 255.0
            })
            .map_err(|e| IoError::CorruptFile {
                offset: None,
                detail: e.to_string(),
            })
        }
        DynamicImage::ImageRgb8(rgb) => {
            let (w, h) = rgb.dimensions();
            ImageGrid::from_fn(h as usize, w as usize, |i, j| {
                let px = rgb.get_pixel(j as u32, i as u32);
                let luma =
                    0.2126 * px[0] as f64 + 0.7152 * px[1] as f64 + 0.0722 * px[2] as f64;
                luma / 255.0
            })
            .map_err(|e| IoError::CorruptFile {
                offset: None,
                detail: e.to_string(),
            })
        }
        other => Err(IoError::UnsupportedFormat {
            detail: format!(
                "only 8-bit grayscale or RGB PNG is supported, found {:?}",
                other.color()
            ),
        }),
    }
}

/// Decode a PGM or PNG file into unit-range intensities.
pub fn load_image(path: &Path) -> Result<ImageGrid, IoError> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 8 && bytes[..8] == [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'] {
        return decode_png(&bytes);
    }
    if bytes.len() >= 2 && (&bytes[..2] == b"P2" || &bytes[..2] == b"P5") {
        return parse_pgm(&bytes);
    }
    Err(IoError::UnsupportedFormat {
        detail: format!(
            "{} is neither PNG nor 8-bit PGM (P2/P5)",
            path.display()
        ),
    })
}

/// Write a mask as 8-bit grayscale PNG, 1 -> 255 and 0 -> 0.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<(), IoError> {
    let img = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        image::Luma([mask.get(y as usize, x as usize) * 255])
    });
    save_gray_png(img, path)
}

/// Write unit-range intensities as 8-bit grayscale PNG (values quantized by
/// rounding to 255ths).
pub fn save_image(image: &ImageGrid, path: &Path) -> Result<(), IoError> {
    let img = GrayImage::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        image::Luma([(image.get(y as usize, x as usize) * 255.0).round() as u8])
    });
    save_gray_png(img, path)
}

fn save_gray_png(img: GrayImage, path: &Path) -> Result<(), IoError> {
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut std::io::Cursor::new(&mut out),
        img.as_raw(),
        img.width(),
        img.height(),
        ColorType::L8,
        ImageFormat::Png,
    )
    .map_err(|e| IoError::UnsupportedFormat {
        detail: format!("png encode failed: {e}"),
    })?;
    fs::write(path, out)?;
    Ok(())
}

/// Read an image file as a mask: intensities at or above one half are set.
pub fn load_mask(path: &Path) -> Result<BinaryMask, IoError> {
    let image = load_image(path)?;
    Ok(BinaryMask::from_fn(image.height(), image.width(), |i, j| {
        image.get(i, j) >= 0.5
    }))
}
