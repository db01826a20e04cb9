//! Grayscale image ingestion: PGM (P2/P5) and CSV matrices, bilinear
//! subsampling, conversion to measures on 2D grids, and the index-map
//! transforms (translate / rotate by quarter turns / mirror) used by the
//! digit-alignment experiment.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::cost::FeatureCost;
use crate::error::{Error, Result};
use crate::grid::UniformGrid2D;
use crate::measure::DiscreteMeasure;

/// Feature costs between 8-bit images are measured in gray levels by
/// default, i.e. the unit-interval intensity difference times 255.
pub const GRAY_LEVEL_SCALE: f64 = 255.0;

/// Grayscale raster with intensities in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayscaleImage {
    /// Build from row-major samples, clamping intensities into [0, 1].
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::UnsupportedFormat {
                reason: "image dimensions must be positive".into(),
            });
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        let pixels = pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Load a PGM (`P2` ASCII or `P5` binary) or CSV matrix image.
    /// CSV values above 1 are taken to be 8-bit levels and divided by 255.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::FileNotFound {
                    path: path.display().to_string(),
                }
            } else {
                Error::Io(e)
            }
        })?;
        if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            parse_pgm(&bytes, path)
        } else {
            parse_csv_image(&bytes, path)
        }
    }

    /// Bilinear resample to `side x side`.
    pub fn subsample(&self, side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::UnsupportedFormat {
                reason: "subsample side must be positive".into(),
            });
        }
        let mut pixels = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                let y = ((r as f64 + 0.5) * self.height as f64 / side as f64 - 0.5)
                    .clamp(0.0, (self.height - 1) as f64);
                let x = ((c as f64 + 0.5) * self.width as f64 / side as f64 - 0.5)
                    .clamp(0.0, (self.width - 1) as f64);
                let (y0, x0) = (y.floor() as usize, x.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
                let (fy, fx) = (y - y0 as f64, x - x0 as f64);
                let top = self.pixel(y0, x0) * (1.0 - fx) + self.pixel(y0, x1) * fx;
                let bottom = self.pixel(y1, x0) * (1.0 - fx) + self.pixel(y1, x1) * fx;
                pixels.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        Self::new(side, side, pixels)
    }

    /// Intensities in the column-major flattening order of a square grid:
    /// index `col * side + row`.
    pub fn column_major_intensities(&self) -> Result<Vec<f64>> {
        if self.width != self.height {
            return Err(Error::NotSquareGrid {
                rows: self.height,
                cols: self.width,
            });
        }
        let n = self.width;
        let mut out = Vec::with_capacity(n * n);
        for col in 0..n {
            for row in 0..n {
                out.push(self.pixel(row, col));
            }
        }
        Ok(out)
    }

    /// Normalized intensities as a measure on a square grid with the given
    /// spacing and power. Fails with [`Error::ZeroMassImage`] on an all-black
    /// image.
    pub fn to_measure(&self, spacing: f64, power: u32) -> Result<DiscreteMeasure<f64>> {
        let mut weights = self.column_major_intensities()?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMassImage);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let grid = UniformGrid2D::new(self.width, spacing, power)?;
        DiscreteMeasure::new(weights, grid)
    }

    /// Shift by whole pixels, filling vacated pixels with black.
    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        let mut pixels = vec![0.0; self.pixels.len()];
        for r in 0..self.height {
            for c in 0..self.width {
                let (sr, sc) = (r as i64 - dy, c as i64 - dx);
                if sr >= 0 && sr < self.height as i64 && sc >= 0 && sc < self.width as i64 {
                    pixels[r * self.width + c] = self.pixel(sr as usize, sc as usize);
                }
            }
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Rotate by `turns` quarter turns counterclockwise; stays on-grid, so
    /// the multiset of intensities (and the total mass) is unchanged.
    pub fn rotated90(&self, turns: u32) -> Self {
        let mut img = self.clone();
        for _ in 0..(turns % 4) {
            let (w, h) = (img.width, img.height);
            let mut pixels = vec![0.0; w * h];
            // (r, c) -> (h' - 1 - c', r') with swapped dims
            for r in 0..h {
                for c in 0..w {
                    pixels[(w - 1 - c) * h + r] = img.pixel(r, c);
                }
            }
            img = Self {
                width: h,
                height: w,
                pixels,
            };
        }
        img
    }

    /// Mirror left-right.
    pub fn mirrored(&self) -> Self {
        let mut pixels = vec![0.0; self.pixels.len()];
        for r in 0..self.height {
            for c in 0..self.width {
                pixels[r * self.width + c] = self.pixel(r, self.width - 1 - c);
            }
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// `c_ip = scale * |gray_a(i) - gray_b(p)|` over the column-major point
/// orders of two square images; `scale` is usually [`GRAY_LEVEL_SCALE`].
pub fn feature_cost_from_images(
    a: &GrayscaleImage,
    b: &GrayscaleImage,
    scale: f64,
) -> Result<FeatureCost<f64>> {
    let ga = a.column_major_intensities()?;
    let gb = b.column_major_intensities()?;
    let values = Array2::from_shape_fn((ga.len(), gb.len()), |(i, p)| {
        scale * (ga[i] - gb[p]).abs()
    });
    FeatureCost::new(values)
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayscaleImage> {
    let ascii = bytes[1] == b'2';
    let mut pos = 2;
    let mut header = [0usize; 3]; // width, height, maxval
    let mut found = 0;
    while found < 3 {
        skip_pgm_separators(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, 0, "truncated PGM header"));
        }
        let token = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| parse_err(path, 0, "non-ASCII PGM header"))?;
        header[found] = token
            .parse()
            .map_err(|_| parse_err(path, 0, "bad integer in PGM header"))?;
        found += 1;
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err(path, 0, "bad PGM dimensions or maxval"));
    }

    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if ascii {
        let body = std::str::from_utf8(&bytes[pos..])
            .map_err(|_| parse_err(path, 0, "non-ASCII P2 body"))?;
        for token in body.split_ascii_whitespace().take(count) {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(path, 0, "bad integer in P2 body"))?;
            pixels.push(v / maxval as f64);
        }
    } else {
        pos += 1; // single whitespace after maxval
        let wide = maxval > 255;
        let needed = count * if wide { 2 } else { 1 };
        if bytes.len() < pos + needed {
            return Err(parse_err(path, 0, "truncated P5 body"));
        }
        for i in 0..count {
            let v = if wide {
                u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]) as f64
            } else {
                bytes[pos + i] as f64
            };
            pixels.push(v / maxval as f64);
        }
    }
    if pixels.len() != count {
        return Err(parse_err(path, 0, "PGM body shorter than header promises"));
    }
    GrayscaleImage::new(width, height, pixels)
}

fn skip_pgm_separators(bytes: &[u8], pos: &mut usize) {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            return;
        }
    }
}

fn parse_csv_image(bytes: &[u8], path: &Path) -> Result<GrayscaleImage> {
    let text = std::str::from_utf8(bytes).map_err(|_| parse_err(path, 0, "binary data"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno + 1, "not a number"))?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, lineno + 1, "ragged CSV matrix"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::UnsupportedFormat {
            reason: format!("{} holds no CSV rows", path.display()),
        });
    }
    let width = rows[0].len();
    let height = rows.len();
    let mut pixels: Vec<f64> = rows.into_iter().flatten().collect();
    let max = pixels.iter().cloned().fold(0.0, f64::max);
    if max > 1.0 {
        pixels.iter_mut().for_each(|p| *p /= 255.0);
    }
    GrayscaleImage::new(width, height, pixels)
}

fn parse_err(path: &Path, line: usize, reason: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}
