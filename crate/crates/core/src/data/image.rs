//! Binary silhouettes and the binary (P5) portable graymap format.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A row-major image whose pixels are 0 (background) or 1 (foreground).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image dimensions must be nonzero"));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|&p| p > 1) {
            return Err(Error::param(format!("pixel {i} has value {}, expected 0 or 1", pixels[i])));
        }
        Ok(BinaryImage { width, height, pixels })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y) as u8);
            }
        }
        BinaryImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.pixels[y * self.width + x] = on as u8;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    /// Inclusive `(x0, y0, x1, y1)` of the foreground, `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }
}

/// An 8-bit graymap as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub data: Vec<u8>,
}

impl GrayImage {
    /// Interprets 0 as background and `maxval` as foreground. The error
    /// message names the first offending pixel.
    pub fn to_binary(&self) -> std::result::Result<BinaryImage, String> {
        let mut pixels = Vec::with_capacity(self.data.len());
        for (i, &v) in self.data.iter().enumerate() {
            if v == 0 {
                pixels.push(0);
            } else if v == self.maxval {
                pixels.push(1);
            } else {
                return Err(format!(
                    "non-binary value {v} at ({}, {})",
                    i % self.width,
                    i / self.width
                ));
            }
        }
        Ok(BinaryImage {
            width: self.width,
            height: self.height,
            pixels,
        })
    }

    pub fn from_binary(img: &BinaryImage) -> Self {
        GrayImage {
            width: img.width,
            height: img.height,
            maxval: 255,
            data: img.pixels.iter().map(|&p| p * 255).collect(),
        }
    }

    /// Quantises values in [0, 1] as `round(255 * v)`.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Self {
        GrayImage {
            width,
            height,
            maxval: 255,
            data: values.iter().map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        if bytes.get(..2) != Some(b"P5") {
            return Err(Error::format(0, "missing P5 magic"));
        }
        pos += 2;
        let mut fields = [0usize; 3];
        for field in &mut fields {
            // whitespace and comments between header fields
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(pos as u64, "expected a header number"));
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::format(start as u64, "header number out of range"))?;
        }
        let [width, height, maxval] = fields;
        if width == 0 || height == 0 {
            return Err(Error::format(0, "zero image dimension"));
        }
        if maxval == 0 || maxval > 255 {
            return Err(Error::format(0, format!("unsupported maxval {maxval}")));
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::format(pos as u64, "expected whitespace after header"));
        }
        pos += 1;
        let n = width * height;
        if bytes.len() - pos < n {
            return Err(Error::format(
                bytes.len() as u64,
                format!("raster truncated: need {n} bytes, have {}", bytes.len() - pos),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            maxval: maxval as u8,
            data: bytes[pos..pos + n].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = BinaryImage::from_fn(5, 3, |x, y| (x + y) % 2 == 0);
        let gray = GrayImage::from_binary(&img);
        let back = GrayImage::decode(&gray.encode()).unwrap();
        assert_eq!(back, gray);
        assert_eq!(back.to_binary().unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n2 # width\n1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        let g = GrayImage::decode(&bytes).unwrap();
        assert_eq!((g.width, g.height), (2, 1));
        assert_eq!(g.data, vec![0, 255]);
    }

    #[test]
    fn non_binary_value_is_reported() {
        let g = GrayImage {
            width: 2,
            height: 2,
            maxval: 255,
            data: vec![0, 255, 128, 0],
        };
        let err = g.to_binary().unwrap_err();
        assert!(err.contains("128") && err.contains("(0, 1)"), "{err}");
    }

    #[test]
    fn truncated_and_bad_magic() {
        assert!(matches!(GrayImage::decode(b"P2\n1 1\n255\n\0"), Err(Error::Format { offset: 0, .. })));
        let err = GrayImage::decode(b"P5\n4 4\n255\n\0\0").unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn bounding_box() {
        let mut img = BinaryImage::empty(10, 8);
        assert_eq!(img.bounding_box(), None);
        img.set(3, 2, true);
        img.set(7, 5, true);
        assert_eq!(img.bounding_box(), Some((3, 2, 7, 5)));
        assert_eq!(img.foreground_count(), 2);
    }

    #[test]
    fn unit_quantisation_rounds() {
        let g = GrayImage::from_unit(3, 1, &[0.0, 0.5, 1.0]);
        assert_eq!(g.data, vec![0, 128, 255]);
    }
}
