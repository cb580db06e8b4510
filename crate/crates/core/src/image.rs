//! Row-major 8-bit RGBA images and the binary PPM (P6) / PAM (P7) formats
//! used for renderer output and metric input.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad image header: {0}")]
    Header(String),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgba {
    width: usize,
    height: usize,
    pixels: Vec<u8>, // RGBA, row-major
}

impl ImageRgba {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 4],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width * height * 4 {
            return Err(ImageError::Header(format!(
                "{} pixel bytes for a {width}x{height} RGBA image (need {})",
                pixels.len(),
                width * height * 4
            )));
        }
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 4] {
        let i = 4 * (y * self.width + x);
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgba: [u8; 4]) {
        let i = 4 * (y * self.width + x);
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// Mutable view of one row, for renderers that own disjoint rows.
    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, u8> {
        self.pixels.chunks_mut(self.width * 4)
    }

    /// Binary PPM, P6 maxval 255; alpha is dropped.
    pub fn write_ppm(&self, path: &Path) -> Result<(), ImageError> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.width * self.height * 3);
        for px in self.pixels.chunks_exact(4) {
            out.extend_from_slice(&px[..3]);
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// PAM, P7 RGB_ALPHA; keeps the alpha channel.
    pub fn write_pam(&self, path: &Path) -> Result<(), ImageError> {
        let mut out = format!(
            "P7\nWIDTH {}\nHEIGHT {}\nDEPTH 4\nMAXVAL 255\nTUPLTYPE RGB_ALPHA\nENDHDR\n",
            self.width, self.height
        )
        .into_bytes();
        out.extend_from_slice(&self.pixels);
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads a P6 PPM or P7 RGB_ALPHA PAM file, whichever the header says.
    pub fn read(path: &Path) -> Result<Self, ImageError> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(b"P6") {
            Self::parse_ppm(&bytes)
        } else if bytes.starts_with(b"P7") {
            Self::parse_pam(&bytes)
        } else {
            Err(ImageError::Header(
                "expected P6 (PPM) or P7 (PAM) magic".into(),
            ))
        }
    }

    fn parse_ppm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut pos = 2; // past "P6"
        let mut fields = Vec::with_capacity(3);
        while fields.len() < 3 {
            // skip whitespace and comments
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace()) {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::Header("unterminated PPM header".into()));
            }
            let field = std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| ImageError::Header("non-ASCII header field".into()))?;
            fields.push(field.parse::<usize>().map_err(|e| {
                ImageError::Header(format!("bad header field '{field}': {e}"))
            })?);
        }
        if pos >= bytes.len() {
            return Err(ImageError::Header("missing pixel data".into()));
        }
        pos += 1; // single whitespace after maxval
        let (w, h, maxval) = (fields[0], fields[1], fields[2]);
        if maxval != 255 {
            return Err(ImageError::Header(format!(
                "unsupported maxval {maxval} (only 255)"
            )));
        }
        let expected = w * h * 3;
        let data = &bytes[pos..];
        if data.len() < expected {
            return Err(ImageError::Truncated {
                expected,
                found: data.len(),
            });
        }
        let mut pixels = Vec::with_capacity(w * h * 4);
        for px in data[..expected].chunks_exact(3) {
            pixels.extend_from_slice(px);
            pixels.push(255);
        }
        Self::from_pixels(w, h, pixels)
    }

    fn parse_pam(bytes: &[u8]) -> Result<Self, ImageError> {
        let header_end = bytes
            .windows(7)
            .position(|w| w == b"ENDHDR\n")
            .ok_or_else(|| ImageError::Header("PAM header missing ENDHDR".into()))?
            + 7;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| ImageError::Header("non-ASCII PAM header".into()))?;
        let mut width = None;
        let mut height = None;
        let mut depth = None;
        let mut maxval = None;
        for line in header.lines().skip(1) {
            let mut it = line.split_whitespace();
            match (it.next(), it.next()) {
                (Some("WIDTH"), Some(v)) => width = v.parse().ok(),
                (Some("HEIGHT"), Some(v)) => height = v.parse().ok(),
                (Some("DEPTH"), Some(v)) => depth = v.parse().ok(),
                (Some("MAXVAL"), Some(v)) => maxval = v.parse().ok(),
                (Some("TUPLTYPE"), Some(v)) => {
                    if v != "RGB_ALPHA" {
                        return Err(ImageError::Header(format!("unsupported TUPLTYPE {v}")));
                    }
                }
                (Some("ENDHDR"), _) | (None, _) => {}
                (Some(k), _) => {
                    return Err(ImageError::Header(format!("unknown PAM key {k}")));
                }
            }
        }
        let (w, h): (usize, usize) = match (width, height) {
            (Some(w), Some(h)) => (w, h),
            _ => return Err(ImageError::Header("PAM header missing WIDTH/HEIGHT".into())),
        };
        if depth != Some(4) || maxval != Some(255) {
            return Err(ImageError::Header(
                "PAM must be DEPTH 4, MAXVAL 255".into(),
            ));
        }
        let data = &bytes[header_end..];
        let expected = w * h * 4;
        if data.len() < expected {
            return Err(ImageError::Truncated {
                expected,
                found: data.len(),
            });
        }
        Self::from_pixels(w, h, data[..expected].to_vec())
    }
}
