//! Binary PGM (P5, 8-bit) encoding and decoding.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Owned 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Domain(format!(
                "pixel buffer length {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }
}

pub fn encode(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let bad = |reason: &str| Error::malformed(origin, reason);
    let header_end = find_header_end(bytes).ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| bad("header is not valid ASCII"))?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some("P5") {
        return Err(bad("missing P5 magic"));
    }
    let width: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let height: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let maxval: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("only 8-bit PGM supported"));
    }
    let pixels = &bytes[header_end + 1..];
    if pixels.len() != width * height {
        return Err(bad("pixel payload length mismatch"));
    }
    GrayImage::new(width, height, pixels.to_vec())
}

/// Byte offset of the single whitespace separating the maxval token from the
/// pixel payload (the header holds exactly four tokens).
fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let mut tokens = 0;
    let mut in_token = false;
    for (i, &b) in bytes.iter().enumerate() {
        if b.is_ascii_whitespace() {
            if in_token {
                tokens += 1;
                if tokens == 4 {
                    return Some(i);
                }
                in_token = false;
            }
        } else {
            in_token = true;
        }
    }
    None
}

pub fn write(path: &Path, image: &GrayImage) -> Result<()> {
    fs::write(path, encode(image)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 30, 40, 255]).unwrap();
        let bytes = encode(&img);
        let back = decode(&bytes, Path::new("test.pgm")).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rejects_payload_mismatch() {
        let mut bytes = encode(&GrayImage::filled(2, 2, 9));
        bytes.pop();
        assert!(decode(&bytes, Path::new("test.pgm")).is_err());
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(decode(b"P2\n1 1\n255\n0", Path::new("t.pgm")).is_err());
    }
}
