//! Binary (P5) 8-bit grayscale images.

use std::path::Path;

use super::binary::{read_file, write_file};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("pgm: {m}"));
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("missing P5 magic"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("only 8-bit images (maxval 255) are supported"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let n = width * height;
        if width == 0 || height == 0 || bytes.len() < pos || bytes.len() - pos != n {
            return Err(bad("raster size does not match the header"));
        }
        Ok(Self {
            width,
            height,
            pixels: bytes[pos..].to_vec(),
        })
    }
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    if img.pixels.len() != img.width * img.height {
        return Err(Error::Shape(format!(
            "{} pixels for a {}x{} image",
            img.pixels.len(),
            img.width,
            img.height
        )));
    }
    write_file(path, &img.encode())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    GrayImage::decode(&read_file(path)?)
}
