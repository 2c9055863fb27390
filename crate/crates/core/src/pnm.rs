//! Binary PGM (P5) and PPM (P6) encoding.
//!
//! Only 8-bit rasters are handled. Loading tolerates `#` comment lines in
//! the header; saving always writes the canonical `P5\n<w> <h>\n255\n`
//! header with no comments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::Format(format!("expected magic \"P5\", found {found:?}")));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // At least one whitespace (or comment) separates tokens.
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if pos == start {
            return Err(Error::Format("missing whitespace in header".into()));
        }
        let digits_start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == digits_start {
            return Err(Error::Format(format!("header field {} is not a number", i + 1)));
        }
        let text = std::str::from_utf8(&bytes[digits_start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::Format(format!("header field {} out of range", i + 1)))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("header must end with a single whitespace byte".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval.min(u32::MAX as u64) as u32));
    }
    Ok(Header {
        width: usize::try_from(width).map_err(|_| Error::Format("width too large".into()))?,
        height: usize::try_from(height).map_err(|_| Error::Format("height too large".into()))?,
        maxval: maxval as u32,
        data_offset: pos,
    })
}

/// Decodes a binary PGM stream. Trailing bytes after the pixel payload are ignored.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let header = parse_header(bytes)?;
    debug_assert_eq!(header.maxval, 255);
    let expected = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[header.data_offset..];
    if payload.len() < expected {
        return Err(Error::Size {
            expected,
            actual: payload.len(),
        });
    }
    GrayImage::new(header.width, header.height, payload[..expected].to_vec())
}

pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// Binary PPM (P6) from interleaved RGB triples.
pub fn save_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height, "rgb buffer does not match dimensions");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(rgb.len() * 3);
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

/// Reads a PGM where any nonzero pixel marks the foreground.
pub fn load_mask(bytes: &[u8]) -> Result<BinaryMask> {
    Ok(BinaryMask::nonzero(&load_pgm(bytes)?))
}

/// Writes a mask as a 0/255 PGM.
pub fn save_mask(mask: &BinaryMask) -> Vec<u8> {
    save_pgm(&mask.to_image())
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_pgm(&bytes)
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_mask(&bytes)
}

pub fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_simple_p5() {
        let mut bytes = b"P5 4 4 255\n".to_vec();
        bytes.extend([7u8; 16]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!(img.dims(), (4, 4));
        assert!(img.pixels().iter().all(|&p| p == 7));
    }

    #[test]
    fn tolerates_comments() {
        let mut bytes = b"P5\n# made by hand\n2 # width\n1\n# depth next\n255\n".to_vec();
        bytes.extend([1u8, 2]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[1, 2]);
    }

    #[test]
    fn rejects_ascii_variant() {
        let bytes = b"P2\n2 1\n255\n1 2\n";
        assert!(matches!(load_pgm(bytes), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_sixteen_bit() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend([0u8, 0]);
        assert!(matches!(load_pgm(&bytes), Err(Error::UnsupportedDepth(65535))));
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend([0u8; 15]);
        assert!(matches!(
            load_pgm(&bytes),
            Err(Error::Size {
                expected: 16,
                actual: 15
            })
        ));
    }

    #[test]
    fn canonical_encoding() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        assert_eq!(save_pgm(&img), b"P5\n1 1\n255\n\x00");
        let sevens = GrayImage::filled(4, 4, 7).unwrap();
        let bytes = save_pgm(&sevens);
        assert_eq!(&bytes[..11], b"P5\n4 4\n255\n");
        assert_eq!(&bytes[11..], &[7u8; 16]);
    }

    #[test]
    fn mask_nonzero_convention() {
        let mut bytes = b"P5\n3 1\n255\n".to_vec();
        bytes.extend([0u8, 1, 200]);
        let m = load_mask(&bytes).unwrap();
        assert_eq!(m.bits(), &[false, true, true]);
        assert_eq!(load_mask(&save_mask(&m)).unwrap(), m);
    }

    #[test]
    fn ppm_header() {
        let bytes = save_ppm(1, 1, &[[255, 0, 0]]);
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\x00\x00");
    }
}
