//! Image container sniffing by magic bytes.
//!
//! Only headers are read: enough to learn the pixel dimensions and whether the
//! codec is lossy or lossless. Content-Type is never consulted.

use crate::model::{EncodingClass, PixelSize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Jpeg,
    Png,
    Gif,
    WebP,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageInfo {
    pub format: ImageFormat,
    pub size: Option<PixelSize>,
    pub encoding: EncodingClass,
}

pub fn sniff_image(data: &[u8]) -> Option<ImageInfo> {
    if data.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return Some(ImageInfo {
            format: ImageFormat::Jpeg,
            size: jpeg_size(data),
            encoding: EncodingClass::Lossy,
        });
    }
    if data.starts_with(b"\x89PNG\r\n\x1a\n") {
        return Some(ImageInfo {
            format: ImageFormat::Png,
            size: png_size(data),
            encoding: EncodingClass::Lossless,
        });
    }
    if data.starts_with(b"GIF87a") || data.starts_with(b"GIF89a") {
        let size = (data.len() >= 10).then(|| {
            PixelSize::new(
                u32::from(u16::from_le_bytes([data[6], data[7]])),
                u32::from(u16::from_le_bytes([data[8], data[9]])),
            )
        });
        return Some(ImageInfo {
            format: ImageFormat::Gif,
            size: size.filter(|s| s.area() > 0),
            encoding: EncodingClass::Lossless,
        });
    }
    if data.len() >= 12 && &data[0..4] == b"RIFF" && &data[8..12] == b"WEBP" {
        let (size, encoding) = webp_info(data);
        return Some(ImageInfo {
            format: ImageFormat::WebP,
            size,
            encoding,
        });
    }
    None
}

fn be16(d: &[u8], at: usize) -> Option<u32> {
    Some(u32::from(u16::from_be_bytes(
        d.get(at..at + 2)?.try_into().ok()?,
    )))
}

fn le16(d: &[u8], at: usize) -> Option<u32> {
    Some(u32::from(u16::from_le_bytes(
        d.get(at..at + 2)?.try_into().ok()?,
    )))
}

fn le24(d: &[u8], at: usize) -> Option<u32> {
    let b = d.get(at..at + 3)?;
    Some(u32::from(b[0]) | u32::from(b[1]) << 8 | u32::from(b[2]) << 16)
}

fn le32(d: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(d.get(at..at + 4)?.try_into().ok()?))
}

fn jpeg_size(d: &[u8]) -> Option<PixelSize> {
    let mut i = 2;
    loop {
        // Skip to the next marker, tolerating fill bytes.
        while *d.get(i)? != 0xFF {
            i += 1;
        }
        while *d.get(i)? == 0xFF {
            i += 1;
        }
        let marker = *d.get(i)?;
        i += 1;
        match marker {
            0xD8 | 0x01 | 0xD0..=0xD7 => continue,
            0xD9 | 0xDA => return None,
            0xC0..=0xCF if !matches!(marker, 0xC4 | 0xC8 | 0xCC) => {
                let height = be16(d, i + 3)?;
                let width = be16(d, i + 5)?;
                let size = PixelSize::new(width, height);
                return (size.area() > 0).then_some(size);
            }
            _ => {
                let len = be16(d, i)? as usize;
                if len < 2 {
                    return None;
                }
                i += len;
            }
        }
    }
}

fn png_size(d: &[u8]) -> Option<PixelSize> {
    if d.get(12..16)? != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(d.get(16..20)?.try_into().ok()?);
    let h = u32::from_be_bytes(d.get(20..24)?.try_into().ok()?);
    let size = PixelSize::new(w, h);
    (size.area() > 0).then_some(size)
}

fn webp_info(d: &[u8]) -> (Option<PixelSize>, EncodingClass) {
    let Some(fourcc) = d.get(12..16) else {
        return (None, EncodingClass::Unknown);
    };
    match fourcc {
        b"VP8 " => (vp8_size(d, 20), EncodingClass::Lossy),
        b"VP8L" => (vp8l_size(d, 20), EncodingClass::Lossless),
        b"VP8X" => {
            let size = le24(d, 24)
                .zip(le24(d, 27))
                .map(|(w, h)| PixelSize::new(w + 1, h + 1));
            (size, vp8x_encoding(d))
        }
        _ => (None, EncodingClass::Unknown),
    }
}

fn vp8_size(d: &[u8], at: usize) -> Option<PixelSize> {
    if d.get(at + 3..at + 6)? != [0x9D, 0x01, 0x2A] {
        return None;
    }
    let w = le16(d, at + 6)? & 0x3FFF;
    let h = le16(d, at + 8)? & 0x3FFF;
    let size = PixelSize::new(w, h);
    (size.area() > 0).then_some(size)
}

fn vp8l_size(d: &[u8], at: usize) -> Option<PixelSize> {
    if *d.get(at)? != 0x2F {
        return None;
    }
    let bits = le32(d, at + 1)?;
    Some(PixelSize::new(
        (bits & 0x3FFF) + 1,
        ((bits >> 14) & 0x3FFF) + 1,
    ))
}

/// Extended WebP: the first top-level bitstream chunk decides the codec.
fn vp8x_encoding(d: &[u8]) -> EncodingClass {
    let mut i = 12;
    while let (Some(fourcc), Some(len)) = (d.get(i..i + 4), le32(d, i + 4)) {
        match fourcc {
            b"VP8 " => return EncodingClass::Lossy,
            b"VP8L" => return EncodingClass::Lossless,
            _ => {}
        }
        // Chunks are padded to even length.
        let next = (len as usize).saturating_add(len as usize & 1);
        i = match i.checked_add(8 + next) {
            Some(n) => n,
            None => break,
        };
    }
    EncodingClass::Unknown
}
