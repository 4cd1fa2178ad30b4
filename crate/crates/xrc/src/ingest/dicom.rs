//! Minimal DICOM support: uncompressed little-endian grayscale only.
//!
//! This covers the source corpus (single-frame MONOCHROME1/2, 8 or 16 bit)
//! and the synthetic fixtures written by [`write_dicom_gray`]. Compressed
//! transfer syntaxes are rejected with a data error.

use std::io::Cursor;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use image::GrayImage;

use crate::error::{Result, XrcError};

const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";
const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";

#[derive(Debug, Clone)]
pub struct DicomImage {
    pub rows: u16,
    pub cols: u16,
    pub bits_allocated: u16,
    /// True for MONOCHROME1 (white-is-zero).
    pub inverted: bool,
    pub pixels: Vec<u16>,
}

impl DicomImage {
    /// Linear min-max window over the full pixel range, then 8-bit
    /// quantization. MONOCHROME1 output is inverted so brighter always
    /// means denser tissue.
    pub fn to_gray8(&self) -> GrayImage {
        let lo = self.pixels.iter().copied().min().unwrap_or(0);
        let hi = self.pixels.iter().copied().max().unwrap_or(0);
        let span = (hi - lo).max(1) as f32;
        let mut img = GrayImage::new(self.cols as u32, self.rows as u32);
        for (i, p) in self.pixels.iter().enumerate() {
            let mut v = ((*p - lo) as f32 / span * 255.0).round() as u8;
            if self.inverted {
                v = 255 - v;
            }
            img.put_pixel(i as u32 % self.cols as u32, i as u32 / self.cols as u32, image::Luma([v]));
        }
        img
    }
}

fn data_err(path: &Path, msg: impl std::fmt::Display) -> XrcError {
    XrcError::Data(format!("DICOM {}: {msg}", path.display()))
}

pub fn decode_dicom(path: &Path) -> Result<DicomImage> {
    let bytes = std::fs::read(path).map_err(|e| XrcError::io(path, e))?;
    if bytes.len() < 132 || &bytes[128..132] != b"DICM" {
        return Err(data_err(path, "missing DICM magic"));
    }
    let mut cur = Cursor::new(&bytes[132..]);

    let mut transfer_syntax = EXPLICIT_VR_LE.to_string();
    let mut rows = 0u16;
    let mut cols = 0u16;
    let mut bits_allocated = 16u16;
    let mut photometric = String::from("MONOCHROME2");
    let mut pixel_data: Option<Vec<u8>> = None;
    let mut explicit = true;
    let mut past_meta = false;

    while (cur.position() as usize) < bytes.len() - 132 {
        let group = cur
            .read_u16::<LittleEndian>()
            .map_err(|_| data_err(path, "truncated element tag"))?;
        let element = cur
            .read_u16::<LittleEndian>()
            .map_err(|_| data_err(path, "truncated element tag"))?;

        // File meta group is always explicit VR; switch syntax after it.
        if group != 0x0002 && !past_meta {
            past_meta = true;
            explicit = transfer_syntax == EXPLICIT_VR_LE;
            if transfer_syntax != EXPLICIT_VR_LE && transfer_syntax != IMPLICIT_VR_LE {
                return Err(data_err(
                    path,
                    format!("unsupported transfer syntax {transfer_syntax}"),
                ));
            }
        }
        let use_explicit = group == 0x0002 || explicit;

        let (vr, length) = if use_explicit {
            let mut vr_bytes = [0u8; 2];
            std::io::Read::read_exact(&mut cur, &mut vr_bytes)
                .map_err(|_| data_err(path, "truncated VR"))?;
            let vr = String::from_utf8_lossy(&vr_bytes).to_string();
            let length = if matches!(vr.as_str(), "OB" | "OW" | "OF" | "SQ" | "UT" | "UN") {
                cur.read_u16::<LittleEndian>()
                    .map_err(|_| data_err(path, "truncated length"))?;
                cur.read_u32::<LittleEndian>()
                    .map_err(|_| data_err(path, "truncated length"))? as usize
            } else {
                cur.read_u16::<LittleEndian>()
                    .map_err(|_| data_err(path, "truncated length"))? as usize
            };
            (vr, length)
        } else {
            let length = cur
                .read_u32::<LittleEndian>()
                .map_err(|_| data_err(path, "truncated length"))? as usize;
            (String::new(), length)
        };

        if length == 0xFFFF_FFFF || vr == "SQ" {
            return Err(data_err(path, "sequences are not supported"));
        }
        let start = 132 + cur.position() as usize;
        if start + length > bytes.len() {
            return Err(data_err(path, "element overruns file"));
        }
        let value = &bytes[start..start + length];
        cur.set_position(cur.position() + length as u64);

        match (group, element) {
            (0x0002, 0x0010) => {
                transfer_syntax = String::from_utf8_lossy(value)
                    .trim_end_matches(['\0', ' '])
                    .to_string();
            }
            (0x0028, 0x0010) => rows = read_us(value, path)?,
            (0x0028, 0x0011) => cols = read_us(value, path)?,
            (0x0028, 0x0100) => bits_allocated = read_us(value, path)?,
            (0x0028, 0x0004) => {
                photometric = String::from_utf8_lossy(value).trim().to_string();
            }
            (0x7FE0, 0x0010) => pixel_data = Some(value.to_vec()),
            _ => {}
        }
    }

    let data = pixel_data.ok_or_else(|| data_err(path, "no pixel data"))?;
    if rows == 0 || cols == 0 {
        return Err(data_err(path, "missing rows/columns"));
    }
    let n = rows as usize * cols as usize;
    let pixels: Vec<u16> = match bits_allocated {
        8 => data.iter().map(|b| *b as u16).collect(),
        16 => data
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
        other => return Err(data_err(path, format!("unsupported bit depth {other}"))),
    };
    if pixels.len() < n {
        return Err(data_err(path, "pixel data shorter than rows*cols"));
    }
    Ok(DicomImage {
        rows,
        cols,
        bits_allocated,
        inverted: photometric.eq_ignore_ascii_case("MONOCHROME1"),
        pixels: pixels[..n].to_vec(),
    })
}

fn read_us(value: &[u8], path: &Path) -> Result<u16> {
    if value.len() < 2 {
        return Err(data_err(path, "short US value"));
    }
    Ok(u16::from_le_bytes([value[0], value[1]]))
}

/// Writes a 16-bit MONOCHROME2 explicit-little-endian DICOM. Test and
/// fixture use only.
pub fn write_dicom_gray(path: &Path, rows: u16, cols: u16, pixels: &[u16]) -> Result<()> {
    assert_eq!(pixels.len(), rows as usize * cols as usize);
    let mut out: Vec<u8> = vec![0; 128];
    out.extend_from_slice(b"DICM");

    let write_short = |out: &mut Vec<u8>, group: u16, elem: u16, vr: &[u8; 2], value: &[u8]| {
        out.write_u16::<LittleEndian>(group).unwrap();
        out.write_u16::<LittleEndian>(elem).unwrap();
        out.extend_from_slice(vr);
        out.write_u16::<LittleEndian>(value.len() as u16).unwrap();
        out.extend_from_slice(value);
    };

    let mut ts = EXPLICIT_VR_LE.as_bytes().to_vec();
    if ts.len() % 2 == 1 {
        ts.push(0);
    }
    write_short(&mut out, 0x0002, 0x0010, b"UI", &ts);

    write_short(&mut out, 0x0028, 0x0002, b"US", &1u16.to_le_bytes());
    write_short(&mut out, 0x0028, 0x0004, b"CS", b"MONOCHROME2 ");
    write_short(&mut out, 0x0028, 0x0010, b"US", &rows.to_le_bytes());
    write_short(&mut out, 0x0028, 0x0011, b"US", &cols.to_le_bytes());
    write_short(&mut out, 0x0028, 0x0100, b"US", &16u16.to_le_bytes());
    write_short(&mut out, 0x0028, 0x0101, b"US", &16u16.to_le_bytes());
    write_short(&mut out, 0x0028, 0x0103, b"US", &0u16.to_le_bytes());

    out.write_u16::<LittleEndian>(0x7FE0).unwrap();
    out.write_u16::<LittleEndian>(0x0010).unwrap();
    out.extend_from_slice(b"OW");
    out.write_u16::<LittleEndian>(0).unwrap();
    out.write_u32::<LittleEndian>(pixels.len() as u32 * 2).unwrap();
    for p in pixels {
        out.write_u16::<LittleEndian>(*p).unwrap();
    }

    std::fs::write(path, out).map_err(|e| XrcError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_and_windowing() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.dcm");
        // 2x3 ramp; min-max window must hit 0 and 255 exactly.
        let pixels: Vec<u16> = vec![100, 200, 300, 400, 500, 600];
        write_dicom_gray(&path, 2, 3, &pixels).unwrap();
        let img = decode_dicom(&path).unwrap();
        assert_eq!((img.rows, img.cols), (2, 3));
        assert!(!img.inverted);
        let gray = img.to_gray8();
        assert_eq!(gray.get_pixel(0, 0).0[0], 0);
        assert_eq!(gray.get_pixel(2, 1).0[0], 255);
    }

    #[test]
    fn garbage_is_a_data_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.dcm");
        std::fs::write(&path, b"not a dicom at all").unwrap();
        let err = decode_dicom(&path).unwrap_err();
        assert!(err.to_string().contains("DICM"));
    }
}
