//! Confusion-matrix raster plots.
//!
//! No font dependency: cell counts and axis labels are drawn with a small
//! built-in 5x7 bitmap glyph set.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Result, XrcError};
use crate::ingest::{ClassLabel, NUM_CLASSES};

use super::confusion::ConfusionMatrix;

const CELL: u32 = 72;
const MARGIN: u32 = 36;

pub fn render_confusion_png(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    let size = MARGIN + CELL * NUM_CLASSES as u32 + 8;
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));

    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let x0 = MARGIN + j as u32 * CELL;
            let y0 = MARGIN + i as u32 * CELL;
            let heat = (count as f64 / max as f64).sqrt();
            let shade = 255 - (heat * 200.0) as u8;
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL {
                    let border = x == x0 || y == y0 || x == x0 + CELL - 1 || y == y0 + CELL - 1;
                    let px = if border {
                        Rgb([60, 60, 60])
                    } else {
                        Rgb([shade, shade, 255])
                    };
                    img.put_pixel(x, y, px);
                }
            }
            let text = count.to_string();
            let ink = if shade < 110 { [255, 255, 255] } else { [20, 20, 20] };
            let text_w = text.len() as u32 * 6 * 2;
            draw_text(
                &mut img,
                &text,
                x0 + CELL / 2 - text_w.min(CELL) / 2,
                y0 + CELL / 2 - 7,
                2,
                Rgb(ink),
            );
        }
    }
    // Axis labels: rows true class, columns predicted, by initial.
    for (k, class) in ClassLabel::ALL.iter().enumerate() {
        let initial = &class.as_str()[..1];
        draw_text(
            &mut img,
            initial,
            MARGIN + k as u32 * CELL + CELL / 2 - 5,
            10,
            2,
            Rgb([0, 0, 0]),
        );
        draw_text(
            &mut img,
            initial,
            10,
            MARGIN + k as u32 * CELL + CELL / 2 - 7,
            2,
            Rgb([0, 0, 0]),
        );
    }
    img.save(path)
        .map_err(|e| XrcError::Data(format!("writing plot {}: {e}", path.display())))?;
    Ok(())
}

/// 5x7 glyphs for digits and the class initials.
fn glyph(c: char) -> [u8; 7] {
    // Each byte is one row, low 5 bits used, MSB-left.
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'N' => [0x11, 0x19, 0x19, 0x15, 0x13, 0x13, 0x11],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        _ => [0; 7],
    }
}

fn draw_text(img: &mut RgbImage, text: &str, x: u32, y: u32, scale: u32, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    for (ci, c) in text.chars().enumerate() {
        let rows = glyph(c);
        for (ry, bits) in rows.iter().enumerate() {
            for rx in 0..5u32 {
                if bits & (0x10 >> rx) != 0 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let px = x + ci as u32 * 6 * scale + rx * scale + dx;
                            let py = y + ry as u32 * scale + dy;
                            if px < w && py < h {
                                img.put_pixel(px, py, color);
                            }
                        }
                    }
                }
            }
        }
    }
}
