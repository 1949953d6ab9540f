//! Binary netpbm writers for traced sampling patterns.

use std::io::Write;

use crate::error::{invalid, Result};
use crate::trace::{submap_owner_grid, TraceState};

/// A binary (P5) greyscale image.
pub fn write_pgm(out: &mut impl Write, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(invalid(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.write_all(pixels)?;
    Ok(())
}

/// A binary (P6) RGB image; `pixels` holds one `[r, g, b]` per pixel.
pub fn write_ppm(out: &mut impl Write, width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(invalid(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    write!(out, "P6\n{width} {height}\n255\n")?;
    out.write_all(&pixels.concat())?;
    Ok(())
}

/// Sampled positions in white on black.
pub fn trace_mask(state: &TraceState) -> Vec<u8> {
    submap_owner_grid(state)
        .into_iter()
        .map(|o| if o.is_some() { 255 } else { 0 })
        .collect()
}

/// Colour for submap `id`: evenly spread hues at full saturation.
pub fn palette(id: usize, count: usize) -> [u8; 3] {
    let hue = id as f64 / count.max(1) as f64 * 6.0;
    let sector = hue.floor() as usize % 6;
    let f = hue - hue.floor();
    let (up, down) = ((255.0 * f).round() as u8, (255.0 * (1.0 - f)).round() as u8);
    match sector {
        0 => [255, up, 0],
        1 => [down, 255, 0],
        2 => [0, 255, up],
        3 => [0, down, 255],
        4 => [up, 0, 255],
        _ => [255, 0, down],
    }
}

/// Sampled positions coloured by the submap that owns them, black elsewhere.
pub fn trace_colors(state: &TraceState) -> Vec<[u8; 3]> {
    let count = state.submaps.len();
    submap_owner_grid(state)
        .into_iter()
        .map(|o| o.map_or([0, 0, 0], |id| palette(id, count)))
        .collect()
}
