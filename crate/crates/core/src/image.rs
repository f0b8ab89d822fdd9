//! Sample grids as binary PGM (grayscale) or PPM (color). Pixel contract:
//! inputs live in [-1, 1] and map affinely onto [0, 255].

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cells per grid row; grids fill row-major and pad the tail with black.
pub const GRID_COLS: usize = 8;

fn to_byte(v: f64) -> u8 {
    (((v + 1.0) * 0.5 * 255.0).round()).clamp(0.0, 255.0) as u8
}

pub fn grid_extension(channels: usize) -> &'static str {
    if channels == 3 {
        "ppm"
    } else {
        "pgm"
    }
}

/// Tiles a batch (n, c, h, w) with c in {1, 3} into one image, `cols` cells
/// per row, and encodes it as binary PGM (c=1) or PPM (c=3).
pub fn encode_grid(images: &Tensor<f64>, cols: usize) -> Result<Vec<u8>> {
    if images.rank() != 4 {
        return Err(Error::InvalidShape {
            shape: images.shape().to_vec(),
            message: "grid input must be (n, c, h, w)".into(),
        });
    }
    let (n, c, h, w) = (images.dim(0), images.dim(1), images.dim(2), images.dim(3));
    if c != 1 && c != 3 {
        return Err(Error::InvalidShape {
            shape: images.shape().to_vec(),
            message: "grids support 1 or 3 channels".into(),
        });
    }
    if n == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one image and one column".into()));
    }

    let rows = n.div_ceil(cols);
    let (gh, gw) = (rows * h, cols * w);
    let mut pixels = vec![0u8; gh * gw * c];
    let data = images.data();
    for i in 0..n {
        let (cell_y, cell_x) = (i / cols, i % cols);
        for ch in 0..c {
            let plane = &data[(i * c + ch) * h * w..(i * c + ch + 1) * h * w];
            for y in 0..h {
                for x in 0..w {
                    let gy = cell_y * h + y;
                    let gx = cell_x * w + x;
                    pixels[(gy * gw + gx) * c + ch] = to_byte(plane[y * w + x]);
                }
            }
        }
    }

    let magic = if c == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{gw} {gh}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn write_grid(path: &Path, images: &Tensor<f64>, cols: usize) -> Result<()> {
    let bytes = encode_grid(images, cols)?;
    fs::write(path, bytes)?;
    Ok(())
}
