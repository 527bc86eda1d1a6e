//! Fundus image preprocessing: bilinear resize of the RGB image, then
//! Rec.601 luma, scaled to `[0, 1]`.

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Bilinear resampling with half-pixel centers and edge clamping. Returns
/// `out_h * out_w` RGB triples in row-major order.
pub fn resize_bilinear(img: &RgbImage, out_h: usize, out_w: usize) -> Vec<[f64; 3]> {
    let (in_w, in_h) = (img.width() as usize, img.height() as usize);
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let ys = axis(out_h, in_h);
    let xs = axis(out_w, in_w);
    let px = |x: usize, y: usize| img.get_pixel(x as u32, y as u32).0;

    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
            let mut rgb = [0.0; 3];
            for (ch, v) in rgb.iter_mut().enumerate() {
                let top = a[ch] as f64 * (1.0 - tx) + b[ch] as f64 * tx;
                let bottom = c[ch] as f64 * (1.0 - tx) + d[ch] as f64 * tx;
                *v = top * (1.0 - ty) + bottom * ty;
            }
            out.push(rgb);
        }
    }
    out
}

/// `[size, size, 1]` grayscale tensor in `[0, 1]`. Non-square inputs are
/// stretched.
pub fn preprocess(img: &RgbImage, size: usize) -> Result<Tensor<f32>> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Data("empty image".into()));
    }
    let data = resize_bilinear(img, size, size)
        .into_iter()
        .map(|[r, g, b]| {
            let luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b;
            (luma / 255.0).clamp(0.0, 1.0) as f32
        })
        .collect();
    Tensor::from_vec(&[size, size, 1], data)
}

pub fn decode_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

pub fn load_image(path: &Path, size: usize) -> Result<Tensor<f32>> {
    preprocess(&decode_rgb(path)?, size)
}
