//! Silhouette registration onto the 64x64 network grid.
//!
//! The foreground bounding box is cropped and resampled bilinearly so that
//! its height spans all 64 rows, aspect ratio kept. Sample positions use the
//! corner-aligned convention (first and last output rows land exactly on the
//! first and last cropped rows), so an already registered frame maps onto
//! itself. The result is thresholded at 0.5 and shifted horizontally by an
//! integer amount that puts the foreground column centroid in `(31, 32]`.

use super::image::BinaryImage;
use crate::error::{Error, Result};

pub const GEI_SIZE: usize = 64;

pub fn register_frame(frame: &BinaryImage) -> Result<BinaryImage> {
    let (x0, y0, x1, y1) = frame
        .bounding_box()
        .ok_or_else(|| Error::param("cannot register an empty frame"))?;
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let n = GEI_SIZE;

    // source pixels per output pixel is span / (n - 1)
    let span = (h - 1).max(1);
    let canvas_w = (w - 1) * (n - 1) / span + 1;
    let to_src = |i: usize, limit: usize| ((i * span) as f64 / (n - 1) as f64).min((limit - 1) as f64);

    let src = |x: usize, y: usize| frame.get(x0 + x, y0 + y) as u8 as f64;
    let sample = |sy: f64, sx: f64| {
        let (fy, fx) = (sy.floor(), sx.floor());
        let (ty, tx) = (sy - fy, sx - fx);
        let (ya, xa) = (fy as usize, fx as usize);
        let (yb, xb) = ((ya + 1).min(h - 1), (xa + 1).min(w - 1));
        let top = src(xa, ya) * (1.0 - tx) + src(xb, ya) * tx;
        let bottom = src(xa, yb) * (1.0 - tx) + src(xb, yb) * tx;
        top * (1.0 - ty) + bottom * ty
    };

    let mut canvas = vec![0u8; n * canvas_w];
    let (mut count, mut col_sum) = (0i64, 0i64);
    for r in 0..n {
        let sy = to_src(r, h);
        for c in 0..canvas_w {
            let sx = to_src(c, w);
            if sample(sy, sx) >= 0.5 {
                canvas[r * canvas_w + c] = 1;
                count += 1;
                col_sum += c as i64;
            }
        }
    }

    // floor(32 - centroid), in exact integer arithmetic
    let shift = if count > 0 {
        (32 * count - col_sum).div_euclid(count)
    } else {
        (n as i64 - canvas_w as i64).div_euclid(2)
    };
    let mut out = BinaryImage::empty(n, n);
    for r in 0..n {
        for c in 0..canvas_w {
            let col = c as i64 + shift;
            if canvas[r * canvas_w + c] == 1 && (0..n as i64).contains(&col) {
                out.set(col as usize, r, true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn centroid(img: &BinaryImage) -> f64 {
        let mut s = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(x, y) {
                    s += x as f64;
                }
            }
        }
        s / img.foreground_count() as f64
    }

    #[test]
    fn full_frame_becomes_all_ones() {
        for side in [20, 64, 100] {
            let img = BinaryImage::from_fn(side, side, |_, _| true);
            let out = register_frame(&img).unwrap();
            assert_eq!(out.foreground_count(), 64 * 64, "side {side}");
        }
    }

    #[test]
    fn vertical_bar_is_stretched_and_centred() {
        let img = BinaryImage::from_fn(88, 128, |x, y| (40..42).contains(&x) && (30..90).contains(&y));
        let out = register_frame(&img).unwrap();
        let (bx0, by0, bx1, by1) = out.bounding_box().unwrap();
        assert_eq!((by0, by1), (0, 63));
        let c = centroid(&out);
        assert!((c - 32.0).abs() <= 1.0, "centroid {c}");
        assert!(bx1 - bx0 <= 3);
    }

    #[test]
    fn empty_frame_is_rejected() {
        assert!(register_frame(&BinaryImage::empty(8, 8)).is_err());
    }

    #[test]
    fn single_pixel_fills_a_column() {
        let mut img = BinaryImage::empty(9, 9);
        img.set(4, 4, true);
        let out = register_frame(&img).unwrap();
        assert_eq!(out.foreground_count(), 64);
        assert!(out.get(32, 0) && out.get(32, 63));
    }

    fn blob() -> impl Strategy<Value = BinaryImage> {
        // union of a few thick rectangles, always nonempty
        prop::collection::vec((0usize..50, 0usize..80, 3usize..30, 3usize..40), 1..4).prop_map(|rects| {
            BinaryImage::from_fn(88, 128, |x, y| {
                rects
                    .iter()
                    .any(|&(rx, ry, rw, rh)| x >= rx && x < rx + rw && y >= ry && y < ry + rh)
            })
        })
    }

    proptest! {
        #[test]
        fn translation_invariant(img in blob(), dx in 0usize..8, dy in 0usize..9) {
            let (x0, y0, x1, y1) = img.bounding_box().unwrap();
            prop_assume!(x1 + dx < 88 && y1 + dy < 128);
            let shifted = BinaryImage::from_fn(88, 128, |x, y| {
                x >= x0 + dx && y >= y0 + dy && img.get(x - dx, y - dy)
            });
            prop_assert_eq!(register_frame(&img).unwrap(), register_frame(&shifted).unwrap());
        }

        #[test]
        fn idempotent(img in blob()) {
            // silhouette-like aspect, so the canvas is never clipped
            let (x0, y0, x1, y1) = img.bounding_box().unwrap();
            prop_assume!(2 * (x1 - x0 + 1) <= y1 - y0 + 1);
            let once = register_frame(&img).unwrap();
            let (_, y0, _, y1) = once.bounding_box().unwrap();
            prop_assert_eq!((y0, y1), (0, 63));
            prop_assert_eq!(register_frame(&once).unwrap(), once);
        }
    }
}
