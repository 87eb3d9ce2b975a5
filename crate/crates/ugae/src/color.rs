//! RGB ⇄ YUV conversion (BT.709, full range).
//!
//! Chroma is offset by +128 so every channel lives in `[0, 255]`. The same
//! transform is applied to reference and degraded clouds, which keeps PSNR
//! comparisons internally consistent.

/// Full-range YUV color. Channels are kept in floating point; quantization
/// to 8 bits happens only at the edges of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YuvColor {
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

const KR: f64 = 0.2126;
const KG: f64 = 0.7152;
const KB: f64 = 0.0722;
// Chroma scale factors 2*(1-Kb) and 2*(1-Kr).
const CU: f64 = 1.8556;
const CV: f64 = 1.5748;

pub fn rgb_to_yuv(rgb: [u8; 3]) -> YuvColor {
    rgb_f64_to_yuv([rgb[0] as f64, rgb[1] as f64, rgb[2] as f64])
}

pub fn rgb_f64_to_yuv(rgb: [f64; 3]) -> YuvColor {
    let [r, g, b] = rgb;
    let y = KR * r + KG * g + KB * b;
    YuvColor {
        y,
        u: (b - y) / CU + 128.0,
        v: (r - y) / CV + 128.0,
    }
}

pub fn yuv_to_rgb(yuv: YuvColor) -> [u8; 3] {
    let [r, g, b] = yuv_to_rgb_f64(yuv);
    [quantize_channel(r), quantize_channel(g), quantize_channel(b)]
}

pub fn yuv_to_rgb_f64(yuv: YuvColor) -> [f64; 3] {
    let r = yuv.y + CV * (yuv.v - 128.0);
    let b = yuv.y + CU * (yuv.u - 128.0);
    let g = (yuv.y - KR * r - KB * b) / KG;
    [r, g, b]
}

/// Clamp to `[0, 255]` and round half up.
pub fn quantize_channel(c: f64) -> u8 {
    (c.clamp(0.0, 255.0) + 0.5).floor().min(255.0) as u8
}

#[cfg(test)]
mod tests {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn black_maps_to_zero_luma_neutral_chroma() {
        let yuv = rgb_to_yuv([0, 0, 0]);
        assert_eq!(yuv.y, 0.0);
        assert_eq!(yuv.u, 128.0);
        assert_eq!(yuv.v, 128.0);
    }

    #[test]
    fn white_maps_to_full_luma_neutral_chroma() {
        let yuv = rgb_to_yuv([255, 255, 255]);
        assert!((yuv.y - 255.0).abs() < 1e-9);
        assert!((yuv.u - 128.0).abs() < 1e-9);
        assert!((yuv.v - 128.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100_000 {
            let rgb: [u8; 3] = rng.gen();
            let back = yuv_to_rgb(rgb_to_yuv(rgb));
            for ch in 0..3 {
                let err = (back[ch] as i16 - rgb[ch] as i16).abs();
                assert!(err <= 1, "rgb {rgb:?} -> {back:?}");
            }
        }
    }
}
