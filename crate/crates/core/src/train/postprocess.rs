use crate::encoding::JetImage;

/// Keeps the `k` largest pixels and zeros the rest. Equal values are ranked
/// by raster position, earlier first.
pub fn prominence_filter(img: &JetImage, k: usize) -> JetImage {
    let px = img.pixels();
    let mut order: Vec<usize> = (0..px.len()).collect();
    // Stable sort keeps raster order among equal values.
    order.sort_by(|&a, &b| px[b].total_cmp(&px[a]));
    let mut out = JetImage::zeros(img.height(), img.width());
    let dst = out.pixels_mut();
    for &i in order.iter().take(k) {
        dst[i] = px[i];
    }
    out
}
