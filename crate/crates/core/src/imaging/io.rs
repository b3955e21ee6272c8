//! PNG encode/decode and box overlays.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::geometry::BBox;
use super::raster::RasterImage;
use super::ImagingError;

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, ImagingError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImagingError::Codec(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    RasterImage::new(w, h, img.into_raw())
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, ImagingError> {
    let buf = RgbImage::from_raw(img.width(), img.height(), img.data().to_vec())
        .ok_or_else(|| ImagingError::Codec("buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImagingError::Codec(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read_png(path: &Path) -> Result<RasterImage, ImagingError> {
    let bytes = std::fs::read(path).map_err(|e| ImagingError::Io(format!("{}: {e}", path.display())))?;
    decode_png(&bytes)
}

pub fn write_png(img: &RasterImage, path: &Path) -> Result<(), ImagingError> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| ImagingError::Io(format!("{}: {e}", path.display())))
}

/// Draw a rectangle outline of the given thickness, clipped to the image.
pub fn draw_box(img: &mut RasterImage, b: &BBox, rgb: [u8; 3], thickness: u32) {
    let Some(b) = img.bounds().intersect(b) else {
        return;
    };
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            let edge = x < b.x0 + thickness
                || x + thickness >= b.x1
                || y < b.y0 + thickness
                || y + thickness >= b.y1;
            if edge {
                img.set_pixel(x, y, rgb);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mut img = RasterImage::filled(7, 5, [10, 20, 30]).unwrap();
        img.set_pixel(6, 4, [255, 0, 1]);
        let back = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
        assert!(decode_png(b"not a png").is_err());
    }

    #[test]
    fn outline_only() {
        let mut img = RasterImage::filled(10, 10, [0, 0, 0]).unwrap();
        draw_box(&mut img, &BBox::new(2, 2, 8, 8).unwrap(), [255, 0, 0], 1);
        assert_eq!(img.pixel(2, 5), [255, 0, 0]);
        assert_eq!(img.pixel(5, 5), [0, 0, 0]);
    }
}
