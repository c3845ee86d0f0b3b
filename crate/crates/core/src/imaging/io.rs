use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::{Image, ImagingError};

/// Reads an 8-bit grayscale or RGB PNG.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, ImagingError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decode_err = |e: png::DecodingError| ImagingError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let channels = match (color, depth) {
        (png::ColorType::Grayscale, png::BitDepth::Eight) => 1,
        (png::ColorType::Rgb, png::BitDepth::Eight) => 3,
        _ => {
            return Err(ImagingError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("{color:?} at {depth:?}"),
            })
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImagingError::Decode {
            path: path.to_path_buf(),
            message: "image too large".into(),
        })?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let row = w * channels;
    let mut data = Vec::with_capacity(row * h);
    for y in 0..h {
        let start = y * frame.line_size;
        data.extend_from_slice(&buf[start..start + row]);
    }
    Image::new(w, h, channels, data)
}

/// Writes `img` as an 8-bit PNG (grayscale or RGB by channel count).
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let encode_err = |e: png::EncodingError| ImagingError::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut bytes = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut bytes, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(img.data()).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    fs::write(path, bytes).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })
}
