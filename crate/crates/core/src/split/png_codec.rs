//! 24-bit segment-id PNG encoding: `id = R + 256·G + 65536·B`.

use std::io::Cursor;

use super::SplitError;

pub const MAX_SEGMENT_ID: u32 = (1 << 24) - 1;

pub fn rgb_to_id(rgb: [u8; 3]) -> u32 {
    u32::from(rgb[0]) + 256 * u32::from(rgb[1]) + 65536 * u32::from(rgb[2])
}

pub fn id_to_rgb(id: u32) -> [u8; 3] {
    [(id & 0xff) as u8, ((id >> 8) & 0xff) as u8, ((id >> 16) & 0xff) as u8]
}

/// Decodes an RGB(A) 8-bit PNG into `(width, height, ids)`.
pub fn decode_id_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u32>), SplitError> {
    let bad = |e: png::DecodingError| SplitError::Png(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| SplitError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(SplitError::Png(format!(
                "expected RGB or RGBA, found {other:?}"
            )))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut ids = Vec::with_capacity(w * h);
    for row in buf[..info.line_size * h].chunks_exact(info.line_size) {
        ids.extend(
            row[..w * channels]
                .chunks_exact(channels)
                .map(|px| rgb_to_id([px[0], px[1], px[2]])),
        );
    }
    Ok((info.width, info.height, ids))
}

/// Encodes ids as an RGB PNG with fixed encoder settings, so equal input
/// gives equal bytes.
pub fn encode_id_png(width: u32, height: u32, ids: &[u32]) -> Result<Vec<u8>, SplitError> {
    if ids.len() != width as usize * height as usize {
        return Err(SplitError::Png(format!(
            "{} ids for a {width}x{height} image",
            ids.len()
        )));
    }
    let mut data = Vec::with_capacity(ids.len() * 3);
    for &id in ids {
        if id > MAX_SEGMENT_ID {
            return Err(SplitError::Png(format!("segment id {id} exceeds 24 bits")));
        }
        data.extend_from_slice(&id_to_rgb(id));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Paeth);
        let mut writer = enc
            .write_header()
            .map_err(|e| SplitError::Png(e.to_string()))?;
        writer
            .write_image_data(&data)
            .map_err(|e| SplitError::Png(e.to_string()))?;
        writer.finish().map_err(|e| SplitError::Png(e.to_string()))?;
    }
    Ok(out)
}
