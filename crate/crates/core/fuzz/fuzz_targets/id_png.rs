#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::split::png_codec::{decode_id_png, encode_id_png};

fuzz_target!(|data: &[u8]| {
    if let Ok((w, h, ids)) = decode_id_png(data) {
        assert_eq!(ids.len() as u64, u64::from(w) * u64::from(h));
        let again = encode_id_png(w, h, &ids).unwrap();
        assert_eq!(decode_id_png(&again).unwrap(), (w, h, ids));
    }
});
