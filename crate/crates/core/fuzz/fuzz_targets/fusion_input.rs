#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::fusion::parse_fusion_input;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(input) = parse_fusion_input(text) {
            for image in &input.images {
                let _ = image.decode();
            }
        }
    }
});
