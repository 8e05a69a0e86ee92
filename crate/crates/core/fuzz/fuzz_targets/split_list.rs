#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::split::{expand_split, parse_split_list};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(list) = parse_split_list(text) {
            for spec in &list.splits {
                let _ = expand_split(spec, &list.splits);
            }
        }
    }
});
