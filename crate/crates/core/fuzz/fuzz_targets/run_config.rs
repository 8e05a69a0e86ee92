#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            let text = cfg.to_text();
            assert_eq!(RunConfig::parse(&text).unwrap().to_text(), text);
        }
    }
});
