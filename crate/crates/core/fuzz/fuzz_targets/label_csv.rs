#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::engine::read_pseudo_labels;
use openset_panoptic::synth::read_truth;

fuzz_target!(|data: &[u8]| {
    let _ = read_pseudo_labels(data);
    let _ = read_truth(data);
});
