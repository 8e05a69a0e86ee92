#![no_main]
use libfuzzer_sys::fuzz_target;
use openset_panoptic::engine::{read_proposals, write_proposals};

fuzz_target!(|data: &[u8]| {
    if let Ok((dim, records)) = read_proposals(data) {
        assert!(records.iter().all(|r| r.feature.len() == dim));
        let mut buf = Vec::new();
        write_proposals(&mut buf, dim, &records).unwrap();
        let (dim2, again) = read_proposals(&buf).unwrap();
        let mut buf2 = Vec::new();
        write_proposals(&mut buf2, dim2, &again).unwrap();
        assert_eq!(buf, buf2);
    }
});
