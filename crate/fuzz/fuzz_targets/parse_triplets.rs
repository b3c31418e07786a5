#![no_main]

use libfuzzer_sys::fuzz_target;
use microgrip::fem::parse_triplets;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_triplets(text) {
            let back = parse_triplets(&m.to_triplet_text()).expect("written triplets parse");
            assert_eq!(m, back);
        }
    }
});
