#![no_main]

use libfuzzer_sys::fuzz_target;
use microgrip::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything accepted must echo to a file that parses back to itself.
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.to_toml()).expect("echoed config parses");
        assert_eq!(cfg, again);
    }
});
