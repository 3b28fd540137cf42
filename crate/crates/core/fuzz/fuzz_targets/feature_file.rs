#![no_main]

use cartoseg::geodata::features::parse_feature_line;
use cartoseg::geodata::FeatureFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = FeatureFile::parse(data);
    if let Ok(s) = std::str::from_utf8(data) {
        for line in s.lines() {
            let _ = parse_feature_line(line);
        }
    }
});
