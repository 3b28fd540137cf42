#![no_main]

use cartoseg::LabelMask;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = LabelMask::decode_png(data) {
        assert_eq!(mask.as_raw().len(), mask.width() as usize * mask.height() as usize);
    }
});
