#![no_main]

use cartoseg::Logits;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(l) = Logits::read_lgt(data) {
        let bytes = l.to_lgt_bytes();
        let again = Logits::read_lgt(&bytes[..]).expect("re-encoded logits parse");
        assert_eq!(again.to_lgt_bytes(), bytes);
    }
});
