#![no_main]

use cartoseg::synth::ColorModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ColorModel::from_json(s) {
        let again = ColorModel::from_json(&m.to_json()).expect("serialized model parses");
        assert_eq!(again.to_json(), m.to_json());
    }
});
