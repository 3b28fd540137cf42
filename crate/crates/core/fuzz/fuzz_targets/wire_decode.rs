#![no_main]

use cartoseg::backend::wire::{decode, encode, FrameReader};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((frame, used)) = decode(data) {
        // A decoded frame must re-encode to exactly the bytes it came from.
        assert_eq!(encode(&frame), &data[..used]);
    }

    let mut reader = FrameReader::new(data);
    while let Ok(Some(_)) = reader.read_frame() {}
    assert!(reader.offset() <= data.len() as u64);
});
