#![no_main]

use std::collections::BTreeMap;

use cartoseg::bias::read_metadata;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let scores: BTreeMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), 0.25)].into();
    if let Ok((records, unscored)) = read_metadata(data, &scores) {
        for r in &records {
            assert_eq!(scores.get(&r.id), Some(&r.miou));
        }
        assert!(unscored.iter().all(|id| !scores.contains_key(id)));
    }
});
