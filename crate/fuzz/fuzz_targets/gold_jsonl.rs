#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(gold) = psyling::corpus::parse_gold_jsonl(text) {
        let _ = psyling::corpus::dataset_stats(&gold);
    }
});
